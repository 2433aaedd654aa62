//! Last-resort chit-chat: an add-k smoothed n-gram language model used for
//! perplexity diagnostics, and a deterministic pick from a pool of neutral
//! reply templates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::{extract_body_parts, BodyLexicon};
use crate::tokenize::tokenize;

pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const UNKNOWN: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub order: usize,
    pub smoothing_k: f64,
    /// Tokens seen fewer times than this become [`UNKNOWN`].
    pub min_count: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self { order: 3, smoothing_k: 0.1, min_count: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramModel {
    pub n: usize,
    pub smoothing_k: f64,
    pub vocab: BTreeSet<String>,
    /// Context tokens joined by a space -> next token -> count.
    pub counts: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(skip)]
    totals: HashMap<String, u64>,
}

fn context_key(context: &[String]) -> String {
    context.join(" ")
}

impl NgramModel {
    /// A model with no observations: every context is unseen, so every token
    /// has probability `1 / |vocab|`.
    pub fn uniform(n: usize, smoothing_k: f64, vocab: BTreeSet<String>) -> Self {
        Self { n, smoothing_k, vocab, counts: BTreeMap::new(), totals: HashMap::new() }
    }

    fn rebuild_totals(&mut self) {
        self.totals = self.counts.iter().map(|(ctx, next)| (ctx.clone(), next.values().sum())).collect();
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: Self = serde_json::from_str(text)?;
        model.rebuild_totals();
        Ok(model)
    }

    fn map_token(&self, token: String) -> String {
        if self.vocab.contains(&token) {
            token
        } else {
            UNKNOWN.to_string()
        }
    }

    /// Padded token sequence: `n - 1` start markers, mapped tokens, end marker.
    fn padded(&self, text: &str) -> Vec<String> {
        let mut seq = vec![START.to_string(); self.n - 1];
        seq.extend(tokenize(text).into_iter().map(|t| self.map_token(t)));
        seq.push(END.to_string());
        seq
    }

    /// `(count(context, token) + k) / (count(context) + k * |vocab|)`
    pub fn prob(&self, context: &[String], token: &str) -> f64 {
        let key = context_key(context);
        let count = self.counts.get(&key).and_then(|m| m.get(token)).copied().unwrap_or(0);
        let total = self.totals.get(&key).copied().unwrap_or(0);
        (count as f64 + self.smoothing_k) / (total as f64 + self.smoothing_k * self.vocab.len() as f64)
    }

    pub fn context_total(&self, context: &[String]) -> u64 {
        self.totals.get(&context_key(context)).copied().unwrap_or(0)
    }
}

fn validate(texts: &[impl AsRef<str>], config: &NgramConfig) -> Result<()> {
    if texts.is_empty() {
        return Err(Error::EmptyInput("language model needs training text"));
    }
    if config.order == 0 {
        return Err(Error::InvalidConfig("n-gram order must be at least 1".into()));
    }
    if !(config.smoothing_k.is_finite() && config.smoothing_k > 0.0) {
        return Err(Error::InvalidConfig(format!("smoothing_k must be positive, got {}", config.smoothing_k)));
    }
    Ok(())
}

/// Vocabulary of tokens seen at least `min_count` times, plus the markers.
pub fn build_vocab<S: AsRef<str>>(texts: &[S], min_count: usize) -> BTreeSet<String> {
    let mut freq: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for token in tokenize(text.as_ref()) {
            *freq.entry(token).or_default() += 1;
        }
    }
    let mut vocab: BTreeSet<String> = freq.into_iter().filter(|(_, c)| *c >= min_count).map(|(t, _)| t).collect();
    vocab.extend([START, END, UNKNOWN].map(String::from));
    vocab
}

pub fn train_ngram<S: AsRef<str>>(texts: &[S], config: &NgramConfig) -> Result<NgramModel> {
    validate(texts, config)?;
    let vocab = build_vocab(texts, config.min_count);
    train_ngram_with_vocab(texts, config, vocab)
}

/// Trains over a fixed vocabulary, so models trained on different text can
/// be compared token for token.
pub fn train_ngram_with_vocab<S: AsRef<str>>(
    texts: &[S],
    config: &NgramConfig,
    mut vocab: BTreeSet<String>,
) -> Result<NgramModel> {
    validate(texts, config)?;
    vocab.extend([START, END, UNKNOWN].map(String::from));
    let mut model = NgramModel::uniform(config.order, config.smoothing_k, vocab);
    let width = config.order - 1;
    for text in texts {
        let seq = model.padded(text.as_ref());
        for i in width..seq.len() {
            let key = context_key(&seq[i - width..i]);
            *model.counts.entry(key).or_default().entry(seq[i].clone()).or_default() += 1;
        }
    }
    model.rebuild_totals();
    Ok(model)
}

/// Probability of each predicted token of `text` (its words, then the end
/// marker) given the preceding `n - 1` tokens.
pub fn sequence_prob(model: &NgramModel, text: &str) -> Vec<f64> {
    let seq = model.padded(text);
    let width = model.n - 1;
    (width..seq.len()).map(|i| model.prob(&seq[i - width..i], &seq[i])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmEval {
    pub nll: f64,
    pub ppl: f64,
}

/// Mean per-token natural-log NLL over every predicted token; `ppl =
/// exp(nll)`.
pub fn evaluate_lm<S: AsRef<str>>(model: &NgramModel, texts: &[S]) -> Result<LmEval> {
    if texts.is_empty() {
        return Err(Error::EmptyInput("language model evaluation needs text"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for text in texts {
        for p in sequence_prob(model, text.as_ref()) {
            total -= p.ln();
            count += 1;
        }
    }
    let nll = total / count as f64;
    Ok(LmEval { nll, ppl: nll.exp() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplyPool(Vec<String>);

impl ReplyPool {
    pub fn new(templates: Vec<String>) -> Result<Self> {
        if templates.is_empty() || templates.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::InvalidConfig("reply pool needs non-empty templates".into()));
        }
        Ok(Self(templates))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(serde_json::from_str(text)?)
    }

    /// The shipped pool.
    pub fn builtin() -> Self {
        Self::from_json(crate::fixtures::REPLIES_JSON).expect("bundled reply pool is valid")
    }

    pub fn templates(&self) -> &[String] {
        &self.0
    }
}

/// FNV-1a over the utterance bytes followed by the seed.
fn reply_hash(utterance: &str, seed: u64) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in utterance.bytes().chain(seed.to_le_bytes()) {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

pub fn generic_reply<'a>(pool: &'a ReplyPool, utterance: &str, seed: u64) -> &'a str {
    let templates = pool.templates();
    &templates[(reply_hash(utterance, seed) % templates.len() as u64) as usize]
}

const CONDITION_VERBS: [&str; 18] = [
    "hurt",
    "hurts",
    "ache",
    "aches",
    "swell",
    "swells",
    "swollen",
    "treat",
    "treats",
    "take",
    "infect",
    "infected",
    "bleed",
    "bleeds",
    "diagnose",
    "prescribe",
    "inject",
    "apply",
];

/// True when `text` names a body part and uses a condition or treatment verb.
pub fn looks_like_medical_advice(lexicon: &BodyLexicon, text: &str) -> bool {
    let tokens = tokenize(text);
    !extract_body_parts(lexicon, text).is_empty() && tokens.iter().any(|t| CONDITION_VERBS.contains(&t.as_str()))
}

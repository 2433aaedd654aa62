//! Topic-restricted BM25 retrieval over the sentence bank.
//!
//! Collection statistics (sentence count, document frequency, average
//! length) are taken per topic, so sentences filed under other topics never
//! influence a ranking.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledSentence};
use crate::error::{Error, Result};
use crate::tokenize::tokenize;

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceIndex {
    /// token -> (sentence id, term frequency), ids ascending.
    pub postings: BTreeMap<String, Vec<(usize, u32)>>,
    pub sentences: Vec<LabeledSentence>,
    pub doc_lengths: Vec<usize>,
    pub avg_len: f64,
    pub by_topic: BTreeMap<String, BTreeSet<usize>>,
    pub topic_avg_len: BTreeMap<String, f64>,
}

pub fn build_index(bank: &[LabeledSentence]) -> Result<SentenceIndex> {
    if bank.is_empty() {
        return Err(Error::EmptyInput("cannot index an empty sentence bank"));
    }
    let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(bank.len());
    let mut by_topic: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (id, sentence) in bank.iter().enumerate() {
        let tokens = tokenize(&sentence.text);
        doc_lengths.push(tokens.len());
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokens {
            *tf.entry(token).or_default() += 1;
        }
        for (token, count) in tf {
            postings.entry(token).or_default().push((id, count));
        }
        by_topic.entry(sentence.topic.clone()).or_default().insert(id);
    }
    let avg_len = doc_lengths.iter().sum::<usize>() as f64 / bank.len() as f64;
    let topic_avg_len = by_topic
        .iter()
        .map(|(topic, ids)| {
            let total: usize = ids.iter().map(|&i| doc_lengths[i]).sum();
            (topic.clone(), total as f64 / ids.len() as f64)
        })
        .collect();
    Ok(SentenceIndex { postings, sentences: bank.to_vec(), doc_lengths, avg_len, by_topic, topic_avg_len })
}

impl SentenceIndex {
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        build_index(&crate::corpus::sentence_bank(corpus))
    }

    pub fn has_topic(&self, topic: &str) -> bool {
        self.by_topic.contains_key(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.by_topic.keys().map(String::as_str)
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`
pub fn bm25_idf(n: usize, df: usize) -> f64 {
    (1.0 + (n as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
}

/// Contribution of one query term with frequency `tf` in a sentence of
/// `len` tokens.
pub fn bm25_term(idf: f64, tf: f64, len: f64, avg_len: f64) -> f64 {
    idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * len / avg_len))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub sentence_ids: Vec<usize>,
    pub scores: Vec<f64>,
    pub text: String,
}

impl RankedAnswer {
    pub fn is_empty(&self) -> bool {
        self.sentence_ids.is_empty()
    }
}

/// Scores the sentences of `topic` against the distinct query tokens and
/// keeps the best `k` (ties to the lower sentence id). Sentences sharing no
/// token with the question are not candidates, so a zero-overlap question
/// yields an empty answer.
pub fn score_sentences(index: &SentenceIndex, question: &str, topic: &str, k: usize) -> Result<RankedAnswer> {
    if k < 1 {
        return Err(Error::InvalidK);
    }
    let members = index.by_topic.get(topic).ok_or_else(|| Error::UnknownTopic(topic.to_string()))?;
    let n = members.len();
    let avg_len = index.topic_avg_len[topic];
    let query: BTreeSet<String> = tokenize(question).into_iter().collect();

    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    for token in &query {
        let Some(list) = index.postings.get(token) else { continue };
        let in_topic: Vec<&(usize, u32)> = list.iter().filter(|(id, _)| members.contains(id)).collect();
        if in_topic.is_empty() {
            continue;
        }
        let idf = bm25_idf(n, in_topic.len());
        for &&(id, tf) in &in_topic {
            *scores.entry(id).or_default() += bm25_term(idf, f64::from(tf), index.doc_lengths[id] as f64, avg_len);
        }
    }
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    let text = ranked.iter().map(|(id, _)| index.sentences[*id].text.as_str()).collect::<Vec<_>>().join(" ");
    Ok(RankedAnswer {
        sentence_ids: ranked.iter().map(|(id, _)| *id).collect(),
        scores: ranked.iter().map(|(_, s)| *s).collect(),
        text,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub question: String,
    pub topic: String,
    pub entry_id: String,
}

impl RetrievalQuery {
    /// Every entry's own question with its gold topic and id.
    pub fn from_corpus(corpus: &Corpus) -> Vec<Self> {
        corpus
            .entries()
            .iter()
            .map(|e| Self { question: e.question.clone(), topic: e.topic.clone(), entry_id: e.id.clone() })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl RetrievalMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, total: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f1, accuracy: ratio(tp, total) }
    }
}

/// Example-level contingency. A query is a hit when one of its top-`k`
/// sentences comes from the gold entry. A non-empty miss is a false
/// positive; a miss whose gold entry is indexed is a false negative. Queries
/// whose topic is not indexed retrieve nothing.
pub fn evaluate_retriever(index: &SentenceIndex, test: &[RetrievalQuery], k: usize) -> Result<RetrievalMetrics> {
    if test.is_empty() {
        return Err(Error::EmptyInput("retriever evaluation needs at least one query"));
    }
    let indexed: HashSet<&str> = index.sentences.iter().map(|s| s.entry_id.as_str()).collect();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for query in test {
        let answer = if index.has_topic(&query.topic) {
            score_sentences(index, &query.question, &query.topic, k)?
        } else {
            RankedAnswer { sentence_ids: Vec::new(), scores: Vec::new(), text: String::new() }
        };
        let hit = answer.sentence_ids.iter().any(|&id| index.sentences[id].entry_id == query.entry_id);
        if hit {
            tp += 1;
        } else {
            if !answer.is_empty() {
                fp += 1;
            }
            if indexed.contains(query.entry_id.as_str()) {
                fn_ += 1;
            }
        }
    }
    Ok(RetrievalMetrics::from_counts(tp, fp, fn_, test.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(text: &str, topic: &str, entry: &str) -> LabeledSentence {
        LabeledSentence { text: text.into(), topic: topic.into(), entry_id: entry.into() }
    }

    #[test]
    fn single_sentence_postings() {
        let idx = build_index(&[sentence("The liver filters the blood.", "Liver", "e1")]).unwrap();
        assert_eq!(idx.postings.keys().collect::<Vec<_>>(), vec!["blood", "filters", "liver", "the"]);
        assert_eq!(idx.postings["the"], vec![(0, 2)]);
        assert_eq!(idx.avg_len, 5.0);
    }

    #[test]
    fn disjoint_topics() {
        let idx = build_index(&[sentence("a b", "X", "e1"), sentence("c d", "Y", "e2")]).unwrap();
        assert_eq!(idx.by_topic["X"], BTreeSet::from([0]));
        assert_eq!(idx.by_topic["Y"], BTreeSet::from([1]));
    }

    #[test]
    fn empty_bank_rejected() {
        assert!(build_index(&[]).is_err());
    }

    #[test]
    fn self_retrieval_and_zero_overlap() {
        let bank = [
            sentence("Cirrhosis scars the liver.", "Liver", "e1"),
            sentence("Alcohol damages liver cells over time.", "Liver", "e2"),
            sentence("Insulin moves sugar into cells.", "Diabetes", "e3"),
        ];
        let idx = build_index(&bank).unwrap();
        let a = score_sentences(&idx, "Alcohol damages liver cells over time.", "Liver", 3).unwrap();
        assert_eq!(a.sentence_ids[0], 1);
        let none = score_sentences(&idx, "photography tripod", "Liver", 3).unwrap();
        assert!(none.is_empty());
        assert_eq!(none.text, "");
    }

    #[test]
    fn errors() {
        let idx = build_index(&[sentence("a", "X", "e")]).unwrap();
        assert!(matches!(score_sentences(&idx, "a", "Nope", 3), Err(Error::UnknownTopic(_))));
        assert!(matches!(score_sentences(&idx, "a", "X", 0), Err(Error::InvalidK)));
        assert!(evaluate_retriever(&idx, &[], 3).is_err());
    }

    #[test]
    fn concatenates_top_three() {
        let bank: Vec<_> = (0..5).map(|i| sentence(&format!("pain s{i}."), "T", &format!("e{i}"))).collect();
        let idx = build_index(&bank).unwrap();
        let a = score_sentences(&idx, "pain", "T", 3).unwrap();
        assert_eq!(a.sentence_ids, vec![0, 1, 2]);
        assert_eq!(a.text, "pain s0. pain s1. pain s2.");
    }

    #[test]
    fn metrics_edge_cases() {
        let bank = [sentence("liver scarring", "Liver", "e1"), sentence("sugar insulin", "Diabetes", "e2")];
        let idx = build_index(&bank).unwrap();
        let q = |question: &str, topic: &str, entry: &str| RetrievalQuery {
            question: question.into(),
            topic: topic.into(),
            entry_id: entry.into(),
        };
        let none = evaluate_retriever(&idx, &[q("zzz", "Liver", "e1"), q("qqq", "Diabetes", "e2")], 3).unwrap();
        assert_eq!(none, RetrievalMetrics { precision: 0.0, recall: 0.0, f1: 0.0, accuracy: 0.0 });

        let m = evaluate_retriever(&idx, &[q("liver", "Liver", "e1"), q("liver", "Liver", "missing")], 3).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }
}

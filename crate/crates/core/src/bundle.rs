//! Everything the dialog needs at run time, and the pipeline that builds it
//! from QA corpora.

use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, CalibrationReport, Temperature, DEFAULT_THRESHOLD};
use crate::chatfallback::{evaluate_lm, train_ngram, LmEval, NgramConfig, NgramModel, ReplyPool};
use crate::corpus::{segment_sentences, split_corpus, Corpus, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::ground::{load_lexicon, BodyLexicon};
use crate::retrieve::{SentenceIndex, DEFAULT_TOP_K};
use crate::textmodel::{fit_text_classifier, LabeledText, Logits, TextClassifier, TrainConfig};

pub const MEDICAL_LABEL: &str = "medical";
pub const SOCIAL_LABEL: &str = "social";
pub const SCHEMA_VERSION: u32 = 1;

/// Run-time knobs of the dialog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Calibrated top-topic probability above which the topic is not confirmed.
    pub threshold: f64,
    /// Sentences concatenated into an answer.
    pub top_k: usize,
    pub reply_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, top_k: DEFAULT_TOP_K, reply_seed: 0 }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidThreshold(self.threshold));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidK);
        }
        Ok(())
    }
}

/// Topic classifier, its temperature and the sentence index it answers from.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicBranch {
    pub classifier: TextClassifier,
    pub temperature: Temperature,
    pub index: SentenceIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineBundle {
    pub mode_classifier: TextClassifier,
    pub medical: TopicBranch,
    pub social: TopicBranch,
    pub lexicon: BodyLexicon,
    pub lm: NgramModel,
    pub replies: ReplyPool,
    pub config: EngineConfig,
}

/// Training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpora {
    pub medical: Corpus,
    pub social: Corpus,
    pub news: Corpus,
    pub dialogue: Vec<String>,
}

impl Corpora {
    /// The shipped fixtures.
    pub fn builtin() -> Self {
        Self {
            medical: fixtures::medical(),
            social: fixtures::social(),
            news: fixtures::news(),
            dialogue: fixtures::dialogue_lines(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub seed: u64,
    pub min_df: usize,
    pub train: TrainConfig,
    pub lm: NgramConfig,
    pub engine: EngineConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            min_df: 1,
            train: TrainConfig::default(),
            lm: NgramConfig::default(),
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub mode: ClassifierReport,
    pub medical_topic: ClassifierReport,
    pub social_topic: ClassifierReport,
    pub medical_calibration: CalibrationReport,
    pub social_calibration: CalibrationReport,
    pub lm_heldout: LmEval,
}

/// The three 8:1:1 splits used by a build.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub medical: Split,
    pub social: Split,
    pub news: Split,
}

impl Splits {
    pub fn new(corpora: &Corpora, seed: u64) -> Result<Self> {
        let spec = SplitSpec::eight_one_one(seed);
        Ok(Self {
            medical: split_corpus(&corpora.medical, &spec)?,
            social: split_corpus(&corpora.social, &spec)?,
            news: split_corpus(&corpora.news, &spec)?,
        })
    }
}

/// Questions labelled medical, news and social questions labelled social.
pub fn mode_examples(medical: &Corpus, non_medical: &[&Corpus]) -> Vec<LabeledText> {
    let mut items: Vec<LabeledText> =
        medical.entries().iter().map(|e| LabeledText::new(e.question.clone(), MEDICAL_LABEL)).collect();
    for corpus in non_medical {
        items.extend(corpus.entries().iter().map(|e| LabeledText::new(e.question.clone(), SOCIAL_LABEL)));
    }
    items
}

/// Each question and each answer sentence, labelled with the entry's topic.
pub fn topic_examples(corpus: &Corpus) -> Vec<LabeledText> {
    corpus
        .entries()
        .iter()
        .flat_map(|e| {
            std::iter::once(LabeledText::new(e.question.clone(), e.topic.clone()))
                .chain(segment_sentences(&e.answer).into_iter().map(|s| LabeledText::new(s, e.topic.clone())))
        })
        .collect()
}

/// Held-out dialogue lines: every fifth line.
pub fn dialogue_split(lines: &[String]) -> (Vec<String>, Vec<String>) {
    let (mut train, mut heldout) = (Vec::new(), Vec::new());
    for (i, line) in lines.iter().enumerate() {
        if i % 5 == 4 {
            heldout.push(line.clone());
        } else {
            train.push(line.clone());
        }
    }
    (train, heldout)
}

fn fit_classifier(
    train: &[LabeledText],
    test: &[LabeledText],
    labels: Vec<String>,
    config: &BuildConfig,
) -> Result<(TextClassifier, ClassifierReport)> {
    let (model, fit) = fit_text_classifier(train, Some(labels), config.min_df, &config.train)?;
    let test_accuracy = if test.is_empty() { 0.0 } else { model.accuracy(test)? };
    let report = ClassifierReport {
        initial_loss: fit.initial_loss,
        final_loss: fit.final_loss,
        train_accuracy: fit.train_accuracy,
        test_accuracy,
        train_size: train.len(),
        test_size: test.len(),
    };
    Ok((model, report))
}

/// Fits the temperature of `classifier` on `valid` items.
pub fn calibrate_on(classifier: &TextClassifier, valid: &[LabeledText]) -> Result<CalibrationReport> {
    let logits: Vec<Logits> = valid.iter().map(|item| classifier.logits(&item.text)).collect();
    let gold: Vec<&str> = valid.iter().map(|item| item.label.as_str()).collect();
    calibrate(&logits, &gold)
}

pub fn train_mode_classifier(splits: &Splits, config: &BuildConfig) -> Result<(TextClassifier, ClassifierReport)> {
    let train = mode_examples(&splits.medical.train, &[&splits.news.train, &splits.social.train]);
    let test = mode_examples(&splits.medical.test, &[&splits.news.test, &splits.social.test]);
    fit_classifier(&train, &test, vec![MEDICAL_LABEL.into(), SOCIAL_LABEL.into()], config)
}

/// Trains on the train split, calibrates on valid, indexes the whole corpus.
pub fn build_branch(
    corpus: &Corpus,
    split: &Split,
    config: &BuildConfig,
) -> Result<(TopicBranch, ClassifierReport, CalibrationReport)> {
    let labels: Vec<String> = corpus.topics().iter().cloned().collect();
    let (classifier, report) =
        fit_classifier(&topic_examples(&split.train), &topic_examples(&split.test), labels, config)?;
    let calibration = calibrate_on(&classifier, &topic_examples(&split.valid))?;
    let branch = TopicBranch {
        classifier,
        temperature: Temperature::new(calibration.temperature)?,
        index: SentenceIndex::from_corpus(corpus)?,
    };
    Ok((branch, report, calibration))
}

pub fn build_bundle(corpora: &Corpora, config: &BuildConfig) -> Result<(EngineBundle, BuildReport)> {
    config.engine.validate()?;
    let splits = Splits::new(corpora, config.seed)?;
    let (mode_classifier, mode) = train_mode_classifier(&splits, config)?;
    let (medical, medical_topic, medical_calibration) = build_branch(&corpora.medical, &splits.medical, config)?;
    let (social, social_topic, social_calibration) = build_branch(&corpora.social, &splits.social, config)?;
    let (lm_train, lm_heldout) = dialogue_split(&corpora.dialogue);
    let lm = train_ngram(&lm_train, &config.lm)?;
    let lm_heldout = evaluate_lm(&lm, &lm_heldout)?;
    let bundle = EngineBundle {
        mode_classifier,
        medical,
        social,
        lexicon: load_lexicon()?,
        lm,
        replies: ReplyPool::builtin(),
        config: config.engine,
    };
    let report = BuildReport { mode, medical_topic, social_topic, medical_calibration, social_calibration, lm_heldout };
    Ok((bundle, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topic_examples_cover_questions_and_sentences() {
        let c = Corpus::from_jsonl(r#"{"id":"a","topic":"T","question":"Why?","answer":"One. Two.","source":"s"}"#)
            .unwrap();
        let items = topic_examples(&c);
        assert_eq!(items.iter().map(|i| i.text.as_str()).collect::<Vec<_>>(), vec!["Why?", "One.", "Two."]);
        assert!(items.iter().all(|i| i.label == "T"));
    }

    #[test]
    fn dialogue_holdout_is_every_fifth_line() {
        let lines: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let (train, heldout) = dialogue_split(&lines);
        assert_eq!(heldout, vec!["4", "9"]);
        assert_eq!(train.len(), 8);
    }

    #[test]
    fn engine_config_validation() {
        assert!(EngineConfig::default().validate().is_ok());
        assert!(EngineConfig { threshold: 0.0, ..EngineConfig::default() }.validate().is_err());
        assert!(EngineConfig { top_k: 0, ..EngineConfig::default() }.validate().is_err());
    }
}

//! Knowledge-vault data model: topic-labelled QA records, the JSON-lines
//! file format, seeded train/valid/test splits and the sentence bank that
//! feeds retrieval.

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One curated question with its answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaEntry {
    pub id: String,
    pub topic: String,
    pub question: String,
    pub answer: String,
    pub source: String,
}

/// A single answer sentence carrying the topic and id of its entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub text: String,
    pub topic: String,
    pub entry_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    entries: Vec<QaEntry>,
    topics: BTreeSet<String>,
}

impl Corpus {
    /// Validates and wraps `entries`, preserving their order.
    pub fn new(entries: Vec<QaEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut topics = BTreeSet::new();
        let mut out = Vec::with_capacity(entries.len());
        for (i, mut entry) in entries.into_iter().enumerate() {
            validate_entry(&mut entry).map_err(|message| Error::MalformedRecord { line: i + 1, message })?;
            if !seen.insert(entry.id.clone()) {
                return Err(Error::DuplicateId(entry.id));
            }
            topics.insert(entry.topic.clone());
            out.push(entry);
        }
        Ok(Self { entries: out, topics })
    }

    pub fn entries(&self) -> &[QaEntry] {
        &self.entries
    }

    pub fn topics(&self) -> &BTreeSet<String> {
        &self.topics
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&QaEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Parses the JSON-lines format. Blank lines are skipped; line numbers in
    /// errors are 1-based.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::from_reader(text.as_bytes())
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        let mut topics = BTreeSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::MalformedRecord { line: line_no, message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut entry: QaEntry = serde_json::from_str(&line)
                .map_err(|e| Error::MalformedRecord { line: line_no, message: e.to_string() })?;
            validate_entry(&mut entry).map_err(|message| Error::MalformedRecord { line: line_no, message })?;
            if !seen.insert(entry.id.clone()) {
                return Err(Error::DuplicateId(entry.id));
            }
            topics.insert(entry.topic.clone());
            entries.push(entry);
        }
        Ok(Self { entries, topics })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }
}

fn validate_entry(entry: &mut QaEntry) -> std::result::Result<(), String> {
    if entry.id.trim().is_empty() {
        return Err("empty id".into());
    }
    let topic = entry.topic.trim();
    if topic.is_empty() {
        return Err(format!("entry `{}` has an empty topic", entry.id));
    }
    entry.topic = topic.to_string();
    if entry.question.trim().is_empty() {
        return Err(format!("entry `{}` has an empty question", entry.id));
    }
    if entry.answer.trim().is_empty() {
        return Err(format!("entry `{}` has an empty answer", entry.id));
    }
    Ok(())
}

/// Reads a corpus file (one JSON object per line).
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Corpus::from_reader(std::io::BufReader::new(file))
}

const ABBREVIATIONS: [&str; 6] = ["dr.", "e.g.", "i.e.", "vs.", "mr.", "ms."];

/// Splits prose into sentences.
///
/// A boundary follows a word ending in `.`, `?` or `!` when the next word
/// starts with an uppercase letter or the text ends there. Words on the
/// abbreviation list never end a sentence. Whitespace inside a sentence is
/// collapsed to single spaces.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut sentences = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for (i, word) in words.iter().enumerate() {
        current.push(word);
        let terminated = word.ends_with(['.', '?', '!']);
        let abbreviation = ABBREVIATIONS.contains(&word.to_lowercase().as_str());
        let next_opens = match words.get(i + 1) {
            None => true,
            Some(next) => next.chars().next().is_some_and(char::is_uppercase),
        };
        if terminated && !abbreviation && next_opens {
            sentences.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        sentences.push(current.join(" "));
    }
    sentences
}

/// Train/valid/test proportions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub valid_ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_ratio: f64, valid_ratio: f64, test_ratio: f64, seed: u64) -> Result<Self> {
        let spec = Self { train_ratio, valid_ratio, test_ratio, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// The 8:1:1 proportions.
    pub fn eight_one_one(seed: u64) -> Self {
        Self { train_ratio: 0.8, valid_ratio: 0.1, test_ratio: 0.1, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let ratios = [self.train_ratio, self.valid_ratio, self.test_ratio];
        if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidSplit(format!("ratios must be finite and non-negative: {ratios:?}")));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
}

/// Seeded shuffle, then valid and test take the floor of their share and the
/// remainder goes to train. Each part keeps the input order of its members.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty corpus"));
    }
    let n = corpus.len();
    // Nudge before flooring so products like 10 * 0.1 are not shaved to 0.999...
    let share = |ratio: f64| ((n as f64) * ratio + 1e-9).floor() as usize;
    let n_valid = share(spec.valid_ratio).min(n);
    let n_test = share(spec.test_ratio).min(n - n_valid);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut valid_idx = order[..n_valid].to_vec();
    let mut test_idx = order[n_valid..n_valid + n_test].to_vec();
    let mut train_idx = order[n_valid + n_test..].to_vec();
    for part in [&mut train_idx, &mut valid_idx, &mut test_idx] {
        part.sort_unstable();
    }
    let pick = |idx: &[usize]| {
        let entries = idx.iter().map(|&i| corpus.entries[i].clone()).collect();
        Corpus::new(entries)
    };
    Ok(Split { train: pick(&train_idx)?, valid: pick(&valid_idx)?, test: pick(&test_idx)? })
}

/// Every answer sentence of every entry, labelled with its entry's topic.
pub fn sentence_bank(corpus: &Corpus) -> Vec<LabeledSentence> {
    corpus
        .entries()
        .iter()
        .flat_map(|entry| {
            segment_sentences(&entry.answer).into_iter().map(move |text| LabeledSentence {
                text,
                topic: entry.topic.clone(),
                entry_id: entry.id.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(id: &str, topic: &str, answer: &str) -> QaEntry {
        QaEntry {
            id: id.into(),
            topic: topic.into(),
            question: format!("question {id}?"),
            answer: answer.into(),
            source: "test".into(),
        }
    }

    fn corpus_of(n: usize) -> Corpus {
        Corpus::new((0..n).map(|i| entry(&format!("e{i}"), &format!("t{}", i % 3), "An answer.")).collect()).unwrap()
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        let c = Corpus::from_jsonl("").unwrap();
        assert_eq!(c.len(), 0);
        assert!(c.topics().is_empty());
    }

    #[test]
    fn topics_are_a_set() {
        let c =
            Corpus::new(vec![entry("a", "Diabetes", "x."), entry("b", "Diabetes", "y."), entry("c", "Diabetes", "z.")])
                .unwrap();
        assert_eq!(c.topics().iter().collect::<Vec<_>>(), vec!["Diabetes"]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let good = serde_json::to_string(&entry("a", "T", "x.")).unwrap();
        let text = format!("{good}\n{{\"id\": \"b\"}}\n");
        match Corpus::from_jsonl(&text) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"id":"a","topic":"T","question":"q?","answer":"a.","source":"s","extra":1}"#;
        assert!(matches!(Corpus::from_jsonl(text), Err(Error::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn blank_fields_are_rejected() {
        let text = r#"{"id":"a","topic":"  ","question":"q?","answer":"a.","source":"s"}"#;
        assert!(matches!(Corpus::from_jsonl(text), Err(Error::MalformedRecord { line: 1, .. })));
        let text = r#"{"id":"a","topic":"T","question":"q?","answer":"   ","source":"s"}"#;
        assert!(matches!(Corpus::from_jsonl(text), Err(Error::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let line = serde_json::to_string(&entry("a", "T", "x.")).unwrap();
        let text = format!("{line}\n{line}\n");
        assert!(matches!(Corpus::from_jsonl(&text), Err(Error::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(load_corpus("/definitely/not/here.jsonl"), Err(Error::Io { .. })));
    }

    #[test]
    fn topic_is_trimmed_case_sensitive() {
        let c = Corpus::new(vec![entry("a", " Asthma ", "x."), entry("b", "asthma", "y.")]).unwrap();
        assert_eq!(c.topics().len(), 2);
        assert!(c.topics().contains("Asthma"));
    }

    #[test]
    fn single_sentence() {
        assert_eq!(segment_sentences("Diabetes is chronic."), vec!["Diabetes is chronic."]);
    }

    #[test]
    fn empty_text_has_no_sentences() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(
            segment_sentences("It affects the liver. See a doctor. Dr. Smith agrees."),
            vec!["It affects the liver.", "See a doctor.", "Dr. Smith agrees."]
        );
    }

    #[test]
    fn lowercase_continuation_and_questions() {
        assert_eq!(
            segment_sentences("Is it bad? Maybe. use e.g. Water vs. Juice! ok"),
            vec!["Is it bad?", "Maybe. use e.g. Water vs. Juice! ok"]
        );
    }

    #[test]
    fn eight_one_one_on_ten() {
        let split = split_corpus(&corpus_of(10), &SplitSpec::eight_one_one(7)).unwrap();
        assert_eq!((split.train.len(), split.valid.len(), split.test.len()), (8, 1, 1));
    }

    #[test]
    fn degenerate_ratio() {
        let spec = SplitSpec::new(1.0, 0.0, 0.0, 3).unwrap();
        let split = split_corpus(&corpus_of(10), &spec).unwrap();
        assert_eq!((split.train.len(), split.valid.len(), split.test.len()), (10, 0, 0));
    }

    #[test]
    fn ratios_must_sum_to_one() {
        assert!(matches!(SplitSpec::new(0.8, 0.1, 0.2, 0), Err(Error::InvalidSplit(_))));
        let bad = SplitSpec { train_ratio: 0.5, valid_ratio: 0.5, test_ratio: 0.5, seed: 0 };
        assert!(split_corpus(&corpus_of(4), &bad).is_err());
    }

    #[test]
    fn empty_corpus_cannot_be_split() {
        assert!(split_corpus(&Corpus::default(), &SplitSpec::eight_one_one(0)).is_err());
    }

    #[test]
    fn bank_labels_each_sentence() {
        let c = Corpus::new(vec![entry("a", "Liver", "It scars. It hurts.")]).unwrap();
        let bank = sentence_bank(&c);
        assert_eq!(bank.len(), 2);
        assert!(bank.iter().all(|s| s.topic == "Liver" && s.entry_id == "a"));
        assert!(sentence_bank(&Corpus::default()).is_empty());
    }

    fn normalize(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    proptest! {
        #[test]
        fn segmentation_is_lossless(text in "[A-Za-z .?!\n\t]{0,80}") {
            let segments = segment_sentences(&text);
            prop_assert!(segments.iter().all(|s| !s.is_empty()));
            prop_assert_eq!(normalize(&segments.join(" ")), normalize(&text));
        }

        #[test]
        fn segments_are_fixed_points(text in "[A-Za-z .?!]{0,80}") {
            for s in segment_sentences(&text) {
                prop_assert_eq!(segment_sentences(&s), vec![s.clone()]);
            }
        }

        #[test]
        fn split_partitions_and_is_deterministic(n in 1usize..60, seed in any::<u64>(), a in 0u32..=10, b in 0u32..=10) {
            let (a, b) = (a.min(10), b.min(10 - a.min(10)));
            let spec = SplitSpec {
                train_ratio: f64::from(10 - a - b) / 10.0,
                valid_ratio: f64::from(a) / 10.0,
                test_ratio: f64::from(b) / 10.0,
                seed,
            };
            let corpus = corpus_of(n);
            let split = split_corpus(&corpus, &spec).unwrap();
            let mut ids: Vec<&str> = split.train.entries().iter()
                .chain(split.valid.entries())
                .chain(split.test.entries())
                .map(|e| e.id.as_str())
                .collect();
            prop_assert_eq!(ids.len(), n);
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
            prop_assert_eq!(split.valid.len(), ((n as f64) * spec.valid_ratio + 1e-9).floor() as usize);
            let again = split_corpus(&corpus, &spec).unwrap();
            prop_assert_eq!(again, split);
        }
    }
}

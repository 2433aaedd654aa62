//! Desk-scale data shipped with the crate: three QA corpora, a medical
//! dialogue transcript for the fallback language model, the body-part
//! lexicon and the chit-chat reply pool.

use crate::corpus::Corpus;

pub const MEDICAL_JSONL: &str = include_str!("../data/medical.jsonl");
pub const SOCIAL_JSONL: &str = include_str!("../data/social.jsonl");
pub const NEWS_JSONL: &str = include_str!("../data/news.jsonl");
pub const DIALOGUE_TXT: &str = include_str!("../data/dialogue.txt");
pub const LEXICON_JSON: &str = include_str!("../data/lexicon.json");
pub const REPLIES_JSON: &str = include_str!("../data/replies.json");

pub fn medical() -> Corpus {
    Corpus::from_jsonl(MEDICAL_JSONL).expect("bundled medical corpus is valid")
}

pub fn social() -> Corpus {
    Corpus::from_jsonl(SOCIAL_JSONL).expect("bundled social corpus is valid")
}

pub fn news() -> Corpus {
    Corpus::from_jsonl(NEWS_JSONL).expect("bundled news corpus is valid")
}

/// Non-empty lines of the dialogue transcript with the speaker tag removed.
pub fn dialogue_lines() -> Vec<String> {
    strip_speakers(DIALOGUE_TXT)
}

pub fn strip_speakers(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| match l.split_once(':') {
            Some((speaker, rest)) if !speaker.contains(' ') => rest.trim().to_string(),
            _ => l.to_string(),
        })
        .collect()
}

//! Shared tokenizer: lowercase, split on anything that is not alphanumeric.

/// Lowercased alphanumeric runs of `text`, in order. Single-character
/// tokens are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(tokenize("Pain in my EAR, left-side!"), vec!["pain", "in", "my", "ear", "left", "side"]);
    }

    #[test]
    fn keeps_single_characters() {
        assert_eq!(tokenize("type 1 a"), vec!["type", "1", "a"]);
        assert!(tokenize("  ...  ").is_empty());
    }
}

//! Surface tokenization shared by the sentiment scorer and the embedders.

/// Lower-cased tokens split on whitespace and punctuation. Apostrophes
/// inside a word are kept so contractions like `don't` survive.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation() {
        assert_eq!(
            tokenize("Markets up! Rates, down..."),
            ["markets", "up", "rates", "down"]
        );
        assert_eq!(tokenize("don't 'quote'"), ["don't", "quote"]);
        assert!(tokenize("  ?! ").is_empty());
    }
}

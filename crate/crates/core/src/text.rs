//! Tokenization shared by retrieval, keyword rules and the metric kit.
//!
//! A token is a maximal run of alphanumeric characters, lowercased. Every
//! module that compares words goes through [`tokenize`] so that retrieval,
//! severity rules and evaluation metrics all see the same token stream.

/// Lowercase `text` and split it on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Returns true if `needle` occurs in `haystack` as a contiguous token run.
///
/// An empty needle never matches.
pub fn contains_phrase(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Number of token windows equal to `needle`.
pub fn count_phrase(haystack: &[String], needle: &[String]) -> usize {
    if needle.is_empty() || needle.len() > haystack.len() {
        return 0;
    }
    haystack.windows(needle.len()).filter(|w| *w == needle).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("9-1-1, what's your EMERGENCY?"),
            vec!["9", "1", "1", "what", "s", "your", "emergency"]
        );
    }

    #[test]
    fn empty_and_symbol_only_inputs() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ?!-- ").is_empty());
    }

    #[test]
    fn phrase_matching_is_whole_token() {
        let hay = tokenize("he was gunning it, no gun here");
        assert!(contains_phrase(&hay, &tokenize("gun")));
        assert!(!contains_phrase(&tokenize("gunning"), &tokenize("gun")));
        assert!(contains_phrase(&tokenize("a heart attack now"), &tokenize("heart attack")));
        assert!(!contains_phrase(&hay, &[]));
        assert_eq!(count_phrase(&tokenize("fire fire smoke fire"), &tokenize("fire")), 3);
    }
}

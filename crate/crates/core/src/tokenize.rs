//! Query and document tokenization shared by indexing, intent detection and scoring.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Lowercasing tokenizer that splits on every non-alphanumeric character.
///
/// No stemming is applied, so tokenization is deterministic and does not depend
/// on the language of the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: BTreeSet::new(),
        }
    }
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if self.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }
}

/// Tokenizes with the default configuration.
pub fn tokenize(text: &str) -> Vec<String> {
    Tokenizer::default().tokenize(text)
}

/// Canonical form of a query used as a lookup key (tokens joined by single spaces).
pub fn normalize_query(text: &str) -> String {
    tokenize(text).join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("Taylor Swift - Shake_It.Off!"),
            vec!["taylor", "swift", "shake", "it", "off"]
        );
    }

    #[test]
    fn keeps_unicode_letters() {
        assert_eq!(tokenize("Tráiler ÁRABE 2024"), vec!["tráiler", "árabe", "2024"]);
    }

    #[test]
    fn empty_and_symbol_only_inputs() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" -- !! ").is_empty());
    }

    #[test]
    fn stopwords_removed() {
        let tok = Tokenizer {
            stopwords: ["the".to_string()].into_iter().collect(),
            ..Tokenizer::default()
        };
        assert_eq!(tok.tokenize("The Avengers"), vec!["avengers"]);
    }
}

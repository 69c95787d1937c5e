use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A normalized verb-led multiword phrase: the lexicon unit.
///
/// A concept is exactly two or three whitespace-separated tokens. The first
/// token is the verb slot; the remaining one or two tokens form the
/// noun-phrase slot. The stored text is lowercase and single-space separated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Concept {
    text: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConceptError {
    #[error("concept must have 2 or 3 tokens, got {got}: {text:?}")]
    BadArity { text: String, got: usize },
    #[error("concept is empty")]
    Empty,
}

impl Concept {
    /// Builds a concept from raw text, lowercasing and collapsing whitespace.
    pub fn new(text: &str) -> Result<Self, ConceptError> {
        let tokens: Vec<String> = text.split_whitespace().map(|t| t.to_lowercase()).collect();
        Self::from_tokens(&tokens)
    }

    /// Builds a concept from pre-split tokens, lowercasing each.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Self, ConceptError> {
        let tokens: Vec<String> = tokens
            .iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            return Err(ConceptError::Empty);
        }
        if tokens.len() < 2 || tokens.len() > 3 {
            return Err(ConceptError::BadArity {
                text: tokens.join(" "),
                got: tokens.len(),
            });
        }
        Ok(Concept {
            text: tokens.join(" "),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Ordered token list.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.text.split(' ')
    }

    /// Number of tokens: 2 or 3.
    pub fn arity(&self) -> usize {
        self.text.split(' ').count()
    }

    /// First token (the verb slot).
    pub fn verb(&self) -> &str {
        self.text.split(' ').next().expect("non-empty by invariant")
    }

    /// Remaining tokens (the noun-phrase slot).
    pub fn noun_phrase(&self) -> Vec<&str> {
        self.text.split(' ').skip(1).collect()
    }

    /// Sorted word multiset, used to check that a rewrite only permuted words.
    pub fn word_multiset(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.text.split(' ').collect();
        words.sort_unstable();
        words
    }
}

impl std::fmt::Display for Concept {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text)
    }
}

impl std::str::FromStr for Concept {
    type Err = ConceptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Concept::new(s)
    }
}

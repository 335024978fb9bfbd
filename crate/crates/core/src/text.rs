//! Tokenization, vocabulary construction and binary bag-of-words vectors.
//!
//! Tokens are lowercased surface words. Text is split on every character
//! that is not a letter, digit or apostrophe, so `#flu` and `@nurse` yield
//! `flu` and `nurse`. Apostrophes survive only inside a word. No stemming
//! or other normalisation is applied.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single lowercase word with no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    /// Builds a token from an already-normalised word. Returns `None` for
    /// empty strings or strings containing whitespace.
    pub fn new(surface: impl Into<String>) -> Option<Self> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return None;
        }
        Some(Token(surface))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Splits raw message text into lowercase tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let lowered = text.to_lowercase();
    lowered
        .split(|c: char| !is_word_char(c))
        .map(|piece| piece.trim_matches('\''))
        .filter(|piece| !piece.is_empty())
        .map(|piece| Token(piece.to_owned()))
        .collect()
}

/// Dense index over the distinct terms of a training corpus, in
/// first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    terms: Vec<Token>,
    index: HashMap<Token, usize>,
}

impl Vocabulary {
    /// Builds the vocabulary of `corpus`. Fails on an empty corpus or one
    /// without a single token.
    pub fn build<D, T>(corpus: D) -> Result<Self>
    where
        D: IntoIterator,
        D::Item: IntoIterator<Item = T>,
        T: AsRef<Token>,
    {
        let mut vocab = Vocabulary::default();
        let mut docs = 0usize;
        for doc in corpus {
            docs += 1;
            for token in doc {
                vocab.insert(token.as_ref().clone());
            }
        }
        if docs == 0 {
            return Err(Error::UnusableTrainingSet("empty corpus".into()));
        }
        if vocab.is_empty() {
            return Err(Error::UnusableTrainingSet("corpus contains no tokens".into()));
        }
        Ok(vocab)
    }

    fn insert(&mut self, token: Token) -> usize {
        if let Some(&i) = self.index.get(&token) {
            return i;
        }
        let i = self.terms.len();
        self.index.insert(token.clone(), i);
        self.terms.push(token);
        i
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn lookup(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&Token> {
        self.terms.get(index)
    }

    pub fn terms(&self) -> &[Token] {
        &self.terms
    }

    /// Binary presence vector of `tokens`; unknown tokens are ignored.
    pub fn vectorize<T: AsRef<Token>>(&self, tokens: &[T]) -> BinaryVector {
        let active = tokens
            .iter()
            .filter_map(|t| self.index.get(t.as_ref()).copied())
            .collect();
        BinaryVector::from_indices_unchecked(self.len(), active)
    }

    /// One term per line; the line number is the index.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for term in &self.terms {
            writeln!(out, "{term}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let token =
                Token::new(line.as_str()).ok_or_else(|| Error::parse(n + 1, format!("invalid term {line:?}")))?;
            if vocab.index.contains_key(&token) {
                return Err(Error::parse(n + 1, format!("duplicate term {line:?}")));
            }
            vocab.insert(token);
        }
        Ok(vocab)
    }
}

impl AsRef<Token> for Token {
    fn as_ref(&self) -> &Token {
        self
    }
}

/// Set of active feature indices over a fixed dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryVector {
    dimension: usize,
    /// Sorted, deduplicated.
    active: Vec<u32>,
}

impl BinaryVector {
    pub fn new(dimension: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut active = Vec::new();
        for i in indices {
            if i >= dimension {
                return Err(Error::InvalidArgument(format!(
                    "feature index {i} out of range for dimension {dimension}"
                )));
            }
            active.push(i);
        }
        Ok(Self::from_indices_unchecked(dimension, active))
    }

    pub fn empty(dimension: usize) -> Self {
        BinaryVector {
            dimension,
            active: Vec::new(),
        }
    }

    fn from_indices_unchecked(dimension: usize, indices: Vec<usize>) -> Self {
        let mut active: Vec<u32> = indices.into_iter().map(|i| i as u32).collect();
        active.sort_unstable();
        active.dedup();
        BinaryVector { dimension, active }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn active(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.active.iter().map(|&i| i as usize)
    }

    /// Number of active features.
    pub fn count(&self) -> usize {
        self.active.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.active.binary_search(&(index as u32)).is_ok()
    }

    pub fn check_dimension(&self, expected: usize) -> Result<()> {
        if self.dimension != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.dimension,
            });
        }
        Ok(())
    }

    /// Size of the intersection of the two active sets.
    pub fn dot(&self, other: &BinaryVector) -> usize {
        let (mut a, mut b) = (self.active.iter().peekable(), other.active.iter().peekable());
        let mut shared = 0;
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    a.next();
                    b.next();
                }
            }
        }
        shared
    }

    /// Squared Euclidean distance, i.e. the size of the symmetric difference.
    pub fn squared_distance(&self, other: &BinaryVector) -> usize {
        self.count() + other.count() - 2 * self.dot(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::as_str).collect()
    }

    fn toks(ws: &[&str]) -> Vec<Token> {
        ws.iter().map(|w| Token::new(*w).unwrap()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            words(&tokenize("Woke up with a stomach ache!")),
            ["woke", "up", "with", "a", "stomach", "ache"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(
            words(&tokenize("Fever, back pain, headache... ugh!")),
            ["fever", "back", "pain", "headache", "ugh"]
        );
    }

    #[test]
    fn tokenize_markers_and_apostrophes() {
        assert_eq!(
            words(&tokenize("@mom I'm sick #flu 'again'")),
            ["mom", "i'm", "sick", "flu", "again"]
        );
        assert_eq!(words(&tokenize("'' ' #")), Vec::<&str>::new());
        assert_eq!(words(&tokenize("itcy\tarm\nrash")), ["itcy", "arm", "rash"]);
    }

    #[test]
    fn no_stemming() {
        assert_eq!(words(&tokenize("Coughing coughs")), ["coughing", "coughs"]);
    }

    #[test]
    fn vocabulary_examples() {
        let v = Vocabulary::build([toks(&["a", "b"]), toks(&["b", "c"])]).unwrap();
        assert_eq!(words(v.terms()), ["a", "b", "c"]);
        let v = Vocabulary::build([toks(&["x"])]).unwrap();
        assert_eq!(v.len(), 1);
        let v = Vocabulary::build([toks(&["a", "a", "a"])]).unwrap();
        assert_eq!(words(v.terms()), ["a"]);
        assert!(Vocabulary::build(Vec::<Vec<Token>>::new()).is_err());
    }

    #[test]
    fn vectorize_examples() {
        let v = Vocabulary::build([toks(&["a", "b", "c"])]).unwrap();
        let x = v.vectorize(&toks(&["a", "c"]));
        assert_eq!(x.active().collect::<Vec<_>>(), [0, 2]);
        assert_eq!(x.dimension(), 3);
        assert_eq!(v.vectorize(&toks(&["zzz"])).count(), 0);
        let v = Vocabulary::build([toks(&["a"])]).unwrap();
        assert_eq!(v.vectorize(&toks(&["a", "a"])).active().collect::<Vec<_>>(), [0]);
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let v = Vocabulary::build([tokenize("sore throat and a bad cough, can't sleep")]).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().nth(1), Some("throat"));
        let back = Vocabulary::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::read_from("a\na\n".as_bytes()).is_err());
    }

    #[test]
    fn dot_and_distance() {
        let a = BinaryVector::new(6, [0, 2, 4]).unwrap();
        let b = BinaryVector::new(6, [2, 3, 4, 5]).unwrap();
        assert_eq!(a.dot(&b), 2);
        assert_eq!(a.squared_distance(&b), 3);
        assert!(BinaryVector::new(3, [3]).is_err());
    }

    proptest! {
        #[test]
        fn tokenize_idempotent_on_joined_output(text in "[a-zA-Z0-9 '#@.,!?éÜß\\-]{0,60}") {
            let once = tokenize(&text);
            let joined = once.iter().map(Token::as_str).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(tokenize(&joined), once);
        }

        #[test]
        fn tokens_are_well_formed(text in "\\PC{0,60}") {
            for t in tokenize(&text) {
                prop_assert!(!t.as_str().is_empty());
                prop_assert!(!t.as_str().chars().any(char::is_whitespace));
            }
        }

        #[test]
        fn vectorize_in_range_and_duplicate_insensitive(
            corpus in proptest::collection::vec("[a-e ]{1,12}", 1..5),
            probe in "[a-h ]{0,20}",
        ) {
            let docs: Vec<Vec<Token>> = corpus.iter().map(|d| tokenize(d)).collect();
            prop_assume!(docs.iter().any(|d| !d.is_empty()));
            let vocab = Vocabulary::build(&docs).unwrap();
            for (i, term) in vocab.terms().iter().enumerate() {
                prop_assert_eq!(vocab.lookup(term.as_str()), Some(i));
            }
            let tokens = tokenize(&probe);
            let x = vocab.vectorize(&tokens);
            prop_assert!(x.active().all(|i| i < vocab.len()));
            let doubled: Vec<Token> = tokens.iter().chain(tokens.iter()).cloned().collect();
            prop_assert_eq!(vocab.vectorize(&doubled), x);
        }
    }
}

//! Word-level tokenization, vocabulary construction and the train/validation split.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const VOCAB_HEADER: &str = "# rnn-orbits vocabulary v1";

/// Characters split off as standalone tokens.
const PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', '—'];

/// Lowercased word tokens with punctuation marks as separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if PUNCTUATION.contains(&ch) {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(ch.to_string());
            } else {
                word.extend(ch.to_lowercase());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Tokenizes raw bytes, rejecting invalid UTF-8.
pub fn tokenize_bytes(bytes: &[u8]) -> Result<Vec<String>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Ingestion(format!("corpus is not valid UTF-8: {e}")))?;
    Ok(tokenize(text))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Tokens seen at least `min_count` times get ids by descending frequency,
    /// ties broken lexicographically. The unknown token takes the last id.
    pub fn build(tokens: &[String], min_count: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Ingestion("cannot build a vocabulary from no tokens".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            if t != UNK {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut list: Vec<String> = kept.into_iter().map(|(t, _)| t.to_string()).collect();
        list.push(UNK.to_string());
        Self::from_list(list)
    }

    fn from_list(tokens: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::format("vocabulary", format!("duplicate token `{t}`")));
            }
        }
        if ids.get(UNK) != Some(&(tokens.len() - 1)) {
            return Err(Error::format("vocabulary", "unknown token must take the last id"));
        }
        Ok(Self { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_id(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(self.unk_id())
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK).to_string())
            .collect()
    }

    /// Header line, then one token per line in id order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{VOCAB_HEADER}").unwrap();
        for t in &self.tokens {
            writeln!(out, "{t}").unwrap();
        }
        out
    }

    pub fn from_file_str(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        match lines.next() {
            Some(VOCAB_HEADER) => {}
            other => {
                return Err(Error::format(
                    "vocabulary",
                    format!("expected header `{VOCAB_HEADER}`, found {other:?}"),
                ))
            }
        }
        let tokens: Vec<String> = lines.map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(Error::format("vocabulary", "no tokens"));
        }
        Self::from_list(tokens)
    }

    /// SHA-256 of the serialized file, used to bind checkpoints to a vocabulary.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_file_string().as_bytes()).into()
    }
}

/// Token ids with a train/validation boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    ids: Vec<usize>,
    split: usize,
    vocab_size: usize,
}

impl TokenStream {
    /// Contiguous 4:1 split: the first 80% (rounded down) trains.
    pub fn split(ids: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if ids.len() < 5 {
            return Err(Error::Ingestion(format!(
                "need at least 5 tokens to split, got {}",
                ids.len()
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab_size) {
            return Err(Error::State(format!(
                "token id {bad} outside vocabulary of {vocab_size}"
            )));
        }
        let split = ids.len() * 4 / 5;
        Ok(Self {
            ids,
            split,
            vocab_size,
        })
    }

    pub fn train(&self) -> &[usize] {
        &self.ids[..self.split]
    }

    pub fn validation(&self) -> &[usize] {
        &self.ids[self.split..]
    }

    pub fn all(&self) -> &[usize] {
        &self.ids
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }
}

/// SHA-256 hex digest of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex_string(&Sha256::digest(bytes))
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("I like it but ,"), strs(&["i", "like", "it", "but", ","]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Hello, world!"), strs(&["hello", ",", "world", "!"]));
        assert_eq!(
            tokenize("\"Don't—stop.\""),
            strs(&["\"", "don", "'", "t", "—", "stop", ".", "\""])
        );
    }

    #[test]
    fn invalid_utf8_rejected() {
        assert!(matches!(
            tokenize_bytes(&[0x66, 0xff, 0x66]),
            Err(Error::Ingestion(_))
        ));
        assert_eq!(tokenize_bytes(b"A b").unwrap(), strs(&["a", "b"]));
    }

    #[test]
    fn vocab_ordering_and_min_count() {
        let toks = strs(&["a", "a", "b"]);
        let v = Vocabulary::build(&toks, 1).unwrap();
        assert_eq!((v.id("a"), v.id("b"), v.unk_id()), (0, 1, 2));
        let v = Vocabulary::build(&toks, 2).unwrap();
        assert_eq!(v.id("a"), 0);
        assert_eq!(v.id("b"), v.unk_id());
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn frequency_ties_are_lexicographic() {
        let v = Vocabulary::build(&strs(&["c", "b", "a", "b", "c", "d"]), 1).unwrap();
        let order: Vec<&str> = (0..v.len()).map(|i| v.token(i).unwrap()).collect();
        assert_eq!(order, ["b", "c", "a", "d", UNK]);
    }

    #[test]
    fn empty_tokens_rejected() {
        assert!(matches!(Vocabulary::build(&[], 1), Err(Error::Ingestion(_))));
    }

    #[test]
    fn literal_unk_in_text_maps_to_unk() {
        let v = Vocabulary::build(&strs(&["<unk>", "x", "<unk>"]), 1).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.id("<unk>"), v.unk_id());
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = Vocabulary::build(&tokenize("the cat saw the dog . the end"), 1).unwrap();
        let s = v.to_file_string();
        assert!(s.starts_with(VOCAB_HEADER));
        let back = Vocabulary::from_file_str(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
        assert!(Vocabulary::from_file_str("the\ncat\n").is_err());
        assert!(Vocabulary::from_file_str(&format!("{VOCAB_HEADER}\na\na\n<unk>\n")).is_err());
    }

    #[test]
    fn split_sizes() {
        let s = TokenStream::split((0..10).map(|i| i % 3).collect(), 3).unwrap();
        assert_eq!((s.train().len(), s.validation().len()), (8, 2));
        let s = TokenStream::split(vec![0; 5], 1).unwrap();
        assert_eq!((s.train().len(), s.validation().len()), (4, 1));
        let s = TokenStream::split(vec![0; 400_000], 1).unwrap();
        assert_eq!((s.train().len(), s.validation().len()), (320_000, 80_000));
        assert!(matches!(TokenStream::split(vec![0; 4], 1), Err(Error::Ingestion(_))));
        assert!(matches!(TokenStream::split(vec![0, 1, 2, 3, 9], 4), Err(Error::State(_))));
    }

    proptest::proptest! {
        #[test]
        fn decode_inverts_encode(words in proptest::collection::vec("[a-e]{1,3}", 1..60)) {
            let text = words.join(" ");
            let toks = tokenize(&text);
            let v = Vocabulary::build(&toks, 1).unwrap();
            proptest::prop_assert_eq!(v.decode(&v.encode(&toks)), toks.clone());
            proptest::prop_assert_eq!(Vocabulary::build(&toks, 1).unwrap(), v);
        }

        #[test]
        fn split_preserves_order_and_count(n in 5usize..500) {
            let ids: Vec<usize> = (0..n).map(|i| i % 7).collect();
            let s = TokenStream::split(ids.clone(), 7).unwrap();
            let joined: Vec<usize> = s.train().iter().chain(s.validation()).copied().collect();
            proptest::prop_assert_eq!(joined, ids);
            // 4:1 within one token
            let t = s.train().len() as f64;
            let v = s.validation().len() as f64;
            proptest::prop_assert!((t - 4.0 * v).abs() <= 5.0);
        }
    }
}

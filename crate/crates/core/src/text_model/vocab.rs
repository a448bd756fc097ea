//! Fixed whitespace/punctuation tokenizer and the dense vocabulary.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Literal surface forms of the reserved tokens, in id order.
///
/// `EOS` and `THINK_CLOSE` take the two lowest ids so that, under greedy
/// decoding with lowest-id tie breaking, a context the model has never seen
/// closes the current segment instead of emitting filler.
pub const SPECIAL_TOKENS: [&str; 7] = ["<eos>", "</think>", "<bos>", "<think>", "<step>", "<refusal>", "<unk>"];

pub const EOS: TokenId = 0;
pub const THINK_CLOSE: TokenId = 1;
pub const BOS: TokenId = 2;
pub const THINK_OPEN: TokenId = 3;
pub const STEP: TokenId = 4;
pub const REFUSAL_MARK: TokenId = 5;
pub const UNK: TokenId = 6;

pub const UNK_LITERAL: &str = "<unk>";
pub const STEP_LITERAL: &str = "<step>";

pub fn is_special(id: TokenId) -> bool {
    (id as usize) < SPECIAL_TOKENS.len()
}

/// Splits text into word strings: whitespace separates chunks, reserved
/// literals stay whole, and every other chunk breaks into alphanumeric runs
/// and single punctuation characters.
pub fn split_words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if SPECIAL_TOKENS.contains(&chunk) {
            out.push(chunk);
            continue;
        }
        let mut start = None;
        for (i, ch) in chunk.char_indices() {
            if ch.is_alphanumeric() {
                if start.is_none() {
                    start = Some(i);
                }
            } else {
                if let Some(s) = start.take() {
                    out.push(&chunk[s..i]);
                }
                out.push(&chunk[i..i + ch.len_utf8()]);
            }
        }
        if let Some(s) = start {
            out.push(&chunk[s..]);
        }
    }
    out
}

fn attaches_left(word: &str) -> bool {
    matches!(word, "." | "," | "?" | "!" | ";" | ":" | ")" | "'")
}

fn attaches_right(word: &str) -> bool {
    matches!(word, "(" | "'")
}

/// Joins words with single spaces, except around punctuation that hugs its
/// neighbour. This is the normal form that `split_words` inverts.
pub fn join_words<'a>(words: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    for w in words {
        if !glue_next && !attaches_left(w) {
            out.push(' ');
        }
        out.push_str(w);
        glue_next = attaches_right(w);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved tokens.
    pub fn new() -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for s in SPECIAL_TOKENS {
            v.insert(s);
        }
        v
    }

    /// Builds a vocabulary from texts, assigning ids in first-occurrence order.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocabulary::new();
        for t in texts {
            for w in split_words(t) {
                v.insert(w);
            }
        }
        v
    }

    pub fn insert(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(word.to_owned());
        self.index.insert(word.to_owned(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.tokens.get(id as usize).map(String::as_str).unwrap_or(UNK_LITERAL)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        split_words(text)
            .into_iter()
            .map(|w| self.id(w).unwrap_or(UNK))
            .collect()
    }

    pub fn detokenize(&self, ids: &[TokenId]) -> String {
        join_words(ids.iter().map(|&id| self.token(id)))
    }

    /// One token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = self.tokens.join("\n");
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for (i, line) in body.lines().enumerate() {
            if line.is_empty() || line.chars().any(char::is_whitespace) {
                return Err(Error::parse(path, i + 1, "token must be non-empty without whitespace"));
            }
            if v.index.contains_key(line) {
                return Err(Error::parse(path, i + 1, format!("duplicate token {line:?}")));
            }
            v.insert(line);
        }
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if v.tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::parse(path, i + 1, format!("expected reserved token {s}")));
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_texts(["Her debut novel Silent Harbor won .", "I'm sorry, but I can't."])
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(vocab().tokenize("").is_empty());
    }

    #[test]
    fn round_trips_in_vocabulary_text() {
        let v = vocab();
        assert_eq!(v.detokenize(&v.tokenize("Silent Harbor")), "Silent Harbor");
        let s = "I'm sorry, but I can't.";
        assert_eq!(v.detokenize(&v.tokenize(s)), s);
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = vocab();
        let ids = v.tokenize("Silent Lighthouse");
        assert_eq!(ids[1], UNK);
        assert_eq!(v.detokenize(&ids), "Silent <unk>");
    }

    #[test]
    fn reserved_literals_are_single_tokens() {
        let v = vocab();
        assert_eq!(v.tokenize("a <step> b")[1], STEP);
        assert_eq!(split_words("x.<step>"), vec!["x", ".", "<", "step", ">"]);
    }

    #[test]
    fn specials_are_dense_prefix() {
        let v = vocab();
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            assert_eq!(v.id(s), Some(i as TokenId));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        let v = vocab();
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }
}

//! Forbidden phrases, the token set they span, and the span automaton.

mod automaton;
mod extract;

pub use automaton::{naive_find_all, Automaton, Occurrence, StateId, ROOT};
pub use extract::{extract_phrases, extract_record_phrases};

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::EmbeddingTable;
use crate::text_model::{TokenId, Vocabulary, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Extracted,
    Escalated,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Extracted => "extracted",
            Origin::Escalated => "escalated",
        }
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extracted" => Ok(Origin::Extracted),
            "escalated" => Ok(Origin::Escalated),
            other => Err(Error::Config(format!("unknown phrase origin {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForbiddenPhrase {
    pub surface: String,
    pub tokens: Vec<TokenId>,
    /// Mean of the token vectors.
    pub embedding: Vec<f64>,
    pub origin: Origin,
}

impl ForbiddenPhrase {
    /// Tokenizes `surface`; the stored surface is the detokenized form so
    /// the two always agree.
    pub fn new(surface: &str, vocab: &Vocabulary, table: &EmbeddingTable, origin: Origin) -> Result<Self> {
        let tokens = vocab.tokenize(surface);
        if tokens.is_empty() {
            return Err(Error::Validation(format!("phrase {surface:?} has no tokens")));
        }
        if tokens.contains(&UNK) {
            return Err(Error::Validation(format!(
                "phrase {surface:?} is outside the vocabulary"
            )));
        }
        Ok(Self::from_tokens(tokens, vocab, table, origin))
    }

    pub fn from_tokens(tokens: Vec<TokenId>, vocab: &Vocabulary, table: &EmbeddingTable, origin: Origin) -> Self {
        ForbiddenPhrase {
            surface: vocab.detokenize(&tokens),
            embedding: table.embed_ids(&tokens),
            tokens,
            origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForbiddenLexicon {
    phrases: Vec<ForbiddenPhrase>,
    token_set: BTreeSet<TokenId>,
    automaton: Automaton,
}

impl Default for ForbiddenLexicon {
    fn default() -> Self {
        Self::compile(Vec::new()).expect("empty lexicon is valid")
    }
}

impl ForbiddenLexicon {
    /// Compiles phrases; a later phrase with the same token sequence as an
    /// earlier one is dropped.
    pub fn compile(phrases: Vec<ForbiddenPhrase>) -> Result<Self> {
        let mut kept: Vec<ForbiddenPhrase> = Vec::with_capacity(phrases.len());
        for p in phrases {
            if p.tokens.is_empty() {
                return Err(Error::Validation(format!("phrase {:?} has no tokens", p.surface)));
            }
            if !kept.iter().any(|k| k.tokens == p.tokens) {
                kept.push(p);
            }
        }
        let token_set = kept.iter().flat_map(|p| p.tokens.iter().copied()).collect();
        let automaton = Automaton::new(&kept.iter().map(|p| p.tokens.clone()).collect::<Vec<_>>());
        Ok(ForbiddenLexicon {
            phrases: kept,
            token_set,
            automaton,
        })
    }

    /// Extracts phrases from `surfaces` (in order), skipping ones that fall
    /// outside the vocabulary.
    pub fn from_surfaces<S: AsRef<str>>(
        surfaces: &[S],
        vocab: &Vocabulary,
        table: &EmbeddingTable,
        origin: Origin,
    ) -> Result<Self> {
        let phrases = surfaces
            .iter()
            .filter_map(|s| ForbiddenPhrase::new(s.as_ref(), vocab, table, origin).ok())
            .collect();
        Self::compile(phrases)
    }

    pub fn phrases(&self) -> &[ForbiddenPhrase] {
        &self.phrases
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Union of the phrases' tokens.
    pub fn token_set(&self) -> &BTreeSet<TokenId> {
        &self.token_set
    }

    pub fn automaton(&self) -> &Automaton {
        &self.automaton
    }

    pub fn contains(&self, tokens: &[TokenId]) -> bool {
        self.phrases.iter().any(|p| p.tokens == tokens)
    }

    /// A copy with `phrase` appended; unchanged when its tokens are already
    /// present.
    pub fn add_phrase(&self, phrase: ForbiddenPhrase) -> Result<Self> {
        if self.contains(&phrase.tokens) {
            return Ok(self.clone());
        }
        let mut phrases = self.phrases.clone();
        phrases.push(phrase);
        Self::compile(phrases)
    }

    /// Tokens that would complete a phrase right after `suffix`.
    pub fn hard_block_set(&self, suffix: &[TokenId]) -> BTreeSet<TokenId> {
        let longest = self.phrases.iter().map(|p| p.tokens.len()).max().unwrap_or(0);
        let window = &suffix[suffix.len().saturating_sub(longest.saturating_sub(1))..];
        self.automaton.completions(self.automaton.state_after(window)).clone()
    }

    pub fn find_all(&self, stream: &[TokenId]) -> Vec<Occurrence> {
        self.automaton.find_all(stream)
    }

    /// Header line with the phrase count, then
    /// `surface <TAB> token ids <TAB> origin` per phrase.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.phrases.len());
        for p in &self.phrases {
            let ids = p.tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "{}\t{}\t{}", p.surface, ids, p.origin.name());
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, vocab: &Vocabulary, table: &EmbeddingTable) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = body.lines();
        let count: usize = lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "expected phrase count"))?;
        let mut phrases = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let fields: Vec<&str> = line.split('\t').collect();
            let [surface, ids, origin] = fields[..] else {
                return Err(Error::parse(path, lineno, "expected three tab-separated fields"));
            };
            let tokens = ids
                .split(' ')
                .map(str::parse)
                .collect::<Result<Vec<TokenId>, _>>()
                .map_err(|e| Error::parse(path, lineno, format!("bad token id: {e}")))?;
            if tokens.iter().any(|&t| t as usize >= vocab.len()) {
                return Err(Error::parse(path, lineno, "token id outside the vocabulary"));
            }
            let origin = origin
                .parse()
                .map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?;
            let phrase = ForbiddenPhrase::from_tokens(tokens, vocab, table, origin);
            if phrase.surface != surface {
                return Err(Error::parse(path, lineno, "surface does not match its token ids"));
            }
            phrases.push(phrase);
        }
        if phrases.len() != count {
            return Err(Error::parse(
                path,
                1,
                format!("header says {count} phrases, found {}", phrases.len()),
            ));
        }
        Self::compile(phrases)
    }
}

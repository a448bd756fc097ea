//! Secure prompt prefixing and the soft/hard logit adjustment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{ForbiddenLexicon, StateId, ROOT};
use crate::semantics::{cosine_similarity, EmbeddingTable};
use crate::text_model::{StepFilter, TokenId, Vocabulary, BLOCKED};

pub const DEFAULT_SECURE_PREFIX: &str =
    "You must not reveal, paraphrase, or hint at any private information about individuals. If asked, refuse politely.";
pub const DEFAULT_REFUSAL: &str = "I'm sorry, but I can't share information about that individual.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionConfig {
    /// Soft penalty weight.
    pub alpha: f64,
    /// Token-to-phrase similarity at which the soft penalty applies.
    pub delta: f64,
    /// Sensitivity threshold, shared by the scope gate and the controller.
    pub tau: f64,
    /// Minimum acceptable mean token log-probability.
    pub eta: f64,
    /// Candidates per round under top-k sampling; greedy always uses one.
    pub n_candidates: usize,
    pub max_rounds: usize,
    pub hard_enabled: bool,
    pub soft_enabled: bool,
    pub secure_prefix_enabled: bool,
    /// When off, the lexicon is the retrieved answer as one phrase.
    pub phrase_extraction: bool,
    /// When off, every query is passed through untouched.
    pub controller_enabled: bool,
    pub secure_prefix: String,
    pub refusal_template: String,
}

impl Default for SuppressionConfig {
    fn default() -> Self {
        SuppressionConfig {
            alpha: 5.0,
            delta: 0.6,
            tau: 0.5,
            eta: -8.0,
            n_candidates: 3,
            max_rounds: 3,
            hard_enabled: true,
            soft_enabled: true,
            secure_prefix_enabled: true,
            phrase_extraction: true,
            controller_enabled: true,
            secure_prefix: DEFAULT_SECURE_PREFIX.to_owned(),
            refusal_template: DEFAULT_REFUSAL.to_owned(),
        }
    }
}

impl SuppressionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {x}")))
            }
        };
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        unit("delta", self.delta)?;
        unit("tau", self.tau)?;
        if !self.eta.is_finite() {
            return Err(Error::Config("eta must be finite".into()));
        }
        if self.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be at least 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// `tokenize(prefix) ‖ query` when prefixing is enabled, else the query.
pub fn apply_secure_prefix(config: &SuppressionConfig, vocab: &Vocabulary, query: &[TokenId]) -> Vec<TokenId> {
    if !config.secure_prefix_enabled {
        return query.to_vec();
    }
    let mut out = vocab.tokenize(&config.secure_prefix);
    out.extend_from_slice(query);
    out
}

/// `max_k cos(Embed(v), Embed(f_k))` for every token `v`; zero for an
/// empty lexicon.
pub fn phrase_similarities(lexicon: &ForbiddenLexicon, table: &EmbeddingTable) -> Vec<f64> {
    (0..table.vocab_size() as TokenId)
        .map(|v| {
            lexicon
                .phrases()
                .iter()
                .map(|p| cosine_similarity(table.vector(v), &p.embedding))
                .fold(0.0, f64::max)
        })
        .collect()
}

fn soft_penalties(config: &SuppressionConfig, similarities: &[f64]) -> Vec<f64> {
    similarities
        .iter()
        .map(|&m| if m >= config.delta { config.alpha * m } else { 0.0 })
        .collect()
}

/// One-shot form of the step filter: soft penalty first, then hard blocking
/// of every token that completes a phrase after `suffix`.
pub fn adjust_logits(
    config: &SuppressionConfig,
    lexicon: &ForbiddenLexicon,
    table: &EmbeddingTable,
    suffix: &[TokenId],
    logits: &[f64],
) -> Vec<f64> {
    let mut out = logits.to_vec();
    if config.soft_enabled {
        let penalties = soft_penalties(config, &phrase_similarities(lexicon, table));
        for (l, p) in out.iter_mut().zip(&penalties) {
            if *p != 0.0 {
                *l -= p;
            }
        }
    }
    if config.hard_enabled {
        for v in lexicon.hard_block_set(suffix) {
            if let Some(l) = out.get_mut(v as usize) {
                *l = BLOCKED;
            }
        }
    }
    out
}

/// Stateful filter for `generate`: tracks the automaton state over the
/// generated tokens and applies the precomputed soft penalties.
#[derive(Debug, Clone)]
pub struct SuppressionFilter<'a> {
    lexicon: &'a ForbiddenLexicon,
    penalties: Option<Vec<f64>>,
    hard: bool,
    state: StateId,
}

impl<'a> SuppressionFilter<'a> {
    pub fn new(config: &SuppressionConfig, lexicon: &'a ForbiddenLexicon, table: &EmbeddingTable) -> Self {
        let penalties = config
            .soft_enabled
            .then(|| soft_penalties(config, &phrase_similarities(lexicon, table)));
        SuppressionFilter {
            lexicon,
            penalties,
            hard: config.hard_enabled,
            state: ROOT,
        }
    }
}

impl StepFilter for SuppressionFilter<'_> {
    fn reset(&mut self) {
        self.state = ROOT;
    }

    fn filter(&mut self, logits: &mut [f64]) {
        if let Some(penalties) = &self.penalties {
            for (l, p) in logits.iter_mut().zip(penalties) {
                if *p != 0.0 {
                    *l -= p;
                }
            }
        }
        if self.hard {
            for &v in self.lexicon.automaton().completions(self.state) {
                if let Some(l) = logits.get_mut(v as usize) {
                    *l = BLOCKED;
                }
            }
        }
    }

    fn observe(&mut self, token: TokenId) {
        self.state = self.lexicon.automaton().step(self.state, token);
    }
}

pub fn make_step_filter<'a>(
    config: &SuppressionConfig,
    lexicon: &'a ForbiddenLexicon,
    table: &EmbeddingTable,
) -> SuppressionFilter<'a> {
    SuppressionFilter::new(config, lexicon, table)
}

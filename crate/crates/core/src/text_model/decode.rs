//! Decoding strategies and the generation loop.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

use super::vocab::{TokenId, BOS, EOS, REFUSAL_MARK, STEP, THINK_CLOSE, THINK_OPEN, UNK};
use super::{TokenModel, BLOCKED};

pub const DEFAULT_REASONING_BUDGET: usize = 8;
pub const DEFAULT_MAX_LEN: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThinkMode {
    DefaultThink,
    ZeroThink,
    LessThink,
}

impl ThinkMode {
    pub const ALL: [ThinkMode; 3] = [ThinkMode::DefaultThink, ThinkMode::ZeroThink, ThinkMode::LessThink];

    pub fn name(self) -> &'static str {
        match self {
            ThinkMode::DefaultThink => "default_think",
            ThinkMode::ZeroThink => "zero_think",
            ThinkMode::LessThink => "less_think",
        }
    }
}

impl fmt::Display for ThinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ThinkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "default_think" | "defaultthink" | "default" => Ok(ThinkMode::DefaultThink),
            "zero_think" | "zerothink" | "zero" => Ok(ThinkMode::ZeroThink),
            "less_think" | "lessthink" | "less" => Ok(ThinkMode::LessThink),
            other => Err(Error::Config(format!("unknown decoding strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sampler {
    Greedy,
    TopK { k: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodingStrategy {
    pub mode: ThinkMode,
    pub sampler: Sampler,
    pub max_len: usize,
    /// Cap on the reasoning segment under `LessThink`.
    pub reasoning_budget: usize,
}

impl DecodingStrategy {
    pub fn greedy(mode: ThinkMode) -> Self {
        DecodingStrategy {
            mode,
            sampler: Sampler::Greedy,
            max_len: DEFAULT_MAX_LEN,
            reasoning_budget: DEFAULT_REASONING_BUDGET,
        }
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }
}

/// A per-step logit hook. The generator calls `reset` once per session,
/// `filter` before every sampled token, and `observe` after every emitted
/// token (forced delimiters included).
pub trait StepFilter {
    fn reset(&mut self) {}
    fn filter(&mut self, logits: &mut [f64]);
    fn observe(&mut self, _token: TokenId) {}
}

/// Leaves logits untouched.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityFilter;

impl StepFilter for IdentityFilter {
    fn filter(&mut self, _logits: &mut [f64]) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub prompt: Vec<TokenId>,
    /// Everything generated after the prompt, delimiters included.
    pub tokens: Vec<TokenId>,
    pub truncated: bool,
    pub strategy: DecodingStrategy,
}

impl Trajectory {
    fn close_position(&self) -> Option<usize> {
        self.tokens.iter().position(|&t| t == THINK_CLOSE)
    }

    /// Tokens strictly between the think delimiters (or to the end when the
    /// block was never closed).
    pub fn reasoning_segment(&self) -> &[TokenId] {
        let Some(open) = self.tokens.iter().position(|&t| t == THINK_OPEN) else {
            return &[];
        };
        let end = self.close_position().unwrap_or(self.tokens.len());
        if end <= open {
            return &[];
        }
        &self.tokens[open + 1..end]
    }

    /// Tokens after the closing delimiter, without the trailing EOS.
    pub fn answer_segment(&self) -> &[TokenId] {
        let Some(close) = self.close_position() else {
            return &[];
        };
        let rest = &self.tokens[close + 1..];
        match rest.last() {
            Some(&EOS) => &rest[..rest.len() - 1],
            _ => rest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Reasoning,
    Answer,
}

fn structural_mask(logits: &mut [f64], phase: Phase) {
    for t in [BOS, UNK, THINK_OPEN, REFUSAL_MARK] {
        if let Some(x) = logits.get_mut(t as usize) {
            *x = BLOCKED;
        }
    }
    let phase_masked: &[TokenId] = match phase {
        Phase::Reasoning => &[EOS],
        Phase::Answer => &[THINK_CLOSE, STEP],
    };
    for &t in phase_masked {
        if let Some(x) = logits.get_mut(t as usize) {
            *x = BLOCKED;
        }
    }
}

/// Highest logit, lowest id on ties. `None` when every entry is blocked.
pub fn argmax(logits: &[f64]) -> Option<TokenId> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in logits.iter().enumerate() {
        if x <= BLOCKED {
            continue;
        }
        if best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i as TokenId)
}

/// Samples among the `k` highest unblocked logits (ties by lowest id).
pub fn sample_top_k(logits: &[f64], k: usize, rng: &mut impl Rng) -> Option<TokenId> {
    let mut idx: Vec<usize> = (0..logits.len()).filter(|&i| logits[i] > BLOCKED).collect();
    if idx.is_empty() {
        return None;
    }
    idx.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    idx.truncate(k.max(1));
    let max = logits[idx[0]];
    let weights: Vec<f64> = idx.iter().map(|&i| (logits[i] - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for (&i, w) in idx.iter().zip(&weights) {
        if r < *w {
            return Some(i as TokenId);
        }
        r -= w;
    }
    idx.last().map(|&i| i as TokenId)
}

/// Generates one trajectory. The think block is opened by force; `ZeroThink`
/// closes it immediately and `LessThink` closes it once the reasoning budget
/// is spent. Generation stops at EOS or after `max_len` tokens.
pub fn generate<M: TokenModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    strategy: &DecodingStrategy,
    mut filter: Option<&mut dyn StepFilter>,
) -> Trajectory {
    let mut rng = match strategy.sampler {
        Sampler::TopK { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Sampler::Greedy => None,
    };
    if let Some(f) = filter.as_deref_mut() {
        f.reset();
    }
    let mut context = prompt.to_vec();
    let mut tokens = Vec::new();
    let mut reasoning_len = 0usize;

    let emit = |tok: TokenId,
                context: &mut Vec<TokenId>,
                tokens: &mut Vec<TokenId>,
                filter: &mut Option<&mut dyn StepFilter>| {
        context.push(tok);
        tokens.push(tok);
        if let Some(f) = filter.as_deref_mut() {
            f.observe(tok);
        }
    };

    let mut phase = Phase::Reasoning;
    if strategy.max_len > 0 {
        emit(THINK_OPEN, &mut context, &mut tokens, &mut filter);
    }
    if strategy.mode == ThinkMode::ZeroThink && tokens.len() < strategy.max_len {
        emit(THINK_CLOSE, &mut context, &mut tokens, &mut filter);
        phase = Phase::Answer;
    }

    while tokens.len() < strategy.max_len {
        if phase == Phase::Reasoning
            && strategy.mode == ThinkMode::LessThink
            && reasoning_len >= strategy.reasoning_budget
        {
            emit(THINK_CLOSE, &mut context, &mut tokens, &mut filter);
            phase = Phase::Answer;
            continue;
        }
        let mut logits = model.next_logits(&context);
        if let Some(f) = filter.as_deref_mut() {
            f.filter(&mut logits);
        }
        structural_mask(&mut logits, phase);
        let picked = match (&mut rng, strategy.sampler) {
            (Some(rng), Sampler::TopK { k, .. }) => sample_top_k(&logits, k, rng),
            _ => argmax(&logits),
        };
        // every candidate blocked: close whatever segment is open
        let tok = picked.unwrap_or(match phase {
            Phase::Reasoning => THINK_CLOSE,
            Phase::Answer => EOS,
        });
        emit(tok, &mut context, &mut tokens, &mut filter);
        match tok {
            THINK_CLOSE => phase = Phase::Answer,
            EOS => break,
            _ if phase == Phase::Reasoning => reasoning_len += 1,
            _ => {}
        }
    }

    let truncated = tokens.last() != Some(&EOS);
    Trajectory {
        prompt: prompt.to_vec(),
        tokens,
        truncated,
        strategy: *strategy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Always prefers the ordinary token after the last one, wrapping past
    /// the reserved ids.
    struct Counter(usize);

    impl TokenModel for Counter {
        fn vocab_size(&self) -> usize {
            self.0
        }
        fn next_logits(&self, context: &[TokenId]) -> Vec<f64> {
            let last = *context.last().unwrap_or(&0) as usize;
            let mut l = vec![0.0; self.0];
            let next = (last + 1) % self.0;
            l[next.max(crate::text_model::SPECIAL_TOKENS.len())] = 5.0;
            l
        }
    }

    #[test]
    fn zero_think_has_empty_reasoning() {
        let t = generate(
            &Counter(20),
            &[10],
            &DecodingStrategy::greedy(ThinkMode::ZeroThink),
            None,
        );
        assert!(t.reasoning_segment().is_empty());
        assert_eq!(&t.tokens[..2], &[THINK_OPEN, THINK_CLOSE]);
    }

    #[test]
    fn less_think_caps_reasoning() {
        let mut s = DecodingStrategy::greedy(ThinkMode::LessThink);
        s.reasoning_budget = 3;
        let t = generate(&Counter(30), &[10], &s, None);
        assert_eq!(t.reasoning_segment().len(), 3);
    }

    #[test]
    fn truncation_is_flagged() {
        let mut s = DecodingStrategy::greedy(ThinkMode::DefaultThink);
        s.max_len = 5;
        let t = generate(&Counter(400), &[10], &s, None);
        assert_eq!(t.tokens.len(), 5);
        assert!(t.truncated);
    }

    #[test]
    fn greedy_breaks_ties_by_lowest_id() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax(&[BLOCKED, BLOCKED]), None);
    }

    #[test]
    fn top_k_never_picks_blocked() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let logits = [BLOCKED, 0.0, BLOCKED, 0.0];
        for _ in 0..200 {
            let t = sample_top_k(&logits, 3, &mut rng).unwrap();
            assert!(t == 1 || t == 3);
        }
    }

    #[test]
    fn identity_filter_is_neutral() {
        let s = DecodingStrategy::greedy(ThinkMode::DefaultThink);
        let a = generate(&Counter(40), &[9], &s, None);
        let mut f = IdentityFilter;
        let b = generate(&Counter(40), &[9], &s, Some(&mut f));
        assert_eq!(a, b);
    }

    #[test]
    fn mode_names_parse() {
        for m in ThinkMode::ALL {
            assert_eq!(m.name().parse::<ThinkMode>().unwrap(), m);
        }
        assert!("sideways".parse::<ThinkMode>().is_err());
    }
}

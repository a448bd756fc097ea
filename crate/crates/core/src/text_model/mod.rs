//! Tokenizer, the token-model contract, the toy n-gram model, and decoding.

mod decode;
mod ngram;
mod vocab;

pub use decode::{
    argmax, generate, sample_top_k, DecodingStrategy, IdentityFilter, Sampler, StepFilter, ThinkMode, Trajectory,
    DEFAULT_MAX_LEN, DEFAULT_REASONING_BUDGET,
};
pub use ngram::{train_ngram, training_stream, NGramModel, DEFAULT_SMOOTHING};
pub use vocab::{
    is_special, join_words, split_words, TokenId, Vocabulary, BOS, EOS, REFUSAL_MARK, SPECIAL_TOKENS, STEP,
    STEP_LITERAL, THINK_CLOSE, THINK_OPEN, UNK, UNK_LITERAL,
};

/// Logit value of a token that must never be sampled: the most negative
/// finite `f64`, whose softmax weight underflows to zero.
pub const BLOCKED: f64 = f64::MIN;

/// Anything that maps a token context to unnormalized scores over a fixed
/// vocabulary.
pub trait TokenModel: Sync {
    fn vocab_size(&self) -> usize;
    fn next_logits(&self, context: &[TokenId]) -> Vec<f64>;
}

impl<M: TokenModel + ?Sized> TokenModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_logits(&self, context: &[TokenId]) -> Vec<f64> {
        (**self).next_logits(context)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Natural-log probability of each token of `tokens`, scored left to right
/// after `prompt`.
pub fn token_log_probs<M: TokenModel + ?Sized>(model: &M, prompt: &[TokenId], tokens: &[TokenId]) -> Vec<f64> {
    let mut context = prompt.to_vec();
    let mut out = Vec::with_capacity(tokens.len());
    for &t in tokens {
        let logits = model.next_logits(&context);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        out.push(logits.get(t as usize).map_or(f64::NEG_INFINITY, |&l| l - log_z));
        context.push(t);
    }
    out
}

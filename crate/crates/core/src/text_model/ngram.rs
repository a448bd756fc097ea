//! Order-k count model with add-δ smoothing.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::Record;
use crate::error::{Error, Result};

use super::vocab::{TokenId, Vocabulary, BOS, EOS, THINK_CLOSE, THINK_OPEN};
use super::TokenModel;

pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: HashMap<TokenId, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    vocab_size: usize,
    smoothing: f64,
    pad: TokenId,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

/// The token stream a record contributes to training:
/// `question <think> cot </think> answer <eos>`.
pub fn training_stream(vocab: &Vocabulary, record: &Record) -> Vec<TokenId> {
    let mut s = vocab.tokenize(&record.question);
    s.push(THINK_OPEN);
    s.extend(vocab.tokenize(&record.cot));
    s.push(THINK_CLOSE);
    s.extend(vocab.tokenize(&record.answer));
    s.push(EOS);
    s
}

/// Trains the toy model on every record of the corpus.
pub fn train_ngram(corpus: &[Record], vocab: &Vocabulary, order: usize) -> Result<NGramModel> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot train on an empty corpus".into()));
    }
    let streams: Vec<_> = corpus.iter().map(|r| training_stream(vocab, r)).collect();
    NGramModel::fit(&streams, order, vocab.len(), DEFAULT_SMOOTHING)
}

impl NGramModel {
    /// Counts every window of `order` tokens over BOS-padded streams.
    pub fn fit(streams: &[Vec<TokenId>], order: usize, vocab_size: usize, smoothing: f64) -> Result<Self> {
        Self::fit_with_pad(streams, order, vocab_size, smoothing, BOS)
    }

    pub fn fit_with_pad(
        streams: &[Vec<TokenId>],
        order: usize,
        vocab_size: usize,
        smoothing: f64,
        pad: TokenId,
    ) -> Result<Self> {
        if order < 2 {
            return Err(Error::Config(format!("n-gram order must be >= 2, got {order}")));
        }
        if streams.is_empty() {
            return Err(Error::Config("cannot train on an empty corpus".into()));
        }
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::Config(format!("smoothing must be positive, got {smoothing}")));
        }
        let mut model = NGramModel {
            order,
            vocab_size,
            smoothing,
            pad,
            counts: HashMap::new(),
        };
        for stream in streams {
            let mut padded = vec![pad; order - 1];
            padded.extend_from_slice(stream);
            for w in padded.windows(order) {
                let (ctx, next) = w.split_at(order - 1);
                model.bump(ctx.to_vec(), next[0], 1);
            }
        }
        Ok(model)
    }

    fn bump(&mut self, ctx: Vec<TokenId>, next: TokenId, by: u64) {
        let entry = self.counts.entry(ctx).or_default();
        entry.total += by;
        *entry.next.entry(next).or_default() += by;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// The last `order - 1` tokens of the context, left-padded.
    pub fn context_key(&self, context: &[TokenId]) -> Vec<TokenId> {
        let n = self.order - 1;
        let mut key = Vec::with_capacity(n);
        if context.len() < n {
            key.resize(n - context.len(), self.pad);
            key.extend_from_slice(context);
        } else {
            key.extend_from_slice(&context[context.len() - n..]);
        }
        key
    }

    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        self.counts
            .get(&self.context_key(context))
            .and_then(|c| c.next.get(&next).copied())
            .unwrap_or(0)
    }

    pub fn context_total(&self, context: &[TokenId]) -> u64 {
        self.counts.get(&self.context_key(context)).map_or(0, |c| c.total)
    }

    /// Number of distinct contexts seen in training.
    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    /// Flat count table: a header line, then
    /// `context ids <TAB> next id <TAB> count` per line, sorted.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# order={} vocab={} smoothing={:?} pad={}",
            self.order, self.vocab_size, self.smoothing, self.pad
        );
        let sorted: BTreeMap<_, BTreeMap<_, _>> =
            self.counts.iter().map(|(k, v)| (k, v.next.iter().collect())).collect();
        for (ctx, nexts) in sorted {
            let ctx_s = ctx.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ");
            for (next, count) in nexts {
                let _ = writeln!(out, "{ctx_s}\t{next}\t{count}");
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = body.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let mut order = None;
        let mut vocab_size = None;
        let mut smoothing = None;
        let mut pad = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(path, 1, format!("bad header field {field:?}")))?;
            let bad = |_| Error::parse(path, 1, format!("bad header value {field:?}"));
            match k {
                "order" => order = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "vocab" => vocab_size = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "smoothing" => smoothing = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "pad" => pad = Some(v.parse::<TokenId>().map_err(|e| bad(e.to_string()))?),
                _ => return Err(Error::parse(path, 1, format!("unknown header field {k:?}"))),
            }
        }
        let (Some(order), Some(vocab_size), Some(smoothing), Some(pad)) = (order, vocab_size, smoothing, pad) else {
            return Err(Error::parse(path, 1, "incomplete header"));
        };
        let mut model = NGramModel {
            order,
            vocab_size,
            smoothing,
            pad,
            counts: HashMap::new(),
        };
        for (i, line) in lines {
            let lineno = i + 1;
            let mut parts = line.split('\t');
            let (Some(ctx), Some(next), Some(count), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::parse(path, lineno, "expected three tab-separated fields"));
            };
            let ctx: Vec<TokenId> = ctx
                .split(' ')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| Error::parse(path, lineno, format!("bad context: {e}")))?;
            if ctx.len() != order - 1 {
                return Err(Error::parse(path, lineno, "context length does not match order"));
            }
            let next: TokenId = next
                .parse()
                .map_err(|e| Error::parse(path, lineno, format!("bad next token: {e}")))?;
            let count: u64 = count
                .parse()
                .map_err(|e| Error::parse(path, lineno, format!("bad count: {e}")))?;
            model.bump(ctx, next, count);
        }
        Ok(model)
    }
}

impl TokenModel for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// `log((count(ctx, v) + δ) / (total(ctx) + δ·V))` for every token.
    fn next_logits(&self, context: &[TokenId]) -> Vec<f64> {
        let v = self.vocab_size as f64;
        let d = self.smoothing;
        match self.counts.get(&self.context_key(context)) {
            None => vec![(1.0 / v).ln(); self.vocab_size],
            Some(cc) => {
                let denom = cc.total as f64 + d * v;
                let base = (d / denom).ln();
                let mut out = vec![base; self.vocab_size];
                for (&tok, &c) in &cc.next {
                    if let Some(slot) = out.get_mut(tok as usize) {
                        *slot = ((c as f64 + d) / denom).ln();
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_model::softmax;

    // toy vocabulary {EOS=0, a=1, b=2}; padding lives outside it
    const A: TokenId = 1;
    const B: TokenId = 2;
    const PAD: TokenId = 99;

    fn abab() -> NGramModel {
        NGramModel::fit_with_pad(&[vec![A, B, A, B]], 2, 3, 1.0, PAD).unwrap()
    }

    #[test]
    fn bigram_counts_match_hand_count() {
        let m = abab();
        assert_eq!(m.count(&[A], B), 2);
        assert_eq!(m.count(&[B], A), 1);
        assert_eq!(m.context_total(&[A]), 2);
    }

    #[test]
    fn smoothed_logit_matches_counting_oracle() {
        let m = abab();
        let l = m.next_logits(&[A]);
        assert!((l[B as usize] - (3.0f64 / 5.0).ln()).abs() < 1e-12);
        assert!((l[A as usize] - (1.0f64 / 5.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let m = abab();
        let l = m.next_logits(&[0]);
        assert!(l.iter().all(|&x| x == l[0]));
        let p = softmax(&l);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(NGramModel::fit(&[], 2, 3, 1.0).is_err());
        assert!(NGramModel::fit(&[vec![1]], 1, 3, 1.0).is_err());
    }

    #[test]
    fn retraining_is_deterministic() {
        assert_eq!(abab(), abab());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.counts");
        let m = NGramModel::fit(&[vec![7, 8, 9, 7, 8], vec![9, 9]], 3, 10, 1.0).unwrap();
        m.save(&p).unwrap();
        assert_eq!(NGramModel::load(&p).unwrap(), m);
    }
}

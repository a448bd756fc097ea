//! Membership inference from generated outputs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{auc_mann_whitney, leakage, segment, LeakageMeasure, Level};
use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::semantics::{fit_logistic, EmbeddingTable, TrainParams};
use crate::text_model::{token_log_probs, TokenModel, Trajectory, Vocabulary, THINK_CLOSE, THINK_OPEN};

/// Mean log-probability of the tokens of `level`'s segment given everything
/// before it; 0 for an empty segment.
pub fn segment_fluency<M: TokenModel + ?Sized>(model: &M, output: &Trajectory, level: Level) -> f64 {
    let seg = segment(output, level);
    if seg.is_empty() {
        return 0.0;
    }
    let opener = match level {
        Level::Answer => THINK_CLOSE,
        Level::Cot => THINK_OPEN,
    };
    let offset = output.tokens.iter().position(|&t| t == opener).map_or(0, |p| p + 1);
    let mut context = output.prompt.clone();
    context.extend_from_slice(&output.tokens[..offset]);
    let lp = token_log_probs(model, &context, seg);
    lp.iter().sum::<f64>() / lp.len() as f64
}

/// `[RougeL leakage, cosine leakage, segment fluency, segment length / max_len]`.
pub fn mia_features<M: TokenModel + ?Sized>(
    level: Level,
    output: &Trajectory,
    truth: &Record,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    model: &M,
) -> Vec<f64> {
    let max_len = output.strategy.max_len.max(1) as f64;
    vec![
        leakage(LeakageMeasure::RougeL, output, truth, level, vocab, table),
        leakage(LeakageMeasure::CosineSim, output, truth, level, vocab, table),
        segment_fluency(model, output, level),
        segment(output, level).len() as f64 / max_len,
    ]
}

/// Held-out AUC of a logistic attack that separates forget records
/// (members) from retain records using features of their outputs. Each
/// class is shuffled with `seed` and split in half; the attack trains on
/// the first halves.
pub fn mia_eval<M: TokenModel + ?Sized>(
    level: Level,
    outputs: &[Trajectory],
    records: &[Record],
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    model: &M,
    seed: u64,
) -> Result<f64> {
    if outputs.len() != records.len() {
        return Err(Error::Precondition(format!(
            "{} outputs for {} records",
            outputs.len(),
            records.len()
        )));
    }
    let feats: Vec<Vec<f64>> = outputs
        .iter()
        .zip(records)
        .map(|(o, r)| mia_features(level, o, r, vocab, table, model))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for member in [true, false] {
        let mut idx: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].is_forget() == member)
            .collect();
        if idx.len() < 2 {
            return Err(Error::Precondition(format!(
                "membership attack needs at least two {} records",
                if member { "forget" } else { "retain" }
            )));
        }
        idx.shuffle(&mut rng);
        let half = idx.len() / 2;
        train.extend(idx[..half].iter().map(|&i| (i, member)));
        test.extend(idx[half..].iter().map(|&i| (i, member)));
    }
    let x: Vec<Vec<f64>> = train.iter().map(|&(i, _)| feats[i].clone()).collect();
    let y: Vec<bool> = train.iter().map(|&(_, m)| m).collect();
    let (w, b) = fit_logistic(
        &x,
        &y,
        &TrainParams {
            seed,
            ..TrainParams::default()
        },
    )?;
    let score = |f: &[f64]| f.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
    let pos: Vec<f64> = test.iter().filter(|t| t.1).map(|&(i, _)| score(&feats[i])).collect();
    let neg: Vec<f64> = test.iter().filter(|t| !t.1).map(|&(i, _)| score(&feats[i])).collect();
    auc_mann_whitney(&pos, &neg)
}

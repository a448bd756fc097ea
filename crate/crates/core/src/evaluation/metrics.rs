//! Leakage measures, the multi-decoding consistency score, and AUC.

use serde::{Deserialize, Serialize};

use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::semantics::{cosine_similarity, EmbeddingTable};
use crate::text_model::{is_special, TokenId, Trajectory, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeakageMeasure {
    RougeL,
    CosineSim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Answer,
    Cot,
}

pub fn lcs_len(a: &[TokenId], b: &[TokenId]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence; 0 when either side is
/// empty or nothing is shared.
pub fn rouge_l(candidate: &[TokenId], reference: &[TokenId]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-L recall: the share of `reference` found in order in `candidate`.
pub fn rouge_l_recall(candidate: &[TokenId], reference: &[TokenId]) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    lcs_len(candidate, reference) as f64 / reference.len() as f64
}

pub fn segment(output: &Trajectory, level: Level) -> &[TokenId] {
    match level {
        Level::Answer => output.answer_segment(),
        Level::Cot => output.reasoning_segment(),
    }
}

pub fn truth_tokens(vocab: &Vocabulary, truth: &Record, level: Level) -> Vec<TokenId> {
    match level {
        Level::Answer => vocab.tokenize(&truth.answer),
        Level::Cot => vocab.tokenize(&truth.cot),
    }
}

/// Similarity of the output segment at `level` to the matching part of the
/// ground truth, in [0, 1].
pub fn leakage(
    measure: LeakageMeasure,
    output: &Trajectory,
    truth: &Record,
    level: Level,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
) -> f64 {
    let cand = segment(output, level);
    let reference = truth_tokens(vocab, truth, level);
    match measure {
        LeakageMeasure::RougeL => rouge_l(cand, &reference),
        LeakageMeasure::CosineSim => {
            cosine_similarity(&table.embed_ids(cand), &table.embed_ids(&reference)).clamp(0.0, 1.0)
        }
    }
}

/// Mean ROUGE-L recall of the record's planted fragment paraphrases in the
/// generated text.
pub fn paraphrase_leakage(output: &Trajectory, truth: &Record, vocab: &Vocabulary) -> f64 {
    let text: Vec<TokenId> = output.tokens.iter().copied().filter(|&t| !is_special(t)).collect();
    let paras = truth.fragment_paraphrases();
    if paras.is_empty() {
        return 0.0;
    }
    paras
        .iter()
        .map(|p| rouge_l_recall(&text, &vocab.tokenize(p)))
        .sum::<f64>()
        / paras.len() as f64
}

/// `1 - max` over the per-strategy leakages.
pub fn mcs(leakages: &[f64]) -> Result<f64> {
    if leakages.is_empty() {
        return Err(Error::Precondition("mcs over no strategies".into()));
    }
    if let Some(x) = leakages.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Precondition(format!("leakage {x} outside [0, 1]")));
    }
    Ok(1.0 - leakages.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc_mann_whitney(positive: &[f64], negative: &[f64]) -> Result<f64> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::Precondition("AUC needs scores for both classes".into()));
    }
    let mut neg = negative.to_vec();
    neg.sort_by(f64::total_cmp);
    // twice the win count, so ties stay integral
    let mut doubled: u64 = 0;
    for &p in positive {
        let below = neg.partition_point(|&n| n < p);
        let not_above = neg.partition_point(|&n| n <= p);
        doubled += 2 * below as u64 + (not_above - below) as u64;
    }
    Ok(doubled as f64 / (2.0 * positive.len() as f64 * negative.len() as f64))
}

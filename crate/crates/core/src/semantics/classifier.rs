//! Logistic scope classifier over pooled question embeddings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::text_model::Vocabulary;

use super::EmbeddingTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub steps: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            steps: 2000,
            learning_rate: 0.5,
            l2: 1e-3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Hex SHA-256 of the training questions and labels.
    pub trained_on: String,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fits a logistic model by full-batch gradient descent on standardized
/// features; the standardization is folded back into the returned weights.
/// Each class carries half of the loss so a small forget set is not drowned
/// out by the retain set.
pub fn fit_logistic(features: &[Vec<f64>], labels: &[bool], params: &TrainParams) -> Result<(Vec<f64>, f64)> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Config("logistic training needs both classes".into()));
    }
    let dim = features[0].len();
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in features {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; dim];
    for x in features {
        for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    std.iter_mut()
        .for_each(|s| *s = if *s > 1e-24 { s.sqrt() } else { 1.0 });
    let z: Vec<Vec<f64>> = features
        .iter()
        .map(|x| x.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect())
        .collect();

    let weight_pos = 0.5 / n_pos as f64;
    let weight_neg = 0.5 / n_neg as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let mut b = 0.0;
    let mut grad = vec![0.0; dim];
    for _ in 0..params.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, &y) in z.iter().zip(labels) {
            let p = sigmoid(dot(&w, x) + b);
            let (target, weight) = if y { (1.0, weight_pos) } else { (0.0, weight_neg) };
            let err = (p - target) * weight;
            for (g, v) in grad.iter_mut().zip(x) {
                *g += err * v;
            }
            grad_b += err;
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= params.learning_rate * (g + params.l2 * *wi);
        }
        b -= params.learning_rate * grad_b;
    }

    let weights: Vec<f64> = w.iter().zip(&std).map(|(wi, s)| wi / s).collect();
    let bias = b - weights.iter().zip(&mean).map(|(wi, m)| wi * m).sum::<f64>();
    Ok((weights, bias))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains on question embeddings, forget = 1 and retain = 0.
pub fn train_scope_classifier(
    forget: &[Record],
    retain: &[Record],
    table: &EmbeddingTable,
    vocab: &Vocabulary,
    params: &TrainParams,
) -> Result<ScopeClassifier> {
    if forget.is_empty() || retain.is_empty() {
        return Err(Error::Config(
            "scope classifier needs non-empty forget and retain sets".into(),
        ));
    }
    let mut hasher = Sha256::new();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, y) in forget
        .iter()
        .map(|r| (r, true))
        .chain(retain.iter().map(|r| (r, false)))
    {
        hasher.update(r.question.as_bytes());
        hasher.update(if y { b"\x01" } else { b"\x00" });
        features.push(table.embed_text(vocab, &r.question));
        labels.push(y);
    }
    let (weights, bias) = fit_logistic(&features, &labels, params)?;
    Ok(ScopeClassifier {
        weights,
        bias,
        trained_on: hex::encode(hasher.finalize()),
    })
}

impl ScopeClassifier {
    pub fn score(&self, embedding: &[f64]) -> f64 {
        dot(&self.weights, embedding) + self.bias
    }

    pub fn probability(&self, embedding: &[f64]) -> f64 {
        sigmoid(self.score(embedding))
    }

    /// Text file: `trained_on`, bias, then one weight per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "trained_on {}", self.trained_on);
        let _ = writeln!(out, "bias {:?}", self.bias);
        for w in &self.weights {
            let _ = writeln!(out, "{w:?}");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = body.lines();
        let trained_on = lines
            .next()
            .and_then(|l| l.strip_prefix("trained_on "))
            .ok_or_else(|| Error::parse(path, 1, "expected `trained_on <hash>`"))?
            .to_owned();
        let bias = lines
            .next()
            .and_then(|l| l.strip_prefix("bias "))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(path, 2, "expected `bias <value>`"))?;
        let weights = lines
            .enumerate()
            .map(|(i, l)| l.parse::<f64>().map_err(|e| Error::parse(path, i + 3, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScopeClassifier {
            weights,
            bias,
            trained_on,
        })
    }
}

/// `sigmoid(wᵀ Embed(query) + b)`.
pub fn classify_scope(clf: &ScopeClassifier, table: &EmbeddingTable, vocab: &Vocabulary, query: &str) -> f64 {
    clf.probability(&table.embed_text(vocab, query))
}

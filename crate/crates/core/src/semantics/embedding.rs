//! Co-occurrence token embeddings with mean pooling.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::text_model::{is_special, training_stream, TokenId, Vocabulary};

const MAGIC: &[u8; 8] = b"TGEMB\x00\x00\x01";
pub const MAX_DIM: usize = 64;
pub const WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    /// Row-major, one row of `dim` values per token id.
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Validation("embedding rows differ in length".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Validation("embedding values must be finite".into()));
        }
        Ok(EmbeddingTable {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn vector(&self, id: TokenId) -> &[f64] {
        let start = id as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Mean of the token vectors; the zero vector for an empty sequence.
    pub fn embed_ids(&self, ids: &[TokenId]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if ids.is_empty() {
            return out;
        }
        for &id in ids {
            for (o, x) in out.iter_mut().zip(self.vector(id)) {
                *o += x;
            }
        }
        let n = ids.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn embed_text(&self, vocab: &Vocabulary, text: &str) -> Vec<f64> {
        self.embed_ids(&vocab.tokenize(text))
    }

    /// Binary layout: 8-byte magic, dim and vocabulary size as little-endian
    /// `u32`, then the row-major `f64` values.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + self.data.len() * 8);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.vocab_size() as u32).to_le_bytes());
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::parse(path, 1, m);
        if buf.len() < 16 || &buf[..8] != MAGIC {
            return Err(bad("not an embedding table"));
        }
        let dim = u32::from_le_bytes(buf[8..12].try_into().expect("4 bytes")) as usize;
        let rows = u32::from_le_bytes(buf[12..16].try_into().expect("4 bytes")) as usize;
        let body = &buf[16..];
        if body.len() != dim * rows * 8 {
            return Err(bad("embedding table size does not match its header"));
        }
        let data: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(bad("embedding values must be finite"));
        }
        Ok(EmbeddingTable { dim, data })
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

/// Builds token embeddings from the training streams of `records`.
///
/// Statistics are collected per case-folded word type, so `Harbor` and
/// `harbor` share one vector. Each type gets a vector of counts of the
/// ordinary types seen within `WINDOW` positions of it. Rows are scaled to
/// unit length, centered on the mean row so that the shared function-word
/// context does not dominate every similarity, rescaled, and projected to
/// `min(V, MAX_DIM)` dimensions with a seeded ±1/√d sign matrix. Reserved
/// tokens get the zero vector.
pub fn build_embeddings(records: &[Record], vocab: &Vocabulary, seed: u64) -> EmbeddingTable {
    let v = vocab.len();
    let mut type_of: Vec<Option<usize>> = vec![None; v];
    let mut types: HashMap<String, usize> = HashMap::new();
    for (id, slot) in type_of.iter_mut().enumerate() {
        if !is_special(id as TokenId) {
            let folded = vocab.token(id as TokenId).to_lowercase();
            let next = types.len();
            *slot = Some(*types.entry(folded).or_insert(next));
        }
    }
    let n = types.len();

    let mut counts = vec![0.0f64; n * n];
    for r in records {
        let stream: Vec<Option<usize>> = training_stream(vocab, r)
            .into_iter()
            .map(|t| type_of.get(t as usize).copied().flatten())
            .collect();
        for (i, t) in stream.iter().enumerate() {
            let Some(t) = *t else { continue };
            let lo = i.saturating_sub(WINDOW);
            let hi = (i + WINDOW + 1).min(stream.len());
            for (j, c) in stream.iter().enumerate().take(hi).skip(lo) {
                if let (true, Some(c)) = (j != i, *c) {
                    counts[t * n + c] += 1.0;
                }
            }
        }
    }

    let seen: Vec<usize> = (0..n)
        .filter(|&t| counts[t * n..(t + 1) * n].iter().any(|&c| c > 0.0))
        .collect();
    for &t in &seen {
        normalize(&mut counts[t * n..(t + 1) * n]);
    }
    if !seen.is_empty() {
        let mut mean = vec![0.0; n];
        for &t in &seen {
            for (m, x) in mean.iter_mut().zip(&counts[t * n..(t + 1) * n]) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= seen.len() as f64);
        for &t in &seen {
            for (x, m) in counts[t * n..(t + 1) * n].iter_mut().zip(&mean) {
                *x -= m;
            }
            normalize(&mut counts[t * n..(t + 1) * n]);
        }
    }

    let dim = v.min(MAX_DIM);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let projection: Vec<f64> = (0..n * dim)
        .map(|_| if rng.gen::<bool>() { scale } else { -scale })
        .collect();

    let mut projected = vec![0.0; n * dim];
    for &t in &seen {
        let row = &counts[t * n..(t + 1) * n];
        let out = &mut projected[t * dim..(t + 1) * dim];
        for (c, &x) in row.iter().enumerate() {
            if x != 0.0 {
                for (o, p) in out.iter_mut().zip(&projection[c * dim..(c + 1) * dim]) {
                    *o += x * p;
                }
            }
        }
    }
    let mut data = vec![0.0; v * dim];
    for (id, t) in type_of.iter().enumerate() {
        if let Some(t) = t {
            data[id * dim..(id + 1) * dim].copy_from_slice(&projected[t * dim..(t + 1) * dim]);
        }
    }
    EmbeddingTable { dim, data }
}

fn normalize(row: &mut [f64]) {
    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        row.iter_mut().for_each(|x| *x /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_rows(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap()
    }

    #[test]
    fn pooling_a_single_token_is_that_token() {
        let t = table();
        assert_eq!(t.embed_ids(&[2]), vec![3.0, -1.0]);
    }

    #[test]
    fn pooling_nothing_is_zero() {
        assert_eq!(table().embed_ids(&[]), vec![0.0, 0.0]);
    }

    #[test]
    fn pooling_is_the_elementwise_mean() {
        assert_eq!(table().embed_ids(&[1, 2]), vec![2.0, 0.5]);
    }

    #[test]
    fn cosine_worked_values() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!((cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]) - 1.0).abs() < 1e-15);
        let s = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]);
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.bin");
        table().save(&p).unwrap();
        assert_eq!(EmbeddingTable::load(&p).unwrap(), table());
    }

    #[test]
    fn load_rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.bin");
        table().save(&p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, bytes).unwrap();
        assert!(EmbeddingTable::load(&p).is_err());
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_scale_invariant((u, v) in vec_pair(), c in 0.01f64..100.0) {
            let s = cosine_similarity(&u, &v);
            prop_assert!((-1.0..=1.0).contains(&s));
            prop_assert!((s - cosine_similarity(&v, &u)).abs() < 1e-12);
            let cu: Vec<f64> = u.iter().map(|x| x * c).collect();
            prop_assert!((s - cosine_similarity(&cu, &v)).abs() < 1e-12);
        }
    }
}

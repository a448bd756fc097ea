//! Embeddings, the scope classifier, and forget-set retrieval.

mod classifier;
mod embedding;

pub use classifier::{classify_scope, fit_logistic, sigmoid, train_scope_classifier, ScopeClassifier, TrainParams};
pub use embedding::{build_embeddings, cosine_similarity, EmbeddingTable, MAX_DIM, WINDOW};

use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::text_model::Vocabulary;

/// Precomputed retrieval keys (`question ‖ answer`) for the forget set.
#[derive(Debug, Clone)]
pub struct ForgetIndex {
    records: Vec<Record>,
    keys: Vec<Vec<f64>>,
}

impl ForgetIndex {
    pub fn new(forget: &[Record], table: &EmbeddingTable, vocab: &Vocabulary) -> Self {
        let keys = forget
            .iter()
            .map(|r| table.embed_text(vocab, &format!("{} {}", r.question, r.answer)))
            .collect();
        ForgetIndex {
            records: forget.to_vec(),
            keys,
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// The forget record closest to `query_embedding`; equal similarities go
    /// to the lowest record id.
    pub fn most_similar(&self, query_embedding: &[f64]) -> Result<&Record> {
        let mut best: Option<(usize, f64)> = None;
        for (i, key) in self.keys.iter().enumerate() {
            let s = cosine_similarity(query_embedding, key);
            let better = match best {
                None => true,
                Some((j, b)) => s > b || (s == b && self.records[i].id < self.records[j].id),
            };
            if better {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| &self.records[i])
            .ok_or_else(|| Error::Precondition("retrieval over an empty forget set".into()))
    }
}

pub fn retrieve_most_similar<'a>(
    query: &str,
    forget: &'a [Record],
    table: &EmbeddingTable,
    vocab: &Vocabulary,
) -> Result<&'a Record> {
    let index = ForgetIndex::new(forget, table, vocab);
    let id = index.most_similar(&table.embed_text(vocab, query))?.id.clone();
    Ok(forget.iter().find(|r| r.id == id).expect("record comes from this set"))
}

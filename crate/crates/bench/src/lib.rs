//! Fixtures shared by the benchmarks under `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajectory_guard::corpus::{
    build_vocabulary, generate_synthetic_benchmark, split_forget_retain, CorpusManifest, Record,
};
use trajectory_guard::semantics::{
    build_embeddings, train_scope_classifier, EmbeddingTable, ForgetIndex, ScopeClassifier, TrainParams,
};
use trajectory_guard::suppression::{DEFAULT_REFUSAL, DEFAULT_SECURE_PREFIX};
use trajectory_guard::text_model::{train_ngram, NGramModel, TokenId, Vocabulary};

/// `n` random phrases of 1 to 4 tokens and a random stream of `len` tokens
/// over ids `7..7 + alphabet`.
pub fn random_patterns(n: usize, len: usize, alphabet: u32, seed: u64) -> (Vec<Vec<TokenId>>, Vec<TokenId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns = (0..n)
        .map(|_| {
            (0..rng.gen_range(1..=4))
                .map(|_| 7 + rng.gen_range(0..alphabet))
                .collect()
        })
        .collect();
    let stream = (0..len).map(|_| 7 + rng.gen_range(0..alphabet)).collect();
    (patterns, stream)
}

/// The default benchmark with every artifact trained.
pub struct Fixture {
    pub records: Vec<Record>,
    pub vocab: Vocabulary,
    pub model: NGramModel,
    pub table: EmbeddingTable,
    pub classifier: ScopeClassifier,
    pub index: ForgetIndex,
}

impl Fixture {
    pub fn new() -> Self {
        let records = generate_synthetic_benchmark(&CorpusManifest::default()).expect("default manifest is valid");
        let vocab = build_vocabulary(&records, [DEFAULT_SECURE_PREFIX, DEFAULT_REFUSAL]);
        let (forget, retain) = split_forget_retain(&records);
        let model = train_ngram(&records, &vocab, 8).expect("order 8 is valid");
        let table = build_embeddings(&records, &vocab, 7);
        let classifier = train_scope_classifier(&forget, &retain, &table, &vocab, &TrainParams::default())
            .expect("both splits present");
        let index = ForgetIndex::new(&forget, &table, &vocab);
        Fixture {
            records,
            vocab,
            model,
            table,
            classifier,
            index,
        }
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Self::new()
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajectory_guard::config::Ablation;
use trajectory_guard::corpus::{build_vocabulary, generate_synthetic_benchmark, split_forget_retain, CorpusManifest};
use trajectory_guard::lexicon::{naive_find_all, Automaton, ROOT};
use trajectory_guard::semantics::{build_embeddings, train_scope_classifier, ForgetIndex, TrainParams};
use trajectory_guard::suppression::{SuppressionConfig, DEFAULT_REFUSAL, DEFAULT_SECURE_PREFIX};
use trajectory_guard::text_model::{train_ngram, DecodingStrategy, ThinkMode, TokenId};
use trajectory_guard::trajectory::{Guard, VerdictKind};

#[test]
fn automaton_matches_naive_scan_on_a_large_stream() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let patterns: Vec<Vec<TokenId>> = (0..50)
        .map(|_| (0..rng.gen_range(1..=5)).map(|_| 7 + rng.gen_range(0..30)).collect())
        .collect();
    let stream: Vec<TokenId> = (0..10_000).map(|_| 7 + rng.gen_range(0..30)).collect();
    let automaton = Automaton::new(&patterns);
    let fast = automaton.find_all(&stream);
    assert_eq!(fast, naive_find_all(&patterns, &stream));
    assert!(!fast.is_empty());

    // streaming one token at a time reports the same end positions
    let mut state = ROOT;
    let mut ends = Vec::new();
    for (i, &t) in stream.iter().enumerate() {
        state = automaton.step(state, t);
        ends.extend(automaton.outputs(state).iter().map(|_| i));
    }
    let mut expected: Vec<usize> = fast.iter().map(|o| o.start + patterns[o.pattern].len() - 1).collect();
    expected.sort_unstable();
    ends.sort_unstable();
    assert_eq!(ends, expected);
}

#[test]
fn guard_regulates_forget_queries_and_passes_retain_queries() {
    let manifest = CorpusManifest::default();
    let records = generate_synthetic_benchmark(&manifest).unwrap();
    let vocab = build_vocabulary(&records, [DEFAULT_SECURE_PREFIX, DEFAULT_REFUSAL]);
    let (forget, retain) = split_forget_retain(&records);
    let model = train_ngram(&records, &vocab, 8).unwrap();
    let table = build_embeddings(&records, &vocab, manifest.seed);
    let classifier = train_scope_classifier(&forget, &retain, &table, &vocab, &TrainParams::default()).unwrap();
    let index = ForgetIndex::new(&forget, &table, &vocab);
    let guard = Guard::new(&model, &vocab, &table, &classifier, &index).unwrap();
    let config = Ablation::Full.apply(&SuppressionConfig::default());

    for r in &records {
        for mode in ThinkMode::ALL {
            let s = DecodingStrategy::greedy(mode);
            let reg = guard.regulate(&r.question, &s, &config).unwrap();
            assert_eq!(reg.suppressed, r.is_forget(), "{}", r.id);
            if r.is_forget() {
                let fragments: Vec<Vec<TokenId>> = r.sensitive_fragments.iter().map(|f| vocab.tokenize(f)).collect();
                assert!(
                    naive_find_all(&fragments, &reg.trajectory.tokens).is_empty(),
                    "{}",
                    r.id
                );
                assert!(!matches!(reg.verdict.kind, VerdictKind::Escalate { .. }));
            } else {
                assert_eq!(reg.trajectory, guard.generate_plain(&r.question, &s));
            }
        }
    }
}

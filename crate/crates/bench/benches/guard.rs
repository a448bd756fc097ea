use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use trajectory_guard::config::Ablation;
use trajectory_guard::lexicon::{naive_find_all, Automaton};
use trajectory_guard::suppression::{adjust_logits, SuppressionConfig};
use trajectory_guard::text_model::{DecodingStrategy, ThinkMode, TokenModel};
use trajectory_guard::trajectory::Guard;
use trajectory_guard_bench::{random_patterns, Fixture};

fn scan(c: &mut Criterion) {
    let (patterns, stream) = random_patterns(50, 10_000, 40, 1);
    let automaton = Automaton::new(&patterns);
    let mut g = c.benchmark_group("scan_50_phrases_10k_tokens");
    g.bench_function("automaton", |b| b.iter(|| automaton.find_all(black_box(&stream))));
    g.bench_function("naive", |b| b.iter(|| naive_find_all(&patterns, black_box(&stream))));
    g.finish();
}

fn logits(c: &mut Criterion) {
    let f = Fixture::new();
    let guard = Guard::new(&f.model, &f.vocab, &f.table, &f.classifier, &f.index).unwrap();
    let record = f.records.iter().find(|r| r.is_forget()).unwrap();
    let base = SuppressionConfig::default();
    let lexicon = guard.build_lexicon(&base, record).unwrap();
    let suffix = f.vocab.tokenize(&record.cot);
    let raw = f.model.next_logits(&suffix);
    let mut g = c.benchmark_group("adjust_logits");
    for preset in [Ablation::Full, Ablation::HardOnly, Ablation::SoftOnly] {
        let config = preset.apply(&base);
        g.bench_function(preset.name(), |b| {
            b.iter(|| adjust_logits(&config, &lexicon, &f.table, black_box(&suffix), black_box(&raw)))
        });
    }
    g.finish();
}

fn regulate(c: &mut Criterion) {
    let f = Fixture::new();
    let guard = Guard::new(&f.model, &f.vocab, &f.table, &f.classifier, &f.index).unwrap();
    let forget = f.records.iter().find(|r| r.is_forget()).unwrap();
    let retain = f.records.iter().find(|r| !r.is_forget()).unwrap();
    let config = Ablation::Full.apply(&SuppressionConfig::default());
    let mut g = c.benchmark_group("regulate");
    for mode in ThinkMode::ALL {
        let s = DecodingStrategy::greedy(mode);
        for (split, r) in [("forget", forget), ("retain", retain)] {
            g.bench_with_input(BenchmarkId::new(mode.name(), split), &r.question, |b, q| {
                b.iter(|| guard.regulate(q, &s, &config).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, scan, logits, regulate);
criterion_main!(benches);

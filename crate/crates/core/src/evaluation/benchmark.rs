//! The benchmark loop over queries, decoding strategies, and one preset.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{leakage, mcs, paraphrase_leakage, LeakageMeasure, Level};
use super::mia::mia_eval;
use crate::config::{strategy_name, Ablation};
use crate::corpus::{Record, Split};
use crate::error::Result;
use crate::lexicon::naive_find_all;
use crate::suppression::SuppressionConfig;
use crate::text_model::{DecodingStrategy, TokenId, Trajectory};
use crate::trajectory::{Guard, VerdictKind};

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub ablation: Ablation,
    /// Base settings; the ablation preset decides the mechanism flags.
    pub suppression: SuppressionConfig,
    pub strategies: Vec<DecodingStrategy>,
    pub paraphrased: bool,
    pub protocol: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyOutcome {
    pub strategy: String,
    pub verdict: String,
    pub rounds: usize,
    pub suppressed: bool,
    pub answer_rouge: f64,
    pub answer_cosine: f64,
    pub cot_rouge: f64,
    pub cot_cosine: f64,
    pub paraphrase_leakage: f64,
    /// Share of the record's sensitive fragments that occur verbatim.
    pub verbatim_leakage: f64,
    /// Occurrences of the record's sensitive fragments.
    pub fragment_leaks: usize,
    /// Occurrences of the per-query lexicon's phrases.
    pub lexicon_leaks: usize,
    pub lexicon_size: usize,
    pub output: String,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryReport {
    pub record_id: String,
    pub split: Split,
    pub query: String,
    pub outcomes: Vec<StrategyOutcome>,
    /// Means over strategies.
    pub answer_leakage: f64,
    pub cot_leakage: f64,
    pub paraphrase_leakage: f64,
    pub verbatim_leakage: f64,
    /// Mean of the verbatim and paraphrase leakages.
    pub combined_leakage: f64,
    /// One minus the worst answer-level leakage over strategies.
    pub mcs: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Aggregates {
    pub queries: usize,
    /// Mean retain answer fidelity.
    pub mu: f64,
    /// One minus mean forget answer leakage.
    pub afe: f64,
    /// One minus mean forget reasoning leakage.
    pub cfe: f64,
    /// Mean MCS over forget queries.
    pub mcs: f64,
    pub paraphrase_leakage: f64,
    pub verbatim_leakage: f64,
    pub combined_leakage: f64,
    pub mia_a: f64,
    pub mia_c: f64,
    pub fragment_leaks: usize,
    pub lexicon_leaks: usize,
    /// Sum over forget queries of the largest per-query lexicon.
    pub lexicon_phrases: usize,
    pub refusals: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub ablation: Ablation,
    pub flags: Flags,
    pub protocol: String,
    pub seed: u64,
    pub strategies: Vec<String>,
    pub paraphrased: bool,
    pub queries: Vec<QueryReport>,
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub struct Flags {
    pub hard: bool,
    pub soft: bool,
    pub secure_prefix: bool,
    pub phrase_extraction: bool,
    pub controller: bool,
}

impl Flags {
    pub fn of(c: &SuppressionConfig) -> Self {
        Flags {
            hard: c.hard_enabled,
            soft: c.soft_enabled,
            secure_prefix: c.secure_prefix_enabled,
            phrase_extraction: c.phrase_extraction,
            controller: c.controller_enabled,
        }
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn outcome(
    guard: &Guard<'_>,
    record: &Record,
    query: &str,
    strategy: &DecodingStrategy,
    config: &SuppressionConfig,
) -> Result<StrategyOutcome> {
    let out = guard.regulate(query, strategy, config)?;
    let y = &out.trajectory;
    let (vocab, table) = (guard.vocab, guard.table);
    let fragments: Vec<Vec<TokenId>> = record.sensitive_fragments.iter().map(|f| vocab.tokenize(f)).collect();
    let frag_hits = naive_find_all(&fragments, &y.tokens);
    let leaked = (0..fragments.len())
        .filter(|&k| frag_hits.iter().any(|o| o.pattern == k))
        .count();
    let phrases: Vec<Vec<TokenId>> = out.lexicon.phrases().iter().map(|p| p.tokens.clone()).collect();
    Ok(StrategyOutcome {
        strategy: strategy_name(strategy),
        verdict: out.verdict.kind.name().to_owned(),
        rounds: out.audit.len(),
        suppressed: out.suppressed,
        answer_rouge: leakage(LeakageMeasure::RougeL, y, record, Level::Answer, vocab, table),
        answer_cosine: leakage(LeakageMeasure::CosineSim, y, record, Level::Answer, vocab, table),
        cot_rouge: leakage(LeakageMeasure::RougeL, y, record, Level::Cot, vocab, table),
        cot_cosine: leakage(LeakageMeasure::CosineSim, y, record, Level::Cot, vocab, table),
        paraphrase_leakage: paraphrase_leakage(y, record, vocab),
        verbatim_leakage: if fragments.is_empty() {
            0.0
        } else {
            leaked as f64 / fragments.len() as f64
        },
        fragment_leaks: frag_hits.len(),
        lexicon_leaks: naive_find_all(&phrases, &y.tokens).len(),
        lexicon_size: out.lexicon.len(),
        output: vocab.detokenize(&y.tokens),
        trajectory: out.trajectory,
    })
}

fn summarize(record: &Record, query: &str, outcomes: Vec<StrategyOutcome>) -> Result<QueryReport> {
    let per = |f: fn(&StrategyOutcome) -> f64| mean(outcomes.iter().map(f));
    let answer_leakage = per(|o| o.answer_rouge);
    let paraphrase = per(|o| o.paraphrase_leakage);
    let verbatim = per(|o| o.verbatim_leakage);
    Ok(QueryReport {
        record_id: record.id.clone(),
        split: record.split,
        query: query.to_owned(),
        mcs: mcs(&outcomes.iter().map(|o| o.answer_rouge).collect::<Vec<_>>())?,
        answer_leakage,
        cot_leakage: per(|o| o.cot_rouge),
        paraphrase_leakage: paraphrase,
        verbatim_leakage: verbatim,
        combined_leakage: (paraphrase + verbatim) / 2.0,
        outcomes,
    })
}

/// Regulates every query of `records` under every strategy of `spec` and
/// scores the outputs. Queries are the original questions, or every
/// paraphrase when `spec.paraphrased` is set. Membership attacks use each
/// record's first query under the first strategy.
pub fn run_benchmark(guard: &Guard<'_>, records: &[Record], spec: &BenchmarkSpec) -> Result<EvaluationReport> {
    let config = spec.ablation.apply(&spec.suppression);
    config.validate()?;
    let queries: Vec<(usize, &str)> = records
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            let qs: Vec<&str> = if spec.paraphrased {
                r.paraphrases.iter().map(String::as_str).collect()
            } else {
                vec![r.question.as_str()]
            };
            qs.into_iter().map(move |q| (i, q))
        })
        .collect();
    let jobs: Vec<(usize, &str, &DecodingStrategy)> = queries
        .iter()
        .flat_map(|&(i, q)| spec.strategies.iter().map(move |s| (i, q, s)))
        .collect();
    let outcomes: Vec<StrategyOutcome> = jobs
        .par_iter()
        .map(|&(i, q, s)| outcome(guard, &records[i], q, s, &config))
        .collect::<Result<_>>()?;

    let per_query = spec.strategies.len();
    let mut reports = Vec::with_capacity(queries.len());
    let mut chunks = outcomes.into_iter();
    for &(i, q) in &queries {
        let chunk: Vec<StrategyOutcome> = chunks.by_ref().take(per_query).collect();
        reports.push(summarize(&records[i], q, chunk)?);
    }

    let mut first_output: Vec<Option<Trajectory>> = vec![None; records.len()];
    for (&(i, _), r) in queries.iter().zip(&reports) {
        if first_output[i].is_none() {
            first_output[i] = r.outcomes.first().map(|o| o.trajectory.clone());
        }
    }
    let (mia_records, mia_outputs): (Vec<Record>, Vec<Trajectory>) = records
        .iter()
        .zip(first_output)
        .filter_map(|(r, o)| o.map(|o| (r.clone(), o)))
        .unzip();
    let mia = |level| {
        mia_eval(
            level,
            &mia_outputs,
            &mia_records,
            guard.vocab,
            guard.table,
            guard.model,
            spec.seed,
        )
    };

    let forget: Vec<&QueryReport> = reports.iter().filter(|r| r.split == Split::Forget).collect();
    let retain: Vec<&QueryReport> = reports.iter().filter(|r| r.split == Split::Retain).collect();
    let all_outcomes = || reports.iter().flat_map(|r| &r.outcomes);
    let aggregates = Aggregates {
        queries: reports.len(),
        mu: mean(retain.iter().map(|r| r.answer_leakage)),
        afe: 1.0 - mean(forget.iter().map(|r| r.answer_leakage)),
        cfe: 1.0 - mean(forget.iter().map(|r| r.cot_leakage)),
        mcs: mean(forget.iter().map(|r| r.mcs)),
        paraphrase_leakage: mean(forget.iter().map(|r| r.paraphrase_leakage)),
        verbatim_leakage: mean(forget.iter().map(|r| r.verbatim_leakage)),
        combined_leakage: mean(forget.iter().map(|r| r.combined_leakage)),
        mia_a: mia(Level::Answer)?,
        mia_c: mia(Level::Cot)?,
        fragment_leaks: forget.iter().flat_map(|r| &r.outcomes).map(|o| o.fragment_leaks).sum(),
        lexicon_leaks: all_outcomes().map(|o| o.lexicon_leaks).sum(),
        lexicon_phrases: forget
            .iter()
            .map(|r| r.outcomes.iter().map(|o| o.lexicon_size).max().unwrap_or(0))
            .sum(),
        refusals: all_outcomes()
            .filter(|o| o.verdict == VerdictKind::Refuse.name())
            .count(),
    };
    Ok(EvaluationReport {
        ablation: spec.ablation,
        flags: Flags::of(&config),
        protocol: spec.protocol.clone(),
        seed: spec.seed,
        strategies: spec.strategies.iter().map(strategy_name).collect(),
        paraphrased: spec.paraphrased,
        queries: reports,
        aggregates,
    })
}

impl EvaluationReport {
    /// Any sensitive fragment or lexicon phrase in a regulated output.
    pub fn leak_detected(&self) -> bool {
        self.aggregates.fragment_leaks + self.aggregates.lexicon_leaks > 0
    }

    /// Sectioned `key = value` text.
    pub fn to_text(&self) -> String {
        let a = &self.aggregates;
        let f = &self.flags;
        let mut out = String::new();
        let _ = writeln!(out, "[run]");
        let _ = writeln!(out, "ablation = {}", self.ablation);
        let _ = writeln!(out, "protocol = {}", self.protocol);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "strategies = {}", self.strategies.join(", "));
        let _ = writeln!(out, "paraphrased = {}", self.paraphrased);
        let _ = writeln!(out, "\n[flags]");
        let _ = writeln!(out, "hard = {}", f.hard);
        let _ = writeln!(out, "soft = {}", f.soft);
        let _ = writeln!(out, "secure_prefix = {}", f.secure_prefix);
        let _ = writeln!(out, "phrase_extraction = {}", f.phrase_extraction);
        let _ = writeln!(out, "controller = {}", f.controller);
        let _ = writeln!(out, "\n[utility_and_forgetting]");
        let _ = writeln!(out, "mu = {:.6}", a.mu);
        let _ = writeln!(out, "afe = {:.6}", a.afe);
        let _ = writeln!(out, "cfe = {:.6}", a.cfe);
        let _ = writeln!(out, "mcs = {:.6}", a.mcs);
        let _ = writeln!(out, "\n[privacy]");
        let _ = writeln!(out, "mia_a = {:.6}", a.mia_a);
        let _ = writeln!(out, "mia_c = {:.6}", a.mia_c);
        let _ = writeln!(out, "\n[leakage]");
        let _ = writeln!(out, "paraphrase = {:.6}", a.paraphrase_leakage);
        let _ = writeln!(out, "verbatim = {:.6}", a.verbatim_leakage);
        let _ = writeln!(out, "combined = {:.6}", a.combined_leakage);
        let _ = writeln!(out, "fragment_leaks = {}", a.fragment_leaks);
        let _ = writeln!(out, "lexicon_leaks = {}", a.lexicon_leaks);
        let _ = writeln!(out, "lexicon_phrases = {}", a.lexicon_phrases);
        let _ = writeln!(out, "refusals = {}", a.refusals);
        let _ = writeln!(out, "queries = {}", a.queries);
        out
    }

    /// One JSON object per query, then one for the aggregates.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for q in &self.queries {
            let _ = writeln!(out, "{}", serde_json::to_string(q).expect("reports serialize"));
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            ablation: Ablation,
            flags: Flags,
            protocol: &'a str,
            seed: u64,
            strategies: &'a [String],
            paraphrased: bool,
            aggregates: &'a Aggregates,
        }
        let summary = Summary {
            ablation: self.ablation,
            flags: self.flags,
            protocol: &self.protocol,
            seed: self.seed,
            strategies: &self.strategies,
            paraphrased: self.paraphrased,
            aggregates: &self.aggregates,
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&summary).expect("reports serialize"));
        out
    }
}

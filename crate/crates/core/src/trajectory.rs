//! Candidate scoring, the accept/escalate/refuse decision, and the bounded
//! escalation loop around suppressed decoding.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::lexicon::{extract_record_phrases, ForbiddenLexicon, ForbiddenPhrase, Origin};
use crate::semantics::{cosine_similarity, EmbeddingTable, ForgetIndex, ScopeClassifier};
use crate::suppression::{apply_secure_prefix, make_step_filter, phrase_similarities, SuppressionConfig};
use crate::text_model::{
    generate, is_special, token_log_probs, DecodingStrategy, Sampler, TokenId, TokenModel, Trajectory, Vocabulary, EOS,
    REFUSAL_MARK, THINK_CLOSE, THINK_OPEN,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VerdictKind {
    Accept,
    Escalate { phrases: Vec<String> },
    Refuse,
}

impl VerdictKind {
    pub fn name(&self) -> &'static str {
        match self {
            VerdictKind::Accept => "accept",
            VerdictKind::Escalate { .. } => "escalate",
            VerdictKind::Refuse => "refuse",
        }
    }
}

/// Bare decision of the controller, before any escalation phrases are found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Escalate,
    Refuse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub sensitivity: f64,
    pub fluency: f64,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub round: usize,
    pub sensitivity: f64,
    pub fluency: f64,
    pub verdict: String,
    pub escalated: Vec<String>,
    pub lexicon_size: usize,
}

/// Outcome of one regulated query.
#[derive(Debug, Clone)]
pub struct Regulated {
    pub trajectory: Trajectory,
    pub verdict: Verdict,
    pub audit: Vec<AuditEntry>,
    pub scope_probability: f64,
    /// False when the scope gate passed the query through untouched.
    pub suppressed: bool,
    /// The per-query lexicon as it stood for the returned trajectory.
    pub lexicon: ForbiddenLexicon,
}

impl Regulated {
    /// One JSON object per audit entry.
    pub fn audit_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.audit {
            let _ = writeln!(out, "{}", serde_json::to_string(e).expect("audit entries serialize"));
        }
        out
    }
}

/// The immutable components a query is regulated against.
#[derive(Clone, Copy)]
pub struct Guard<'a> {
    pub model: &'a dyn TokenModel,
    pub vocab: &'a Vocabulary,
    pub table: &'a EmbeddingTable,
    pub classifier: &'a ScopeClassifier,
    pub index: &'a ForgetIndex,
}

impl<'a> Guard<'a> {
    pub fn new(
        model: &'a dyn TokenModel,
        vocab: &'a Vocabulary,
        table: &'a EmbeddingTable,
        classifier: &'a ScopeClassifier,
        index: &'a ForgetIndex,
    ) -> Result<Self> {
        let v = vocab.len();
        if model.vocab_size() != v {
            return Err(Error::Config(format!(
                "model covers {} tokens but the vocabulary has {v}",
                model.vocab_size()
            )));
        }
        if table.vocab_size() != v {
            return Err(Error::Config(format!(
                "embedding table covers {} tokens but the vocabulary has {v}",
                table.vocab_size()
            )));
        }
        if classifier.weights.len() != table.dim() {
            return Err(Error::Config(format!(
                "classifier expects {}-dimensional inputs, embeddings have {}",
                classifier.weights.len(),
                table.dim()
            )));
        }
        Ok(Guard {
            model,
            vocab,
            table,
            classifier,
            index,
        })
    }

    /// Unsuppressed generation for `query`.
    pub fn generate_plain(&self, query: &str, strategy: &DecodingStrategy) -> Trajectory {
        generate(self.model, &self.vocab.tokenize(query), strategy, None)
    }

    /// The lexicon built from a retrieved record: extracted phrases, or the
    /// whole answer as one phrase when extraction is off.
    pub fn build_lexicon(&self, config: &SuppressionConfig, record: &Record) -> Result<ForbiddenLexicon> {
        if config.phrase_extraction {
            ForbiddenLexicon::from_surfaces(
                &extract_record_phrases(record),
                self.vocab,
                self.table,
                Origin::Extracted,
            )
        } else {
            ForbiddenLexicon::from_surfaces(&[record.answer.as_str()], self.vocab, self.table, Origin::Extracted)
        }
    }

    pub fn refusal_trajectory(
        &self,
        config: &SuppressionConfig,
        prompt: Vec<TokenId>,
        strategy: &DecodingStrategy,
    ) -> Trajectory {
        let mut tokens = vec![THINK_OPEN, THINK_CLOSE, REFUSAL_MARK];
        tokens.extend(self.vocab.tokenize(&config.refusal_template));
        tokens.push(EOS);
        Trajectory {
            prompt,
            tokens,
            truncated: false,
            strategy: *strategy,
        }
    }

    pub fn regulate(&self, query: &str, strategy: &DecodingStrategy, config: &SuppressionConfig) -> Result<Regulated> {
        config.validate()?;
        let query_ids = self.vocab.tokenize(query);
        let p_f = if config.controller_enabled {
            self.classifier.probability(&self.table.embed_ids(&query_ids))
        } else {
            0.0
        };
        if p_f <= config.tau {
            let trajectory = generate(self.model, &query_ids, strategy, None);
            let empty = ForbiddenLexicon::default();
            let sensitivity = sensitivity_score(self.classifier, self.table, &empty, &trajectory);
            let fluency = fluency_score(self.model, &trajectory).unwrap_or(0.0);
            return Ok(Regulated {
                trajectory,
                verdict: Verdict {
                    kind: VerdictKind::Accept,
                    sensitivity,
                    fluency,
                    round: 0,
                },
                audit: Vec::new(),
                scope_probability: p_f,
                suppressed: false,
                lexicon: empty,
            });
        }

        let record = self.index.most_similar(&self.table.embed_ids(&query_ids))?;
        let mut lexicon = self.build_lexicon(config, record)?;
        let refusal = self.refusal_trajectory(config, Vec::new(), strategy);
        if !lexicon.find_all(&refusal.tokens).is_empty() {
            return Err(Error::Config("refusal template contains a forbidden phrase".into()));
        }
        let answer_ids = self.vocab.tokenize(&record.answer);
        let prompt = apply_secure_prefix(config, self.vocab, &query_ids);
        let seeds = candidate_strategies(strategy, config.n_candidates);

        let mut audit = Vec::new();
        let mut round = 0;
        loop {
            let mut best: Option<(Trajectory, f64, f64)> = None;
            for s in &seeds {
                let mut filter = make_step_filter(config, &lexicon, self.table);
                let y = generate(self.model, &prompt, s, Some(&mut filter));
                let sens = sensitivity_score(self.classifier, self.table, &lexicon, &y);
                let flu = fluency_score(self.model, &y)?;
                let better = match &best {
                    None => true,
                    Some((_, bs, bf)) => {
                        let admissible = |s: f64, f: f64| s < config.tau && f >= config.eta;
                        (admissible(sens, flu), -sens, flu) > (admissible(*bs, *bf), -bs, *bf)
                    }
                };
                if better {
                    best = Some((y, sens, flu));
                }
            }
            let (y, sens, flu) = best.expect("at least one candidate");
            let mut entry = AuditEntry {
                round,
                sensitivity: sens,
                fluency: flu,
                verdict: String::new(),
                escalated: Vec::new(),
                lexicon_size: lexicon.len(),
            };
            let refuse = |entry: AuditEntry, audit: &mut Vec<AuditEntry>, lexicon: ForbiddenLexicon| {
                audit.push(AuditEntry {
                    verdict: "refuse".into(),
                    ..entry
                });
                Ok(Regulated {
                    trajectory: self.refusal_trajectory(config, prompt.clone(), strategy),
                    verdict: Verdict {
                        kind: VerdictKind::Refuse,
                        sensitivity: sens,
                        fluency: flu,
                        round,
                    },
                    audit: std::mem::take(audit),
                    scope_probability: p_f,
                    suppressed: true,
                    lexicon,
                })
            };
            match control_decision(config, sens, flu, round) {
                Decision::Accept => {
                    audit.push(AuditEntry {
                        verdict: "accept".into(),
                        ..entry
                    });
                    return Ok(Regulated {
                        trajectory: y,
                        verdict: Verdict {
                            kind: VerdictKind::Accept,
                            sensitivity: sens,
                            fluency: flu,
                            round,
                        },
                        audit,
                        scope_probability: p_f,
                        suppressed: true,
                        lexicon,
                    });
                }
                Decision::Refuse => return refuse(entry, &mut audit, lexicon),
                Decision::Escalate => {
                    let spans = leak_spans(config, &lexicon, self.table, &answer_ids, &y.tokens);
                    if spans.is_empty() {
                        return refuse(entry, &mut audit, lexicon);
                    }
                    for span in spans {
                        let phrase = ForbiddenPhrase::from_tokens(span, self.vocab, self.table, Origin::Escalated);
                        entry.escalated.push(phrase.surface.clone());
                        lexicon = lexicon.add_phrase(phrase)?;
                    }
                    entry.verdict = "escalate".into();
                    audit.push(entry);
                    round += 1;
                }
            }
        }
    }
}

/// The strategies candidates are drawn with: the given one under greedy
/// decoding, `n` consecutive seeds under top-k sampling.
pub fn candidate_strategies(strategy: &DecodingStrategy, n: usize) -> Vec<DecodingStrategy> {
    match strategy.sampler {
        Sampler::Greedy => vec![*strategy],
        Sampler::TopK { k, seed } => (0..n.max(1) as u64)
            .map(|i| {
                (*strategy).with_sampler(Sampler::TopK {
                    k,
                    seed: seed.wrapping_add(i),
                })
            })
            .collect(),
    }
}

/// `max(C(y), max_k cos(Embed(y), f_k))`, the similarity clamped to [0, 1].
/// Both terms read the generated tokens only.
pub fn sensitivity_score(
    classifier: &ScopeClassifier,
    table: &EmbeddingTable,
    lexicon: &ForbiddenLexicon,
    y: &Trajectory,
) -> f64 {
    let emb = table.embed_ids(&y.tokens);
    let c = classifier.probability(&emb);
    let sim = lexicon
        .phrases()
        .iter()
        .map(|p| cosine_similarity(&emb, &p.embedding).clamp(0.0, 1.0))
        .fold(0.0, f64::max);
    c.max(sim)
}

/// Mean natural-log probability per generated token, conditioned on the
/// prompt, under the unsuppressed model.
pub fn fluency_score<M: TokenModel + ?Sized>(model: &M, y: &Trajectory) -> Result<f64> {
    if y.tokens.is_empty() {
        return Err(Error::Scoring("fluency of an empty trajectory".into()));
    }
    let lp = token_log_probs(model, &y.prompt, &y.tokens);
    Ok(lp.iter().sum::<f64>() / lp.len() as f64)
}

pub fn control_decision(config: &SuppressionConfig, sensitivity: f64, fluency: f64, round: usize) -> Decision {
    if sensitivity >= config.tau {
        if round < config.max_rounds {
            Decision::Escalate
        } else {
            Decision::Refuse
        }
    } else if fluency < config.eta {
        Decision::Refuse
    } else {
        Decision::Accept
    }
}

/// Spans of a flagged output to add to the lexicon: maximal runs of tokens
/// whose phrase similarity reaches δ, then maximal verbatim runs of at least
/// two tokens shared with the retrieved answer. Reserved tokens break runs;
/// spans already in the lexicon are dropped.
pub fn leak_spans(
    config: &SuppressionConfig,
    lexicon: &ForbiddenLexicon,
    table: &EmbeddingTable,
    answer: &[TokenId],
    output: &[TokenId],
) -> Vec<Vec<TokenId>> {
    let sims = phrase_similarities(lexicon, table);
    let mut spans: Vec<Vec<TokenId>> = Vec::new();
    let mut push = |span: &[TokenId]| {
        if !span.is_empty() && !lexicon.contains(span) && !spans.iter().any(|s| s == span) {
            spans.push(span.to_vec());
        }
    };

    let mut start = None;
    for (i, &t) in output.iter().chain(std::iter::once(&EOS)).enumerate() {
        let hot = !is_special(t) && sims.get(t as usize).is_some_and(|&m| m >= config.delta);
        match (hot, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                push(&output[s..i]);
                start = None;
            }
            _ => {}
        }
    }

    let mut i = 0;
    while i < output.len() {
        let mut len = 0;
        while i + len < output.len() && !is_special(output[i + len]) && contains_run(answer, &output[i..=i + len]) {
            len += 1;
        }
        if len >= 2 {
            push(&output[i..i + len]);
            i += len;
        } else {
            i += 1;
        }
    }
    spans
}

fn contains_run(haystack: &[TokenId], needle: &[TokenId]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// A token model that walks a fixed target sequence after the last think
/// opener and ranks every other target token just below the scripted one,
/// so blocking a token only moves it to further sensitive content.
#[derive(Debug, Clone)]
pub struct ScriptedModel {
    target: Vec<TokenId>,
    vocab_size: usize,
}

impl ScriptedModel {
    /// `target` is the output to reproduce, starting after THINK_OPEN.
    pub fn new(target: Vec<TokenId>, vocab_size: usize) -> Self {
        ScriptedModel { target, vocab_size }
    }

    /// A model whose greedy output is `record`'s reasoning and answer.
    pub fn reproducing(record: &Record, vocab: &Vocabulary) -> Self {
        let mut target = vocab.tokenize(&record.cot);
        target.push(THINK_CLOSE);
        target.extend(vocab.tokenize(&record.answer));
        target.push(EOS);
        Self::new(target, vocab.len())
    }
}

impl TokenModel for ScriptedModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logits(&self, context: &[TokenId]) -> Vec<f64> {
        let mut logits = vec![0.0; self.vocab_size];
        for &t in &self.target {
            logits[t as usize] = 4.0;
        }
        let generated = match context.iter().rposition(|&t| t == THINK_OPEN) {
            Some(p) => context.len() - p - 1,
            None => 0,
        };
        if let Some(&t) = self.target.get(generated) {
            logits[t as usize] = 8.0;
        }
        logits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, generate_synthetic_benchmark, split_forget_retain, CorpusManifest};
    use crate::semantics::{build_embeddings, train_scope_classifier, TrainParams};
    use crate::suppression::{DEFAULT_REFUSAL, DEFAULT_SECURE_PREFIX};
    use crate::text_model::{train_ngram, NGramModel, ThinkMode};
    use proptest::prelude::*;

    struct World {
        records: Vec<Record>,
        vocab: Vocabulary,
        model: NGramModel,
        table: EmbeddingTable,
        clf: ScopeClassifier,
        index: ForgetIndex,
    }

    fn world() -> World {
        let records = generate_synthetic_benchmark(&CorpusManifest::default()).unwrap();
        let vocab = build_vocabulary(&records, [DEFAULT_SECURE_PREFIX, DEFAULT_REFUSAL]);
        let model = train_ngram(&records, &vocab, 8).unwrap();
        let table = build_embeddings(&records, &vocab, 7);
        let (forget, retain) = split_forget_retain(&records);
        let clf = train_scope_classifier(&forget, &retain, &table, &vocab, &TrainParams::default()).unwrap();
        let index = ForgetIndex::new(&forget, &table, &vocab);
        World {
            records,
            vocab,
            model,
            table,
            clf,
            index,
        }
    }

    impl World {
        fn guard(&self) -> Guard<'_> {
            Guard::new(&self.model, &self.vocab, &self.table, &self.clf, &self.index).unwrap()
        }
    }

    #[test]
    fn decision_table() {
        let c = SuppressionConfig::default();
        assert_eq!(control_decision(&c, 0.9, -3.0, 0), Decision::Escalate);
        assert_eq!(control_decision(&c, 0.9, -3.0, c.max_rounds), Decision::Refuse);
        assert_eq!(control_decision(&c, 0.2, -12.0, 0), Decision::Refuse);
        assert_eq!(control_decision(&c, 0.2, -3.0, 0), Decision::Accept);
        assert_eq!(control_decision(&c, 0.5, -3.0, 0), Decision::Escalate);
    }

    struct Uniform(usize);

    impl TokenModel for Uniform {
        fn vocab_size(&self) -> usize {
            self.0
        }
        fn next_logits(&self, _: &[TokenId]) -> Vec<f64> {
            vec![0.0; self.0]
        }
    }

    fn traj(tokens: Vec<TokenId>) -> Trajectory {
        Trajectory {
            prompt: vec![9],
            tokens,
            truncated: false,
            strategy: DecodingStrategy::greedy(ThinkMode::DefaultThink),
        }
    }

    #[test]
    fn fluency_of_uniform_model_is_log_inverse_vocab() {
        let f = fluency_score(&Uniform(100), &traj(vec![10, 11, 12])).unwrap();
        assert!((f - (1.0f64 / 100.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn fluency_of_certain_transitions_is_zero() {
        let m = ScriptedModel::new(vec![10, 11], 12);
        let mut big = m.clone();
        big.target = vec![10, 11];
        struct Sharp(ScriptedModel);
        impl TokenModel for Sharp {
            fn vocab_size(&self) -> usize {
                self.0.vocab_size
            }
            fn next_logits(&self, c: &[TokenId]) -> Vec<f64> {
                self.0
                    .next_logits(c)
                    .into_iter()
                    .map(|l| if l == 8.0 { 0.0 } else { f64::MIN })
                    .collect()
            }
        }
        let y = Trajectory {
            prompt: vec![THINK_OPEN],
            ..traj(vec![10, 11])
        };
        assert_eq!(fluency_score(&Sharp(big), &y).unwrap(), 0.0);
    }

    #[test]
    fn fluency_rejects_empty_and_is_deterministic() {
        assert!(fluency_score(&Uniform(10), &traj(vec![])).is_err());
        let y = traj(vec![3, 4, 5]);
        assert_eq!(
            fluency_score(&Uniform(10), &y).unwrap(),
            fluency_score(&Uniform(10), &y).unwrap()
        );
    }

    #[test]
    fn sensitivity_is_the_larger_term() {
        let table = EmbeddingTable::from_rows(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.6, 0.8]]).unwrap();
        let vocab = Vocabulary::new();
        // classifier constant at sigmoid(ln(3/7)) = 0.3
        let clf = ScopeClassifier {
            weights: vec![0.0, 0.0],
            bias: (0.3f64 / 0.7).ln(),
            trained_on: String::new(),
        };
        let lex = ForbiddenLexicon::compile(vec![ForbiddenPhrase::from_tokens(
            vec![2],
            &vocab,
            &table,
            Origin::Extracted,
        )])
        .unwrap();
        let y = traj(vec![1]);
        assert!((sensitivity_score(&clf, &table, &lex, &y) - 0.6).abs() < 1e-12);
        assert!((sensitivity_score(&clf, &table, &ForbiddenLexicon::default(), &y) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn retain_queries_pass_through_bit_identically() {
        let w = world();
        let g = w.guard();
        let c = SuppressionConfig::default();
        for r in w.records.iter().filter(|r| !r.is_forget()) {
            for mode in ThinkMode::ALL {
                let s = DecodingStrategy::greedy(mode);
                let out = g.regulate(&r.question, &s, &c).unwrap();
                assert!(!out.suppressed, "{}", r.question);
                assert_eq!(out.trajectory, g.generate_plain(&r.question, &s));
            }
        }
    }

    #[test]
    fn forget_queries_do_not_leak_or_loop() {
        let w = world();
        let g = w.guard();
        let c = SuppressionConfig::default();
        for r in w.records.iter().filter(|r| r.is_forget()) {
            for q in std::iter::once(&r.question).chain(&r.paraphrases) {
                for mode in ThinkMode::ALL {
                    let out = g.regulate(q, &DecodingStrategy::greedy(mode), &c).unwrap();
                    assert!(out.suppressed);
                    assert!(out.audit.len() <= c.max_rounds + 1);
                    let naive = crate::lexicon::naive_find_all(
                        &out.lexicon
                            .phrases()
                            .iter()
                            .map(|p| p.tokens.clone())
                            .collect::<Vec<_>>(),
                        &out.trajectory.tokens,
                    );
                    assert!(naive.is_empty(), "{}", w.vocab.detokenize(&out.trajectory.tokens));
                    if out.verdict.kind == VerdictKind::Accept {
                        let s = sensitivity_score(&w.clf, &w.table, &out.lexicon, &out.trajectory);
                        let f = fluency_score(&w.model, &out.trajectory).unwrap();
                        assert_eq!((s, f), (out.verdict.sensitivity, out.verdict.fluency));
                        assert!(s < c.tau && f >= c.eta);
                    }
                }
            }
        }
    }

    #[test]
    fn scripted_model_escalates_then_stops_clean() {
        let w = world();
        let (forget, _) = split_forget_retain(&w.records);
        let target = &forget[0];
        let scripted = ScriptedModel::reproducing(target, &w.vocab);
        let plain = generate(
            &scripted,
            &w.vocab.tokenize(&target.question),
            &DecodingStrategy::greedy(ThinkMode::DefaultThink),
            None,
        );
        assert_eq!(plain.answer_segment(), &w.vocab.tokenize(&target.answer)[..]);

        let g = Guard::new(&scripted, &w.vocab, &w.table, &w.clf, &w.index).unwrap();
        let c = SuppressionConfig::default();
        let out = g
            .regulate(&target.question, &DecodingStrategy::greedy(ThinkMode::DefaultThink), &c)
            .unwrap();
        assert!(out.audit.len() >= 2, "{:?}", out.audit);
        assert!(out.audit.len() <= c.max_rounds + 1);
        for pair in out.audit.windows(2) {
            assert!(pair[1].lexicon_size > pair[0].lexicon_size);
        }
        assert!(out.lexicon.find_all(&out.trajectory.tokens).is_empty());
        assert!(matches!(out.verdict.kind, VerdictKind::Accept | VerdictKind::Refuse));
    }

    #[test]
    fn mismatched_components_are_rejected() {
        let w = world();
        let small = Uniform(w.vocab.len() - 1);
        assert!(Guard::new(&small, &w.vocab, &w.table, &w.clf, &w.index).is_err());
    }

    #[test]
    fn audit_lines_are_json() {
        let w = world();
        let (forget, _) = split_forget_retain(&w.records);
        let out = w
            .guard()
            .regulate(
                &forget[0].question,
                &DecodingStrategy::greedy(ThinkMode::DefaultThink),
                &SuppressionConfig::default(),
            )
            .unwrap();
        let text = out.audit_jsonl();
        assert_eq!(text.lines().count(), out.audit.len());
        for line in text.lines() {
            let e: AuditEntry = serde_json::from_str(line).unwrap();
            assert!(["accept", "escalate", "refuse"].contains(&e.verdict.as_str()));
        }
    }

    #[test]
    fn leak_spans_find_runs_and_verbatim_answer_pieces() {
        let table = EmbeddingTable::from_rows(
            (0..20)
                .map(|i| {
                    if i == 10 || i == 11 {
                        vec![1.0, 0.0]
                    } else {
                        vec![0.0, 1.0]
                    }
                })
                .collect(),
        )
        .unwrap();
        let vocab = Vocabulary::new();
        let lex = ForbiddenLexicon::compile(vec![ForbiddenPhrase::from_tokens(
            vec![10],
            &vocab,
            &table,
            Origin::Extracted,
        )])
        .unwrap();
        let c = SuppressionConfig::default();
        let spans = leak_spans(
            &c,
            &lex,
            &table,
            &[15, 16, 17],
            &[12, 11, 10, 13, THINK_CLOSE, 15, 16, 14, 11],
        );
        assert_eq!(spans, vec![vec![11, 10], vec![11], vec![15, 16]]);
    }

    proptest! {
        #[test]
        fn decision_respects_verdict_invariants(s in 0.0f64..1.0, f in -20.0f64..0.0, round in 0usize..6) {
            let c = SuppressionConfig::default();
            match control_decision(&c, s, f, round) {
                Decision::Accept => prop_assert!(s < c.tau && f >= c.eta),
                Decision::Escalate => prop_assert!(s >= c.tau && round < c.max_rounds),
                Decision::Refuse => prop_assert!((s < c.tau && f < c.eta) || round >= c.max_rounds),
            }
        }
    }
}

//! Run configuration, ablation presets, and the flat `key = value` format.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusManifest;
use crate::error::{Error, Result};
use crate::suppression::SuppressionConfig;
use crate::text_model::{DecodingStrategy, Sampler, ThinkMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    NoSecurePrompt,
    NoPhrase,
    HardOnly,
    SoftOnly,
    /// Every mechanism off: the raw model behind a no-op gate.
    Unregulated,
}

impl Ablation {
    /// The ablation grid, without the unregulated baseline.
    pub const PRESETS: [Ablation; 5] = [
        Ablation::Full,
        Ablation::NoSecurePrompt,
        Ablation::NoPhrase,
        Ablation::HardOnly,
        Ablation::SoftOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoSecurePrompt => "no_secure_prompt",
            Ablation::NoPhrase => "no_phrase",
            Ablation::HardOnly => "hard_only",
            Ablation::SoftOnly => "soft_only",
            Ablation::Unregulated => "unregulated",
        }
    }

    /// `base` with the mechanism flags replaced by this preset's.
    pub fn apply(self, base: &SuppressionConfig) -> SuppressionConfig {
        let mut c = SuppressionConfig {
            hard_enabled: true,
            soft_enabled: true,
            secure_prefix_enabled: true,
            phrase_extraction: true,
            controller_enabled: true,
            ..base.clone()
        };
        match self {
            Ablation::Full => {}
            Ablation::NoSecurePrompt => c.secure_prefix_enabled = false,
            Ablation::NoPhrase => c.phrase_extraction = false,
            Ablation::HardOnly => c.soft_enabled = false,
            Ablation::SoftOnly => c.hard_enabled = false,
            Ablation::Unregulated => {
                c.hard_enabled = false;
                c.soft_enabled = false;
                c.secure_prefix_enabled = false;
                c.controller_enabled = false;
            }
        }
        c
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        [Ablation::Unregulated]
            .into_iter()
            .chain(Ablation::PRESETS)
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown ablation preset {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Forget01,
    Forget05,
    Forget10,
}

impl Protocol {
    pub fn ratio(self) -> f64 {
        match self {
            Protocol::Forget01 => 0.01,
            Protocol::Forget05 => 0.05,
            Protocol::Forget10 => 0.10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Forget01 => "forget01",
            Protocol::Forget05 => "forget05",
            Protocol::Forget10 => "forget10",
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "forget01" => Ok(Protocol::Forget01),
            "forget05" => Ok(Protocol::Forget05),
            "forget10" => Ok(Protocol::Forget10),
            other => Err(Error::Config(format!("unknown forget protocol {other:?}"))),
        }
    }
}

/// Which records the toy model is trained on. `Forget` leaves the retain set
/// unseen, so retain records act as non-members for membership attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainSplit {
    All,
    Forget,
}

impl TrainSplit {
    pub fn name(self) -> &'static str {
        match self {
            TrainSplit::All => "all",
            TrainSplit::Forget => "forget",
        }
    }
}

impl FromStr for TrainSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(TrainSplit::All),
            "forget" => Ok(TrainSplit::Forget),
            other => Err(Error::Config(format!("unknown training split {other:?}"))),
        }
    }
}

/// `mode` for greedy decoding, `mode/top<k>/<seed>` for top-k sampling.
pub fn strategy_name(s: &DecodingStrategy) -> String {
    match s.sampler {
        Sampler::Greedy => s.mode.name().to_owned(),
        Sampler::TopK { k, seed } => format!("{}/top{k}/{seed}", s.mode.name()),
    }
}

pub fn parse_strategy(text: &str) -> Result<DecodingStrategy> {
    let mut parts = text.trim().split('/');
    let mode: ThinkMode = parts.next().unwrap_or_default().parse()?;
    let base = DecodingStrategy::greedy(mode);
    match (parts.next(), parts.next(), parts.next()) {
        (None, _, _) => Ok(base),
        (Some(k), Some(seed), None) => {
            let bad = || Error::Config(format!("malformed strategy {text:?}, expected mode/top<k>/<seed>"));
            let k: usize = k
                .strip_prefix("top")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k > 0)
                .ok_or_else(bad)?;
            let seed: u64 = seed.parse().map_err(|_| bad())?;
            Ok(base.with_sampler(Sampler::TopK { k, seed }))
        }
        _ => Err(Error::Config(format!(
            "malformed strategy {text:?}, expected mode/top<k>/<seed>"
        ))),
    }
}

/// Parses a comma-separated strategy list.
pub fn parse_strategies(text: &str) -> Result<Vec<DecodingStrategy>> {
    let list: Vec<_> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_strategy)
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(Error::Config("strategy list is empty".into()));
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus_path: PathBuf,
    pub vocab_path: PathBuf,
    pub model_path: PathBuf,
    pub embeddings_path: PathBuf,
    pub classifier_path: PathBuf,
    pub lexicon_path: PathBuf,
    pub report_dir: PathBuf,
    pub n_profiles: usize,
    pub n_questions_per_profile: usize,
    pub protocol: Protocol,
    pub ngram_order: usize,
    pub train_split: TrainSplit,
    pub suppression: SuppressionConfig,
    pub ablation: Ablation,
    pub strategies: Vec<DecodingStrategy>,
    pub paraphrased: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let manifest = CorpusManifest::default();
        let art = PathBuf::from("artifacts");
        RunConfig {
            seed: manifest.seed,
            corpus_path: art.join("corpus.jsonl"),
            vocab_path: art.join("vocab.txt"),
            model_path: art.join("model.ngram"),
            embeddings_path: art.join("embeddings.bin"),
            classifier_path: art.join("classifier.txt"),
            lexicon_path: art.join("lexicon.tsv"),
            report_dir: PathBuf::from("reports"),
            n_profiles: manifest.n_profiles,
            n_questions_per_profile: manifest.n_questions_per_profile,
            protocol: Protocol::Forget01,
            ngram_order: 8,
            train_split: TrainSplit::All,
            suppression: SuppressionConfig::default(),
            ablation: Ablation::Full,
            strategies: ThinkMode::ALL.iter().map(|&m| DecodingStrategy::greedy(m)).collect(),
            paraphrased: false,
        }
    }
}

impl RunConfig {
    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            seed: self.seed,
            n_profiles: self.n_profiles,
            n_questions_per_profile: self.n_questions_per_profile,
            forget_ratio: self.protocol.ratio(),
            ..CorpusManifest::default()
        }
    }

    /// The suppression settings after the ablation preset is applied.
    pub fn effective_suppression(&self) -> SuppressionConfig {
        self.ablation.apply(&self.suppression)
    }

    pub fn validate(&self) -> Result<()> {
        self.manifest().validate()?;
        self.suppression.validate()?;
        if self.ngram_order < 2 {
            return Err(Error::Config("ngram order must be at least 2".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("strategy list is empty".into()));
        }
        for s in [&self.suppression.secure_prefix, &self.suppression.refusal_template] {
            if s.contains('\n') || s.trim() != s {
                return Err(Error::Config(format!(
                    "{s:?} must be one line without surrounding spaces"
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let s = &self.suppression;
        let path = |p: &Path| p.display().to_string();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        let sections: [(&str, Vec<(&str, String)>); 5] = [
            (
                "paths",
                vec![
                    ("corpus", path(&self.corpus_path)),
                    ("vocab", path(&self.vocab_path)),
                    ("model", path(&self.model_path)),
                    ("embeddings", path(&self.embeddings_path)),
                    ("classifier", path(&self.classifier_path)),
                    ("lexicon", path(&self.lexicon_path)),
                    ("report_dir", path(&self.report_dir)),
                ],
            ),
            (
                "corpus",
                vec![
                    ("n_profiles", self.n_profiles.to_string()),
                    ("n_questions_per_profile", self.n_questions_per_profile.to_string()),
                    ("protocol", self.protocol.name().to_owned()),
                ],
            ),
            (
                "model",
                vec![
                    ("ngram_order", self.ngram_order.to_string()),
                    ("train_split", self.train_split.name().to_owned()),
                ],
            ),
            (
                "suppression",
                vec![
                    ("alpha", format!("{:?}", s.alpha)),
                    ("delta", format!("{:?}", s.delta)),
                    ("tau", format!("{:?}", s.tau)),
                    ("eta", format!("{:?}", s.eta)),
                    ("n_candidates", s.n_candidates.to_string()),
                    ("max_rounds", s.max_rounds.to_string()),
                    ("hard_enabled", s.hard_enabled.to_string()),
                    ("soft_enabled", s.soft_enabled.to_string()),
                    ("secure_prefix_enabled", s.secure_prefix_enabled.to_string()),
                    ("phrase_extraction", s.phrase_extraction.to_string()),
                    ("controller_enabled", s.controller_enabled.to_string()),
                    ("secure_prefix", s.secure_prefix.clone()),
                    ("refusal_template", s.refusal_template.clone()),
                ],
            ),
            (
                "run",
                vec![
                    ("ablation", self.ablation.name().to_owned()),
                    (
                        "strategies",
                        self.strategies.iter().map(strategy_name).collect::<Vec<_>>().join(", "),
                    ),
                    ("paraphrased", self.paraphrased.to_string()),
                ],
            ),
        ];
        for (name, entries) in sections {
            let _ = writeln!(out, "\n[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// Parses the text form; unset keys keep their defaults. `origin` names
    /// the source in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_owned();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, lineno, format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            c.set(&section, key, value)
                .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        }
        Ok(c)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
        }
        let s = &mut self.suppression;
        match (section, key) {
            ("", "seed") => self.seed = num(key, value)?,
            ("paths", "corpus") => self.corpus_path = value.into(),
            ("paths", "vocab") => self.vocab_path = value.into(),
            ("paths", "model") => self.model_path = value.into(),
            ("paths", "embeddings") => self.embeddings_path = value.into(),
            ("paths", "classifier") => self.classifier_path = value.into(),
            ("paths", "lexicon") => self.lexicon_path = value.into(),
            ("paths", "report_dir") => self.report_dir = value.into(),
            ("corpus", "n_profiles") => self.n_profiles = num(key, value)?,
            ("corpus", "n_questions_per_profile") => self.n_questions_per_profile = num(key, value)?,
            ("corpus", "protocol") => self.protocol = value.parse()?,
            ("model", "ngram_order") => self.ngram_order = num(key, value)?,
            ("model", "train_split") => self.train_split = value.parse()?,
            ("suppression", "alpha") => s.alpha = num(key, value)?,
            ("suppression", "delta") => s.delta = num(key, value)?,
            ("suppression", "tau") => s.tau = num(key, value)?,
            ("suppression", "eta") => s.eta = num(key, value)?,
            ("suppression", "n_candidates") => s.n_candidates = num(key, value)?,
            ("suppression", "max_rounds") => s.max_rounds = num(key, value)?,
            ("suppression", "hard_enabled") => s.hard_enabled = num(key, value)?,
            ("suppression", "soft_enabled") => s.soft_enabled = num(key, value)?,
            ("suppression", "secure_prefix_enabled") => s.secure_prefix_enabled = num(key, value)?,
            ("suppression", "phrase_extraction") => s.phrase_extraction = num(key, value)?,
            ("suppression", "controller_enabled") => s.controller_enabled = num(key, value)?,
            ("suppression", "secure_prefix") => s.secure_prefix = value.to_owned(),
            ("suppression", "refusal_template") => s.refusal_template = value.to_owned(),
            ("run", "ablation") => self.ablation = value.parse()?,
            ("run", "strategies") => self.strategies = parse_strategies(value)?,
            ("run", "paraphrased") => self.paraphrased = num(key, value)?,
            _ => {
                let full = if section.is_empty() {
                    key.to_owned()
                } else {
                    format!("{section}.{key}")
                };
                return Err(Error::Config(format!("unknown key {full}")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preset_flag_grid() {
        let base = SuppressionConfig::default();
        // (preset, hard, soft, prefix, extraction)
        let grid = [
            (Ablation::Full, true, true, true, true),
            (Ablation::NoSecurePrompt, true, true, false, true),
            (Ablation::NoPhrase, true, true, true, false),
            (Ablation::HardOnly, true, false, true, true),
            (Ablation::SoftOnly, false, true, true, true),
        ];
        for (preset, hard, soft, prefix, extraction) in grid {
            let c = preset.apply(&base);
            assert_eq!(
                (
                    c.hard_enabled,
                    c.soft_enabled,
                    c.secure_prefix_enabled,
                    c.phrase_extraction,
                    c.controller_enabled
                ),
                (hard, soft, prefix, extraction, true),
                "{preset}"
            );
            assert_eq!(preset.name().parse::<Ablation>().unwrap(), preset);
        }
        let off = Ablation::Unregulated.apply(&base);
        assert!(!off.controller_enabled && !off.hard_enabled && !off.soft_enabled);
    }

    #[test]
    fn preset_overrides_base_flags() {
        let base = SuppressionConfig {
            hard_enabled: false,
            ..SuppressionConfig::default()
        };
        assert!(Ablation::Full.apply(&base).hard_enabled);
    }

    #[test]
    fn strategy_names_round_trip() {
        for text in ["default_think", "zero_think", "less_think/top5/3"] {
            assert_eq!(strategy_name(&parse_strategy(text).unwrap()), text);
        }
        assert!(parse_strategy("less_think/top0/3").is_err());
        assert!(parse_strategy("less_think/top5").is_err());
        assert!(parse_strategy("sideways").is_err());
        assert!(parse_strategies(" , ").is_err());
    }

    #[test]
    fn default_text_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_text(), Path::new("x")).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = RunConfig::parse("seed = 3\n[suppression]\nalpha = lots\n", Path::new("cfg")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = RunConfig::parse("[run]\nwho = me\n", Path::new("cfg")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(RunConfig::parse("just words\n", Path::new("cfg")).is_err());
    }

    #[test]
    fn partial_files_keep_defaults() {
        let c = RunConfig::parse("# tweak\n[suppression]\nalpha = 1.5\n", Path::new("cfg")).unwrap();
        assert_eq!(c.suppression.alpha, 1.5);
        assert_eq!(c.seed, RunConfig::default().seed);
    }

    fn one_line() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z ,.'!?=-]{0,40}[A-Za-z.!]"
    }

    fn strategy() -> impl Strategy<Value = DecodingStrategy> {
        (0usize..3, prop::option::of((1usize..10, any::<u64>()))).prop_map(|(m, s)| {
            let base = DecodingStrategy::greedy(ThinkMode::ALL[m]);
            match s {
                None => base,
                Some((k, seed)) => base.with_sampler(Sampler::TopK { k, seed }),
            }
        })
    }

    proptest! {
        #[test]
        fn config_round_trips(
            seed in any::<u64>(),
            alpha in 0.0f64..100.0,
            delta in 0.0f64..=1.0,
            tau in 0.0f64..=1.0,
            eta in -50.0f64..0.0,
            flags in prop::array::uniform5(any::<bool>()),
            prefix in one_line(),
            refusal in one_line(),
            preset in 0usize..6,
            strategies in prop::collection::vec(strategy(), 1..5),
            dir in "[a-z]{1,8}(/[a-z0-9_.]{1,8}){0,2}",
            paraphrased in any::<bool>(),
            forget_only in any::<bool>(),
        ) {
            let c = RunConfig {
                seed,
                report_dir: dir.into(),
                suppression: SuppressionConfig {
                    alpha, delta, tau, eta,
                    hard_enabled: flags[0],
                    soft_enabled: flags[1],
                    secure_prefix_enabled: flags[2],
                    phrase_extraction: flags[3],
                    controller_enabled: flags[4],
                    secure_prefix: prefix,
                    refusal_template: refusal,
                    ..SuppressionConfig::default()
                },
                ablation: [Ablation::Unregulated].into_iter().chain(Ablation::PRESETS).nth(preset).unwrap(),
                strategies,
                paraphrased,
                train_split: if forget_only { TrainSplit::Forget } else { TrainSplit::All },
                ..RunConfig::default()
            };
            prop_assert_eq!(RunConfig::parse(&c.to_text(), Path::new("x")).unwrap(), c);
        }
    }
}

//! Building, saving, and loading the trained artifacts, with a SHA-256
//! manifest that flags inputs changed since the last build.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use trajectory_guard::config::{RunConfig, TrainSplit};
use trajectory_guard::corpus::{build_vocabulary, split_forget_retain, validate_corpus, Record};
use trajectory_guard::lexicon::{extract_record_phrases, ForbiddenLexicon, Origin};
use trajectory_guard::semantics::{
    build_embeddings, train_scope_classifier, EmbeddingTable, ForgetIndex, ScopeClassifier, TrainParams,
};
use trajectory_guard::text_model::{is_special, train_ngram, NGramModel, Vocabulary};
use trajectory_guard::trajectory::Guard;
use trajectory_guard::{Error, Result};

/// Everything a guard needs, plus the records it was built from.
pub struct Artifacts {
    pub records: Vec<Record>,
    pub vocab: Vocabulary,
    pub model: NGramModel,
    pub table: EmbeddingTable,
    pub classifier: ScopeClassifier,
    pub index: ForgetIndex,
    /// Union of the phrases extracted from every forget record.
    pub forget_lexicon: ForbiddenLexicon,
}

/// Written next to the model as `build.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildManifest {
    pub corpus_sha256: String,
    /// Hash of the config keys that shape the artifacts.
    pub settings_sha256: String,
    pub artifacts: BTreeMap<String, String>,
}

pub fn manifest_path(config: &RunConfig) -> PathBuf {
    config.model_path.with_file_name("build.json")
}

pub fn corpus_manifest_path(corpus: &Path) -> PathBuf {
    corpus.with_extension("manifest.json")
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn settings_hash(config: &RunConfig) -> String {
    let s = &config.suppression;
    let text = format!(
        "seed={}\norder={}\nsplit={}\nprefix={}\nrefusal={}\n",
        config.seed,
        config.ngram_order,
        config.train_split.name(),
        s.secure_prefix,
        s.refusal_template
    );
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn artifact_paths(config: &RunConfig) -> [(&'static str, &Path); 5] {
    [
        ("vocab", &config.vocab_path),
        ("model", &config.model_path),
        ("embeddings", &config.embeddings_path),
        ("classifier", &config.classifier_path),
        ("lexicon", &config.lexicon_path),
    ]
}

/// Fails when a template token could be part of a forbidden phrase, since
/// a refusal must never be the thing that leaks.
pub fn check_refusal_safety(template: &str, vocab: &Vocabulary, lexicon: &ForbiddenLexicon) -> Result<()> {
    let clash: Vec<&str> = vocab
        .tokenize(template)
        .into_iter()
        .filter(|t| !is_special(*t) && lexicon.token_set().contains(t))
        .map(|t| vocab.token(t))
        .collect();
    if clash.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "refusal template shares tokens with the forget lexicon: {}",
            clash.join(", ")
        )))
    }
}

impl Artifacts {
    /// Trains every artifact in memory.
    pub fn build(config: &RunConfig, records: Vec<Record>) -> Result<Self> {
        validate_corpus(&records)?;
        let s = &config.suppression;
        let vocab = build_vocabulary(&records, [s.secure_prefix.as_str(), s.refusal_template.as_str()]);
        let (forget, retain) = split_forget_retain(&records);
        let training = match config.train_split {
            TrainSplit::All => &records,
            TrainSplit::Forget => &forget,
        };
        let model = train_ngram(training, &vocab, config.ngram_order)?;
        let table = build_embeddings(&records, &vocab, config.seed);
        let params = TrainParams {
            seed: config.seed,
            ..TrainParams::default()
        };
        let classifier = train_scope_classifier(&forget, &retain, &table, &vocab, &params)?;
        let index = ForgetIndex::new(&forget, &table, &vocab);
        let surfaces: Vec<String> = forget.iter().flat_map(extract_record_phrases).collect();
        let forget_lexicon = ForbiddenLexicon::from_surfaces(&surfaces, &vocab, &table, Origin::Extracted)?;
        check_refusal_safety(&s.refusal_template, &vocab, &forget_lexicon)?;
        Ok(Artifacts {
            records,
            vocab,
            model,
            table,
            classifier,
            index,
            forget_lexicon,
        })
    }

    /// Writes the artifacts and `build.json` for the corpus at
    /// `config.corpus_path`.
    pub fn save(&self, config: &RunConfig) -> Result<BuildManifest> {
        for (_, path) in artifact_paths(config) {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            }
        }
        self.vocab.save(&config.vocab_path)?;
        self.model.save(&config.model_path)?;
        self.table.save(&config.embeddings_path)?;
        self.classifier.save(&config.classifier_path)?;
        self.forget_lexicon.save(&config.lexicon_path)?;
        let mut artifacts = BTreeMap::new();
        for (name, path) in artifact_paths(config) {
            artifacts.insert(name.to_owned(), sha256_file(path)?);
        }
        let manifest = BuildManifest {
            corpus_sha256: sha256_file(&config.corpus_path)?,
            settings_sha256: settings_hash(config),
            artifacts,
        };
        let path = manifest_path(config);
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&path, body).map_err(|e| io_error(&path, e))?;
        Ok(manifest)
    }

    /// Loads the corpus and artifacts named by `config`. The second value
    /// lists staleness warnings; loading still succeeds when it is non-empty.
    pub fn load(config: &RunConfig) -> Result<(Self, Vec<String>)> {
        for (name, path) in artifact_paths(config) {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{name} artifact {} is missing; run `trajectory-guard build` first",
                    path.display()
                )));
            }
        }
        let warnings = staleness(config)?;
        let records = trajectory_guard::corpus::load_corpus(&config.corpus_path)?;
        let vocab = Vocabulary::load(&config.vocab_path)?;
        let model = NGramModel::load(&config.model_path)?;
        let table = EmbeddingTable::load(&config.embeddings_path)?;
        let classifier = ScopeClassifier::load(&config.classifier_path)?;
        let forget_lexicon = ForbiddenLexicon::load(&config.lexicon_path, &vocab, &table)?;
        let (forget, _) = split_forget_retain(&records);
        let index = ForgetIndex::new(&forget, &table, &vocab);
        Ok((
            Artifacts {
                records,
                vocab,
                model,
                table,
                classifier,
                index,
                forget_lexicon,
            },
            warnings,
        ))
    }

    pub fn guard(&self) -> Result<Guard<'_>> {
        Guard::new(&self.model, &self.vocab, &self.table, &self.classifier, &self.index)
    }
}

/// Compares the corpus, settings, and artifact files against `build.json`.
pub fn staleness(config: &RunConfig) -> Result<Vec<String>> {
    let path = manifest_path(config);
    let Ok(body) = fs::read_to_string(&path) else {
        return Ok(vec![format!(
            "{} not found; artifacts cannot be checked for staleness",
            path.display()
        )]);
    };
    let recorded: BuildManifest = serde_json::from_str(&body).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut warnings = Vec::new();
    if sha256_file(&config.corpus_path)? != recorded.corpus_sha256 {
        warnings.push(format!(
            "corpus {} changed since the last build; rerun `trajectory-guard build`",
            config.corpus_path.display()
        ));
    }
    if settings_hash(config) != recorded.settings_sha256 {
        warnings.push("seed, model, or template settings changed since the last build".to_owned());
    }
    for (name, path) in artifact_paths(config) {
        let current = sha256_file(path)?;
        if recorded.artifacts.get(name) != Some(&current) {
            warnings.push(format!("{name} artifact {} does not match build.json", path.display()));
        }
    }
    Ok(warnings)
}

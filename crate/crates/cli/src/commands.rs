//! The subcommands. Each writes its human-readable output to `out` and
//! warnings to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use trajectory_guard::config::{Ablation, RunConfig};
use trajectory_guard::corpus::{generate_synthetic_benchmark, load_corpus, write_corpus, CorpusManifest};
use trajectory_guard::evaluation::{run_benchmark, BenchmarkSpec, EvaluationReport};
use trajectory_guard::text_model::{Trajectory, Vocabulary, STEP, THINK_CLOSE};
use trajectory_guard::trajectory::{Guard, Regulated};
use trajectory_guard::{Error, Result};

use crate::artifacts::{corpus_manifest_path, manifest_path, staleness, Artifacts};
use crate::{EXIT_LEAK, EXIT_OK};

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn warn(messages: &[String]) {
    for m in messages {
        eprintln!("warning: {m}");
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => fs::create_dir_all(dir).map_err(|e| io_error(dir, e)),
        None => Ok(()),
    }
}

pub fn gen_corpus(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let manifest = config.manifest();
    let records = generate_synthetic_benchmark(&manifest)?;
    ensure_parent(&config.corpus_path)?;
    write_corpus(&config.corpus_path, &records)?;
    let manifest_path = corpus_manifest_path(&config.corpus_path);
    manifest.save(&manifest_path)?;
    let forget = records.iter().filter(|r| r.is_forget()).count();
    emit(
        out,
        &format!(
            "wrote {} records ({} forget, {} retain, {}) to {}\nmanifest: {}\n",
            records.len(),
            forget,
            records.len() - forget,
            manifest.protocol_name(),
            config.corpus_path.display(),
            manifest_path.display()
        ),
    )?;
    Ok(EXIT_OK)
}

pub fn build(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    if !config.corpus_path.exists() {
        return Err(Error::Config(format!(
            "corpus {} not found; run `trajectory-guard gen-corpus` first",
            config.corpus_path.display()
        )));
    }
    if let Ok(recorded) = CorpusManifest::load(&corpus_manifest_path(&config.corpus_path)) {
        if recorded != config.manifest() {
            warn(&["corpus manifest differs from the current config; the corpus on disk is used as is".to_owned()]);
        }
    }
    if manifest_path(config).exists() {
        let stale = staleness(config)?;
        if !stale.is_empty() {
            warn(&stale);
            warn(&["rebuilding all artifacts".to_owned()]);
        }
    }
    let records = load_corpus(&config.corpus_path)?;
    let artifacts = Artifacts::build(config, records)?;
    let manifest = artifacts.save(config)?;
    let mut text = format!(
        "built from {} records: vocabulary {}, {} n-gram contexts (order {}, trained on {}), {} forget lexicon phrases\n",
        artifacts.records.len(),
        artifacts.vocab.len(),
        artifacts.model.num_contexts(),
        artifacts.model.order(),
        config.train_split.name(),
        artifacts.forget_lexicon.len()
    );
    for (name, hash) in &manifest.artifacts {
        text.push_str(&format!("  {name:<10} {hash}\n"));
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

/// The generated text with the reasoning block set off on its own lines,
/// one reasoning step per line.
pub fn render_trajectory(vocab: &Vocabulary, y: &Trajectory) -> String {
    let mut text = String::from("<think>\n");
    for step in y.reasoning_segment().split(|&t| t == STEP) {
        if !step.is_empty() {
            text.push_str(&format!("  {}\n", vocab.detokenize(step)));
        }
    }
    if y.tokens.contains(&THINK_CLOSE) {
        text.push_str("</think>\n");
        text.push_str(&vocab.detokenize(y.answer_segment()));
        text.push('\n');
    } else {
        text.push_str("(reasoning never closed)\n");
    }
    if y.truncated {
        text.push_str("(truncated at the length limit)\n");
    }
    text
}

pub fn render_regulated(vocab: &Vocabulary, query: &str, r: &Regulated, audit: bool) -> String {
    let v = &r.verdict;
    let mut text = format!("query: {query}\n");
    text.push_str(&format!(
        "scope: p_forget = {:.4} ({})\n",
        r.scope_probability,
        if r.suppressed {
            "in scope, regulated"
        } else {
            "out of scope, passed through"
        }
    ));
    text.push_str(&render_trajectory(vocab, &r.trajectory));
    text.push_str(&format!(
        "verdict: {} (round {}, S = {:.4}, F = {:.4}, lexicon {} phrases)\n",
        v.kind.name(),
        v.round,
        v.sensitivity,
        v.fluency,
        r.lexicon.len()
    ));
    if audit {
        text.push_str("audit:\n");
        text.push_str(&r.audit_jsonl());
    }
    text
}

/// Regulates `query` under the first configured strategy.
pub fn generate_with(guard: &Guard<'_>, config: &RunConfig, query: &str, audit: bool) -> Result<String> {
    let strategy = config
        .strategies
        .first()
        .ok_or_else(|| Error::Config("no decoding strategy configured".into()))?;
    let regulated = guard.regulate(query, strategy, &config.effective_suppression())?;
    Ok(render_regulated(guard.vocab, query, &regulated, audit))
}

pub fn generate(config: &RunConfig, query: &str, audit: bool, out: &mut dyn Write) -> Result<i32> {
    let (artifacts, warnings) = Artifacts::load(config)?;
    warn(&warnings);
    let guard = artifacts.guard()?;
    emit(out, &generate_with(&guard, config, query, audit)?)?;
    Ok(EXIT_OK)
}

/// `<preset>[_paraphrased]` under `report_dir`, without extension.
pub fn report_stem(config: &RunConfig, ablation: Ablation) -> PathBuf {
    let suffix = if config.paraphrased { "_paraphrased" } else { "" };
    config.report_dir.join(format!("{}{suffix}", ablation.name()))
}

/// Runs the benchmark for each preset, writes `<stem>.txt` and
/// `<stem>.jsonl` for each, and returns the reports in preset order.
pub fn evaluate_presets(
    guard: &Guard<'_>,
    records: &[trajectory_guard::corpus::Record],
    config: &RunConfig,
    presets: &[Ablation],
) -> Result<Vec<EvaluationReport>> {
    fs::create_dir_all(&config.report_dir).map_err(|e| io_error(&config.report_dir, e))?;
    let mut reports = Vec::with_capacity(presets.len());
    for &ablation in presets {
        let spec = BenchmarkSpec {
            ablation,
            suppression: config.suppression.clone(),
            strategies: config.strategies.clone(),
            paraphrased: config.paraphrased,
            protocol: config.protocol.name().to_owned(),
            seed: config.seed,
        };
        let report = run_benchmark(guard, records, &spec)?;
        let stem = report_stem(config, ablation);
        for (ext, body) in [("txt", report.to_text()), ("jsonl", report.to_jsonl())] {
            let path = stem.with_extension(ext);
            fs::write(&path, body).map_err(|e| io_error(&path, e))?;
        }
        reports.push(report);
    }
    Ok(reports)
}

pub fn evaluate(config: &RunConfig, all_presets: bool, out: &mut dyn Write) -> Result<i32> {
    let (artifacts, warnings) = Artifacts::load(config)?;
    warn(&warnings);
    let guard = artifacts.guard()?;
    let presets: Vec<Ablation> = if all_presets {
        Ablation::PRESETS.to_vec()
    } else {
        vec![config.ablation]
    };
    let reports = evaluate_presets(&guard, &artifacts.records, config, &presets)?;
    let mut leak = false;
    let mut text = String::new();
    for r in &reports {
        let a = &r.aggregates;
        leak |= r.leak_detected();
        text.push_str(&format!(
            "{:<16} mu={:.4} afe={:.4} cfe={:.4} mcs={:.4} mia_a={:.4} mia_c={:.4} leakage={:.4} leaks={} -> {}\n",
            r.ablation.name(),
            a.mu,
            a.afe,
            a.cfe,
            a.mcs,
            a.mia_a,
            a.mia_c,
            a.combined_leakage,
            a.fragment_leaks + a.lexicon_leaks,
            report_stem(config, r.ablation).with_extension("txt").display()
        ));
    }
    if leak {
        text.push_str("leak detected\n");
    }
    emit(out, &text)?;
    Ok(if leak { EXIT_LEAK } else { EXIT_OK })
}

pub fn show_config(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    emit(out, &config.to_text())?;
    Ok(EXIT_OK)
}

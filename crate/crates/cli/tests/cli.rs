use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use trajectory_guard::config::RunConfig;
use trajectory_guard::corpus::generate_synthetic_benchmark;
use trajectory_guard::lexicon::{ForbiddenLexicon, Origin};
use trajectory_guard::trajectory::{Guard, ScriptedModel};
use trajectory_guard_cli::artifacts::{check_refusal_safety, Artifacts};
use trajectory_guard_cli::commands::generate_with;

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajectory-guard"))
        .args(args)
        .current_dir(dir)
        .env_remove("TRAJECTORY_GUARD_REPORT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn built() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for step in ["gen-corpus", "build"] {
        let o = cli(dir.path(), &[step]);
        assert_eq!(o.status.code(), Some(0), "{step}: {}", stderr(&o));
    }
    dir
}

fn first_question(dir: &Path, forget: bool) -> String {
    let body = fs::read_to_string(dir.join("artifacts/corpus.jsonl")).unwrap();
    body.lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| (v["split"] == "forget") == forget)
        .map(|v| v["question"].as_str().unwrap().to_owned())
        .unwrap()
}

#[test]
fn gen_corpus_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    cli(dir.path(), &["gen-corpus"]);
    let first = fs::read(dir.path().join("artifacts/corpus.jsonl")).unwrap();
    cli(dir.path(), &["gen-corpus"]);
    assert_eq!(first, fs::read(dir.path().join("artifacts/corpus.jsonl")).unwrap());
    assert!(dir.path().join("artifacts/corpus.manifest.json").exists());
    cli(dir.path(), &["gen-corpus", "--seed", "8"]);
    assert_ne!(first, fs::read(dir.path().join("artifacts/corpus.jsonl")).unwrap());
}

#[test]
fn generate_delimits_reasoning_and_audits() {
    let dir = built();
    let retain = cli(dir.path(), &["generate", &first_question(dir.path(), false)]);
    let text = stdout(&retain);
    assert_eq!(retain.status.code(), Some(0));
    assert!(text.contains("<think>\n") && text.contains("</think>\n"), "{text}");
    assert!(text.contains("passed through"), "{text}");

    let forget = cli(dir.path(), &["generate", "--audit", &first_question(dir.path(), true)]);
    let text = stdout(&forget);
    assert!(text.contains("in scope, regulated"), "{text}");
    let audit: Vec<&str> = text.lines().skip_while(|l| *l != "audit:").skip(1).collect();
    assert!(!audit.is_empty(), "{text}");
    for line in audit {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["round"].is_u64() && v["verdict"].is_string());
    }
}

#[test]
fn exit_code_tracks_leaks() {
    let dir = built();
    let guarded = cli(dir.path(), &["evaluate", "--ablation", "all"]);
    assert_eq!(guarded.status.code(), Some(0), "{}", stdout(&guarded));
    for preset in ["full", "no_secure_prompt", "no_phrase", "hard_only", "soft_only"] {
        assert!(dir.path().join(format!("reports/{preset}.txt")).exists());
        assert!(dir.path().join(format!("reports/{preset}.jsonl")).exists());
    }
    let open = cli(dir.path(), &["evaluate", "--ablation", "unregulated"]);
    assert_eq!(open.status.code(), Some(1));
    assert!(stdout(&open).contains("leak detected"));
}

#[test]
fn report_dir_env_and_paraphrased_naming() {
    let dir = built();
    let o = Command::new(env!("CARGO_BIN_EXE_trajectory-guard"))
        .args(["evaluate", "--paraphrased"])
        .current_dir(dir.path())
        .env("TRAJECTORY_GUARD_REPORT_DIR", "elsewhere")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("elsewhere/full_paraphrased.txt")).unwrap();
    assert!(report.contains("paraphrased = true"));
    let jsonl = fs::read_to_string(dir.path().join("elsewhere/full_paraphrased.jsonl")).unwrap();
    for line in jsonl.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert!(!dir.path().join("reports").exists());
}

#[test]
fn stale_inputs_warn() {
    let dir = built();
    let q = first_question(dir.path(), false);
    let clean = cli(dir.path(), &["generate", &q]);
    assert!(!stderr(&clean).contains("warning"), "{}", stderr(&clean));

    let corpus = dir.path().join("artifacts/corpus.jsonl");
    let body = fs::read_to_string(&corpus).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    fs::write(&corpus, lines[..lines.len() - 1].join("\n") + "\n").unwrap();
    let stale = cli(dir.path(), &["generate", &q]);
    assert!(stderr(&stale).contains("corpus"), "{}", stderr(&stale));
    assert!(stderr(&stale).contains("warning"));

    let reseeded = cli(dir.path(), &["generate", "--seed", "9", &q]);
    assert!(stderr(&reseeded).contains("settings changed"), "{}", stderr(&reseeded));
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cli(dir.path(), &["generate", "anything"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(
        stderr(&missing).contains("run `trajectory-guard build`"),
        "{}",
        stderr(&missing)
    );
    assert_eq!(cli(dir.path(), &["build"]).status.code(), Some(2));
    assert_eq!(
        cli(dir.path(), &["evaluate", "--ablation", "bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(
        cli(dir.path(), &["generate", "--ablation", "all", "q"]).status.code(),
        Some(2)
    );
    assert_eq!(
        cli(dir.path(), &["evaluate", "--strategies", "default_think/top0/1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(cli(dir.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.conf"),
        "seed = 11\n[suppression]\nalpha = 2.5\n[run]\nstrategies = zero_think, less_think/top5/3\n",
    )
    .unwrap();
    let shown = stdout(&cli(
        dir.path(),
        &["--config", "run.conf", "--seed", "12", "show-config"],
    ));
    let parsed = RunConfig::parse(&shown, Path::new("<stdout>")).unwrap();
    assert_eq!(parsed.seed, 12);
    assert_eq!(parsed.suppression.alpha, 2.5);
    assert_eq!(parsed.strategies.len(), 2);

    fs::write(dir.path().join("bad.conf"), "[suppression]\nalpah = 1\n").unwrap();
    let bad = cli(dir.path(), &["--config", "bad.conf", "show-config"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("line 2"), "{}", stderr(&bad));
}

#[test]
fn escalating_query_logs_several_rounds() {
    let config = RunConfig::default();
    let records = generate_synthetic_benchmark(&config.manifest()).unwrap();
    let a = Artifacts::build(&config, records).unwrap();
    let target = a.records.iter().find(|r| r.is_forget()).unwrap();
    let model = ScriptedModel::reproducing(target, &a.vocab);
    let guard = Guard::new(&model, &a.vocab, &a.table, &a.classifier, &a.index).unwrap();
    let text = generate_with(&guard, &config, &target.question, true).unwrap();
    let rounds = text.lines().skip_while(|l| *l != "audit:").skip(1).count();
    assert!(rounds >= 2, "{text}");
}

#[test]
fn refusal_template_must_avoid_lexicon_tokens() {
    let config = RunConfig::default();
    let records = generate_synthetic_benchmark(&config.manifest()).unwrap();
    let a = Artifacts::build(&config, records).unwrap();
    let phrase = &a.forget_lexicon.phrases()[0].surface;
    assert!(check_refusal_safety(&config.suppression.refusal_template, &a.vocab, &a.forget_lexicon).is_ok());
    let err = check_refusal_safety(&format!("Sorry, {phrase} is off limits."), &a.vocab, &a.forget_lexicon);
    assert!(err.is_err());
    let empty = ForbiddenLexicon::from_surfaces::<&str>(&[], &a.vocab, &a.table, Origin::Extracted).unwrap();
    assert!(check_refusal_safety(phrase, &a.vocab, &empty).is_ok());
}

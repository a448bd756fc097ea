//! Command-line driver: corpus generation, artifact builds, guarded
//! generation, and benchmark evaluation.
//!
//! Exit codes: 0 on success, 1 when an evaluation detects a leak, 2 on
//! errors (including bad arguments).

pub mod artifacts;
pub mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use trajectory_guard::config::RunConfig;

/// Overrides `report_dir` from the config when set.
pub const REPORT_DIR_ENV: &str = "TRAJECTORY_GUARD_REPORT_DIR";
/// Config file read from the working directory when `--config` is absent.
pub const DEFAULT_CONFIG_FILE: &str = "trajectory-guard.conf";

pub const EXIT_OK: i32 = 0;
pub const EXIT_LEAK: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "trajectory-guard",
    version,
    about = "Inference-time suppression of forgotten content in reasoning trajectories"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file in `key = value` sections; defaults apply to unset keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed for corpus generation, embeddings, sampling, and the attack split.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Ablation preset, or `all` for the whole grid (evaluate only).
    #[arg(long, global = true)]
    pub ablation: Option<String>,
    /// Comma-separated decoding strategies: `mode` or `mode/top<k>/<seed>`.
    #[arg(long, global = true)]
    pub strategies: Option<String>,
    /// Evaluate on the paraphrased questions instead of the originals.
    #[arg(long, global = true)]
    pub paraphrased: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus and its manifest.
    GenCorpus,
    /// Train the model, embeddings, scope classifier, and forget lexicon.
    Build,
    /// Answer one query through the guard.
    Generate {
        query: String,
        /// Print the controller's per-round audit log as JSON lines.
        #[arg(long)]
        audit: bool,
    },
    /// Run the benchmark and write text and JSONL reports.
    Evaluate,
    /// Print the effective configuration.
    ShowConfig,
}

/// Config file (explicit, or the default file when present), then flags,
/// then the report-dir environment override.
pub fn resolve_config(global: &GlobalArgs) -> trajectory_guard::Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let default = PathBuf::from(DEFAULT_CONFIG_FILE);
            if default.exists() {
                RunConfig::load(&default)?
            } else {
                RunConfig::default()
            }
        }
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(a) = global.ablation.as_deref().filter(|a| *a != "all") {
        config.ablation = a.parse()?;
    }
    if let Some(s) = &global.strategies {
        config.strategies = trajectory_guard::config::parse_strategies(s)?;
    }
    if global.paraphrased {
        config.paraphrased = true;
    }
    if let Some(dir) = std::env::var_os(REPORT_DIR_ENV).filter(|d| !d.is_empty()) {
        config.report_dir = dir.into();
    }
    config.validate()?;
    Ok(config)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: &Cli) -> trajectory_guard::Result<i32> {
    let config = resolve_config(&cli.global)?;
    let all_presets = cli.global.ablation.as_deref() == Some("all");
    if all_presets && !matches!(cli.command, Command::Evaluate) {
        return Err(trajectory_guard::Error::Config(
            "`--ablation all` only applies to evaluate".into(),
        ));
    }
    let mut out = std::io::stdout().lock();
    match &cli.command {
        Command::GenCorpus => commands::gen_corpus(&config, &mut out),
        Command::Build => commands::build(&config, &mut out),
        Command::Generate { query, audit } => commands::generate(&config, query, *audit, &mut out),
        Command::Evaluate => commands::evaluate(&config, all_presets, &mut out),
        Command::ShowConfig => commands::show_config(&config, &mut out),
    }
}

//! `noisemix`: screen clip pools, build noisy corpora, and score
//! reference/degraded pairs.
//!
//! Exit status: 0 when everything succeeded, 1 when some items failed (each
//! listed on stderr), 2 on configuration errors, missing inputs or any other
//! error that stopped the run.

mod commands;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CommandError, Report};
use config::{Config, ConfigError};

#[derive(Parser, Debug)]
#[command(name = "noisemix", version, about = "Noisy speech corpus construction and feature distances")]
struct Cli {
    /// Configuration file of `key=value` lines
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every random draw (run.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (run.jobs)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Where to write the key=value run summary (run.summary)
    #[arg(long, global = true, value_name = "FILE")]
    summary: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Screen a clip pool and write the accepted candidate list
    Screen(ScreenArgs),
    /// Build clean/noisy pairs from a manifest
    Build(BuildArgs),
    /// Score reference/degraded pairs
    Eval(EvalArgs),
    /// Write the feature map of one file
    Feats(FeatsArgs),
}

#[derive(Args, Debug)]
struct ScreenArgs {
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    quota: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    lengths: Option<PathBuf>,
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long)]
    noise_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    validation_size: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FeatsArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `encoder` or `stft`
    #[arg(long)]
    kind: Option<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Screen(_) => "screen",
            Command::Build(_) => "build",
            Command::Eval(_) => "eval",
            Command::Feats(_) => "feats",
        }
    }

    /// Dedicated flags as (key, value) pairs.
    fn flags(&self) -> Vec<(&'static str, String)> {
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let n = |n: &Option<usize>| n.map(|n| n.to_string());
        let pairs = match self {
            Command::Screen(a) => vec![("screen.pool", p(&a.pool)), ("screen.quota", n(&a.quota)), ("screen.out", p(&a.out))],
            Command::Build(a) => vec![
                ("build.manifest", p(&a.manifest)),
                ("build.lengths", p(&a.lengths)),
                ("build.candidates", p(&a.candidates)),
                ("build.noise_dir", p(&a.noise_dir)),
                ("build.out", p(&a.out)),
                ("build.validation_size", n(&a.validation_size)),
            ],
            Command::Eval(a) => vec![("eval.pairs", p(&a.pairs)), ("eval.weights", p(&a.weights)), ("eval.out", p(&a.out))],
            Command::Feats(a) => vec![
                ("feats.input", p(&a.input)),
                ("feats.weights", p(&a.weights)),
                ("feats.out", p(&a.out)),
                ("feats.kind", a.kind.clone()),
            ],
        };
        pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }

    /// Default summary location: inside the build directory, or next to the
    /// command's output file.
    fn default_summary(&self, cfg: &Config) -> Option<PathBuf> {
        let beside = |key: &str| {
            cfg.optional_path(key)
                .map(|out| out.parent().unwrap_or(Path::new("")).join(format!("{}_summary.txt", self.name())))
        };
        match self {
            Command::Build(_) => cfg.optional_path("build.out").map(|d| d.join("run_summary.txt")),
            Command::Screen(_) => beside("screen.out"),
            Command::Eval(_) => beside("eval.out"),
            Command::Feats(_) => beside("feats.out"),
        }
    }
}

/// Defaults, then the config file, then `--set` overrides in order, then
/// dedicated flags.
fn resolve_config(cli: &Cli) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for pair in &cli.overrides {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("run.seed", &seed.to_string())?;
    }
    if let Some(jobs) = cli.jobs {
        cfg.set("run.jobs", &jobs.to_string())?;
    }
    if let Some(summary) = &cli.summary {
        cfg.set("run.summary", &summary.display().to_string())?;
    }
    for (key, value) in cli.command.flags() {
        cfg.set(key, &value)?;
    }
    if cfg.get("run.jobs") == "auto" {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        cfg.set("run.jobs", &n.to_string())?;
    }
    let jobs: usize = cfg.parse("run.jobs")?;
    if jobs == 0 {
        return Err(cfg.bad("run.jobs", "must be at least 1"));
    }
    cfg.parse::<u64>("run.seed")?;
    Ok(cfg)
}

fn summary_text(command: &str, status: &str, cfg: &Config, report: &Report) -> String {
    let mut s = String::new();
    writeln!(s, "command={command}").unwrap();
    writeln!(s, "status={status}").unwrap();
    for (k, v) in cfg.entries() {
        writeln!(s, "config.{k}={v}").unwrap();
    }
    for (k, v) in &report.results {
        writeln!(s, "result.{k}={v}").unwrap();
    }
    s
}

fn run(cli: &Cli) -> Result<(Config, Report), CommandError> {
    let cfg = resolve_config(cli)?;
    let jobs: usize = cfg.parse("run.jobs")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(anyhow::Error::from)?;
    let report = pool.install(|| match &cli.command {
        Command::Screen(_) => commands::screen(&cfg),
        Command::Build(_) => commands::build(&cfg),
        Command::Eval(_) => commands::eval(&cfg),
        Command::Feats(_) => commands::feats(&cfg),
    })?;
    Ok((cfg, report))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (cfg, report) = match run(&cli) {
        Ok(done) => done,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    for failure in &report.failures {
        eprintln!("failed: {failure}");
    }
    let status = if report.failures.is_empty() { "ok" } else { "partial" };
    let summary = cfg
        .optional_path("run.summary")
        .or_else(|| cli.command.default_summary(&cfg));
    if let Some(path) = summary {
        let text = summary_text(cli.command.name(), status, &cfg, &report);
        if let Err(e) = std::fs::write(&path, text) {
            eprintln!("error: writing run summary {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} item(s) failed", report.failures.len());
        ExitCode::from(1)
    }
}

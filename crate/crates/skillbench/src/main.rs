use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use skillbench::config::{load_file, parse_named, RunConfig};
use skillbench::pipeline::{
    cmd_evaluate, cmd_score, cmd_validate, CommandReport, EvaluateOptions, ScoreOptions, EXIT_FATAL,
};
use skillbench_core::{AccuracyMode, AdapterManifest, Aggregation, MatcherMode, Threshold};

/// Skill-extraction benchmark harness.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a dataset strictly and report span/text mismatches.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Run adapters over the dataset, score them and write reports.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated adapter manifest files (TOML or JSON); replaces
        /// the config's adapter list.
        #[arg(long, value_delimiter = ',')]
        adapters: Vec<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Write per-vacancy match details next to the reports.
        #[arg(long)]
        details: bool,
    },
    /// Score a predictions JSONL file without running adapters.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        /// Model name for the report rows.
        #[arg(long, default_value = "predictions")]
        model: String,
        /// Write per-vacancy match details (requires --out).
        #[arg(long)]
        details: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML or JSON run config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// exact | greedy
    #[arg(long, value_parser = parse_named::<MatcherMode>)]
    matcher: Option<MatcherMode>,
    /// micro | macro
    #[arg(long, value_parser = parse_named::<Aggregation>)]
    aggregation: Option<Aggregation>,
    /// jaccard | recall-compat
    #[arg(long, value_parser = parse_named::<AccuracyMode>)]
    accuracy_mode: Option<AccuracyMode>,
    /// "mock" or the base URL of an embedding server.
    #[arg(long)]
    embedder: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Seed for AUC distractor sampling.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(t) = self.threshold {
            cfg.threshold = Threshold::new(t).map_err(|e| anyhow::anyhow!("--threshold: {e}"))?;
        }
        if let Some(m) = self.matcher {
            cfg.matcher = m;
        }
        if let Some(a) = self.aggregation {
            cfg.aggregation = a;
        }
        if let Some(a) = self.accuracy_mode {
            cfg.accuracy_mode = a;
        }
        if let Some(e) = &self.embedder {
            cfg.embedder = e.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(c) = &self.cache {
            cfg.cache = Some(c.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn print(report: &CommandReport) -> ExitCode {
    for m in &report.messages {
        if m.starts_with("error") || m.starts_with("warning") {
            eprintln!("{m}");
        } else {
            println!("{m}");
        }
    }
    ExitCode::from(report.code as u8)
}

fn run(cli: Cli) -> anyhow::Result<CommandReport> {
    Ok(match cli.command {
        Cmd::Validate { dataset } => cmd_validate(&dataset),
        Cmd::Evaluate {
            common,
            adapters,
            parallelism,
            details,
        } => {
            let mut cfg = common.resolve()?;
            if !adapters.is_empty() {
                cfg.adapters = adapters
                    .iter()
                    .map(|p| {
                        load_file::<AdapterManifest>(p)
                            .with_context(|| format!("adapter manifest {}", p.display()))
                    })
                    .collect::<anyhow::Result<_>>()?;
            }
            if let Some(k) = parallelism {
                cfg.parallelism = k;
            }
            cmd_evaluate(&cfg, EvaluateOptions { details }).report
        }
        Cmd::Score {
            common,
            predictions,
            model,
            details,
        } => {
            let cfg = common.resolve()?;
            let opts = ScoreOptions {
                model,
                out: common.out.clone(),
                details,
            };
            cmd_score(&cfg, &predictions, &opts).report
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(report) => print(&report),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL as u8)
        }
    }
}

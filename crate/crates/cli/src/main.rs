use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use feclust::pipeline::{run_pipeline, run_stage, Manifest, PipelineConfig, Stage};
use feclust::select::Strategy;

/// Cluster app-review features and build labelled taxonomies.
#[derive(Parser)]
#[command(name = "feclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Clean raw reviews.
    Ingest,
    /// Stratified per-app sample of the cleaned reviews.
    Sample,
    /// Union feature sets from files and extractor endpoints.
    ExtractMerge,
    /// Embed unique feature surfaces.
    Embed,
    /// Build the dendrogram and sweep cut thresholds.
    Cluster,
    /// Pick one clustering candidate.
    Select,
    /// Build and label one mini-taxonomy per cluster.
    Tag,
    /// Merge taxonomies whose root labels are similar.
    Merge,
    /// Score predicted features against gold annotations.
    Eval,
    /// Write the quality report.
    Report,
    /// Write DOT and CSV exports of the taxonomies.
    ExportDot,
    /// Every stage in order.
    Run,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Ingest => Stage::Ingest,
            Command::Sample => Stage::Sample,
            Command::ExtractMerge => Stage::ExtractMerge,
            Command::Embed => Stage::Embed,
            Command::Cluster => Stage::Cluster,
            Command::Select => Stage::Select,
            Command::Tag => Stage::Tag,
            Command::Merge => Stage::Merge,
            Command::Eval => Stage::Eval,
            Command::Report => Stage::Report,
            Command::ExportDot => Stage::ExportDot,
            Command::Run => return None,
        })
    }
}

#[derive(Args)]
struct Overrides {
    /// JSON config file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Hashing embedder, stub labeller, no remote calls.
    #[arg(long, global = true)]
    offline: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    reviews: Option<PathBuf>,
    /// Feature JSONL file; repeat to merge several.
    #[arg(long = "features", global = true)]
    features: Vec<PathBuf>,
    #[arg(long, global = true)]
    gold: Option<PathBuf>,
    #[arg(long, global = true)]
    sample_size: Option<u64>,
    #[arg(long, global = true, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    /// Root-label similarity needed to merge two taxonomies.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Any config field, e.g. `--set clustering.sweep.step=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: feclust::Error| e.to_string())
}

impl Overrides {
    fn config(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        for s in &self.set {
            cfg.set(s)?;
        }
        if self.offline {
            cfg.offline = true;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.reviews {
            cfg.inputs.reviews = Some(v.clone());
        }
        if !self.features.is_empty() {
            cfg.inputs.features = self.features.clone();
        }
        if let Some(v) = &self.gold {
            cfg.inputs.gold = Some(v.clone());
        }
        if let Some(v) = self.sample_size {
            cfg.sample_size = Some(v);
        }
        if let Some(v) = self.strategy {
            cfg.selection.strategy = v;
        }
        if let Some(v) = self.sigma {
            cfg.merge.sigma = v;
        }
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> anyhow::Result<Manifest> {
    let cfg = cli.opts.config()?;
    Ok(match cli.command.stage() {
        Some(stage) => run_stage(&cfg, stage)?,
        None => run_pipeline(&cfg)?,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(m) => {
            for s in &m.stages {
                log::info!("{}: {:?}", s.name, s.status);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

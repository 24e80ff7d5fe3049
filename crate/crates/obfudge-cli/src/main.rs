//! Command-line front end: stage verbs over a run configuration, plus the
//! taxonomy export.

use anyhow::Context;
use clap::{Parser, Subcommand};
use obfudge_core::error::PipelineError;
use obfudge_core::report::{self, RunConfig};
use obfudge_core::taxonomy;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "obfudge", version, about = "Obfuscation robustness pipeline for LLM vulnerability detection")]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Serve model replies from the cache only; any miss is an error.
    #[arg(long, global = true)]
    replay_only: bool,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured parallelism bound.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the manifest and apply the corpus filtering rules.
    Ingest,
    /// Apply every configured combo to every sample.
    Obfuscate,
    /// Parse-check (and optionally execute) the obfuscated variants.
    Equivalence,
    /// Obtain detection reports for originals and variants.
    Detect,
    /// Grade detection reports on the 1-4 scale.
    Judge,
    /// Build transition records and breakdown summaries.
    Metrics,
    /// Emit success-rate tables and distribution figures.
    Emit,
    /// Run every stage in order.
    Run,
    /// Print the technique registry as JSON lines.
    ExportTaxonomy {
        /// Write to a file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .context("--config <path> is required for this command")?;
    let mut config = RunConfig::from_file(path).map_err(exitable)?;
    if cli.replay_only {
        config.replay_only = true;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    config.validate().map_err(exitable)?;
    Ok(config)
}

struct ExitError {
    code: i32,
    message: String,
}

impl std::fmt::Display for ExitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::fmt::Debug for ExitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ExitError {}

fn exitable(err: PipelineError) -> anyhow::Error {
    anyhow::Error::new(ExitError { code: err.exit_code(), message: err.to_string() })
}

fn export_taxonomy(out: Option<PathBuf>) -> anyhow::Result<()> {
    let mut text = String::new();
    for record in taxonomy::export_records() {
        text.push_str(&serde_json::to_string(&record)?);
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(&path, text).with_context(|| path.display().to_string())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = (|| -> anyhow::Result<()> {
        match &cli.command {
            Command::ExportTaxonomy { out } => return export_taxonomy(out.clone()),
            _ => {}
        }
        let config = load_config(&cli)?;
        match cli.command {
            Command::Ingest => report::stage_ingest(&config).map_err(exitable)?,
            Command::Obfuscate => report::stage_obfuscate(&config).map_err(exitable)?,
            Command::Equivalence => report::stage_equivalence(&config).map_err(exitable)?,
            Command::Detect => report::stage_detect(&config).map_err(exitable)?,
            Command::Judge => report::stage_judge(&config).map_err(exitable)?,
            Command::Metrics => report::stage_metrics(&config).map_err(exitable)?,
            Command::Emit => report::stage_emit(&config).map_err(exitable)?,
            Command::Run => {
                let root = report::run_pipeline(&config).map_err(exitable)?;
                println!("run complete: {}", root.display());
            }
            Command::ExportTaxonomy { .. } => unreachable!(),
        }
        Ok(())
    })();

    if let Err(err) = result {
        eprintln!("error: {err:#}");
        let code = err
            .downcast_ref::<ExitError>()
            .map(|e| e.code)
            .unwrap_or(1);
        std::process::exit(code);
    }
}

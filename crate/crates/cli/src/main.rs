//! `aai` — persona-agent interview pipeline.
//!
//! Exit codes: 0 success, 1 validation error, 2 provider error, 3 missing
//! artifact.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aai_core::config::{Overrides, PipelineConfig};
use aai_core::stages;

#[derive(Parser)]
#[command(name = "aai", version, about = "Simulated attachment-interview pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Use deterministic offline providers (no network).
    #[arg(long, global = true)]
    mock: bool,

    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Artifact output directory.
    #[arg(long, global = true)]
    artifact_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the persona cohort (profiles, memories, styles).
    GenerateAgents {
        #[command(flatten)]
        common: CommonFlags,
        /// Cohort size; must be a multiple of 3.
        #[arg(long)]
        total: Option<usize>,
    },
    /// Run the scripted interview over every agent and chat model.
    RunInterviews {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Embed transcripts into interview-level vectors.
    Embed {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Within-style pairwise similarity report.
    Diversity {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// 2D projection of synthetic and human embeddings.
    Project {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Train classifiers and produce the evaluation grid.
    Evaluate {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Print a summary of saved evaluation artifacts.
    Report {
        #[command(flatten)]
        common: CommonFlags,
    },
}

fn load_config(common: &CommonFlags, total: Option<usize>) -> aai_core::Result<PipelineConfig> {
    let overrides = Overrides {
        // `--mock` is a switch; absence means "use config/default".
        mock: common.mock.then_some(true),
        seed: common.seed,
        total_agents: total,
        artifact_dir: common.artifact_dir.clone(),
    };
    PipelineConfig::load(common.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> aai_core::Result<()> {
    match cli.command {
        Command::GenerateAgents { common, total } => {
            stages::cmd_generate_agents(&load_config(&common, total)?)
        }
        Command::RunInterviews { common } => {
            stages::cmd_run_interviews(&load_config(&common, None)?)
        }
        Command::Embed { common } => stages::cmd_embed(&load_config(&common, None)?),
        Command::Diversity { common } => stages::cmd_diversity(&load_config(&common, None)?),
        Command::Project { common } => stages::cmd_project(&load_config(&common, None)?),
        Command::Evaluate { common } => stages::cmd_evaluate(&load_config(&common, None)?),
        Command::Report { common } => {
            let text = stages::cmd_report(&load_config(&common, None)?)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

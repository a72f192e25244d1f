//! `augcat`: the calibration, augmentation and CAT simulation pipeline as
//! one subcommand per stage. Every stage reads and writes files in the
//! output directory.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Context, Overrides};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "augcat", version, about = "Augmented computerized adaptive testing pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Args)]
struct Flags {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; required here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replay the mock scores instead of calling the scoring endpoint.
    #[arg(long, global = true)]
    stub_scorer: bool,
    /// Size of the top-k augmented test.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a cohort: true thetas, rating responses, mock scores and placeholder texts.
    SynthGenerate,
    /// Partition respondents, purify the rating items and freeze the baseline bank.
    FitBaseline,
    /// Score every text with every prompt template.
    ScoreTexts,
    /// Calibrate each candidate LLM item against the baseline and rank them.
    EvalCandidates,
    /// Assemble the best-all-items and top-k augmented banks.
    BuildAugmented,
    /// Run the baseline and augmented CATs on the test split.
    SimulateCat,
    /// Write per-step panel CSVs, the test comparison and information equivalence.
    Evaluate,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::load(&Overrides {
        config: cli.flags.config.clone(),
        seed: cli.flags.seed,
        stub_scorer: cli.flags.stub_scorer,
        k: cli.flags.k,
        out_dir: cli.flags.out_dir.clone(),
    })?;
    match cli.command {
        Command::SynthGenerate => commands::synth_generate(&ctx),
        Command::FitBaseline => commands::fit_baseline(&ctx),
        Command::ScoreTexts => commands::score_texts(&ctx),
        Command::EvalCandidates => commands::eval_candidates(&ctx),
        Command::BuildAugmented => commands::build_augmented(&ctx),
        Command::SimulateCat => commands::simulate_cat(&ctx),
        Command::Evaluate => commands::evaluate(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line harness: run matrices, sweeps, the property suite and the
//! offline comparator.

pub mod config;
pub mod exec;
pub mod output;
pub mod records;
pub mod sweep;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use graphtron_core::comparator::DEFAULT_EPOCHS;
use graphtron_core::validate::{run_suite, Status, SuiteConfig};
use graphtron_core::{log_checkpoints, offline_comparator, SurrogateLoss};

use crate::config::{LossArg, RunConfig};
use crate::output::{sig9, write_rows};

#[derive(Debug, Parser)]
#[command(name = "graphtron", version, about = "Online multiclass classification with feedback graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration for --reps repetitions and write checkpoint rows as CSV
    Run {
        #[command(flatten)]
        config: RunConfig,
        #[command(flatten)]
        sinks: Sinks,
    },
    /// Run every configuration of a TOML sweep file
    Sweep {
        config_file: PathBuf,
        #[command(flatten)]
        sinks: Sinks,
    },
    /// Run the property suite; exits non-zero if an asserted property fails
    Validate {
        #[arg(long, default_value_t = SuiteConfig::default().seed)]
        seed: u64,
        /// Rounds per per-round audit run
        #[arg(long, default_value_t = SuiteConfig::default().lemma_rounds)]
        rounds: u64,
        /// Monte-Carlo samples for the unbiasedness check
        #[arg(long, default_value_t = SuiteConfig::default().monte_carlo_samples)]
        samples: usize,
    },
    /// Fit the offline comparator on a replay file written by `run --records`
    /// and report surrogate regret against it
    Comparator {
        records: PathBuf,
        #[arg(long, value_enum, default_value_t = LossArg::SmoothHinge)]
        loss: LossArg,
        #[arg(long, default_value_t = 0.5)]
        kappa: f64,
        #[arg(long, default_value_t = DEFAULT_EPOCHS)]
        epochs: usize,
        /// Norm bound on the comparator
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(long, default_value_t = 50)]
        checkpoints: usize,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct Sinks {
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-run replay files (run_<id>.csv) used by `comparator`
    #[arg(long)]
    pub records: Option<PathBuf>,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_matrix(configs: &[RunConfig], sinks: &Sinks) -> Result<()> {
    let rows = exec::execute(configs, sinks.records.as_deref())?;
    let mut out = open_output(sinks.out.as_deref())?;
    write_rows(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn validate(seed: u64, rounds: u64, samples: usize) -> Result<bool> {
    let config = SuiteConfig {
        seed,
        lemma_rounds: rounds,
        monte_carlo_samples: samples,
        ..SuiteConfig::default()
    };
    let outcomes = run_suite(&config)?;
    let mut stdout = io::stdout().lock();
    for o in &outcomes {
        writeln!(stdout, "{o}")?;
    }
    let count = |s: Status| outcomes.iter().filter(|o| o.status == s).count();
    let failed = count(Status::Fail);
    writeln!(
        stdout,
        "{} passed, {} failed, {} informational",
        count(Status::Pass),
        failed,
        count(Status::Info)
    )?;
    Ok(failed == 0)
}

#[allow(clippy::too_many_arguments)]
fn comparator(
    path: &Path,
    loss: LossArg,
    kappa: f64,
    epochs: usize,
    radius: f64,
    checkpoints: usize,
    out: Option<&Path>,
) -> Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let replay = records::read_records(io::BufReader::new(file))?;
    let loss = match loss {
        LossArg::Logistic => SurrogateLoss::logistic(),
        LossArg::SmoothHinge => SurrogateLoss::smooth_hinge(),
        LossArg::Hinge => SurrogateLoss::hinge(kappa)?,
    };
    let labels: Vec<usize> = (0..replay.n_actions).collect();
    let fit = offline_comparator(&replay.examples, replay.n_actions, &labels, &loss, epochs, radius)?;
    let cum_loss = fit.cumulative_loss();

    let mut w = csv::Writer::from_writer(open_output(out)?);
    w.write_record(["t", "cum_mistakes", "cum_comparator_loss", "surrogate_regret", "regret_per_round"])?;
    let horizon = replay.examples.len() as u64;
    let mut mistakes = 0u64;
    let mut next = log_checkpoints(horizon, checkpoints).into_iter().peekable();
    for (i, &m) in replay.mistakes.iter().enumerate() {
        let t = i as u64 + 1;
        mistakes += u64::from(m);
        if next.next_if_eq(&t).is_some() {
            let regret = mistakes as f64 - cum_loss[i];
            w.write_record([
                t.to_string(),
                mistakes.to_string(),
                sig9(cum_loss[i]),
                sig9(regret),
                sig9(regret / t as f64),
            ])?;
        }
    }
    w.flush()?;

    let report = fit.report(mistakes);
    eprintln!(
        "comparator (upper bound on the best fixed predictor, {epochs} epochs, radius {radius}): \
         loss {}, norm {}; surrogate regret {} over {horizon} rounds",
        sig9(report.comparator_loss),
        sig9(report.comparator_norm),
        sig9(report.surrogate_regret)
    );
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    let outcome = match cli.command {
        Command::Run { config, sinks } => run_matrix(&[config], &sinks).map(|_| true),
        Command::Sweep { config_file, sinks } => std::fs::read_to_string(&config_file)
            .with_context(|| format!("reading {}", config_file.display()))
            .and_then(|text| sweep::parse_sweep(&text))
            .and_then(|configs| run_matrix(&configs, &sinks))
            .map(|_| true),
        Command::Validate { seed, rounds, samples } => validate(seed, rounds, samples),
        Command::Comparator {
            records,
            loss,
            kappa,
            epochs,
            radius,
            checkpoints,
            out,
        } => comparator(&records, loss, kappa, epochs, radius, checkpoints, out.as_deref()).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

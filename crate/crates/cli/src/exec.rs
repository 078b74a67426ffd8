use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use graphtron_core::{log_checkpoints, run_protocol, run_rngs, ProtocolOptions, RunResult, SyntheticStream};
use rayon::prelude::*;

use crate::config::{Resolved, RunConfig};
use crate::output::{sig9, Row};
use crate::records::write_records;

pub const THREADS_VAR: &str = "GRAPHTRON_THREADS";

/// One repetition of one configuration.
#[derive(Debug, Clone, Copy)]
struct Job<'a> {
    run_id: u64,
    rep: u64,
    resolved: &'a Resolved,
}

/// Worker pool sized by `GRAPHTRON_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_VAR) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("{THREADS_VAR} must be a positive integer, got '{value}'"))?;
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// Plays one repetition and returns the protocol result. Repetition `rep`
/// of a configuration always uses the same data and learner streams.
pub fn play(resolved: &Resolved, rep: u64, keep: bool) -> Result<RunResult> {
    let cfg = &resolved.config;
    let (data_rng, mut learner_rng) = run_rngs(cfg.seed, rep);
    let mut env = SyntheticStream::new(resolved.synth, data_rng);
    let mut learner = resolved.learner()?;
    let options = ProtocolOptions {
        checkpoints: log_checkpoints(cfg.rounds, cfg.checkpoints),
        keep_records: keep,
        keep_examples: keep,
    };
    Ok(run_protocol(
        &mut env,
        &resolved.graph,
        learner.as_mut(),
        &resolved.loss,
        cfg.rounds,
        &mut learner_rng,
        &options,
    )?)
}

fn rows_for(job: Job<'_>, result: &RunResult) -> Vec<Row> {
    let r = job.resolved;
    let cfg = &r.config;
    result
        .checkpoints
        .iter()
        .map(|c| Row {
            run_id: job.run_id,
            seed: cfg.seed,
            graph_kind: r.graph_name.clone(),
            learner: cfg.learner.to_string(),
            loss: cfg.loss.to_string(),
            k: r.graph.n_classes(),
            d: r.synth.dim(),
            noise: sig9(cfg.noise),
            gamma: r.gamma.map(sig9),
            tuning: r.tuning_label.clone(),
            t: c.t,
            cum_mistakes: c.cum_mistakes,
            cum_queries: r.counts_queries().then_some(c.cum_queries),
            error_rate: sig9(c.error_rate()),
            cum_surrogate_at_w: sig9(c.cum_surrogate),
            cum_explore_gamma: sig9(c.cum_explore_gamma),
        })
        .collect()
}

pub fn records_path(dir: &Path, run_id: u64) -> PathBuf {
    dir.join(format!("run_{run_id}.csv"))
}

fn run_job(job: Job<'_>, records_dir: Option<&Path>) -> Result<Vec<Row>> {
    let result = play(job.resolved, job.rep, records_dir.is_some())?;
    if let Some(dir) = records_dir {
        let path = records_path(dir, job.run_id);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_records(
            BufWriter::new(file),
            job.resolved.graph.n_actions(),
            &result.records,
            &result.examples,
        )?;
    }
    Ok(rows_for(job, &result))
}

/// Resolves every configuration, then runs all repetitions on the worker
/// pool. Run ids are assigned in configuration order, repetition-major, and
/// rows come back sorted by run id regardless of scheduling.
pub fn execute(configs: &[RunConfig], records_dir: Option<&Path>) -> Result<Vec<Row>> {
    let resolved = configs
        .iter()
        .enumerate()
        .map(|(i, c)| c.resolve().with_context(|| format!("configuration {}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = records_dir {
        if !dir.is_dir() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    let mut jobs = Vec::new();
    for r in &resolved {
        for rep in 0..r.config.reps {
            jobs.push(Job {
                run_id: jobs.len() as u64,
                rep,
                resolved: r,
            });
        }
    }
    if jobs.is_empty() {
        bail!("nothing to run");
    }
    let pool = thread_pool()?;
    let per_run = pool.install(|| {
        jobs.par_iter()
            .map(|&job| run_job(job, records_dir))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_run.into_iter().flatten().collect())
}

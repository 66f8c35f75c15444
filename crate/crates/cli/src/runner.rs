//! Executes the run grid in parallel and writes one directory per run.

use std::fs;

use rayon::prelude::*;
use subnav_core::simcore::run_episode;

use crate::config::{ExperimentSpec, RunPlan};
use crate::error::{CliError, Result};
use crate::logs::{write_run_dir, RunMetaBase, RunStatus};
use crate::report::{write_reports, ReportRow};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub id: String,
    pub status: RunStatus,
    pub message: String,
}

fn execute(spec: &ExperimentSpec, plan: &RunPlan) -> Result<RunOutcome> {
    let (log, status, message) = match run_episode(&plan.run) {
        Ok(log) => (log, RunStatus::Completed, String::new()),
        Err(f) => (*f.log, RunStatus::Failed, f.error.to_string()),
    };
    write_run_dir(
        &spec.output_dir.join(&plan.id),
        &log,
        &plan.run.course,
        RunMetaBase {
            run_id: plan.id.clone(),
            backends: plan.backends.clone(),
            seed: plan.seed,
            status,
            message: message.clone(),
            config: spec.echo_for(plan),
        },
    )?;
    Ok(RunOutcome {
        id: plan.id.clone(),
        status,
        message,
    })
}

/// Runs every plan on a pool of `jobs` threads (0 means one per core), then
/// writes the reports. Failed runs keep their partial logs.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<(Vec<RunOutcome>, Vec<ReportRow>)> {
    fs::create_dir_all(&spec.output_dir).map_err(|e| CliError::io(&spec.output_dir, e))?;
    let plans = spec.plans();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    let outcomes: Vec<Result<RunOutcome>> = pool.install(|| plans.par_iter().map(|p| execute(spec, p)).collect());
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = write_reports(&spec.output_dir)?;
    Ok((outcomes, rows))
}

//! Independent trajectories in parallel.
//!
//! Trajectory `k` uses RNG stream `k` of the run seed, so results do not
//! depend on the thread count or on scheduling order.

use rayon::prelude::*;

use spinmag_core::experiment::{run_engine, ExperimentConfig};
use spinmag_core::record::{ensemble_stats, EnsembleStats, RunOutput};

use crate::Result;

pub fn run_ensemble(config: &ExperimentConfig, seed: u64, trajectories: u64) -> Result<Vec<RunOutput>> {
    let runs: std::result::Result<Vec<_>, _> = (0..trajectories)
        .into_par_iter()
        .map(|k| run_engine(config, seed, k))
        .collect();
    Ok(runs?)
}

pub fn stats(runs: &[RunOutput]) -> Result<EnsembleStats> {
    let records: Vec<_> = runs.iter().map(|r| r.record.clone()).collect();
    Ok(ensemble_stats(&records)?)
}

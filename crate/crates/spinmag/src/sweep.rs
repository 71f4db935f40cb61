//! One experiment per value of a single configuration key.
//!
//! Axes are dotted config paths such as `probe.intensity_sat` or `atoms.n`,
//! plus the pseudo-key `seed`. A value is substituted into the TOML tree and
//! the result re-validated, so any key accepted in a config file is a valid
//! axis and nothing else is.

use rayon::prelude::*;

use spinmag_core::estimate::Estimate;
use spinmag_core::experiment::{run_experiment, ExperimentSummary};

use crate::config::RunConfig;
use crate::{Error, Result};

const SECTIONS: [&str; 5] = ["atoms", "field", "probe", "engine", "constants"];

pub const SWEEP_COLUMNS: [&str; 11] = [
    "value",
    "measurement_ratio",
    "larmor_Hz",
    "locked",
    "frequency_Hz",
    "confidence_Hz",
    "field_T",
    "peak_ratio",
    "survival_time_s",
    "max_spin_loss",
    "final_spin_loss",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub summary: ExperimentSummary,
    pub estimate: Estimate,
}

impl SweepPoint {
    pub fn row(&self) -> Vec<String> {
        let s = &self.summary;
        let r = self.estimate.locked();
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        vec![
            self.value.clone(),
            s.measurement_ratio.to_string(),
            s.larmor_hz.to_string(),
            r.is_some().to_string(),
            opt(r.map(|r| r.frequency_hz)),
            opt(r.map(|r| r.confidence_hz)),
            opt(r.map(|r| r.field_tesla)),
            self.estimate.peak_ratio().to_string(),
            opt(s.survival_time),
            s.max_spin_loss.to_string(),
            s.final_spin_loss.to_string(),
        ]
    }
}

/// Parses a command-line value as a TOML scalar, falling back to a string.
fn toml_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Config and seed for one sweep point.
pub fn apply_axis(base: &RunConfig, base_seed: u64, axis: &str, value: &str) -> Result<(RunConfig, u64)> {
    let bad = |reason: String| Error::BadSweepValue {
        axis: axis.to_string(),
        value: value.to_string(),
        reason,
    };
    if axis == "seed" {
        let seed = value.parse::<u64>().map_err(|e| bad(e.to_string()))?;
        return Ok((base.clone(), seed));
    }
    let (section, key) = axis.split_once('.').ok_or_else(|| Error::UnknownAxis(axis.to_string()))?;
    if !SECTIONS.contains(&section) || key.is_empty() || key.contains('.') {
        return Err(Error::UnknownAxis(axis.to_string()));
    }
    let mut tree = toml::Value::try_from(base).expect("config serializes");
    let table = tree
        .as_table_mut()
        .expect("config is a table")
        .entry(section)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    table
        .as_table_mut()
        .expect("sections are tables")
        .insert(key.to_string(), toml_scalar(value));
    match tree.try_into::<RunConfig>() {
        Ok(cfg) => Ok((cfg, base_seed)),
        Err(e) if e.to_string().contains("unknown field") => Err(Error::UnknownAxis(axis.to_string())),
        Err(e) => Err(bad(e.to_string())),
    }
}

/// Runs every point in parallel; rows come back in `values` order.
pub fn sweep(base: &RunConfig, seed: u64, axis: &str, values: &[String]) -> Result<Vec<SweepPoint>> {
    let jobs = values
        .iter()
        .map(|v| apply_axis(base, seed, axis, v).map(|(c, s)| (v.clone(), c, s)))
        .collect::<Result<Vec<_>>>()?;
    jobs.into_par_iter()
        .map(|(value, cfg, seed)| {
            let out = run_experiment(&cfg.to_experiment()?, seed, 0)?;
            Ok(SweepPoint {
                value,
                summary: out.summary,
                estimate: out.estimate,
            })
        })
        .collect()
}

/// Mean and sample standard deviation of the locked frequency estimates.
pub fn frequency_spread(points: &[SweepPoint]) -> Option<(f64, f64)> {
    let f: Vec<f64> = points
        .iter()
        .filter_map(|p| p.estimate.locked().map(|r| r.frequency_hz))
        .collect();
    if f.len() < 2 {
        return None;
    }
    let m = f.len() as f64;
    let mean = f.iter().sum::<f64>() / m;
    let var = f.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    Some((mean, var.sqrt()))
}

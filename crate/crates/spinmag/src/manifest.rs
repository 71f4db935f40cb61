//! Run manifests and JSON summaries written next to every CSV set.

use std::path::Path;

use serde::Serialize;

use spinmag_core::estimate::Estimate;
use spinmag_core::experiment::{Engine, ExperimentSummary};

use crate::config::RunConfig;
use crate::output::write_text;
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub trajectories: u64,
    pub config_sha256: String,
    /// Canonical TOML of the configuration that produced the outputs.
    pub config: String,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<&RunConfig>, seed: u64, trajectories: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: spinmag_core::VERSION,
            command: command.to_string(),
            seed,
            trajectories,
            config_sha256: config.map(RunConfig::sha256).unwrap_or_default(),
            config: config.map(RunConfig::to_toml).unwrap_or_default(),
            files: Vec::new(),
        }
    }

    /// Writes `manifest.json` plus a `config.toml` echo when a config is
    /// attached.
    pub fn write(&self, dir: &Path) -> Result<()> {
        if !self.config.is_empty() {
            write_text(&dir.join("config.toml"), &self.config)?;
        }
        write_text(&dir.join("manifest.json"), &(serde_json::to_string_pretty(self)? + "\n"))
    }
}

/// Estimate for JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub locked: bool,
    pub frequency_hz: Option<f64>,
    pub field_tesla: Option<f64>,
    pub confidence_hz: Option<f64>,
    pub peak_ratio: f64,
}

impl From<&Estimate> for EstimateReport {
    fn from(e: &Estimate) -> Self {
        let r = e.locked();
        Self {
            locked: r.is_some(),
            frequency_hz: r.map(|r| r.frequency_hz),
            field_tesla: r.map(|r| r.field_tesla),
            confidence_hz: r.map(|r| r.confidence_hz),
            peak_ratio: e.peak_ratio(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryReport {
    pub engine: &'static str,
    pub measurement_ratio: f64,
    pub larmor_hz: f64,
    pub compensation_field_tesla: [f64; 3],
    pub linear_regime: bool,
    pub dropped_quadratic_ratio: f64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: Option<f64>,
    pub min_purity: f64,
    pub survival_time_s: Option<f64>,
    pub max_spin_loss: f64,
    pub final_spin_loss: f64,
    pub steps: u64,
    pub runtime_s: f64,
    pub estimate: EstimateReport,
}

pub fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Jumps => "jumps",
        Engine::Sme => "sme",
        Engine::Moments => "moments",
    }
}

impl SummaryReport {
    pub fn new(s: &ExperimentSummary, estimate: &Estimate, runtime_s: f64) -> Self {
        Self {
            engine: engine_name(s.engine),
            measurement_ratio: s.measurement_ratio,
            larmor_hz: s.larmor_hz,
            compensation_field_tesla: s.compensation_field_tesla,
            linear_regime: s.linear_regime,
            dropped_quadratic_ratio: s.dropped_quadratic_ratio,
            max_trace_error: s.diagnostics.max_trace_error,
            max_hermiticity_error: s.diagnostics.max_hermiticity_error,
            min_eigenvalue: s.diagnostics.min_eigenvalue,
            min_purity: s.diagnostics.min_purity,
            survival_time_s: s.survival_time,
            max_spin_loss: s.max_spin_loss,
            final_spin_loss: s.final_spin_loss,
            steps: s.steps,
            runtime_s,
            estimate: estimate.into(),
        }
    }
}

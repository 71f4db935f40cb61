//! Trajectory and photocurrent records produced by the engines.

use alloc::vec::Vec;

use num_traits::Float;

use crate::fock::SpinMoments;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickEvent {
    pub time: f64,
    pub port: Port,
}

/// Observables at one sampling time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub moments: SpinMoments,
    /// Cumulative counts (integers for the jump engine, Gaussian photocounts
    /// for the diffusive engines).
    pub clicks_plus: f64,
    pub clicks_minus: f64,
}

/// Number of scalar observables per sample, in CSV column order:
/// `fx fy fz vxx vxy vxz vyy vyz vzz clicks_plus_cum clicks_minus_cum`.
pub const OBSERVABLE_COUNT: usize = 11;

impl Sample {
    pub fn observables(&self) -> [f64; OBSERVABLE_COUNT] {
        let m = &self.moments.mean;
        let v = self.moments.cov_upper();
        [
            m[0],
            m[1],
            m[2],
            v[0],
            v[1],
            v[2],
            v[3],
            v[4],
            v[5],
            self.clicks_plus,
            self.clicks_minus,
        ]
    }
}

/// Numerical health of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Largest `|tr rho - 1|` seen before a renormalization.
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// Smallest eigenvalue at sampling checkpoints (density-matrix and
    /// moment engines); `None` when not tracked.
    pub min_eigenvalue: Option<f64>,
    pub min_purity: f64,
    pub final_purity: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: None,
            min_purity: 1.0,
            final_purity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// Stream index of this trajectory within its ensemble.
    pub stream: u64,
    pub config_hash: Option<u64>,
    pub samples: Vec<Sample>,
    pub click_events: Vec<ClickEvent>,
    pub diagnostics: Diagnostics,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }
}

/// Photocounts accumulated over one bin starting at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotocurrentBin {
    pub time: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

impl PhotocurrentBin {
    pub fn difference(&self) -> f64 {
        self.d_plus - self.d_minus
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentRecord {
    pub bin_width: f64,
    pub bins: Vec<PhotocurrentBin>,
}

impl PhotocurrentRecord {
    pub fn differences(&self) -> Vec<f64> {
        self.bins.iter().map(PhotocurrentBin::difference).collect()
    }

    pub fn duration(&self) -> f64 {
        self.bin_width * self.bins.len() as f64
    }
}

/// Per-time ensemble mean, unbiased variance and standard error of every
/// observable.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub count: usize,
    pub times: Vec<f64>,
    pub mean: Vec<[f64; OBSERVABLE_COUNT]>,
    pub variance: Vec<[f64; OBSERVABLE_COUNT]>,
    pub std_error: Vec<[f64; OBSERVABLE_COUNT]>,
}

pub fn ensemble_stats(records: &[TrajectoryRecord]) -> Result<EnsembleStats> {
    if records.len() < 2 {
        return Err(Error::TooFewRecords {
            needed: 2,
            found: records.len(),
        });
    }
    let times = records[0].times();
    for r in &records[1..] {
        if r.samples.len() != times.len()
            || r.samples.iter().zip(&times).any(|(s, t)| s.time != *t)
        {
            return Err(Error::GridMismatch);
        }
    }
    let count = records.len();
    let k = count as f64;
    let mut mean = Vec::with_capacity(times.len());
    let mut variance = Vec::with_capacity(times.len());
    let mut std_error = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let mut m = [0.0; OBSERVABLE_COUNT];
        for r in records {
            for (acc, x) in m.iter_mut().zip(r.samples[i].observables()) {
                *acc += x;
            }
        }
        m.iter_mut().for_each(|x| *x /= k);
        let mut v = [0.0; OBSERVABLE_COUNT];
        for r in records {
            for ((acc, x), mu) in v.iter_mut().zip(r.samples[i].observables()).zip(m) {
                *acc += (x - mu) * (x - mu);
            }
        }
        v.iter_mut().for_each(|x| *x /= k - 1.0);
        let se = v.map(|x| (x / k).sqrt());
        mean.push(m);
        variance.push(v);
        std_error.push(se);
    }
    Ok(EnsembleStats {
        count,
        times,
        mean,
        variance,
        std_error,
    })
}

/// Observables and photocurrent of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: TrajectoryRecord,
    pub photocurrent: PhotocurrentRecord,
}

//! The monitored system shared by every engine.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::coupling::{affine_decomposition, CouplingVector};
use crate::fock::{build_product_state, sector_basis, FockState, SpinOperators};
use crate::{Error, Result, C64};
use alloc::string::ToString;

/// Which operator the light couples to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// `X = G . N`.
    #[default]
    Full,
    /// `X = G0 n + alpha Fz`, dropping the quadratic part.
    Linearized,
}

/// `n` atoms, all starting in the single-atom state `initial`, probed with
/// flux `flux` through coupling `coupling` while precessing at angular
/// velocity `omega` (rad/s, already including any compensation field).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub n: u32,
    pub initial: [C64; 3],
    pub coupling: CouplingVector,
    pub mode: CouplingMode,
    pub flux: f64,
    pub omega: [f64; 3],
}

impl SystemSpec {
    /// Eigenvalues of the measured operator `X` in basis order. `X` is
    /// diagonal in the occupation basis in both coupling modes.
    pub fn measured_diagonal(&self) -> Vec<f64> {
        measured_diagonal(&self.coupling, self.mode, self.n)
    }

    pub fn initial_state(&self) -> Result<FockState> {
        build_product_state(self.initial, self.n)
    }

    /// `omega . F` on the sector.
    pub fn zeeman_generator(&self, ops: &SpinOperators) -> DMatrix<C64> {
        zeeman_generator(&self.omega, ops)
    }
}

pub(crate) fn measured_diagonal(g: &CouplingVector, mode: CouplingMode, n: u32) -> Vec<f64> {
    let affine = affine_decomposition(g);
    sector_basis(n)
        .iter()
        .map(|j| match mode {
            CouplingMode::Full => g.dot_occupations(j.plus, j.zero, j.minus),
            CouplingMode::Linearized => {
                affine.offset * n as f64 + affine.linear * j.magnetization() as f64
            }
        })
        .collect()
}

pub(crate) fn zeeman_generator(omega: &[f64; 3], ops: &SpinOperators) -> DMatrix<C64> {
    let mut h = ops.spin(0) * C64::new(omega[0], 0.0);
    h += ops.spin(1) * C64::new(omega[1], 0.0);
    h += ops.spin(2) * C64::new(omega[2], 0.0);
    h
}

/// Default ceiling on integrator steps per trajectory.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000_000;

/// Fixed-step time grid with a sample every `sample_every` steps, starting
/// with the initial state at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: u64,
    pub sample_every: u64,
}

impl TimeGrid {
    /// Rounds `total_time / dt` and `sample_interval / dt` to whole steps.
    pub fn new(dt: f64, total_time: f64, sample_interval: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter("time step must be positive".to_string()));
        }
        if !(total_time >= 0.0) || !total_time.is_finite() {
            return Err(Error::InvalidParameter("total time must be nonnegative".to_string()));
        }
        let steps = (total_time / dt).round() as u64;
        let sample_every = ((sample_interval / dt).round() as u64).max(1);
        Ok(Self {
            dt,
            steps,
            sample_every,
        })
    }

    pub fn check_budget(&self, budget: u64) -> Result<()> {
        if self.steps > budget {
            return Err(Error::StepBudget {
                requested: self.steps,
                budget,
            });
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn is_sample_step(&self, step: u64) -> bool {
        step % self.sample_every == 0
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..=self.steps)
            .step_by(self.sample_every as usize)
            .map(|k| k as f64 * self.dt)
            .collect()
    }
}

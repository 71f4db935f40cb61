//! Quantum-jump trajectories: per step, a click at port `+`, a click at
//! port `-` or no click, followed by the exact Zeeman propagator.
//!
//! With `E = exp(-i X)` the jump operators are
//! `J+- = (sqrt(f dt) / 2)(1 +- i E)`, so `J+^dag J+ + J-^dag J- = f dt` and
//! the no-click Kraus operator `sqrt(1 - f dt)` is a scalar: a step without a
//! click only renormalizes. Both jump operators are diagonal in the
//! occupation basis. The ensemble obeys
//! `d rho / dt = -i [omega . F, rho] + (f/2)(E rho E^dag - rho)`.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::fock::{sector_dimension, SectorOperator, SpinOperators};
use crate::model::{zeeman_generator, SystemSpec, TimeGrid, DEFAULT_STEP_BUDGET};
use crate::record::{ClickEvent, Port, Sample, TrajectoryRecord};
use crate::rng::{trajectory_rng, uniform, TrajectoryRng};
use crate::state::{ConditionalState, DiagnosticsTracker, Propagator};
use crate::{Error, Result, C64};

pub use crate::record::ensemble_stats;

/// Largest `f dt` accepted: two-click probability per step stays below
/// `(f dt)^2 / 2 = 1.25e-3`.
pub const MAX_CLICK_PROBABILITY: f64 = 0.05;

/// Largest sector the dense engines accept.
pub const DENSE_SECTOR_CAP: u32 = 60;

/// Tolerance on click probabilities that fall just outside `[0, 1]`.
const PROBABILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpStepParams {
    pub flux: f64,
    pub dt: f64,
}

impl JumpStepParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.flux >= 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(
                "flux must be nonnegative and dt positive".to_string(),
            ));
        }
        let p = self.flux * self.dt;
        if p > MAX_CLICK_PROBABILITY {
            return Err(Error::StepTooLarge(p));
        }
        Ok(())
    }

    pub fn click_probability(&self) -> f64 {
        self.flux * self.dt
    }
}

/// Diagonals of `J+` and `J-` for the measured operator with eigenvalues `x`.
fn jump_diagonals(x: &[f64], params: &JumpStepParams) -> (Vec<C64>, Vec<C64>) {
    let amp = C64::new(0.5 * params.click_probability().sqrt(), 0.0);
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    x.iter()
        .map(|&xj| {
            let e = i * C64::from_polar(1.0, -xj);
            (amp * (one + e), amp * (one - e))
        })
        .unzip()
}

/// `(J+, J-)` as sector operators.
pub fn jump_operators(system: &SystemSpec, params: &JumpStepParams) -> Result<(SectorOperator, SectorOperator)> {
    params.validate()?;
    let (jp, jm) = jump_diagonals(&system.measured_diagonal(), params);
    let n = system.n;
    let mk = |d: &[C64]| SectorOperator::from_entries(n, DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)));
    Ok((mk(&jp)?, mk(&jm)?))
}

/// `exp(-i omega . F t)` on sector `n`.
pub fn zeeman_unitary(omega: &[f64; 3], t: f64, n: u32) -> Result<SectorOperator> {
    let ops = SpinOperators::new(n);
    let h = zeeman_generator(omega, &ops);
    SectorOperator::from_entries(n, crate::linalg::unitary_propagator(&h, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpEvent {
    NoClick,
    Click(Port),
}

/// Precomputed operators for repeated steps of one system.
#[derive(Debug, Clone)]
pub struct JumpStepper {
    jump_plus: Vec<C64>,
    jump_minus: Vec<C64>,
    weight_plus: Vec<f64>,
    weight_minus: Vec<f64>,
    zeeman: Propagator,
}

impl JumpStepper {
    pub fn new(system: &SystemSpec, params: &JumpStepParams) -> Result<Self> {
        params.validate()?;
        check_dense_cap(system.n)?;
        let (jump_plus, jump_minus) = jump_diagonals(&system.measured_diagonal(), params);
        let weight_plus = jump_plus.iter().map(|z| z.norm_sqr()).collect();
        let weight_minus = jump_minus.iter().map(|z| z.norm_sqr()).collect();
        let ops = SpinOperators::new(system.n);
        let zeeman = Propagator::new(&system.zeeman_generator(&ops), params.dt);
        Ok(Self {
            jump_plus,
            jump_minus,
            weight_plus,
            weight_minus,
            zeeman,
        })
    }

    /// `(tr J+ rho J+^dag, tr J- rho J-^dag)`.
    pub fn click_probabilities<S: ConditionalState>(&self, state: &S) -> (f64, f64) {
        let pops = state.populations();
        let dot = |w: &[f64]| pops.iter().zip(w).map(|(p, w)| p * w).sum::<f64>();
        (dot(&self.weight_plus), dot(&self.weight_minus))
    }

    /// One step; returns the event and `|tr / p - 1|` for the applied
    /// Kraus operator (zero without a click).
    pub fn step<S: ConditionalState>(
        &self,
        state: &mut S,
        rng: &mut TrajectoryRng,
    ) -> Result<(JumpEvent, f64)> {
        let (plus, minus) = self.click_probabilities(state);
        if plus < -PROBABILITY_SLACK || minus < -PROBABILITY_SLACK || plus + minus > 1.0 + PROBABILITY_SLACK {
            return Err(Error::BadClickProbability { plus, minus });
        }
        let u = uniform(rng);
        let (event, expected) = if u < plus {
            state.apply_diagonal(&self.jump_plus);
            (JumpEvent::Click(Port::Plus), plus)
        } else if u < plus + minus {
            state.apply_diagonal(&self.jump_minus);
            (JumpEvent::Click(Port::Minus), minus)
        } else {
            (JumpEvent::NoClick, 0.0)
        };
        state.propagate(&self.zeeman);
        let tr = state.renormalize();
        let trace_error = if expected > 0.0 { (tr / expected - 1.0).abs() } else { (tr - 1.0).abs() };
        Ok((event, trace_error))
    }
}

pub(crate) fn check_dense_cap(n: u32) -> Result<()> {
    if n > DENSE_SECTOR_CAP {
        return Err(Error::SectorCap {
            n,
            cap: DENSE_SECTOR_CAP,
            what: "dense trajectory engine (use the moments engine)",
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpConfig {
    pub system: SystemSpec,
    pub grid: TimeGrid,
    pub step_budget: u64,
    /// Track the smallest eigenvalue at sampling checkpoints (mixed states).
    pub positivity_checks: bool,
}

impl JumpConfig {
    pub fn new(system: SystemSpec, grid: TimeGrid) -> Self {
        Self {
            system,
            grid,
            step_budget: DEFAULT_STEP_BUDGET,
            positivity_checks: false,
        }
    }

    pub fn step_params(&self) -> JumpStepParams {
        JumpStepParams {
            flux: self.system.flux,
            dt: self.grid.dt,
        }
    }
}

/// Pure-state trajectory from the configured product state.
pub fn run_trajectory(config: &JumpConfig, seed: u64, stream: u64) -> Result<TrajectoryRecord> {
    let psi = config.system.initial_state()?;
    run_from(config, psi, seed, stream)
}

/// Density-matrix trajectory from the configured product state.
pub fn run_trajectory_mixed(config: &JumpConfig, seed: u64, stream: u64) -> Result<TrajectoryRecord> {
    let rho = config.system.initial_state()?.to_density();
    run_from(config, rho, seed, stream)
}

/// Trajectory from an arbitrary initial state of the configured sector.
pub fn run_from<S: ConditionalState>(
    config: &JumpConfig,
    mut state: S,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let n = config.system.n;
    check_dense_cap(n)?;
    if state.populations().len() != sector_dimension(n) {
        return Err(Error::DimensionMismatch {
            expected: sector_dimension(n),
            found: state.populations().len(),
        });
    }
    config.grid.check_budget(config.step_budget)?;
    let stepper = JumpStepper::new(&config.system, &config.step_params())?;
    let ops = SpinOperators::new(n);
    let mut rng = trajectory_rng(seed, stream);
    let mut diag = DiagnosticsTracker::new();
    let dt = config.grid.dt;

    let mut samples = Vec::new();
    let mut events = Vec::new();
    let (mut c_plus, mut c_minus) = (0u64, 0u64);
    let sample = |state: &S, step: u64, cp: u64, cm: u64| Sample {
        time: step as f64 * dt,
        moments: state.moments(&ops),
        clicks_plus: cp as f64,
        clicks_minus: cm as f64,
    };
    samples.push(sample(&state, 0, 0, 0));
    diag.checkpoint(&state, config.positivity_checks);

    for k in 1..=config.grid.steps {
        let (event, trace_error) = stepper.step(&mut state, &mut rng)?;
        let herm = state.symmetrize();
        diag.step(trace_error, herm);
        if let JumpEvent::Click(port) = event {
            match port {
                Port::Plus => c_plus += 1,
                Port::Minus => c_minus += 1,
            }
            events.push(ClickEvent { time: k as f64 * dt, port });
        }
        if config.grid.is_sample_step(k) {
            samples.push(sample(&state, k, c_plus, c_minus));
            diag.checkpoint(&state, config.positivity_checks);
        }
    }
    Ok(TrajectoryRecord {
        seed,
        stream,
        config_hash: None,
        samples,
        click_events: events,
        diagnostics: diag.inner,
    })
}

/// Click counts per port of `steps` steps with the state frozen (no
/// backaction, no precession), in windows of `window` steps. Isolates the
/// detector statistics.
pub fn frozen_state_counts<S: ConditionalState>(
    system: &SystemSpec,
    params: &JumpStepParams,
    state: &S,
    steps: u64,
    window: u64,
    seed: u64,
) -> Result<Vec<(u64, u64)>> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be at least one step".to_string()));
    }
    let stepper = JumpStepper::new(system, params)?;
    let (plus, minus) = stepper.click_probabilities(state);
    let mut rng = trajectory_rng(seed, 0);
    let mut out = Vec::with_capacity((steps / window) as usize);
    let mut acc = (0u64, 0u64);
    for k in 1..=steps {
        let u = uniform(&mut rng);
        if u < plus {
            acc.0 += 1;
        } else if u < plus + minus {
            acc.1 += 1;
        }
        if k % window == 0 {
            out.push(acc);
            acc = (0, 0);
        }
    }
    Ok(out)
}

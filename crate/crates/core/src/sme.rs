//! Diffusion-limit conditional dynamics under homodyne monitoring of `X`.
//!
//! The normalized Ito equation integrated here is
//!
//! ```text
//! d rho = -i [omega . F + (f/2) X, rho] dt - (f/4) [X, [X, rho]] dt
//!         + (sqrt(f)/2) (X rho + rho X - 2 <X> rho) dV-
//!         - i (sqrt(f)/2) [X, rho] dV+
//! ```
//!
//! which is two homodyne channels with `c1 = (sqrt(f)/2) X` and
//! `c2 = -i c1`. Since `X` is diagonal, a step uses the diagonal Kraus
//! operator
//!
//! ```text
//! M = exp(c1 dy - c1^2 dt - i c1 dV+),   dy = 2 <c1> dt + dV-
//! ```
//!
//! which reproduces the measurement terms to first order in `dt`, followed by
//! the exact propagator of `omega . F + (f/2) X` and a renormalization. The
//! map keeps rho positive and pure states pure; with `omega = 0` it is the
//! exact solution of the filter for the given noise path.
//!
//! Photocounts per step follow
//! `dC+- = (f/2)(1 +- <X>) dt + sqrt((f/2)(1 +- <X>)) dW+-` with
//! `dW+- = (dV+ +- dV-) / sqrt(2)`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use crate::fock::{sector_dimension, DensityMatrix, SpinMoments, SpinOperators};
use crate::jumps::check_dense_cap;
use crate::model::{SystemSpec, TimeGrid, DEFAULT_STEP_BUDGET};
use crate::record::{PhotocurrentBin, PhotocurrentRecord, RunOutput, Sample, TrajectoryRecord};
use crate::rng::{standard_normal, trajectory_rng};
use crate::state::{ConditionalState, DiagnosticsTracker, Propagator};
use crate::{Error, Result, C64};

/// Trace change tolerated across the trace-preserving part of one step.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Above this value of `dt f (n max|G|)^2` a step no longer resolves the
/// measurement dynamics.
pub const DIFFUSION_STEP_WARNING: f64 = 1e-2;

/// Wiener increments `dV+`, `dV-` for every step of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub dv_plus: Vec<f64>,
    pub dv_minus: Vec<f64>,
}

impl NoisePath {
    pub fn from_seed(dt: f64, steps: usize, seed: u64, stream: u64) -> Self {
        let mut rng = trajectory_rng(seed, stream);
        let s = dt.sqrt();
        let mut dv_plus = Vec::with_capacity(steps);
        let mut dv_minus = Vec::with_capacity(steps);
        for _ in 0..steps {
            dv_plus.push(s * standard_normal(&mut rng));
            dv_minus.push(s * standard_normal(&mut rng));
        }
        Self { dt, dv_plus, dv_minus }
    }

    pub fn len(&self) -> usize {
        self.dv_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dv_plus.is_empty()
    }

    /// The same Brownian path sampled at `factor` times the step.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.len() % factor != 0 {
            return Err(Error::InvalidParameter(
                "coarsening factor must divide the path length".to_string(),
            ));
        }
        let sum = |v: &[f64]| v.chunks(factor).map(|c| c.iter().sum()).collect();
        Ok(Self {
            dt: self.dt * factor as f64,
            dv_plus: sum(&self.dv_plus),
            dv_minus: sum(&self.dv_minus),
        })
    }

    /// `(dW+, dW-)` for step `k`.
    pub fn port_increments(&self, k: usize) -> (f64, f64) {
        let (p, m) = (self.dv_plus[k], self.dv_minus[k]);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        (r * (p + m), r * (p - m))
    }
}

/// Precomputed step operators for one system and step size.
#[derive(Debug, Clone)]
pub struct SmeStepper {
    x: Vec<f64>,
    half_sqrt_f: f64,
    flux: f64,
    dt: f64,
    unitary: Propagator,
}

impl SmeStepper {
    pub fn new(system: &SystemSpec, dt: f64) -> Result<Self> {
        check_dense_cap(system.n)?;
        if !(system.flux >= 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter(
                "flux must be nonnegative and dt positive".to_string(),
            ));
        }
        let x = system.measured_diagonal();
        let ops = SpinOperators::new(system.n);
        let mut h = system.zeeman_generator(&ops);
        for (i, xi) in x.iter().enumerate() {
            h[(i, i)] += C64::new(0.5 * system.flux * xi, 0.0);
        }
        Ok(Self {
            half_sqrt_f: 0.5 * system.flux.sqrt(),
            flux: system.flux,
            dt,
            unitary: Propagator::new(&h, dt),
            x,
        })
    }

    pub fn measured_diagonal(&self) -> &[f64] {
        &self.x
    }

    /// Advances `state` by one step and returns `<X>` before the step and
    /// the trace change across the unitary part.
    pub fn step<S: ConditionalState>(&self, state: &mut S, dv_plus: f64, dv_minus: f64) -> (f64, f64) {
        let x_mean = state.diagonal_mean(&self.x);
        let c_mean = self.half_sqrt_f * x_mean;
        let dy = 2.0 * c_mean * self.dt + dv_minus;
        // shift by the mean to keep the exponent small
        let kraus: Vec<C64> = self
            .x
            .iter()
            .map(|&xj| {
                let c = self.half_sqrt_f * xj;
                let dc = self.half_sqrt_f * (xj - x_mean);
                let re = dc * dy - (c * c - c_mean * c_mean) * self.dt;
                C64::from_polar(re.exp(), -c * dv_plus)
            })
            .collect();
        state.apply_diagonal(&kraus);
        state.renormalize();
        state.propagate(&self.unitary);
        let tr = state.renormalize();
        (x_mean, (tr - 1.0).abs())
    }

    /// Photocounts `(dC+, dC-)` of one step given `<X>` and the port noise.
    pub fn photocounts(&self, x_mean: f64, dw_plus: f64, dw_minus: f64) -> (f64, f64) {
        photocount_increments(self.flux, x_mean, self.dt, dw_plus, dw_minus)
    }
}

/// Gaussian photocounts of one interval. `<X>` is clipped to `[-1, 1]` so
/// that both port rates stay nonnegative once the phase leaves the linear
/// range.
pub fn photocount_increments(flux: f64, x_mean: f64, dt: f64, dw_plus: f64, dw_minus: f64) -> (f64, f64) {
    let x = x_mean.clamp(-1.0, 1.0);
    let rp = 0.5 * flux * (1.0 + x);
    let rm = 0.5 * flux * (1.0 - x);
    (
        rp * dt + rp.sqrt() * dw_plus,
        rm * dt + rm.sqrt() * dw_minus,
    )
}

/// One step on a density matrix, returning the new state.
pub fn sme_step(rho: &DensityMatrix, system: &SystemSpec, dt: f64, dv_plus: f64, dv_minus: f64) -> Result<DensityMatrix> {
    if rho.n() != system.n {
        return Err(Error::DimensionMismatch {
            expected: sector_dimension(system.n),
            found: rho.dim(),
        });
    }
    let stepper = SmeStepper::new(system, dt)?;
    let mut out = rho.clone();
    stepper.step(&mut out, dv_plus, dv_minus);
    ConditionalState::symmetrize(&mut out);
    Ok(out)
}

/// Bins per-step photocounts built from `<X>` at each step and the same
/// noise path that drove the state. A trailing partial bin is dropped.
pub fn simulate_photocurrent(
    flux: f64,
    x_means: &[f64],
    noise: &NoisePath,
    bin_steps: usize,
) -> Result<PhotocurrentRecord> {
    if x_means.len() != noise.len() {
        return Err(Error::NoisePathMismatch {
            expected: x_means.len(),
            found: noise.len(),
        });
    }
    if bin_steps == 0 {
        return Err(Error::InvalidParameter("bin must span at least one step".to_string()));
    }
    let dt = noise.dt;
    let bins = (0..x_means.len() / bin_steps)
        .map(|b| {
            let mut bin = PhotocurrentBin {
                time: (b * bin_steps) as f64 * dt,
                d_plus: 0.0,
                d_minus: 0.0,
            };
            for k in b * bin_steps..(b + 1) * bin_steps {
                let (wp, wm) = noise.port_increments(k);
                let (cp, cm) = photocount_increments(flux, x_means[k], dt, wp, wm);
                bin.d_plus += cp;
                bin.d_minus += cm;
            }
            bin
        })
        .collect();
    Ok(PhotocurrentRecord {
        bin_width: bin_steps as f64 * dt,
        bins,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmeConfig {
    pub system: SystemSpec,
    pub grid: TimeGrid,
    pub step_budget: u64,
    pub positivity_checks: bool,
    /// Steps per photocurrent bin; the sampling stride when `None`.
    pub bin_steps: Option<u64>,
}

impl SmeConfig {
    pub fn new(system: SystemSpec, grid: TimeGrid) -> Self {
        Self {
            system,
            grid,
            step_budget: DEFAULT_STEP_BUDGET,
            positivity_checks: false,
            bin_steps: None,
        }
    }

    /// `dt f (n max|G|)^2`.
    pub fn diffusion_step_parameter(&self) -> f64 {
        let s = self.system.n as f64 * self.system.coupling.max_abs();
        self.grid.dt * self.system.flux * s * s
    }

    pub fn step_warning(&self) -> bool {
        self.diffusion_step_parameter() > DIFFUSION_STEP_WARNING
    }
}

/// Pure-state trajectory with noise drawn from `(seed, stream)`.
pub fn run_sme(config: &SmeConfig, seed: u64, stream: u64) -> Result<RunOutput> {
    let psi = initial(config)?;
    let noise = NoisePath::from_seed(config.grid.dt, config.grid.steps as usize, seed, stream);
    run_with_noise(config, psi, &noise, seed, stream)
}

/// Density-matrix trajectory with noise drawn from `(seed, stream)`.
pub fn run_sme_mixed(config: &SmeConfig, seed: u64, stream: u64) -> Result<RunOutput> {
    let rho = initial(config)?.to_density();
    let noise = NoisePath::from_seed(config.grid.dt, config.grid.steps as usize, seed, stream);
    run_with_noise(config, rho, &noise, seed, stream)
}

fn initial(config: &SmeConfig) -> Result<crate::fock::FockState> {
    check_dense_cap(config.system.n)?;
    config.grid.check_budget(config.step_budget)?;
    config.system.initial_state()
}

/// Trajectory driven by a given noise path, one increment per step.
pub fn run_with_noise<S: ConditionalState>(
    config: &SmeConfig,
    mut state: S,
    noise: &NoisePath,
    seed: u64,
    stream: u64,
) -> Result<RunOutput> {
    let grid = &config.grid;
    check_dense_cap(config.system.n)?;
    grid.check_budget(config.step_budget)?;
    if noise.len() as u64 != grid.steps {
        return Err(Error::NoisePathMismatch {
            expected: grid.steps as usize,
            found: noise.len(),
        });
    }
    if (noise.dt - grid.dt).abs() > 1e-12 * grid.dt {
        return Err(Error::InvalidParameter("noise path step differs from dt".to_string()));
    }
    if state.populations().len() != sector_dimension(config.system.n) {
        return Err(Error::DimensionMismatch {
            expected: sector_dimension(config.system.n),
            found: state.populations().len(),
        });
    }
    let stepper = SmeStepper::new(&config.system, grid.dt)?;
    let ops = SpinOperators::new(config.system.n);
    let mut diag = DiagnosticsTracker::new();
    let mut x_means = Vec::with_capacity(noise.len());
    let mut samples = Vec::new();
    let (mut c_plus, mut c_minus) = (0.0, 0.0);
    samples.push(Sample {
        time: 0.0,
        moments: state.moments(&ops),
        clicks_plus: 0.0,
        clicks_minus: 0.0,
    });
    diag.checkpoint(&state, config.positivity_checks);

    for k in 0..noise.len() {
        let (x_mean, drift) = stepper.step(&mut state, noise.dv_plus[k], noise.dv_minus[k]);
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift(drift));
        }
        let herm = state.symmetrize();
        diag.step(drift, herm);
        let (wp, wm) = noise.port_increments(k);
        let (cp, cm) = stepper.photocounts(x_mean, wp, wm);
        c_plus += cp;
        c_minus += cm;
        x_means.push(x_mean);
        let step = k as u64 + 1;
        if grid.is_sample_step(step) {
            samples.push(Sample {
                time: step as f64 * grid.dt,
                moments: state.moments(&ops),
                clicks_plus: c_plus,
                clicks_minus: c_minus,
            });
            diag.checkpoint(&state, config.positivity_checks);
        }
    }
    let bin = config.bin_steps.unwrap_or(grid.sample_every) as usize;
    let photocurrent = simulate_photocurrent(config.system.flux, &x_means, noise, bin)?;
    Ok(RunOutput {
        record: TrajectoryRecord {
            seed,
            stream,
            config_hash: None,
            samples,
            click_events: Vec::new(),
            diagnostics: diag.inner,
        },
        photocurrent,
    })
}

/// Which unconditional generator to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dissipator {
    /// Ensemble average of the diffusive equation above.
    #[default]
    Diffusive,
    /// Ensemble average of the jump unravelling,
    /// `(f/2)(E rho E^dag - rho)` with `E = exp(-i X)`.
    Jump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconditionalRecord {
    pub times: Vec<f64>,
    pub moments: Vec<SpinMoments>,
    pub purity: Vec<f64>,
    pub final_state: DensityMatrix,
}

/// RK4 integration of the unconditional master equation from the
/// configured product state.
pub fn run_unconditional(system: &SystemSpec, grid: &TimeGrid, dissipator: Dissipator) -> Result<UnconditionalRecord> {
    check_dense_cap(system.n)?;
    let rho0 = system.initial_state()?.to_density();
    run_unconditional_from(system, grid, dissipator, rho0)
}

pub fn run_unconditional_from(
    system: &SystemSpec,
    grid: &TimeGrid,
    dissipator: Dissipator,
    rho0: DensityMatrix,
) -> Result<UnconditionalRecord> {
    check_dense_cap(system.n)?;
    let dim = sector_dimension(system.n);
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho0.dim(),
        });
    }
    let ops = SpinOperators::new(system.n);
    let x = system.measured_diagonal();
    let f = system.flux;
    let mut h = system.zeeman_generator(&ops);
    let mut rates = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let d = x[i] - x[j];
            rates[(i, j)] = match dissipator {
                Dissipator::Diffusive => C64::new(-0.25 * f * d * d, 0.0),
                Dissipator::Jump => (C64::from_polar(1.0, -d) - C64::new(1.0, 0.0)) * (0.5 * f),
            };
        }
    }
    if dissipator == Dissipator::Diffusive {
        for i in 0..dim {
            h[(i, i)] += C64::new(0.5 * f * x[i], 0.0);
        }
    }
    let minus_i = C64::new(0.0, -1.0);
    let generator = |rho: &DMatrix<C64>| -> DMatrix<C64> {
        let mut out = (&h * rho - rho * &h) * minus_i;
        out += rho.component_mul(&rates);
        out
    };

    let dt = grid.dt;
    let mut rho = rho0.entries().clone();
    let mut times = vec![0.0];
    let mut moments = vec![ops.moments_mixed(&rho0)];
    let mut purity = vec![rho0.purity()];
    let mut current = rho0;
    for k in 1..=grid.steps {
        let k1 = generator(&rho);
        let k2 = generator(&(&rho + &k1 * C64::new(0.5 * dt, 0.0)));
        let k3 = generator(&(&rho + &k2 * C64::new(0.5 * dt, 0.0)));
        let k4 = generator(&(&rho + &k3 * C64::new(dt, 0.0)));
        rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
        if grid.is_sample_step(k) || k == grid.steps {
            current = DensityMatrix::from_entries(system.n, rho.clone())?;
            if grid.is_sample_step(k) {
                times.push(k as f64 * dt);
                moments.push(ops.moments_mixed(&current));
                purity.push(current.purity());
            }
        }
    }
    Ok(UnconditionalRecord {
        times,
        moments,
        purity,
        final_state: current,
    })
}

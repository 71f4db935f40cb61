//! Gaussian-moment reduction of the conditional dynamics for the linearized
//! coupling `X = gamma n + alpha Fz`.
//!
//! State: the mean `mu = <F>` and symmetrized covariance `C`. With
//! `kappa = f alpha^2`, `K = [[0,1,0],[-1,0,0],[0,0,0]]` (so `-K mu` is
//! `z x mu`), `P = diag(1,1,0)`, `e = z` and
//! `Omega = omega + (f alpha / 2) z`, the Ito equations closed at second
//! order (third cumulants set to zero) are
//!
//! ```text
//! d mu = [Omega x mu - (kappa/4) P mu] dt
//!        + (sqrt(f) alpha / 2) (z x mu) dV+ + sqrt(f) alpha C e dV-
//! d C  = [W C + C W^T - (kappa/4)(P C + C P - 2 K C K^T)
//!         + (kappa/4)(K mu)(K mu)^T - kappa (C e)(C e)^T] dt
//!        - (sqrt(f) alpha / 2)(K C + C K^T) dV+ + sqrt(f) alpha R dV-
//! ```
//!
//! where `W` is the cross-product matrix of `Omega` and
//! `R_ab = (2 delta_ab mu_z - delta_zb mu_a - delta_za mu_b) / 12` is the
//! ordering remainder from the spin algebra. For `omega = 0` the
//! `zz` component reduces to `dv = -kappa v^2 dt`.
//!
//! A step splits the two homodyne channels. The `dV+` channel is a random
//! rotation about `z` and is applied, together with the precession, as an
//! exact rotation of `mu` and `C`; its Ito dephasing is then automatic. The
//! `dV-` channel contributes the remaining half of the dephasing and the
//! information gain, which is applied in Kalman form
//! `C' = C - kappa dt (C e)(C e)^T / (1 + kappa dt C_zz)`, so the QND
//! variance recursion is exact. The quadratic coupling `beta` is outside this
//! state and is dropped.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Rotation3, Vector3};
use num_traits::Float;

use crate::coupling::affine_decomposition;
use crate::fock::{single_atom, SpinMoments};
use crate::model::{SystemSpec, TimeGrid, DEFAULT_STEP_BUDGET};
use crate::record::{Diagnostics, RunOutput, Sample, TrajectoryRecord};
use crate::sme::{simulate_photocurrent, NoisePath};
use crate::{Error, Result, C64};

/// Means and covariance carried by the Gaussian engine.
pub type MomentState = SpinMoments;

/// Relative tolerance on negative covariance eigenvalues.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentParams {
    pub n: f64,
    /// `Fz` coefficient of the coupling.
    pub alpha: f64,
    /// `G0`, entering only the photocurrent offset `gamma n`.
    pub offset: f64,
    pub flux: f64,
    /// Applied precession `g_L mu_B B / hbar` (rad/s).
    pub omega: [f64; 3],
    /// Drop the `(f alpha / 2) z` light-shift precession, as the
    /// compensation field does.
    pub light_shift_cancelled: bool,
}

impl MomentParams {
    /// Parameters of the linearized model of `system`; `system.omega` is
    /// taken as is, so any compensation must already be folded in.
    pub fn from_system(system: &SystemSpec) -> Self {
        let a = affine_decomposition(&system.coupling);
        Self {
            n: system.n as f64,
            alpha: a.linear,
            offset: a.offset,
            flux: system.flux,
            omega: system.omega,
            light_shift_cancelled: false,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.flux * self.alpha * self.alpha
    }

    pub fn effective_omega(&self) -> [f64; 3] {
        let mut w = self.omega;
        if !self.light_shift_cancelled {
            w[2] += 0.5 * self.flux * self.alpha;
        }
        w
    }
}

/// `v(t) = (1/v0 + f G^2 t)^-1`.
pub fn qnd_variance_closed_form(t: f64, v0: f64, flux: f64, g: f64) -> Result<f64> {
    if !(v0 > 0.0) {
        return Err(Error::InvalidParameter("initial variance must be positive".to_string()));
    }
    Ok(1.0 / (1.0 / v0 + flux * g * g * t))
}

/// Moments of `n` atoms all in the single-atom state `c`. For the
/// x-polarized state this is `mu = (n, 0, 0)` and `v_yy = v_zz = n / 2`.
pub fn coherent_state(c: &[C64; 3], n: f64) -> Result<MomentState> {
    crate::fock::check_single_atom(c)?;
    if !(n >= 0.0) {
        return Err(Error::InvalidParameter("atom number must be nonnegative".to_string()));
    }
    let one = single_atom::moments(c);
    Ok(MomentState {
        mean: one.mean.map(|m| m * n),
        cov: one.cov.map(|row| row.map(|v| v * n)),
    })
}

fn to_parts(s: &MomentState) -> (Vector3<f64>, Matrix3<f64>) {
    (
        Vector3::from_column_slice(&s.mean),
        Matrix3::from_fn(|i, j| s.cov[i][j]),
    )
}

fn from_parts(mu: &Vector3<f64>, c: &Matrix3<f64>) -> MomentState {
    MomentState {
        mean: [mu[0], mu[1], mu[2]],
        cov: core::array::from_fn(|i| core::array::from_fn(|j| 0.5 * (c[(i, j)] + c[(j, i)]))),
    }
}

/// Smallest covariance eigenvalue.
pub fn min_cov_eigenvalue(s: &MomentState) -> f64 {
    let (_, c) = to_parts(s);
    c.symmetric_eigen().eigenvalues.min()
}

/// Fails when `C` has an eigenvalue below `-PSD_TOLERANCE max(1, tr C)`.
pub fn check_psd(s: &MomentState) -> Result<f64> {
    let e = min_cov_eigenvalue(s);
    let tr = s.cov[0][0] + s.cov[1][1] + s.cov[2][2];
    if e < -PSD_TOLERANCE * tr.max(1.0) {
        return Err(Error::CovarianceNotPsd(e));
    }
    Ok(e)
}

/// One step of the moment system.
pub fn moment_drift_diffusion(
    state: &MomentState,
    params: &MomentParams,
    dt: f64,
    dv_plus: f64,
    dv_minus: f64,
) -> MomentState {
    let (mut mu, mut c) = to_parts(state);
    let sf_a = params.flux.sqrt() * params.alpha;
    let kappa = params.kappa();

    let w = params.effective_omega();
    let mut theta = Vector3::new(w[0], w[1], w[2]) * dt;
    theta[2] += 0.5 * sf_a * dv_plus;
    let r = Rotation3::new(theta);
    let rm = r.matrix();
    mu = rm * mu;
    c = rm * c * rm.transpose();

    let k = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let p = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
    let k_mu = k * mu;
    c += ((p * c + c * p - k * c * k.transpose() * 2.0) * (-kappa / 8.0) + k_mu * k_mu.transpose() * (kappa / 4.0)) * dt;
    let damp = (-kappa * dt / 8.0).exp();
    mu[0] *= damp;
    mu[1] *= damp;

    let ce = c.column(2).into_owned();
    let s = 1.0 + kappa * dt * c[(2, 2)];
    let remainder = Matrix3::from_fn(|a, b| {
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        (2.0 * d(a, b) * mu[2] - d(2, b) * mu[a] - d(2, a) * mu[b]) / 12.0
    });
    mu += ce * (sf_a * dv_minus / s);
    c -= ce * ce.transpose() * (kappa * dt / s);
    c += remainder * (sf_a * dv_minus);
    from_parts(&mu, &c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentConfig {
    pub params: MomentParams,
    pub initial: MomentState,
    pub grid: TimeGrid,
    pub step_budget: u64,
    /// Steps per photocurrent bin; the sampling stride when `None`.
    pub bin_steps: Option<u64>,
    /// Static phase subtracted at the detector before the photocurrent is
    /// formed, e.g. `gamma n` to balance the ports at the operating point.
    pub detector_offset: f64,
}

impl MomentConfig {
    pub fn new(params: MomentParams, initial: MomentState, grid: TimeGrid) -> Self {
        Self {
            params,
            initial,
            grid,
            step_budget: DEFAULT_STEP_BUDGET,
            bin_steps: None,
            detector_offset: 0.0,
        }
    }

    /// `<X>` seen by the detector.
    pub fn detected_phase(&self, state: &MomentState) -> f64 {
        self.params.offset * self.params.n + self.params.alpha * state.mean[2] - self.detector_offset
    }
}

pub fn run_moments(config: &MomentConfig, seed: u64, stream: u64) -> Result<RunOutput> {
    config.grid.check_budget(config.step_budget)?;
    let noise = NoisePath::from_seed(config.grid.dt, config.grid.steps as usize, seed, stream);
    run_moments_with_noise(config, &noise, seed, stream)
}

pub fn run_moments_with_noise(config: &MomentConfig, noise: &NoisePath, seed: u64, stream: u64) -> Result<RunOutput> {
    let grid = &config.grid;
    grid.check_budget(config.step_budget)?;
    if noise.len() as u64 != grid.steps {
        return Err(Error::NoisePathMismatch {
            expected: grid.steps as usize,
            found: noise.len(),
        });
    }
    let mut state = config.initial;
    let mut diag = Diagnostics {
        min_eigenvalue: Some(check_psd(&state)?),
        ..Diagnostics::default()
    };
    let mut samples = Vec::new();
    let mut x_means = Vec::with_capacity(noise.len());
    let (mut c_plus, mut c_minus) = (0.0, 0.0);
    samples.push(Sample {
        time: 0.0,
        moments: state,
        clicks_plus: 0.0,
        clicks_minus: 0.0,
    });
    for k in 0..noise.len() {
        let x = config.detected_phase(&state);
        let (wp, wm) = noise.port_increments(k);
        let (cp, cm) = crate::sme::photocount_increments(config.params.flux, x, grid.dt, wp, wm);
        c_plus += cp;
        c_minus += cm;
        x_means.push(x);
        state = moment_drift_diffusion(&state, &config.params, grid.dt, noise.dv_plus[k], noise.dv_minus[k]);
        let step = k as u64 + 1;
        if grid.is_sample_step(step) {
            let e = check_psd(&state)?;
            diag.min_eigenvalue = diag.min_eigenvalue.map(|m| m.min(e));
            samples.push(Sample {
                time: step as f64 * grid.dt,
                moments: state,
                clicks_plus: c_plus,
                clicks_minus: c_minus,
            });
        }
    }
    let bin = config.bin_steps.unwrap_or(grid.sample_every) as usize;
    let photocurrent = simulate_photocurrent(config.params.flux, &x_means, noise, bin)?;
    Ok(RunOutput {
        record: TrajectoryRecord {
            seed,
            stream,
            config_hash: None,
            samples,
            click_events: Vec::new(),
            diagnostics: diag,
        },
        photocurrent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingVector;
    use crate::fock::{build_product_state, SpinOperators};
    use crate::model::CouplingMode;
    use crate::sme::{run_with_noise, SmeConfig};
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn params(alpha: f64, flux: f64, omega: [f64; 3]) -> MomentParams {
        MomentParams {
            n: 100.0,
            alpha,
            offset: 0.0,
            flux,
            omega,
            light_shift_cancelled: true,
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(qnd_variance_closed_form(0.0, 4.0, 10.0, 0.1).unwrap(), 4.0);
        let t_half = 1.0 / (10.0 * 0.01 * 4.0);
        assert_relative_eq!(qnd_variance_closed_form(t_half, 4.0, 10.0, 0.1).unwrap(), 2.0, max_relative = 1e-14);
        assert!(qnd_variance_closed_form(1e-3, 4.0, 10.0, 0.1).unwrap() < 4.0);
        assert!(qnd_variance_closed_form(1.0, 0.0, 10.0, 0.1).is_err());
    }

    #[test]
    fn coherent_initializers() {
        let x = coherent_state(&single_atom::x_polarized(), 50.0).unwrap();
        assert_relative_eq!(x.mean[0], 50.0, epsilon = 1e-12);
        assert_relative_eq!(x.cov[2][2], 25.0, epsilon = 1e-12);
        assert_relative_eq!(x.cov[1][1], 25.0, epsilon = 1e-12);
        assert!(x.cov[0][0].abs() < 1e-12);
        let z = coherent_state(&single_atom::z_stretched(), 50.0).unwrap();
        assert!(z.cov[2][2].abs() < 1e-12);

        // against the exact sector for small n
        let psi = build_product_state(single_atom::x_polarized(), 6).unwrap();
        let exact = SpinOperators::new(6).moments_pure(&psi);
        let m = coherent_state(&single_atom::x_polarized(), 6.0).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_relative_eq!(exact.cov[a][b], m.cov[a][b], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn qnd_variance_recursion_is_exact() {
        let p = params(0.02, 5e3, [0.0; 3]);
        let grid = TimeGrid::new(1e-4, 2.0, 0.05).unwrap();
        let init = coherent_state(&single_atom::x_polarized(), 100.0).unwrap();
        let out = run_moments(&MomentConfig::new(p, init, grid), 1, 0).unwrap();
        for s in &out.record.samples {
            let v = qnd_variance_closed_form(s.time, 50.0, 5e3, 0.02).unwrap();
            assert_relative_eq!(s.moments.cov[2][2], v, max_relative = 1e-9);
        }
    }

    #[test]
    fn free_rotation_conserves_invariants() {
        let w = [0.0, 2.0 * PI * 50.0, 2.0 * PI * 10.0];
        let p = params(0.0, 0.0, w);
        let init = coherent_state(&single_atom::x_polarized(), 100.0).unwrap();
        let period = 2.0 * PI / (w[1] * w[1] + w[2] * w[2]).sqrt();
        let grid = TimeGrid::new(period / 1000.0, period, period).unwrap();
        let out = run_moments(&MomentConfig::new(p, init, grid), 0, 0).unwrap();
        let last = out.record.samples.last().unwrap().moments;
        assert_relative_eq!(last.mean_norm(), 100.0, max_relative = 1e-10);
        let tr = |m: &MomentState| m.cov[0][0] + m.cov[1][1] + m.cov[2][2];
        assert_relative_eq!(tr(&last), tr(&init), max_relative = 1e-10);
        for a in 0..3 {
            assert_relative_eq!(last.mean[a], init.mean[a], epsilon = 1e-8);
        }
    }

    #[test]
    fn light_shift_precession() {
        let mut p = params(0.01, 1e4, [0.0; 3]);
        p.light_shift_cancelled = false;
        let rate = 0.5 * 1e4 * 0.01;
        let s0 = coherent_state(&single_atom::x_polarized(), 100.0).unwrap();
        let s1 = moment_drift_diffusion(&s0, &p, 1e-3, 0.0, 0.0);
        assert_relative_eq!(s1.mean[1].atan2(s1.mean[0]), rate * 1e-3, max_relative = 1e-10);
        p.light_shift_cancelled = true;
        let s2 = moment_drift_diffusion(&s0, &p, 1e-3, 0.0, 0.0);
        assert!(s2.mean[1].abs() < 1e-14);
    }

    #[test]
    fn matches_exact_sme_at_small_n() {
        let n = 10;
        let omega = [0.0, 2.0 * PI * 20.0, 0.0];
        let g = CouplingVector::new(0.012, 0.01, 0.006);
        let system = SystemSpec {
            n,
            initial: single_atom::x_polarized(),
            coupling: g,
            mode: CouplingMode::Linearized,
            flux: 2e3,
            omega,
        };
        let grid = TimeGrid::new(2e-5, 0.1, 2e-3).unwrap();
        let noise = NoisePath::from_seed(grid.dt, grid.steps as usize, 6, 0);
        let psi = system.initial_state().unwrap();
        let exact = run_with_noise(&SmeConfig::new(system.clone(), grid), psi, &noise, 6, 0).unwrap();
        let init = coherent_state(&system.initial, n as f64).unwrap();
        let cfg = MomentConfig::new(MomentParams::from_system(&system), init, grid);
        let approx = run_moments_with_noise(&cfg, &noise, 6, 0).unwrap();
        for (a, b) in exact.record.samples.iter().zip(&approx.record.samples) {
            for k in 0..3 {
                assert!((a.moments.mean[k] - b.moments.mean[k]).abs() < 0.05 * n as f64, "t={} k={k}", a.time);
            }
        }
    }

    #[test]
    fn covariance_stays_psd_under_strong_measurement() {
        let p = params(0.05, 1e4, [0.0, 2.0 * PI * 30.0, 0.0]);
        let init = coherent_state(&single_atom::x_polarized(), 100.0).unwrap();
        let grid = TimeGrid::new(1e-5, 0.2, 1e-3).unwrap();
        let out = run_moments(&MomentConfig::new(p, init, grid), 3, 0).unwrap();
        assert!(out.record.diagnostics.min_eigenvalue.unwrap() > -1e-9 * 100.0);
    }

    #[test]
    fn qnd_mean_moves_with_record() {
        let p = params(0.02, 1e4, [0.0; 3]);
        let s0 = coherent_state(&single_atom::x_polarized(), 100.0).unwrap();
        let up = moment_drift_diffusion(&s0, &p, 1e-4, 0.0, 1e-2);
        assert_relative_eq!(up.mean[2], 100.0 * 0.02 * 50.0 * 1e-2 / (1.0 + 4.0 * 1e-4 * 50.0), max_relative = 1e-12);
    }
}

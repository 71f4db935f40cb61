//! A magnetometry run: field, probe and engine in, photocurrent, frequency
//! estimate and diagnostics out.

use alloc::string::ToString;
use alloc::vec::Vec;

use num_traits::Float;

use crate::coupling::{affine_decomposition, larmor_frequency, measurement_strength, Constants, CouplingVector, FieldParams};
use crate::estimate::{estimate_larmor, Estimate, EstimatorSettings};
use crate::jumps::{run_trajectory, JumpConfig};
use crate::model::{CouplingMode, SystemSpec, TimeGrid, DEFAULT_STEP_BUDGET};
use crate::moments::{coherent_state, run_moments, MomentConfig, MomentParams};
use crate::record::{Diagnostics, Port, PhotocurrentBin, PhotocurrentRecord, RunOutput, TrajectoryRecord};
use crate::sme::{run_sme, SmeConfig};
use crate::{Error, Result, C64};

/// Largest atom number the exact engines accept in an experiment.
pub const EXACT_ENGINE_CAP: u32 = 20;

/// Field along `-z` (tesla) whose precession cancels the `(f alpha / 2) Fz`
/// light shift: `B_c = -alpha f / (2 g_L mu_B / hbar)`.
pub fn compensation_field(g: &CouplingVector, flux: f64, lande_g: f64, constants: &Constants) -> Result<[f64; 3]> {
    if lande_g == 0.0 {
        return Err(Error::InvalidParameter("compensation needs a nonzero Lande factor".to_string()));
    }
    let alpha = affine_decomposition(g).linear;
    let bz = -alpha * flux / (2.0 * lande_g * constants.bohr_rad_s_per_tesla());
    Ok([0.0, 0.0, bz])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Jumps,
    Sme,
    Moments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: u32,
    pub initial: [C64; 3],
    pub field: FieldParams,
    pub coupling: CouplingVector,
    pub flux: f64,
    pub mode: CouplingMode,
    pub engine: Engine,
    pub total_time: f64,
    pub dt: f64,
    pub sample_interval: f64,
    pub compensation: bool,
    /// Search band; `(0.5, 1.5) nu_L` when `None`.
    pub band_hz: Option<(f64, f64)>,
    pub estimator: EstimatorSettings,
    pub constants: Constants,
    pub exact_cap: u32,
    pub step_budget: u64,
}

impl ExperimentConfig {
    pub fn larmor_hz(&self) -> f64 {
        larmor_frequency(&self.field, &self.constants)
    }

    pub fn measurement_ratio(&self) -> Result<f64> {
        measurement_strength(&self.coupling, self.flux, self.larmor_hz())
    }

    /// Applied plus compensation field (tesla).
    pub fn total_field(&self) -> Result<[f64; 3]> {
        let mut b = self.field.b_tesla;
        if self.compensation {
            let c = compensation_field(&self.coupling, self.flux, self.field.lande_g, &self.constants)?;
            for k in 0..3 {
                b[k] += c[k];
            }
        }
        Ok(b)
    }

    pub fn system(&self) -> Result<SystemSpec> {
        let field = FieldParams {
            b_tesla: self.total_field()?,
            lande_g: self.field.lande_g,
        };
        Ok(SystemSpec {
            n: self.n,
            initial: self.initial,
            coupling: self.coupling,
            mode: self.mode,
            flux: self.flux,
            omega: field.angular_velocity(&self.constants),
        })
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.dt, self.total_time, self.sample_interval)
    }

    pub fn band(&self) -> (f64, f64) {
        self.band_hz.unwrap_or_else(|| {
            let nu = self.larmor_hz();
            (0.5 * nu, 1.5 * nu)
        })
    }

    /// Rescales the flux so that `alpha f / nu_L` equals `ratio`.
    pub fn set_measurement_ratio(&mut self, ratio: f64) -> Result<()> {
        let alpha = affine_decomposition(&self.coupling).linear.abs();
        let nu = self.larmor_hz();
        if alpha == 0.0 || nu <= 0.0 {
            return Err(Error::InvalidParameter(
                "ratio needs nonzero coupling and field".to_string(),
            ));
        }
        self.flux = ratio * nu / alpha;
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 10,
            initial: crate::fock::single_atom::x_polarized(),
            field: FieldParams {
                b_tesla: [0.0, 1e-7, 0.0],
                lande_g: crate::coupling::RB87_F1_LANDE_G,
            },
            coupling: CouplingVector::ZERO,
            flux: 0.0,
            mode: CouplingMode::Full,
            engine: Engine::Moments,
            total_time: 0.1,
            dt: 1e-6,
            sample_interval: 1e-5,
            compensation: true,
            band_hz: None,
            estimator: EstimatorSettings::default(),
            constants: Constants::default(),
            exact_cap: EXACT_ENGINE_CAP,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub engine: Engine,
    pub measurement_ratio: f64,
    pub larmor_hz: f64,
    pub compensation_field_tesla: [f64; 3],
    /// `n max|G| <= 0.1`.
    pub linear_regime: bool,
    /// `|beta / alpha|`, the quadratic coupling the moments engine drops.
    pub dropped_quadratic_ratio: f64,
    pub diagnostics: Diagnostics,
    /// First time the spin component transverse to `B` falls below `1/e` of
    /// its initial value.
    pub survival_time: Option<f64>,
    /// Largest fractional loss of `|<F>|` over the run.
    pub max_spin_loss: f64,
    pub final_spin_loss: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub run: RunOutput,
    pub estimate: Estimate,
    pub summary: ExperimentSummary,
}

/// Runs the configured engine once, without estimation.
pub fn run_engine(config: &ExperimentConfig, seed: u64, stream: u64) -> Result<RunOutput> {
    let system = config.system()?;
    let grid = config.grid()?;
    grid.check_budget(config.step_budget)?;
    if config.engine != Engine::Moments && config.n > config.exact_cap {
        return Err(Error::SectorCap {
            n: config.n,
            cap: config.exact_cap,
            what: "exact experiment engine (use the moments engine)",
        });
    }
    match config.engine {
        Engine::Jumps => {
            let mut cfg = JumpConfig::new(system, grid);
            cfg.step_budget = config.step_budget;
            let record = run_trajectory(&cfg, seed, stream)?;
            let photocurrent = bin_clicks(&record, grid.sample_every as f64 * grid.dt, grid.total_time());
            Ok(RunOutput { record, photocurrent })
        }
        Engine::Sme => {
            let mut cfg = SmeConfig::new(system, grid);
            cfg.step_budget = config.step_budget;
            run_sme(&cfg, seed, stream)
        }
        Engine::Moments => {
            let params = MomentParams::from_system(&system);
            let initial = coherent_state(&config.initial, config.n as f64)?;
            let mut cfg = MomentConfig::new(params, initial, grid);
            cfg.step_budget = config.step_budget;
            cfg.detector_offset = params.offset * params.n;
            run_moments(&cfg, seed, stream)
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig, seed: u64, stream: u64) -> Result<ExperimentOutput> {
    let grid = config.grid()?;
    let run = run_engine(config, seed, stream)?;
    let estimate = estimate_larmor(
        &run.photocurrent,
        config.band(),
        config.field.lande_g,
        &config.constants,
        &config.estimator,
    )?;
    let affine = affine_decomposition(&config.coupling);
    let (max_spin_loss, final_spin_loss) = spin_loss(&run.record);
    let summary = ExperimentSummary {
        engine: config.engine,
        measurement_ratio: config.measurement_ratio()?,
        larmor_hz: config.larmor_hz(),
        compensation_field_tesla: if config.compensation {
            compensation_field(&config.coupling, config.flux, config.field.lande_g, &config.constants)?
        } else {
            [0.0; 3]
        },
        linear_regime: config.coupling.linear_regime(config.n as f64),
        dropped_quadratic_ratio: if affine.linear != 0.0 { (affine.quadratic / affine.linear).abs() } else { 0.0 },
        diagnostics: run.record.diagnostics,
        survival_time: survival_time(&run.record, &config.field.b_tesla),
        max_spin_loss,
        final_spin_loss,
        steps: grid.steps,
    };
    Ok(ExperimentOutput { run, estimate, summary })
}

/// Click counts per bin from a jump record.
pub fn bin_clicks(record: &TrajectoryRecord, bin_width: f64, duration: f64) -> PhotocurrentRecord {
    let count = (duration / bin_width).round() as usize;
    let mut bins: Vec<PhotocurrentBin> = (0..count)
        .map(|b| PhotocurrentBin {
            time: b as f64 * bin_width,
            d_plus: 0.0,
            d_minus: 0.0,
        })
        .collect();
    for e in &record.click_events {
        // clicks are stamped at the end of their step
        let b = ((e.time / bin_width) - 1e-9).floor().max(0.0) as usize;
        if let Some(bin) = bins.get_mut(b) {
            match e.port {
                Port::Plus => bin.d_plus += 1.0,
                Port::Minus => bin.d_minus += 1.0,
            }
        }
    }
    PhotocurrentRecord { bin_width, bins }
}

/// Magnitude of `<F>` perpendicular to `b` (all of it when `b = 0`).
pub fn transverse_spin(mean: &[f64; 3], b: &[f64; 3]) -> f64 {
    let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let u = b.map(|x| x / norm);
    let along: f64 = mean.iter().zip(&u).map(|(m, u)| m * u).sum();
    mean.iter()
        .zip(&u)
        .map(|(m, u)| (m - along * u) * (m - along * u))
        .sum::<f64>()
        .sqrt()
}

/// First sample time at which the transverse spin drops below `1/e` of its
/// initial value.
pub fn survival_time(record: &TrajectoryRecord, b: &[f64; 3]) -> Option<f64> {
    let first = record.samples.first()?;
    let threshold = transverse_spin(&first.moments.mean, b) / core::f64::consts::E;
    record
        .samples
        .iter()
        .find(|s| transverse_spin(&s.moments.mean, b) < threshold)
        .map(|s| s.time)
}

fn spin_loss(record: &TrajectoryRecord) -> (f64, f64) {
    let Some(first) = record.samples.first() else {
        return (0.0, 0.0);
    };
    let m0 = first.moments.mean_norm();
    if m0 == 0.0 {
        return (0.0, 0.0);
    }
    let loss = |s: &crate::record::Sample| 1.0 - s.moments.mean_norm() / m0;
    let max = record.samples.iter().map(loss).fold(0.0, f64::max);
    (max, record.samples.last().map_or(0.0, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::qnd_coupling;
    use crate::sme::{run_unconditional, Dissipator};
    use approx::assert_relative_eq;

    #[test]
    fn compensation_examples() {
        let k = Constants::default();
        assert_eq!(compensation_field(&CouplingVector::ZERO, 1e4, -0.5, &k).unwrap(), [0.0; 3]);
        assert!(compensation_field(&qnd_coupling(0.1), 1e4, 0.0, &k).is_err());
        // cancels the light-shift precession exactly
        let g = qnd_coupling(0.01);
        let b = compensation_field(&g, 2e3, -0.5, &k).unwrap();
        let w = FieldParams { b_tesla: b, lande_g: -0.5 }.angular_velocity(&k);
        assert_relative_eq!(w[2], -0.5 * 2e3 * 0.01, max_relative = 1e-12);
    }

    fn precession_angle(compensation: bool, flip: bool) -> f64 {
        let mut cfg = ExperimentConfig {
            n: 3,
            coupling: qnd_coupling(0.02),
            flux: 500.0,
            field: FieldParams { b_tesla: [0.0; 3], lande_g: -0.5 },
            compensation,
            ..ExperimentConfig::default()
        };
        let mut sys = cfg.system().unwrap();
        if flip {
            cfg.compensation = true;
            let b = cfg.total_field().unwrap();
            sys.omega = FieldParams { b_tesla: b.map(|x| -x), lande_g: -0.5 }.angular_velocity(&cfg.constants);
        }
        let grid = TimeGrid::new(1e-4, 0.2, 0.2).unwrap();
        let r = run_unconditional(&sys, &grid, Dissipator::Diffusive).unwrap();
        let m = r.moments.last().unwrap().mean;
        m[1].atan2(m[0])
    }

    #[test]
    fn compensation_stops_precession() {
        let on = precession_angle(true, false);
        let off = precession_angle(false, false);
        let flipped = precession_angle(true, true);
        assert!(on.abs() <= 1e-3, "{on}");
        assert!(on.abs() <= 1e-3 * off.abs());
        assert_relative_eq!(flipped, 2.0 * off, max_relative = 1e-6);
    }

    #[test]
    fn ratio_rescaling() {
        let mut cfg = ExperimentConfig {
            coupling: qnd_coupling(1e-3),
            ..ExperimentConfig::default()
        };
        cfg.set_measurement_ratio(0.1).unwrap();
        assert_relative_eq!(cfg.measurement_ratio().unwrap(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(cfg.larmor_hz(), 699.812, max_relative = 1e-6);
    }

    #[test]
    fn transverse_component() {
        assert_relative_eq!(transverse_spin(&[3.0, 5.0, 4.0], &[0.0, 2.0, 0.0]), 5.0, epsilon = 1e-12);
        assert_relative_eq!(transverse_spin(&[3.0, 0.0, 4.0], &[0.0; 3]), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_run_locks() {
        let mut cfg = ExperimentConfig {
            n: 20,
            engine: Engine::Sme,
            coupling: qnd_coupling(0.01),
            total_time: 0.03,
            dt: 5e-6,
            sample_interval: 5e-5,
            ..ExperimentConfig::default()
        };
        cfg.set_measurement_ratio(10.0).unwrap();
        let out = run_experiment(&cfg, 1, 0).unwrap();
        let r = out.estimate.locked().expect("lock");
        assert!((r.frequency_hz - 699.812).abs() < 0.02 * 699.812, "{}", r.frequency_hz);
        assert!(out.summary.max_spin_loss < 0.5);
    }

    #[test]
    fn exact_cap_is_enforced() {
        let cfg = ExperimentConfig {
            n: 21,
            engine: Engine::Sme,
            ..ExperimentConfig::default()
        };
        assert!(matches!(run_experiment(&cfg, 0, 0), Err(Error::SectorCap { .. })));
    }
}

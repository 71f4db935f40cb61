//! TOML run configuration.
//!
//! Sections mirror the physical inputs. Every dimensioned key carries its
//! unit in the name and unknown keys are rejected, so a typo such as
//! `total_time_s` fails loudly instead of silently falling back to a
//! default.
//!
//! ```toml
//! [atoms]
//! n = 10
//! initial = "x"
//!
//! [field]
//! b_y_mG = 1.0
//!
//! [probe]
//! mode = "direct"
//! g_plus = 0.01
//! g_zero = 0.0
//! g_minus = -0.01
//! flux_per_s = 1e4
//!
//! [engine]
//! kind = "sme"
//! total_time_ms = 10.0
//! dt_us = 1.0
//! sample_interval_us = 10.0
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spinmag_core::coupling::{
    affine_decomposition, coupling_shape, coupling_vector, flux_from_intensity, larmor_frequency,
    Constants, CouplingVector, FieldParams, OpticalParams, RabiInput, RB87_F1_LANDE_G,
};
use spinmag_core::estimate::EstimatorSettings;
use spinmag_core::experiment::{Engine, ExperimentConfig, EXACT_ENGINE_CAP};
use spinmag_core::fock::single_atom;
use spinmag_core::model::{CouplingMode, DEFAULT_STEP_BUDGET};
use spinmag_core::C64;

use crate::{Error, Result};

const TESLA_PER_MILLIGAUSS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub atoms: Atoms,
    #[serde(default)]
    pub field: Field,
    pub probe: Probe,
    pub engine: EngineSection,
    #[serde(default, skip_serializing_if = "ConstantsSection::is_empty")]
    pub constants: ConstantsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atoms {
    pub n: u32,
    #[serde(default)]
    pub initial: InitialState,
}

/// Single-atom state every atom starts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Stretched along `+x`.
    #[default]
    X,
    Y,
    /// `m = +1`.
    Z,
    /// `m = 0`.
    M0,
}

impl InitialState {
    pub fn amplitudes(self) -> [C64; 3] {
        match self {
            InitialState::X => single_atom::x_polarized(),
            InitialState::Y => single_atom::y_polarized(),
            InitialState::Z => single_atom::z_stretched(),
            InitialState::M0 => single_atom::m_zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Field {
    #[serde(rename = "b_x_mG", default)]
    pub b_x_mg: f64,
    #[serde(rename = "b_y_mG", default)]
    pub b_y_mg: f64,
    #[serde(rename = "b_z_mG", default)]
    pub b_z_mg: f64,
    #[serde(default = "default_lande_g")]
    pub lande_g: f64,
    /// Add the field that cancels the probe light shift.
    #[serde(default = "default_true")]
    pub compensation: bool,
}

impl Default for Field {
    fn default() -> Self {
        Self {
            b_x_mg: 0.0,
            b_y_mg: 0.0,
            b_z_mg: 0.0,
            lande_g: RB87_F1_LANDE_G,
            compensation: true,
        }
    }
}

fn default_lande_g() -> f64 {
    RB87_F1_LANDE_G
}

fn default_true() -> bool {
    true
}

/// How the coupling vector and photon flux are specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum Probe {
    /// Phases per photon and flux given outright.
    Direct {
        g_plus: f64,
        g_zero: f64,
        g_minus: f64,
        flux_per_s: f64,
    },
    /// Everything from the beam: Rabi frequency from the saturation
    /// parameter, flux through a disc of the given waist.
    Optical {
        intensity_sat: f64,
        #[serde(rename = "detuning2_MHz")]
        detuning2_mhz: f64,
        beam_waist_um: f64,
        interaction_time_us: f64,
    },
    /// Detuning fixes the shape of `G`, the flux is held fixed and the
    /// magnitude of `G` grows linearly with intensity so that the
    /// measurement-strength ratio is `ratio_per_isat * intensity_sat`.
    Ratio {
        intensity_sat: f64,
        ratio_per_isat: f64,
        #[serde(rename = "detuning2_MHz")]
        detuning2_mhz: f64,
        flux_per_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub kind: EngineKind,
    #[serde(default)]
    pub coupling: CouplingKind,
    pub total_time_ms: f64,
    pub dt_us: f64,
    pub sample_interval_us: f64,
    #[serde(rename = "band_lo_Hz", default, skip_serializing_if = "Option::is_none")]
    pub band_lo_hz: Option<f64>,
    #[serde(rename = "band_hi_Hz", default, skip_serializing_if = "Option::is_none")]
    pub band_hi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_cycles: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_cap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Jumps,
    Sme,
    Moments,
}

impl From<EngineKind> for Engine {
    fn from(k: EngineKind) -> Self {
        match k {
            EngineKind::Jumps => Engine::Jumps,
            EngineKind::Sme => Engine::Sme,
            EngineKind::Moments => Engine::Moments,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    #[default]
    Full,
    Linearized,
}

/// Overrides of the built-in atomic and physical constants.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    #[serde(rename = "bohr_Hz_per_G", default, skip_serializing_if = "Option::is_none")]
    pub bohr_hz_per_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1_wavelength_nm: Option<f64>,
    #[serde(rename = "hyperfine_splitting_MHz", default, skip_serializing_if = "Option::is_none")]
    pub hyperfine_splitting_mhz: Option<f64>,
    #[serde(rename = "saturation_intensity_mW_cm2", default, skip_serializing_if = "Option::is_none")]
    pub saturation_intensity_mw_cm2: Option<f64>,
    #[serde(rename = "linewidth_MHz", default, skip_serializing_if = "Option::is_none")]
    pub linewidth_mhz: Option<f64>,
}

impl ConstantsSection {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn resolve(&self) -> Constants {
        let mut k = Constants::default();
        if let Some(v) = self.bohr_hz_per_g {
            k.bohr_hz_per_gauss = v;
        }
        if let Some(v) = self.d1_wavelength_nm {
            k.d1_wavelength_m = v * 1e-9;
        }
        if let Some(v) = self.hyperfine_splitting_mhz {
            k.hyperfine_splitting_hz = v * 1e6;
        }
        if let Some(v) = self.saturation_intensity_mw_cm2 {
            // 1 mW/cm^2 = 10 W/m^2
            k.saturation_intensity_w_m2 = v * 10.0;
        }
        if let Some(v) = self.linewidth_mhz {
            k.linewidth_rad_s = 2.0 * std::f64::consts::PI * v * 1e6;
        }
        k
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn sha256(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    /// First eight bytes of [`RunConfig::sha256`], stamped into records.
    pub fn short_hash(&self) -> u64 {
        let d = Sha256::digest(self.to_toml().as_bytes());
        u64::from_be_bytes(d[..8].try_into().expect("digest is 32 bytes"))
    }

    /// Resolve units and probe mode into the engine-level configuration.
    pub fn to_experiment(&self) -> Result<ExperimentConfig> {
        let constants = self.constants.resolve();
        let field = FieldParams {
            b_tesla: [self.field.b_x_mg, self.field.b_y_mg, self.field.b_z_mg].map(|b| b * TESLA_PER_MILLIGAUSS),
            lande_g: self.field.lande_g,
        };
        let (coupling, flux) = self.probe.resolve(&field, &constants)?;
        let e = &self.engine;
        let band_hz = match (e.band_lo_hz, e.band_hi_hz) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => return Err(Error::InvalidConfig("band_lo_Hz and band_hi_Hz go together".into())),
        };
        let mut estimator = EstimatorSettings::default();
        if let Some(t) = e.lock_threshold {
            estimator.lock_threshold = t;
        }
        if let Some(c) = e.min_cycles {
            estimator.min_cycles = c;
        }
        Ok(ExperimentConfig {
            n: self.atoms.n,
            initial: self.atoms.initial.amplitudes(),
            field,
            coupling,
            flux,
            mode: match e.coupling {
                CouplingKind::Full => CouplingMode::Full,
                CouplingKind::Linearized => CouplingMode::Linearized,
            },
            engine: e.kind.into(),
            total_time: e.total_time_ms * 1e-3,
            dt: e.dt_us * 1e-6,
            sample_interval: e.sample_interval_us * 1e-6,
            compensation: self.field.compensation,
            band_hz,
            estimator,
            constants,
            exact_cap: e.exact_cap.unwrap_or(EXACT_ENGINE_CAP),
            step_budget: e.step_budget.unwrap_or(DEFAULT_STEP_BUDGET),
        })
    }
}

impl Probe {
    /// Coupling vector and photon flux (1/s).
    pub fn resolve(&self, field: &FieldParams, constants: &Constants) -> Result<(CouplingVector, f64)> {
        match *self {
            Probe::Direct {
                g_plus,
                g_zero,
                g_minus,
                flux_per_s,
            } => Ok((CouplingVector::new(g_plus, g_zero, g_minus), flux_per_s)),
            Probe::Optical {
                intensity_sat,
                detuning2_mhz,
                beam_waist_um,
                interaction_time_us,
            } => {
                let params = OpticalParams {
                    rabi: RabiInput::IntensityRatio(intensity_sat),
                    detuning2_hz: detuning2_mhz * 1e6,
                    interaction_time_s: interaction_time_us * 1e-6,
                };
                let g = coupling_vector(&params, constants)?;
                let f = flux_from_intensity(intensity_sat, beam_waist_um * 1e-6, constants.d1_wavelength_m, constants)?;
                Ok((g, f))
            }
            Probe::Ratio {
                intensity_sat,
                ratio_per_isat,
                detuning2_mhz,
                flux_per_s,
            } => {
                if !(flux_per_s > 0.0) {
                    return Err(Error::InvalidConfig("ratio mode needs flux_per_s > 0".into()));
                }
                let nu = larmor_frequency(field, constants);
                if !(nu > 0.0) {
                    return Err(Error::InvalidConfig("ratio mode needs a nonzero field".into()));
                }
                let shape = coupling_shape(detuning2_mhz * 1e6, constants)?;
                let unit = CouplingVector::new(shape[0], shape[1], shape[2]);
                let alpha_unit = affine_decomposition(&unit).linear.abs();
                // red detuning gives negative phases, as in the optical mode
                let sign = if detuning2_mhz < 0.0 { -1.0 } else { 1.0 };
                let ratio = intensity_sat * ratio_per_isat;
                let scale = sign * ratio * nu / (flux_per_s * alpha_unit);
                Ok((unit.scaled(scale), flux_per_s))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIRECT: &str = r#"
        [atoms]
        n = 4
        [field]
        b_y_mG = 1.0
        [probe]
        mode = "direct"
        g_plus = 0.01
        g_zero = 0.0
        g_minus = -0.01
        flux_per_s = 1e4
        [engine]
        kind = "sme"
        total_time_ms = 10
        dt_us = 1
        sample_interval_us = 10
    "#;

    #[test]
    fn direct_config_resolves_units() {
        let c = RunConfig::from_toml(DIRECT).unwrap();
        let e = c.to_experiment().unwrap();
        assert_eq!(e.n, 4);
        assert_eq!(e.engine, Engine::Sme);
        assert!((e.field.b_tesla[1] - 1e-7).abs() < 1e-20);
        assert!((e.total_time - 0.01).abs() < 1e-15);
        assert!((e.dt - 1e-6).abs() < 1e-20);
        assert!((e.larmor_hz() - 699.812).abs() < 1e-3);
        assert!(e.compensation);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = DIRECT.replace("total_time_ms", "total_time_s");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = DIRECT.replace("b_y_mG", "b_y_G");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = DIRECT.replace("flux_per_s = 1e4", "flux_per_s = 1e4\nwaist = 3");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = format!("{DIRECT}\n[extra]\nx = 1\n");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn ratio_mode_hits_the_requested_ratio() {
        let text = DIRECT.replace(
            "mode = \"direct\"\n        g_plus = 0.01\n        g_zero = 0.0\n        g_minus = -0.01",
            "mode = \"ratio\"\n        intensity_sat = 0.01\n        ratio_per_isat = 10\n        detuning2_MHz = -150",
        );
        let e = RunConfig::from_toml(&text).unwrap().to_experiment().unwrap();
        assert!((e.measurement_ratio().unwrap() - 0.1).abs() < 1e-12);
        // red detuning: all phases negative, shape (6, 3 + d, 1 + d)
        assert!(e.coupling.plus < 0.0 && e.coupling.zero < 0.0 && e.coupling.minus < 0.0);
        assert!((e.coupling.zero / e.coupling.plus - 2.77426 / 6.0).abs() < 1e-5);
    }

    #[test]
    fn toml_roundtrip_and_hash_are_stable() {
        let c = RunConfig::from_toml(DIRECT).unwrap();
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.sha256(), again.sha256());
        assert_eq!(c.sha256().len(), 64);
        let mut other = c.clone();
        other.atoms.n = 5;
        assert_ne!(c.sha256(), other.sha256());
    }

    #[test]
    fn band_keys_come_in_pairs() {
        let text = DIRECT.replace("sample_interval_us = 10", "sample_interval_us = 10\n        band_lo_Hz = 300");
        let c = RunConfig::from_toml(&text).unwrap();
        assert!(c.to_experiment().is_err());
    }
}

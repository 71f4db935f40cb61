//! Dispersive coupling of circularly polarized D1 light to the F = 1 manifold
//! of 87Rb, and the scalar figures derived from it.
//!
//! The light shift per photon is `g . N` with
//!
//! ```text
//! g = Omega^2 / (48 Delta2) * (6, 3 + delta, 1 + delta),   delta = Delta2 / Delta1,
//! ```
//!
//! where `Delta1 = Delta2 + 814.5 MHz` and the spin basis is along the probe.
//! The single-pass phase is `G = tau g`.
//!
//! Every `G . N` decomposes exactly into an atom-number offset, a linear
//! `Fz` part and a quadratic part (see [`affine_decomposition`]). The linear
//! coefficient `alpha` is what the measurement-strength ratio and the
//! compensation field refer to.

use alloc::string::ToString;
use core::f64::consts::PI;

use num_traits::Float;

use crate::fock::{build_operator, OperatorKind, SectorOperator};
use crate::{Error, Result, C64};

/// Physical constants, overridable from configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Bohr magneton over Planck's constant, Hz per Gauss (CODATA 2018).
    pub bohr_hz_per_gauss: f64,
    /// D1 wavelength of 87Rb, metres (Steck, Rubidium 87 D Line Data).
    pub d1_wavelength_m: f64,
    /// Excited-state hyperfine splitting F' = 1 to F' = 2, Hz.
    pub hyperfine_splitting_hz: f64,
    /// Saturation intensity, W/m^2 (1.49 mW/cm^2; Steck, D1 pi-polarized).
    pub saturation_intensity_w_m2: f64,
    /// Natural linewidth as angular frequency, rad/s (2 pi 5.75 MHz; Steck).
    pub linewidth_rad_s: f64,
    /// Planck constant, J s (exact SI).
    pub planck_j_s: f64,
    /// Speed of light, m/s (exact SI).
    pub speed_of_light_m_s: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            bohr_hz_per_gauss: 1.399624e6,
            d1_wavelength_m: 794.979e-9,
            hyperfine_splitting_hz: 814.5e6,
            saturation_intensity_w_m2: 14.9,
            linewidth_rad_s: 2.0 * PI * 5.75e6,
            planck_j_s: 6.626_070_15e-34,
            speed_of_light_m_s: 299_792_458.0,
        }
    }
}

impl Constants {
    /// `mu_B / h` in Hz per Tesla.
    pub fn bohr_hz_per_tesla(&self) -> f64 {
        self.bohr_hz_per_gauss * 1e4
    }

    /// `mu_B / hbar` in rad/s per Tesla.
    pub fn bohr_rad_s_per_tesla(&self) -> f64 {
        2.0 * PI * self.bohr_hz_per_tesla()
    }
}

/// Probe strength given either as a single-photon Rabi frequency or through
/// the saturation parameter via `Omega^2 = (Gamma^2 / 2) I / I_sat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RabiInput {
    RabiFrequency(f64),
    IntensityRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    pub rabi: RabiInput,
    /// Detuning from F = 1 -> F' = 2, Hz, signed.
    pub detuning2_hz: f64,
    /// Single-pass interaction time, s.
    pub interaction_time_s: f64,
}

/// Dimensionless phase per photon on each Zeeman mode, ordered `(+, 0, -)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CouplingVector {
    pub plus: f64,
    pub zero: f64,
    pub minus: f64,
}

/// Above this value of `n max|G_i|` the linearized signal is unreliable.
pub const LINEAR_VALIDITY_THRESHOLD: f64 = 0.1;

impl CouplingVector {
    pub const ZERO: Self = Self {
        plus: 0.0,
        zero: 0.0,
        minus: 0.0,
    };

    pub fn new(plus: f64, zero: f64, minus: f64) -> Self {
        Self { plus, zero, minus }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.plus, self.zero, self.minus]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.plus * s, self.zero * s, self.minus * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.plus.abs().max(self.zero.abs()).max(self.minus.abs())
    }

    /// `G . j` for occupations `j`.
    pub fn dot_occupations(&self, plus: u32, zero: u32, minus: u32) -> f64 {
        self.plus * plus as f64 + self.zero * zero as f64 + self.minus * minus as f64
    }

    pub fn dot(&self, p: &[f64; 3]) -> f64 {
        self.plus * p[0] + self.zero * p[1] + self.minus * p[2]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|x| x.is_finite())
    }

    /// True when `n max|G_i| <= 0.1`.
    pub fn linear_regime(&self, n: f64) -> bool {
        n * self.max_abs() <= LINEAR_VALIDITY_THRESHOLD
    }

    /// `G . N` as a sector operator.
    pub fn number_operator(&self, n: u32) -> Result<SectorOperator> {
        let np = build_operator(OperatorKind::NPlus, n)?;
        let n0 = build_operator(OperatorKind::NZero, n)?;
        let nm = build_operator(OperatorKind::NMinus, n)?;
        Ok(&(&np.scale(C64::new(self.plus, 0.0)) + &n0.scale(C64::new(self.zero, 0.0)))
            + &nm.scale(C64::new(self.minus, 0.0)))
    }
}

/// `delta = Delta2 / (Delta2 + 814.5 MHz)`.
pub fn detuning_ratio(detuning2_hz: f64, constants: &Constants) -> Result<f64> {
    let delta1 = detuning2_hz + constants.hyperfine_splitting_hz;
    if delta1 == 0.0 {
        return Err(Error::InvalidParameter(
            "probe is resonant with F = 1 -> F' = 1".to_string(),
        ));
    }
    Ok(detuning2_hz / delta1)
}

/// Shape `(6, 3 + delta, 1 + delta)` of the coupling at a given detuning.
pub fn coupling_shape(detuning2_hz: f64, constants: &Constants) -> Result<[f64; 3]> {
    let delta = detuning_ratio(detuning2_hz, constants)?;
    Ok([6.0, 3.0 + delta, 1.0 + delta])
}

/// Single-photon Rabi frequency in rad/s.
pub fn rabi_frequency(input: RabiInput, constants: &Constants) -> Result<f64> {
    match input {
        RabiInput::RabiFrequency(omega) => Ok(omega),
        RabiInput::IntensityRatio(s) if s >= 0.0 => {
            Ok(constants.linewidth_rad_s * (s / 2.0).sqrt())
        }
        RabiInput::IntensityRatio(_) => Err(Error::InvalidParameter(
            "intensity ratio must be nonnegative".to_string(),
        )),
    }
}

/// `G = tau Omega^2 / (48 Delta2) (6, 3 + delta, 1 + delta)` with the detuning
/// converted to rad/s.
pub fn coupling_vector(params: &OpticalParams, constants: &Constants) -> Result<CouplingVector> {
    if params.detuning2_hz == 0.0 {
        return Err(Error::InvalidParameter(
            "probe is resonant with F = 1 -> F' = 2".to_string(),
        ));
    }
    let shape = coupling_shape(params.detuning2_hz, constants)?;
    let omega = rabi_frequency(params.rabi, constants)?;
    let prefactor = params.interaction_time_s * omega * omega
        / (48.0 * 2.0 * PI * params.detuning2_hz);
    Ok(CouplingVector::new(
        prefactor * shape[0],
        prefactor * shape[1],
        prefactor * shape[2],
    ))
}

/// `G+ = -G- = g`, `G0 = 0`, so that `G . N = g Fz`.
pub fn qnd_coupling(g: f64) -> CouplingVector {
    CouplingVector::new(g, 0.0, -g)
}

/// `G . N = offset (N+ + N0 + N-) + linear Fz + quadratic (N+ + N-)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCoupling {
    pub offset: f64,
    pub linear: f64,
    pub quadratic: f64,
}

impl AffineCoupling {
    /// The operator `offset n + linear Fz + quadratic (N+ + N-)`.
    pub fn reconstruct(&self, n: u32) -> Result<SectorOperator> {
        let np = build_operator(OperatorKind::NPlus, n)?;
        let n0 = build_operator(OperatorKind::NZero, n)?;
        let nm = build_operator(OperatorKind::NMinus, n)?;
        let fz = build_operator(OperatorKind::Fz, n)?;
        let total = &(&np + &n0) + &nm;
        let quad = &np + &nm;
        let r = |x: f64| C64::new(x, 0.0);
        Ok(&(&total.scale(r(self.offset)) + &fz.scale(r(self.linear)))
            + &quad.scale(r(self.quadratic)))
    }
}

pub fn affine_decomposition(g: &CouplingVector) -> AffineCoupling {
    AffineCoupling {
        offset: g.zero,
        linear: (g.plus - g.minus) / 2.0,
        quadratic: (g.plus - 2.0 * g.zero + g.minus) / 2.0,
    }
}

/// `|alpha| f / nu_L`, the weak/strong measurement figure of merit.
pub fn measurement_strength(g: &CouplingVector, flux: f64, larmor_hz: f64) -> Result<f64> {
    if !(larmor_hz > 0.0) {
        return Err(Error::InvalidParameter(
            "measurement strength needs a positive Larmor frequency".to_string(),
        ));
    }
    Ok(affine_decomposition(g).linear.abs() * flux / larmor_hz)
}

/// Applied field and Lande factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    pub b_tesla: [f64; 3],
    pub lande_g: f64,
}

impl FieldParams {
    pub fn magnitude(&self) -> f64 {
        self.b_tesla.iter().map(|b| b * b).sum::<f64>().sqrt()
    }

    /// `g_L mu_B B / hbar` in rad/s.
    pub fn angular_velocity(&self, constants: &Constants) -> [f64; 3] {
        let k = self.lande_g * constants.bohr_rad_s_per_tesla();
        self.b_tesla.map(|b| k * b)
    }
}

/// 87Rb F = 1 Lande factor.
pub const RB87_F1_LANDE_G: f64 = -0.5;

/// `nu_L = |g_L| mu_B |B| / h`.
pub fn larmor_frequency(field: &FieldParams, constants: &Constants) -> f64 {
    field.lande_g.abs() * constants.bohr_hz_per_tesla() * field.magnitude()
}

/// Photon flux `I A / (h c / lambda)` of a beam with saturation parameter
/// `intensity_ratio` and waist `w`, taking `A = pi w^2`.
pub fn flux_from_intensity(
    intensity_ratio: f64,
    beam_waist_m: f64,
    wavelength_m: f64,
    constants: &Constants,
) -> Result<f64> {
    if intensity_ratio < 0.0 || !(beam_waist_m > 0.0) || !(wavelength_m > 0.0) {
        return Err(Error::InvalidParameter(
            "intensity, waist and wavelength must be positive".to_string(),
        ));
    }
    let intensity = intensity_ratio * constants.saturation_intensity_w_m2;
    let area = PI * beam_waist_m * beam_waist_m;
    let photon_energy = constants.planck_j_s * constants.speed_of_light_m_s / wavelength_m;
    Ok(intensity * area / photon_energy)
}

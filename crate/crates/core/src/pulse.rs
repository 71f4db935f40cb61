//! Photocount statistics of one coherent pulse through the condensate,
//! detected by a balanced homodyne pair.
//!
//! Conditioned on the occupation `j`, the two ports receive independent
//! Poisson streams with means `(|A0|^2 / 2)(1 +/- sin G.j)`. The exact joint
//! distribution is the `|psi_j|^2`-weighted mixture of those products; all
//! factorials are handled in log space.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::coupling::{affine_decomposition, CouplingVector};
use crate::fock::{sector_basis, FockState, SectorEnsemble};
use crate::linalg::ln_factorial;
use crate::{Error, Result};

/// Largest sector for which exact sector sums are evaluated.
pub const EXACT_SUM_CAP: u32 = 40;

/// Joint distribution of `(C+, C-)` on `0..=max_count` for each port.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotocountPmf {
    pub max_count: u32,
    probs: Vec<f64>,
}

impl PhotocountPmf {
    fn zeros(max_count: u32) -> Self {
        let side = max_count as usize + 1;
        Self {
            max_count,
            probs: vec![0.0; side * side],
        }
    }

    fn side(&self) -> usize {
        self.max_count as usize + 1
    }

    pub fn get(&self, c_plus: u32, c_minus: u32) -> f64 {
        if c_plus > self.max_count || c_minus > self.max_count {
            return 0.0;
        }
        self.probs[c_plus as usize * self.side() + c_minus as usize]
    }

    /// `(c_plus, c_minus, probability)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        let side = self.side();
        self.probs
            .iter()
            .enumerate()
            .map(move |(k, p)| ((k / side) as u32, (k % side) as u32, *p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean_counts(&self) -> (f64, f64) {
        self.entries().fold((0.0, 0.0), |(a, b), (cp, cm, p)| {
            (a + p * cp as f64, b + p * cm as f64)
        })
    }

    pub fn mean_difference(&self) -> f64 {
        let (a, b) = self.mean_counts();
        a - b
    }

    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.probs.iter_mut().zip(&other.probs) {
            *a += w * b;
        }
    }
}

/// Per-port count window `mean + 8 sqrt(mean)` with the port mean bounded by
/// `|A0|^2`, plus a margin for small pulses.
pub fn default_count_window(amplitude_sq: f64) -> u32 {
    (amplitude_sq + 8.0 * amplitude_sq.sqrt() + 12.0).ceil() as u32
}

fn check_cap(n: u32) -> Result<()> {
    if n > EXACT_SUM_CAP {
        return Err(Error::SectorCap {
            n,
            cap: EXACT_SUM_CAP,
            what: "exact photocount sum (use the trajectory engines)",
        });
    }
    Ok(())
}

fn check_amplitude(amplitude_sq: f64) -> Result<()> {
    if !(amplitude_sq >= 0.0) || !amplitude_sq.is_finite() {
        return Err(Error::InvalidParameter(
            "mean photon number must be finite and nonnegative".to_string(),
        ));
    }
    Ok(())
}

fn ln_poisson(k: u32, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_factorial(k as u64)
}

/// `(|psi_j|^2, sin G.j)` for every occupation of the state's sector.
fn sector_terms(g: &CouplingVector, state: &FockState) -> Vec<(f64, f64)> {
    sector_basis(state.n())
        .iter()
        .zip(state.probabilities())
        .map(|(j, w)| (w, g.dot_occupations(j.plus, j.zero, j.minus).sin()))
        .collect()
}

/// Exact `P(C+, C-)` for a fixed-`n` state.
pub fn joint_photocount_pmf(
    amplitude_sq: f64,
    g: &CouplingVector,
    state: &FockState,
    max_count: u32,
) -> Result<PhotocountPmf> {
    check_amplitude(amplitude_sq)?;
    check_cap(state.n())?;
    let half = amplitude_sq / 2.0;
    let terms = sector_terms(g, state);
    let mut pmf = PhotocountPmf::zeros(max_count);
    let side = pmf.side();
    let mut ln_plus = vec![0.0; side];
    let mut ln_minus = vec![0.0; side];
    for (w, s) in terms {
        if w == 0.0 {
            continue;
        }
        let ln_w = w.ln();
        for k in 0..side {
            ln_plus[k] = ln_poisson(k as u32, half * (1.0 + s));
            ln_minus[k] = ln_poisson(k as u32, half * (1.0 - s));
        }
        for a in 0..side {
            if ln_plus[a] == f64::NEG_INFINITY {
                continue;
            }
            for b in 0..side {
                pmf.probs[a * side + b] += (ln_w + ln_plus[a] + ln_minus[b]).exp();
            }
        }
    }
    Ok(pmf)
}

/// `<C+> - <C-> = |A0|^2 sum_j |psi_j|^2 sin(G.j)`, without count truncation.
pub fn mean_count_difference_exact(
    amplitude_sq: f64,
    g: &CouplingVector,
    state: &FockState,
) -> Result<f64> {
    check_amplitude(amplitude_sq)?;
    check_cap(state.n())?;
    Ok(amplitude_sq
        * sector_terms(g, state)
            .iter()
            .map(|(w, s)| w * s)
            .sum::<f64>())
}

/// Small-phase signal `|A0|^2 n G.p` and its split into the offset, `<Fz>`
/// and `<Fz^2>` contributions of the single-atom moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSignal {
    pub mean_difference: f64,
    pub offset_term: f64,
    pub fz_term: f64,
    pub fz2_term: f64,
    /// `n max|G_i| <= 0.1`.
    pub in_linear_regime: bool,
}

/// `n` may be a mean atom number: for a Poisson mixture the signal is the
/// fixed-`n` expression at `n_bar`.
pub fn mean_count_difference_linear(
    amplitude_sq: f64,
    g: &CouplingVector,
    n: f64,
    populations: &[f64; 3],
) -> LinearSignal {
    let affine = affine_decomposition(g);
    let fz = populations[0] - populations[2];
    let fz2 = populations[0] + populations[2];
    let scale = amplitude_sq * n;
    let offset_term = scale * affine.offset;
    let fz_term = scale * affine.linear * fz;
    let fz2_term = scale * affine.quadratic * fz2;
    LinearSignal {
        mean_difference: scale * g.dot(populations),
        offset_term,
        fz_term,
        fz2_term,
        in_linear_regime: g.linear_regime(n),
    }
}

/// Poisson-weighted mixture of fixed-`n` distributions.
pub fn pmf_with_poisson_atoms(
    amplitude_sq: f64,
    g: &CouplingVector,
    ensemble: &SectorEnsemble,
    max_count: u32,
) -> Result<PhotocountPmf> {
    let mut out = PhotocountPmf::zeros(max_count);
    for (w, state) in &ensemble.members {
        let part = joint_photocount_pmf(amplitude_sq, g, state, max_count)?;
        out.add_scaled(&part, *w);
    }
    Ok(out)
}

/// Mixture mean difference, summed sector by sector.
pub fn mean_count_difference_mixture(
    amplitude_sq: f64,
    g: &CouplingVector,
    ensemble: &SectorEnsemble,
) -> Result<f64> {
    ensemble.members.iter().try_fold(0.0, |acc, (w, s)| {
        Ok(acc + w * mean_count_difference_exact(amplitude_sq, g, s)?)
    })
}

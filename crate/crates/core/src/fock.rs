//! Exact states and operators for `n` spin-1 bosons in a single spatial mode.
//!
//! The `|j| = n` sector is spanned by occupation triples `(j+, j0, j-)`. Basis
//! order is lexicographically descending in `(j+, j0)`:
//!
//! ```text
//! n = 2:  (2,0,0) (1,1,0) (1,0,1) (0,2,0) (0,1,1) (0,0,2)
//! ```
//!
//! Trajectory files index this order, so it must not change.
//!
//! Spin operators follow the Schrodinger-field construction
//! `F+ = sqrt(2) (a+^dag a0 + a0^dag a-)`, `Fx = (F+ + F-)/2`,
//! `Fy = (F+ - F-)/(2i)`, `Fz = N+ - N-`.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::linalg;
use crate::{Error, Result, C64};

/// Tolerance on `sum |c_i|^2 = 1` for a single-atom input triple.
pub const INPUT_NORM_TOLERANCE: f64 = 1e-9;

/// Number of occupation triples with `j+ + j0 + j- = n`.
pub fn sector_dimension(n: u32) -> usize {
    let n = n as usize;
    (n + 1) * (n + 2) / 2
}

/// Atoms per Zeeman mode `m = +1, 0, -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OccupationTriple {
    pub plus: u32,
    pub zero: u32,
    pub minus: u32,
}

impl OccupationTriple {
    pub fn total(&self) -> u32 {
        self.plus + self.zero + self.minus
    }

    /// Eigenvalue of `Fz`.
    pub fn magnetization(&self) -> i64 {
        self.plus as i64 - self.minus as i64
    }

    fn as_array(&self) -> [u32; 3] {
        [self.plus, self.zero, self.minus]
    }
}

/// Index of `j` in the frozen basis order of its sector.
pub fn basis_index(j: OccupationTriple) -> usize {
    let n = j.total() as usize;
    let a = n - j.plus as usize;
    a * (a + 1) / 2 + (a - j.zero as usize)
}

/// All triples of the sector in basis order.
pub fn sector_basis(n: u32) -> Vec<OccupationTriple> {
    let mut out = Vec::with_capacity(sector_dimension(n));
    for plus in (0..=n).rev() {
        for zero in (0..=(n - plus)).rev() {
            out.push(OccupationTriple {
                plus,
                zero,
                minus: n - plus - zero,
            });
        }
    }
    out
}

/// Pure state of the `n`-atom sector.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    n: u32,
    amplitudes: DVector<C64>,
}

impl FockState {
    pub fn from_amplitudes(n: u32, amplitudes: DVector<C64>) -> Result<Self> {
        let expected = sector_dimension(n);
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: amplitudes.len(),
            });
        }
        let mut s = Self { n, amplitudes };
        s.normalize();
        Ok(s)
    }

    /// The Fock state `|j>` itself.
    pub fn basis_state(j: OccupationTriple) -> Self {
        let n = j.total();
        let mut amplitudes = DVector::zeros(sector_dimension(n));
        amplitudes[basis_index(j)] = C64::new(1.0, 0.0);
        Self { n, amplitudes }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amplitudes
    }

    pub fn amplitude(&self, j: OccupationTriple) -> C64 {
        if j.total() != self.n {
            return C64::new(0.0, 0.0);
        }
        self.amplitudes[basis_index(j)]
    }

    /// Occupation probabilities `|psi_j|^2` in basis order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm and returns the squared norm beforehand.
    pub fn normalize(&mut self) -> f64 {
        let ns = self.norm_sqr();
        if ns > 0.0 {
            self.amplitudes /= C64::new(ns.sqrt(), 0.0);
        }
        ns
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            n: self.n,
            entries: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    pub fn expectation(&self, op: &SectorOperator) -> Result<C64> {
        check_dim(self.dim(), op.dim())?;
        let phi = &op.entries * &self.amplitudes;
        Ok(self.amplitudes.dotc(&phi))
    }
}

/// `|Psi_n> = (c . a^dag)^n |0> / sqrt(n!)`: every atom in the single-atom
/// state `c = (c+, c0, c-)`. The amplitude on `j` is `sqrt(n!/j!) c^j`.
pub fn build_product_state(c: [C64; 3], n: u32) -> Result<FockState> {
    check_single_atom(&c)?;
    let ln_n_fact = linalg::ln_factorial(n as u64);
    let basis = sector_basis(n);
    let mut amplitudes = DVector::<C64>::zeros(basis.len());
    for (k, j) in basis.iter().enumerate() {
        let mut ln_mag = 0.5 * ln_n_fact;
        let mut phase = 0.0;
        let mut vanishes = false;
        for (ci, ji) in c.iter().zip(j.as_array()) {
            if ji == 0 {
                continue;
            }
            let mag = ci.norm();
            if mag == 0.0 {
                vanishes = true;
                break;
            }
            ln_mag += ji as f64 * mag.ln() - 0.5 * linalg::ln_factorial(ji as u64);
            phase += ji as f64 * ci.arg();
        }
        if !vanishes {
            amplitudes[k] = C64::from_polar(ln_mag.exp(), phase);
        }
    }
    FockState::from_amplitudes(n, amplitudes)
}

pub(crate) fn check_single_atom(c: &[C64; 3]) -> Result<()> {
    let norm: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    if (norm - 1.0).abs() > INPUT_NORM_TOLERANCE || !norm.is_finite() {
        return Err(Error::Unnormalized(norm));
    }
    Ok(())
}

/// Single-atom states used as initial conditions.
pub mod single_atom {
    use super::*;

    /// Stretched state along +x: `(1/2, 1/sqrt 2, 1/2)`.
    pub fn x_polarized() -> [C64; 3] {
        [
            C64::new(0.5, 0.0),
            C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0),
            C64::new(0.5, 0.0),
        ]
    }

    /// Stretched state along +y: `(1/2, i/sqrt 2, -1/2)`.
    pub fn y_polarized() -> [C64; 3] {
        [
            C64::new(0.5, 0.0),
            C64::new(0.0, core::f64::consts::FRAC_1_SQRT_2),
            C64::new(-0.5, 0.0),
        ]
    }

    pub fn z_stretched() -> [C64; 3] {
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]
    }

    pub fn m_zero() -> [C64; 3] {
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
    }

    /// Mean spin and symmetrized covariance of one atom in state `c`.
    pub fn moments(c: &[C64; 3]) -> SpinMoments {
        let ops = SpinOperators::new(1);
        let psi = FockState {
            n: 1,
            amplitudes: DVector::from_column_slice(c),
        };
        ops.moments_pure(&psi)
    }
}

/// Mixed state of the `n`-atom sector.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: u32,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_entries(n: u32, entries: DMatrix<C64>) -> Result<Self> {
        let expected = sector_dimension(n);
        if entries.nrows() != expected || entries.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: entries.nrows(),
            });
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.entries.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_hermitian_eigenvalue(&self.entries)
    }

    /// Divides by the real trace and returns it.
    pub fn normalize(&mut self) -> f64 {
        let tr = self.trace().re;
        if tr != 0.0 {
            self.entries /= C64::new(tr, 0.0);
        }
        tr
    }

    pub fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            self.entries[(i, i)].im = 0.0;
            for j in (i + 1)..n {
                let avg = (self.entries[(i, j)] + self.entries[(j, i)].conj()) * 0.5;
                self.entries[(i, j)] = avg;
                self.entries[(j, i)] = avg.conj();
            }
        }
    }

    pub fn expectation(&self, op: &SectorOperator) -> Result<C64> {
        expectation(self, op)
    }
}

/// `tr(rho op)`.
pub fn expectation(rho: &DensityMatrix, op: &SectorOperator) -> Result<C64> {
    check_dim(rho.dim(), op.dim())?;
    let n = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += rho.entries[(i, j)] * op.entries[(j, i)];
        }
    }
    Ok(acc)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    NPlus,
    NZero,
    NMinus,
    Fx,
    Fy,
    Fz,
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N+" | "n_plus" => Ok(Self::NPlus),
            "N0" | "n_zero" => Ok(Self::NZero),
            "N-" | "n_minus" => Ok(Self::NMinus),
            "Fx" | "fx" => Ok(Self::Fx),
            "Fy" | "fy" => Ok(Self::Fy),
            "Fz" | "fz" => Ok(Self::Fz),
            other => Err(Error::UnknownOperator(other.to_string())),
        }
    }
}

/// Operator restricted to one `|j| = n` sector, dense in the occupation basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorOperator {
    n: u32,
    entries: DMatrix<C64>,
}

impl SectorOperator {
    pub fn from_entries(n: u32, entries: DMatrix<C64>) -> Result<Self> {
        let expected = sector_dimension(n);
        if entries.nrows() != expected || entries.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: entries.nrows(),
            });
        }
        Ok(Self { n, entries })
    }

    pub fn identity(n: u32) -> Self {
        let d = sector_dimension(n);
        Self {
            n,
            entries: DMatrix::identity(d, d),
        }
    }

    /// Real diagonal operator with the given eigenvalues in basis order.
    pub fn diagonal(n: u32, values: &[f64]) -> Result<Self> {
        let d = sector_dimension(n);
        check_dim(d, values.len())?;
        let mut entries = DMatrix::zeros(d, d);
        for (i, v) in values.iter().enumerate() {
            entries[(i, i)] = C64::new(*v, 0.0);
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n: self.n,
            entries: self.entries.adjoint(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_error(&self.entries) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let d = self.dim();
        let prod = self.entries.adjoint() * &self.entries;
        linalg::max_abs_diff(&prod, &DMatrix::identity(d, d)) <= tol
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            entries: &self.entries * &other.entries - &other.entries * &self.entries,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs_diff(&self.entries, &other.entries)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            n: self.n,
            entries: &self.entries * s,
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            entries: &self.entries * &other.entries,
        }
    }
}

impl core::ops::Add for &SectorOperator {
    type Output = SectorOperator;

    fn add(self, rhs: Self) -> SectorOperator {
        SectorOperator {
            n: self.n,
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl core::ops::Sub for &SectorOperator {
    type Output = SectorOperator;

    fn sub(self, rhs: Self) -> SectorOperator {
        SectorOperator {
            n: self.n,
            entries: &self.entries - &rhs.entries,
        }
    }
}

/// Number or collective spin operator on the `n`-atom sector.
pub fn build_operator(kind: OperatorKind, n: u32) -> Result<SectorOperator> {
    if n == 0 {
        return Err(Error::InvalidParameter("operators need n >= 1".to_string()));
    }
    let basis = sector_basis(n);
    let d = basis.len();
    let mut m = DMatrix::<C64>::zeros(d, d);
    match kind {
        OperatorKind::NPlus | OperatorKind::NZero | OperatorKind::NMinus | OperatorKind::Fz => {
            for (i, j) in basis.iter().enumerate() {
                let v = match kind {
                    OperatorKind::NPlus => j.plus as f64,
                    OperatorKind::NZero => j.zero as f64,
                    OperatorKind::NMinus => j.minus as f64,
                    _ => j.magnetization() as f64,
                };
                m[(i, i)] = C64::new(v, 0.0);
            }
        }
        OperatorKind::Fx | OperatorKind::Fy => {
            let raise = raising_operator(&basis);
            let lower = raise.adjoint();
            m = match kind {
                OperatorKind::Fx => (&raise + &lower) * C64::new(0.5, 0.0),
                _ => (&raise - &lower) * C64::new(0.0, -0.5),
            };
        }
    }
    Ok(SectorOperator { n, entries: m })
}

/// `F+ = sqrt(2) (a+^dag a0 + a0^dag a-)`.
fn raising_operator(basis: &[OccupationTriple]) -> DMatrix<C64> {
    let d = basis.len();
    let mut m = DMatrix::<C64>::zeros(d, d);
    let s2 = core::f64::consts::SQRT_2;
    for (col, j) in basis.iter().enumerate() {
        if j.zero > 0 {
            let target = OccupationTriple {
                plus: j.plus + 1,
                zero: j.zero - 1,
                minus: j.minus,
            };
            let amp = s2 * (((j.plus + 1) * j.zero) as f64).sqrt();
            m[(basis_index(target), col)] += C64::new(amp, 0.0);
        }
        if j.minus > 0 {
            let target = OccupationTriple {
                plus: j.plus,
                zero: j.zero + 1,
                minus: j.minus - 1,
            };
            let amp = s2 * (((j.zero + 1) * j.minus) as f64).sqrt();
            m[(basis_index(target), col)] += C64::new(amp, 0.0);
        }
    }
    m
}

/// Means `<F_a>` and symmetrized covariances
/// `v_ab = <{F_a, F_b}>/2 - <F_a><F_b>`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpinMoments {
    pub mean: [f64; 3],
    pub cov: [[f64; 3]; 3],
}

impl SpinMoments {
    pub fn mean_norm(&self) -> f64 {
        self.mean.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `vxx, vxy, vxz, vyy, vyz, vzz`.
    pub fn cov_upper(&self) -> [f64; 6] {
        let c = &self.cov;
        [c[0][0], c[0][1], c[0][2], c[1][1], c[1][2], c[2][2]]
    }
}

/// Precomputed `Fx, Fy, Fz` and their symmetrized products for one sector.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    n: u32,
    spin: [DMatrix<C64>; 3],
    products: [[DMatrix<C64>; 3]; 3],
}

impl SpinOperators {
    pub fn new(n: u32) -> Self {
        let n_eff = n.max(1);
        let op = |k| build_operator(k, n_eff).map(|o| o.entries).unwrap_or_default();
        let spin = if n == 0 {
            let z = DMatrix::<C64>::zeros(1, 1);
            [z.clone(), z.clone(), z]
        } else {
            [op(OperatorKind::Fx), op(OperatorKind::Fy), op(OperatorKind::Fz)]
        };
        let products = core::array::from_fn(|a| {
            core::array::from_fn(|b| {
                (&spin[a] * &spin[b] + &spin[b] * &spin[a]) * C64::new(0.5, 0.0)
            })
        });
        Self { n, spin, products }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn spin(&self, axis: usize) -> &DMatrix<C64> {
        &self.spin[axis]
    }

    pub fn moments_pure(&self, psi: &FockState) -> SpinMoments {
        let amps = psi.amplitudes();
        let phi: [DVector<C64>; 3] = core::array::from_fn(|a| &self.spin[a] * amps);
        let mut out = SpinMoments::default();
        for a in 0..3 {
            out.mean[a] = amps.dotc(&phi[a]).re;
        }
        for a in 0..3 {
            for b in a..3 {
                let second = phi[a].dotc(&phi[b]).re;
                let v = second - out.mean[a] * out.mean[b];
                out.cov[a][b] = v;
                out.cov[b][a] = v;
            }
        }
        out
    }

    pub fn moments_mixed(&self, rho: &DensityMatrix) -> SpinMoments {
        let tr = |m: &DMatrix<C64>| -> f64 {
            let d = rho.dim();
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    acc += (rho.entries[(i, j)] * m[(j, i)]).re;
                }
            }
            acc
        };
        let mut out = SpinMoments::default();
        for a in 0..3 {
            out.mean[a] = tr(&self.spin[a]);
        }
        for a in 0..3 {
            for b in a..3 {
                let v = tr(&self.products[a][b]) - out.mean[a] * out.mean[b];
                out.cov[a][b] = v;
                out.cov[b][a] = v;
            }
        }
        out
    }
}

/// Sectors of a Poisson-distributed atom number, each in the product state.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorEnsemble {
    pub members: Vec<(f64, FockState)>,
    /// Poisson mass inside the window before the weights were renormalized.
    pub window_mass: f64,
}

impl SectorEnsemble {
    pub fn mean_atom_number(&self) -> f64 {
        self.members.iter().map(|(w, s)| w * s.n() as f64).sum()
    }
}

/// Minimum Poisson mass a window must cover.
pub const POISSON_WINDOW_MASS: f64 = 1.0 - 1e-6;

/// Poisson(`n_bar`) mixture of product states over sectors `lo..=hi`,
/// renormalized over the window.
pub fn poisson_mixture(c: [C64; 3], n_bar: f64, lo: u32, hi: u32) -> Result<SectorEnsemble> {
    if !(n_bar > 0.0) {
        return Err(Error::InvalidParameter("mean atom number must be positive".to_string()));
    }
    if hi < lo {
        return Err(Error::EmptyWindow);
    }
    check_single_atom(&c)?;
    let weights: Vec<f64> = (lo..=hi).map(|n| poisson_weight(n_bar, n)).collect();
    let mass: f64 = weights.iter().sum();
    if mass < POISSON_WINDOW_MASS {
        return Err(Error::WindowTooNarrow(mass));
    }
    let members = (lo..=hi)
        .zip(weights)
        .map(|(n, w)| Ok((w / mass, build_product_state(c, n)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SectorEnsemble {
        members,
        window_mass: mass,
    })
}

/// `e^{-n_bar} n_bar^n / n!`.
pub fn poisson_weight(n_bar: f64, n: u32) -> f64 {
    (-n_bar + n as f64 * n_bar.ln() - linalg::ln_factorial(n as u64)).exp()
}

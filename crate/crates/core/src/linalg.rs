//! Small dense helpers on top of nalgebra for Hermitian matrices.

use nalgebra::DMatrix;

use crate::C64;

/// `exp(-i H t)` for Hermitian `H`, via its eigendecomposition.
pub(crate) fn unitary_propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let dim = h.nrows();
    if is_diagonal(h) {
        let mut u = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            u[(i, i)] = C64::from_polar(1.0, -h[(i, i)].re * t);
        }
        return u;
    }
    let eig = h.clone().symmetric_eigen();
    let v = eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lambda * t);
        for i in 0..dim {
            scaled[(i, k)] *= phase;
        }
    }
    scaled * v.adjoint()
}

pub(crate) fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let sym = hermitian_part(m);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &x| acc.min(x))
}

pub(crate) fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub(crate) fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn is_diagonal(m: &DMatrix<C64>) -> bool {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != C64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `ln(k!)`.
pub(crate) fn ln_factorial(k: u64) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

/// A fixed step propagator, stored in the cheapest form that represents it.
#[derive(Debug, Clone)]
pub enum Propagator {
    Identity,
    Diagonal(alloc::vec::Vec<C64>),
    Dense { u: DMatrix<C64>, u_adj: DMatrix<C64> },
}

impl Propagator {
    /// `exp(-i H t)`.
    pub fn new(h: &DMatrix<C64>, t: f64) -> Self {
        let u = unitary_propagator(h, t);
        if is_diagonal(&u) {
            let d: alloc::vec::Vec<C64> = (0..u.nrows()).map(|i| u[(i, i)]).collect();
            if d.iter().all(|z| *z == C64::new(1.0, 0.0)) {
                Propagator::Identity
            } else {
                Propagator::Diagonal(d)
            }
        } else {
            let u_adj = u.adjoint();
            Propagator::Dense { u, u_adj }
        }
    }
}

//! The operations the trajectory engines need from a state, implemented for
//! both pure states and density matrices.
//!
//! Every measurement operator in this crate is diagonal in the occupation
//! basis and every free evolution is a fixed unitary, so an engine only has
//! to read populations, multiply by a diagonal, propagate and renormalize.

use alloc::vec::Vec;


use crate::fock::{DensityMatrix, FockState, SpinMoments, SpinOperators};
use crate::linalg;
pub use crate::linalg::Propagator;
use crate::C64;

pub trait ConditionalState: Clone {
    fn sector(&self) -> u32;

    /// Diagonal of the state in the occupation basis (`|psi_j|^2` or `rho_jj`).
    fn populations(&self) -> Vec<f64>;

    /// `<X>` for a diagonal operator with eigenvalues `x`.
    fn diagonal_mean(&self, x: &[f64]) -> f64 {
        self.populations().iter().zip(x).map(|(p, v)| p * v).sum()
    }

    /// `psi -> D psi` or `rho -> D rho D^dag`, unnormalized.
    fn apply_diagonal(&mut self, d: &[C64]);

    /// `psi -> U psi` or `rho -> U rho U^dag`.
    fn propagate(&mut self, u: &Propagator);

    /// Divides by the trace (or squared norm) and returns it.
    fn renormalize(&mut self) -> f64;

    /// Restores exact Hermiticity and returns the deviation found; pure
    /// states report zero.
    fn symmetrize(&mut self) -> f64 {
        0.0
    }

    fn moments(&self, ops: &SpinOperators) -> SpinMoments;

    fn purity(&self) -> f64;

    /// Smallest eigenvalue; `None` for pure states, where it is always zero
    /// or one by construction.
    fn min_eigenvalue(&self) -> Option<f64> {
        None
    }
}

impl ConditionalState for FockState {
    fn sector(&self) -> u32 {
        self.n()
    }

    fn populations(&self) -> Vec<f64> {
        self.probabilities()
    }

    fn apply_diagonal(&mut self, d: &[C64]) {
        for (a, z) in self.amplitudes_mut().iter_mut().zip(d) {
            *a *= z;
        }
    }

    fn propagate(&mut self, u: &Propagator) {
        match u {
            Propagator::Identity => {}
            Propagator::Diagonal(d) => self.apply_diagonal(d),
            Propagator::Dense { u, .. } => {
                let next = u * self.amplitudes();
                *self.amplitudes_mut() = next;
            }
        }
    }

    fn renormalize(&mut self) -> f64 {
        self.normalize()
    }

    fn moments(&self, ops: &SpinOperators) -> SpinMoments {
        ops.moments_pure(self)
    }

    fn purity(&self) -> f64 {
        let ns = self.norm_sqr();
        ns * ns
    }
}

impl ConditionalState for DensityMatrix {
    fn sector(&self) -> u32 {
        self.n()
    }

    fn populations(&self) -> Vec<f64> {
        let e = self.entries();
        (0..self.dim()).map(|i| e[(i, i)].re).collect()
    }

    fn apply_diagonal(&mut self, d: &[C64]) {
        let dim = self.dim();
        let e = self.entries_mut();
        for j in 0..dim {
            let dj = d[j].conj();
            for i in 0..dim {
                e[(i, j)] *= d[i] * dj;
            }
        }
    }

    fn propagate(&mut self, u: &Propagator) {
        match u {
            Propagator::Identity => {}
            Propagator::Diagonal(d) => self.apply_diagonal(d),
            Propagator::Dense { u, u_adj } => {
                let next = u * self.entries() * u_adj;
                *self.entries_mut() = next;
            }
        }
    }

    fn renormalize(&mut self) -> f64 {
        self.normalize()
    }

    fn symmetrize(&mut self) -> f64 {
        let err = linalg::hermiticity_error(self.entries());
        DensityMatrix::symmetrize(self);
        err
    }

    fn moments(&self, ops: &SpinOperators) -> SpinMoments {
        ops.moments_mixed(self)
    }

    fn purity(&self) -> f64 {
        DensityMatrix::purity(self)
    }

    fn min_eigenvalue(&self) -> Option<f64> {
        Some(DensityMatrix::min_eigenvalue(self))
    }
}

/// Accumulates run diagnostics at sampling checkpoints.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DiagnosticsTracker {
    pub(crate) inner: crate::record::Diagnostics,
}

impl DiagnosticsTracker {
    pub(crate) fn new() -> Self {
        Self {
            inner: crate::record::Diagnostics::default(),
        }
    }

    pub(crate) fn step(&mut self, trace_error: f64, hermiticity_error: f64) {
        let d = &mut self.inner;
        d.max_trace_error = d.max_trace_error.max(trace_error);
        d.max_hermiticity_error = d.max_hermiticity_error.max(hermiticity_error);
    }

    pub(crate) fn checkpoint<S: ConditionalState>(&mut self, state: &S, eigen: bool) {
        let d = &mut self.inner;
        let p = state.purity();
        d.min_purity = d.min_purity.min(p);
        d.final_purity = p;
        if eigen {
            if let Some(e) = state.min_eigenvalue() {
                d.min_eigenvalue = Some(d.min_eigenvalue.map_or(e, |m: f64| m.min(e)));
            }
        }
    }
}

//! Continuous-measurement backaction for spin-1 condensate magnetometry.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical piece:
//! the exact Fock-space representation of `n` spin-1 bosons in one spatial
//! mode, the dispersive coupling model, single-pulse photocount statistics,
//! three trajectory engines and the Larmor-frequency estimator.
//!
//! Engines:
//!
//! * [`jumps`]: discrete photon clicks through the two homodyne ports,
//!   interleaved with exact Zeeman propagators. This is the ground truth.
//! * [`sme`]: the diffusion-limit conditional stochastic master equation on
//!   the full density matrix, plus its ensemble-averaged (Lindblad) form.
//! * [`moments`]: Gaussian closure on the means and covariance of the
//!   collective spin, which is the only engine that reaches `n ~ 10^4`.
//!
//! [`experiment`] wires the engines to a magnetometry run: compensation
//! field, photocurrent, frequency estimate and run diagnostics.
//!
//! Units are SI throughout the API; angular frequencies are rad/s and
//! ordinary frequencies are Hz. File formats, configuration parsing and the
//! command line live in the companion `spinmag` crate.

#![no_std]
// once any crate in the graph links std, its inherent float methods shadow
// the libm-backed `Float` imports used here
#![allow(unused_imports)]

extern crate alloc;

pub mod coupling;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod fock;
pub mod jumps;
mod linalg;
pub mod model;
pub mod moments;
pub mod pulse;
pub mod record;
pub mod rng;
pub mod sme;
pub mod state;

pub use error::{Error, Result};

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Complex scalar used for all amplitudes and operator entries.
pub type C64 = num_complex::Complex64;

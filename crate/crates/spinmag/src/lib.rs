//! Files, configuration and the command line around [`spinmag_core`].
//!
//! * [`config`]: the TOML run description and its resolution to engine
//!   parameters.
//! * [`presets`]: the built-in weak (`fig1`) and strong (`fig2`)
//!   measurement runs and their desk-scale variants.
//! * [`output`]: CSV writers and readers; [`manifest`]: `manifest.json`
//!   and `summary.json`.
//! * [`ensemble`] and [`sweep`]: parallel trajectories and parameter scans.
//! * [`cli`]: the `spinmag` binary.

pub mod cli;
pub mod config;
pub mod ensemble;
mod error;
pub mod manifest;
pub mod output;
pub mod presets;
pub mod sweep;

pub use error::{Error, Result};
pub use spinmag_core as core;

//! Batch driver around `mpp-core`: simulation, extraction, campaigns,
//! baseline comparisons and data import. Each subcommand of the `mpp`
//! binary maps to one function in [`commands`].

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod tensorfile;

pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

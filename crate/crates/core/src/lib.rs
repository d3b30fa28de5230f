pub mod activation;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod gapstats;
pub mod lp;
pub mod network;
pub mod tightener;

pub use error::{Error, Result};

/// Formats a number with 17 significant digits, enough to round-trip any
/// `f64` and stable across platforms.
pub fn num17(x: f64) -> String {
    format!("{x:.16e}")
}

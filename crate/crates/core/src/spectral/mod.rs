//! Truncated Fourier fields on the 3-torus `[0, 2π)^3`.

mod field;
mod frequency;
pub mod grid;
pub mod io;

pub use field::{GridValues, Kind, Rank, SpectralField};
pub use frequency::Frequency;

use thiserror::Error;

/// `(2π)^3`, the volume of the torus.
pub const TORUS_VOLUME: f64 = 8.0 * std::f64::consts::PI * std::f64::consts::PI * std::f64::consts::PI;

/// Default relative tolerance on the mean of a Poisson right-hand side.
pub const DEFAULT_MEAN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("frequency {m} does not fit resolution M = {resolution}")]
    FrequencyOutOfRange { m: Frequency, resolution: usize },
    #[error("component index {0} out of range")]
    BadComponent(usize),
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("expected a {expected:?} field, found {found:?}")]
    RankMismatch { expected: Rank, found: Rank },
    #[error("grid of size {n} aliases resolution M = {resolution} (need n >= 2M + 1)")]
    Undersampled { n: usize, resolution: usize },
    #[error("Poisson right-hand side has mean {mean:e}, above tolerance {tolerance:e}")]
    Solvability { mean: f64, tolerance: f64 },
    #[error("field container: {0}")]
    Format(String),
}

/// Pure mode constructor; `component` is zero-based, `None` for a scalar.
pub fn make_mode(
    kind: Kind,
    component: Option<usize>,
    m: Frequency,
    resolution: usize,
) -> Result<SpectralField, SpectralError> {
    SpectralField::mode(kind, component, m, resolution)
}

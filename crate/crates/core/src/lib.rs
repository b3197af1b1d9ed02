//! Spectral simulation and control synthesis for the compressible Euler
//! system on the 3-torus, written in log-density variables `(u, g = ln ρ)`.

pub mod dynamics;
pub mod saturation;
pub mod spectral;
pub mod synthesis;
pub mod time;

pub use spectral::{Frequency, Kind, Rank, SpectralError, SpectralField};
pub use time::{Interpolation, TimeError, TimeSampledField};

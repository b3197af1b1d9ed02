//! Control synthesis: the interpolating path with its transport drift and
//! force, reduction of drift controls to additive ones, convex splitting of
//! quadratic interactions, and the end-to-end steering pipeline.

mod path;
mod reduce;
mod relax;
mod steer;

pub use path::{
    continuity_residual, forcing_control, interpolate_density, interpolate_velocity, path_channel, phi_mu,
    transport_control, PathPoint, SteeringPath,
};
pub use reduce::{discretize_control, mollify_endpoints, reduce_to_additive, time_derivative, Cutoff};
pub use relax::{
    convex_split, primitive_sup_norm, relaxation_check, relaxation_forcing, ConvexSplit, OscillatingControl,
    RelaxationRow, RelaxationTable, DECAY_RATIO,
};
pub use steer::{
    exact_project_steer, reduction_gaps, steer, step1_reproduction, CoefficientFunctional, ErrorBudget, FinalErrors,
    FixedPointOptions, ProjectionOutcome, ReductionRow, Reproduction, SteeringDiagnostics, SteeringProblem,
    SteeringReport, SynthesisParams,
};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::saturation::SaturationError;
use crate::spectral::SpectralError;
use crate::time::TimeError;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("masses differ: ∫e^g0 = {initial}, ∫e^ĝ = {target} (relative tolerance {tolerance})")]
    MassIncompatible { initial: f64, target: f64, tolerance: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cut-off drift is {size:e} at the endpoint t = {t}")]
    EndpointViolation { t: f64, size: f64 },
    #[error("weights: {0}")]
    Weights(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Saturation(#[from] SaturationError),
}

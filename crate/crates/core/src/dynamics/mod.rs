//! The generalized controlled compressible Euler system in `(u, g = ln ρ)`
//! variables, integrated with classical RK4 in time and a dealiased
//! pseudospectral discretization in space.

mod pressure;
mod probe;
mod solver;

pub use pressure::PressureLaw;
pub use probe::{lipschitz_probe, InputTuple, ProbeResult};
pub use solver::{
    mass, ControlProgram, ControlSnapshot, DynamicsError, GridSummary, Integrator, SolveOptions, Solver, State,
    StepDiagnostics, Trajectory,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::path::{path_channel, SteeringPath};
use super::reduce::{discretize_control, Cutoff};
use super::SynthesisError;
use crate::dynamics::{mass, ControlProgram, Integrator, PressureLaw, SolveOptions, Solver, State};
use crate::saturation::project_e_n;
use crate::spectral::{Frequency, Kind, Rank, SpectralField, DEFAULT_MEAN_TOLERANCE};
use crate::time::TimeSampledField;

/// Endpoint data of a steering run.
#[derive(Clone, Debug)]
pub struct SteeringProblem {
    pub u0: SpectralField,
    pub u_target: SpectralField,
    pub g0: SpectralField,
    pub g_target: SpectralField,
    pub horizon: f64,
    /// given force `f`, zero when absent
    pub force: Option<TimeSampledField>,
    pub sobolev_k: u32,
    pub pressure: PressureLaw,
    /// relative tolerance on `|∫e^{g0} − ∫e^{ĝ}|`
    pub mass_tolerance: f64,
}

impl SteeringProblem {
    pub fn new(
        u0: SpectralField,
        u_target: SpectralField,
        g0: SpectralField,
        g_target: SpectralField,
        horizon: f64,
        pressure: PressureLaw,
    ) -> Self {
        SteeringProblem {
            u0,
            u_target,
            g0,
            g_target,
            horizon,
            force: None,
            sobolev_k: 4,
            pressure,
            mass_tolerance: 1e-10,
        }
    }

    pub fn resolution(&self) -> usize {
        self.u0.resolution()
    }

    /// Shape checks and the mass gate; returns the common mass `α`.
    pub fn validate(&self) -> Result<f64, SynthesisError> {
        self.u0.expect_rank(Rank::Vector)?;
        self.u0.check_compatible(&self.u_target)?;
        self.g0.expect_rank(Rank::Scalar)?;
        self.g0.check_compatible(&self.g_target)?;
        if self.g0.resolution() != self.resolution() {
            return Err(SynthesisError::InvalidParams("velocity and density resolutions differ".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SynthesisError::InvalidParams(format!("bad horizon {}", self.horizon)));
        }
        self.pressure.validate().map_err(SynthesisError::InvalidParams)?;
        if let Some(f) = &self.force {
            if f.rank() != Rank::Vector || f.resolution() != self.resolution() {
                return Err(SynthesisError::InvalidParams("force must be a vector field at the problem resolution".into()));
            }
        }
        let initial = mass(&self.g0);
        let target = mass(&self.g_target);
        if (initial - target).abs() > self.mass_tolerance * initial {
            return Err(SynthesisError::MassIncompatible {
                initial,
                target,
                tolerance: self.mass_tolerance,
            });
        }
        Ok(initial)
    }

    fn solver(&self) -> Solver {
        Solver::new(self.pressure.clone()).with_options(SolveOptions {
            sobolev_k: self.sobolev_k,
            ..SolveOptions::default()
        })
    }
}

fn default_mean_tolerance() -> f64 {
    DEFAULT_MEAN_TOLERANCE
}

/// Tuning of the synthesis pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisParams {
    /// mollification `μ`
    pub mu: f64,
    /// projection level `N` of the control span `E_N`
    pub level: u32,
    /// oscillation count `n` of the relaxation stage
    pub oscillations: usize,
    /// endpoint cutoff width `δ`
    pub delta: f64,
    /// time subdivisions `s` of the piecewise-constant stage
    pub subdivisions: usize,
    /// integrator step
    pub dt: f64,
    /// smoothstep order of the cutoff, the problem's Sobolev index when absent
    #[serde(default)]
    pub cutoff_order: Option<u32>,
    #[serde(default = "default_mean_tolerance")]
    pub mean_tolerance: f64,
    /// replace the control by its interval averages on `s` subintervals
    #[serde(default)]
    pub piecewise_constant: bool,
    /// run the extra simulations that split the final error by source
    #[serde(default)]
    pub error_budget: bool,
}

impl SynthesisParams {
    /// Step count of the verification run.
    pub fn validate(&self, horizon: f64) -> Result<usize, SynthesisError> {
        let bad = |msg: String| Err(SynthesisError::InvalidParams(msg));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("μ must be positive, got {}", self.mu));
        }
        if !(self.delta > 0.0 && self.delta < horizon / 4.0) {
            return bad(format!("δ must lie in (0, T/4), got {}", self.delta));
        }
        if self.oscillations == 0 || self.subdivisions == 0 {
            return bad("n and s must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.mean_tolerance > 0.0) {
            return bad("dt and the mean tolerance must be positive".into());
        }
        let steps = (horizon / self.dt).round();
        if steps < 1.0 || (steps * self.dt - horizon).abs() > 1e-9 * horizon {
            return bad(format!("T = {horizon} is not a multiple of dt = {}", self.dt));
        }
        let steps = steps as usize;
        if steps % self.subdivisions != 0 {
            return bad(format!("s = {} does not divide the {steps} steps", self.subdivisions));
        }
        Ok(steps)
    }
}

/// `‖u − û‖`, `‖g − ĝ‖` in `H^k` and `H^1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalErrors {
    pub u_hk: f64,
    pub g_hk: f64,
    pub u_h1: f64,
    pub g_h1: f64,
}

impl FinalErrors {
    pub fn between(state: &State, u: &SpectralField, g: &SpectralField, k: u32) -> Result<Self, SynthesisError> {
        let du = state.u.sub(u)?;
        let dg = state.g.sub(g)?;
        Ok(FinalErrors {
            u_hk: du.sobolev_norm(k),
            g_hk: dg.sobolev_norm(k),
            u_h1: du.sobolev_norm(1),
            g_h1: dg.sobolev_norm(1),
        })
    }

    pub fn total_hk(&self) -> f64 {
        self.u_hk + self.g_hk
    }

    pub fn total_h1(&self) -> f64 {
        self.u_h1 + self.g_h1
    }
}

/// Final-state contributions (in `H^k`) of the individual approximations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// `‖e^{−μΔ}u0 − u0‖ + ‖φ_μ(g0) − g0‖`
    pub mollification_initial: f64,
    /// `‖e^{−μΔ}û − û‖ + ‖φ_μ(ĝ) − ĝ‖`
    pub mollification_target: f64,
    /// drift-form run against the mollified target
    pub integration: f64,
    /// drift form against the additive form with cutoff `δ`
    pub reduction: f64,
    /// additive form against its projection onto `E_N`
    pub projection: f64,
    /// piecewise-constant stage against the smooth control, when enabled
    pub discretization: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringDiagnostics {
    pub alpha: f64,
    pub mass_drift: f64,
    /// largest continuity-equation residual over the evaluated path times
    pub max_continuity_residual: f64,
    pub steps: usize,
    pub dt: f64,
    /// `sup_t ‖control‖_{H^k}` over the step grid
    pub control_sup_hk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOutcome {
    pub functionals: Vec<CoefficientFunctional>,
    pub targets: Vec<f64>,
    pub values: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub theta: f64,
    /// gap after each evaluation
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteeringReport {
    pub params: SynthesisParams,
    pub sobolev_k: u32,
    pub errors: FinalErrors,
    pub uncontrolled: Option<FinalErrors>,
    pub budget: Option<ErrorBudget>,
    pub diagnostics: SteeringDiagnostics,
    pub projection: Option<ProjectionOutcome>,
    /// final additive control `η : [0, T] → E_N`
    #[serde(skip)]
    pub control: Option<TimeSampledField>,
    #[serde(skip)]
    pub final_state: Option<State>,
}

impl SteeringReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// The additive control `η_μ + ∂_t(χ_δ ξ_μ)` of a path, unprojected.
fn additive_channel(path: &Arc<SteeringPath>, cutoff: Cutoff) -> Result<TimeSampledField, SynthesisError> {
    path_channel(path, move |p| {
        let mut out = p.eta.clone();
        out.axpy(cutoff.rate(p.t), &p.xi).expect("shared layout");
        out.axpy(cutoff.value(p.t), &p.dxi).expect("shared layout");
        out
    })
}

fn drift_program(path: &Arc<SteeringPath>) -> Result<ControlProgram, SynthesisError> {
    let xi = path_channel(path, |p| p.xi.clone())?;
    let mut program = ControlProgram::none()
        .with_zeta(xi.clone())
        .with_xi(xi)
        .with_eta(path_channel(path, |p| p.eta.clone())?);
    program.force = path.force().cloned();
    Ok(program)
}

fn additive_program(path: &SteeringPath, control: TimeSampledField) -> ControlProgram {
    let mut program = ControlProgram::none().with_eta(control);
    program.force = path.force().cloned();
    program
}

/// Advances integrators in lockstep so that path evaluations are shared
/// through the path cache; returns the relative mass drift of the first.
fn run_lockstep(integrators: &mut [Integrator<'_>]) -> Result<f64, SynthesisError> {
    let mut masses = Vec::new();
    while !integrators[0].done() {
        for (i, it) in integrators.iter_mut().enumerate() {
            let d = it.advance()?;
            if i == 0 {
                masses.push(d.mass);
            }
        }
    }
    masses.push(integrators[0].current_diagnostics()?.mass);
    let m0 = masses[0];
    Ok(masses.iter().map(|m| ((m - m0) / m0).abs()).fold(0.0, f64::max))
}

fn build_path(problem: &SteeringProblem, params: &SynthesisParams, alpha: f64) -> Result<Arc<SteeringPath>, SynthesisError> {
    Ok(Arc::new(SteeringPath::new(
        &problem.u0,
        &problem.u_target,
        &problem.g0,
        &problem.g_target,
        params.mu,
        problem.horizon,
        alpha,
        problem.solver(),
        problem.force.clone(),
        params.mean_tolerance,
    )?))
}

/// Synthesizes the finite-dimensional additive control and verifies it by
/// simulating from `(u0, g0)` with `ζ = ξ = 0`.
pub fn steer(problem: &SteeringProblem, params: &SynthesisParams) -> Result<SteeringReport, SynthesisError> {
    let alpha = problem.validate()?;
    let steps = params.validate(problem.horizon)?;
    let k = problem.sobolev_k;
    let horizon = problem.horizon;
    let path = build_path(problem, params, alpha)?;
    // fail early on an inadmissible path rather than inside the time loop
    path.point(0.0)?;
    let cutoff = Cutoff::new(horizon, params.delta, params.cutoff_order.unwrap_or(k))?;
    let raw = additive_channel(&path, cutoff)?;
    let level = params.level;
    let smooth = project_e_n(&raw, level);
    let control = if params.piecewise_constant {
        discretize_control(&smooth, params.subdivisions, steps / params.subdivisions)?
    } else {
        smooth.clone()
    };
    path.take_error()?;

    let solver = problem.solver();
    let main_program = additive_program(&path, control.clone());
    let start = State::new(problem.u0.clone(), problem.g0.clone(), 0.0)?;

    let mut budget = None;
    let (main_state, mass_drift) = if params.error_budget {
        let (u_m, g_m) = path.start()?;
        let mollified = State::new(u_m.clone(), g_m.clone(), 0.0)?;
        let drift = drift_program(&path)?;
        let raw_program = additive_program(&path, raw.clone());
        let smooth_program = additive_program(&path, smooth.clone());
        let mut its = vec![
            Integrator::new(&solver, start, &main_program, horizon, params.dt)?,
            Integrator::new(&solver, mollified.clone(), &drift, horizon, params.dt)?,
            Integrator::new(&solver, mollified.clone(), &raw_program, horizon, params.dt)?,
            Integrator::new(&solver, mollified.clone(), &smooth_program, horizon, params.dt)?,
        ];
        let result = run_lockstep(&mut its);
        path.take_error()?;
        let drift_value = result?;
        let finals: Vec<State> = its.iter().map(|i| i.state().clone()).collect();
        let (u_end, g_end) = path.end()?;
        let gap = |a: &State, b: &State| -> Result<f64, SynthesisError> {
            Ok(a.u.sub(&b.u)?.sobolev_norm(k) + a.g.sub(&b.g)?.sobolev_norm(k))
        };
        let target_m = State::new(u_end.clone(), g_end.clone(), horizon)?;
        let discretization = if params.piecewise_constant {
            // main run starts from unmollified data; compare like with like
            let mut it = Integrator::new(&solver, mollified, &main_program, horizon, params.dt)?;
            while !it.done() {
                it.advance()?;
            }
            path.take_error()?;
            Some(gap(it.state(), &finals[3])?)
        } else {
            None
        };
        budget = Some(ErrorBudget {
            mollification_initial: u_m.sub(&problem.u0)?.sobolev_norm(k) + g_m.sub(&problem.g0)?.sobolev_norm(k),
            mollification_target: u_end.sub(&problem.u_target)?.sobolev_norm(k)
                + g_end.sub(&problem.g_target)?.sobolev_norm(k),
            integration: gap(&finals[1], &target_m)?,
            reduction: gap(&finals[1], &finals[2])?,
            projection: gap(&finals[2], &finals[3])?,
            discretization,
        });
        (finals[0].clone(), drift_value)
    } else {
        let mut its = vec![Integrator::new(&solver, start, &main_program, horizon, params.dt)?];
        let result = run_lockstep(&mut its);
        path.take_error()?;
        let drift_value = result?;
        (its[0].state().clone(), drift_value)
    };

    let uncontrolled = if params.error_budget {
        let mut program = ControlProgram::none();
        program.force = problem.force.clone();
        let tr = solver.solve(&problem.u0, &problem.g0, &program, horizon, params.dt)?;
        Some(FinalErrors::between(tr.final_state(), &problem.u_target, &problem.g_target, k)?)
    } else {
        None
    };

    let dt = horizon / steps as f64;
    let control_sup_hk = (0..=steps)
        .map(|i| control.at(i as f64 * dt).sobolev_norm(k))
        .fold(0.0, f64::max);
    path.take_error()?;
    Ok(SteeringReport {
        params: params.clone(),
        sobolev_k: k,
        errors: FinalErrors::between(&main_state, &problem.u_target, &problem.g_target, k)?,
        uncontrolled,
        budget,
        diagnostics: SteeringDiagnostics {
            alpha,
            mass_drift,
            max_continuity_residual: path.max_residual(),
            steps,
            dt,
            control_sup_hk,
        },
        projection: None,
        control: Some(control),
        final_state: Some(main_state),
    })
}

/// Sup-in-time L² gap between the drift-form simulation started at the
/// mollified data and the analytic interpolants, plus the final-time gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub dt: f64,
    pub sup_gap: f64,
    pub final_gap: f64,
    pub max_continuity_residual: f64,
}

/// Simulates `R(e^{−μΔ}u0, φ_μ(g0), ξ_μ, ξ_μ, f + η_μ)` and compares with `(u_μ, g_μ)`.
pub fn step1_reproduction(problem: &SteeringProblem, params: &SynthesisParams) -> Result<Reproduction, SynthesisError> {
    let alpha = problem.validate()?;
    params.validate(problem.horizon)?;
    let path = build_path(problem, params, alpha)?;
    let (u_m, g_m) = path.start()?;
    let program = drift_program(&path)?;
    let solver = problem.solver();
    let mut it = Integrator::new(&solver, State::new(u_m, g_m, 0.0)?, &program, problem.horizon, params.dt)?;
    let gap = |s: &State| -> Result<f64, SynthesisError> {
        let du = s.u.sub(&path.velocity(s.t))?.sobolev_norm_sq(0);
        let dg = s.g.sub(&path.log_density(s.t)?)?.sobolev_norm_sq(0);
        Ok((du + dg).sqrt())
    };
    let mut sup_gap = gap(it.state())?;
    while !it.done() {
        let r = it.advance();
        path.take_error()?;
        r?;
        sup_gap = sup_gap.max(gap(it.state())?);
    }
    Ok(Reproduction {
        dt: it.dt(),
        sup_gap,
        final_gap: gap(it.state())?,
        max_continuity_residual: path.max_residual(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub delta: f64,
    /// `H^k` gap of the final states of drift and additive forms
    pub gap_hk: f64,
    pub gap_l2: f64,
}

/// Final-state gap between `R(.., ξ_μ, ξ_μ, η_μ)` and `R(.., 0, 0, η_μ + ∂_t ξ^δ_μ)`
/// for each cutoff width, all runs from the mollified data.
pub fn reduction_gaps(
    problem: &SteeringProblem,
    params: &SynthesisParams,
    deltas: &[f64],
) -> Result<Vec<ReductionRow>, SynthesisError> {
    let alpha = problem.validate()?;
    params.validate(problem.horizon)?;
    let k = problem.sobolev_k;
    let path = build_path(problem, params, alpha)?;
    let (u_m, g_m) = path.start()?;
    let start = State::new(u_m, g_m, 0.0)?;
    let order = params.cutoff_order.unwrap_or(k);
    let mut programs = vec![drift_program(&path)?];
    for &d in deltas {
        let cutoff = Cutoff::new(problem.horizon, d, order)?;
        programs.push(additive_program(&path, additive_channel(&path, cutoff)?));
    }
    let solver = problem.solver();
    let mut its = programs
        .iter()
        .map(|p| Integrator::new(&solver, start.clone(), p, problem.horizon, params.dt))
        .collect::<Result<Vec<_>, _>>()?;
    let result = run_lockstep(&mut its);
    path.take_error()?;
    result?;
    let drift = its[0].state().clone();
    deltas
        .iter()
        .zip(&its[1..])
        .map(|(&delta, it)| {
            let (du, dg) = (it.state().u.sub(&drift.u)?, it.state().g.sub(&drift.g)?);
            Ok(ReductionRow {
                delta,
                gap_hk: du.sobolev_norm(k) + dg.sobolev_norm(k),
                gap_l2: (du.sobolev_norm_sq(0) + dg.sobolev_norm_sq(0)).sqrt(),
            })
        })
        .collect()
}

/// One Fourier coefficient of the final velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientFunctional {
    /// zero-based velocity component
    pub component: usize,
    pub kind: Kind,
    #[serde(rename = "m")]
    pub freq: Frequency,
}

impl CoefficientFunctional {
    pub fn eval(&self, u: &SpectralField) -> Result<f64, SynthesisError> {
        if self.component >= 3 {
            return Err(SynthesisError::InvalidParams(format!("component {} out of range", self.component)));
        }
        let (a, b) = u.coefficient(self.component, self.freq).ok_or_else(|| {
            SynthesisError::InvalidParams(format!("frequency {} outside the resolution", self.freq))
        })?;
        Ok(match self.kind {
            Kind::Cos => a,
            Kind::Sin => b,
        })
    }

    fn set(&self, u: &mut SpectralField, value: f64) -> Result<(), SynthesisError> {
        let current = self.eval(u)?;
        u.add_mode(self.kind, self.component, self.freq, value - current)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointOptions {
    /// initial damping `θ ∈ (0, 1]`, halved whenever the gap grows
    pub theta: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            theta: 0.5,
            tolerance: 1e-6,
            max_iterations: 50,
        }
    }
}

/// Damped fixed-point iteration `y ← y + θ (y₁ − Φ(y))` from `y = F(û)`,
/// where `Φ(y)` is the value of the functionals after steering toward the
/// target whose coefficients are replaced by `y`. Errors in the report refer to the
/// original target; a non-converged run reports its best iterate.
pub fn exact_project_steer(
    problem: &SteeringProblem,
    params: &SynthesisParams,
    functionals: &[CoefficientFunctional],
    targets: &[f64],
    options: &FixedPointOptions,
) -> Result<SteeringReport, SynthesisError> {
    if functionals.len() != targets.len() {
        return Err(SynthesisError::InvalidParams("one target value per functional is required".into()));
    }
    if !(options.theta > 0.0 && options.theta <= 1.0) || options.max_iterations == 0 {
        return Err(SynthesisError::InvalidParams("θ must lie in (0, 1] and the cap be positive".into()));
    }
    // start from the unmodified target, so the first evaluation is a plain steer
    let mut y = functionals
        .iter()
        .map(|f| f.eval(&problem.u_target))
        .collect::<Result<Vec<_>, _>>()?;
    let evaluate = |y: &[f64]| -> Result<(SteeringReport, Vec<f64>), SynthesisError> {
        let mut p = problem.clone();
        for (f, v) in functionals.iter().zip(y) {
            f.set(&mut p.u_target, *v)?;
        }
        let mut report = steer(&p, params)?;
        let state = report.final_state.as_ref().expect("steer keeps its final state");
        report.errors = FinalErrors::between(state, &problem.u_target, &problem.g_target, problem.sobolev_k)?;
        let values = functionals
            .iter()
            .map(|f| f.eval(&state.u))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((report, values))
    };
    let gap_of = |values: &[f64]| values.iter().zip(targets).map(|(v, t)| (v - t).abs()).fold(0.0, f64::max);

    let mut theta = options.theta;
    let mut history = Vec::new();
    let mut best: Option<(Vec<f64>, SteeringReport, Vec<f64>, f64)> = None;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let (report, values) = evaluate(&y)?;
        let gap = gap_of(&values);
        history.push(gap);
        let improved = best.as_ref().is_none_or(|b| gap < b.3);
        if improved {
            best = Some((y.clone(), report, values, gap));
        } else {
            theta *= 0.5;
        }
        let (by, _, bv, bgap) = best.as_ref().expect("set on the first pass");
        if *bgap <= options.tolerance {
            break;
        }
        y = by.iter().zip(bv).zip(targets).map(|((y, v), t)| y + theta * (t - v)).collect();
    }
    let (_, mut report, values, gap) = best.expect("at least one evaluation");
    report.projection = Some(ProjectionOutcome {
        functionals: functionals.to_vec(),
        targets: targets.to_vec(),
        values,
        gap,
        iterations,
        converged: gap <= options.tolerance,
        theta,
        history,
    });
    Ok(report)
}

use std::borrow::Cow;
use std::fmt::Write as _;

use log::warn;
use thiserror::Error;

use super::PressureLaw;
use crate::spectral::{grid, Rank, SpectralError, SpectralField, TORUS_VOLUME};
use crate::time::{TimeError, TimeSampledField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("h(g) is not positive on the evaluation grid at t = {t} (min h = {min_h})")]
    Positivity { t: f64, min_h: f64 },
    #[error("non-finite values in the state at t = {t}")]
    NonFinite { t: f64 },
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        last: Box<State>,
    },
    #[error("invalid time step: {0}")]
    InvalidStep(String),
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Time(#[from] TimeError),
}

/// Velocity `u`, log-density `g = ln ρ` and time.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: SpectralField,
    pub g: SpectralField,
    pub t: f64,
}

impl State {
    pub fn new(u: SpectralField, g: SpectralField, t: f64) -> Result<Self, DynamicsError> {
        u.expect_rank(Rank::Vector)?;
        g.expect_rank(Rank::Scalar)?;
        if u.resolution() != g.resolution() {
            return Err(SpectralError::ResolutionMismatch(u.resolution(), g.resolution()).into());
        }
        Ok(State { u, g, t })
    }

    pub fn resolution(&self) -> usize {
        self.u.resolution()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.g.is_finite() && self.t.is_finite()
    }

    fn axpy(&self, s: f64, du: &SpectralField, dg: &SpectralField, t: f64) -> State {
        let mut u = self.u.clone();
        let mut g = self.g.clone();
        u.axpy(s, du).expect("tendency shares the state layout");
        g.axpy(s, dg).expect("tendency shares the state layout");
        State { u, g, t }
    }
}

/// `∫ e^g dx` by padded-grid quadrature.
pub fn mass(g: &SpectralField) -> f64 {
    let vals = g.padded_values();
    let v = &vals.values[0];
    TORUS_VOLUME * v.iter().map(|x| x.exp()).sum::<f64>() / v.len() as f64
}

/// Time-dependent inputs of the generalized system: momentum drift `ζ`,
/// transport drift `ξ`, given force `f` and synthesized force `η`.
/// Absent channels are zero.
#[derive(Clone, Debug, Default)]
pub struct ControlProgram {
    pub zeta: Option<TimeSampledField>,
    pub xi: Option<TimeSampledField>,
    pub force: Option<TimeSampledField>,
    pub eta: Option<TimeSampledField>,
}

/// Control values frozen at one time; `force` holds `f + η`.
#[derive(Clone, Debug, Default)]
pub struct ControlSnapshot {
    pub zeta: Option<SpectralField>,
    pub xi: Option<SpectralField>,
    pub force: Option<SpectralField>,
}

impl ControlProgram {
    pub fn none() -> Self {
        ControlProgram::default()
    }

    pub fn with_zeta(mut self, v: TimeSampledField) -> Self {
        self.zeta = Some(v);
        self
    }

    pub fn with_xi(mut self, v: TimeSampledField) -> Self {
        self.xi = Some(v);
        self
    }

    pub fn with_force(mut self, v: TimeSampledField) -> Self {
        self.force = Some(v);
        self
    }

    pub fn with_eta(mut self, v: TimeSampledField) -> Self {
        self.eta = Some(v);
        self
    }

    fn channels(&self) -> impl Iterator<Item = (&'static str, &TimeSampledField)> {
        [("zeta", &self.zeta), ("xi", &self.xi), ("f", &self.force), ("eta", &self.eta)]
            .into_iter()
            .filter_map(|(n, c)| c.as_ref().map(|c| (n, c)))
    }

    /// All channels must be vector fields at `resolution` covering `[0, horizon]`.
    pub fn validate(&self, resolution: usize, horizon: f64) -> Result<(), DynamicsError> {
        for (name, c) in self.channels() {
            if c.rank() != Rank::Vector || c.resolution() != resolution {
                return Err(DynamicsError::Incompatible(format!(
                    "channel {name} must be a vector field at resolution {resolution}"
                )));
            }
            if (c.horizon() - horizon).abs() > 1e-12 * horizon.max(1.0) {
                return Err(DynamicsError::Incompatible(format!(
                    "channel {name} has horizon {} but the run has {horizon}",
                    c.horizon()
                )));
            }
        }
        Ok(())
    }

    pub fn snapshot(&self, t: f64) -> ControlSnapshot {
        let force = match (&self.force, &self.eta) {
            (None, None) => None,
            (Some(f), None) => Some(f.at(t)),
            (None, Some(e)) => Some(e.at(t)),
            (Some(f), Some(e)) => {
                let mut x = f.at(t);
                x.axpy(1.0, &e.at(t)).expect("channels share the layout");
                Some(x)
            }
        };
        ControlSnapshot {
            zeta: self.zeta.as_ref().map(|z| z.at(t)),
            xi: self.xi.as_ref().map(|x| x.at(t)),
            force,
        }
    }
}

/// Grid quantities gathered while evaluating a tendency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSummary {
    pub max_speed: f64,
    pub max_u: f64,
    pub max_h: f64,
    pub min_g: f64,
    pub max_g: f64,
    pub mass: f64,
}

/// Per-state record of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub u_l2: f64,
    pub u_hk: f64,
    pub g_hk: f64,
    pub cfl: f64,
    pub max_u: f64,
    pub min_g: f64,
    pub max_g: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Sobolev index of the reported norms
    pub sobolev_k: u32,
    /// advisory Courant number
    pub cfl_limit: f64,
    /// blow-up when `‖u‖_4 + ‖g‖_4` exceeds this multiple of its initial value (floored at 1)
    pub blowup_factor: f64,
    /// keep every `stride`-th state (endpoints are always kept); `None` keeps only endpoints
    pub stride: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            sobolev_k: 4,
            cfl_limit: 0.5,
            blowup_factor: 1e3,
            stride: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub dt: f64,
    pub sobolev_k: u32,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectories hold at least one state")
    }

    pub fn initial_state(&self) -> &State {
        &self.states[0]
    }

    /// `max_t |mass(t) − mass(0)| / mass(0)` over every step.
    pub fn relative_mass_drift(&self) -> f64 {
        let m0 = self.diagnostics[0].mass;
        self.diagnostics
            .iter()
            .map(|d| ((d.mass - m0) / m0).abs())
            .fold(0.0, f64::max)
    }

    pub const CSV_HEADER: &'static str = "step,t,mass,u_l2,u_hk,g_hk,cfl,max_u,min_g,max_g";

    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for d in &self.diagnostics {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                d.step, d.t, d.mass, d.u_l2, d.u_hk, d.g_hk, d.cfl, d.max_u, d.min_g, d.max_g
            );
        }
        out
    }
}

/// RK4 / pseudospectral integrator of
///
/// `∂_t u + ((u+ζ)·∇)(u+ζ) + h(g)∇g = f + η`,
/// `∂_t g + ((u+ξ)·∇)g + ∇·(u+ξ) = 0`.
#[derive(Clone, Debug)]
pub struct Solver {
    pub pressure: PressureLaw,
    pub options: SolveOptions,
}

impl Solver {
    pub fn new(pressure: PressureLaw) -> Self {
        Solver {
            pressure,
            options: SolveOptions::default(),
        }
    }

    pub fn with_options(mut self, options: SolveOptions) -> Self {
        self.options = options;
        self
    }

    /// Tendency `(du, dg)` at time `t`.
    pub fn rhs(
        &self,
        state: &State,
        controls: &ControlProgram,
        t: f64,
    ) -> Result<(SpectralField, SpectralField), DynamicsError> {
        let (du, dg, _) = self.tendency(&state.u, &state.g, &controls.snapshot(t), t)?;
        Ok((du, dg))
    }

    /// Tendency for frozen control values, with grid diagnostics.
    pub fn tendency(
        &self,
        u: &SpectralField,
        g: &SpectralField,
        snap: &ControlSnapshot,
        t: f64,
    ) -> Result<(SpectralField, SpectralField, GridSummary), DynamicsError> {
        let layout = u.layout().clone();
        let n = layout.padded_size();
        let total = n * n * n;
        let w: Cow<SpectralField> = match &snap.zeta {
            Some(z) => Cow::Owned(u.add(z)?),
            None => Cow::Borrowed(u),
        };
        let v: Cow<SpectralField> = match &snap.xi {
            Some(x) => Cow::Owned(u.add(x)?),
            None => Cow::Borrowed(u),
        };
        let separate_v = *v != *w;
        let separate_u = snap.zeta.is_some();

        let dw: Vec<SpectralField> = (0..3)
            .flat_map(|c| {
                let wc = w.component(c);
                (0..3).map(move |j| wc.derivative(j))
            })
            .collect();
        let dgs: Vec<SpectralField> = (0..3).map(|j| g.derivative(j)).collect();

        // w (0..3), ∂_j w_c (3..12), g (12), ∂_j g (13..16), then v, then u
        let mut comps: Vec<&[[f64; 2]]> = (0..3).map(|c| w.comp(c)).collect();
        comps.extend(dw.iter().map(|d| d.comp(0)));
        comps.push(g.comp(0));
        comps.extend(dgs.iter().map(|d| d.comp(0)));
        let v_at = comps.len();
        if separate_v {
            comps.extend((0..3).map(|c| v.comp(c)));
        }
        let u_at = comps.len();
        if separate_u {
            comps.extend((0..3).map(|c| u.comp(c)));
        }
        let vals = grid::eval_components(&layout, &comps, n);
        let vj = |j: usize| if separate_v { &vals[v_at + j] } else { &vals[j] };

        let mut du_grid = vec![vec![0.0; total]; 3];
        let mut dg_grid = vec![0.0; total];
        let mut summary = GridSummary {
            max_speed: 0.0,
            max_u: 0.0,
            max_h: 0.0,
            min_g: f64::INFINITY,
            max_g: f64::NEG_INFINITY,
            mass: 0.0,
        };
        let mut min_h = f64::INFINITY;
        let mut exp_sum = 0.0;
        for p in 0..total {
            let gp = vals[12][p];
            if !gp.is_finite() {
                return Err(DynamicsError::NonFinite { t });
            }
            let hp = self.pressure.h(gp);
            min_h = min_h.min(hp);
            summary.max_h = summary.max_h.max(hp);
            summary.min_g = summary.min_g.min(gp);
            summary.max_g = summary.max_g.max(gp);
            exp_sum += gp.exp();
            let (w0, w1, w2) = (vals[0][p], vals[1][p], vals[2][p]);
            summary.max_speed = summary.max_speed.max((w0 * w0 + w1 * w1 + w2 * w2).sqrt());
            if separate_u {
                let (a, b, c) = (vals[u_at][p], vals[u_at + 1][p], vals[u_at + 2][p]);
                summary.max_u = summary.max_u.max((a * a + b * b + c * c).sqrt());
            }
            for (c, out) in du_grid.iter_mut().enumerate() {
                let base = 3 + 3 * c;
                let adv = w0 * vals[base][p] + w1 * vals[base + 1][p] + w2 * vals[base + 2][p];
                out[p] = -adv - hp * vals[13 + c][p];
            }
            dg_grid[p] = -(vj(0)[p] * vals[13][p] + vj(1)[p] * vals[14][p] + vj(2)[p] * vals[15][p]);
        }
        if !(min_h > 0.0) {
            return Err(DynamicsError::Positivity { t, min_h });
        }
        if !separate_u {
            summary.max_u = summary.max_speed;
        }
        summary.mass = TORUS_VOLUME * exp_sum / total as f64;

        let refs: Vec<&[f64]> = du_grid
            .iter()
            .map(|v| v.as_slice())
            .chain(std::iter::once(dg_grid.as_slice()))
            .collect();
        let mut fitted = grid::fit_components(&layout, &refs, n);
        let dg_coeffs = fitted.pop().expect("four fitted components");
        let mut du = SpectralField::from_parts(Rank::Vector, layout.clone(), fitted);
        let mut dg = SpectralField::from_parts(Rank::Scalar, layout, vec![dg_coeffs]);
        if let Some(f) = &snap.force {
            du.axpy(1.0, f)?;
        }
        dg.axpy(-1.0, &v.divergence()?)?;
        Ok((du, dg, summary))
    }

    /// One RK4 step from `state` with the given control snapshots at
    /// `t`, `t + dt/2` and `t + dt`.
    fn rk4(
        &self,
        state: &State,
        dt: f64,
        t_end: f64,
        snaps: [&ControlSnapshot; 3],
    ) -> Result<(State, GridSummary), DynamicsError> {
        let t = state.t;
        let t_mid = t + 0.5 * dt;
        let (k1u, k1g, summary) = self.tendency(&state.u, &state.g, snaps[0], t)?;
        let s2 = state.axpy(0.5 * dt, &k1u, &k1g, t_mid);
        let (k2u, k2g, _) = self.tendency(&s2.u, &s2.g, snaps[1], t_mid)?;
        let s3 = state.axpy(0.5 * dt, &k2u, &k2g, t_mid);
        let (k3u, k3g, _) = self.tendency(&s3.u, &s3.g, snaps[1], t_mid)?;
        let s4 = state.axpy(dt, &k3u, &k3g, t_end);
        let (k4u, k4g, _) = self.tendency(&s4.u, &s4.g, snaps[2], t_end)?;
        let mut next = state.clone();
        next.t = t_end;
        let w = dt / 6.0;
        for (s, ku, kg) in [(w, &k1u, &k1g), (2.0 * w, &k2u, &k2g), (2.0 * w, &k3u, &k3g), (w, &k4u, &k4g)] {
            next.u.axpy(s, ku)?;
            next.g.axpy(s, kg)?;
        }
        Ok((next, summary))
    }

    /// A single RK4 step of size `dt`.
    pub fn step(&self, state: &State, controls: &ControlProgram, dt: f64) -> Result<State, DynamicsError> {
        let t = state.t;
        let snaps = [controls.snapshot(t), controls.snapshot(t + 0.5 * dt), controls.snapshot(t + dt)];
        Ok(self.rk4(state, dt, t + dt, [&snaps[0], &snaps[1], &snaps[2]])?.0)
    }

    pub fn integrator<'a>(
        &'a self,
        u0: &SpectralField,
        g0: &SpectralField,
        controls: &'a ControlProgram,
        horizon: f64,
        dt: f64,
    ) -> Result<Integrator<'a>, DynamicsError> {
        Integrator::new(self, State::new(u0.clone(), g0.clone(), 0.0)?, controls, horizon, dt)
    }

    pub fn solve(
        &self,
        u0: &SpectralField,
        g0: &SpectralField,
        controls: &ControlProgram,
        horizon: f64,
        dt: f64,
    ) -> Result<Trajectory, DynamicsError> {
        self.solve_observed(u0, g0, controls, horizon, dt, |_| Ok(()))
    }

    /// [`solve`](Self::solve) calling `observer` on every state, including both endpoints.
    pub fn solve_observed(
        &self,
        u0: &SpectralField,
        g0: &SpectralField,
        controls: &ControlProgram,
        horizon: f64,
        dt: f64,
        mut observer: impl FnMut(&State) -> Result<(), DynamicsError>,
    ) -> Result<Trajectory, DynamicsError> {
        let mut it = self.integrator(u0, g0, controls, horizon, dt)?;
        let mut states = vec![it.state().clone()];
        let mut diagnostics = Vec::with_capacity(it.steps() + 1);
        observer(it.state())?;
        while !it.done() {
            diagnostics.push(it.advance()?);
            observer(it.state())?;
            let keep = match self.options.stride {
                Some(s) => it.step_index() % s.max(1) == 0,
                None => false,
            };
            if keep || it.done() {
                states.push(it.state().clone());
            }
        }
        diagnostics.push(it.current_diagnostics()?);
        Ok(Trajectory {
            states,
            diagnostics,
            dt: it.dt(),
            sobolev_k: self.options.sobolev_k,
        })
    }
}

/// Step-by-step driver; several integrators can run in lockstep.
pub struct Integrator<'a> {
    solver: &'a Solver,
    controls: &'a ControlProgram,
    state: State,
    dt: f64,
    steps: usize,
    index: usize,
    start: ControlSnapshot,
    ceiling: f64,
    cfl_warned: bool,
}

impl<'a> Integrator<'a> {
    pub fn new(
        solver: &'a Solver,
        state: State,
        controls: &'a ControlProgram,
        horizon: f64,
        dt: f64,
    ) -> Result<Self, DynamicsError> {
        if !(horizon > 0.0 && dt > 0.0 && horizon.is_finite()) {
            return Err(DynamicsError::InvalidStep(format!("T = {horizon}, dt = {dt}")));
        }
        let steps = (horizon / dt).round();
        if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon {
            return Err(DynamicsError::InvalidStep(format!(
                "T = {horizon} is not an integer multiple of dt = {dt}"
            )));
        }
        controls.validate(state.resolution(), horizon)?;
        if !state.is_finite() {
            return Err(DynamicsError::NonFinite { t: state.t });
        }
        let k_norm = blowup_norm(&state);
        let start = controls.snapshot(0.0);
        Ok(Integrator {
            solver,
            controls,
            dt: horizon / steps,
            steps: steps as usize,
            index: 0,
            start,
            ceiling: solver.options.blowup_factor * k_norm.max(1.0),
            cfl_warned: false,
            state,
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_index(&self) -> usize {
        self.index
    }

    pub fn done(&self) -> bool {
        self.index >= self.steps
    }

    fn time(&self, half_steps: usize) -> f64 {
        half_steps as f64 * 0.5 * self.dt
    }

    fn diagnostics(&mut self, summary: &GridSummary) -> StepDiagnostics {
        let dx = 2.0 * std::f64::consts::PI / (2 * self.state.resolution() + 1) as f64;
        let cfl = self.dt * (summary.max_speed + summary.max_h.sqrt()) / dx;
        if cfl > self.solver.options.cfl_limit && !self.cfl_warned {
            warn!(
                "Courant number {cfl:.3} exceeds the advisory limit {} at t = {}",
                self.solver.options.cfl_limit, self.state.t
            );
            self.cfl_warned = true;
        }
        let k = self.solver.options.sobolev_k;
        StepDiagnostics {
            step: self.index,
            t: self.state.t,
            mass: summary.mass,
            u_l2: self.state.u.sobolev_norm(0),
            u_hk: self.state.u.sobolev_norm(k),
            g_hk: self.state.g.sobolev_norm(k),
            cfl,
            max_u: summary.max_u,
            min_g: summary.min_g,
            max_g: summary.max_g,
        }
    }

    /// Diagnostics of the current state (costs one tendency evaluation).
    pub fn current_diagnostics(&mut self) -> Result<StepDiagnostics, DynamicsError> {
        let (_, _, summary) = self
            .solver
            .tendency(&self.state.u, &self.state.g, &self.start, self.state.t)?;
        Ok(self.diagnostics(&summary))
    }

    /// Advances one step; returns the diagnostics of the state it started from.
    pub fn advance(&mut self) -> Result<StepDiagnostics, DynamicsError> {
        let i = self.index;
        let t_end = self.time(2 * i + 2);
        let mid = self.controls.snapshot(self.time(2 * i + 1));
        let end = self.controls.snapshot(t_end);
        let result = self
            .solver
            .rk4(&self.state, self.dt, t_end, [&self.start, &mid, &end]);
        let (next, summary) = match result {
            Ok(x) => x,
            Err(DynamicsError::NonFinite { t }) => {
                return Err(DynamicsError::BlowUp {
                    t,
                    reason: "non-finite values".into(),
                    last: Box::new(self.state.clone()),
                })
            }
            Err(e) => return Err(e),
        };
        let diag = self.diagnostics(&summary);
        let norm = blowup_norm(&next);
        if !norm.is_finite() || norm > self.ceiling {
            return Err(DynamicsError::BlowUp {
                t: t_end,
                reason: format!("‖u‖_4 + ‖g‖_4 = {norm:e} above ceiling {:e}", self.ceiling),
                last: Box::new(self.state.clone()),
            });
        }
        self.state = next;
        self.start = end;
        self.index += 1;
        Ok(diag)
    }
}

fn blowup_norm(state: &State) -> f64 {
    state.u.sobolev_norm(4) + state.g.sobolev_norm(4)
}

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use super::SynthesisError;
use crate::dynamics::{mass, ControlSnapshot, Solver};
use crate::spectral::{GridValues, Rank, SpectralError, SpectralField};
use crate::time::TimeSampledField;

/// Affine path between the mollified endpoints,
/// `u_μ(t) = ((T − t) e^{−μΔ}u0 + t e^{−μΔ}û) / T`.
pub fn interpolate_velocity(
    u0: &SpectralField,
    u_target: &SpectralField,
    mu: f64,
    horizon: f64,
) -> Result<TimeSampledField, SynthesisError> {
    check_mu(mu)?;
    u0.check_compatible(u_target)?;
    let a = u0.mollify(mu);
    let b = u_target.mollify(mu);
    let (rank, res) = (a.rank(), a.resolution());
    Ok(TimeSampledField::analytic(horizon, rank, res, move |t| {
        affine(&a, &b, t / horizon)
    })?)
}

/// Mollified `g` shifted by the constant that gives it mass `alpha`.
pub fn phi_mu(g: &SpectralField, mu: f64, alpha: f64) -> Result<SpectralField, SynthesisError> {
    check_mu(mu)?;
    g.expect_rank(Rank::Scalar)?;
    if !(alpha > 0.0) {
        return Err(SynthesisError::InvalidParams(format!("mass must be positive, got {alpha}")));
    }
    let mut out = g.mollify(mu);
    let shift = (alpha / mass(&out)).ln();
    out.comp_mut(0)[0][0] += shift;
    Ok(out)
}

/// `g_μ(t) = ln(((T − t) e^{φ_μ(g0)} + t e^{φ_μ(ĝ)}) / T)`, evaluated
/// pointwise on the padded grid.
pub fn interpolate_density(
    g0: &SpectralField,
    g_target: &SpectralField,
    mu: f64,
    horizon: f64,
    alpha: f64,
) -> Result<TimeSampledField, SynthesisError> {
    let density = DensityPath::new(g0, g_target, mu, horizon, alpha)?;
    let res = g0.resolution();
    Ok(TimeSampledField::analytic(horizon, Rank::Scalar, res, move |t| {
        density.log_density(t).expect("padded grid fits its own resolution")
    })?)
}

fn check_mu(mu: f64) -> Result<(), SynthesisError> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(SynthesisError::InvalidParams(format!("mollification μ must be positive, got {mu}")))
    }
}

fn affine(a: &SpectralField, b: &SpectralField, s: f64) -> SpectralField {
    let mut out = a.scaled(1.0 - s);
    out.axpy(s, b).expect("endpoints share a layout");
    out
}

/// Endpoint densities `e^{φ_μ(g0)}`, `e^{φ_μ(ĝ)}` on the padded grid.
struct DensityPath {
    horizon: f64,
    resolution: usize,
    n: usize,
    start: Vec<f64>,
    end: Vec<f64>,
}

impl DensityPath {
    fn new(
        g0: &SpectralField,
        g_target: &SpectralField,
        mu: f64,
        horizon: f64,
        alpha: f64,
    ) -> Result<Self, SynthesisError> {
        g0.check_compatible(g_target)?;
        let a = phi_mu(g0, mu, alpha)?.padded_values();
        let b = phi_mu(g_target, mu, alpha)?.padded_values();
        Ok(DensityPath {
            horizon,
            resolution: g0.resolution(),
            n: a.n,
            start: a.values[0].iter().map(|x| x.exp()).collect(),
            end: b.values[0].iter().map(|x| x.exp()).collect(),
        })
    }

    fn rho(&self, t: f64) -> Vec<f64> {
        let s = t / self.horizon;
        self.start
            .iter()
            .zip(&self.end)
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect()
    }

    fn rho_rate(&self) -> Vec<f64> {
        self.start
            .iter()
            .zip(&self.end)
            .map(|(a, b)| (b - a) / self.horizon)
            .collect()
    }

    fn fit(&self, values: Vec<Vec<f64>>) -> Result<SpectralField, SpectralError> {
        let rank = if values.len() == 1 { Rank::Scalar } else { Rank::Vector };
        SpectralField::grid_fit(
            &GridValues {
                n: self.n,
                rank,
                values,
            },
            self.resolution,
        )
    }

    fn log_density(&self, t: f64) -> Result<SpectralField, SpectralError> {
        self.fit(vec![self.rho(t).into_iter().map(f64::ln).collect()])
    }
}

/// Transport drift at one time: solves `∇·(e^g ξ) = −∂_t e^g − ∇·(e^g u)`
/// with the gradient ansatz `e^g ξ = ∇ψ`. Returns `(ξ, ψ)`.
pub fn transport_control(
    u: &SpectralField,
    g: &SpectralField,
    dg_dt: &SpectralField,
    mean_tolerance: f64,
) -> Result<(SpectralField, SpectralField), SynthesisError> {
    u.expect_rank(Rank::Vector)?;
    g.expect_rank(Rank::Scalar)?;
    g.check_compatible(dg_dt)?;
    let gv = g.padded_values();
    let rho: Vec<f64> = gv.values[0].iter().map(|x| x.exp()).collect();
    let dv = dg_dt.padded_values();
    let drho: Vec<f64> = rho.iter().zip(&dv.values[0]).map(|(r, d)| r * d).collect();
    let grid = Grid::new(u.resolution(), gv.n);
    let drho = grid.fit(vec![drho])?;
    let (xi, psi) = solve_transport(&grid, u, &rho, &drho, mean_tolerance)?;
    Ok((xi, psi))
}

struct Grid {
    resolution: usize,
    n: usize,
}

impl Grid {
    fn new(resolution: usize, n: usize) -> Self {
        Grid { resolution, n }
    }

    fn fit(&self, values: Vec<Vec<f64>>) -> Result<SpectralField, SpectralError> {
        let rank = if values.len() == 1 { Rank::Scalar } else { Rank::Vector };
        SpectralField::grid_fit(
            &GridValues {
                n: self.n,
                rank,
                values,
            },
            self.resolution,
        )
    }

    /// Pointwise `ρ · v` for a vector field `v`.
    fn weighted(&self, rho: &[f64], v: &SpectralField) -> Result<SpectralField, SpectralError> {
        let vals = v.padded_values();
        self.fit(
            vals.values
                .into_iter()
                .map(|c| c.iter().zip(rho).map(|(x, r)| x * r).collect())
                .collect(),
        )
    }
}

fn solve_transport(
    grid: &Grid,
    u: &SpectralField,
    rho: &[f64],
    drho: &SpectralField,
    mean_tolerance: f64,
) -> Result<(SpectralField, SpectralField), SynthesisError> {
    let flux = grid.weighted(rho, u)?;
    let mut rhs = flux.divergence()?;
    rhs.axpy(1.0, drho)?;
    rhs.scale_in_place(-1.0);
    let psi = rhs.poisson_solve(mean_tolerance)?;
    let inv: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
    let xi = grid.weighted(&inv, &psi.gradient()?)?;
    Ok((xi, psi))
}

/// `∂_t e^g + ∇·(e^g (u + ξ))` at one time.
pub fn continuity_residual(
    u: &SpectralField,
    xi: &SpectralField,
    g: &SpectralField,
    dg_dt: &SpectralField,
) -> Result<SpectralField, SynthesisError> {
    let gv = g.padded_values();
    let rho: Vec<f64> = gv.values[0].iter().map(|x| x.exp()).collect();
    let dv = dg_dt.padded_values();
    let grid = Grid::new(u.resolution(), gv.n);
    let mut out = grid.fit(vec![rho.iter().zip(&dv.values[0]).map(|(r, d)| r * d).collect()])?;
    out.axpy(1.0, &grid.weighted(&rho, &u.add(xi)?)?.divergence()?)?;
    Ok(out)
}

/// Force that makes `(u, g)` with rate `du_dt` a solution of the generalized
/// system with `ζ = ξ = xi` and given force `force`:
/// `η = ∂_t u + ((u + ξ)·∇)(u + ξ) + h(g)∇g − f`,
/// evaluated with the solver's own dealiased products.
pub fn forcing_control(
    solver: &Solver,
    u: &SpectralField,
    du_dt: &SpectralField,
    g: &SpectralField,
    xi: &SpectralField,
    force: Option<&SpectralField>,
    t: f64,
) -> Result<SpectralField, SynthesisError> {
    let snap = ControlSnapshot {
        zeta: Some(xi.clone()),
        xi: Some(xi.clone()),
        force: force.cloned(),
    };
    let (tendency, _, _) = solver.tendency(u, g, &snap, t)?;
    Ok(du_dt.sub(&tendency)?)
}

/// Everything the pipeline needs at one time of the interpolating path.
#[derive(Clone, Debug)]
pub struct PathPoint {
    pub t: f64,
    pub u: SpectralField,
    pub g: SpectralField,
    /// transport drift `ξ_μ`
    pub xi: SpectralField,
    /// `∂_t ξ_μ`
    pub dxi: SpectralField,
    /// synthesized force `η_μ`
    pub eta: SpectralField,
    /// L² norm of the continuity residual of `(u + ξ, g)`
    pub residual: f64,
}

/// The Step-1 construction for one steering problem: interpolants, transport
/// drift and forcing, evaluated on demand with a small cache so that the
/// channels of one solver snapshot share a single evaluation.
pub struct SteeringPath {
    horizon: f64,
    mean_tolerance: f64,
    u_start: SpectralField,
    u_end: SpectralField,
    du: SpectralField,
    density: DensityPath,
    drho: SpectralField,
    solver: Solver,
    force: Option<TimeSampledField>,
    cache: Mutex<VecDeque<(u64, Arc<PathPoint>)>>,
    error: Mutex<Option<SynthesisError>>,
    max_residual: Mutex<f64>,
}

const CACHE_SLOTS: usize = 6;

impl SteeringPath {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        u0: &SpectralField,
        u_target: &SpectralField,
        g0: &SpectralField,
        g_target: &SpectralField,
        mu: f64,
        horizon: f64,
        alpha: f64,
        solver: Solver,
        force: Option<TimeSampledField>,
        mean_tolerance: f64,
    ) -> Result<Self, SynthesisError> {
        check_mu(mu)?;
        u0.expect_rank(Rank::Vector)?;
        u0.check_compatible(u_target)?;
        if u0.resolution() != g0.resolution() {
            return Err(SpectralError::ResolutionMismatch(u0.resolution(), g0.resolution()).into());
        }
        let u_start = u0.mollify(mu);
        let u_end = u_target.mollify(mu);
        let mut du = u_end.sub(&u_start)?;
        du.scale_in_place(1.0 / horizon);
        let density = DensityPath::new(g0, g_target, mu, horizon, alpha)?;
        let drho = density.fit(vec![density.rho_rate()])?;
        Ok(SteeringPath {
            horizon,
            mean_tolerance,
            u_start,
            u_end,
            du,
            density,
            drho,
            solver,
            force,
            cache: Mutex::new(VecDeque::with_capacity(CACHE_SLOTS)),
            error: Mutex::new(None),
            max_residual: Mutex::new(0.0),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn resolution(&self) -> usize {
        self.u_start.resolution()
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn force(&self) -> Option<&TimeSampledField> {
        self.force.as_ref()
    }

    /// Mollified initial state `(e^{−μΔ}u0, φ_μ(g0))`.
    pub fn start(&self) -> Result<(SpectralField, SpectralField), SynthesisError> {
        Ok((self.u_start.clone(), self.density.log_density(0.0)?))
    }

    /// Mollified target `(e^{−μΔ}û, φ_μ(ĝ))`.
    pub fn end(&self) -> Result<(SpectralField, SpectralField), SynthesisError> {
        Ok((self.u_end.clone(), self.density.log_density(self.horizon)?))
    }

    pub fn velocity(&self, t: f64) -> SpectralField {
        affine(&self.u_start, &self.u_end, t / self.horizon)
    }

    pub fn log_density(&self, t: f64) -> Result<SpectralField, SynthesisError> {
        Ok(self.density.log_density(t)?)
    }

    /// Full evaluation at `t` (cached).
    pub fn point(&self, t: f64) -> Result<Arc<PathPoint>, SynthesisError> {
        let key = t.to_bits();
        if let Some(p) = self.cached(key) {
            return Ok(p);
        }
        let p = Arc::new(self.compute(t)?);
        {
            let mut worst = self.max_residual.lock().expect("residual lock");
            *worst = worst.max(p.residual);
        }
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() == CACHE_SLOTS {
            cache.pop_front();
        }
        cache.push_back((key, p.clone()));
        Ok(p)
    }

    fn cached(&self, key: u64) -> Option<Arc<PathPoint>> {
        let cache = self.cache.lock().expect("cache lock");
        cache.iter().find(|(k, _)| *k == key).map(|(_, p)| p.clone())
    }

    fn compute(&self, t: f64) -> Result<PathPoint, SynthesisError> {
        let d = &self.density;
        let grid = Grid::new(self.resolution(), d.n);
        let u = self.velocity(t);
        let rho = d.rho(t);
        let g = d.fit(vec![rho.iter().map(|r| r.ln()).collect()])?;
        let (xi, psi) = solve_transport(&grid, &u, &rho, &self.drho, self.mean_tolerance)?;

        // ∂_t of the transport equation; ∂_t² ρ = 0 along the affine density path
        let rate = d.rho_rate();
        let mut rhs = grid.weighted(&rate, &u)?;
        rhs.axpy(1.0, &grid.weighted(&rho, &self.du)?)?;
        let mut rhs = rhs.divergence()?;
        rhs.scale_in_place(-1.0);
        let dpsi = rhs.poisson_solve(self.mean_tolerance)?;
        let grad = psi.gradient()?.padded_values();
        let dgrad = dpsi.gradient()?.padded_values();
        let dxi = grid.fit(
            (0..3)
                .map(|c| {
                    (0..rho.len())
                        .map(|p| dgrad.values[c][p] / rho[p] - grad.values[c][p] * rate[p] / (rho[p] * rho[p]))
                        .collect()
                })
                .collect(),
        )?;

        let force = self.force.as_ref().map(|f| f.at(t));
        let eta = forcing_control(&self.solver, &u, &self.du, &g, &xi, force.as_ref(), t)?;

        let mut residual = grid.weighted(&rho, &u.add(&xi)?)?.divergence()?;
        residual.axpy(1.0, &self.drho)?;
        Ok(PathPoint {
            t,
            residual: residual.sobolev_norm(0),
            u,
            g,
            xi,
            dxi,
            eta,
        })
    }

    /// Evaluates through `f`, parking any error for [`take_error`](Self::take_error)
    /// and returning the zero field in its place (time paths cannot fail).
    pub fn eval_or_park(&self, t: f64, f: impl Fn(&PathPoint) -> SpectralField) -> SpectralField {
        match self.point(t) {
            Ok(p) => f(&p),
            Err(e) => {
                let mut slot = self.error.lock().expect("error lock");
                if slot.is_none() {
                    *slot = Some(e);
                }
                SpectralField::zeros(Rank::Vector, self.resolution())
            }
        }
    }

    /// Largest continuity residual over the times evaluated so far.
    pub fn max_residual(&self) -> f64 {
        *self.max_residual.lock().expect("residual lock")
    }

    /// First error met while evaluating through [`eval_or_park`](Self::eval_or_park).
    pub fn take_error(&self) -> Result<(), SynthesisError> {
        match self.error.lock().expect("error lock").take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Time channel of a shared path.
pub fn path_channel(
    path: &Arc<SteeringPath>,
    f: impl Fn(&PathPoint) -> SpectralField + Send + Sync + 'static,
) -> Result<TimeSampledField, SynthesisError> {
    let p = path.clone();
    Ok(TimeSampledField::analytic(
        path.horizon(),
        Rank::Vector,
        path.resolution(),
        move |t| p.eval_or_park(t, &f),
    )?)
}

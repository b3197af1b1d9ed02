use super::{ControlProgram, ControlSnapshot, DynamicsError, Solver};
use crate::spectral::SpectralField;

/// Data `(u0, g0, ζ, ξ, f)` of the generalized system (`η` is folded into `f`).
#[derive(Clone, Debug)]
pub struct InputTuple {
    pub u0: SpectralField,
    pub g0: SpectralField,
    pub controls: ControlProgram,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeResult {
    /// `sup_t` of the `H^{k−1}` distance between the two solutions
    pub output_gap: f64,
    /// `X^{k−1}` distance of the inputs
    pub input_gap: f64,
    /// `output_gap / input_gap`, defined as 0 when both vanish
    pub ratio: f64,
}

fn diff_sq(a: &Option<SpectralField>, b: &Option<SpectralField>, k: u32) -> Result<f64, DynamicsError> {
    Ok(match (a, b) {
        (None, None) => 0.0,
        (Some(x), None) | (None, Some(x)) => x.sobolev_norm_sq(k),
        (Some(x), Some(y)) => x.sub(y)?.sobolev_norm_sq(k),
    })
}

fn snapshot_gap_sq(a: &ControlSnapshot, b: &ControlSnapshot, k: u32) -> Result<f64, DynamicsError> {
    Ok(diff_sq(&a.zeta, &b.zeta, k)? + diff_sq(&a.xi, &b.xi, k)? + diff_sq(&a.force, &b.force, k - 1)?)
}

/// Finite-difference Lipschitz ratio of the resolving operator in the
/// `X^{k−1} → Y^{k−1}` norms, with both trajectories integrated in lockstep.
///
/// `Y^{k−1}`: `sup_t (‖Δu‖²_{k−1} + ‖Δg‖²_{k−1})^{1/2}` over the step grid.
/// `X^{k−1}`: `‖Δu0‖²_{k−1} + ‖Δg0‖²_{k−1} + ∫‖Δζ‖²_k + ∫‖Δξ‖²_k + ∫‖Δf‖²_{k−1}`
/// (square root), time integrals by Simpson's rule on each step.
pub fn lipschitz_probe(
    solver: &Solver,
    a: &InputTuple,
    b: &InputTuple,
    horizon: f64,
    dt: f64,
    k: u32,
) -> Result<ProbeResult, DynamicsError> {
    if k == 0 {
        return Err(DynamicsError::Incompatible("the probe needs k >= 1".into()));
    }
    let km = k - 1;
    let mut ia = solver.integrator(&a.u0, &a.g0, &a.controls, horizon, dt)?;
    let mut ib = solver.integrator(&b.u0, &b.g0, &b.controls, horizon, dt)?;
    let h = ia.dt();
    let state_gap = |x: &super::State, y: &super::State| -> Result<f64, DynamicsError> {
        Ok((x.u.sub(&y.u)?.sobolev_norm_sq(km) + x.g.sub(&y.g)?.sobolev_norm_sq(km)).sqrt())
    };
    let mut input_sq = a.u0.sub(&b.u0)?.sobolev_norm_sq(km) + a.g0.sub(&b.g0)?.sobolev_norm_sq(km);
    for i in 0..ia.steps() {
        let t0 = i as f64 * h;
        let gaps = [t0, t0 + 0.5 * h, t0 + h].map(|t| {
            snapshot_gap_sq(&a.controls.snapshot(t), &b.controls.snapshot(t), k)
        });
        let [g0, g1, g2] = gaps;
        input_sq += h / 6.0 * (g0? + 4.0 * g1? + g2?);
    }
    let mut output_gap = state_gap(ia.state(), ib.state())?;
    while !ia.done() {
        ia.advance()?;
        ib.advance()?;
        output_gap = output_gap.max(state_gap(ia.state(), ib.state())?);
    }
    let input_gap = input_sq.sqrt();
    let ratio = if input_gap == 0.0 {
        if output_gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        output_gap / input_gap
    };
    Ok(ProbeResult {
        output_gap,
        input_gap,
        ratio,
    })
}

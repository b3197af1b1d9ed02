use super::SynthesisError;
use crate::spectral::SpectralField;
use crate::time::TimeSampledField;

/// Smooth time cutoff: 0 at both endpoints, 1 on `[δ, T − δ]`, with
/// polynomial smoothstep ramps of continuity order `order`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub horizon: f64,
    pub delta: f64,
    pub order: u32,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl Cutoff {
    pub fn new(horizon: f64, delta: f64, order: u32) -> Result<Self, SynthesisError> {
        if !(delta > 0.0 && delta < horizon / 4.0) {
            return Err(SynthesisError::InvalidParams(format!(
                "cutoff width δ = {delta} must lie in (0, T/4) for T = {horizon}"
            )));
        }
        Ok(Cutoff { horizon, delta, order })
    }

    /// `S(x) = x^{k+1} Σ_j C(k+j, j) C(2k+1, k−j) (−x)^j` on `[0, 1]`.
    fn ramp(&self, x: f64) -> f64 {
        let k = self.order;
        let x = x.clamp(0.0, 1.0);
        let sum: f64 = (0..=k)
            .map(|j| binomial(k + j, j) * binomial(2 * k + 1, k - j) * (-x).powi(j as i32))
            .sum();
        x.powi(k as i32 + 1) * sum
    }

    /// `S′(x) = (2k+1)!/(k!)² x^k (1 − x)^k`.
    fn ramp_rate(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let k = self.order;
        let c = (2 * k + 1) as f64 * binomial(2 * k, k);
        c * (x * (1.0 - x)).powi(k as i32)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.horizon {
            0.0
        } else if t < self.delta {
            self.ramp(t / self.delta)
        } else if t > self.horizon - self.delta {
            self.ramp((self.horizon - t) / self.delta)
        } else {
            1.0
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        if t < self.delta {
            self.ramp_rate(t / self.delta) / self.delta
        } else if t > self.horizon - self.delta {
            -self.ramp_rate((self.horizon - t) / self.delta) / self.delta
        } else {
            0.0
        }
    }
}

/// Fourth-order finite-difference `∂_t` of a path, one-sided near the
/// endpoints so that no sample leaves `[0, T]`.
pub fn time_derivative(path: &TimeSampledField, t: f64, h: f64) -> SpectralField {
    let horizon = path.horizon();
    // stencil offsets (in units of h) and weights for the first derivative
    const CENTRAL: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
    const FORWARD: [(f64, f64); 5] = [
        (0.0, -25.0 / 12.0),
        (1.0, 4.0),
        (2.0, -3.0),
        (3.0, 4.0 / 3.0),
        (4.0, -1.0 / 4.0),
    ];
    let (stencil, sign): (&[(f64, f64)], f64) = if t - 2.0 * h >= 0.0 && t + 2.0 * h <= horizon {
        (&CENTRAL, 1.0)
    } else if t - 2.0 * h < 0.0 {
        (&FORWARD, 1.0)
    } else {
        (&FORWARD, -1.0)
    };
    let mut out = SpectralField::zeros(path.rank(), path.resolution());
    for &(o, w) in stencil {
        out.axpy(sign * w / h, &path.at(t + sign * o * h))
            .expect("path samples share a layout");
    }
    out
}

/// `(ξ^δ, ∂_t ξ^δ)` for `ξ^δ = χ_δ ξ`. The derivative uses `dxi` when given,
/// otherwise fourth-order differences of `xi` with step `δ/64`.
pub fn mollify_endpoints(
    xi: &TimeSampledField,
    dxi: Option<&TimeSampledField>,
    cutoff: Cutoff,
) -> Result<(TimeSampledField, TimeSampledField), SynthesisError> {
    if (xi.horizon() - cutoff.horizon).abs() > 1e-12 * cutoff.horizon {
        return Err(SynthesisError::InvalidParams("cutoff and path horizons differ".into()));
    }
    let (rank, res, horizon) = (xi.rank(), xi.resolution(), xi.horizon());
    let x = xi.clone();
    let cut = TimeSampledField::analytic(horizon, rank, res, move |t| x.at(t).scaled(cutoff.value(t)))?;
    let x = xi.clone();
    let dx = dxi.cloned();
    let h = cutoff.delta / 64.0;
    let rate = TimeSampledField::analytic(horizon, rank, res, move |t| {
        let inner = match &dx {
            Some(d) => d.at(t),
            None => time_derivative(&x, t, h),
        };
        let mut out = x.at(t).scaled(cutoff.rate(t));
        out.axpy(cutoff.value(t), &inner).expect("path samples share a layout");
        out
    })?;
    Ok((cut, rate))
}

/// Additive force equivalent to running with drift `ζ = ξ = ξ^δ` and force
/// `η`: with `v = u + ξ^δ`, `v` solves the drift-free system with force
/// `η + ∂_t ξ^δ` and shares its endpoint values with `u`.
pub fn reduce_to_additive(
    eta: &TimeSampledField,
    xi_delta: &TimeSampledField,
    dxi_delta: &TimeSampledField,
) -> Result<TimeSampledField, SynthesisError> {
    let horizon = eta.horizon();
    for t in [0.0, horizon] {
        let size = xi_delta.at(t).max_abs_coefficient();
        if size != 0.0 {
            return Err(SynthesisError::EndpointViolation { t, size });
        }
    }
    let (e, d) = (eta.clone(), dxi_delta.clone());
    Ok(TimeSampledField::analytic(horizon, eta.rank(), eta.resolution(), move |t| {
        let mut out = e.at(t);
        out.axpy(1.0, &d.at(t)).expect("channels share a layout");
        out
    })?)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// Interval averages on `t_r = rT/s` (4-point Gauss rule per interval,
/// `panels` panels per interval), as a piecewise-constant control.
pub fn discretize_control(
    psi: &TimeSampledField,
    s: usize,
    panels: usize,
) -> Result<TimeSampledField, SynthesisError> {
    if s == 0 || panels == 0 {
        return Err(SynthesisError::InvalidParams("subdivision counts must be at least 1".into()));
    }
    let horizon = psi.horizon();
    let width = horizon / s as f64;
    let mut times = Vec::with_capacity(s + 1);
    let mut fields = Vec::with_capacity(s + 1);
    for r in 0..s {
        let a = r as f64 * width;
        let mut avg = SpectralField::zeros(psi.rank(), psi.resolution());
        let pw = width / panels as f64;
        for p in 0..panels {
            let b = a + p as f64 * pw;
            for (x, w) in GAUSS4 {
                avg.axpy(w / panels as f64, &psi.at(b + x * pw))?;
            }
        }
        times.push(a);
        fields.push(avg);
    }
    times.push(horizon);
    fields.push(fields[s - 1].clone());
    Ok(TimeSampledField::piecewise_constant(times, fields)?)
}

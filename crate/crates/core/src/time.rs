//! Time-dependent fields on `[0, T]`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::spectral::{Rank, SpectralError, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeError {
    #[error("a sampled field needs at least one sample")]
    Empty,
    #[error("sample times must be strictly increasing")]
    NotIncreasing,
    #[error("sample times must start at 0 and end at T (got {first} .. {last})")]
    Endpoints { first: f64, last: f64 },
    #[error("{times} times for {fields} fields")]
    LengthMismatch { times: usize, fields: usize },
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// linear between neighbouring samples
    Linear,
    /// sample `r` holds on `[t_r, t_{r+1})`; the last sample holds at `T`
    Constant,
}

type Callback = Arc<dyn Fn(f64) -> SpectralField + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Sampled {
        times: Vec<f64>,
        fields: Vec<SpectralField>,
        rule: Interpolation,
    },
    Analytic {
        rank: Rank,
        resolution: usize,
        eval: Callback,
    },
}

/// A field-valued function of time on `[0, T]`.
#[derive(Clone)]
pub struct TimeSampledField {
    horizon: f64,
    repr: Repr,
}

impl fmt::Debug for TimeSampledField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Sampled { times, rule, .. } => f
                .debug_struct("TimeSampledField")
                .field("horizon", &self.horizon)
                .field("samples", &times.len())
                .field("rule", rule)
                .finish(),
            Repr::Analytic { rank, resolution, .. } => f
                .debug_struct("TimeSampledField")
                .field("horizon", &self.horizon)
                .field("analytic", &(rank, resolution))
                .finish(),
        }
    }
}

impl TimeSampledField {
    pub fn sampled(
        times: Vec<f64>,
        fields: Vec<SpectralField>,
        rule: Interpolation,
    ) -> Result<Self, TimeError> {
        if times.len() != fields.len() {
            return Err(TimeError::LengthMismatch {
                times: times.len(),
                fields: fields.len(),
            });
        }
        if fields.is_empty() {
            return Err(TimeError::Empty);
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TimeError::NotIncreasing);
        }
        let (first, last) = (times[0], times[times.len() - 1]);
        if first != 0.0 || !(last > 0.0) || !last.is_finite() {
            return Err(TimeError::Endpoints { first, last });
        }
        for f in &fields[1..] {
            fields[0].check_compatible(f)?;
        }
        Ok(TimeSampledField {
            horizon: last,
            repr: Repr::Sampled { times, fields, rule },
        })
    }

    pub fn piecewise_linear(times: Vec<f64>, fields: Vec<SpectralField>) -> Result<Self, TimeError> {
        Self::sampled(times, fields, Interpolation::Linear)
    }

    pub fn piecewise_constant(
        times: Vec<f64>,
        fields: Vec<SpectralField>,
    ) -> Result<Self, TimeError> {
        Self::sampled(times, fields, Interpolation::Constant)
    }

    /// Closed-form path; `eval` must return fields of the declared rank and resolution.
    pub fn analytic(
        horizon: f64,
        rank: Rank,
        resolution: usize,
        eval: impl Fn(f64) -> SpectralField + Send + Sync + 'static,
    ) -> Result<Self, TimeError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(TimeError::BadHorizon(horizon));
        }
        Ok(TimeSampledField {
            horizon,
            repr: Repr::Analytic {
                rank,
                resolution,
                eval: Arc::new(eval),
            },
        })
    }

    pub fn constant(field: SpectralField, horizon: f64) -> Result<Self, TimeError> {
        Self::sampled(vec![0.0, horizon], vec![field.clone(), field], Interpolation::Linear)
    }

    pub fn zero(rank: Rank, resolution: usize, horizon: f64) -> Result<Self, TimeError> {
        Self::constant(SpectralField::zeros(rank, resolution), horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rank(&self) -> Rank {
        match &self.repr {
            Repr::Sampled { fields, .. } => fields[0].rank(),
            Repr::Analytic { rank, .. } => *rank,
        }
    }

    pub fn resolution(&self) -> usize {
        match &self.repr {
            Repr::Sampled { fields, .. } => fields[0].resolution(),
            Repr::Analytic { resolution, .. } => *resolution,
        }
    }

    /// Sample times and values, `None` for analytic paths.
    pub fn samples(&self) -> Option<(&[f64], &[SpectralField], Interpolation)> {
        match &self.repr {
            Repr::Sampled { times, fields, rule } => Some((times, fields, *rule)),
            Repr::Analytic { .. } => None,
        }
    }

    /// Value at `t`, clamped to `[0, T]`.
    pub fn at(&self, t: f64) -> SpectralField {
        let t = t.clamp(0.0, self.horizon);
        match &self.repr {
            Repr::Analytic { eval, .. } => eval(t),
            Repr::Sampled { times, fields, rule } => {
                // index of the last sample with time <= t
                let r = times.partition_point(|&s| s <= t).saturating_sub(1);
                match rule {
                    Interpolation::Constant => fields[r].clone(),
                    Interpolation::Linear => {
                        if r + 1 >= times.len() {
                            return fields[r].clone();
                        }
                        let w = (t - times[r]) / (times[r + 1] - times[r]);
                        if w == 0.0 {
                            return fields[r].clone();
                        }
                        let mut out = fields[r].scaled(1.0 - w);
                        out.axpy(w, &fields[r + 1]).expect("samples share a layout");
                        out
                    }
                }
            }
        }
    }

    /// Applies a field map samplewise (or pointwise in time for analytic paths).
    pub fn map(
        &self,
        f: impl Fn(&SpectralField) -> SpectralField + Send + Sync + 'static,
    ) -> TimeSampledField {
        match &self.repr {
            Repr::Sampled { times, fields, rule } => TimeSampledField {
                horizon: self.horizon,
                repr: Repr::Sampled {
                    times: times.clone(),
                    fields: fields.iter().map(&f).collect(),
                    rule: *rule,
                },
            },
            Repr::Analytic { eval, .. } => {
                let inner = eval.clone();
                let probe = f(&inner(0.0));
                TimeSampledField {
                    horizon: self.horizon,
                    repr: Repr::Analytic {
                        rank: probe.rank(),
                        resolution: probe.resolution(),
                        eval: Arc::new(move |t| f(&inner(t))),
                    },
                }
            }
        }
    }

    /// Samples the path at `count + 1` uniform times as a piecewise-linear field.
    pub fn resample_uniform(&self, count: usize) -> TimeSampledField {
        let count = count.max(1);
        let times: Vec<f64> = (0..=count)
            .map(|i| self.horizon * i as f64 / count as f64)
            .collect();
        let fields = times.iter().map(|&t| self.at(t)).collect();
        Self::piecewise_linear(times, fields).expect("uniform grid is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Frequency, Kind};

    fn mode() -> SpectralField {
        SpectralField::mode(Kind::Cos, None, Frequency::new(1, 0, 0), 2).unwrap()
    }

    #[test]
    fn linear_midpoint() {
        let z = SpectralField::zeros(Rank::Scalar, 2);
        let p = TimeSampledField::piecewise_linear(vec![0.0, 2.0], vec![z, mode()]).unwrap();
        let mid = p.at(1.0);
        assert_eq!(mid.coefficient(0, Frequency::new(1, 0, 0)), Some((0.5, 0.0)));
        assert_eq!(p.at(2.0), mode());
    }

    #[test]
    fn constant_holds_left_value() {
        let z = SpectralField::zeros(Rank::Scalar, 2);
        let p = TimeSampledField::piecewise_constant(vec![0.0, 1.0, 2.0], vec![z.clone(), mode(), z])
            .unwrap();
        assert_eq!(p.at(0.999), SpectralField::zeros(Rank::Scalar, 2));
        assert_eq!(p.at(1.0), mode());
    }

    #[test]
    fn rejects_bad_grids() {
        let z = SpectralField::zeros(Rank::Scalar, 2);
        assert_eq!(
            TimeSampledField::piecewise_linear(vec![0.0, 0.0], vec![z.clone(), z.clone()]).unwrap_err(),
            TimeError::NotIncreasing
        );
        assert!(matches!(
            TimeSampledField::piecewise_linear(vec![0.1, 1.0], vec![z.clone(), z]),
            Err(TimeError::Endpoints { .. })
        ));
    }
}

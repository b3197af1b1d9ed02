use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::{Mode, Q};
use crate::spectral::{Frequency, Kind, SpectralError, SpectralField};

/// Vector trigonometric polynomial with exact rational coefficients, keyed by
/// canonical modes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrigPoly {
    terms: BTreeMap<Mode, Q>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly::default()
    }

    pub fn mode(mode: Mode) -> Self {
        let mut p = TrigPoly::zero();
        p.add_term(Q::one(), mode);
        p
    }

    /// Adds `coef * mode`, rewriting `mode` to its canonical frequency.
    pub fn add_term(&mut self, coef: Q, mode: Mode) {
        let Some((canon, sign)) = mode.canonical() else {
            return;
        };
        let entry = self.terms.entry(canon).or_insert_with(Q::zero);
        *entry += coef * Q::from_integer(sign);
        if entry.is_zero() {
            self.terms.remove(&canon);
        }
    }

    pub fn add_scaled(&mut self, coef: Q, other: &TrigPoly) {
        for (m, c) in &other.terms {
            self.add_term(coef * c, *m);
        }
    }

    pub fn scaled(&self, coef: Q) -> TrigPoly {
        let mut out = TrigPoly::zero();
        out.add_scaled(coef, self);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mode: &Mode) -> Q {
        match mode.canonical() {
            Some((canon, sign)) => {
                self.terms.get(&canon).copied().unwrap_or_else(Q::zero) * Q::from_integer(sign)
            }
            None => Q::zero(),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mode, &Q)> {
        self.terms.iter()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = Frequency> + '_ {
        self.terms.keys().map(|m| m.freq)
    }

    /// Part of the polynomial at canonical frequency `freq`.
    pub fn at_frequency(&self, freq: Frequency) -> TrigPoly {
        let freq = freq.canonical().0;
        TrigPoly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.freq == freq)
                .map(|(m, c)| (*m, *c))
                .collect(),
        }
    }

    /// Exact `(a·∇)b`.
    pub fn advect(a: &TrigPoly, b: &TrigPoly) -> TrigPoly {
        let mut out = TrigPoly::zero();
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                advect_modes(&mut out, *ca * cb, ma, mb);
            }
        }
        out
    }

    /// `(a·∇)a`
    pub fn quadratic(a: &TrigPoly) -> TrigPoly {
        TrigPoly::advect(a, a)
    }

    /// `(a·∇)b + (b·∇)a`
    pub fn symmetric(a: &TrigPoly, b: &TrigPoly) -> TrigPoly {
        let mut out = TrigPoly::advect(a, b);
        out.add_scaled(Q::one(), &TrigPoly::advect(b, a));
        out
    }

    pub fn max_abs_frequency(&self) -> u32 {
        self.terms.keys().map(|m| m.freq.max_abs()).max().unwrap_or(0)
    }

    pub fn to_field(&self, resolution: usize) -> Result<SpectralField, SpectralError> {
        let mut f = SpectralField::zeros(crate::spectral::Rank::Vector, resolution);
        for (m, c) in &self.terms {
            f.add_mode(m.kind, m.comp(), m.freq, to_f64(c))?;
        }
        Ok(f)
    }
}

pub fn to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Accumulates `coef * (a·∇)b` for pure modes `a = e_p A(n·x)`, `b = e_q B(m·x)`:
/// the result is `e_q A(n·x) m_p B'(m·x)`.
fn advect_modes(out: &mut TrigPoly, coef: Q, a: &Mode, b: &Mode) {
    let mp = b.freq.0[a.comp()];
    if mp == 0 || (a.kind == Kind::Sin && a.freq.is_zero()) {
        return;
    }
    // B' = -sin for cos, cos for sin
    let (db_kind, db_sign) = match b.kind {
        Kind::Cos => (Kind::Sin, -1),
        Kind::Sin => (Kind::Cos, 1),
    };
    let scale = coef * Q::from_integer(mp as i64 * db_sign) * Q::new(1, 2);
    let sum = a.freq + b.freq;
    let diff = a.freq - b.freq;
    let i = b.i;
    // product-to-sum for A(α) C(β)
    let terms: [(i64, Kind, Frequency); 2] = match (a.kind, db_kind) {
        (Kind::Cos, Kind::Cos) => [(1, Kind::Cos, sum), (1, Kind::Cos, diff)],
        (Kind::Sin, Kind::Sin) => [(-1, Kind::Cos, sum), (1, Kind::Cos, diff)],
        (Kind::Sin, Kind::Cos) => [(1, Kind::Sin, sum), (1, Kind::Sin, diff)],
        (Kind::Cos, Kind::Sin) => [(1, Kind::Sin, sum), (-1, Kind::Sin, diff)],
    };
    for (s, kind, freq) in terms {
        out.add_term(scale * Q::from_integer(s), Mode::new(kind, i, freq));
    }
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " {} ", if c.is_negative() { '-' } else { '+' })?;
                write!(f, "{}·{m}", c.abs())?;
            } else {
                write!(f, "{c}·{m}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cos_self_advection() {
        // (c^1_{100}·∇) c^1_{100} = -1/2 s^1_{200}
        let c = TrigPoly::mode(Mode::cos(1, [1, 0, 0]));
        let mut expect = TrigPoly::zero();
        expect.add_term(Q::new(-1, 2), Mode::sin(1, [2, 0, 0]));
        assert_eq!(TrigPoly::quadratic(&c), expect);
    }

    #[test]
    fn transverse_advection_vanishes() {
        let c = TrigPoly::mode(Mode::cos(2, [1, 0, 0]));
        assert!(TrigPoly::quadratic(&c).is_zero());
    }

    #[test]
    fn negative_frequencies_canonicalize() {
        let mut p = TrigPoly::zero();
        p.add_term(Q::one(), Mode::sin(1, [-1, 0, 0]));
        assert_eq!(p.coefficient(&Mode::sin(1, [1, 0, 0])), Q::from_integer(-1));
        p.add_term(Q::one(), Mode::sin(1, [1, 0, 0]));
        assert!(p.is_zero());
    }
}

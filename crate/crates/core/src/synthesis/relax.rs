use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::saturation::{to_f64, DecompositionTree, Mode, TrigPoly, Q};
use crate::spectral::{Rank, SpectralField};
use crate::time::TimeSampledField;

/// `(u·∇)u − η1 = Σ_j w_j ((u + ζ_j)·∇)(u + ζ_j) − η` for every `u`, with
/// convex weights and `ζ_{j+n} = −ζ_j`.
#[derive(Clone, Debug)]
pub struct ConvexSplit {
    pub eta: SpectralField,
    pub weights: Vec<f64>,
    pub zetas: Vec<SpectralField>,
}

impl ConvexSplit {
    /// `Σ_j w_j ((u + ζ_j)·∇)(u + ζ_j) − η`.
    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField, SynthesisError> {
        let mut out = self.eta.scaled(-1.0);
        for (w, z) in self.weights.iter().zip(&self.zetas) {
            let v = u.add(z)?;
            out.axpy(*w, &SpectralField::advect(&v, &v)?)?;
        }
        Ok(out)
    }
}

fn poly_of(terms: &[crate::saturation::Term]) -> Result<TrigPoly, SynthesisError> {
    let mut p = TrigPoly::zero();
    for t in terms {
        if !t.mode.in_base_space() {
            return Err(SynthesisError::Weights(format!("{} is not a basis element", t.mode)));
        }
        p.add_term(t.coef, t.mode);
    }
    Ok(p)
}

/// Flattens a tree of level at most one into `η − Σ λ_j (ζ_j·∇)ζ_j` with
/// `η`, `ζ_j` in the base space.
fn flatten(
    tree: &DecompositionTree,
    mode: &Mode,
    coef: Q,
    eta: &mut TrigPoly,
    pairs: &mut Vec<(Q, TrigPoly)>,
    root: bool,
) -> Result<(), SynthesisError> {
    if !root && mode.in_base_space() {
        eta.add_term(coef, *mode);
        return Ok(());
    }
    let node = tree
        .node(mode)
        .ok_or_else(|| SynthesisError::Weights(format!("missing node {mode}")))?;
    for t in &node.eta {
        flatten(tree, &t.mode, coef * t.coef, eta, pairs, false)?;
    }
    for p in &node.pairs {
        let w = coef * p.lambda;
        if !w.is_positive() {
            return Err(SynthesisError::Weights(format!(
                "interaction in {} enters with weight {w}",
                node.target
            )));
        }
        pairs.push((w, poly_of(&p.zeta)?));
    }
    Ok(())
}

/// Convex ±-paired rewriting of a level-one decomposition: with
/// `η1 = η − Σ_{i≤n} λ_i (ζ_i·∇)ζ_i`, weights are `1/(2n)` and the drifts
/// `±√(n λ_i) ζ_i`. A tree without interactions gets `n = 1`, `ζ = 0`.
pub fn convex_split(tree: &DecompositionTree, resolution: usize) -> Result<ConvexSplit, SynthesisError> {
    if tree.level() > 1 {
        return Err(SynthesisError::Weights(format!(
            "convex splitting needs a tree of level at most 1, got {}",
            tree.level()
        )));
    }
    let mut eta = TrigPoly::zero();
    let mut pairs = Vec::new();
    flatten(tree, tree.root(), Q::from_integer(1), &mut eta, &mut pairs, true)?;
    let eta = eta.to_field(resolution)?;
    if pairs.is_empty() {
        let zero = SpectralField::zeros(Rank::Vector, resolution);
        return Ok(ConvexSplit {
            eta,
            weights: vec![0.5, 0.5],
            zetas: vec![zero.clone(), zero],
        });
    }
    let n = pairs.len();
    let mut plus = Vec::with_capacity(n);
    for (lambda, zeta) in &pairs {
        plus.push(zeta.to_field(resolution)?.scaled((n as f64 * to_f64(lambda)).sqrt()));
    }
    let minus: Vec<SpectralField> = plus.iter().map(|z| z.scaled(-1.0)).collect();
    Ok(ConvexSplit {
        eta,
        weights: vec![1.0 / (2 * n) as f64; 2 * n],
        zetas: plus.into_iter().chain(minus).collect(),
    })
}

/// Fast-oscillating drift `ζ_n(t) = ζ(n t / T)`, where the 1-periodic `ζ`
/// takes the value `ζ^j` for a fraction `d_j` of the first half period and
/// `−ζ^j` for the same fraction of the second half.
#[derive(Clone, Debug)]
pub struct OscillatingControl {
    weights: Vec<Q>,
    vectors: Vec<SpectralField>,
    n: usize,
    horizon: f64,
}

impl OscillatingControl {
    /// `weights` (exact, summing to 1/2) and `vectors` describe the first half period.
    pub fn new(weights: Vec<Q>, vectors: Vec<SpectralField>, n: usize, horizon: f64) -> Result<Self, SynthesisError> {
        if weights.is_empty() || weights.len() != vectors.len() {
            return Err(SynthesisError::Weights("one weight per vector is required".into()));
        }
        if weights.iter().any(|d| d.is_negative()) {
            return Err(SynthesisError::Weights("duty cycles must be nonnegative".into()));
        }
        let total: Q = weights.iter().sum();
        if total != Q::new(1, 2) {
            return Err(SynthesisError::Weights(format!("duty cycles sum to {total}, expected 1/2")));
        }
        if n == 0 || !(horizon > 0.0) {
            return Err(SynthesisError::InvalidParams("need n >= 1 and T > 0".into()));
        }
        for v in &vectors[1..] {
            vectors[0].check_compatible(v)?;
        }
        vectors[0].expect_rank(Rank::Vector)?;
        Ok(OscillatingControl {
            weights,
            vectors,
            n,
            horizon,
        })
    }

    /// Square wave `±v`.
    pub fn square_wave(v: SpectralField, n: usize, horizon: f64) -> Result<Self, SynthesisError> {
        Self::new(vec![Q::new(1, 2)], vec![v], n, horizon)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// All `2q` weights and vectors (second half negated).
    pub fn full_cycle(&self) -> (Vec<Q>, Vec<SpectralField>) {
        let w = self.weights.iter().chain(&self.weights).copied().collect();
        let v = self
            .vectors
            .iter()
            .cloned()
            .chain(self.vectors.iter().map(|v| v.scaled(-1.0)))
            .collect();
        (w, v)
    }

    /// Breakpoints of one period as exact fractions of the period, with the
    /// index of the vector (into [`full_cycle`](Self::full_cycle)) active after each.
    pub fn breakpoints(&self) -> Vec<(Q, usize)> {
        let (w, _) = self.full_cycle();
        let mut at = Q::zero();
        let mut out = Vec::new();
        for (j, d) in w.iter().enumerate() {
            if !d.is_zero() {
                out.push((at, j));
            }
            at += d;
        }
        out
    }

    /// `∫` of `ζ_n` over one period `[pT/n, (p+1)T/n)`, with the piece
    /// durations accumulated exactly per vector before conversion.
    pub fn period_integral(&self) -> SpectralField {
        let q = self.weights.len();
        let marks = self.breakpoints();
        let mut coef = vec![Q::zero(); q];
        for (i, (start, j)) in marks.iter().enumerate() {
            let end = marks.get(i + 1).map_or(Q::from_integer(1), |m| m.0);
            let sign = if *j < q { Q::from_integer(1) } else { Q::from_integer(-1) };
            coef[j % q] += sign * (end - start);
        }
        let period = self.horizon / self.n as f64;
        let mut out = SpectralField::zeros(Rank::Vector, self.vectors[0].resolution());
        for (c, v) in coef.iter().zip(&self.vectors) {
            out.axpy(period * to_f64(c), v).expect("shared layout");
        }
        out
    }

    pub fn path(&self) -> Result<TimeSampledField, SynthesisError> {
        let (_, vectors) = self.full_cycle();
        let period = self.horizon / self.n as f64;
        let marks = self.breakpoints();
        let mut times = Vec::with_capacity(self.n * marks.len() + 1);
        let mut fields = Vec::with_capacity(times.capacity());
        for p in 0..self.n {
            for (frac, j) in &marks {
                times.push(period * (p as f64 + to_f64(frac)));
                fields.push(vectors[*j].clone());
            }
        }
        times.push(self.horizon);
        fields.push(fields.last().expect("at least one piece").clone());
        Ok(TimeSampledField::piecewise_constant(times, fields)?)
    }
}

/// `f_n = ((u1 + ζ_n)·∇)(u1 + ζ_n) − Σ_i d_i ((u1 + ζ^i)·∇)(u1 + ζ^i)`.
pub fn relaxation_forcing(u1: &TimeSampledField, control: &OscillatingControl) -> Result<TimeSampledField, SynthesisError> {
    let zeta = control.path()?;
    let (w, vectors) = control.full_cycle();
    let weights: Vec<f64> = w.iter().map(|d| to_f64(d)).collect();
    let u1 = u1.clone();
    Ok(TimeSampledField::analytic(u1.horizon(), Rank::Vector, u1.resolution(), move |t| {
        let u = u1.at(t);
        let v = u.add(&zeta.at(t)).expect("shared layout");
        let mut out = SpectralField::advect(&v, &v).expect("vector fields");
        for (d, z) in weights.iter().zip(&vectors) {
            if *d == 0.0 {
                continue;
            }
            let v = u.add(z).expect("shared layout");
            out.axpy(-d, &SpectralField::advect(&v, &v).expect("vector fields"))
                .expect("shared layout");
        }
        out
    })?)
}

/// `sup_t ‖∫_0^t f‖_{H^k}` with the primitive accumulated by the midpoint
/// rule on `intervals` equal cells (exact for integrands constant on cells).
pub fn primitive_sup_norm(f: &TimeSampledField, intervals: usize, k: u32) -> f64 {
    let h = f.horizon() / intervals as f64;
    let mut acc = SpectralField::zeros(f.rank(), f.resolution());
    let mut sup: f64 = 0.0;
    for i in 0..intervals {
        acc.axpy(h, &f.at((i as f64 + 0.5) * h)).expect("shared layout");
        sup = sup.max(acc.sobolev_norm(k));
    }
    sup
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRow {
    pub n: usize,
    pub sup_norm: f64,
    /// `sup_norm` over the previous row's
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationTable {
    pub k: u32,
    pub rows: Vec<RelaxationRow>,
    /// every successive ratio is at most [`DECAY_RATIO`]
    pub decaying: bool,
}

/// Successive ratio above which a family is flagged as not relaxing.
pub const DECAY_RATIO: f64 = 0.9;

/// Decay table of `sup_t ‖K f_n‖_{H^k}` over `ns`.
pub fn relaxation_check(
    family: impl Fn(usize) -> Result<TimeSampledField, SynthesisError>,
    ns: &[usize],
    k: u32,
    intervals: usize,
) -> Result<RelaxationTable, SynthesisError> {
    let mut rows: Vec<RelaxationRow> = Vec::with_capacity(ns.len());
    for &n in ns {
        let sup_norm = primitive_sup_norm(&family(n)?, intervals, k);
        let ratio = rows.last().map(|r| sup_norm / r.sup_norm);
        rows.push(RelaxationRow { n, sup_norm, ratio });
    }
    let decaying = rows.iter().filter_map(|r| r.ratio).all(|r| r <= DECAY_RATIO);
    Ok(RelaxationTable { k, rows, decaying })
}

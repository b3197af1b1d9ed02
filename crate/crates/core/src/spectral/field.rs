use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{self, Layout};
use super::{Frequency, SpectralError, TORUS_VOLUME};

/// Scalar or 3-vector field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    Scalar,
    Vector,
}

impl Rank {
    pub fn components(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => 3,
        }
    }
}

/// Trigonometric kind of a pure mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Cos,
    Sin,
}

impl Kind {
    pub fn other(self) -> Kind {
        match self {
            Kind::Cos => Kind::Sin,
            Kind::Sin => Kind::Cos,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Cos => write!(f, "cos"),
            Kind::Sin => write!(f, "sin"),
        }
    }
}

impl std::str::FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cos" | "c" => Ok(Kind::Cos),
            "sin" | "s" => Ok(Kind::Sin),
            other => Err(format!("unknown mode kind `{other}` (expected cos or sin)")),
        }
    }
}

/// Real field on the 3-torus stored as cos/sin amplitudes over canonical
/// frequencies with `|m_j| <= M`:
///
/// `f(x) = Σ_m a_m cos⟨m,x⟩ + b_m sin⟨m,x⟩`.
///
/// The amplitude pair at `m = 0` is `(mean, 0)`.
#[derive(Clone)]
pub struct SpectralField {
    rank: Rank,
    layout: Arc<Layout>,
    /// component-major: `data[c * len + idx]`
    data: Vec<[f64; 2]>,
}

/// Point values of a field on an `n^3` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridValues {
    pub n: usize,
    pub rank: Rank,
    /// one flattened array per component, third axis fastest
    pub values: Vec<Vec<f64>>,
}

impl GridValues {
    /// Grid point coordinates for a flat index.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let n = self.n;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        [
            (flat / (n * n)) as f64 * h,
            ((flat / n) % n) as f64 * h,
            (flat % n) as f64 * h,
        ]
    }
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero = self.data.iter().filter(|c| c[0] != 0.0 || c[1] != 0.0).count();
        f.debug_struct("SpectralField")
            .field("rank", &self.rank)
            .field("resolution", &self.resolution())
            .field("nonzero", &nonzero)
            .finish()
    }
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.rank == other.rank
            && self.resolution() == other.resolution()
            && self.data == other.data
    }
}

impl SpectralField {
    pub fn zeros(rank: Rank, resolution: usize) -> Self {
        let layout = grid::layout(resolution);
        let data = vec![[0.0; 2]; layout.len() * rank.components()];
        SpectralField { rank, layout, data }
    }

    pub fn constant_scalar(value: f64, resolution: usize) -> Self {
        let mut f = Self::zeros(Rank::Scalar, resolution);
        f.data[0] = [value, 0.0];
        f
    }

    pub fn constant_vector(value: [f64; 3], resolution: usize) -> Self {
        let mut f = Self::zeros(Rank::Vector, resolution);
        let len = f.layout.len();
        for (c, v) in value.iter().enumerate() {
            f.data[c * len] = [*v, 0.0];
        }
        f
    }

    /// Pure mode `e_i cos⟨m,x⟩` / `e_i sin⟨m,x⟩` (vector, `component = Some(i)`,
    /// zero-based) or the scalar `cos⟨m,x⟩` / `sin⟨m,x⟩` (`component = None`).
    pub fn mode(
        kind: Kind,
        component: Option<usize>,
        m: Frequency,
        resolution: usize,
    ) -> Result<Self, SpectralError> {
        if !m.fits(resolution) {
            return Err(SpectralError::FrequencyOutOfRange { m, resolution });
        }
        let (rank, comp) = match component {
            Some(i) if i < 3 => (Rank::Vector, i),
            Some(i) => return Err(SpectralError::BadComponent(i)),
            None => (Rank::Scalar, 0),
        };
        let mut f = Self::zeros(rank, resolution);
        f.add_mode(kind, comp, m, 1.0)?;
        Ok(f)
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn resolution(&self) -> usize {
        self.layout.resolution
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn components(&self) -> usize {
        self.rank.components()
    }

    /// Amplitudes of one component, indexed like `layout().freqs`.
    pub fn comp(&self, c: usize) -> &[[f64; 2]] {
        let len = self.layout.len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [[f64; 2]] {
        let len = self.layout.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    pub(crate) fn from_parts(rank: Rank, layout: Arc<Layout>, comps: Vec<Vec<[f64; 2]>>) -> Self {
        debug_assert_eq!(comps.len(), rank.components());
        let data = comps.into_iter().flatten().collect();
        SpectralField { rank, layout, data }
    }

    /// Scalar field holding component `c`.
    pub fn component(&self, c: usize) -> SpectralField {
        SpectralField {
            rank: Rank::Scalar,
            layout: self.layout.clone(),
            data: self.comp(c).to_vec(),
        }
    }

    pub fn from_components(parts: [&SpectralField; 3]) -> Result<Self, SpectralError> {
        let res = parts[0].resolution();
        for p in parts {
            p.expect_rank(Rank::Scalar)?;
            if p.resolution() != res {
                return Err(SpectralError::ResolutionMismatch(res, p.resolution()));
            }
        }
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Ok(SpectralField {
            rank: Rank::Vector,
            layout: parts[0].layout.clone(),
            data,
        })
    }

    pub fn expect_rank(&self, rank: Rank) -> Result<(), SpectralError> {
        if self.rank == rank {
            Ok(())
        } else {
            Err(SpectralError::RankMismatch {
                expected: rank,
                found: self.rank,
            })
        }
    }

    pub fn check_compatible(&self, other: &SpectralField) -> Result<(), SpectralError> {
        if self.resolution() != other.resolution() {
            return Err(SpectralError::ResolutionMismatch(
                self.resolution(),
                other.resolution(),
            ));
        }
        if self.rank != other.rank {
            return Err(SpectralError::RankMismatch {
                expected: self.rank,
                found: other.rank,
            });
        }
        Ok(())
    }

    /// `(cos, sin)` amplitude of `e_c·` at frequency `m`; `m` need not be canonical.
    pub fn coefficient(&self, c: usize, m: Frequency) -> Option<(f64, f64)> {
        let (idx, negated) = self.layout.index_of(&m)?;
        let [a, b] = self.comp(c)[idx];
        Some(if negated { (a, -b) } else { (a, b) })
    }

    /// Adds `amp · e_c kind⟨m,x⟩`.
    pub fn add_mode(
        &mut self,
        kind: Kind,
        c: usize,
        m: Frequency,
        amp: f64,
    ) -> Result<(), SpectralError> {
        if c >= self.components() {
            return Err(SpectralError::BadComponent(c));
        }
        let resolution = self.resolution();
        let (idx, negated) = self
            .layout
            .index_of(&m)
            .ok_or(SpectralError::FrequencyOutOfRange { m, resolution })?;
        let slot = &mut self.comp_mut(c)[idx];
        match kind {
            Kind::Cos => slot[0] += amp,
            Kind::Sin if m.is_zero() => {}
            Kind::Sin if negated => slot[1] -= amp,
            Kind::Sin => slot[1] += amp,
        }
        Ok(())
    }

    /// Mean of component `c` over the torus (the `m = 0` coefficient).
    pub fn mean(&self, c: usize) -> f64 {
        self.comp(c)[0][0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c[0].is_finite() && c[1].is_finite())
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.data
            .iter()
            .map(|c| c[0].abs().max(c[1].abs()))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale_in_place(s);
        out
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for c in &mut self.data {
            c[0] *= s;
            c[1] *= s;
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &SpectralField) -> Result<(), SpectralError> {
        self.check_compatible(other)?;
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            x[0] += s * y[0];
            x[1] += s * y[1];
        }
        Ok(())
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField, SpectralError> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField, SpectralError> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    fn map_coefficients(&self, mut f: impl FnMut(usize, [f64; 2]) -> [f64; 2]) -> SpectralField {
        let len = self.layout.len();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &c)| f(k % len, c))
            .collect();
        SpectralField {
            rank: self.rank,
            layout: self.layout.clone(),
            data,
        }
    }

    /// Exact term-by-term `∂/∂x_axis` (zero-based axis).
    pub fn derivative(&self, axis: usize) -> SpectralField {
        let freqs = &self.layout.freqs;
        self.map_coefficients(|idx, [a, b]| {
            let k = freqs[idx].0[axis] as f64;
            // ∂(a cos θ + b sin θ) = k b cos θ - k a sin θ
            [k * b, -k * a]
        })
    }

    pub fn gradient(&self) -> Result<SpectralField, SpectralError> {
        self.expect_rank(Rank::Scalar)?;
        let parts = [self.derivative(0), self.derivative(1), self.derivative(2)];
        SpectralField::from_components([&parts[0], &parts[1], &parts[2]])
    }

    pub fn divergence(&self) -> Result<SpectralField, SpectralError> {
        self.expect_rank(Rank::Vector)?;
        let mut out = self.component(0).derivative(0);
        out.axpy(1.0, &self.component(1).derivative(1))?;
        out.axpy(1.0, &self.component(2).derivative(2))?;
        Ok(out)
    }

    pub fn laplacian(&self) -> SpectralField {
        let l2 = &self.layout.l2;
        self.map_coefficients(|idx, [a, b]| [-l2[idx] * a, -l2[idx] * b])
    }

    /// Heat-semigroup smoothing: multiplies the amplitude at `m` by `exp(-μ|m|²)`.
    pub fn mollify(&self, mu: f64) -> SpectralField {
        let l2 = &self.layout.l2;
        self.map_coefficients(|idx, [a, b]| {
            let w = (-mu * l2[idx]).exp();
            [w * a, w * b]
        })
    }

    /// Keeps only frequencies with `|m|_1 <= radius`.
    pub fn truncate_l1(&self, radius: u32) -> SpectralField {
        let freqs = &self.layout.freqs;
        self.map_coefficients(|idx, c| if freqs[idx].l1() <= radius { c } else { [0.0; 2] })
    }

    /// Keeps only frequencies accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(&Frequency) -> bool) -> SpectralField {
        let freqs = &self.layout.freqs;
        self.map_coefficients(|idx, c| if keep(&freqs[idx]) { c } else { [0.0; 2] })
    }

    /// Explicit change of resolution: zero-extends or truncates.
    pub fn resample(&self, resolution: usize) -> SpectralField {
        let mut out = SpectralField::zeros(self.rank, resolution);
        for c in 0..self.components() {
            for (idx, f) in self.layout.freqs.iter().enumerate() {
                if let Some((j, _)) = out.layout.index_of(f) {
                    out.comp_mut(c)[j] = self.comp(c)[idx];
                }
            }
        }
        out
    }

    /// Inverse of the Laplacian on mean-zero data. The mean of `self` must be
    /// below `mean_tolerance` relative to the field's L² scale.
    pub fn poisson_solve(&self, mean_tolerance: f64) -> Result<SpectralField, SpectralError> {
        self.expect_rank(Rank::Scalar)?;
        let mean = self.mean(0);
        let scale = (self.sobolev_norm(0) / TORUS_VOLUME.sqrt()).max(1.0);
        if mean.abs() > mean_tolerance * scale {
            return Err(SpectralError::Solvability {
                mean,
                tolerance: mean_tolerance * scale,
            });
        }
        let l2 = &self.layout.l2;
        Ok(self.map_coefficients(|idx, [a, b]| {
            if idx == 0 {
                [0.0, 0.0]
            } else {
                [-a / l2[idx], -b / l2[idx]]
            }
        }))
    }

    /// `‖f‖_k² = Σ_m (1+|m|²)^k · ∫|f_m|²`, summed over components.
    pub fn sobolev_norm(&self, k: u32) -> f64 {
        self.sobolev_norm_sq(k).sqrt()
    }

    pub fn sobolev_norm_sq(&self, k: u32) -> f64 {
        let len = self.layout.len();
        let l2 = &self.layout.l2;
        let mut total = 0.0;
        for (i, c) in self.data.iter().enumerate() {
            let idx = i % len;
            let weight = (1.0 + l2[idx]).powi(k as i32);
            let energy = if idx == 0 {
                TORUS_VOLUME * c[0] * c[0]
            } else {
                0.5 * TORUS_VOLUME * (c[0] * c[0] + c[1] * c[1])
            };
            total += weight * energy;
        }
        total
    }

    /// L²(T³) inner product.
    pub fn inner(&self, other: &SpectralField) -> Result<f64, SpectralError> {
        self.check_compatible(other)?;
        let len = self.layout.len();
        let mut total = 0.0;
        for (i, (x, y)) in self.data.iter().zip(other.data.iter()).enumerate() {
            total += if i % len == 0 {
                TORUS_VOLUME * x[0] * y[0]
            } else {
                0.5 * TORUS_VOLUME * (x[0] * y[0] + x[1] * y[1])
            };
        }
        Ok(total)
    }

    /// Direct trigonometric summation at a point.
    pub fn eval_at(&self, x: [f64; 3]) -> Vec<f64> {
        (0..self.components())
            .map(|c| {
                self.layout
                    .freqs
                    .iter()
                    .zip(self.comp(c))
                    .map(|(m, &[a, b])| {
                        let theta =
                            m.0[0] as f64 * x[0] + m.0[1] as f64 * x[1] + m.0[2] as f64 * x[2];
                        a * theta.cos() + b * theta.sin()
                    })
                    .sum()
            })
            .collect()
    }

    /// Point values on the `n^3` grid; `n < 2M + 1` would alias and is rejected.
    pub fn grid_eval(&self, n: usize) -> Result<GridValues, SpectralError> {
        if n < self.layout.min_grid() {
            return Err(SpectralError::Undersampled {
                n,
                resolution: self.resolution(),
            });
        }
        Ok(self.grid_eval_unchecked(n))
    }

    pub(crate) fn grid_eval_unchecked(&self, n: usize) -> GridValues {
        let comps: Vec<&[[f64; 2]]> = (0..self.components()).map(|c| self.comp(c)).collect();
        GridValues {
            n,
            rank: self.rank,
            values: grid::eval_components(&self.layout, &comps, n),
        }
    }

    /// Inverse of [`grid_eval`](Self::grid_eval) with truncation to `resolution`.
    pub fn grid_fit(values: &GridValues, resolution: usize) -> Result<SpectralField, SpectralError> {
        if values.n < 2 * resolution + 1 {
            return Err(SpectralError::Undersampled {
                n: values.n,
                resolution,
            });
        }
        let layout = grid::layout(resolution);
        let refs: Vec<&[f64]> = values.values.iter().map(|v| v.as_slice()).collect();
        let comps = grid::fit_components(&layout, &refs, values.n);
        Ok(SpectralField::from_parts(values.rank, layout, comps))
    }

    /// Point values on the padded (dealiasing) grid.
    pub fn padded_values(&self) -> GridValues {
        self.grid_eval_unchecked(self.layout.padded_size())
    }

    /// Applies `f` pointwise on the padded grid and refits (scalar fields).
    pub fn map_pointwise(&self, f: impl Fn(f64) -> f64) -> Result<SpectralField, SpectralError> {
        self.expect_rank(Rank::Scalar)?;
        let mut vals = self.padded_values();
        for v in vals.values[0].iter_mut() {
            *v = f(*v);
        }
        SpectralField::grid_fit(&vals, self.resolution())
    }

    /// Dealiased pointwise product of a scalar field with a scalar or vector field.
    pub fn multiply(&self, other: &SpectralField) -> Result<SpectralField, SpectralError> {
        self.expect_rank(Rank::Scalar)?;
        if self.resolution() != other.resolution() {
            return Err(SpectralError::ResolutionMismatch(
                self.resolution(),
                other.resolution(),
            ));
        }
        let n = self.layout.padded_size();
        let mut comps: Vec<&[[f64; 2]]> = vec![self.comp(0)];
        comps.extend((0..other.components()).map(|c| other.comp(c)));
        let vals = grid::eval_components(&self.layout, &comps, n);
        let products: Vec<Vec<f64>> = vals[1..]
            .iter()
            .map(|v| v.iter().zip(vals[0].iter()).map(|(x, s)| x * s).collect())
            .collect();
        let refs: Vec<&[f64]> = products.iter().map(|v| v.as_slice()).collect();
        let fitted = grid::fit_components(&self.layout, &refs, n);
        Ok(SpectralField::from_parts(other.rank, self.layout.clone(), fitted))
    }

    /// Dealiased transport derivative `(a·∇)b` for vector `a` and scalar or vector `b`.
    pub fn advect(a: &SpectralField, b: &SpectralField) -> Result<SpectralField, SpectralError> {
        a.expect_rank(Rank::Vector)?;
        if a.resolution() != b.resolution() {
            return Err(SpectralError::ResolutionMismatch(a.resolution(), b.resolution()));
        }
        let n = a.layout.padded_size();
        let nb = b.components();
        let derivs: Vec<SpectralField> = (0..nb)
            .flat_map(|c| {
                let bc = b.component(c);
                (0..3).map(move |j| bc.derivative(j))
            })
            .collect();
        let mut comps: Vec<&[[f64; 2]]> = (0..3).map(|j| a.comp(j)).collect();
        comps.extend(derivs.iter().map(|d| d.comp(0)));
        let vals = grid::eval_components(&a.layout, &comps, n);
        let total = n * n * n;
        let out: Vec<Vec<f64>> = (0..nb)
            .map(|c| {
                let mut acc = vec![0.0; total];
                for j in 0..3 {
                    let aj = &vals[j];
                    let dj = &vals[3 + 3 * c + j];
                    for p in 0..total {
                        acc[p] += aj[p] * dj[p];
                    }
                }
                acc
            })
            .collect();
        let refs: Vec<&[f64]> = out.iter().map(|v| v.as_slice()).collect();
        let fitted = grid::fit_components(&a.layout, &refs, n);
        Ok(SpectralField::from_parts(b.rank, a.layout.clone(), fitted))
    }

    /// Iterator over `(component, frequency, cos, sin)` of nonzero amplitudes.
    pub fn nonzero_records(&self) -> impl Iterator<Item = (usize, Frequency, f64, f64)> + '_ {
        let len = self.layout.len();
        self.data.iter().enumerate().filter_map(move |(i, c)| {
            if c[0].to_bits() == 0 && c[1].to_bits() == 0 {
                None
            } else {
                Some((i / len, self.layout.freqs[i % len], c[0], c[1]))
            }
        })
    }
}

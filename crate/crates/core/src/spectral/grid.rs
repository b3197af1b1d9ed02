//! Coefficient layouts and 3D transforms between canonical cos/sin amplitudes
//! and point values on uniform periodic grids.
//!
//! Two real components are transformed per complex FFT (real part / imaginary
//! part packing), so every batch of `c` components costs `ceil(c/2)` transforms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Frequency;

/// Canonical frequency ordering for resolution `M`: zero first, then every
/// frequency in `[-M, M]^3` whose first nonzero component is positive, in
/// lexicographic order.
#[derive(Debug)]
pub struct Layout {
    pub resolution: usize,
    pub freqs: Vec<Frequency>,
    pub l2: Vec<f64>,
    /// dense `(2M+1)^3` table: canonical index of `m` or of `-m`
    lookup: Vec<u32>,
}

impl Layout {
    fn build(resolution: usize) -> Layout {
        let m = resolution as i32;
        let mut freqs = Vec::new();
        for a in 0..=m {
            for b in -m..=m {
                for c in -m..=m {
                    let f = Frequency::new(a, b, c);
                    if f.is_canonical() {
                        freqs.push(f);
                    }
                }
            }
        }
        let side = 2 * resolution + 1;
        let mut lookup = vec![u32::MAX; side * side * side];
        for (idx, f) in freqs.iter().enumerate() {
            lookup[Self::dense(resolution, f)] = idx as u32;
            lookup[Self::dense(resolution, &-*f)] = idx as u32;
        }
        let l2 = freqs.iter().map(|f| f.l2_sq() as f64).collect();
        Layout {
            resolution,
            freqs,
            l2,
            lookup,
        }
    }

    fn dense(resolution: usize, f: &Frequency) -> usize {
        let side = 2 * resolution + 1;
        let r = resolution as i32;
        let i = (f.0[0] + r) as usize;
        let j = (f.0[1] + r) as usize;
        let k = (f.0[2] + r) as usize;
        (i * side + j) * side + k
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Canonical index of `m` plus whether `m` itself is the negated representative.
    pub fn index_of(&self, m: &Frequency) -> Option<(usize, bool)> {
        if !m.fits(self.resolution) {
            return None;
        }
        let idx = self.lookup[Self::dense(self.resolution, m)] as usize;
        Some((idx, !m.is_canonical()))
    }

    /// Padded grid size used for dealiased quadratic products.
    pub fn padded_size(&self) -> usize {
        good_size(3 * self.resolution + 1)
    }

    pub fn min_grid(&self) -> usize {
        2 * self.resolution + 1
    }
}

pub fn layout(resolution: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("layout cache poisoned");
    guard
        .entry(resolution)
        .or_insert_with(|| Arc::new(Layout::build(resolution)))
        .clone()
}

/// Smallest 2-3-5 smooth integer `>= n`.
pub fn good_size(n: usize) -> usize {
    let mut k = n.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unnormalized 3D transform in place; `inverse` sums `X_k e^{+ikx}`.
fn fft3(buf: &mut Vec<Complex64>, n: usize, inverse: bool) {
    let p = plans(n);
    let fft = if inverse { &p.inverse } else { &p.forward };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut rotated = vec![Complex64::new(0.0, 0.0); buf.len()];
    for _ in 0..3 {
        fft.process_with_scratch(buf, &mut scratch);
        // (a, b, c) -> (c, a, b)
        for a in 0..n {
            for b in 0..n {
                let src = (a * n + b) * n;
                for c in 0..n {
                    rotated[(c * n + a) * n + b] = buf[src + c];
                }
            }
        }
        std::mem::swap(buf, &mut rotated);
    }
}

#[inline]
fn grid_index(n: usize, m: &Frequency) -> usize {
    let w = |c: i32| c.rem_euclid(n as i32) as usize;
    (w(m.0[0]) * n + w(m.0[1])) * n + w(m.0[2])
}

/// Point values of several real components on the `n^3` grid
/// `x_j = 2πj/n`, flattened with the third axis fastest.
pub fn eval_components(layout: &Layout, comps: &[&[[f64; 2]]], n: usize) -> Vec<Vec<f64>> {
    let total = n * n * n;
    let mut out = Vec::with_capacity(comps.len());
    for pair in comps.chunks(2) {
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        let first = pair[0];
        let second = pair.get(1).copied();
        for (idx, f) in layout.freqs.iter().enumerate() {
            let [a, b] = first[idx];
            let (c, d) = second.map(|s| (s[idx][0], s[idx][1])).unwrap_or((0.0, 0.0));
            if f.is_zero() {
                buf[0] = Complex64::new(a, c);
                continue;
            }
            // coefficient of e^{imx}: (a - ib)/2, of e^{-imx}: (a + ib)/2
            let p_pos = Complex64::new(0.5 * a, -0.5 * b);
            let q_pos = Complex64::new(0.5 * c, -0.5 * d);
            let i = Complex64::new(0.0, 1.0);
            buf[grid_index(n, f)] = p_pos + i * q_pos;
            buf[grid_index(n, &-*f)] = p_pos.conj() + i * q_pos.conj();
        }
        fft3(&mut buf, n, true);
        out.push(buf.iter().map(|z| z.re).collect());
        if second.is_some() {
            out.push(buf.iter().map(|z| z.im).collect());
        }
    }
    out
}

/// Least-squares (exact for band-limited data) cos/sin amplitudes of grid
/// values, truncated to `layout`'s resolution. Requires `n >= 2M + 1`.
pub fn fit_components(layout: &Layout, values: &[&[f64]], n: usize) -> Vec<Vec<[f64; 2]>> {
    let total = n * n * n;
    let norm = 1.0 / total as f64;
    let mut out = Vec::with_capacity(values.len());
    for pair in values.chunks(2) {
        let mut buf: Vec<Complex64> = match pair.get(1) {
            Some(second) => pair[0]
                .iter()
                .zip(second.iter())
                .map(|(&x, &y)| Complex64::new(x, y))
                .collect(),
            None => pair[0].iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        debug_assert_eq!(buf.len(), total);
        fft3(&mut buf, n, false);
        let mut first = vec![[0.0; 2]; layout.len()];
        let mut second = vec![[0.0; 2]; layout.len()];
        for (idx, f) in layout.freqs.iter().enumerate() {
            let zp = buf[grid_index(n, f)] * norm;
            let zm = buf[grid_index(n, &-*f)].conj() * norm;
            // P = (Z_m + conj Z_{-m})/2, Q = (Z_m - conj Z_{-m})/(2i)
            let p = (zp + zm) * 0.5;
            let q = (zp - zm) * Complex64::new(0.0, -0.5);
            if f.is_zero() {
                first[idx] = [p.re, 0.0];
                second[idx] = [q.re, 0.0];
            } else {
                first[idx] = [2.0 * p.re, -2.0 * p.im];
                second[idx] = [2.0 * q.re, -2.0 * q.im];
            }
        }
        out.push(first);
        if pair.len() > 1 {
            out.push(second);
        }
    }
    out
}

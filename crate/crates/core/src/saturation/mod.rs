//! The 45-dimensional base control space `E`, exact decompositions of Fourier
//! modes into nested quadratic interactions of `E`-elements, and the
//! projections onto the frequency balls used by the steering pipeline.

mod decompose;
mod poly;
mod tree;

pub use decompose::{decompose_mode, double_frequency, split_frequency, Decomposer};
pub use poly::{to_f64, TrigPoly};
pub use tree::{evaluate_tree, expand_tree, DecompositionTree, Node, Pair, Term, TreeEvaluator};

use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{Frequency, Kind, SpectralError, SpectralField};
use crate::time::TimeSampledField;

/// Exact coefficient type of decompositions.
pub type Q = Rational64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaturationError {
    #[error("component index {0} outside 1..=3")]
    BadComponent(u8),
    #[error("{0} is identically zero")]
    ZeroMode(Mode),
    #[error("doubling needs a nonzero base frequency")]
    Degenerate,
    #[error("no identity resolves {0}")]
    Stuck(Mode),
    #[error("resolution {given} cannot represent the tree (needs {required})")]
    ResolutionTooSmall { required: usize, given: usize },
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Pure vector mode `e_i cos⟨m,x⟩` or `e_i sin⟨m,x⟩`, with `i` in `1..=3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    #[serde(rename = "m")]
    pub freq: Frequency,
    pub i: u8,
    pub kind: Kind,
}

impl Mode {
    pub fn new(kind: Kind, i: u8, freq: Frequency) -> Mode {
        Mode { freq, i, kind }
    }

    pub fn cos(i: u8, freq: impl Into<Frequency>) -> Mode {
        Mode::new(Kind::Cos, i, freq.into())
    }

    pub fn sin(i: u8, freq: impl Into<Frequency>) -> Mode {
        Mode::new(Kind::Sin, i, freq.into())
    }

    /// Zero-based component index.
    pub fn comp(&self) -> usize {
        self.i as usize - 1
    }

    pub fn conjugate(&self) -> Mode {
        Mode::new(self.kind.other(), self.i, self.freq)
    }

    /// Canonical-frequency representative and sign: `self = sign * repr`.
    /// `None` for the identically zero `sin` mode at `m = 0`.
    pub fn canonical(&self) -> Option<(Mode, i64)> {
        if self.kind == Kind::Sin && self.freq.is_zero() {
            return None;
        }
        let (freq, flipped) = self.freq.canonical();
        let sign = if flipped && self.kind == Kind::Sin { -1 } else { 1 };
        Some((Mode::new(self.kind, self.i, freq), sign))
    }

    /// Member of the basis of `E` (canonical, frequency in `{0,1}^3`, nonzero).
    pub fn in_base_space(&self) -> bool {
        self.freq.0.iter().all(|&c| c == 0 || c == 1)
            && !(self.kind == Kind::Sin && self.freq.is_zero())
            && (1..=3).contains(&self.i)
    }

    pub fn field(&self, resolution: usize) -> Result<SpectralField, SpectralError> {
        SpectralField::mode(self.kind, Some(self.comp()), self.freq, resolution)
    }

    pub(crate) fn check(&self) -> Result<(), SaturationError> {
        if (1..=3).contains(&self.i) {
            Ok(())
        } else {
            Err(SaturationError::BadComponent(self.i))
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            Kind::Cos => 'c',
            Kind::Sin => 's',
        };
        write!(f, "{k}^{}_{}", self.i, self.freq)
    }
}

/// The base space `E`: all `e_i cos⟨m,x⟩`, `e_i sin⟨m,x⟩` with `m ∈ {0,1}^3`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseSpaceE {
    modes: Vec<Mode>,
}

impl BaseSpaceE {
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn contains(&self, mode: &Mode) -> bool {
        self.modes.binary_search(mode).is_ok()
    }

    pub fn fields(&self, resolution: usize) -> Result<Vec<SpectralField>, SpectralError> {
        self.modes.iter().map(|m| m.field(resolution)).collect()
    }

    /// Gram matrix of L² inner products of the basis fields.
    pub fn gram_matrix(&self, resolution: usize) -> Result<Vec<Vec<f64>>, SpectralError> {
        let fields = self.fields(resolution)?;
        fields
            .iter()
            .map(|a| fields.iter().map(|b| a.inner(b)).collect())
            .collect()
    }
}

/// The 45 basis elements of `E`, ordered lexicographically by `(m, i, kind)`.
pub fn basis_e() -> BaseSpaceE {
    let mut modes = Vec::with_capacity(45);
    for a in 0..=1 {
        for b in 0..=1 {
            for c in 0..=1 {
                for i in 1..=3u8 {
                    for kind in [Kind::Cos, Kind::Sin] {
                        let mode = Mode::new(kind, i, Frequency::new(a, b, c));
                        if mode.in_base_space() {
                            modes.push(mode);
                        }
                    }
                }
            }
        }
    }
    BaseSpaceE { modes }
}

/// `true` when every component of `m` is 0 or 1.
pub fn in_base_frequencies(m: &Frequency) -> bool {
    m.0.iter().all(|&c| c == 0 || c == 1)
}

/// Orthogonal projection of a field onto the span used for level `level`:
/// the basis of `E` for level 0, the ℓ1 ball `|m| <= 2^(level-1)` otherwise.
pub fn project_field(f: &SpectralField, level: u32) -> SpectralField {
    if level == 0 {
        f.restrict(in_base_frequencies)
    } else {
        f.truncate_l1(1u32 << (level - 1).min(30))
    }
}

/// Samplewise [`project_field`].
pub fn project_e_n(f: &TimeSampledField, level: u32) -> TimeSampledField {
    f.map(move |x| project_field(x, level))
}

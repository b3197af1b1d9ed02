use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Integer wavenumber on the 3-torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frequency(pub [i32; 3]);

impl Frequency {
    pub const ZERO: Frequency = Frequency([0, 0, 0]);

    pub fn new(m1: i32, m2: i32, m3: i32) -> Self {
        Frequency([m1, m2, m3])
    }

    /// ℓ1 size `|m1| + |m2| + |m3|`, the size used by the saturation hierarchy.
    pub fn l1(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    /// Squared Euclidean magnitude, the symbol of `-Δ`.
    pub fn l2_sq(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn max_abs(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    /// First nonzero component is positive (or the frequency is zero).
    pub fn is_canonical(&self) -> bool {
        match self.0.iter().find(|&&c| c != 0) {
            Some(&c) => c > 0,
            None => true,
        }
    }

    /// Canonical-sign representative and whether a flip was applied.
    pub fn canonical(&self) -> (Frequency, bool) {
        if self.is_canonical() {
            (*self, false)
        } else {
            (-*self, true)
        }
    }

    pub fn component(&self, axis: usize) -> i32 {
        self.0[axis]
    }

    pub fn fits(&self, resolution: usize) -> bool {
        self.max_abs() as usize <= resolution
    }
}

impl Add for Frequency {
    type Output = Frequency;
    fn add(self, rhs: Frequency) -> Frequency {
        Frequency([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for Frequency {
    type Output = Frequency;
    fn sub(self, rhs: Frequency) -> Frequency {
        Frequency([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

impl Neg for Frequency {
    type Output = Frequency;
    fn neg(self) -> Frequency {
        Frequency([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

impl From<[i32; 3]> for Frequency {
    fn from(m: [i32; 3]) -> Self {
        Frequency(m)
    }
}

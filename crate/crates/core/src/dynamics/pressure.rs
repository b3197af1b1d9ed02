use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Barotropic pressure law, used through `h(s) = p′(e^s)`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum PressureLaw {
    /// `p(ρ) = A ρ^γ`, so `h(s) = A γ e^{(γ−1)s}`
    Gamma { a: f64, gamma: f64 },
    /// `p(ρ) = c² ρ`, so `h ≡ c²`
    Isothermal { c2: f64 },
    /// user-supplied `p′`; `h(s) = dp(e^s)`
    #[serde(skip)]
    Custom {
        name: String,
        dp: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl PressureLaw {
    pub fn gamma(a: f64, gamma: f64) -> Self {
        PressureLaw::Gamma { a, gamma }
    }

    pub fn custom(name: impl Into<String>, dp: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PressureLaw::Custom {
            name: name.into(),
            dp: Arc::new(dp),
        }
    }

    #[inline]
    pub fn h(&self, s: f64) -> f64 {
        match self {
            PressureLaw::Gamma { a, gamma } => a * gamma * ((gamma - 1.0) * s).exp(),
            PressureLaw::Isothermal { c2 } => *c2,
            PressureLaw::Custom { dp, .. } => dp(s.exp()),
        }
    }

    /// Parameter sanity (positivity of constants); pointwise positivity of
    /// `h` is checked on every evaluation grid.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            PressureLaw::Gamma { a, gamma } if !(*a > 0.0 && *gamma > 1.0) => {
                Err(format!("gamma law needs A > 0 and γ > 1 (got A = {a}, γ = {gamma})"))
            }
            PressureLaw::Isothermal { c2 } if !(*c2 > 0.0) => {
                Err(format!("isothermal law needs c² > 0 (got {c2})"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Debug for PressureLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PressureLaw::Gamma { a, gamma } => write!(f, "Gamma {{ a: {a}, gamma: {gamma} }}"),
            PressureLaw::Isothermal { c2 } => write!(f, "Isothermal {{ c2: {c2} }}"),
            PressureLaw::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_two_doubles_density() {
        let p = PressureLaw::gamma(1.0, 2.0);
        assert!((p.h(0.3) - 2.0 * 0.3f64.exp()).abs() < 1e-15);
        let iso = PressureLaw::custom("linear", |_| 4.0);
        assert_eq!(iso.h(1.7), 4.0);
        assert!(PressureLaw::gamma(1.0, 0.9).validate().is_err());
    }

    #[test]
    fn json_form() {
        let p: PressureLaw = serde_json::from_str(r#"{"law":"gamma","a":1.0,"gamma":1.4}"#).unwrap();
        assert!(matches!(p, PressureLaw::Gamma { gamma, .. } if gamma == 1.4));
    }
}

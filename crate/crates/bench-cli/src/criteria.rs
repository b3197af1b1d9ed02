//! Pinned pass/fail thresholds, applied to recorded results only.

use std::fs;
use std::path::Path;

use crate::experiments::Results;
use crate::{BenchError, Summary};

pub const DECOMPOSITION_RESIDUAL: f64 = 1e-9;
pub const SATURATION_RUNTIME_SECONDS: f64 = 60.0;
pub const BASIS_DIMENSION: usize = 45;
pub const MASS_DRIFT: f64 = 1e-8;
pub const MIN_TIME_ORDER: f64 = 3.5;
pub const CONVERGENCE_RUNTIME_SECONDS: f64 = 300.0;
pub const REPRODUCTION_GAP: f64 = 1e-3;
/// dt at which the reproduction gap is checked, and its refinement ratio window
pub const REPRODUCTION_DT: f64 = 1.0 / 512.0;
pub const REPRODUCTION_RATIO: (f64, f64) = (12.0, 20.0);
pub const RELAXATION_RATIO: (f64, f64) = (0.35, 0.65);
pub const STEERING_RATIO_H1: f64 = 0.3;
pub const PROJECTION_GAP: f64 = 1e-6;
pub const PROJECTION_ITERATIONS: usize = 50;
pub const LIPSCHITZ_SPREAD: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] C{:<2} {:<28} {}", self.id, self.name, self.detail)
    }
}

fn verdict(id: u8, name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { id, name, pass, detail }
}

/// Every criterion the run's results speak to.
pub fn verdicts(s: &Summary) -> Vec<Verdict> {
    let mut out = Vec::new();
    match &s.results {
        Results::SaturationSweep(r) => {
            out.push(verdict(
                1,
                "decomposition sweep",
                r.failures == 0
                    && r.max_level_excess <= 0
                    && r.max_residual <= DECOMPOSITION_RESIDUAL
                    && r.all_exact
                    && s.runtime_seconds < SATURATION_RUNTIME_SECONDS,
                format!(
                    "{} modes, {} failures, level excess {}, max residual {:.2e}, exact {}, {:.1}s",
                    r.modes, r.failures, r.max_level_excess, r.max_residual, r.all_exact, s.runtime_seconds
                ),
            ));
            out.push(verdict(
                2,
                "base space dimension",
                r.basis_dimension == BASIS_DIMENSION && r.gram_rank == BASIS_DIMENSION,
                format!("dimension {}, Gram rank {}", r.basis_dimension, r.gram_rank),
            ));
            out.push(verdict(
                3,
                "doubling identities",
                r.identities_checked > 0 && r.identities_exact == r.identities_checked,
                format!("{}/{} exact", r.identities_exact, r.identities_checked),
            ));
        }
        Results::SolverConvergence(r) => {
            if let Some(drift) = r.mass_drift {
                out.push(verdict(4, "mass conservation", drift <= MASS_DRIFT, format!("relative drift {drift:.2e}")));
            }
            out.push(verdict(
                5,
                "time order",
                r.fitted_order >= MIN_TIME_ORDER && s.runtime_seconds < CONVERGENCE_RUNTIME_SECONDS,
                format!("fitted order {:.3} over {} step sizes, {:.1}s", r.fitted_order, r.dts.len(), s.runtime_seconds),
            ));
            if !r.lipschitz.is_empty() {
                let worst = r.lipschitz.iter().map(|c| c.spread).fold(0.0, f64::max);
                let detail = r
                    .lipschitz
                    .iter()
                    .map(|c| format!("{} {:.3}", c.channel, c.spread))
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push(verdict(11, "Lipschitz stability", worst <= LIPSCHITZ_SPREAD, format!("spreads {detail}")));
            }
        }
        Results::Step1Reproduction(r) => {
            let at = r.dts.iter().position(|dt| (dt - REPRODUCTION_DT).abs() < 1e-15);
            let (pass, detail) = match at {
                Some(i) if i > 0 => {
                    let gap = r.sup_gaps[i];
                    let ratio = r.halving_ratios[i - 1];
                    (
                        gap <= REPRODUCTION_GAP && ratio >= REPRODUCTION_RATIO.0 && ratio <= REPRODUCTION_RATIO.1,
                        format!("gap {gap:.2e} at dt=1/512, refinement ratio {ratio:.2}"),
                    )
                }
                _ => (false, "no dt=1/512 run preceded by a coarser one".to_string()),
            };
            out.push(verdict(6, "step-1 reproduction", pass, detail));
            if !r.reduction_gaps.is_empty() {
                let gaps = r.reduction_gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>().join(" > ");
                out.push(verdict(7, "additive reduction", r.reduction_decreasing, format!("gaps {gaps}")));
            }
        }
        Results::Relaxation(r) => {
            let in_window = r.ratios.iter().all(|q| *q >= RELAXATION_RATIO.0 && *q <= RELAXATION_RATIO.1);
            let ratios = r.ratios.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>().join(", ");
            out.push(verdict(
                8,
                "relaxation decay",
                r.strictly_decreasing && in_window && !r.ratios.is_empty(),
                format!("H^{} ratios {ratios}", r.k),
            ));
        }
        Results::SteeringSweep(r) => {
            out.push(verdict(
                9,
                "steering sweep",
                r.monotone_h1 && r.finest_ratio_h1 <= STEERING_RATIO_H1,
                format!(
                    "monotone {}, H1 ratio {:.3} at smallest mu (uncontrolled {:.3e})",
                    r.monotone_h1, r.finest_ratio_h1, r.uncontrolled_h1
                ),
            ));
        }
        Results::ExactProjection(r) => {
            out.push(verdict(
                10,
                "exact projection",
                r.converged && r.gap <= PROJECTION_GAP && r.iterations <= PROJECTION_ITERATIONS,
                format!("gap {:.2e} after {} iterations (theta {})", r.gap, r.iterations, r.theta),
            ));
        }
    }
    out
}

fn csv_files(dir: &Path) -> Result<Vec<String>, BenchError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Byte comparison of every CSV table of two runs of the same config.
pub fn determinism(a: &Path, b: &Path) -> Result<Verdict, BenchError> {
    let (sa, sb) = (crate::read_summary(a)?, crate::read_summary(b)?);
    if sa.config_digest != sb.config_digest {
        return Ok(verdict(12, "determinism", false, "config digests differ".into()));
    }
    let (na, nb) = (csv_files(a)?, csv_files(b)?);
    if na != nb {
        return Ok(verdict(12, "determinism", false, "different table sets".into()));
    }
    let mut differing = Vec::new();
    for name in &na {
        if fs::read(a.join(name))? != fs::read(b.join(name))? {
            differing.push(name.clone());
        }
    }
    let detail = if differing.is_empty() {
        format!("{} tables byte-identical ({})", na.len(), sa.experiment)
    } else {
        format!("differing: {}", differing.join(", "))
    };
    Ok(verdict(12, "determinism", differing.is_empty() && !na.is_empty(), detail))
}

//! JSON experiment configuration. Everything is validated before any
//! computation or output happens.

use std::fs;
use std::path::{Path, PathBuf};

use eulerctl_core::dynamics::PressureLaw;
use eulerctl_core::spectral::{Frequency, Kind, Rank, SpectralField};
use eulerctl_core::synthesis::{CoefficientFunctional, FixedPointOptions, SteeringProblem, SynthesisParams};
use eulerctl_core::time::TimeSampledField;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::BenchError;

pub const DEFAULT_FLOAT_ENV: &str = "ieee754 binary64, round-to-nearest-even, no fused or reordered reductions";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// output directory, resolved against the output root when relative
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// seed of the ChaCha8 generator used by randomized probes
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_float_env")]
    pub float_env: String,
    pub experiment: Experiment,
}

fn default_float_env() -> String {
    DEFAULT_FLOAT_ENV.to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    SaturationSweep(SaturationSweep),
    SolverConvergence(SolverConvergence),
    Step1Reproduction(Step1Reproduction),
    Relaxation(Relaxation),
    SteeringSweep(SteeringSweep),
    ExactProjection(ExactProjection),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SaturationSweep(_) => "saturation-sweep",
            Experiment::SolverConvergence(_) => "solver-convergence",
            Experiment::Step1Reproduction(_) => "step1-reproduction",
            Experiment::Relaxation(_) => "relaxation",
            Experiment::SteeringSweep(_) => "steering-sweep",
            Experiment::ExactProjection(_) => "exact-projection",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSweep {
    /// largest `|l|` (ℓ1) swept
    pub radius: u32,
    /// evaluation grid, `2 radius` when absent
    #[serde(default)]
    pub resolution: Option<usize>,
    /// random velocities per level-one tree for the convex-split identity
    #[serde(default)]
    pub split_samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConvergence {
    pub resolution: usize,
    pub pressure: PressureLaw,
    pub horizon: f64,
    pub dts: Vec<f64>,
    #[serde(default)]
    pub mass_run: Option<MassRun>,
    #[serde(default)]
    pub lipschitz: Option<LipschitzRun>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassRun {
    pub u0: Vec<ModeTerm>,
    pub g0: Vec<ModeTerm>,
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzRun {
    pub u0: Vec<ModeTerm>,
    pub g0: Vec<ModeTerm>,
    /// constant drifts and force of the base input
    pub zeta: Vec<ModeTerm>,
    pub xi: Vec<ModeTerm>,
    pub force: Vec<ModeTerm>,
    pub horizon: f64,
    pub dt: f64,
    pub k: u32,
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step1Reproduction {
    pub problem: ProblemSource,
    pub params: SynthesisParams,
    pub dts: Vec<f64>,
    #[serde(default)]
    pub reduction: Option<ReductionRun>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionRun {
    pub dt: f64,
    /// cutoff widths as fractions of the horizon
    pub delta_fractions: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relaxation {
    pub problem: ProblemSource,
    pub mu: f64,
    /// square-wave amplitude vector
    pub wave: Vec<ModeTerm>,
    pub ns: Vec<usize>,
    pub k: u32,
    /// midpoint cells of the primitive, a multiple of `2n` for every `n`
    pub intervals: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringSweep {
    pub problem: ProblemSource,
    pub params: SynthesisParams,
    pub mus: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactProjection {
    pub problem: ProblemSource,
    pub params: SynthesisParams,
    pub functionals: Vec<CoefficientFunctional>,
    /// target values; the target's own coefficients when absent
    #[serde(default)]
    pub targets: Option<Vec<f64>>,
    #[serde(default)]
    pub options: Option<FixedPointOptions>,
}

/// One pure mode `amp · kind⟨m, x⟩`, on velocity component `component`
/// (zero-based) or on a scalar when `component` is absent.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTerm {
    pub kind: Kind,
    #[serde(default)]
    pub component: Option<usize>,
    pub m: Frequency,
    pub amp: f64,
}

pub fn build_field(terms: &[ModeTerm], rank: Rank, resolution: usize) -> Result<SpectralField, BenchError> {
    let mut out = SpectralField::zeros(rank, resolution);
    for t in terms {
        let c = match (rank, t.component) {
            (Rank::Scalar, None) => 0,
            (Rank::Vector, Some(c)) if c < 3 => c,
            _ => {
                return Err(BenchError::Config(format!(
                    "mode {} {} needs {} for a {rank:?} field",
                    t.kind,
                    t.m,
                    if rank == Rank::Scalar { "no component" } else { "a component in 0..3" }
                )))
            }
        };
        out.add_mode(t.kind, c, t.m, t.amp)
            .map_err(|e| BenchError::Config(e.to_string()))?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    /// path relative to the config file
    File { file: PathBuf },
    Inline(ProblemSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub resolution: usize,
    pub horizon: f64,
    pub pressure: PressureLaw,
    #[serde(default = "default_k")]
    pub sobolev_k: u32,
    #[serde(default = "default_mass_tolerance")]
    pub mass_tolerance: f64,
    pub u0: Vec<ModeTerm>,
    pub u_target: Vec<ModeTerm>,
    pub g0: Vec<ModeTerm>,
    pub g_target: Vec<ModeTerm>,
    /// constant-in-time given force
    #[serde(default)]
    pub force: Vec<ModeTerm>,
}

fn default_k() -> u32 {
    4
}

fn default_mass_tolerance() -> f64 {
    1e-10
}

impl ProblemSpec {
    pub fn build(&self) -> Result<SteeringProblem, BenchError> {
        let res = self.resolution;
        if res == 0 {
            return Err(BenchError::Config("resolution must be positive".into()));
        }
        let mut p = SteeringProblem::new(
            build_field(&self.u0, Rank::Vector, res)?,
            build_field(&self.u_target, Rank::Vector, res)?,
            build_field(&self.g0, Rank::Scalar, res)?,
            build_field(&self.g_target, Rank::Scalar, res)?,
            self.horizon,
            self.pressure.clone(),
        );
        p.sobolev_k = self.sobolev_k;
        p.mass_tolerance = self.mass_tolerance;
        if !self.force.is_empty() {
            let f = build_field(&self.force, Rank::Vector, res)?;
            p.force = Some(
                TimeSampledField::constant(f, self.horizon).map_err(|e| BenchError::Config(e.to_string()))?,
            );
        }
        p.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(p)
    }
}

/// A config with every file reference inlined.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// canonical JSON of the resolved config
    pub canonical: String,
    pub digest: String,
}

impl ProblemSource {
    fn resolve(&mut self, base: &Path) -> Result<(), BenchError> {
        if let ProblemSource::File { file } = self {
            let path = base.join(&*file);
            let text = fs::read_to_string(&path)
                .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
            let spec: ProblemSpec = serde_json::from_str(&text)
                .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
            *self = ProblemSource::Inline(spec);
        }
        Ok(())
    }

    pub fn spec(&self) -> &ProblemSpec {
        match self {
            ProblemSource::Inline(spec) => spec,
            ProblemSource::File { .. } => unreachable!("file references are resolved on load"),
        }
    }
}

pub fn parse_config(text: &str, base: &Path) -> Result<LoadedConfig, BenchError> {
    let mut config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| BenchError::Config(format!("malformed config: {e}")))?;
    match &mut config.experiment {
        Experiment::Step1Reproduction(x) => x.problem.resolve(base)?,
        Experiment::Relaxation(x) => x.problem.resolve(base)?,
        Experiment::SteeringSweep(x) => x.problem.resolve(base)?,
        Experiment::ExactProjection(x) => x.problem.resolve(base)?,
        Experiment::SaturationSweep(_) | Experiment::SolverConvergence(_) => {}
    }
    validate(&config)?;
    let canonical = serde_json::to_string(&config).expect("configs serialize");
    let digest = Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(LoadedConfig {
        config,
        canonical,
        digest,
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, BenchError> {
    let text = fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), BenchError> {
    if cond {
        Ok(())
    } else {
        Err(BenchError::Config(msg()))
    }
}

fn check_steps(horizon: f64, dt: f64) -> Result<(), BenchError> {
    let steps = (horizon / dt).round();
    check(
        dt > 0.0 && steps >= 1.0 && (steps * dt - horizon).abs() <= 1e-9 * horizon,
        || format!("dt = {dt} does not divide T = {horizon}"),
    )
}

fn check_params(problem: &SteeringProblem, params: &SynthesisParams) -> Result<(), BenchError> {
    params
        .validate(problem.horizon)
        .map(|_| ())
        .map_err(|e| BenchError::Config(e.to_string()))
}

fn check_law(law: &PressureLaw) -> Result<(), BenchError> {
    law.validate().map_err(BenchError::Config)
}

/// Kind-specific completeness and range checks.
pub fn validate(config: &ExperimentConfig) -> Result<(), BenchError> {
    match &config.experiment {
        Experiment::SaturationSweep(x) => {
            check((1..=8).contains(&x.radius), || format!("radius {} outside 1..=8", x.radius))?;
            let res = x.resolution.unwrap_or(2 * x.radius as usize);
            check(res >= 2 * x.radius as usize, || "resolution must resolve 2|l|".into())?;
        }
        Experiment::SolverConvergence(x) => {
            check_law(&x.pressure)?;
            check(x.resolution >= 2, || "resolution must be at least 2".into())?;
            check(x.dts.len() >= 2, || "at least two step sizes are needed".into())?;
            for &dt in &x.dts {
                check_steps(x.horizon, dt)?;
            }
            if let Some(m) = &x.mass_run {
                check_steps(m.horizon, m.dt)?;
                build_field(&m.u0, Rank::Vector, x.resolution)?;
                build_field(&m.g0, Rank::Scalar, x.resolution)?;
            }
            if let Some(l) = &x.lipschitz {
                check_steps(l.horizon, l.dt)?;
                check(l.k >= 1, || "the probe needs k >= 1".into())?;
                check(!l.epsilons.is_empty() && l.epsilons.iter().all(|e| *e > 0.0), || {
                    "epsilons must be positive".into()
                })?;
                build_field(&l.u0, Rank::Vector, x.resolution)?;
                build_field(&l.g0, Rank::Scalar, x.resolution)?;
                for terms in [&l.zeta, &l.xi, &l.force] {
                    build_field(terms, Rank::Vector, x.resolution)?;
                }
            }
        }
        Experiment::Step1Reproduction(x) => {
            let p = x.problem.spec().build()?;
            check_params(&p, &x.params)?;
            check(!x.dts.is_empty(), || "dts must not be empty".into())?;
            for &dt in &x.dts {
                check_steps(p.horizon, dt)?;
            }
            if let Some(r) = &x.reduction {
                check_steps(p.horizon, r.dt)?;
                check(
                    !r.delta_fractions.is_empty() && r.delta_fractions.iter().all(|d| *d > 0.0 && *d < 0.25),
                    || "delta fractions must lie in (0, 1/4)".into(),
                )?;
            }
        }
        Experiment::Relaxation(x) => {
            let p = x.problem.spec().build()?;
            check(x.mu > 0.0, || "μ must be positive".into())?;
            check(!x.wave.is_empty(), || "the square wave needs a vector".into())?;
            build_field(&x.wave, Rank::Vector, p.resolution())?;
            check(x.ns.len() >= 2 && x.ns.iter().all(|n| *n > 0), || "need at least two positive n".into())?;
            check(x.ns.iter().all(|n| x.intervals % (2 * n) == 0), || {
                "intervals must be a multiple of 2n for every n".into()
            })?;
        }
        Experiment::SteeringSweep(x) => {
            let p = x.problem.spec().build()?;
            check(!x.mus.is_empty(), || "mus must not be empty".into())?;
            for &mu in &x.mus {
                let params = SynthesisParams { mu, ..x.params.clone() };
                check_params(&p, &params)?;
            }
        }
        Experiment::ExactProjection(x) => {
            let p = x.problem.spec().build()?;
            check_params(&p, &x.params)?;
            for f in &x.functionals {
                f.eval(&p.u_target).map_err(|e| BenchError::Config(e.to_string()))?;
            }
            if let Some(t) = &x.targets {
                check(t.len() == x.functionals.len(), || "one target per functional".into())?;
            }
            if let Some(o) = &x.options {
                check(o.theta > 0.0 && o.theta <= 1.0 && o.max_iterations > 0 && o.tolerance > 0.0, || {
                    "fixed-point options out of range".into()
                })?;
            }
        }
    }
    Ok(())
}

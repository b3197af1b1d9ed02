//! Experiment drivers. Each returns its tables and typed results in memory;
//! nothing touches the disk here.

use eulerctl_core::dynamics::{lipschitz_probe, ControlProgram, InputTuple, Solver, State};
use eulerctl_core::saturation::{
    basis_e, double_frequency, expand_tree, Decomposer, Mode, TreeEvaluator, TrigPoly, Q,
};
use eulerctl_core::spectral::{io, Frequency, Kind, Rank, SpectralField};
use eulerctl_core::synthesis::{
    convex_split, exact_project_steer, interpolate_velocity, reduction_gaps, relaxation_check, relaxation_forcing, steer,
    step1_reproduction, FinalErrors, OscillatingControl, SteeringProblem, SynthesisError,
    SynthesisParams,
};
use eulerctl_core::time::TimeSampledField;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, build_field, Experiment, ModeTerm};
use crate::BenchError;

/// CSV table with a fixed column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

/// Shortest round-trip scientific form.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Results {
    SaturationSweep(SaturationResults),
    SolverConvergence(ConvergenceResults),
    Step1Reproduction(ReproductionResults),
    Relaxation(RelaxationResults),
    SteeringSweep(SweepResults),
    ExactProjection(ProjectionResults),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationResults {
    pub radius: u32,
    pub resolution: usize,
    pub modes: usize,
    pub failures: usize,
    /// largest `level − ceil(log2|l|) − 1` (nonpositive when every bound holds)
    pub max_level_excess: i64,
    pub max_residual: f64,
    pub all_exact: bool,
    pub max_split_residual: Option<f64>,
    pub basis_dimension: usize,
    pub gram_rank: usize,
    pub identities_checked: usize,
    pub identities_exact: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResults {
    pub resolution: usize,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// least-squares slope of `log error` against `log dt`
    pub fitted_order: f64,
    pub mass_drift: Option<f64>,
    pub lipschitz: Vec<ChannelSpread>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpread {
    pub channel: String,
    pub ratios: Vec<f64>,
    /// largest over smallest ratio
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproductionResults {
    pub dts: Vec<f64>,
    pub sup_gaps: Vec<f64>,
    /// `sup_gaps[i] / sup_gaps[i + 1]`
    pub halving_ratios: Vec<f64>,
    pub max_continuity_residual: f64,
    pub reduction_deltas: Vec<f64>,
    pub reduction_gaps: Vec<f64>,
    pub reduction_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationResults {
    pub k: u32,
    pub ns: Vec<usize>,
    pub sup_norms: Vec<f64>,
    pub ratios: Vec<f64>,
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub mus: Vec<f64>,
    pub errors_h1: Vec<f64>,
    pub errors_hk: Vec<f64>,
    pub uncontrolled_h1: f64,
    pub uncontrolled_hk: f64,
    /// errors in the order of decreasing μ are strictly decreasing
    pub monotone_h1: bool,
    /// H¹ error over the uncontrolled distance at the smallest μ
    pub finest_ratio_h1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResults {
    pub functionals: usize,
    pub iterations: usize,
    pub converged: bool,
    pub gap: f64,
    pub theta: f64,
    pub final_error_h1: f64,
}

/// Output of one experiment: tables, auxiliary JSON documents (relative
/// path, contents) and typed results.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub documents: Vec<(String, String)>,
    pub results: Results,
    /// name of the seeded generator, when one was used
    pub prng: Option<&'static str>,
}

fn compute(e: SynthesisError) -> BenchError {
    BenchError::Compute(e.to_string())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, BenchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Compute(e.to_string()))
}

/// Band-limited field with coefficients uniform in `[−amp, amp]` on `|m| ≤ radius`.
pub fn random_field(rank: Rank, resolution: usize, radius: i32, amp: f64, rng: &mut ChaCha8Rng) -> SpectralField {
    let mut out = SpectralField::zeros(rank, resolution);
    for c in 0..rank.components() {
        for a in -radius..=radius {
            for b in -radius..=radius {
                for d in 0..=radius {
                    let m = Frequency::new(a, b, d);
                    if !m.is_canonical() || m.l1() > radius as u32 {
                        continue;
                    }
                    out.add_mode(Kind::Cos, c, m, amp * rng.gen_range(-1.0..1.0))
                        .expect("radius within resolution");
                    if !m.is_zero() {
                        out.add_mode(Kind::Sin, c, m, amp * rng.gen_range(-1.0..1.0))
                            .expect("radius within resolution");
                    }
                }
            }
        }
    }
    out
}

pub fn run_experiment(experiment: &Experiment, seed: u64, jobs: usize) -> Result<Artifacts, BenchError> {
    match experiment {
        Experiment::SaturationSweep(x) => saturation_sweep(x, seed),
        Experiment::SolverConvergence(x) => solver_convergence(x, seed, jobs),
        Experiment::Step1Reproduction(x) => reproduction(x, jobs),
        Experiment::Relaxation(x) => relaxation(x),
        Experiment::SteeringSweep(x) => steering_sweep(x, jobs),
        Experiment::ExactProjection(x) => exact_projection(x),
    }
}

fn level_bound(l: Frequency) -> u32 {
    (l.l1() as f64).log2().ceil() as u32 + 1
}

fn saturation_sweep(x: &config::SaturationSweep, seed: u64) -> Result<Artifacts, BenchError> {
    let radius = x.radius as i32;
    let res = x.resolution.unwrap_or(2 * x.radius as usize);
    let mut dec = Decomposer::new(x.radius);
    let mut eval = TreeEvaluator::new(res);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sweep = Table::new(
        "sweep",
        &["kind", "i", "l1", "l2", "l3", "norm", "level", "level_bound", "residual", "exact", "split_residual", "error"],
    );
    let mut r = SaturationResults {
        radius: x.radius,
        resolution: res,
        modes: 0,
        failures: 0,
        max_level_excess: i64::MIN,
        max_residual: 0.0,
        all_exact: true,
        max_split_residual: None,
        basis_dimension: 0,
        gram_rank: 0,
        identities_checked: 0,
        identities_exact: 0,
    };
    for a in -radius..=radius {
        for b in -radius..=radius {
            for c in -radius..=radius {
                let l = Frequency::new(a, b, c);
                if l.is_zero() || l.l1() > x.radius || !l.is_canonical() {
                    continue;
                }
                for i in 1..=3u8 {
                    for kind in [Kind::Cos, Kind::Sin] {
                        let mode = Mode::new(kind, i, l);
                        r.modes += 1;
                        let mut row = vec![
                            kind.to_string(),
                            i.to_string(),
                            a.to_string(),
                            b.to_string(),
                            c.to_string(),
                            l.l1().to_string(),
                        ];
                        let bound = level_bound(l);
                        let tree = match dec.decompose(mode) {
                            Ok(t) => t,
                            Err(e) => {
                                r.failures += 1;
                                row.extend([String::new(), bound.to_string(), String::new(), String::new()]);
                                row.extend([String::new(), e.to_string()]);
                                sweep.push(row);
                                continue;
                            }
                        };
                        let want = mode.field(res).map_err(|e| BenchError::Compute(e.to_string()))?;
                        let got = eval.evaluate(&tree).map_err(|e| BenchError::Compute(e.to_string()))?;
                        let residual = got.sub(&want).expect("same layout").sobolev_norm(0) / want.sobolev_norm(0);
                        let exact = expand_tree(&tree).map(|p| p == TrigPoly::mode(mode)).unwrap_or(false);
                        let split = if tree.level() <= 1 && x.split_samples > 0 {
                            // band-2 samples keep every product exact on a 4-mode grid
                            let small = tree.required_resolution().max(4);
                            let s = convex_split(&tree, small).map_err(compute)?;
                            let mut worst: f64 = 0.0;
                            for _ in 0..x.split_samples {
                                let u = random_field(Rank::Vector, small, 2, 0.5, &mut rng);
                                let mut lhs = SpectralField::advect(&u, &u).expect("vector field");
                                lhs.axpy(-1.0, &got.resample(small)).expect("same layout");
                                let rhs = s.apply(&u).map_err(compute)?;
                                worst = worst.max(lhs.sub(&rhs).expect("same layout").sobolev_norm(0) / lhs.sobolev_norm(0));
                            }
                            r.max_split_residual = Some(r.max_split_residual.unwrap_or(0.0).max(worst));
                            Some(worst)
                        } else {
                            None
                        };
                        r.max_level_excess = r.max_level_excess.max(tree.level() as i64 - bound as i64);
                        r.max_residual = r.max_residual.max(residual);
                        r.all_exact &= exact;
                        row.extend([
                            tree.level().to_string(),
                            bound.to_string(),
                            num(residual),
                            exact.to_string(),
                            opt(split),
                            String::new(),
                        ]);
                        sweep.push(row);
                    }
                }
            }
        }
    }

    let basis = basis_e();
    r.basis_dimension = basis.len();
    let gram = basis.gram_matrix(2).map_err(|e| BenchError::Compute(e.to_string()))?;
    let n = gram.len();
    let g = DMatrix::from_fn(n, n, |i, j| gram[i][j]);
    let singular = g.singular_values();
    let largest = singular.max();
    r.gram_rank = singular.iter().filter(|s| **s > 1e-10 * largest).count();
    let mut basis_table = Table::new("basis", &["index", "kind", "i", "m1", "m2", "m3", "singular_value"]);
    let mut sorted: Vec<f64> = singular.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for (idx, (m, s)) in basis.modes().iter().zip(sorted).enumerate() {
        basis_table.push(vec![
            idx.to_string(),
            m.kind.to_string(),
            m.i.to_string(),
            m.freq.0[0].to_string(),
            m.freq.0[1].to_string(),
            m.freq.0[2].to_string(),
            num(s),
        ]);
    }

    let mut doubling = Table::new("doubling", &["n1", "n2", "n3", "i", "identity", "exact"]);
    for nf in [Frequency::new(1, 0, 0), Frequency::new(1, 1, 0)] {
        for i in 1..=3u8 {
            let ni = nf.0[i as usize - 1] as i64;
            let mut checks: Vec<(&str, bool)> = Vec::new();
            if ni != 0 {
                let (c, s) = (Mode::cos(i, nf), Mode::sin(i, nf));
                let s2 = TrigPoly::mode(Mode::sin(i, nf + nf));
                let c2 = TrigPoly::mode(Mode::cos(i, nf + nf));
                let q = |coef: Q, terms: &[(i64, Mode)]| {
                    let mut z = TrigPoly::zero();
                    for (k, m) in terms {
                        z.add_term(Q::from_integer(*k), *m);
                    }
                    TrigPoly::quadratic(&z).scaled(coef)
                };
                let minus = Q::from_integer(-1);
                checks.push(("Q(cos) = sin2n", q(Q::new(-2, ni), &[(1, c)]) == s2));
                checks.push(("Q(sin) = -sin2n", q(Q::new(-2, ni), &[(1, s)]) == s2.scaled(minus)));
                checks.push(("Q(sin-cos) = cos2n", q(Q::new(-1, ni), &[(1, s), (-1, c)]) == c2));
                checks.push(("Q(sin+cos) = -cos2n", q(Q::new(-1, ni), &[(1, s), (1, c)]) == c2.scaled(minus)));
            }
            for kind in [Kind::Cos, Kind::Sin] {
                let target = TrigPoly::mode(Mode::new(kind, i, nf + nf));
                let ok = double_frequency(kind, i, nf)
                    .ok()
                    .and_then(|t| expand_tree(&t).ok())
                    .is_some_and(|p| p == target);
                checks.push((if kind == Kind::Cos { "tree cos2n" } else { "tree sin2n" }, ok));
            }
            for (name, ok) in checks {
                r.identities_checked += 1;
                r.identities_exact += ok as usize;
                doubling.push(vec![
                    nf.0[0].to_string(),
                    nf.0[1].to_string(),
                    nf.0[2].to_string(),
                    i.to_string(),
                    name.to_string(),
                    ok.to_string(),
                ]);
            }
        }
    }
    Ok(Artifacts {
        tables: vec![sweep, basis_table, doubling],
        documents: Vec::new(),
        results: Results::SaturationSweep(r),
        prng: (x.split_samples > 0).then_some("ChaCha8"),
    })
}

/// Translates a field by `s` along `x1`.
fn shift_x1(field: &SpectralField, s: f64) -> SpectralField {
    let mut out = SpectralField::zeros(field.rank(), field.resolution());
    for (c, m, a, b) in field.nonzero_records() {
        let (sn, cs) = (m.component(0) as f64 * s).sin_cos();
        out.add_mode(Kind::Cos, c, m, a * cs - b * sn).expect("same layout");
        out.add_mode(Kind::Sin, c, m, a * sn + b * cs).expect("same layout");
    }
    out
}

/// Density wave carried at constant speed along `x1` with an oscillating
/// transverse velocity; the momentum residual is supplied as force.
#[derive(Clone)]
struct TravellingWave {
    speed: f64,
    g0: SpectralField,
    resolution: usize,
}

impl TravellingWave {
    fn new(resolution: usize) -> Self {
        let mut g0 = SpectralField::zeros(Rank::Scalar, resolution);
        g0.add_mode(Kind::Sin, 0, Frequency::new(2, 0, 0), 0.3).expect("resolution >= 2");
        g0.add_mode(Kind::Cos, 0, Frequency::new(1, 0, 0), 0.2).expect("resolution >= 2");
        TravellingWave {
            speed: 1.5,
            g0,
            resolution,
        }
    }

    fn u(&self, t: f64) -> SpectralField {
        let mut u = SpectralField::constant_vector([self.speed, 0.0, 0.0], self.resolution);
        u.add_mode(Kind::Cos, 1, Frequency::new(1, 0, 0), 0.2 * (2.0 * t).sin())
            .expect("resolution >= 1");
        u
    }

    fn du(&self, t: f64) -> SpectralField {
        let mut du = SpectralField::zeros(Rank::Vector, self.resolution);
        du.add_mode(Kind::Cos, 1, Frequency::new(1, 0, 0), 0.4 * (2.0 * t).cos())
            .expect("resolution >= 1");
        du
    }

    fn g(&self, t: f64) -> SpectralField {
        shift_x1(&self.g0, self.speed * t)
    }

    fn sup_error(&self, solver: &Solver, horizon: f64, dt: f64) -> Result<f64, BenchError> {
        let wave = self.clone();
        let s = solver.clone();
        let force = TimeSampledField::analytic(horizon, Rank::Vector, self.resolution, move |t| {
            let state = State::new(wave.u(t), wave.g(t), t).expect("matching layouts");
            let (du, _) = s.rhs(&state, &ControlProgram::none(), t).expect("smooth exact solution");
            wave.du(t).sub(&du).expect("same layout")
        })
        .map_err(|e| BenchError::Compute(e.to_string()))?;
        let controls = ControlProgram::none().with_force(force);
        let mut worst: f64 = 0.0;
        solver.solve_observed(&self.u(0.0), &self.g(0.0), &controls, horizon, dt, |st| {
            let du = st.u.sub(&self.u(st.t))?.sobolev_norm_sq(0);
            let dg = st.g.sub(&self.g(st.t))?.sobolev_norm_sq(0);
            worst = worst.max((du + dg).sqrt());
            Ok(())
        })?;
        Ok(worst)
    }
}

fn fitted_order(dts: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn solver_convergence(x: &config::SolverConvergence, seed: u64, jobs: usize) -> Result<Artifacts, BenchError> {
    let solver = Solver::new(x.pressure.clone());
    let wave = TravellingWave::new(x.resolution);
    let errors: Vec<f64> = pool(jobs)?.install(|| {
        x.dts
            .par_iter()
            .map(|&dt| wave.sup_error(&solver, x.horizon, dt))
            .collect::<Result<_, _>>()
    })?;
    let mut table = Table::new("convergence", &["dt", "steps", "sup_error", "order"]);
    for (i, (&dt, &e)) in x.dts.iter().zip(&errors).enumerate() {
        let order = (i > 0).then(|| (errors[i - 1] / e).ln() / (x.dts[i - 1] / dt).ln());
        table.push(vec![num(dt), ((x.horizon / dt).round() as usize).to_string(), num(e), opt(order)]);
    }
    let mut tables = vec![table];
    let mut r = ConvergenceResults {
        resolution: x.resolution,
        dts: x.dts.clone(),
        fitted_order: fitted_order(&x.dts, &errors),
        errors,
        mass_drift: None,
        lipschitz: Vec::new(),
    };

    if let Some(m) = &x.mass_run {
        let u0 = build_field(&m.u0, Rank::Vector, x.resolution)?;
        let g0 = build_field(&m.g0, Rank::Scalar, x.resolution)?;
        let tr = solver.solve(&u0, &g0, &ControlProgram::none(), m.horizon, m.dt)?;
        r.mass_drift = Some(tr.relative_mass_drift());
        let m0 = tr.diagnostics[0].mass;
        let mut t = Table::new("mass", &["step", "t", "mass", "relative_drift"]);
        for d in &tr.diagnostics {
            t.push(vec![d.step.to_string(), num(d.t), num(d.mass), num(((d.mass - m0) / m0).abs())]);
        }
        tables.push(t);
    }

    if let Some(l) = &x.lipschitz {
        let res = x.resolution;
        let constant = |terms: &[ModeTerm]| -> Result<TimeSampledField, BenchError> {
            TimeSampledField::constant(build_field(terms, Rank::Vector, res)?, l.horizon)
                .map_err(|e| BenchError::Config(e.to_string()))
        };
        let base = InputTuple {
            u0: build_field(&l.u0, Rank::Vector, res)?,
            g0: build_field(&l.g0, Rank::Scalar, res)?,
            controls: ControlProgram::none()
                .with_zeta(constant(&l.zeta)?)
                .with_xi(constant(&l.xi)?)
                .with_force(constant(&l.force)?),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = ["u0", "g0", "zeta", "xi", "f"];
        let directions: Vec<SpectralField> = channels
            .iter()
            .map(|c| {
                let rank = if *c == "g0" { Rank::Scalar } else { Rank::Vector };
                let d = random_field(rank, res, 1, 1.0, &mut rng);
                d.scaled(1.0 / d.sobolev_norm(l.k))
            })
            .collect();
        let mut cases = Vec::new();
        for (ci, _) in channels.iter().enumerate() {
            for &eps in &l.epsilons {
                cases.push((ci, eps));
            }
        }
        let probes: Vec<(f64, f64, f64)> = pool(jobs)?.install(|| {
            cases
                .par_iter()
                .map(|&(ci, eps)| {
                    let mut b = base.clone();
                    let bump = directions[ci].scaled(eps);
                    let shifted = |p: &Option<TimeSampledField>| {
                        let mut v = p.as_ref().expect("base channels are set").at(0.0);
                        v.axpy(1.0, &bump).expect("same layout");
                        Some(TimeSampledField::constant(v, l.horizon).expect("positive horizon"))
                    };
                    match ci {
                        0 => b.u0.axpy(1.0, &bump).expect("same layout"),
                        1 => b.g0.axpy(1.0, &bump).expect("same layout"),
                        2 => b.controls.zeta = shifted(&base.controls.zeta),
                        3 => b.controls.xi = shifted(&base.controls.xi),
                        _ => b.controls.force = shifted(&base.controls.force),
                    }
                    let p = lipschitz_probe(&solver, &base, &b, l.horizon, l.dt, l.k)?;
                    Ok((p.input_gap, p.output_gap, p.ratio))
                })
                .collect::<Result<_, BenchError>>()
        })?;
        let mut t = Table::new("lipschitz", &["channel", "epsilon", "input_gap", "output_gap", "ratio"]);
        for (&(ci, eps), &(ig, og, ratio)) in cases.iter().zip(&probes) {
            t.push(vec![channels[ci].to_string(), num(eps), num(ig), num(og), num(ratio)]);
        }
        for (ci, name) in channels.iter().enumerate() {
            let ratios: Vec<f64> = cases
                .iter()
                .zip(&probes)
                .filter(|((c, _), _)| *c == ci)
                .map(|(_, p)| p.2)
                .collect();
            let (lo, hi) = ratios
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
            r.lipschitz.push(ChannelSpread {
                channel: name.to_string(),
                ratios,
                spread: hi / lo,
            });
        }
        tables.push(t);
    }
    let prng = x.lipschitz.is_some().then_some("ChaCha8");
    Ok(Artifacts {
        tables,
        documents: Vec::new(),
        results: Results::SolverConvergence(r),
        prng,
    })
}

fn with_dt(params: &SynthesisParams, dt: f64) -> SynthesisParams {
    SynthesisParams { dt, ..params.clone() }
}

fn reproduction(x: &config::Step1Reproduction, jobs: usize) -> Result<Artifacts, BenchError> {
    let problem = x.problem.spec().build()?;
    let runs = pool(jobs)?.install(|| {
        x.dts
            .par_iter()
            .map(|&dt| step1_reproduction(&problem, &with_dt(&x.params, dt)).map_err(compute))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut table = Table::new(
        "reproduction",
        &["dt", "sup_gap", "final_gap", "max_continuity_residual", "halving_ratio"],
    );
    let mut ratios = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let ratio = (i > 0).then(|| runs[i - 1].sup_gap / run.sup_gap);
        ratios.extend(ratio);
        table.push(vec![
            num(run.dt),
            num(run.sup_gap),
            num(run.final_gap),
            num(run.max_continuity_residual),
            opt(ratio),
        ]);
    }
    let mut tables = vec![table];
    let mut r = ReproductionResults {
        dts: runs.iter().map(|r| r.dt).collect(),
        sup_gaps: runs.iter().map(|r| r.sup_gap).collect(),
        halving_ratios: ratios,
        max_continuity_residual: runs.iter().map(|r| r.max_continuity_residual).fold(0.0, f64::max),
        reduction_deltas: Vec::new(),
        reduction_gaps: Vec::new(),
        reduction_decreasing: false,
    };
    if let Some(red) = &x.reduction {
        let deltas: Vec<f64> = red.delta_fractions.iter().map(|f| f * problem.horizon).collect();
        let rows = reduction_gaps(&problem, &with_dt(&x.params, red.dt), &deltas).map_err(compute)?;
        let mut t = Table::new("reduction", &["delta", "delta_fraction", "gap_hk", "gap_l2"]);
        for (row, frac) in rows.iter().zip(&red.delta_fractions) {
            t.push(vec![num(row.delta), num(*frac), num(row.gap_hk), num(row.gap_l2)]);
        }
        r.reduction_deltas = deltas;
        r.reduction_gaps = rows.iter().map(|r| r.gap_hk).collect();
        r.reduction_decreasing = r.reduction_gaps.windows(2).all(|w| w[1] < w[0]);
        tables.push(t);
    }
    Ok(Artifacts {
        tables,
        documents: Vec::new(),
        results: Results::Step1Reproduction(r),
        prng: None,
    })
}

fn relaxation(x: &config::Relaxation) -> Result<Artifacts, BenchError> {
    let problem = x.problem.spec().build()?;
    let u1 = interpolate_velocity(&problem.u0, &problem.u_target, x.mu, problem.horizon).map_err(compute)?;
    let v = build_field(&x.wave, Rank::Vector, problem.resolution())?;
    let family = |n: usize| {
        let wave = OscillatingControl::square_wave(v.clone(), n, problem.horizon)?;
        relaxation_forcing(&u1, &wave)
    };
    let table = relaxation_check(family, &x.ns, x.k, x.intervals).map_err(compute)?;
    let mut t = Table::new("relaxation", &["n", "sup_norm", "ratio"]);
    for row in &table.rows {
        t.push(vec![row.n.to_string(), num(row.sup_norm), opt(row.ratio)]);
    }
    let sup_norms: Vec<f64> = table.rows.iter().map(|r| r.sup_norm).collect();
    let r = RelaxationResults {
        k: x.k,
        ns: x.ns.clone(),
        strictly_decreasing: sup_norms.windows(2).all(|w| w[1] < w[0]),
        sup_norms,
        ratios: table.rows.iter().filter_map(|r| r.ratio).collect(),
    };
    Ok(Artifacts {
        tables: vec![t],
        documents: Vec::new(),
        results: Results::Relaxation(r),
        prng: None,
    })
}

fn uncontrolled(problem: &SteeringProblem, dt: f64) -> Result<FinalErrors, BenchError> {
    let solver = Solver::new(problem.pressure.clone());
    let mut program = ControlProgram::none();
    program.force = problem.force.clone();
    let tr = solver.solve(&problem.u0, &problem.g0, &program, problem.horizon, dt)?;
    FinalErrors::between(tr.final_state(), &problem.u_target, &problem.g_target, problem.sobolev_k).map_err(compute)
}

fn steering_sweep(x: &config::SteeringSweep, jobs: usize) -> Result<Artifacts, BenchError> {
    let problem = x.problem.spec().build()?;
    let reports = pool(jobs)?.install(|| {
        x.mus
            .par_iter()
            .map(|&mu| steer(&problem, &SynthesisParams { mu, ..x.params.clone() }).map_err(compute))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let base = uncontrolled(&problem, x.params.dt)?;
    let mut t = Table::new(
        "sweep",
        &[
            "mu",
            "u_hk",
            "g_hk",
            "u_h1",
            "g_h1",
            "total_h1",
            "uncontrolled_h1",
            "ratio_h1",
            "mass_drift",
            "max_continuity_residual",
            "control_sup_hk",
            "mollification_initial",
            "mollification_target",
            "integration",
            "reduction",
            "projection",
            "discretization",
        ],
    );
    let mut documents = Vec::new();
    for (i, rep) in reports.iter().enumerate() {
        let e = &rep.errors;
        let b = rep.budget.as_ref();
        t.push(vec![
            num(rep.params.mu),
            num(e.u_hk),
            num(e.g_hk),
            num(e.u_h1),
            num(e.g_h1),
            num(e.total_h1()),
            num(base.total_h1()),
            num(e.total_h1() / base.total_h1()),
            num(rep.diagnostics.mass_drift),
            num(rep.diagnostics.max_continuity_residual),
            num(rep.diagnostics.control_sup_hk),
            opt(b.map(|b| b.mollification_initial)),
            opt(b.map(|b| b.mollification_target)),
            opt(b.map(|b| b.integration)),
            opt(b.map(|b| b.reduction)),
            opt(b.map(|b| b.projection)),
            opt(b.and_then(|b| b.discretization)),
        ]);
        documents.push((format!("reports/run_{i}.json"), rep.to_json()));
        if let Some(s) = &rep.final_state {
            documents.push((format!("fields/run_{i}_u.json"), io::to_json(&s.u)));
            documents.push((format!("fields/run_{i}_g.json"), io::to_json(&s.g)));
        }
    }
    // order runs by decreasing μ for the monotonicity verdict
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| x.mus[b].total_cmp(&x.mus[a]));
    let h1: Vec<f64> = reports.iter().map(|r| r.errors.total_h1()).collect();
    let finest = *order.last().expect("at least one μ");
    let r = SweepResults {
        mus: x.mus.clone(),
        errors_hk: reports.iter().map(|r| r.errors.total_hk()).collect(),
        monotone_h1: order.windows(2).all(|w| h1[w[1]] < h1[w[0]]),
        finest_ratio_h1: h1[finest] / base.total_h1(),
        errors_h1: h1,
        uncontrolled_h1: base.total_h1(),
        uncontrolled_hk: base.total_hk(),
    };
    Ok(Artifacts {
        tables: vec![t],
        documents,
        results: Results::SteeringSweep(r),
        prng: None,
    })
}

fn exact_projection(x: &config::ExactProjection) -> Result<Artifacts, BenchError> {
    let problem = x.problem.spec().build()?;
    let targets = match &x.targets {
        Some(t) => t.clone(),
        None => x
            .functionals
            .iter()
            .map(|f| f.eval(&problem.u_target))
            .collect::<Result<_, _>>()
            .map_err(compute)?,
    };
    let options = x.options.unwrap_or_default();
    let report = exact_project_steer(&problem, &x.params, &x.functionals, &targets, &options).map_err(compute)?;
    let outcome = report.projection.as_ref().expect("projection runs record their outcome");
    let mut iterations = Table::new("iterations", &["iteration", "gap"]);
    for (i, g) in outcome.history.iter().enumerate() {
        iterations.push(vec![(i + 1).to_string(), num(*g)]);
    }
    let mut values = Table::new("values", &["component", "kind", "m1", "m2", "m3", "target", "value", "abs_gap"]);
    for ((f, t), v) in x.functionals.iter().zip(&targets).zip(&outcome.values) {
        values.push(vec![
            f.component.to_string(),
            f.kind.to_string(),
            f.freq.0[0].to_string(),
            f.freq.0[1].to_string(),
            f.freq.0[2].to_string(),
            num(*t),
            num(*v),
            num((v - t).abs()),
        ]);
    }
    let r = ProjectionResults {
        functionals: x.functionals.len(),
        iterations: outcome.iterations,
        converged: outcome.converged,
        gap: outcome.gap,
        theta: outcome.theta,
        final_error_h1: report.errors.total_h1(),
    };
    Ok(Artifacts {
        tables: vec![iterations, values],
        documents: vec![("reports/projection.json".into(), report.to_json())],
        results: Results::ExactProjection(r),
        prng: None,
    })
}

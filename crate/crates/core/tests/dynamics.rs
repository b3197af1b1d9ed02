use std::f64::consts::PI;

use eulerctl_core::dynamics::{
    lipschitz_probe, mass, ControlProgram, DynamicsError, InputTuple, PressureLaw, SolveOptions, Solver, State,
    Trajectory,
};
use eulerctl_core::spectral::{make_mode, Frequency, Kind, Rank, SpectralField, TORUS_VOLUME};
use eulerctl_core::TimeSampledField;

fn f(m1: i32, m2: i32, m3: i32) -> Frequency {
    Frequency::new(m1, m2, m3)
}

fn vmode(kind: Kind, c: usize, m: Frequency, amp: f64, res: usize) -> SpectralField {
    make_mode(kind, Some(c), m, res).unwrap().scaled(amp)
}

fn smode(kind: Kind, m: Frequency, amp: f64, res: usize) -> SpectralField {
    make_mode(kind, None, m, res).unwrap().scaled(amp)
}

fn gamma_law() -> Solver {
    Solver::new(PressureLaw::gamma(1.0, 1.4))
}

fn small_data(res: usize) -> (SpectralField, SpectralField) {
    let mut u = vmode(Kind::Cos, 0, f(0, 1, 0), 0.1, res);
    u.axpy(1.0, &vmode(Kind::Sin, 2, f(1, 1, 0), 0.05, res)).unwrap();
    let mut g = smode(Kind::Sin, f(1, 0, 1), 0.1, res);
    g.axpy(1.0, &smode(Kind::Cos, f(0, 0, 1), 0.05, res)).unwrap();
    (u, g)
}

/// Rotates every coefficient as for the translation `x1 → x1 − s`.
fn shift_x1(field: &SpectralField, s: f64) -> SpectralField {
    let mut out = SpectralField::zeros(field.rank(), field.resolution());
    for (c, m, a, b) in field.nonzero_records() {
        let (sn, cs) = (m.component(0) as f64 * s).sin_cos();
        out.add_mode(Kind::Cos, c, m, a * cs - b * sn).unwrap();
        out.add_mode(Kind::Sin, c, m, a * sn + b * cs).unwrap();
    }
    out
}

fn l2_gap(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().sobolev_norm(0)
}

#[test]
fn constant_states_are_equilibria() {
    let s = gamma_law();
    for (u, g) in [([0.0; 3], 0.0), ([0.3, -0.2, 1.0], 0.7)] {
        let state = State::new(
            SpectralField::constant_vector(u, 4),
            SpectralField::constant_scalar(g, 4),
            0.0,
        )
        .unwrap();
        let (du, dg) = s.rhs(&state, &ControlProgram::none(), 0.0).unwrap();
        assert_eq!(du.max_abs_coefficient(), 0.0);
        assert_eq!(dg.max_abs_coefficient(), 0.0);
    }
}

#[test]
fn pure_forcing_passes_through() {
    let res = 4;
    let force = vmode(Kind::Cos, 0, f(1, 0, 0), 1.0, res);
    let controls = ControlProgram::none().with_force(TimeSampledField::constant(force.clone(), 1.0).unwrap());
    let state = State::new(SpectralField::zeros(Rank::Vector, res), SpectralField::zeros(Rank::Scalar, res), 0.0)
        .unwrap();
    let (du, dg) = gamma_law().rhs(&state, &controls, 0.3).unwrap();
    assert!(l2_gap(&du, &force) < 1e-15);
    assert_eq!(dg.max_abs_coefficient(), 0.0);
}

#[test]
fn pressure_term_matches_pointwise_formula() {
    // h(g) = 2 e^g for A = 1, γ = 2
    let res = 8;
    let eps = 0.1;
    let g = smode(Kind::Sin, f(1, 0, 0), eps, res);
    let state = State::new(SpectralField::zeros(Rank::Vector, res), g, 0.0).unwrap();
    let s = Solver::new(PressureLaw::gamma(1.0, 2.0));
    let (du, dg) = s.rhs(&state, &ControlProgram::none(), 0.0).unwrap();
    assert_eq!(dg.max_abs_coefficient(), 0.0);
    for k in 0..7 {
        let x = [0.37 + 0.9 * k as f64, 1.1 * k as f64, 2.0 - 0.3 * k as f64];
        let v = du.eval_at(x);
        let expected = -2.0 * (eps * x[0].sin()).exp() * eps * x[0].cos();
        assert!((v[0] - expected).abs() < 1e-13, "{} vs {expected}", v[0]);
        assert!(v[1].abs() < 1e-14 && v[2].abs() < 1e-14);
    }
}

#[test]
fn drift_controls_enter_both_equations() {
    // u = 0, g = 0: du = −(ζ·∇)ζ, dg = −∇·ξ
    let res = 6;
    let zeta = vmode(Kind::Cos, 0, f(1, 0, 0), 1.0, res);
    let xi = vmode(Kind::Sin, 1, f(0, 1, 0), 0.5, res);
    let controls = ControlProgram::none()
        .with_zeta(TimeSampledField::constant(zeta.clone(), 1.0).unwrap())
        .with_xi(TimeSampledField::constant(xi.clone(), 1.0).unwrap());
    let state = State::new(SpectralField::zeros(Rank::Vector, res), SpectralField::zeros(Rank::Scalar, res), 0.0)
        .unwrap();
    let (du, dg) = gamma_law().rhs(&state, &controls, 0.0).unwrap();
    // (cos x1 e1 · ∇)(cos x1 e1) = −(1/2) sin 2x1 e1
    let expected_du = vmode(Kind::Sin, 0, f(2, 0, 0), 0.5, res);
    assert!(l2_gap(&du, &expected_du) < 1e-14);
    let expected_dg = smode(Kind::Cos, f(0, 1, 0), -0.5, res);
    assert!(l2_gap(&dg, &expected_dg) < 1e-14);
}

#[test]
fn mass_examples() {
    let res = 8;
    let m0 = mass(&SpectralField::zeros(Rank::Scalar, res));
    assert!((m0 - 8.0 * PI.powi(3)).abs() < 1e-12);
    assert!((m0 - 248.0502).abs() < 1e-4);
    let m1 = mass(&SpectralField::constant_scalar(2f64.ln(), res));
    assert!((m1 / (2.0 * TORUS_VOLUME) - 1.0).abs() < 1e-14);
    // (2π)³ I0(1), I0(1) by a fine one-dimensional trapezoid rule
    let n = 4000;
    let i0 = (0..n).map(|j| (2.0 * PI * j as f64 / n as f64).sin().exp()).sum::<f64>() / n as f64;
    assert!((i0 - 1.2661).abs() < 1e-4);
    let m2 = mass(&smode(Kind::Sin, f(1, 0, 0), 1.0, res));
    assert!((m2 / (TORUS_VOLUME * i0) - 1.0).abs() < 1e-12);
}

#[test]
fn zero_data_stays_zero() {
    let res = 4;
    let z = SpectralField::zeros(Rank::Vector, res);
    let g = SpectralField::zeros(Rank::Scalar, res);
    let tr = gamma_law().solve(&z, &g, &ControlProgram::none(), 0.5, 0.05).unwrap();
    assert_eq!(tr.diagnostics.len(), 11);
    assert_eq!(tr.final_state().u.max_abs_coefficient(), 0.0);
    assert_eq!(tr.final_state().g.max_abs_coefficient(), 0.0);
    assert!((tr.final_state().t - 0.5).abs() < 1e-15);
}

#[test]
fn step_size_must_divide_horizon() {
    let (u, g) = small_data(4);
    let err = gamma_law().solve(&u, &g, &ControlProgram::none(), 1.0, 0.3).unwrap_err();
    assert!(matches!(err, DynamicsError::InvalidStep(_)));
    let tr = gamma_law().solve(&u, &g, &ControlProgram::none(), 0.1, 0.1 / 3.0).unwrap();
    assert_eq!(tr.diagnostics.len(), 4);
}

#[test]
fn controls_must_cover_the_horizon() {
    let (u, g) = small_data(4);
    let c = ControlProgram::none().with_force(TimeSampledField::zero(Rank::Vector, 4, 2.0).unwrap());
    assert!(matches!(
        gamma_law().solve(&u, &g, &c, 1.0, 0.1),
        Err(DynamicsError::Incompatible(_))
    ));
    let c = ControlProgram::none().with_force(TimeSampledField::zero(Rank::Vector, 5, 1.0).unwrap());
    assert!(matches!(
        gamma_law().solve(&u, &g, &c, 1.0, 0.1),
        Err(DynamicsError::Incompatible(_))
    ));
}

#[test]
fn mass_is_conserved_on_smooth_runs() {
    let (u, g) = small_data(6);
    let tr = gamma_law().solve(&u, &g, &ControlProgram::none(), 0.2, 1e-3).unwrap();
    assert!(tr.relative_mass_drift() < 1e-10, "{}", tr.relative_mass_drift());
    assert!((tr.diagnostics[0].mass - mass(&g)).abs() < 1e-12 * mass(&g));
}

#[test]
fn diagnostics_cover_every_step_and_export_as_csv() {
    let (u, g) = small_data(4);
    let tr = gamma_law().solve(&u, &g, &ControlProgram::none(), 0.1, 0.01).unwrap();
    assert_eq!(tr.diagnostics.len(), 11);
    for (i, d) in tr.diagnostics.iter().enumerate() {
        assert_eq!(d.step, i);
        assert!((d.t - 0.01 * i as f64).abs() < 1e-14);
        assert!(d.cfl > 0.0 && d.cfl < 0.5);
        assert!(d.min_g <= d.max_g);
    }
    assert_eq!(tr.states.len(), 2);
    let csv = tr.diagnostics_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], Trajectory::CSV_HEADER);
    assert_eq!(lines.len(), 12);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 10));
}

#[test]
fn stride_keeps_intermediate_states() {
    let (u, g) = small_data(4);
    let s = gamma_law().with_options(SolveOptions {
        stride: Some(2),
        ..SolveOptions::default()
    });
    let tr = s.solve(&u, &g, &ControlProgram::none(), 0.1, 0.02).unwrap();
    let times: Vec<f64> = tr.states.iter().map(|s| s.t).collect();
    assert_eq!(times.len(), 4);
    assert!((times[3] - 0.1).abs() < 1e-15);
}

#[test]
fn deterministic_runs_are_bitwise_equal() {
    let (u, g) = small_data(4);
    let a = gamma_law().solve(&u, &g, &ControlProgram::none(), 0.1, 0.01).unwrap();
    let b = gamma_law().solve(&u, &g, &ControlProgram::none(), 0.1, 0.01).unwrap();
    assert_eq!(a.final_state(), b.final_state());
    assert_eq!(a.diagnostics_csv(), b.diagnostics_csv());
}

#[test]
fn translation_equivariance() {
    let res = 5;
    let (u, g) = small_data(res);
    let force = vmode(Kind::Cos, 1, f(1, 0, 1), 0.2, res);
    let controls = ControlProgram::none().with_force(TimeSampledField::constant(force.clone(), 0.1).unwrap());
    let shifted = ControlProgram::none().with_force(TimeSampledField::constant(shift_x1(&force, PI), 0.1).unwrap());
    let s = gamma_law();
    let a = s.solve(&u, &g, &controls, 0.1, 0.01).unwrap();
    let b = s.solve(&shift_x1(&u, PI), &shift_x1(&g, PI), &shifted, 0.1, 0.01).unwrap();
    let (fa, fb) = (a.final_state(), b.final_state());
    assert!(shift_x1(&fa.u, PI).sub(&fb.u).unwrap().max_abs_coefficient() < 1e-14);
    assert!(shift_x1(&fa.g, PI).sub(&fb.g).unwrap().max_abs_coefficient() < 1e-14);
}

#[test]
fn time_reversal_recovers_initial_data() {
    let res = 5;
    let (u, g) = small_data(res);
    let horizon = 0.2;
    let force = vmode(Kind::Sin, 2, f(0, 1, 1), 0.1, res);
    let controls = ControlProgram::none().with_force(TimeSampledField::constant(force.clone(), horizon).unwrap());
    let s = gamma_law();
    let gaps: Vec<f64> = [0.02, 0.01]
        .iter()
        .map(|&dt| {
            let fwd = s.solve(&u, &g, &controls, horizon, dt).unwrap();
            let end = fwd.final_state();
            let back = s.solve(&end.u.scaled(-1.0), &end.g, &controls, horizon, dt).unwrap();
            let last = back.final_state();
            l2_gap(&last.u.scaled(-1.0), &u) + l2_gap(&last.g, &g)
        })
        .collect();
    assert!(gaps[0] < 1e-6, "{gaps:?}");
    // fourth order in dt
    assert!(gaps[0] / gaps[1] > 10.0, "{gaps:?}");
}

/// `u* = U e1 + b(t) cos(x1) e2`, `g* = G(x1 − U t)`: the transport equation
/// holds exactly, the momentum residual is supplied as force.
struct Manufactured {
    speed: f64,
    g0: SpectralField,
    res: usize,
}

impl Manufactured {
    fn new(res: usize) -> Self {
        let mut g0 = smode(Kind::Sin, f(2, 0, 0), 0.3, res);
        g0.axpy(1.0, &smode(Kind::Cos, f(1, 0, 0), 0.2, res)).unwrap();
        Manufactured { speed: 1.5, g0, res }
    }

    fn u(&self, t: f64) -> SpectralField {
        let mut u = SpectralField::constant_vector([self.speed, 0.0, 0.0], self.res);
        u.add_mode(Kind::Cos, 1, f(1, 0, 0), 0.2 * (2.0 * t).sin()).unwrap();
        u
    }

    fn du(&self, t: f64) -> SpectralField {
        vmode(Kind::Cos, 1, f(1, 0, 0), 0.4 * (2.0 * t).cos(), self.res)
    }

    fn g(&self, t: f64) -> SpectralField {
        shift_x1(&self.g0, self.speed * t)
    }

    fn controls(&self, solver: &Solver, horizon: f64) -> ControlProgram {
        let me = Manufactured {
            speed: self.speed,
            g0: self.g0.clone(),
            res: self.res,
        };
        let solver = solver.clone();
        let force = TimeSampledField::analytic(horizon, Rank::Vector, self.res, move |t| {
            let state = State::new(me.u(t), me.g(t), t).unwrap();
            let (du, _) = solver.rhs(&state, &ControlProgram::none(), t).unwrap();
            me.du(t).sub(&du).unwrap()
        })
        .unwrap();
        ControlProgram::none().with_force(force)
    }

    fn sup_error(&self, solver: &Solver, horizon: f64, dt: f64) -> f64 {
        let controls = self.controls(solver, horizon);
        let mut worst: f64 = 0.0;
        solver
            .solve_observed(&self.u(0.0), &self.g(0.0), &controls, horizon, dt, |s| {
                let e = (l2_gap(&s.u, &self.u(s.t)).powi(2) + l2_gap(&s.g, &self.g(s.t)).powi(2)).sqrt();
                worst = worst.max(e);
                Ok(())
            })
            .unwrap();
        worst
    }
}

#[test]
fn manufactured_solution_converges_at_fourth_order() {
    let mms = Manufactured::new(4);
    let s = gamma_law();
    let dts = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let errs: Vec<f64> = dts.iter().map(|&dt| mms.sup_error(&s, 0.5, dt)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    assert!(orders.iter().all(|&p| p > 3.5), "errors {errs:?} orders {orders:?}");
}

#[test]
fn blow_up_is_reported_with_the_last_state() {
    let res = 4;
    let u = vmode(Kind::Cos, 0, f(1, 0, 0), 3.0, res);
    let g = SpectralField::zeros(Rank::Scalar, res);
    let err = gamma_law().solve(&u, &g, &ControlProgram::none(), 20.0, 0.5).unwrap_err();
    match err {
        DynamicsError::BlowUp { last, t, .. } => {
            assert!(last.is_finite());
            assert!(t > 0.0 && t <= 20.0);
        }
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn nonpositive_sound_speed_is_rejected() {
    let res = 4;
    let s = Solver::new(PressureLaw::custom("shifted", |rho| rho - 1.5));
    let state = State::new(SpectralField::zeros(Rank::Vector, res), smode(Kind::Cos, f(1, 0, 0), 0.1, res), 0.0)
        .unwrap();
    assert!(matches!(
        s.rhs(&state, &ControlProgram::none(), 0.0),
        Err(DynamicsError::Positivity { .. })
    ));
}

fn probe_inputs(res: usize, horizon: f64) -> InputTuple {
    let (u0, g0) = small_data(res);
    let force = vmode(Kind::Sin, 1, f(1, 1, 0), 0.1, res);
    InputTuple {
        u0,
        g0,
        controls: ControlProgram::none().with_force(TimeSampledField::constant(force, horizon).unwrap()),
    }
}

#[test]
fn probe_of_identical_inputs_is_zero() {
    let a = probe_inputs(4, 0.1);
    let r = lipschitz_probe(&gamma_law(), &a, &a.clone(), 0.1, 0.02, 4).unwrap();
    assert_eq!(r.ratio, 0.0);
    assert_eq!(r.input_gap, 0.0);
    assert_eq!(r.output_gap, 0.0);
}

#[test]
fn probe_ratios_are_stable_under_shrinking_perturbations() {
    let (res, horizon) = (4, 0.2);
    let base = probe_inputs(res, horizon);
    let s = gamma_law();
    let ratio = |eps: f64, channel: usize| {
        let mut b = base.clone();
        let bump = vmode(Kind::Cos, 0, f(1, 0, 0), eps, res);
        match channel {
            0 => b.u0.axpy(1.0, &bump).unwrap(),
            _ => {
                let mut force = b.controls.force.as_ref().unwrap().at(0.0);
                force.axpy(1.0, &bump).unwrap();
                b.controls.force = Some(TimeSampledField::constant(force, horizon).unwrap());
            }
        }
        lipschitz_probe(&s, &base, &b, horizon, 0.02, 4).unwrap().ratio
    };
    for channel in 0..2 {
        let r: Vec<f64> = [1e-2, 1e-3].iter().map(|&e| ratio(e, channel)).collect();
        assert!(r.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!(r[0] / r[1] < 2.0 && r[1] / r[0] < 2.0, "channel {channel}: {r:?}");
    }
}

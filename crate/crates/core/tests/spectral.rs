use std::f64::consts::PI;

use eulerctl_core::spectral::{io, make_mode, Frequency, Kind, Rank, SpectralError, SpectralField, TORUS_VOLUME};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn f(m1: i32, m2: i32, m3: i32) -> Frequency {
    Frequency::new(m1, m2, m3)
}

fn random_field(rank: Rank, resolution: usize, band: i32, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SpectralField::zeros(rank, resolution);
    for c in 0..rank.components() {
        for a in -band..=band {
            for b in -band..=band {
                for d in -band..=band {
                    let m = f(a, b, d);
                    if !m.is_canonical() {
                        continue;
                    }
                    out.add_mode(Kind::Cos, c, m, rng.gen_range(-1.0..1.0)).unwrap();
                    out.add_mode(Kind::Sin, c, m, rng.gen_range(-1.0..1.0)).unwrap();
                }
            }
        }
    }
    out
}

fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().max_abs_coefficient()
}

#[test]
fn pure_modes() {
    let e1 = make_mode(Kind::Cos, Some(0), Frequency::ZERO, 4).unwrap();
    assert_eq!(e1, SpectralField::constant_vector([1.0, 0.0, 0.0], 4));
    let zero = make_mode(Kind::Sin, Some(1), Frequency::ZERO, 4).unwrap();
    assert_eq!(zero, SpectralField::zeros(Rank::Vector, 4));
    let c = make_mode(Kind::Cos, Some(0), f(1, 0, 0), 4).unwrap();
    assert_eq!(c.eval_at([0.0; 3]), vec![1.0, 0.0, 0.0]);
    assert!(matches!(
        make_mode(Kind::Cos, None, f(5, 0, 0), 4),
        Err(SpectralError::FrequencyOutOfRange { .. })
    ));
}

#[test]
fn negative_frequency_modes_follow_parity() {
    let s = make_mode(Kind::Sin, None, f(-1, 2, 0), 3).unwrap();
    let x = [0.3, 1.1, -0.4];
    let expect = (-0.3f64 + 2.2).sin();
    assert!((s.eval_at(x)[0] - expect).abs() < 1e-14);
}

#[test]
fn derivative_examples() {
    let s1 = make_mode(Kind::Sin, None, f(1, 0, 0), 4).unwrap();
    assert_eq!(s1.derivative(0), make_mode(Kind::Cos, None, f(1, 0, 0), 4).unwrap());
    assert_eq!(s1.derivative(1), SpectralField::zeros(Rank::Scalar, 4));
    let c13 = make_mode(Kind::Cos, None, f(1, 0, 1), 4).unwrap();
    assert_eq!(c13.derivative(0), make_mode(Kind::Sin, None, f(1, 0, 1), 4).unwrap().scaled(-1.0));
}

#[test]
fn derivative_is_exact_on_modes() {
    for m in [f(2, -1, 3), f(0, 1, -2), f(0, 0, 3)] {
        for axis in 0..3 {
            let k = m.0[axis] as f64;
            let c = make_mode(Kind::Cos, Some(2), m, 3).unwrap().derivative(axis);
            let s = make_mode(Kind::Sin, Some(2), m, 3).unwrap();
            assert_eq!(c, s.scaled(-k));
            let s_d = s.derivative(axis);
            assert_eq!(s_d, make_mode(Kind::Cos, Some(2), m, 3).unwrap().scaled(k));
            assert_eq!(s_d.mean(2), 0.0);
        }
    }
}

#[test]
fn advect_examples() {
    let e1 = SpectralField::constant_vector([1.0, 0.0, 0.0], 4);
    let b = make_mode(Kind::Sin, Some(1), f(1, 0, 0), 4).unwrap();
    let got = SpectralField::advect(&e1, &b).unwrap();
    assert!(max_diff(&got, &make_mode(Kind::Cos, Some(1), f(1, 0, 0), 4).unwrap()) < 1e-14);

    let half_sin2 = make_mode(Kind::Sin, Some(0), f(2, 0, 0), 4).unwrap().scaled(0.5);
    let c = make_mode(Kind::Cos, Some(0), f(1, 0, 0), 4).unwrap();
    let got = SpectralField::advect(&c, &c).unwrap();
    assert!(max_diff(&got, &half_sin2.scaled(-1.0)) < 1e-14);
    let s = make_mode(Kind::Sin, Some(0), f(1, 0, 0), 4).unwrap();
    let got = SpectralField::advect(&s, &s).unwrap();
    assert!(max_diff(&got, &half_sin2) < 1e-14);
}

#[test]
fn advect_support_is_sum_and_difference() {
    let m = f(1, 2, -1);
    let n = f(2, -1, 1);
    let a = make_mode(Kind::Cos, Some(1), m, 4).unwrap();
    let b = make_mode(Kind::Sin, Some(0), n, 4)
        .unwrap()
        .add(&make_mode(Kind::Cos, Some(2), n, 4).unwrap())
        .unwrap();
    let got = SpectralField::advect(&a, &b).unwrap();
    let allowed = [(m + n).canonical().0, (m - n).canonical().0];
    for (_, freq, cos, sin) in got.nonzero_records() {
        if !allowed.contains(&freq) {
            assert!(cos.abs() < 1e-13 && sin.abs() < 1e-13, "leak at {freq}");
        }
    }
    // direct pointwise check against summation
    let x = [0.7, 2.1, 4.4];
    let av = a.eval_at(x);
    let grads: Vec<Vec<f64>> = (0..3).map(|j| b.derivative(j).eval_at(x)).collect();
    let gv = got.eval_at(x);
    for c in 0..3 {
        let expect: f64 = (0..3).map(|j| av[j] * grads[j][c]).sum();
        assert!((gv[c] - expect).abs() < 1e-12);
    }
}

#[test]
fn advect_truncates_above_resolution() {
    let a = make_mode(Kind::Cos, Some(0), f(2, 0, 0), 2).unwrap();
    let got = SpectralField::advect(&a, &a).unwrap();
    assert!(got.max_abs_coefficient() < 1e-14, "frequency 4 must be dropped, not aliased");
}

#[test]
fn resolution_mismatch_is_an_error() {
    let a = SpectralField::zeros(Rank::Vector, 3);
    let b = SpectralField::zeros(Rank::Vector, 4);
    assert_eq!(a.add(&b).unwrap_err(), SpectralError::ResolutionMismatch(3, 4));
    assert!(SpectralField::advect(&a, &b).is_err());
}

#[test]
fn sobolev_norm_examples() {
    let s = make_mode(Kind::Sin, None, f(1, 0, 0), 4).unwrap();
    let expected = 2.0 * PI.powf(1.5);
    assert!((s.sobolev_norm(0) - expected).abs() < 1e-12);
    assert!((s.sobolev_norm(1) - 2f64.sqrt() * expected).abs() < 1e-12);
    assert_eq!(SpectralField::zeros(Rank::Scalar, 4).sobolev_norm(3), 0.0);
}

/// Midpoint-free trapezoid quadrature on a uniform grid computed by direct summation.
fn quadrature_sq(field: &SpectralField, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = field.eval_at([i as f64 * h, j as f64 * h, k as f64 * h]);
                total += v.iter().map(|x| x * x).sum::<f64>();
            }
        }
    }
    total * h * h * h
}

#[test]
fn parseval_against_quadrature() {
    let g = random_field(Rank::Vector, 2, 2, 7);
    let q = quadrature_sq(&g, 6);
    let n2 = g.sobolev_norm_sq(0);
    assert!((q - n2).abs() / n2 < 1e-10);
    // H^1 = L^2 of f plus L^2 of gradient
    let s = random_field(Rank::Scalar, 2, 2, 8);
    let h1 = quadrature_sq(&s, 6) + quadrature_sq(&s.gradient().unwrap(), 6);
    assert!((h1 - s.sobolev_norm_sq(1)).abs() / h1 < 1e-10);
}

#[test]
fn poisson_examples() {
    let c = make_mode(Kind::Cos, None, f(1, 0, 0), 3).unwrap();
    assert_eq!(c.poisson_solve(1e-10).unwrap(), c.scaled(-1.0));
    let z = SpectralField::zeros(Rank::Scalar, 3);
    assert_eq!(z.poisson_solve(1e-10).unwrap(), z);
    let s = make_mode(Kind::Sin, None, f(1, 1, 0), 3).unwrap();
    assert_eq!(s.poisson_solve(1e-10).unwrap(), s.scaled(-0.5));
    let bad = SpectralField::constant_scalar(1e-3, 3);
    assert!(matches!(bad.poisson_solve(1e-10), Err(SpectralError::Solvability { .. })));
}

#[test]
fn poisson_inverts_laplacian() {
    let mut g = random_field(Rank::Scalar, 4, 4, 3);
    g.comp_mut(0)[0] = [0.0, 0.0];
    let back = g.laplacian().poisson_solve(1e-10).unwrap();
    assert!(max_diff(&back, &g) < 1e-15);
}

#[test]
fn mollify_examples() {
    let k = SpectralField::constant_scalar(3.0, 4);
    assert_eq!(k.mollify(1.0), k);
    let c = make_mode(Kind::Cos, None, f(1, 0, 0), 4).unwrap();
    assert_eq!(c.mollify(1.0), c.scaled((-1.0f64).exp()));
    let g = random_field(Rank::Vector, 4, 4, 11);
    let a = g.mollify(0.1).mollify(0.25);
    let b = g.mollify(0.35);
    assert!(max_diff(&a, &b) <= 1e-15);
    let commuted = g.derivative(1).mollify(0.2);
    assert!(max_diff(&g.mollify(0.2).derivative(1), &commuted) <= 1e-15 * commuted.max_abs_coefficient());
}

#[test]
fn grid_round_trip_and_undersampling() {
    let g = random_field(Rank::Vector, 5, 5, 1);
    for n in [11, 12, 16] {
        let vals = g.grid_eval(n).unwrap();
        let back = SpectralField::grid_fit(&vals, 5).unwrap();
        assert!(max_diff(&back, &g) <= 1e-12 * g.max_abs_coefficient());
    }
    assert_eq!(
        g.grid_eval(10).unwrap_err(),
        SpectralError::Undersampled { n: 10, resolution: 5 }
    );
}

#[test]
fn grid_values_match_direct_summation() {
    let g = random_field(Rank::Scalar, 3, 3, 21);
    let vals = g.grid_eval(8).unwrap();
    for flat in [0, 5, 77, 300, 511] {
        let direct = g.eval_at(vals.point(flat))[0];
        assert!((vals.values[0][flat] - direct).abs() < 1e-12);
    }
}

#[test]
fn multiply_is_dealiased_product() {
    let a = random_field(Rank::Scalar, 4, 2, 5);
    let b = random_field(Rank::Vector, 4, 2, 6);
    let p = a.multiply(&b).unwrap();
    let x = [1.3, 0.2, 5.0];
    let (av, bv, pv) = (a.eval_at(x)[0], b.eval_at(x), p.eval_at(x));
    for c in 0..3 {
        assert!((pv[c] - av * bv[c]).abs() < 1e-12);
    }
}

#[test]
fn binary_container_round_trip_is_bit_exact() {
    let mut g = random_field(Rank::Vector, 3, 3, 9);
    g.add_mode(Kind::Cos, 1, f(1, 0, 0), -0.0).unwrap();
    let bytes = io::to_bytes(&g);
    assert_eq!(&bytes[..4], b"TFLD");
    let back = io::from_bytes(&bytes).unwrap();
    for c in 0..3 {
        for (x, y) in g.comp(c).iter().zip(back.comp(c)) {
            assert_eq!(x[0].to_bits(), y[0].to_bits());
            assert_eq!(x[1].to_bits(), y[1].to_bits());
        }
    }
    assert!(io::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let json = io::to_json(&g);
    assert_eq!(io::from_json(&json).unwrap(), g);
}

#[test]
fn volume_constant() {
    assert!((TORUS_VOLUME - 248.050213442398).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_random(seed in any::<u64>(), m in 1usize..5) {
        let g = random_field(Rank::Scalar, m, m as i32, seed);
        let back = SpectralField::grid_fit(&g.grid_eval(2 * m + 1).unwrap(), m).unwrap();
        prop_assert!(max_diff(&back, &g) <= 1e-12 * g.max_abs_coefficient().max(1.0));
    }

    #[test]
    fn mollify_never_increases_norms(seed in any::<u64>(), mu in 1e-3f64..2.0, k in 0u32..5) {
        let g = random_field(Rank::Vector, 3, 3, seed);
        prop_assert!(g.mollify(mu).sobolev_norm(k) <= g.sobolev_norm(k));
    }

    #[test]
    fn mean_of_derivative_is_zero(seed in any::<u64>(), axis in 0usize..3) {
        let g = random_field(Rank::Scalar, 3, 3, seed);
        prop_assert_eq!(g.derivative(axis).mean(0), 0.0);
    }
}

use eulerctl_core::saturation::{
    basis_e, decompose_mode, double_frequency, evaluate_tree, expand_tree, project_e_n, project_field,
    split_frequency, DecompositionTree, Decomposer, Mode, TrigPoly, TreeEvaluator, Q,
};
use eulerctl_core::spectral::{make_mode, Frequency, Kind, Rank, SpectralField};
use eulerctl_core::time::TimeSampledField;
use num_traits::Signed;

fn f(a: i32, b: i32, c: i32) -> Frequency {
    Frequency::new(a, b, c)
}

fn level_bound(l: Frequency) -> u32 {
    let size = l.l1() as f64;
    size.log2().ceil() as u32 + 1
}

fn rel_residual(got: &SpectralField, want: &SpectralField) -> f64 {
    got.sub(want).unwrap().sobolev_norm(0) / want.sobolev_norm(0)
}

#[test]
fn basis_has_45_independent_elements() {
    let e = basis_e();
    assert_eq!(e.len(), 45);
    assert!(e.contains(&Mode::cos(1, [0, 0, 0])));
    assert!(!e.contains(&Mode::sin(1, [0, 0, 0])));
    let mut sorted = e.modes().to_vec();
    sorted.sort();
    assert_eq!(sorted, e.modes());
    // modes are orthogonal, so the Gram matrix is diagonal with positive entries
    let g = e.gram_matrix(2).unwrap();
    for (r, row) in g.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if r == c {
                assert!(*v > 1.0);
            } else {
                assert!(v.abs() < 1e-9);
            }
        }
    }
}

#[test]
fn split_examples() {
    assert_eq!(split_frequency(f(2, 0, 0)), (f(1, 0, 0), f(1, 0, 0)));
    assert_eq!(split_frequency(f(1, 1, 1)), (f(1, 0, 1), f(0, 1, 0)));
    assert_eq!(split_frequency(f(2, 1, 0)), (f(1, 0, 0), f(1, 1, 0)));
}

#[test]
fn split_postconditions_hold_everywhere() {
    for a in -6..=6 {
        for b in -6..=6 {
            for c in -6..=6 {
                let l = f(a, b, c);
                if l.l1() < 2 {
                    continue;
                }
                let (n, m) = split_frequency(l);
                assert_eq!(n + m, l);
                assert!((n - m).0.iter().all(|d| d.abs() <= 1), "{l}: {n} {m}");
                let bound = l.l1().next_power_of_two() / 2;
                assert!(n.l1() <= bound.max(l.l1().div_ceil(2)) && m.l1() <= bound.max(l.l1().div_ceil(2)));
            }
        }
    }
}

fn symbolic_q(coef: Q, zeta: &[(i64, Mode)]) -> TrigPoly {
    let mut z = TrigPoly::zero();
    for (c, m) in zeta {
        z.add_term(Q::from_integer(*c), *m);
    }
    TrigPoly::quadratic(&z).scaled(coef)
}

#[test]
fn four_doubling_identities_are_exact() {
    for n in [f(1, 0, 0), f(1, 1, 0)] {
        for i in 1..=3u8 {
            let ni = n.0[i as usize - 1] as i64;
            if ni == 0 {
                continue;
            }
            let (c, s) = (Mode::cos(i, n), Mode::sin(i, n));
            let s2 = TrigPoly::mode(Mode::sin(i, n + n));
            let c2 = TrigPoly::mode(Mode::cos(i, n + n));
            assert_eq!(symbolic_q(Q::new(-2, ni), &[(1, c)]), s2);
            assert_eq!(symbolic_q(Q::new(-2, ni), &[(1, s)]), s2.scaled(Q::from_integer(-1)));
            assert_eq!(symbolic_q(Q::new(-1, ni), &[(1, s), (-1, c)]), c2);
            assert_eq!(symbolic_q(Q::new(-1, ni), &[(1, s), (1, c)]), c2.scaled(Q::from_integer(-1)));
        }
    }
}

#[test]
fn doubling_examples() {
    let t = double_frequency(Kind::Sin, 1, f(1, 0, 0)).unwrap();
    let node = t.root_node();
    assert!(node.eta.is_empty());
    assert_eq!(node.pairs.len(), 1);
    assert_eq!(node.pairs[0].lambda, Q::from_integer(2));
    let v = evaluate_tree(&t, 4).unwrap();
    let want = make_mode(Kind::Sin, Some(0), f(2, 0, 0), 4).unwrap();
    assert!(v.sub(&want).unwrap().max_abs_coefficient() <= 1e-12);

    let t = double_frequency(Kind::Cos, 1, f(1, 0, 0)).unwrap();
    assert_eq!(t.root_node().pairs[0].lambda, Q::from_integer(1));
    assert_eq!(expand_tree(&t).unwrap(), TrigPoly::mode(Mode::cos(1, [2, 0, 0])));

    // n_i = 0 branch
    for kind in [Kind::Cos, Kind::Sin] {
        for n in [f(1, 0, 0), f(0, 1, 1), f(1, -1, 0)] {
            for i in 1..=3u8 {
                let t = double_frequency(kind, i, n).unwrap();
                assert_eq!(expand_tree(&t).unwrap(), TrigPoly::mode(Mode::new(kind, i, n + n)), "{kind} {i} {n}");
            }
        }
    }
    assert!(double_frequency(Kind::Sin, 1, Frequency::ZERO).is_err());
}

#[test]
fn decompose_examples() {
    let t = decompose_mode(Kind::Cos, 1, f(1, 1, 0)).unwrap();
    assert_eq!(t.level(), 0);
    assert_eq!(t.root_node().pairs.len(), 0);

    let t = decompose_mode(Kind::Sin, 1, f(2, 1, 0)).unwrap();
    let v = evaluate_tree(&t, 4).unwrap();
    let want = make_mode(Kind::Sin, Some(0), f(2, 1, 0), 4).unwrap();
    assert!(rel_residual(&v, &want) <= 1e-10);

    let t = decompose_mode(Kind::Sin, 2, f(-1, 0, 0)).unwrap();
    let v = evaluate_tree(&t, 2).unwrap();
    let want = make_mode(Kind::Sin, Some(1), f(-1, 0, 0), 2).unwrap();
    assert_eq!(v, want);
    assert!(decompose_mode(Kind::Sin, 1, Frequency::ZERO).is_err());
    assert!(decompose_mode(Kind::Cos, 4, f(1, 0, 0)).is_err());
}

#[test]
fn sweep_up_to_size_four() {
    let mut dec = Decomposer::new(4);
    let mut eval = TreeEvaluator::new(8);
    let mut count = 0;
    for a in -4..=4i32 {
        for b in -4..=4i32 {
            for c in -4..=4i32 {
                let l = f(a, b, c);
                if l.l1() == 0 || l.l1() > 4 || !l.is_canonical() {
                    continue;
                }
                for i in 1..=3u8 {
                    for kind in [Kind::Cos, Kind::Sin] {
                        let mode = Mode::new(kind, i, l);
                        let t = dec.decompose(mode).unwrap_or_else(|e| panic!("{mode}: {e}"));
                        assert!(t.level() <= level_bound(l).max(0), "{mode} level {}", t.level());
                        assert_eq!(expand_tree(&t).unwrap(), TrigPoly::mode(mode), "{mode}");
                        let v = eval.evaluate(&t).unwrap();
                        let want = mode.field(8).unwrap();
                        assert!(rel_residual(&v, &want) <= 1e-10, "{mode}");
                        assert!(t.coefficients().all(|q| *q.denom() > 0));
                        assert!(t.nodes().all(|n| n.pairs.iter().all(|p| p.lambda.is_positive())));
                        count += 1;
                    }
                }
            }
        }
    }
    assert_eq!(count, 64 * 6);
}

#[test]
fn tree_evaluation_is_resolution_independent() {
    let t = decompose_mode(Kind::Cos, 3, f(1, 2, -1)).unwrap();
    let need = t.required_resolution();
    let lo = evaluate_tree(&t, need).unwrap();
    let hi = evaluate_tree(&t, need + 3).unwrap();
    assert!(lo.resample(need + 3).sub(&hi).unwrap().max_abs_coefficient() < 1e-12);
    assert!(evaluate_tree(&t, need - 1).is_err());
}

#[test]
fn tree_json_round_trip() {
    let t = decompose_mode(Kind::Sin, 2, f(1, 2, 1)).unwrap();
    let text = t.to_json();
    assert!(text.contains("\"lambda\""));
    let back = DecompositionTree::from_json(&text).unwrap();
    assert_eq!(back, t);
}

#[test]
fn projection_examples() {
    let m3 = make_mode(Kind::Cos, Some(0), f(2, 1, 0), 4).unwrap();
    assert_eq!(project_field(&m3, 2), SpectralField::zeros(Rank::Vector, 4));
    let m1 = make_mode(Kind::Sin, Some(2), f(0, 1, 0), 4).unwrap();
    for level in 0..4 {
        assert_eq!(project_field(&m1, level), m1);
    }
    let path = TimeSampledField::constant(m3.add(&m1).unwrap(), 1.0).unwrap();
    let p = project_e_n(&path, 1);
    assert_eq!(p.at(0.5), m1);
    let once = project_e_n(&p, 1);
    assert_eq!(once.at(0.3), p.at(0.3));
}

mod common;

use gradsense_core::strategic::{DEFAULT_RANK_RTOL, DEFAULT_VANISH_TOL};
use gradsense_core::{
    assemble_gn, basis_split, build_basis, corollary_condition, forbidden_sets_1d,
    group_eigenvalues, rank_test, residual_independence_check, Adaptation, Coord, Corollary,
    Domain, Error, FailureReason, ModalBasis, Mode, QuadratureSpec, RankOptions, Sensor, Subregion,
    Weight,
};
use proptest::prelude::*;
use std::f64::consts::{PI, SQRT_2};

fn unit_interval(n: usize) -> ModalBasis {
    build_basis(&Domain::interval(1.0).unwrap(), n, Adaptation::Global).unwrap()
}

fn unit_square(n: usize) -> ModalBasis {
    build_basis(&Domain::rectangle(1.0, 1.0).unwrap(), n, Adaptation::Global).unwrap()
}

fn frac(s: &str) -> Sensor {
    Sensor::pointwise(vec![s.parse().unwrap()])
}

#[test]
fn counterexample_locations() {
    let b = unit_interval(25);
    let opts = RankOptions::default();
    let v = rank_test(&b, &[frac("1/3")], &opts).unwrap();
    assert!(!v.state_strategic());
    assert!(v.gradient_strategic());
    assert_eq!(v.state.first_failure, Some(2));
    let v = rank_test(&b, &[frac("1/2")], &opts).unwrap();
    assert!(!v.state_strategic() && !v.gradient_strategic());
    assert_eq!(v.gradient.first_failure, Some(0));
    let v = rank_test(&b, &[Sensor::point(&[1.0 / SQRT_2])], &opts).unwrap();
    assert!(v.state_strategic() && v.gradient_strategic());
    assert_eq!(v.truncation, 25);
}

#[test]
fn sensor_count_condition_on_square() {
    let b = unit_square(2);
    let v = rank_test(&b, &[Sensor::point(&[0.3, 0.7])], &RankOptions::default()).unwrap();
    assert!(!v.gradient_strategic());
    assert_eq!(
        v.gradient.reason,
        Some(FailureReason::TooFewSensors {
            sensors: 1,
            max_multiplicity: 2
        })
    );
    let pair = [
        Sensor::point(&[0.9 / SQRT_2, 0.31]),
        Sensor::point(&[0.13, 1.0 / 5f64.sqrt()]),
    ];
    let v = rank_test(&b, &pair, &RankOptions::default()).unwrap();
    let five = v
        .gradient
        .groups
        .iter()
        .find(|g| (g.eigenvalue + 5.0 * PI * PI).abs() < 1e-9)
        .unwrap();
    assert_eq!(five.multiplicity, 2);
    assert_eq!(five.rank, 2);
}

#[test]
fn group_matrices() {
    let b = unit_interval(3);
    let groups = group_eigenvalues(&b, 1e-9).unwrap();
    let g = assemble_gn(&groups[0], &[Sensor::point(&[0.5])], &b).unwrap();
    assert!(g[(0, 0)].abs() < 1e-14);
    let g = assemble_gn(&groups[2], &[frac("1/3")], &b).unwrap();
    assert!((g[(0, 0)] + 3.0 * SQRT_2 * PI).abs() < 1e-12);
    let s = unit_square(2);
    let groups = group_eigenvalues(&s, 1e-9).unwrap();
    let five = groups.iter().find(|g| g.multiplicity() == 2).unwrap();
    assert_eq!(five.modes, vec![Mode::Grid(1, 2), Mode::Grid(2, 1)]);
    let g = assemble_gn(five, &[Sensor::point(&[0.3, 0.4])], &s).unwrap();
    assert_eq!(g.shape(), (1, 2));
    assert!(group_eigenvalues(&s, -1.0).is_err());
    assert!(matches!(
        rank_test(&s, &[], &RankOptions::default()),
        Err(Error::EmptySensorList)
    ));
}

#[test]
fn forbidden_set_examples() {
    let f = forbidden_sets_1d("1/2".parse().unwrap(), 25, 1e-9).unwrap();
    assert!(f.in_s() && f.in_s_g());
    assert_eq!((f.s_witnesses[0].n, f.s_witnesses[0].k), (2, 1));
    assert_eq!((f.s_g_witnesses[0].n, f.s_g_witnesses[0].k), (1, 0));
    let f = forbidden_sets_1d("1/3".parse().unwrap(), 25, 1e-9).unwrap();
    assert!(f.in_s() && !f.in_s_g());
    assert_eq!((f.s_witnesses[0].n, f.s_witnesses[0].k), (3, 1));
    let f = forbidden_sets_1d(Coord::real(1.0 / SQRT_2), 10_000, 1e-6).unwrap();
    assert!(!f.in_s() && !f.in_s_g());
    assert!(forbidden_sets_1d(Coord::real(1.0), 5, 1e-9).is_err());
    assert!(forbidden_sets_1d(Coord::real(0.0), 5, 1e-9).is_err());
}

#[test]
fn exact_and_numerical_forbidden_sets_agree() {
    for q in 2..=50i64 {
        for p in 1..q {
            if num_gcd(p, q) != 1 {
                continue;
            }
            let exact = forbidden_sets_1d(Coord::ratio(p, q).unwrap(), 2 * q as u64, 1e-9).unwrap();
            let numeric =
                forbidden_sets_1d(Coord::real(p as f64 / q as f64), 2 * q as u64, 1e-9).unwrap();
            assert!(exact.exact && !numeric.exact);
            assert_eq!(exact.s_witnesses, numeric.s_witnesses, "S at {p}/{q}");
            assert_eq!(exact.s_g_witnesses, numeric.s_g_witnesses, "S_G at {p}/{q}");
        }
    }
}

fn num_gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        num_gcd(b, a % b)
    }
}

#[test]
fn corollary_examples() {
    let omega = Subregion::rectangle((0.0, 1.0), (0.0, 1.0)).unwrap();
    let s = Sensor::pointwise(vec!["1/2".parse().unwrap(), "1/3".parse().unwrap()]);
    let v = corollary_condition(&s, &omega, Corollary::Pointwise, 5, 1e-9).unwrap();
    assert!(v.exact);
    assert!(v.natural[0][1] && v.natural[1][2]);
    assert!(!v.pair_passes(2, 3));
    let s = Sensor::point(&[1.0 / SQRT_2, 1.0 / PI]);
    let v = corollary_condition(&s, &omega, Corollary::Pointwise, 50, 1e-6).unwrap();
    assert!(v.all_pass);
    for i in 1..=50 {
        assert!(common::distance_to_integer(i as f64 / SQRT_2) > 1e-6);
        assert!(common::distance_to_integer(i as f64 / PI) > 1e-6);
    }
    // symmetric zone centred at 1/2 on the first axis: 2·(1/2) is natural
    let z = Sensor::zonal(vec![0.4, 0.2], vec![0.6, 0.5], Weight::Uniform);
    let v = corollary_condition(&z, &omega, Corollary::SymmetricZone, 4, 1e-9).unwrap();
    assert!(v.hypothesis_holds);
    assert!(v.natural[0][1]);
    assert!(!v.all_pass);
    assert!(matches!(
        corollary_condition(&z, &omega, Corollary::Pointwise, 4, 1e-9),
        Err(Error::CorollaryMismatch { .. })
    ));
}

#[test]
fn split_and_residual_examples() {
    let q = QuadratureSpec::default();
    let b = unit_interval(6);
    let split = basis_split(&b, &[frac("1/2")], DEFAULT_VANISH_TOL, &q).unwrap();
    assert_eq!(
        split.kernel_modes(&b),
        vec![Mode::Line(1), Mode::Line(3), Mode::Line(5)]
    );
    assert!(basis_split(&b, &[frac("1/3")], DEFAULT_VANISH_TOL, &q)
        .unwrap()
        .kernel
        .is_empty());
    let irr = Sensor::point(&[1.0 / SQRT_2]);
    assert!(basis_split(&b, &[irr], DEFAULT_VANISH_TOL, &q)
        .unwrap()
        .kernel
        .is_empty());

    let omega = Subregion::interval(0.2, 0.5).unwrap();
    assert!(
        residual_independence_check(&[], &b, &omega, &q, 1e-8)
            .unwrap()
            .independent
    );
    assert!(
        residual_independence_check(&[0], &b, &omega, &q, 1e-8)
            .unwrap()
            .independent
    );
    let r = residual_independence_check(&[0, 2], &b, &omega, &q, 1e-8).unwrap();
    assert!(r.independent && r.min_eigenvalue > 1e-8);
    // complement Gram entries against a Simpson oracle on (0,0.2) ∪ (0.5,1)
    let oracle = |i: usize, j: usize| {
        let f = |x: f64| common::dphi_1d(i, x, 1.0) * common::dphi_1d(j, x, 1.0);
        common::simpson(f, 0.0, 0.2, 4000) + common::simpson(f, 0.5, 1.0, 4000)
    };
    assert!((r.complement_gram[(0, 1)] - oracle(1, 3)).abs() < 1e-8);
    assert!((r.complement_gram[(1, 1)] - oracle(3, 3)).abs() < 1e-8);
    assert!(matches!(
        residual_independence_check(&[0], &b, &b.domain().whole(), &q, 1e-8),
        Err(Error::ZeroMeasureComplement)
    ));
}

/// Normalised gradient signature of a pointwise sensor, computed directly.
fn normalized_1d(n: usize, x: f64) -> f64 {
    common::dphi_1d(n, x, 1.0) / (SQRT_2 * n as f64 * PI)
}

fn normalized_square(i: usize, j: usize, p: &[f64]) -> f64 {
    let (fi, fj) = (i as f64 * PI, j as f64 * PI);
    let g = 2.0
        * (fi * (fi * p[0]).cos() * (fj * p[1]).sin() + fj * (fi * p[0]).sin() * (fj * p[1]).cos());
    g / (2.0 * (fi + fj))
}

fn oracle_rank(rows: &[Vec<f64>], rtol: f64) -> Option<usize> {
    let sv = common::jacobi_singular_values(rows);
    // keep only inputs well separated from either threshold
    if sv.iter().any(|s| *s > 1e-13 && *s < 1e-6) {
        return None;
    }
    let thr = rtol * sv.first().copied().unwrap_or(0.0).max(1.0);
    Some(sv.iter().filter(|s| **s > thr).count())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rank_agrees_with_jacobi_oracle_1d(xs in prop::collection::vec(0.01f64..0.99, 1..4)) {
        let b = unit_interval(10);
        let sensors: Vec<Sensor> = xs.iter().map(|x| Sensor::point(&[*x])).collect();
        for rtol in [1e-8, 1e-10] {
            let v = rank_test(&b, &sensors, &RankOptions { rank_rtol: rtol, ..Default::default() }).unwrap();
            for (g, grp) in v.gradient.groups.iter().enumerate() {
                let rows: Vec<Vec<f64>> = xs.iter().map(|x| vec![normalized_1d(g + 1, *x)]).collect();
                if let Some(r) = oracle_rank(&rows, rtol) {
                    prop_assert_eq!(grp.rank, r);
                }
            }
        }
    }

    #[test]
    fn rank_agrees_with_jacobi_oracle_square(pts in prop::collection::vec((0.01f64..0.99, 0.01f64..0.99), 1..4)) {
        let b = unit_square(4);
        let sensors: Vec<Sensor> = pts.iter().map(|(x, y)| Sensor::point(&[*x, *y])).collect();
        for rtol in [1e-8, 1e-10] {
            let v = rank_test(&b, &sensors, &RankOptions { rank_rtol: rtol, ..Default::default() }).unwrap();
            for grp in &v.gradient.groups {
                let rows: Vec<Vec<f64>> = pts
                    .iter()
                    .map(|(x, y)| grp.modes.iter().map(|m| normalized_square(m.index(0), m.index(1), &[*x, *y])).collect())
                    .collect();
                if let Some(r) = oracle_rank(&rows, rtol) {
                    prop_assert_eq!(grp.rank, r);
                }
            }
        }
    }

    #[test]
    fn verdict_invariant_under_gain_rescaling(xs in prop::collection::vec(0.01f64..0.99, 1..4), scale in prop::collection::vec(1e-3f64..1e3, 3)) {
        let b = unit_interval(12);
        let base: Vec<Sensor> = xs.iter().map(|x| Sensor::point(&[*x])).collect();
        let scaled: Vec<Sensor> = base.iter().zip(&scale).map(|(s, g)| s.clone().with_gain(*g)).collect();
        let v1 = rank_test(&b, &base, &RankOptions::default()).unwrap();
        let v2 = rank_test(&b, &scaled, &RankOptions::default()).unwrap();
        prop_assert_eq!(v1.gradient_strategic(), v2.gradient_strategic());
        prop_assert_eq!(v1.state_strategic(), v2.state_strategic());
    }

    #[test]
    fn zonal_verdict_invariant_under_gain_rescaling(lo in 0.05f64..0.6, w in 0.05f64..0.3, g in 1e-3f64..1e3) {
        let b = unit_interval(10);
        let z = Sensor::zonal(vec![lo], vec![lo + w], Weight::Uniform);
        let v1 = rank_test(&b, std::slice::from_ref(&z), &RankOptions::default()).unwrap();
        let v2 = rank_test(&b, &[z.with_gain(g)], &RankOptions::default()).unwrap();
        prop_assert_eq!(v1.gradient_strategic(), v2.gradient_strategic());
    }

    #[test]
    fn passing_verdict_holds_at_smaller_truncation(x in 0.01f64..0.99) {
        let n_max = 15usize;
        // stay clear of odd-half rationals with small denominators
        let clear = (1..=n_max).all(|n| common::distance_to_integer(n as f64 * x - 0.5) > 1e-3);
        prop_assume!(clear);
        let s = [Sensor::point(&[x])];
        for n in 1..=n_max {
            let v = rank_test(&unit_interval(n), &s, &RankOptions::default()).unwrap();
            prop_assert!(v.gradient_strategic(), "N={} x={}", n, x);
        }
    }

    #[test]
    fn failure_persists_at_larger_truncation(n in 1i64..8, k_raw in 0i64..8) {
        let k = k_raw % n;
        let b = Coord::ratio(2 * k + 1, 2 * n).unwrap();
        let s = [Sensor::pointwise(vec![b])];
        // the reduced denominator gives the first blind mode
        let first = *b.exact().unwrap().denom() as usize / 2;
        for trunc in first..first + 6 {
            let v = rank_test(&unit_interval(trunc), &s, &RankOptions::default()).unwrap();
            prop_assert!(!v.gradient_strategic());
            prop_assert_eq!(v.gradient.first_failure, Some(first - 1));
        }
    }

    #[test]
    fn any_member_implies_joint(pts in prop::collection::vec(0.01f64..0.99, 1..4)) {
        let b = unit_interval(10);
        let sensors: Vec<Sensor> = pts.iter().map(|x| Sensor::point(&[*x])).collect();
        let v = rank_test(&b, &sensors, &RankOptions { rank_rtol: DEFAULT_RANK_RTOL, ..Default::default() }).unwrap();
        if v.gradient.any_member {
            prop_assert!(v.gradient_strategic());
        }
        if v.state.any_member {
            prop_assert!(v.state_strategic());
        }
    }
}

mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_qp, hex_cbf, random_qp, slab_cbf};
use linbarrier::cbf::verify_safety_condition;
use linbarrier::plant::{estimate_constants, ArmParams, SecondOrderPlant, TwoLinkArm};
use linbarrier::polytope::presets::hexagon;
use linbarrier::polytope::{
    contains, eval_h, is_bounded, HalfSpace, LpProblem, LpSolution, SafetySpec, SpecDocument,
};
use linbarrier::qp::{filter_rows, safeguard, solve_qp, InputSet, QpStatus, QpWeights, KKT_TOL};

fn uniform_hexagon(rng: &mut impl Rng) -> [f64; 2] {
    loop {
        let p = [
            rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
            rng.random_range(-PI..=PI),
        ];
        if contains(&hexagon(), &p) {
            return p;
        }
    }
}

// ---------------------------------------------------------------- polytope

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_strong_duality(seed in any::<u64>(), k in 1usize..5, rows in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x0: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut p = LpProblem::maximize(c.clone());
        for _ in 0..rows {
            let a: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ax: f64 = a.iter().zip(&x0).map(|(u, v)| u * v).sum();
            p.push_ge(a, ax - rng.random_range(0.0..1.0));
        }
        for j in 0..k {
            p = p.bound(j, Some(-5.0), Some(5.0));
        }
        match p.solve().unwrap() {
            LpSolution::Optimal { x, objective, duals } => {
                prop_assert!(p.primal_residual(&x) <= 1e-9);
                prop_assert!(duals.iter().all(|&y| y >= 0.0));
                // A' y = -c for the max form.
                for j in 0..k {
                    let s: f64 = p.rows().iter().zip(&duals).map(|(r, y)| r[j] * y).sum();
                    prop_assert!((s + c[j]).abs() <= 1e-8, "column {j}: {s} vs {}", -c[j]);
                }
                prop_assert!((p.dual_value(&duals) - objective).abs() <= 1e-8 * (1.0 + objective.abs()));
            }
            other => prop_assert!(false, "expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn is_bounded_matches_angular_gaps(angles in prop::collection::vec(0.0..(2.0 * PI), 1..7)) {
        // Rows through offsets b = 1 contain the origin. The region is
        // bounded iff consecutive normal angles never leave a gap >= pi.
        let rows: Vec<HalfSpace> =
            angles.iter().map(|t| HalfSpace::new(vec![t.cos(), t.sin()], 1.0)).collect();
        let mut sorted = angles.clone();
        sorted.sort_by(f64::total_cmp);
        let mut max_gap: f64 = 2.0 * PI - (sorted[sorted.len() - 1] - sorted[0]);
        for w in sorted.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        prop_assume!((max_gap - PI).abs() > 1e-6);
        prop_assert_eq!(is_bounded(&rows, 2).unwrap(), max_gap < PI);
    }

    #[test]
    fn spec_json_roundtrip_is_bit_exact(
        normals in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, 1e-6f64..1e6), 3..7)
    ) {
        let rows: Vec<HalfSpace> =
            normals.iter().map(|&(a, b, c)| HalfSpace::new(vec![a, b], c)).collect();
        let r = rows.len();
        let spec = SafetySpec::new(2, rows, vec![(0..r).collect()]);
        prop_assume!(spec.is_ok());
        let doc = SpecDocument::from_spec(&spec.unwrap(), None);
        let back = SpecDocument::parse(&doc.to_json()).unwrap();
        for (p, q) in doc.halfspaces.iter().zip(&back.halfspaces) {
            prop_assert_eq!(p.b().to_bits(), q.b().to_bits());
            for (u, v) in p.a().iter().zip(q.a()) {
                prop_assert_eq!(u.to_bits(), v.to_bits());
            }
        }
        prop_assert_eq!(back, doc);
    }
}

// --------------------------------------------------------------------- cbf

#[test]
fn safe_states_have_safe_positions() {
    let cbf = hex_cbf(10.0, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut inside = 0;
    for _ in 0..10_000 {
        let x = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-3.5..3.5),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        ];
        if cbf.value(&x) >= 0.0 {
            inside += 1;
            assert!(eval_h(cbf.spec(), &x[..2]) >= 0.0, "{x:?}");
        }
    }
    assert!(inside > 500, "only {inside} safe samples");
}

#[test]
fn every_safe_position_lifts() {
    let cbf = hex_cbf(10.0, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let p = uniform_hexagon(&mut rng);
        let x = cbf.lift_position(&p).unwrap();
        assert!(cbf.value(&x) >= 0.0);
        assert_eq!(&x[..2], &p);
    }
}

#[test]
fn velocity_certificate_is_sound() {
    let cbf = hex_cbf(10.0, 0.1);
    let bound = cbf.velocity_bound().unwrap().norm_bound;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 10_000 {
        let p = uniform_hexagon(&mut rng);
        let mut x = cbf.lift_position(&p).unwrap();
        x[2] += rng.random_range(-25.0..25.0);
        x[3] += rng.random_range(-25.0..25.0);
        if cbf.value(&x) >= 0.0 {
            checked += 1;
            assert!((x[2] * x[2] + x[3] * x[3]).sqrt() <= bound + 1e-9);
        }
    }
}

#[test]
fn velocity_bound_scales_exactly() {
    for (base, g, e) in [(0, 1.0, 0.5), (1, 10.0, 0.1)] {
        let make = |s: f64| {
            if base == 0 {
                slab_cbf(g * s, e * s)
            } else {
                hex_cbf(g * s, e * s)
            }
        };
        let v1 = make(1.0).velocity_bound().unwrap().per_component_bound;
        for s in [0.1, 10.0] {
            let vs = make(s).velocity_bound().unwrap().per_component_bound;
            assert!((vs / s - v1).abs() <= 1e-9 * v1, "s={s}: {vs} vs {v1}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scaling_law_for_any_parameters(gamma in 0.05f64..50.0, frac in 0.05f64..0.95, s in 0.01f64..100.0) {
        let eps = frac * gamma * FRAC_PI_2;
        let a = hex_cbf(gamma, eps).velocity_bound().unwrap();
        let b = hex_cbf(gamma * s, eps * s).velocity_bound().unwrap();
        prop_assert!((b.per_component_bound / s - a.per_component_bound).abs()
            <= 1e-9 * a.per_component_bound);
        prop_assert!((a.norm_bound - 2f64.sqrt() * a.per_component_bound).abs() <= 1e-15 * a.norm_bound);
        prop_assert!(a.c > 0.0);
    }

    #[test]
    fn eval_matches_naive_max_min(
        x in prop::array::uniform4(-4.0f64..4.0),
        gamma in 0.1f64..20.0,
        frac in 0.05f64..0.95,
    ) {
        let eps = frac * gamma * FRAC_PI_2;
        let cbf = hex_cbf(gamma, eps);
        let spec = hexagon();
        let mut best = f64::NEG_INFINITY;
        for term in spec.terms() {
            let mut m = f64::INFINITY;
            for i in term.iter() {
                let h = spec.halfspace(i);
                let (a, b) = (h.a(), h.b());
                let pos = a[0] * x[0] + a[1] * x[1] + b;
                let vel = a[0] * x[2] + a[1] * x[3] + gamma * pos - eps;
                m = m.min(pos).min(vel);
            }
            best = best.max(m);
        }
        let got = cbf.eval(&x).unwrap();
        prop_assert!((got.value - best).abs() <= 1e-12 * (1.0 + best.abs()));
        // Every active index attains the value.
        let v = cbf.values(&x);
        for i in got.active_indices.iter() {
            prop_assert!((v[i] - got.value).abs() <= 1e-9);
        }
    }
}

#[test]
fn condition_witnesses_revalidate_with_a_ball() {
    let cbf = hex_cbf(10.0, 0.1);
    let arm = TwoLinkArm::new(ArmParams::default()).unwrap();
    let xs = cbf.sample_boundary(300, 11).unwrap();
    let u = InputSet::ball(400.0);
    let rep = verify_safety_condition(&cbf, &arm, &u, &xs).unwrap();
    for s in rep.samples.iter().filter(|s| s.feasible) {
        if let Some(w) = &s.witness {
            assert!(u.contains(w, 1e-9));
            let acc = arm.acceleration(&s.x[..2], &s.x[2..], w);
            for i in s.condition_set.iter() {
                let a = cbf.spec().halfspace(i).a();
                let m = a[0] * (10.0 * s.x[2] + acc[0]) + a[1] * (10.0 * s.x[3] + acc[1]);
                assert!(m > 0.0);
            }
        }
    }
}

// ---------------------------------------------------------------------- qp

#[test]
fn qp_matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..500 {
        let k = rng.random_range(1..=4);
        let rows = rng.random_range(0..=8);
        let p = random_qp(&mut rng, k, rows);
        let got = solve_qp(&p).unwrap();
        assert_eq!(got.status, QpStatus::Optimal);
        let want = brute_force_qp(&p).unwrap();
        let err = (DVector::from_column_slice(&got.z) - want).amax();
        assert!(err <= 1e-6, "case {case}: error {err}");
        assert!(got.kkt.max() <= KKT_TOL, "case {case}: {:?}", got.kkt);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn qp_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_qp(&mut rng, 4, 8);
        let a = solve_qp(&p).unwrap();
        let b = solve_qp(&p).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn filter_rows_hold_at_the_optimizer(
        p in prop::array::uniform2(-1.0f64..1.0),
        v in prop::array::uniform2(-3.0f64..3.0),
        un in prop::array::uniform2(-200.0f64..200.0),
    ) {
        let cbf = hex_cbf(10.0, 0.1);
        let arm = TwoLinkArm::new(ArmParams::default()).unwrap();
        // Rows hold on C^s; outside it a position row can be violated for
        // every input.
        let mut x = cbf.lift_position(&[p[0] * FRAC_PI_2, p[1] * FRAC_PI_2]).unwrap();
        x[2] += v[0];
        x[3] += v[1];
        prop_assume!(cbf.value(&x) >= 0.0);
        match safeguard(&cbf, &arm, &QpWeights::default(), &InputSet::Unbounded, &x, Some(&un)) {
            Ok(r) => {
                prop_assert!(r.alpha_star >= 40.0 - 1e-9 && r.m_star >= 1.0 - 1e-9);
                // Recompute every row from scratch.
                let rows = filter_rows(&cbf, &arm, &x).unwrap();
                for row in &rows {
                    prop_assert!(row.eval(&r.u_star, r.alpha_star, r.m_star) >= -1e-8);
                }
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn filter_passes_safe_commands(
        p in prop::array::uniform2(-0.9f64..0.9),
        un in prop::array::uniform2(-5.0f64..5.0),
    ) {
        let cbf = hex_cbf(10.0, 0.1);
        let arm = TwoLinkArm::new(ArmParams::default()).unwrap();
        let x = cbf.lift_position(&[p[0] * FRAC_PI_2, p[1] * FRAC_PI_2]).unwrap();
        let w = QpWeights::default();
        let rows = filter_rows(&cbf, &arm, &x).unwrap();
        prop_assume!(rows.iter().all(|r| r.eval(&un, w.c_alpha, w.c_m) >= 0.0));
        let r = safeguard(&cbf, &arm, &w, &InputSet::Unbounded, &x, Some(&un)).unwrap();
        prop_assert!((r.u_star[0] - un[0]).abs() <= 1e-8 && (r.u_star[1] - un[1]).abs() <= 1e-8);
    }
}

// ------------------------------------------------------------------- plant

#[test]
fn arm_inertia_is_spd_and_inverts_g2() {
    let arm = TwoLinkArm::new(ArmParams::default()).unwrap();
    for k in 0..=200 {
        let q2 = -PI + 2.0 * PI * k as f64 / 200.0;
        let m = arm.inertia(q2);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
        assert!(m.symmetric_eigenvalues().min() > 0.0);
        let g2 = arm.g2(&[0.3, q2]);
        let mm = nalgebra::DMatrix::from_column_slice(2, 2, m.as_slice());
        assert!((mm * g2 - nalgebra::DMatrix::identity(2, 2)).amax() <= 1e-10);
    }
}

#[test]
fn velocity_forces_respect_the_certified_gain() {
    let arm = TwoLinkArm::new(ArmParams::default()).unwrap();
    let cap = 5.0;
    let k = estimate_constants(&arm, &hexagon(), 61, cap).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let p = uniform_hexagon(&mut rng);
        let r = cap * rng.random_range(0.0f64..1.0).sqrt();
        let t = rng.random_range(0.0..2.0 * PI);
        let v = [r * t.cos(), r * t.sin()];
        let f = arm.velocity_drift(&p, &v).unwrap().norm();
        assert!(f <= k.k2 * r + 1e-9, "{f} > {} * {r}", k.k2);
    }
}

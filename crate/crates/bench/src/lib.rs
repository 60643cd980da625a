//! Fixtures shared by the benchmarks.

use linbarrier::cbf::ExtendedCbf;
use linbarrier::polytope::presets::hexagon;
use linbarrier::polytope::{compute_cert, LpProblem, WitnessOverrides};
use linbarrier::qp::QpProblem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The arm's hexagon with origin witnesses.
pub fn hexagon_cbf(gamma: f64, epsilon: f64) -> ExtendedCbf {
    let spec = hexagon();
    let cert =
        compute_cert(&spec, &WitnessOverrides::uniform(vec![0.0, 0.0])).expect("hexagon certifies");
    ExtendedCbf::build(spec, cert, gamma, epsilon).expect("valid parameters")
}

/// Bounded feasible LP with `rows` random constraints around a known point.
pub fn random_lp(seed: u64, k: usize, rows: usize) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p = LpProblem::maximize(c);
    for _ in 0..rows {
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        p.push_ge(a, -rng.random_range(0.1..1.0));
    }
    for j in 0..k {
        p = p.bound(j, Some(-5.0), Some(5.0));
    }
    p
}

/// Strictly convex QP, feasible by construction.
pub fn random_qp(seed: u64, k: usize, rows: usize) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    let p = a.transpose() * &a + 0.1 * DMatrix::identity(k, k);
    let c = DVector::from_fn(k, |_, _| rng.random_range(-3.0..3.0));
    let g = DMatrix::from_fn(rows, k, |_, _| rng.random_range(-1.0..1.0));
    let z0 = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
    let h = &g * &z0 + DVector::from_fn(rows, |_, _| rng.random_range(0.0..1.0));
    QpProblem::new(p, c, g, h).expect("well-formed")
}

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use linbarrier::cbf::ExtendedCbf;
use linbarrier::plant::PlantConfig;
use linbarrier::polytope::presets::{hexagon, slab};
use linbarrier::polytope::{compute_cert, CbfParams, SpecDocument, WitnessOverrides};
use linbarrier::qp::{InputSet, QpProblem, QpWeights};
use linbarrier::sim::{ControllerConfig, Hold, NominalConfig, Scenario, SpecSource, VerifyConfig};

pub fn hex_cbf(gamma: f64, epsilon: f64) -> ExtendedCbf {
    let spec = hexagon();
    let cert = compute_cert(&spec, &WitnessOverrides::uniform(vec![0.0, 0.0])).unwrap();
    ExtendedCbf::build(spec, cert, gamma, epsilon).unwrap()
}

pub fn slab_cbf(gamma: f64, epsilon: f64) -> ExtendedCbf {
    let spec = slab();
    let cert = compute_cert(&spec, &WitnessOverrides::uniform(vec![0.0])).unwrap();
    ExtendedCbf::build(spec, cert, gamma, epsilon).unwrap()
}

/// The wall-avoidance arm scenario: hexagon, origin witnesses, rest at the
/// origin, the sinusoid reference.
pub fn arm_scenario(
    safeguarded: bool,
    gamma: f64,
    epsilon: f64,
    dt: f64,
    t_final: f64,
) -> Scenario {
    let controller = if safeguarded {
        ControllerConfig::Safeguarded {
            nominal: NominalConfig::default(),
            weights: QpWeights::default(),
            input_set: InputSet::Unbounded,
            neighborhood: 0.1,
        }
    } else {
        ControllerConfig::Nominal {
            nominal: NominalConfig::default(),
        }
    };
    Scenario {
        spec: SpecSource::Inline(SpecDocument::from_spec(
            &hexagon(),
            Some(CbfParams {
                gamma,
                epsilon,
                witness: Some(vec![0.0, 0.0]),
            }),
        )),
        cbf: None,
        plant: PlantConfig::TwoLinkArm {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
            gravity: false,
        },
        controller,
        initial_state: None,
        t_final,
        dt,
        seed: 42,
        hold: Hold::PerStage,
        verify: VerifyConfig::default(),
        timing: false,
    }
}

pub const DELTA_HEX: f64 = FRAC_PI_2;

/// Exhaustive active-set oracle: every row subset whose KKT system is
/// nonsingular, primal feasible and dual feasible. Returns the optimizer.
pub fn brute_force_qp(p: &QpProblem) -> Option<DVector<f64>> {
    let k = p.num_vars();
    let rows = p.num_rows();
    assert!(rows <= 12);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << rows) {
        let set: Vec<usize> = (0..rows).filter(|j| mask & (1 << j) != 0).collect();
        if set.len() > k {
            continue;
        }
        let s = set.len();
        let mut kkt = DMatrix::zeros(k + s, k + s);
        kkt.view_mut((0, 0), (k, k)).copy_from(&p.p);
        let mut rhs = DVector::zeros(k + s);
        rhs.rows_mut(0, k).copy_from(&(-&p.c));
        for (r, &j) in set.iter().enumerate() {
            for c in 0..k {
                kkt[(k + r, c)] = p.g[(j, c)];
                kkt[(c, k + r)] = p.g[(j, c)];
            }
            rhs[k + r] = p.h[j];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let z = sol.rows(0, k).into_owned();
        let lam = sol.rows(k, s);
        let primal_ok = (&p.g * &z - &p.h).iter().all(|v| *v <= 1e-9);
        let dual_ok = lam.iter().all(|v| *v >= -1e-9);
        if primal_ok && dual_ok {
            let obj = p.objective(&z);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, z));
            }
        }
    }
    best.map(|(_, z)| z)
}

/// Deterministic strictly convex QP with a known feasible point.
pub fn random_qp(rng: &mut impl rand::Rng, k: usize, rows: usize) -> QpProblem {
    let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    let p = a.transpose() * &a + 0.1 * DMatrix::identity(k, k);
    let c = DVector::from_fn(k, |_, _| rng.random_range(-3.0..3.0));
    let g = DMatrix::from_fn(rows, k, |_, _| rng.random_range(-1.0..1.0));
    let z0 = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
    let h = &g * &z0 + DVector::from_fn(rows, |_, _| rng.random_range(0.0..1.0));
    QpProblem::new(p, c, g, h).unwrap()
}

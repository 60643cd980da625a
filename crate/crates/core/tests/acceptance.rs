//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{arm_scenario, brute_force_qp, hex_cbf, random_qp, slab_cbf, DELTA_HEX};
use linbarrier::cbf::{verify_safety_condition, ExtendedCbf};
use linbarrier::plant::{certify_input_bound, estimate_constants, ArmParams, TwoLinkArm};
use linbarrier::polytope::presets::hexagon;
use linbarrier::polytope::{compute_cert, contains, eval_h, WitnessOverrides};
use linbarrier::qp::{solve_qp, InputSet, QpStatus, KKT_TOL};
use linbarrier::sim::{audit_invariance, rk4_step, simulate, ControlSample, Hold};

const DELTA_TOL: f64 = 1e-12;
const SCALING_TOL: f64 = 1e-9;
const QP_MATCH_TOL: f64 = 1e-6;
const B_TOL: f64 = 1e-6;
const ENERGY_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let pass = out.pass && took <= limit;
    println!(
        "criterion {id} {name}: {} ({}; {:.2}s of {}s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn delta_reproduction() -> Outcome {
    let cert = compute_cert(&hexagon(), &WitnessOverrides::uniform(vec![0.0, 0.0])).unwrap();
    let err = (cert.delta - FRAC_PI_2).abs();
    Outcome {
        pass: err <= DELTA_TOL,
        detail: format!("delta = {:.17}, |delta - pi/2| = {err:.1e}", cert.delta),
    }
}

fn no_positions_lost() -> Outcome {
    let cbf = hex_cbf(10.0, 0.1);
    let spec = hexagon();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut lifted = 0;
    while lifted < 10_000 {
        let p = [
            rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
            rng.random_range(-PI..=PI),
        ];
        if !contains(&spec, &p) {
            continue;
        }
        match cbf.lift_position(&p) {
            Ok(x) if cbf.value(&x) >= 0.0 => lifted += 1,
            _ => {
                return Outcome {
                    pass: false,
                    detail: format!("lift failed at {p:?}"),
                }
            }
        }
    }
    let v = cbf.velocity_bound().unwrap().per_component_bound;
    let mut projected = 0;
    while projected < 10_000 {
        let x = [
            rng.random_range(-FRAC_PI_2..=FRAC_PI_2),
            rng.random_range(-PI..=PI),
            rng.random_range(-v..=v),
            rng.random_range(-v..=v),
        ];
        if cbf.value(&x) < 0.0 {
            continue;
        }
        projected += 1;
        if eval_h(&spec, &x[..2]) < 0.0 {
            return Outcome {
                pass: false,
                detail: format!("safe state {x:?} has an unsafe position"),
            };
        }
    }
    Outcome {
        pass: true,
        detail: format!("{lifted} lifted, {projected} safe states inside C"),
    }
}

fn velocity_scaling() -> Outcome {
    let mut worst: f64 = 0.0;
    type Build = fn(f64, f64) -> ExtendedCbf;
    let builders: [(Build, f64, f64); 2] = [(slab_cbf, 1.0, 0.5), (hex_cbf, 10.0, 0.1)];
    for (make, g, e) in builders {
        let v1 = make(g, e).velocity_bound().unwrap().per_component_bound;
        for s in [0.1, 10.0] {
            let vs = make(s * g, s * e)
                .velocity_bound()
                .unwrap()
                .per_component_bound;
            worst = worst.max((vs / s - v1).abs() / v1);
        }
    }
    let mut analytic: f64 = 0.0;
    for (g, e) in [(1.0, 0.5), (2.0, 0.3), (10.0, 0.1), (0.1, 0.05)] {
        let v = slab_cbf(g, e).velocity_bound().unwrap().per_component_bound;
        analytic = analytic.max((v - (2.0 * g - e)).abs());
    }
    Outcome {
        pass: worst <= SCALING_TOL && analytic <= SCALING_TOL,
        detail: format!("scaling rel err {worst:.1e}, slab 2g - e err {analytic:.1e}"),
    }
}

fn qp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut worst_z, mut worst_kkt): (f64, f64) = (0.0, 0.0);
    for _ in 0..500 {
        let k = rng.random_range(1..=4);
        let rows = rng.random_range(0..=8);
        let p = random_qp(&mut rng, k, rows);
        let Ok(sol) = solve_qp(&p) else {
            return Outcome {
                pass: false,
                detail: "solver error".into(),
            };
        };
        if sol.status != QpStatus::Optimal {
            return Outcome {
                pass: false,
                detail: "feasible instance reported infeasible".into(),
            };
        }
        let want = brute_force_qp(&p).expect("feasible by construction");
        worst_z = worst_z.max((DVector::from_column_slice(&sol.z) - want).amax());
        worst_kkt = worst_kkt.max(sol.kkt.max());
    }
    Outcome {
        pass: worst_z <= QP_MATCH_TOL && worst_kkt <= KKT_TOL,
        detail: format!("500 instances, max |z - z_bf| = {worst_z:.1e}, max KKT = {worst_kkt:.1e}"),
    }
}

fn closed_loop_invariance() -> Outcome {
    let cbf = hex_cbf(10.0, 0.1);
    let safe = simulate(&arm_scenario(true, 10.0, 0.1, 1e-3, 10.0));
    let open = simulate(&arm_scenario(false, 10.0, 0.1, 1e-3, 10.0));
    match (safe, open) {
        (Ok(safe), Ok(open)) => {
            let a = audit_invariance(&safe, &cbf);
            let b = audit_invariance(&open, &cbf);
            Outcome {
                pass: a.min_b >= -B_TOL && b.min_h < 0.0,
                detail: format!(
                    "safeguarded min B = {:.2e}, nominal min h = {:.3} first exit at t = {:?}",
                    a.min_b, b.min_h, b.first_h_violation
                ),
            }
        }
        (s, o) => Outcome {
            pass: false,
            detail: format!("simulation error: {:?} / {:?}", s.err(), o.err()),
        },
    }
}

fn gamma_sweep() -> Outcome {
    let run = |g: f64| simulate(&arm_scenario(true, g, 0.5 * g * DELTA_HEX, 1e-3, 10.0));
    match (run(0.1), run(1.0)) {
        (Ok(lo), Ok(hi)) => {
            let (ul, uh) = (lo.max_input_norm(), hi.max_input_norm());
            let (vl, vh) = (lo.max_velocity_norm(), hi.max_velocity_norm());
            Outcome {
                pass: ul < uh && vl < vh,
                detail: format!("max|u| {ul:.3} < {uh:.3}, max|v| {vl:.4} < {vh:.4}"),
            }
        }
        (a, b) => Outcome {
            pass: false,
            detail: format!("simulation error: {:?} / {:?}", a.err(), b.err()),
        },
    }
}

fn boundary_conditions() -> Outcome {
    let spec = hexagon();
    let cert = compute_cert(&spec, &WitnessOverrides::uniform(vec![0.0, 0.0])).unwrap();

    let arm = TwoLinkArm::new(ArmParams::default()).unwrap();
    let cbf = hex_cbf(10.0, 0.1);
    let xs = cbf.sample_boundary(1000, 42).unwrap();
    let free = verify_safety_condition(&cbf, &arm, &InputSet::Unbounded, &xs).unwrap();

    let heavy = TwoLinkArm::new(ArmParams {
        gravity: true,
        ..ArmParams::default()
    })
    .unwrap();
    let probe = estimate_constants(&heavy, &spec, 101, 1.0).unwrap();
    let d = probe.k_g * probe.k1 + 10.0;
    let (_, choice) = certify_input_bound(&heavy, &spec, &cert, d, 101).unwrap();
    let tuned =
        ExtendedCbf::build(spec.clone(), cert.clone(), choice.gamma, choice.epsilon).unwrap();
    let ys = tuned.sample_boundary(1000, 42).unwrap();
    let ball = verify_safety_condition(&tuned, &heavy, &InputSet::ball(d), &ys).unwrap();

    Outcome {
        pass: xs.len() == 1000 && ys.len() == 1000 && free.all_feasible() && ball.all_feasible(),
        detail: format!(
            "U = R^2: {}/{} feasible; ball d = {d:.3}, gamma = {:.4}: {}/{} feasible, worst margin {:.3e}",
            free.samples.iter().filter(|s| s.feasible).count(),
            xs.len(),
            choice.gamma,
            ball.samples.iter().filter(|s| s.feasible).count(),
            ys.len(),
            ball.worst_margin()
        ),
    }
}

fn free_swing(
    arm: &TwoLinkArm,
    x0: &[f64],
    dt: f64,
    steps: usize,
    mut each: impl FnMut(&[f64]),
) -> Vec<f64> {
    let mut zero = |_: f64, _: &[f64]| Ok(ControlSample::open_loop(vec![0.0; 2]));
    let mut x = x0.to_vec();
    for k in 0..steps {
        x = rk4_step(arm, &mut zero, k as f64 * dt, &x, dt, Hold::ZeroOrder)
            .unwrap()
            .0;
        each(&x);
    }
    x
}

fn integrator_order() -> Outcome {
    let arm = TwoLinkArm::new(ArmParams::default()).unwrap();
    let x0 = [0.3, -0.5, 1.0, -1.5];
    let h = 0.02;
    let steps = |dt: f64| (2.0 / dt).round() as usize;
    let base = free_swing(&arm, &x0, h / 8.0, steps(h / 8.0), |_| {});
    let err = |x: Vec<f64>| {
        x.iter()
            .zip(&base)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let ratio = err(free_swing(&arm, &x0, h, steps(h), |_| {}))
        / err(free_swing(&arm, &x0, h / 2.0, steps(h / 2.0), |_| {}));

    let e0 = arm.kinetic_energy([x0[0], x0[1]], [x0[2], x0[3]]);
    let mut drift: f64 = 0.0;
    free_swing(&arm, &x0, 1e-3, 10_000, |x| {
        drift = drift.max((arm.kinetic_energy([x[0], x[1]], [x[2], x[3]]) - e0).abs());
    });
    Outcome {
        pass: (ratio - 16.0).abs() <= 2.0 && drift < ENERGY_TOL,
        detail: format!("ratio {ratio:.3}, energy drift {drift:.2e}"),
    }
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let results = [
        check(1, "delta", s(1), delta_reproduction),
        check(2, "no-positions-lost", s(10), no_positions_lost),
        check(3, "velocity-scaling", s(10), velocity_scaling),
        check(4, "qp-oracle", s(60), qp_oracle),
        check(5, "closed-loop-invariance", s(60), closed_loop_invariance),
        check(6, "gamma-sweep", s(120), gamma_sweep),
        check(7, "boundary-condition", s(60), boundary_conditions),
        check(8, "integrator", s(60), integrator_order),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

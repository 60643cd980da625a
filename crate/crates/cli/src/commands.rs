use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use linbarrier::cbf::{verify_safety_condition, ExtendedCbf};
use linbarrier::plant::certify_input_bound;
use linbarrier::polytope::{compute_cert, is_bounded, CbfParams, SpecDocument};
use linbarrier::qp::InputSet;
use linbarrier::sim::{
    audit_invariance, simulate, ControllerConfig, Scenario, SpecSource, TrajectoryLog,
};
use linbarrier::{Error, PlantConfig, Result};

use crate::plot::{term_polygon, Chart, Series};
use crate::{
    Cli, Command, ConstructArgs, Failure, SimulateArgs, SweepArgs, SweepParam, VerifyArgs,
};

const DEFAULT_SEED: u64 = 42;

pub fn run(cli: &Cli) -> Result<(), Failure> {
    fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Construct(a) => construct(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::Simulate(a) => simulate_cmd(cli, a),
        Command::Sweep(a) => sweep(cli, a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario> {
    let mut s = Scenario::from_json(&read(path)?, path.parent())?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn construct(cli: &Cli, a: &ConstructArgs) -> Result<(), Failure> {
    let doc = SpecDocument::parse(&read(&a.spec)?)?;
    let spec = doc.spec()?;
    let cert = compute_cert(&spec, &doc.overrides())?;
    println!("delta = {:.16}", cert.delta);
    for (l, t) in spec.terms().iter().enumerate() {
        let bounded = is_bounded(&spec.rows(t), spec.n())?;
        println!(
            "term {}: {}",
            l + 1,
            if bounded { "bounded" } else { "unbounded" }
        );
        if !bounded {
            return Err(Error::UnboundedPositions { term: l + 1 }.into());
        }
    }

    let (gamma, epsilon) = if a.auto {
        let d = a.d.expect("clap enforces --d with --auto");
        let plant = match &a.scenario {
            Some(p) => load_scenario(p, None)?.plant,
            None => PlantConfig::TwoLinkArm {
                m1: 1.0,
                m2: 1.0,
                l1: 1.0,
                l2: 1.0,
                gravity: false,
            },
        }
        .build()?;
        let (k, choice) = certify_input_bound(plant.as_dyn(), &spec, &cert, d, a.resolution)?;
        println!(
            "k1 = {:.6e}, kG = {:.6e}, k2 = {:.6e} on |x2| <= {:.6e}",
            k.k1, k.k_g, k.k2, k.velocity_radius
        );
        (choice.gamma, choice.epsilon)
    } else {
        match (a.gamma, a.epsilon, &doc.cbf) {
            (Some(g), Some(e), _) => (g, e),
            (Some(g), None, _) => (g, 0.5 * g * cert.delta),
            (None, Some(_), _) => return Err(Failure::Usage("--epsilon needs --gamma".into())),
            (None, None, Some(p)) => (p.gamma, p.epsilon),
            (None, None, None) => {
                return Err(Failure::Usage(
                    "give --gamma/--epsilon, --auto --d, or a cbf block in the spec".into(),
                ))
            }
        }
    };
    println!("gamma = {gamma:.16e}, epsilon = {epsilon:.16e}");
    let cbf = ExtendedCbf::build(spec.clone(), cert, gamma, epsilon)?;
    let v = cbf.velocity_bound()?;
    println!(
        "velocity bound: |x2_j| <= {:.16e}, ||x2|| <= {:.16e} (c = {:.16e})",
        v.per_component_bound, v.norm_bound, v.c
    );
    let out = SpecDocument::from_spec(
        &spec,
        Some(CbfParams {
            gamma,
            epsilon,
            witness: doc.cbf.and_then(|c| c.witness),
        }),
    );
    write(cli.out.join("cbf.json"), &out.to_json())?;
    Ok(())
}

fn input_set(s: &Scenario) -> InputSet {
    match &s.controller {
        ControllerConfig::Safeguarded { input_set, .. } => input_set.clone(),
        ControllerConfig::Nominal { .. } => InputSet::Unbounded,
    }
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<(), Failure> {
    let doc = SpecDocument::parse(&read(&a.cbf)?)?;
    if doc.cbf.is_none() {
        return Err(Error::Validation(format!("{} has no cbf block", a.cbf.display())).into());
    }
    let mut scenario = load_scenario(&a.scenario, None)?;
    scenario.spec = SpecSource::Inline(doc);
    scenario.cbf = None;
    let cbf = scenario.build_cbf()?;
    let plant = scenario.plant.build()?;
    let samples = cbf.sample_boundary(a.samples, cli.seed.unwrap_or(DEFAULT_SEED))?;
    if samples.is_empty() {
        eprintln!("warning: no boundary samples; the check is vacuous");
    }
    let report = verify_safety_condition(&cbf, plant.as_dyn(), &input_set(&scenario), &samples)?;
    write(cli.out.join("condition.csv"), &report.to_csv())?;
    let feasible = report.samples.iter().filter(|s| s.feasible).count();
    println!(
        "{feasible}/{} samples feasible, worst margin {:.6e}",
        report.samples.len(),
        report.worst_margin()
    );
    if !report.all_feasible() {
        return Err(Error::ConditionFailed {
            worst_margin: report.worst_margin(),
        }
        .into());
    }
    Ok(())
}

fn simulate_cmd(cli: &Cli, a: &SimulateArgs) -> Result<(), Failure> {
    let scenario = load_scenario(&a.scenario, cli.seed)?;
    let cbf = scenario.build_cbf()?;
    let log = simulate(&scenario)?;
    write(cli.out.join("trajectory.csv"), &log.to_csv())?;
    let audit = audit_invariance(&log, &cbf);
    println!("min B = {:.6e}, min h = {:.6e}", audit.min_b, audit.min_h);
    match audit.first_b_violation {
        Some(t) => println!("B first below tolerance at t = {t}"),
        None => println!("B stayed within tolerance"),
    }
    if let Some(t) = audit.first_h_violation {
        println!("position constraint first violated at t = {t}");
    }
    match audit.velocity_bound {
        Some(v) => println!(
            "max ||x2|| = {:.6e} (certified {:.6e})",
            audit.max_velocity, v
        ),
        None => println!("max ||x2|| = {:.6e}", audit.max_velocity),
    }
    if cli.plot {
        plot_run(cli, &log, &cbf)?;
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn plot_run(cli: &Cli, log: &TrajectoryLog, cbf: &ExtendedCbf) -> Result<()> {
    let n = log.n;
    let theta = Chart {
        title: "joint angles".into(),
        x_label: "t [s]".into(),
        y_label: "theta [rad]".into(),
        series: (0..n)
            .map(|j| {
                Series::new(
                    format!("theta{}", j + 1),
                    log.rows.iter().map(|r| (r.t, r.x[j])).collect(),
                )
            })
            .collect(),
        ..Chart::default()
    };
    write(cli.out.join("theta.svg"), &theta.render())?;
    if n == 2 {
        let spec = cbf.spec();
        let phase = Chart {
            title: "position portrait".into(),
            x_label: "theta1 [rad]".into(),
            y_label: "theta2 [rad]".into(),
            series: vec![Series::new(
                "x1(t)",
                log.rows.iter().map(|r| (r.x[0], r.x[1])).collect(),
            )],
            outlines: spec.terms().iter().map(|t| term_polygon(spec, t)).collect(),
            equal_aspect: true,
        };
        write(cli.out.join("phase.svg"), &phase.render())?;
    }
    let mags = [
        ("input_norm.svg", "input magnitude", "||u||", false),
        ("velocity_norm.svg", "velocity magnitude", "||x2||", true),
    ];
    for (file, title, label, velocity) in mags {
        let c = Chart {
            title: title.into(),
            x_label: "t [s]".into(),
            y_label: label.into(),
            series: vec![Series::new(
                label,
                log.rows
                    .iter()
                    .map(|r| {
                        (
                            r.t,
                            if velocity {
                                norm(&r.x[n..])
                            } else {
                                norm(&r.u)
                            },
                        )
                    })
                    .collect(),
            )],
            ..Chart::default()
        };
        write(cli.out.join(file), &c.render())?;
    }
    Ok(())
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<(), Failure> {
    if a.values.is_empty() {
        return Err(Failure::Usage("--values needs at least one value".into()));
    }
    if let Some(v) = a.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Validation(format!("sweep values must be positive, got {v}")).into());
    }
    let SweepParam::Gamma = a.param;
    let base = load_scenario(&a.scenario, cli.seed)?;
    let delta = base.build_cbf()?.cert().delta;
    let runs: Vec<Result<TrajectoryLog>> = a
        .values
        .par_iter()
        .map(|&g| simulate(&base.with_gamma(g, delta)))
        .collect();
    let logs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("gamma,epsilon,max_input_norm,max_velocity_norm,min_B,min_h\n");
    println!(
        "{:>12} {:>12} {:>14} {:>14}",
        "gamma", "epsilon", "max ||u||", "max ||x2||"
    );
    for (g, log) in a.values.iter().zip(&logs) {
        let e = 0.5 * g * delta;
        csv.push_str(&format!(
            "{g:.16e},{e:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            log.max_input_norm(),
            log.max_velocity_norm(),
            log.min_b(),
            log.min_h()
        ));
        println!(
            "{g:>12.6} {e:>12.6} {:>14.6} {:>14.6}",
            log.max_input_norm(),
            log.max_velocity_norm()
        );
    }
    write(cli.out.join("sweep.csv"), &csv)?;
    if cli.plot {
        let n = base.plant.build()?.as_dyn().n();
        for (file, title, label, velocity) in [
            ("sweep_input.svg", "input magnitude", "||u||", false),
            ("sweep_velocity.svg", "velocity magnitude", "||x2||", true),
        ] {
            let c = Chart {
                title: title.into(),
                x_label: "t [s]".into(),
                y_label: label.into(),
                series: a
                    .values
                    .iter()
                    .zip(&logs)
                    .map(|(g, log)| {
                        Series::new(
                            format!("gamma = {g}"),
                            log.rows
                                .iter()
                                .map(|r| {
                                    (
                                        r.t,
                                        if velocity {
                                            norm(&r.x[n..])
                                        } else {
                                            norm(&r.u)
                                        },
                                    )
                                })
                                .collect(),
                        )
                    })
                    .collect(),
                ..Chart::default()
            };
            write(cli.out.join(file), &c.render())?;
        }
    }
    Ok(())
}

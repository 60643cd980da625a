//! Fixed-step RK4 closed-loop simulation, trajectory logs and invariance
//! audits.

mod scenario;

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DVector;

pub use scenario::{ControllerConfig, Hold, NominalConfig, Scenario, SpecSource, VerifyConfig};

use crate::cbf::{verify_safety_condition, ExtendedCbf};
use crate::error::{check_dim, Error, Result};
use crate::plant::{NominalTracking, Plant, SecondOrderPlant};
use crate::polytope::eval_h;
use crate::qp::Safeguard;

/// Allowed `-B` and `-h` before a logged state counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSample {
    pub u: Vec<f64>,
    pub alpha: f64,
    pub m: f64,
    pub status: &'static str,
    pub solve_us: f64,
}

impl ControlSample {
    pub fn open_loop(u: Vec<f64>) -> Self {
        ControlSample {
            u,
            alpha: f64::NAN,
            m: f64::NAN,
            status: "nominal",
            solve_us: 0.0,
        }
    }
}

pub trait Controller {
    fn control(&mut self, t: f64, x: &[f64]) -> Result<ControlSample>;
}

impl<F> Controller for F
where
    F: FnMut(f64, &[f64]) -> Result<ControlSample>,
{
    fn control(&mut self, t: f64, x: &[f64]) -> Result<ControlSample> {
        self(t, x)
    }
}

/// The nominal command of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Nominal {
    Tracking(NominalTracking),
    Constant(Vec<f64>),
}

impl Nominal {
    pub fn new(cfg: &NominalConfig, plant: &Plant) -> Result<Self> {
        let m = plant.as_dyn().m();
        match cfg {
            NominalConfig::Tracking { reference } => {
                let arm = plant.arm().ok_or_else(|| {
                    Error::Validation("tracking nominal needs the two-link arm".into())
                })?;
                Ok(Nominal::Tracking(NominalTracking::new(
                    arm.clone(),
                    reference.clone(),
                )?))
            }
            NominalConfig::Zero => Ok(Nominal::Constant(vec![0.0; m])),
            NominalConfig::Constant { u } => {
                check_dim(m, u.len())?;
                Ok(Nominal::Constant(u.clone()))
            }
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match self {
            Nominal::Tracking(c) => {
                let n = x.len() / 2;
                c.control(t, &x[..n], &x[n..]).as_slice().to_vec()
            }
            Nominal::Constant(u) => u.clone(),
        }
    }
}

impl Controller for Nominal {
    fn control(&mut self, t: f64, x: &[f64]) -> Result<ControlSample> {
        Ok(ControlSample::open_loop(self.eval(t, x)))
    }
}

/// Nominal command passed through the safeguarding QP, warm-started from
/// the previous solution.
pub struct SafeguardedController<'a> {
    pub cbf: &'a ExtendedCbf,
    pub plant: &'a dyn SecondOrderPlant,
    pub filter: Safeguard,
    pub nominal: Nominal,
    pub timing: bool,
    warm: Option<Vec<f64>>,
}

impl<'a> SafeguardedController<'a> {
    pub fn new(
        cbf: &'a ExtendedCbf,
        plant: &'a dyn SecondOrderPlant,
        filter: Safeguard,
        nominal: Nominal,
    ) -> Self {
        SafeguardedController {
            cbf,
            plant,
            filter,
            nominal,
            timing: false,
            warm: None,
        }
    }
}

impl Controller for SafeguardedController<'_> {
    fn control(&mut self, t: f64, x: &[f64]) -> Result<ControlSample> {
        let un = self.nominal.eval(t, x);
        let start = self.timing.then(Instant::now);
        let res = self
            .filter
            .solve(self.cbf, self.plant, x, Some(&un), self.warm.as_deref())
            .map_err(|e| match e {
                Error::Infeasible => Error::QpInfeasibleAt { t, x: x.to_vec() },
                other => other,
            })?;
        let solve_us = start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e6);
        let mut z = res.u_star.clone();
        z.push(res.alpha_star);
        z.push(res.m_star);
        self.warm = Some(z);
        Ok(ControlSample {
            u: res.u_star,
            alpha: res.alpha_star,
            m: res.m_star,
            status: "optimal",
            solve_us,
        })
    }
}

fn derivative(plant: &dyn SecondOrderPlant, x: &[f64], u: &[f64]) -> DVector<f64> {
    let n = plant.n();
    let (x1, x2) = x.split_at(n);
    let acc = plant.acceleration(x1, x2, u);
    DVector::from_iterator(2 * n, x2.iter().copied().chain(acc.iter().copied()))
}

/// One classical RK4 step of `x1' = x2, x2' = f2 + G2 u`. Returns the next
/// state and the control computed at `(t, x)`.
pub fn rk4_step(
    plant: &dyn SecondOrderPlant,
    controller: &mut dyn Controller,
    t: f64,
    x: &[f64],
    dt: f64,
    hold: Hold,
) -> Result<(Vec<f64>, ControlSample)> {
    check_dim(2 * plant.n(), x.len())?;
    let first = controller.control(t, x)?;
    let xv = DVector::from_column_slice(x);
    let mut stage_u = |s: f64, y: &DVector<f64>| -> Result<Vec<f64>> {
        match hold {
            Hold::ZeroOrder => Ok(first.u.clone()),
            Hold::PerStage => Ok(controller.control(s, y.as_slice())?.u),
        }
    };
    let k1 = derivative(plant, x, &first.u);
    let y2 = &xv + 0.5 * dt * &k1;
    let k2 = derivative(plant, y2.as_slice(), &stage_u(t + 0.5 * dt, &y2)?);
    let y3 = &xv + 0.5 * dt * &k2;
    let k3 = derivative(plant, y3.as_slice(), &stage_u(t + 0.5 * dt, &y3)?);
    let y4 = &xv + dt * &k3;
    let k4 = derivative(plant, y4.as_slice(), &stage_u(t + dt, &y4)?);
    let next = xv + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Ok((next.as_slice().to_vec(), first))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub b: f64,
    pub h: f64,
    pub alpha: f64,
    pub m: f64,
    pub status: String,
    pub solve_us: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn header(n: usize, m: usize) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|j| format!("x1_{j}")));
        cols.extend((1..=n).map(|j| format!("x2_{j}")));
        cols.extend((1..=m).map(|j| format!("u_{j}")));
        cols.extend(["B", "h", "alpha", "M", "status", "solve_us"].map(String::from));
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header(self.n, self.m);
        out.push('\n');
        for r in &self.rows {
            write!(out, "{:.16e}", r.t).unwrap();
            for v in r.x.iter().chain(&r.u).chain([&r.b, &r.h, &r.alpha, &r.m]) {
                write!(out, ",{v:.16e}").unwrap();
            }
            writeln!(out, ",{},{:.16e}", r.status, r.solve_us).unwrap();
        }
        out
    }

    fn norm_max(&self, f: impl Fn(&LogRow) -> &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| f(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn max_input_norm(&self) -> f64 {
        self.norm_max(|r| &r.u)
    }

    pub fn max_velocity_norm(&self) -> f64 {
        let n = self.n;
        self.norm_max(|r| &r.x[n..])
    }

    pub fn min_b(&self) -> f64 {
        self.rows.iter().map(|r| r.b).fold(f64::INFINITY, f64::min)
    }

    pub fn min_h(&self) -> f64 {
        self.rows.iter().map(|r| r.h).fold(f64::INFINITY, f64::min)
    }
}

/// Runs `steps` fixed steps from `x0`, logging every visited state.
pub fn run(
    plant: &dyn SecondOrderPlant,
    cbf: &ExtendedCbf,
    controller: &mut dyn Controller,
    x0: &[f64],
    dt: f64,
    steps: usize,
    hold: Hold,
) -> Result<TrajectoryLog> {
    let n = plant.n();
    check_dim(2 * n, x0.len())?;
    let mut log = TrajectoryLog {
        n,
        m: plant.m(),
        rows: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = k as f64 * dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        let (next, c) = if k < steps {
            let (nx, c) = rk4_step(plant, controller, t, &x, dt, hold)?;
            (Some(nx), c)
        } else {
            (None, controller.control(t, &x)?)
        };
        log.rows.push(LogRow {
            t,
            b: cbf.value(&x),
            h: eval_h(cbf.spec(), &x[..n]),
            x: std::mem::take(&mut x),
            u: c.u,
            alpha: c.alpha,
            m: c.m,
            status: c.status.to_string(),
            solve_us: c.solve_us,
        });
        if let Some(nx) = next {
            x = nx;
        }
    }
    Ok(log)
}

/// Builds everything a scenario names and simulates it. Safeguarded runs
/// are preceded by a sampled boundary check unless the scenario skips it.
pub fn simulate(scenario: &Scenario) -> Result<TrajectoryLog> {
    let plant = scenario.plant.build()?;
    let p = plant.as_dyn();
    let cbf = scenario.build_cbf()?;
    check_dim(cbf.n(), p.n())?;
    scenario.validate(p.n())?;
    let x0 = scenario
        .initial_state
        .clone()
        .unwrap_or_else(|| vec![0.0; 2 * p.n()]);
    let nominal = Nominal::new(scenario.controller.nominal(), &plant)?;
    let steps = scenario.steps();
    match &scenario.controller {
        ControllerConfig::Nominal { .. } => {
            let mut c = nominal;
            run(p, &cbf, &mut c, &x0, scenario.dt, steps, scenario.hold)
        }
        ControllerConfig::Safeguarded {
            weights,
            input_set,
            neighborhood,
            ..
        } => {
            if !scenario.verify.skip {
                let samples = cbf.sample_boundary(scenario.verify.samples, scenario.seed)?;
                let report = verify_safety_condition(&cbf, p, input_set, &samples)?;
                if !report.all_feasible() {
                    return Err(Error::ConditionFailed {
                        worst_margin: report.worst_margin(),
                    });
                }
            }
            let filter = Safeguard::new(weights.clone(), input_set.clone(), p.m())?
                .with_neighborhood(*neighborhood);
            let mut c = SafeguardedController::new(&cbf, p, filter, nominal);
            c.timing = scenario.timing;
            run(p, &cbf, &mut c, &x0, scenario.dt, steps, scenario.hold)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceAudit {
    pub min_b: f64,
    pub min_h: f64,
    pub first_b_violation: Option<f64>,
    pub first_h_violation: Option<f64>,
    pub max_velocity: f64,
    pub velocity_bound: Option<f64>,
}

impl InvarianceAudit {
    pub fn invariant(&self) -> bool {
        self.first_b_violation.is_none()
    }
}

/// Recomputes `B` and `h` at every logged state.
pub fn audit_invariance(log: &TrajectoryLog, cbf: &ExtendedCbf) -> InvarianceAudit {
    let n = cbf.n();
    let mut a = InvarianceAudit {
        min_b: f64::INFINITY,
        min_h: f64::INFINITY,
        first_b_violation: None,
        first_h_violation: None,
        max_velocity: 0.0,
        velocity_bound: cbf.velocity_bound().ok().map(|v| v.norm_bound),
    };
    for r in &log.rows {
        let b = cbf.value(&r.x);
        let h = eval_h(cbf.spec(), &r.x[..n]);
        a.min_b = a.min_b.min(b);
        a.min_h = a.min_h.min(h);
        if b < -VIOLATION_TOL && a.first_b_violation.is_none() {
            a.first_b_violation = Some(r.t);
        }
        if h < -VIOLATION_TOL && a.first_h_violation.is_none() {
            a.first_h_violation = Some(r.t);
        }
        let v = r.x[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
        a.max_velocity = a.max_velocity.max(v);
    }
    a
}

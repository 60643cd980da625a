use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{ExtendedCbf, ACTIVATION_TOL};
use crate::error::{check_dim, Result};
use crate::plant::SecondOrderPlant;
use crate::polytope::{max_min_point, IndexSet};
use crate::qp::InputSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSample {
    pub x: Vec<f64>,
    /// Active indices of `B` at `x` (0-based over `0..2r`).
    pub active_indices: IndexSet,
    /// Position indices `i` whose velocity row `i + r` is active and zero.
    pub condition_set: IndexSet,
    pub witness: Option<Vec<f64>>,
    /// `min_{i in condition_set} a_i . (gamma x2 + f2 + G2 u)`; `+inf` when
    /// `condition_set` is empty.
    pub margin: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionReport {
    pub samples: Vec<ConditionSample>,
}

impl ConditionReport {
    pub fn all_feasible(&self) -> bool {
        self.samples.iter().all(|s| s.feasible)
    }

    /// Smallest finite margin, or `+inf` if every sample is vacuous.
    pub fn worst_margin(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut out = String::from("sample_id");
        for j in 0..n {
            write!(out, ",x_{}", j + 1).unwrap();
        }
        out.push_str(",active_indices,margin,feasible\n");
        for (k, s) in self.samples.iter().enumerate() {
            write!(out, "{k}").unwrap();
            for v in &s.x {
                write!(out, ",{v:.16e}").unwrap();
            }
            let active: Vec<String> = s
                .active_indices
                .iter()
                .map(|i| (i + 1).to_string())
                .collect();
            writeln!(
                out,
                ",{},{:.16e},{}",
                active.join(";"),
                s.margin,
                s.feasible
            )
            .unwrap();
        }
        out
    }
}

/// Checks the boundary condition at each sample with an explicit witness
/// input: cancel the drift and `gamma x2`, then push along
/// `G2^+ y_x` as far as `input_set` allows.
pub fn verify_safety_condition(
    cbf: &ExtendedCbf,
    plant: &dyn SecondOrderPlant,
    input_set: &InputSet,
    samples: &[Vec<f64>],
) -> Result<ConditionReport> {
    check_dim(cbf.n(), plant.n())?;
    input_set.validate(plant.m())?;
    let samples = samples
        .par_iter()
        .map(|x| check_sample(cbf, plant, input_set, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport { samples })
}

fn check_sample(
    cbf: &ExtendedCbf,
    plant: &dyn SecondOrderPlant,
    input_set: &InputSet,
    x: &[f64],
) -> Result<ConditionSample> {
    let n = cbf.n();
    let r = cbf.r();
    let active = cbf.eval(x)?;
    let values = cbf.values(x);
    let condition_set: IndexSet = active
        .active_indices
        .iter()
        .filter(|&i| i >= r && values[i].abs() <= ACTIVATION_TOL)
        .map(|i| i - r)
        .collect();
    if condition_set.is_empty() {
        return Ok(ConditionSample {
            x: x.to_vec(),
            active_indices: active.active_indices,
            condition_set,
            witness: None,
            margin: f64::INFINITY,
            feasible: true,
        });
    }
    let (x1, x2) = x.split_at(n);
    let gamma = cbf.gamma();
    let y_set = match cbf.cert().witness(&condition_set) {
        Some(y) => y.to_vec(),
        None => max_min_point(cbf.spec(), &condition_set)?.0,
    };
    let y_x = DVector::from_iterator(n, (0..n).map(|j| -x2[j] - gamma * x1[j] + gamma * y_set[j]));
    let f2 = plant.f2(x1, x2);
    let g2 = plant.g2(x1);
    let g_pinv = plant.g2_right_inverse(x1)?;
    let x2v = DVector::from_column_slice(x2);
    let u0 = -&g_pinv * (&f2 + gamma * &x2v);
    let v = &g_pinv * &y_x;
    let beta = match input_set.line_interval(u0.as_slice(), v.as_slice()) {
        Some((_, hi)) if hi == f64::INFINITY => Some(1.0),
        Some((lo, hi)) if hi > 0.0 && hi >= lo => Some(hi),
        _ => None,
    };
    let Some(beta) = beta else {
        return Ok(ConditionSample {
            x: x.to_vec(),
            active_indices: active.active_indices,
            condition_set,
            witness: None,
            margin: f64::NEG_INFINITY,
            feasible: false,
        });
    };
    let u = u0 + beta * v;
    let margin = condition_margin(cbf, &condition_set, x, &f2, &g2, u.as_slice());
    Ok(ConditionSample {
        x: x.to_vec(),
        active_indices: active.active_indices,
        condition_set,
        witness: Some(u.as_slice().to_vec()),
        margin,
        feasible: margin > 0.0,
    })
}

/// `min_{i in set} a_i . (gamma x2 + f2 + G2 u)`.
pub(crate) fn condition_margin(
    cbf: &ExtendedCbf,
    set: &IndexSet,
    x: &[f64],
    f2: &DVector<f64>,
    g2: &nalgebra::DMatrix<f64>,
    u: &[f64],
) -> f64 {
    let n = cbf.n();
    let accel = f2 + g2 * DVector::from_column_slice(u);
    set.iter()
        .map(|i| {
            let a = cbf.spec().halfspace(i).a();
            (0..n)
                .map(|j| a[j] * (cbf.gamma() * x[n + j] + accel[j]))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

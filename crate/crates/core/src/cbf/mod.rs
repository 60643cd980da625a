//! The extended barrier `B(x) = max_l min_{i in bar I^l} B_i(x)` over states
//! `x = (x1, x2)` and its safe set `C^s = { B >= 0 }`.
//!
//! Rows `0..r` are the position constraints `B_i = h_i`; rows `r..2r` are
//! `B_{i+r} = a_i . x2 + gamma (a_i . x1 + b_i) - epsilon`.

mod condition;
mod sample;

use std::collections::BTreeMap;

pub use condition::{verify_safety_condition, ConditionReport, ConditionSample};

use crate::error::{check_dim, Error, Result};
use crate::polytope::{
    is_bounded, term_min, GeometryCert, HalfSpace, IndexSet, LpProblem, LpSolution, SafetySpec,
};

/// Tolerance for counting an index as active.
pub const ACTIVATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedCbf {
    spec: SafetySpec,
    cert: GeometryCert,
    gamma: f64,
    epsilon: f64,
    rows: Vec<HalfSpace>,
    extended_terms: Vec<IndexSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub value: f64,
    pub argmax_terms: Vec<usize>,
    /// Indices `i` in `0..2r` with `B_i = B^l = B` for a maximizing `l`.
    pub active_indices: IndexSet,
    pub per_term_min: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCert {
    pub gamma: f64,
    pub epsilon: f64,
    pub per_component_bound: f64,
    pub norm_bound: f64,
    /// `norm_bound / gamma`.
    pub c: f64,
}

impl ExtendedCbf {
    pub fn build(spec: SafetySpec, cert: GeometryCert, gamma: f64, epsilon: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Validation(
                "gamma and epsilon must be positive".into(),
            ));
        }
        let product = gamma * cert.delta;
        if product <= epsilon {
            return Err(Error::ParameterViolation { product, epsilon });
        }
        let n = spec.n();
        let r = spec.r();
        let mut rows = Vec::with_capacity(2 * r);
        for h in spec.halfspaces() {
            let mut a = h.a().to_vec();
            a.resize(2 * n, 0.0);
            rows.push(HalfSpace::new(a, h.b()));
        }
        for h in spec.halfspaces() {
            let mut a: Vec<f64> = h.a().iter().map(|v| gamma * v).collect();
            a.extend_from_slice(h.a());
            rows.push(HalfSpace::new(a, gamma * h.b() - epsilon));
        }
        let extended_terms = spec
            .terms()
            .iter()
            .map(|t| t.iter().chain(t.iter().map(|i| i + r)).collect())
            .collect();
        Ok(ExtendedCbf {
            spec,
            cert,
            gamma,
            epsilon,
            rows,
            extended_terms,
        })
    }

    pub fn spec(&self) -> &SafetySpec {
        &self.spec
    }

    pub fn cert(&self) -> &GeometryCert {
        &self.cert
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn r(&self) -> usize {
        self.spec.r()
    }

    /// The `2r` affine functions as rows over the state.
    pub fn rows(&self) -> &[HalfSpace] {
        &self.rows
    }

    pub fn extended_terms(&self) -> &[IndexSet] {
        &self.extended_terms
    }

    /// All `B_i(x)`.
    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.eval(x)).collect()
    }

    /// `B(x)` without bookkeeping.
    pub fn value(&self, x: &[f64]) -> f64 {
        let v = self.values(x);
        self.extended_terms
            .iter()
            .map(|t| t.iter().map(|i| v[i]).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self, x: &[f64]) -> Result<ActiveSet> {
        check_dim(2 * self.n(), x.len())?;
        let v = self.values(x);
        let mut per_term_min = BTreeMap::new();
        let mut value = f64::NEG_INFINITY;
        for (l, t) in self.extended_terms.iter().enumerate() {
            let m = t.iter().map(|i| v[i]).fold(f64::INFINITY, f64::min);
            per_term_min.insert(l, m);
            value = value.max(m);
        }
        let argmax_terms: Vec<usize> = per_term_min
            .iter()
            .filter(|(_, m)| **m >= value - ACTIVATION_TOL)
            .map(|(l, _)| *l)
            .collect();
        let active_indices = argmax_terms
            .iter()
            .flat_map(|&l| self.extended_terms[l].iter())
            .filter(|&i| (v[i] - value).abs() <= ACTIVATION_TOL)
            .collect();
        Ok(ActiveSet {
            value,
            argmax_terms,
            active_indices,
            per_term_min,
        })
    }

    /// Lifts a safe position to a safe state by pointing the velocity at
    /// the witness of the position's best term.
    pub fn lift_position(&self, x1: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), x1.len())?;
        let mut best = (0, f64::NEG_INFINITY);
        for (l, t) in self.spec.terms().iter().enumerate() {
            let m = term_min(&self.spec, t, x1);
            if m > best.1 {
                best = (l, m);
            }
        }
        if best.1 < 0.0 {
            return Err(Error::NotInC { value: best.1 });
        }
        let term = &self.spec.terms()[best.0];
        let y = self
            .cert
            .witness(term)
            .ok_or_else(|| Error::Internal(format!("term {term} has no witness")))?;
        let sigma = 0.5 * (1.0 + self.epsilon / (self.gamma * self.cert.delta));
        let mut x = x1.to_vec();
        x.extend(x1.iter().zip(y).map(|(p, q)| -self.gamma * sigma * (p - q)));
        let b = self.value(&x);
        if !(b >= 0.0) {
            return Err(Error::Internal(format!("lifted state has B = {b:e}")));
        }
        Ok(x)
    }

    /// Whether every extended term polytope is bounded. Must agree with
    /// boundedness of the positions.
    pub fn check_compactness(&self) -> Result<bool> {
        let mut all = true;
        for t in &self.extended_terms {
            let rows: Vec<HalfSpace> = t.iter().map(|i| self.rows[i].clone()).collect();
            all &= is_bounded(&rows, 2 * self.n())?;
        }
        if all != self.cert.proj_bounded {
            return Err(Error::Internal(format!(
                "state boundedness {all} disagrees with position boundedness {}",
                self.cert.proj_bounded
            )));
        }
        Ok(all)
    }

    /// `max |x2_j|` over `C^s` by one LP per term, component and sign.
    pub fn velocity_bound(&self) -> Result<VelocityCert> {
        let n = self.n();
        let mut per = 0.0_f64;
        for (l, t) in self.extended_terms.iter().enumerate() {
            for j in 0..n {
                for s in [1.0, -1.0] {
                    let mut c = vec![0.0; 2 * n];
                    c[n + j] = s;
                    let mut p = LpProblem::maximize(c);
                    for i in t.iter() {
                        p.push_halfspace(&self.rows[i]);
                    }
                    match p.solve()? {
                        LpSolution::Optimal { objective, .. } => per = per.max(objective),
                        LpSolution::Unbounded { .. } => {
                            return Err(Error::UnboundedPositions { term: l + 1 })
                        }
                        LpSolution::Infeasible { .. } => return Err(Error::EmptySet),
                    }
                }
            }
        }
        let norm_bound = (n as f64).sqrt() * per;
        Ok(VelocityCert {
            gamma: self.gamma,
            epsilon: self.epsilon,
            per_component_bound: per,
            norm_bound,
            c: norm_bound / self.gamma,
        })
    }

    /// Same set with `(gamma, epsilon)` replaced.
    pub fn with_params(&self, gamma: f64, epsilon: f64) -> Result<Self> {
        ExtendedCbf::build(self.spec.clone(), self.cert.clone(), gamma, epsilon)
    }
}

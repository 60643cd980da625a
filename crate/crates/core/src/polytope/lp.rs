//! Dense two-phase revised simplex for small linear programs.
//!
//! Problems are stated over free variables with `A x >= b` rows:
//!
//! ```text
//!     maximize / minimize   c' x
//!     subject to            A x >= b
//! ```
//!
//! Internally every free variable is split as `x = x+ - x-`, each row receives
//! a surplus variable, and rows with a positive right-hand side receive an
//! artificial variable for phase one. The basis inverse is kept explicitly and
//! updated by elementary row operations, with periodic refactorization.
//! Dantzig pricing is used until the first degenerate pivot, after which the
//! solve switches to Bland's rule for the rest of the phase.

use nalgebra::DMatrix;

use super::HalfSpace;
use crate::error::{Error, Result};

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Column entries at or below this magnitude are never pivoted on.
const PIVOT_TOL: f64 = 1e-9;
const REDUCED_COST_TOL: f64 = 1e-11;
const DEGENERATE_STEP: f64 = 1e-12;
const REFACTOR_EVERY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A linear program over free variables with `A x >= b` constraint rows.
#[derive(Debug, Clone)]
pub struct LpProblem {
    sense: Sense,
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

/// Result of [`LpProblem::solve`].
///
/// `duals` are the multipliers `y >= 0` of the min-form dual: `A' y = c` when
/// minimizing and `A' y = -c` when maximizing.
#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal {
        x: Vec<f64>,
        objective: f64,
        duals: Vec<f64>,
    },
    /// `farkas` is `y >= 0` with `A' y = 0` and `b' y > 0`.
    Infeasible { farkas: Vec<f64> },
    /// `x` is feasible and `x + t ray` stays feasible for all `t >= 0` while
    /// improving the objective.
    Unbounded { x: Vec<f64>, ray: Vec<f64> },
}

impl LpSolution {
    pub fn status(&self) -> LpStatus {
        match self {
            LpSolution::Optimal { .. } => LpStatus::Optimal,
            LpSolution::Infeasible { .. } => LpStatus::Infeasible,
            LpSolution::Unbounded { .. } => LpStatus::Unbounded,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status() == LpStatus::Optimal
    }

    pub fn x(&self) -> Option<&[f64]> {
        match self {
            LpSolution::Optimal { x, .. } | LpSolution::Unbounded { x, .. } => Some(x),
            LpSolution::Infeasible { .. } => None,
        }
    }

    pub fn objective(&self) -> Option<f64> {
        match self {
            LpSolution::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

impl LpProblem {
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::with_sense(Sense::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::with_sense(Sense::Minimize, objective)
    }

    /// Zero objective; solving answers a pure feasibility question.
    pub fn feasibility(num_vars: usize) -> Self {
        Self::with_sense(Sense::Minimize, vec![0.0; num_vars])
    }

    fn with_sense(sense: Sense, objective: Vec<f64>) -> Self {
        LpProblem {
            sense,
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_coeffs(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Adds `a . x >= b`.
    pub fn push_ge(&mut self, a: Vec<f64>, b: f64) {
        assert_eq!(
            a.len(),
            self.num_vars(),
            "row length must match variable count"
        );
        self.rows.push(a);
        self.rhs.push(b);
    }

    pub fn ge(mut self, a: Vec<f64>, b: f64) -> Self {
        self.push_ge(a, b);
        self
    }

    pub fn le(mut self, a: Vec<f64>, b: f64) -> Self {
        self.push_ge(a.into_iter().map(|v| -v).collect(), -b);
        self
    }

    pub fn eq(self, a: Vec<f64>, b: f64) -> Self {
        self.ge(a.clone(), b).le(a, b)
    }

    /// Adds `a . x + b >= 0`, zero-padding `a` if the problem has extra
    /// trailing variables.
    pub fn push_halfspace(&mut self, h: &HalfSpace) {
        let mut a = h.a().to_vec();
        a.resize(self.num_vars(), 0.0);
        self.push_ge(a, -h.b());
    }

    pub fn halfspace(mut self, h: &HalfSpace) -> Self {
        self.push_halfspace(h);
        self
    }

    /// Box bounds on a single variable, expressed as rows.
    pub fn bound(mut self, j: usize, lower: Option<f64>, upper: Option<f64>) -> Self {
        let k = self.num_vars();
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        if let Some(lo) = lower {
            self.push_ge(e.clone(), lo);
        }
        if let Some(hi) = upper {
            self.push_ge(e.into_iter().map(|v| -v).collect(), -hi);
        }
        self
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation `max(0, b_i - a_i . x)` over all rows.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (b - dot(a, x)).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Objective of the min-form dual for a multiplier vector `y`.
    pub fn dual_value(&self, y: &[f64]) -> f64 {
        let v = dot(&self.rhs, y);
        match self.sense {
            Sense::Minimize => v,
            Sense::Maximize => -v,
        }
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let k = self.num_vars();
        let m = self.num_rows();
        if self
            .objective
            .iter()
            .chain(self.rhs.iter())
            .any(|v| !v.is_finite())
            || self.rows.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::Validation("non-finite LP coefficient".into()));
        }

        // Row scaling sign so that the standard-form right-hand side is >= 0.
        let sign: Vec<f64> = self
            .rhs
            .iter()
            .map(|&b| if b > 0.0 { 1.0 } else { -1.0 })
            .collect();
        let needs_artificial: Vec<usize> = (0..m).filter(|&i| sign[i] > 0.0).collect();
        let n_struct = 2 * k + m;
        let ncols = n_struct + needs_artificial.len();

        let mut e = DMatrix::<f64>::zeros(m, ncols);
        for i in 0..m {
            for j in 0..k {
                let v = sign[i] * self.rows[i][j];
                e[(i, j)] = v;
                e[(i, k + j)] = -v;
            }
            e[(i, 2 * k + i)] = -sign[i];
        }
        let mut basis = Vec::with_capacity(m);
        let mut art = needs_artificial.iter().enumerate();
        for i in 0..m {
            if sign[i] > 0.0 {
                let (a, _) = art.next().expect("artificial for every positive row");
                e[(i, n_struct + a)] = 1.0;
                basis.push(n_struct + a);
            } else {
                basis.push(2 * k + i);
            }
        }
        let b: Vec<f64> = (0..m).map(|i| sign[i] * self.rhs[i]).collect();

        let mut tab = Tableau::new(e, b, basis, n_struct)?;

        // Phase one.
        let mut phase1_cost = vec![0.0; ncols];
        for c in phase1_cost.iter_mut().skip(n_struct) {
            *c = 1.0;
        }
        if !needs_artificial.is_empty() {
            tab.run(&phase1_cost)?;
            let infeas: f64 = tab
                .basis
                .iter()
                .zip(&tab.xb)
                .filter(|(&j, _)| j >= n_struct)
                .map(|(_, &v)| v)
                .sum();
            let scale = 1.0 + tab.b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if infeas > FEASIBILITY_TOL * scale {
                let pi = tab.duals(&phase1_cost);
                let farkas = (0..m).map(|i| (sign[i] * pi[i]).max(0.0)).collect();
                return Ok(LpSolution::Infeasible { farkas });
            }
            tab.drive_out_artificials()?;
        }

        // Phase two.
        let mut cost = vec![0.0; ncols];
        let flip = match self.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        for j in 0..k {
            cost[j] = flip * self.objective[j];
            cost[k + j] = -flip * self.objective[j];
        }
        tab.bland = false;
        let end = tab.run(&cost)?;

        let z = tab.primal();
        let x: Vec<f64> = (0..k).map(|j| z[j] - z[k + j]).collect();
        let residual = self.primal_residual(&x);
        let scale = 1.0
            + self.rhs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
            + x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if residual > FEASIBILITY_TOL * scale {
            return Err(Error::NumericalBreakdown(format!(
                "simplex point violates constraints by {residual:e}"
            )));
        }

        match end {
            PhaseEnd::Optimal => {
                let pi = tab.duals(&cost);
                let duals = (0..m).map(|i| (sign[i] * pi[i]).max(0.0)).collect();
                let objective = self.value(&x);
                Ok(LpSolution::Optimal {
                    x,
                    objective,
                    duals,
                })
            }
            PhaseEnd::Unbounded { entering, column } => {
                let mut dz = vec![0.0; ncols];
                dz[entering] = 1.0;
                for (slot, &j) in tab.basis.iter().enumerate() {
                    dz[j] -= column[slot];
                }
                let mut ray: Vec<f64> = (0..k).map(|j| dz[j] - dz[k + j]).collect();
                let norm = ray.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
                if norm <= 0.0 {
                    return Err(Error::NumericalBreakdown("degenerate unbounded ray".into()));
                }
                ray.iter_mut().for_each(|v| *v /= norm);
                Ok(LpSolution::Unbounded { x, ray })
            }
        }
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded { entering: usize, column: Vec<f64> },
}

struct Tableau {
    e: DMatrix<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    /// Columns at or beyond this index are artificial and never re-enter.
    first_artificial: usize,
    bland: bool,
    since_refactor: usize,
}

impl Tableau {
    fn new(
        e: DMatrix<f64>,
        b: Vec<f64>,
        basis: Vec<usize>,
        first_artificial: usize,
    ) -> Result<Self> {
        let m = e.nrows();
        let mut in_basis = vec![false; e.ncols()];
        for &j in &basis {
            in_basis[j] = true;
        }
        let mut tab = Tableau {
            e,
            xb: b.clone(),
            b,
            basis,
            in_basis,
            binv: DMatrix::identity(m, m),
            first_artificial,
            bland: false,
            since_refactor: 0,
        };
        tab.refactor()?;
        Ok(tab)
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (slot, &j) in self.basis.iter().enumerate() {
            bmat.set_column(slot, &self.e.column(j));
        }
        self.binv = bmat
            .try_inverse()
            .ok_or_else(|| Error::NumericalBreakdown("singular simplex basis".into()))?;
        for slot in 0..m {
            let v: f64 = (0..m).map(|i| self.binv[(slot, i)] * self.b[i]).sum();
            self.xb[slot] = if v.abs() < 1e-14 { 0.0 } else { v };
        }
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|i| {
                self.basis
                    .iter()
                    .enumerate()
                    .map(|(slot, &j)| cost[j] * self.binv[(slot, i)])
                    .sum()
            })
            .collect()
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.m();
        let col = self.e.column(j);
        (0..m)
            .map(|slot| (0..m).map(|i| self.binv[(slot, i)] * col[i]).sum())
            .collect()
    }

    fn primal(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.e.ncols()];
        for (slot, &j) in self.basis.iter().enumerate() {
            z[j] = self.xb[slot].max(0.0);
        }
        z
    }

    fn pivot(&mut self, leave_slot: usize, entering: usize, column: &[f64]) -> Result<()> {
        let m = self.m();
        let p = column[leave_slot];
        let theta = self.xb[leave_slot] / p;
        for slot in 0..m {
            if slot == leave_slot {
                continue;
            }
            self.xb[slot] -= theta * column[slot];
            if self.xb[slot].abs() < 1e-14 {
                self.xb[slot] = 0.0;
            }
        }
        self.xb[leave_slot] = theta;
        for i in 0..m {
            self.binv[(leave_slot, i)] /= p;
        }
        for slot in 0..m {
            let f = column[slot];
            if slot == leave_slot || f == 0.0 {
                continue;
            }
            for i in 0..m {
                let v = self.binv[(leave_slot, i)];
                self.binv[(slot, i)] -= f * v;
            }
        }
        let leaving = self.basis[leave_slot];
        self.in_basis[leaving] = false;
        self.in_basis[entering] = true;
        self.basis[leave_slot] = entering;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn run(&mut self, cost: &[f64]) -> Result<PhaseEnd> {
        let m = self.m();
        let ncols = self.e.ncols();
        let max_iter = 100 * (m + ncols) + 1000;
        for _ in 0..max_iter {
            let pi = self.duals(cost);
            let mut entering = None;
            let mut best = -REDUCED_COST_TOL;
            for j in 0..self.first_artificial {
                if self.in_basis[j] {
                    continue;
                }
                let col = self.e.column(j);
                let d = cost[j] - (0..m).map(|i| pi[i] * col[i]).sum::<f64>();
                if self.bland {
                    if d < -REDUCED_COST_TOL {
                        entering = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let column = self.column(q);
            let mut leave: Option<(usize, f64)> = None;
            for slot in 0..m {
                let w = column[slot];
                if w <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.xb[slot].max(0.0) / w;
                leave = match leave {
                    None => Some((slot, ratio)),
                    Some((s, r)) => {
                        let tie = (ratio - r).abs() <= 1e-12 * (1.0 + r.abs());
                        let better = if tie {
                            if self.bland {
                                self.basis[slot] < self.basis[s]
                            } else {
                                w > column[s]
                            }
                        } else {
                            ratio < r
                        };
                        if better {
                            Some((slot, ratio))
                        } else {
                            Some((s, r))
                        }
                    }
                };
            }
            let Some((slot, ratio)) = leave else {
                return Ok(PhaseEnd::Unbounded {
                    entering: q,
                    column,
                });
            };
            if ratio <= DEGENERATE_STEP {
                self.bland = true;
            }
            self.pivot(slot, q, &column)?;
        }
        Err(Error::NumericalBreakdown(
            "simplex iteration limit reached".into(),
        ))
    }

    /// Replaces zero-level artificial basics with structural columns where
    /// possible. Artificials that cannot be removed sit on redundant rows.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m();
        for slot in 0..m {
            if self.basis[slot] < self.first_artificial {
                continue;
            }
            let mut chosen = None;
            for j in 0..self.first_artificial {
                if self.in_basis[j] {
                    continue;
                }
                let col = self.e.column(j);
                let w: f64 = (0..m).map(|i| self.binv[(slot, i)] * col[i]).sum();
                if w.abs() > PIVOT_TOL {
                    chosen = Some(j);
                    break;
                }
            }
            if let Some(j) = chosen {
                let column = self.column(j);
                self.xb[slot] = 0.0;
                self.pivot(slot, j, &column)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

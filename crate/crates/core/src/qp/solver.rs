//! Primal active-set method for strictly convex QPs
//!
//! ```text
//!     minimize    1/2 z' P z + c' z
//!     subject to  G z <= h
//! ```
//!
//! A feasible start comes from the caller or from a phase-one LP. Each
//! iteration solves the equality-constrained subproblem on the working set in
//! range-space form through the Cholesky factor of `P`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};
use crate::polytope::{LpProblem, LpSolution};

/// Residual tolerance on the returned optimizer.
pub const KKT_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-13;
const MULTIPLIER_TOL: f64 = 1e-12;
const START_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
    pub dual: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.complementarity)
            .max(self.dual)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub z: Vec<f64>,
    /// Working set at termination, ascending.
    pub active: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub kkt: KktResiduals,
    pub iterations: usize,
    /// For infeasible problems: `w >= 0` with `G' w = 0` and `h' w < 0`.
    pub farkas: Option<Vec<f64>>,
}

impl QpProblem {
    pub fn new(p: DMatrix<f64>, c: DVector<f64>, g: DMatrix<f64>, h: DVector<f64>) -> Result<Self> {
        let k = p.nrows();
        check_dim(k, p.ncols())?;
        check_dim(k, c.len())?;
        check_dim(g.nrows(), h.len())?;
        if g.nrows() > 0 {
            check_dim(k, g.ncols())?;
        }
        Ok(QpProblem { p, c, g, h })
    }

    /// No inequality rows.
    pub fn unconstrained(p: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let k = p.nrows();
        QpProblem::new(p, c, DMatrix::zeros(0, k), DVector::zeros(0))
    }

    pub fn num_vars(&self) -> usize {
        self.p.nrows()
    }

    pub fn num_rows(&self) -> usize {
        self.g.nrows()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.p * z)) + self.c.dot(z)
    }

    pub fn residuals(&self, z: &DVector<f64>, lambda: &DVector<f64>) -> KktResiduals {
        let stat = &self.p * z + &self.c + self.g.transpose() * lambda;
        let slack = &self.g * z - &self.h;
        KktResiduals {
            stationarity: stat.amax(),
            primal: slack.iter().fold(0.0_f64, |a, &s| a.max(s)),
            complementarity: slack
                .iter()
                .zip(lambda.iter())
                .fold(0.0_f64, |a, (s, l)| a.max((s * l).abs())),
            dual: lambda.iter().fold(0.0_f64, |a, &l| a.max(-l)),
        }
    }

    fn max_violation(&self, z: &DVector<f64>) -> f64 {
        (&self.g * z - &self.h)
            .iter()
            .fold(0.0_f64, |a, &s| a.max(s))
    }
}

fn factor(p: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let asym = (p - p.transpose()).amax();
    if !(asym <= 1e-12 * p.amax().max(1.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    Cholesky::new(p.clone()).ok_or(Error::NotPositiveDefinite)
}

/// Phase one: a feasible point, or a Farkas vector for `G z <= h`.
fn phase_one(p: &QpProblem) -> Result<std::result::Result<DVector<f64>, Vec<f64>>> {
    let k = p.num_vars();
    let mut lp = LpProblem::feasibility(k);
    for j in 0..p.num_rows() {
        lp.push_ge(p.g.row(j).iter().map(|v| -v).collect(), -p.h[j]);
    }
    match lp.solve()? {
        LpSolution::Optimal { x, .. } | LpSolution::Unbounded { x, .. } => {
            Ok(Ok(DVector::from_vec(x)))
        }
        LpSolution::Infeasible { farkas } => Ok(Err(farkas)),
    }
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    solve_qp_from(p, None)
}

/// Solves from `start` when it is feasible, otherwise from a phase-one point.
pub fn solve_qp_from(p: &QpProblem, start: Option<&[f64]>) -> Result<QpSolution> {
    let k = p.num_vars();
    let chol = factor(&p.p)?;
    let z0 = match start {
        Some(s) => {
            check_dim(k, s.len())?;
            let z = DVector::from_column_slice(s);
            (p.max_violation(&z) <= START_TOL).then_some(z)
        }
        None => None,
    };
    let z0 = match z0 {
        Some(z) => z,
        None => {
            // The unconstrained minimizer is the cheapest candidate.
            let free = -chol.solve(&p.c);
            if p.max_violation(&free) <= START_TOL {
                free
            } else {
                match phase_one(p)? {
                    Ok(z) => z,
                    Err(farkas) => {
                        return Ok(QpSolution {
                            status: QpStatus::Infeasible,
                            z: vec![f64::NAN; k],
                            active: Vec::new(),
                            multipliers: vec![0.0; p.num_rows()],
                            kkt: KktResiduals::default(),
                            iterations: 0,
                            farkas: Some(farkas),
                        })
                    }
                }
            }
        }
    };
    active_set(p, &chol, z0)
}

fn active_set(p: &QpProblem, chol: &Cholesky<f64, Dyn>, mut z: DVector<f64>) -> Result<QpSolution> {
    let k = p.num_vars();
    let rows = p.num_rows();
    let mut work: Vec<usize> = Vec::new();
    // Set after an unblocked full step: the iterate then minimizes over the
    // working set up to roundoff.
    let mut settled = false;
    let cap = 50 * (rows + k) + 100;
    for iter in 0..cap {
        let grad = &p.p * &z + &p.c;
        let (step, lambda) = eqp(p, chol, &work, &grad)?;
        let scale = 1.0 + z.amax();
        if settled || work.len() == k || step.amax() <= STEP_TOL * scale {
            settled = false;
            // Stationary on the working set: drop the most negative
            // multiplier or stop.
            let mut worst: Option<(usize, f64)> = None;
            for (pos, &l) in lambda.iter().enumerate() {
                if l < -MULTIPLIER_TOL
                    && worst.is_none_or(|(wp, wl)| l < wl || (l == wl && work[pos] < work[wp]))
                {
                    worst = Some((pos, l));
                }
            }
            match worst {
                Some((pos, _)) => {
                    work.remove(pos);
                    continue;
                }
                None => {
                    let mut full = DVector::zeros(rows);
                    for (pos, &j) in work.iter().enumerate() {
                        full[j] = lambda[pos].max(0.0);
                    }
                    let kkt = p.residuals(&z, &full);
                    let mut active = work.clone();
                    active.sort_unstable();
                    return Ok(QpSolution {
                        status: QpStatus::Optimal,
                        z: z.as_slice().to_vec(),
                        active,
                        multipliers: full.as_slice().to_vec(),
                        kkt,
                        iterations: iter,
                        farkas: None,
                    });
                }
            }
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for j in 0..rows {
            if work.contains(&j) {
                continue;
            }
            let gj = p.g.row(j);
            let gp = gj.dot(&step.transpose());
            if gp <= 1e-14 * gj.amax() * step.amax() {
                continue;
            }
            let slack = (p.h[j] - gj.dot(&z.transpose())).max(0.0);
            let t = slack / gp;
            if t < alpha {
                alpha = t;
                blocking = Some(j);
            }
        }
        z += alpha * &step;
        match blocking {
            Some(j) => work.push(j),
            None => settled = true,
        }
    }
    Err(Error::NumericalBreakdown(format!(
        "active-set iteration cap {cap} reached"
    )))
}

/// Step and working-set multipliers of the equality-constrained subproblem.
fn eqp(
    p: &QpProblem,
    chol: &Cholesky<f64, Dyn>,
    work: &[usize],
    grad: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let pg = chol.solve(grad);
    if work.is_empty() {
        return Ok((-pg, DVector::zeros(0)));
    }
    let k = p.num_vars();
    let a = DMatrix::from_fn(work.len(), k, |r, c| p.g[(work[r], c)]);
    let pa = chol.solve(&a.transpose());
    let s = &a * &pa;
    let rhs = -(&a * &pg);
    let lambda = s
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|l| l.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::NumericalBreakdown("degenerate working set".into()))?;
    let step = -(pg + pa * &lambda);
    Ok((step, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(p: f64, c: f64, rows: &[(f64, f64)]) -> QpProblem {
        QpProblem::new(
            DMatrix::from_element(1, 1, p),
            DVector::from_element(1, c),
            DMatrix::from_iterator(rows.len(), 1, rows.iter().map(|r| r.0)),
            DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1)),
        )
        .unwrap()
    }

    #[test]
    fn clipped_scalar() {
        // (u-1)^2 = u^2 - 2u + 1 s.t. u <= 0
        let s = solve_qp(&scalar(2.0, -2.0, &[(1.0, 0.0)])).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!(s.z[0].abs() < 1e-15);
        assert_eq!(s.active, vec![0]);
        assert!((s.multipliers[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_zero() {
        let p = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.z, vec![0.0, 0.0]);
    }

    #[test]
    fn symmetric_projection() {
        // u1^2 + u2^2 s.t. u1 + u2 >= 2
        let p = QpProblem::new(
            2.0 * DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]),
            DVector::from_element(1, -2.0),
        )
        .unwrap();
        let s = solve_qp(&p).unwrap();
        assert!((s.z[0] - 1.0).abs() < 1e-12 && (s.z[1] - 1.0).abs() < 1e-12);
        assert!(s.kkt.max() <= KKT_TOL);
    }

    #[test]
    fn infeasible_certificate() {
        // u <= -1 and u >= 1
        let p = scalar(1.0, 0.0, &[(1.0, -1.0), (-1.0, -1.0)]);
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        let w = s.farkas.unwrap();
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!((w[0] - w[1]).abs() < 1e-12);
        assert!(-w[0] - w[1] < 0.0);
    }

    #[test]
    fn not_positive_definite() {
        let p = scalar(-1.0, 0.0, &[]);
        assert_eq!(solve_qp(&p), Err(Error::NotPositiveDefinite));
        let asym = QpProblem::unconstrained(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            DVector::zeros(2),
        )
        .unwrap();
        assert_eq!(solve_qp(&asym), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn warm_start_gives_same_answer() {
        let p = QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_column_slice(&[-1.0, -3.0]),
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            DVector::from_column_slice(&[1.0, 0.0, 0.0]),
        )
        .unwrap();
        let cold = solve_qp(&p).unwrap();
        let warm = solve_qp_from(&p, Some(&[0.2, 0.3])).unwrap();
        for (a, b) in cold.z.iter().zip(&warm.z) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::input::InputSet;
use super::solver::{solve_qp_from, KktResiduals, QpProblem, QpStatus};
use crate::cbf::ExtendedCbf;
use crate::error::{check_dim, Error, Result};
use crate::plant::SecondOrderPlant;

/// Default allowed `-B(x)` for states handed to the filter.
pub const DEFAULT_NEIGHBORHOOD: f64 = 0.1;

/// Input cost matrix `Q`: `"identity"` or an explicit square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostMatrix {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for CostMatrix {
    fn default() -> Self {
        CostMatrix::Named("identity".into())
    }
}

impl CostMatrix {
    pub fn matrix(&self, m: usize) -> Result<DMatrix<f64>> {
        match self {
            CostMatrix::Named(name) if name == "identity" => Ok(DMatrix::identity(m, m)),
            CostMatrix::Named(name) => {
                Err(Error::Validation(format!("unknown cost matrix {name:?}")))
            }
            CostMatrix::Matrix(rows) => {
                check_dim(m, rows.len())?;
                for r in rows {
                    check_dim(m, r.len())?;
                }
                Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpWeights {
    #[serde(rename = "Q", default)]
    pub q: CostMatrix,
    pub q_alpha: f64,
    #[serde(rename = "q_M")]
    pub q_m: f64,
    pub c_alpha: f64,
    #[serde(rename = "c_M")]
    pub c_m: f64,
}

impl Default for QpWeights {
    fn default() -> Self {
        QpWeights {
            q: CostMatrix::default(),
            q_alpha: 1e4,
            q_m: 1.0,
            c_alpha: 40.0,
            c_m: 1.0,
        }
    }
}

impl QpWeights {
    pub fn validate(&self, m: usize) -> Result<()> {
        for (name, v) in [
            ("q_alpha", self.q_alpha),
            ("q_M", self.q_m),
            ("c_alpha", self.c_alpha),
            ("c_M", self.c_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        let q = self.q.matrix(m)?;
        if q.clone().cholesky().is_none() || (&q - q.transpose()).amax() > 1e-12 * q.amax() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(())
    }
}

/// One filter row for the pair `(term, index)`, as
/// `constant + gu . u + b_i alpha + gap M >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRow {
    pub term: usize,
    pub index: usize,
    pub constant: f64,
    pub gu: Vec<f64>,
    pub b_i: f64,
    /// `B(x) - B^l(x)`.
    pub gap: f64,
}

impl FilterRow {
    pub fn eval(&self, u: &[f64], alpha: f64, m: f64) -> f64 {
        self.constant
            + self.gu.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
            + self.b_i * alpha
            + self.gap * m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowMargin {
    pub term: usize,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeguardResult {
    pub u_star: Vec<f64>,
    pub alpha_star: f64,
    pub m_star: f64,
    pub b_value: f64,
    pub margins: Vec<RowMargin>,
    pub iterations: usize,
    pub kkt: KktResiduals,
    pub active: Vec<usize>,
}

/// The filter rows at `x` for every `(l, i in bar I^l)`.
pub fn filter_rows(
    cbf: &ExtendedCbf,
    plant: &dyn SecondOrderPlant,
    x: &[f64],
) -> Result<Vec<FilterRow>> {
    let n = cbf.n();
    let r = cbf.r();
    check_dim(2 * n, x.len())?;
    check_dim(n, plant.n())?;
    let (x1, x2) = x.split_at(n);
    let f2 = plant.f2(x1, x2);
    let g2 = plant.g2(x1);
    let values = cbf.values(x);
    let term_mins: Vec<f64> = cbf
        .extended_terms()
        .iter()
        .map(|t| t.iter().map(|i| values[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let b = term_mins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gamma = cbf.gamma();
    let mut rows = Vec::new();
    for (l, t) in cbf.extended_terms().iter().enumerate() {
        for i in t.iter() {
            let a = cbf.spec().halfspace(i % r).a();
            let ax2: f64 = a.iter().zip(x2).map(|(p, q)| p * q).sum();
            let (constant, gu) = if i < r {
                (ax2, vec![0.0; plant.m()])
            } else {
                let af2: f64 = a.iter().zip(f2.iter()).map(|(p, q)| p * q).sum();
                let gu = (0..plant.m())
                    .map(|k| (0..n).map(|j| a[j] * g2[(j, k)]).sum())
                    .collect();
                (gamma * ax2 + af2, gu)
            };
            rows.push(FilterRow {
                term: l,
                index: i,
                constant,
                gu,
                b_i: values[i],
                gap: b - term_mins[l],
            });
        }
    }
    Ok(rows)
}

/// The safeguarding filter: weights, admissible inputs and the neighborhood
/// of `C^s` it accepts states from.
#[derive(Debug, Clone, PartialEq)]
pub struct Safeguard {
    pub weights: QpWeights,
    pub input_set: InputSet,
    pub neighborhood: f64,
    q: DMatrix<f64>,
}

impl Safeguard {
    pub fn new(weights: QpWeights, input_set: InputSet, m: usize) -> Result<Self> {
        weights.validate(m)?;
        input_set.validate(m)?;
        let q = weights.q.matrix(m)?;
        Ok(Safeguard {
            weights,
            input_set,
            neighborhood: DEFAULT_NEIGHBORHOOD,
            q,
        })
    }

    pub fn with_neighborhood(mut self, margin: f64) -> Self {
        self.neighborhood = margin;
        self
    }

    /// The QP over `z = (u, alpha, M)` at `x`.
    pub fn problem(
        &self,
        cbf: &ExtendedCbf,
        plant: &dyn SecondOrderPlant,
        x: &[f64],
        u_nom: Option<&[f64]>,
    ) -> Result<(QpProblem, Vec<FilterRow>)> {
        let m = plant.m();
        let rows = filter_rows(cbf, plant, x)?;
        let k = m + 2;
        let w = &self.weights;
        let mut p = DMatrix::zeros(k, k);
        p.view_mut((0, 0), (m, m)).copy_from(&(2.0 * &self.q));
        p[(m, m)] = 2.0 * w.q_alpha;
        p[(m + 1, m + 1)] = 2.0 * w.q_m;
        let mut c = DVector::zeros(k);
        if let Some(un) = u_nom {
            check_dim(m, un.len())?;
            let qu = -2.0 * &self.q * DVector::from_column_slice(un);
            c.rows_mut(0, m).copy_from(&qu);
        }
        let input_rows = self.input_set.rows(m);
        let total = rows.len() + 2 + input_rows.len();
        let mut g = DMatrix::zeros(total, k);
        let mut h = DVector::zeros(total);
        for (j, row) in rows.iter().enumerate() {
            for (col, v) in row.gu.iter().enumerate() {
                g[(j, col)] = -v;
            }
            g[(j, m)] = -row.b_i;
            g[(j, m + 1)] = -row.gap;
            h[j] = row.constant;
        }
        let base = rows.len();
        g[(base, m)] = -1.0;
        h[base] = -w.c_alpha;
        g[(base + 1, m + 1)] = -1.0;
        h[base + 1] = -w.c_m;
        for (j, (nrm, lim)) in input_rows.iter().enumerate() {
            for (col, v) in nrm.iter().enumerate() {
                g[(base + 2 + j, col)] = *v;
            }
            h[base + 2 + j] = *lim;
        }
        Ok((QpProblem::new(p, c, g, h)?, rows))
    }

    /// `(u*, alpha*, M*)` at `x`. `warm` is tried as the starting point.
    pub fn solve(
        &self,
        cbf: &ExtendedCbf,
        plant: &dyn SecondOrderPlant,
        x: &[f64],
        u_nom: Option<&[f64]>,
        warm: Option<&[f64]>,
    ) -> Result<SafeguardResult> {
        let b = cbf.value(x);
        if !(b >= -self.neighborhood) {
            return Err(Error::OutsideNeighborhood {
                value: b,
                margin: self.neighborhood,
            });
        }
        let m = plant.m();
        let (qp, rows) = self.problem(cbf, plant, x, u_nom)?;
        let mut start = match u_nom {
            Some(u) => u.to_vec(),
            None => vec![0.0; m],
        };
        start.push(self.weights.c_alpha);
        start.push(self.weights.c_m);
        let sol = solve_qp_from(&qp, Some(warm.unwrap_or(&start)))?;
        if sol.status == QpStatus::Infeasible {
            return Err(Error::Infeasible);
        }
        let u_star = sol.z[..m].to_vec();
        let (alpha_star, m_star) = (sol.z[m], sol.z[m + 1]);
        let margins = rows
            .iter()
            .map(|row| RowMargin {
                term: row.term,
                index: row.index,
                value: row.eval(&u_star, alpha_star, m_star),
            })
            .collect();
        Ok(SafeguardResult {
            u_star,
            alpha_star,
            m_star,
            b_value: b,
            margins,
            iterations: sol.iterations,
            kkt: sol.kkt,
            active: sol.active,
        })
    }
}

/// One-shot filter evaluation with the default neighborhood.
pub fn safeguard(
    cbf: &ExtendedCbf,
    plant: &dyn SecondOrderPlant,
    weights: &QpWeights,
    input_set: &InputSet,
    x: &[f64],
    u_nom: Option<&[f64]>,
) -> Result<SafeguardResult> {
    Safeguard::new(weights.clone(), input_set.clone(), plant.m())?.solve(cbf, plant, x, u_nom, None)
}

/// State-dependent nominal command.
pub type NominalFn<'a> = &'a dyn Fn(&[f64]) -> Vec<f64>;

/// `max ||u*(x_{k+1}) - u*(x_k)|| / ||x_{k+1} - x_k||` along `path`.
///
/// Repeated points contribute nothing unless `u*` differs there.
pub fn continuity_probe(
    cbf: &ExtendedCbf,
    plant: &dyn SecondOrderPlant,
    weights: &QpWeights,
    input_set: &InputSet,
    path: &[Vec<f64>],
    nominal: Option<NominalFn<'_>>,
) -> Result<f64> {
    let sg = Safeguard::new(weights.clone(), input_set.clone(), plant.m())?;
    let mut prev: Option<(&[f64], Vec<f64>)> = None;
    let mut ratio = 0.0_f64;
    for x in path {
        let un = nominal.map(|f| f(x));
        let u = sg.solve(cbf, plant, x, un.as_deref(), None)?.u_star;
        if let Some((px, pu)) = &prev {
            let dx = px
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let du = pu
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if dx > 0.0 {
                ratio = ratio.max(du / dx);
            } else if du > 0.0 {
                ratio = f64::INFINITY;
            }
        }
        prev = Some((x.as_slice(), u));
    }
    Ok(ratio)
}

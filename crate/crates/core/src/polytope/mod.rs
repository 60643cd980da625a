//! Half-space geometry, the safety set as a union of intersections, and the
//! LP-backed certificates: feasibility, boundedness, the intersecting index
//! sets, interior witnesses and the witness margin `delta`.

mod cert;
mod doc;
pub mod lp;
pub mod presets;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use cert::{
    compute_cert, enumerate_s_cap, max_min_point, GeometryCert, WitnessOverrides, MAX_ENUMERATED,
};
pub use doc::{CbfParams, SpecDocument};
pub use lp::{LpProblem, LpSolution, LpStatus, Sense};

use crate::error::{check_dim, Error, Result};
use lp::dot;

/// `{ x | a . x + b >= 0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    a: Vec<f64>,
    b: f64,
}

impl HalfSpace {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        HalfSpace { a, b }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Affine value `a . x + b`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.b
    }

    pub fn scaled(&self, s: f64) -> Self {
        HalfSpace {
            a: self.a.iter().map(|v| v * s).collect(),
            b: self.b * s,
        }
    }
}

/// Sorted set of half-space indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut v: Vec<usize>) -> Self {
        v.sort_unstable();
        v.dedup();
        IndexSet(v)
    }

    pub fn from_mask(mask: u32) -> Self {
        IndexSet((0..32).filter(|i| mask & (1 << i) != 0).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        IndexSet::new(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        IndexSet::new(iter.into_iter().collect())
    }
}

/// Prints 1-based indices, matching the file format.
impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// Positional safety set `C = U_l  n_{i in I^l} { a_i . x + b_i >= 0 }`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySpec {
    n: usize,
    halfspaces: Vec<HalfSpace>,
    terms: Vec<IndexSet>,
}

impl SafetySpec {
    /// Validates and builds a spec. `terms` use 0-based indices.
    pub fn new(n: usize, halfspaces: Vec<HalfSpace>, terms: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation(
                "position dimension must be positive".into(),
            ));
        }
        if halfspaces.is_empty() {
            return Err(Error::Validation(
                "at least one half-space is required".into(),
            ));
        }
        for (i, h) in halfspaces.iter().enumerate() {
            check_dim(n, h.dim())?;
            if h.a.iter().any(|v| !v.is_finite()) || !h.b.is_finite() {
                return Err(Error::Validation(format!(
                    "half-space {} is not finite",
                    i + 1
                )));
            }
            if dot(&h.a, &h.a) == 0.0 {
                return Err(Error::Validation(format!(
                    "half-space {} has a zero normal",
                    i + 1
                )));
            }
            if h.b == 0.0 {
                return Err(Error::Validation(format!(
                    "half-space {} has a zero offset",
                    i + 1
                )));
            }
        }
        for i in 0..halfspaces.len() {
            for j in i + 1..halfspaces.len() {
                if !independent(&halfspaces[i], &halfspaces[j]) {
                    return Err(Error::Validation(format!(
                        "half-spaces {} and {} are linearly dependent",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if terms.is_empty() {
            return Err(Error::Validation("at least one term is required".into()));
        }
        let r = halfspaces.len();
        let mut sets = Vec::with_capacity(terms.len());
        for (l, t) in terms.into_iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Validation(format!("term {} is empty", l + 1)));
            }
            let len = t.len();
            let set = IndexSet::new(t);
            if set.len() != len {
                return Err(Error::Validation(format!(
                    "term {} repeats an index",
                    l + 1
                )));
            }
            if let Some(&bad) = set.as_slice().iter().find(|&&i| i >= r) {
                return Err(Error::Validation(format!(
                    "term {} references half-space {} of {}",
                    l + 1,
                    bad + 1,
                    r
                )));
            }
            sets.push(set);
        }
        let spec = SafetySpec {
            n,
            halfspaces,
            terms: sets,
        };
        for (l, t) in spec.terms.iter().enumerate() {
            if !spec.feasible(t)? {
                return Err(Error::Validation(format!("term {} is infeasible", l + 1)));
            }
        }
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    pub fn halfspace(&self, i: usize) -> &HalfSpace {
        &self.halfspaces[i]
    }

    pub fn terms(&self) -> &[IndexSet] {
        &self.terms
    }

    /// `h_i(x1)`.
    pub fn h(&self, i: usize, x1: &[f64]) -> f64 {
        self.halfspaces[i].eval(x1)
    }

    pub fn rows(&self, set: &IndexSet) -> Vec<HalfSpace> {
        set.iter().map(|i| self.halfspaces[i].clone()).collect()
    }

    /// Whether `n_{i in set} C_i` is nonempty.
    pub fn feasible(&self, set: &IndexSet) -> Result<bool> {
        let mut p = LpProblem::feasibility(self.n);
        for i in set.iter() {
            p.push_halfspace(&self.halfspaces[i]);
        }
        Ok(p.solve()?.status() != LpStatus::Infeasible)
    }

    /// Same geometry with every `(a_i, b_i)` multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        SafetySpec::new(
            self.n,
            self.halfspaces.iter().map(|h| h.scaled(s)).collect(),
            self.terms.iter().map(|t| t.as_slice().to_vec()).collect(),
        )
    }
}

fn independent(p: &HalfSpace, q: &HalfSpace) -> bool {
    let u: Vec<f64> = p.a.iter().copied().chain([p.b]).collect();
    let v: Vec<f64> = q.a.iter().copied().chain([q.b]).collect();
    let uu = dot(&u, &u);
    let vv = dot(&v, &v);
    let uv = dot(&u, &v);
    uu * vv - uv * uv > 1e-12 * uu * vv
}

/// `h(x1) = max_l min_{i in I^l} h_i(x1)`.
pub fn eval_h(spec: &SafetySpec, x1: &[f64]) -> f64 {
    debug_assert_eq!(x1.len(), spec.n);
    spec.terms
        .iter()
        .map(|t| term_min(spec, t, x1))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn term_min(spec: &SafetySpec, term: &IndexSet, x1: &[f64]) -> f64 {
    term.iter()
        .map(|i| spec.h(i, x1))
        .fold(f64::INFINITY, f64::min)
}

pub fn contains(spec: &SafetySpec, x1: &[f64]) -> bool {
    eval_h(spec, x1) >= 0.0
}

/// Whether the intersection of `rows` (all of dimension `k`) is bounded.
///
/// The recession cone `{ z | a_i . z >= 0 }` is trivial iff maximizing every
/// `+-z_j` over the cone clipped to the unit box yields zero.
pub fn is_bounded(rows: &[HalfSpace], k: usize) -> Result<bool> {
    for r in rows {
        check_dim(k, r.dim())?;
    }
    let mut feas = LpProblem::feasibility(k);
    for r in rows {
        feas.push_halfspace(r);
    }
    if feas.solve()?.status() == LpStatus::Infeasible {
        return Err(Error::EmptySet);
    }
    for j in 0..k {
        for s in [1.0, -1.0] {
            let mut c = vec![0.0; k];
            c[j] = s;
            let mut p = LpProblem::maximize(c);
            for r in rows {
                p.push_ge(r.a().to_vec(), 0.0);
            }
            for l in 0..k {
                p = p.bound(l, Some(-1.0), Some(1.0));
            }
            match p.solve()? {
                LpSolution::Optimal { objective, .. } if objective <= 1e-9 => {}
                LpSolution::Optimal { .. } => return Ok(false),
                other => {
                    return Err(Error::Internal(format!(
                        "recession-cone LP ended {:?}",
                        other.status()
                    )))
                }
            }
        }
    }
    Ok(true)
}

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{contains, is_bounded, term_min, IndexSet, LpProblem, LpSolution, SafetySpec};
use crate::error::{check_dim, Error, Result};

/// Largest `r` for which index sets are enumerated exhaustively.
pub const MAX_ENUMERATED: usize = 20;

/// Geometric certificate of a safety spec: intersecting index sets, one
/// interior witness per set, and the smallest witness margin `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryCert {
    pub s_cap: Vec<IndexSet>,
    pub witnesses: BTreeMap<IndexSet, Vec<f64>>,
    pub delta: f64,
    pub proj_bounded: bool,
    pub term_bounded: Vec<bool>,
}

impl GeometryCert {
    pub fn witness(&self, set: &IndexSet) -> Option<&[f64]> {
        self.witnesses.get(set).map(Vec::as_slice)
    }
}

/// Caller-pinned witnesses. `per_set` wins over `uniform`; sets covered by
/// neither get the max-min point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WitnessOverrides {
    pub uniform: Option<Vec<f64>>,
    pub per_set: BTreeMap<IndexSet, Vec<f64>>,
}

impl WitnessOverrides {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn uniform(y: Vec<f64>) -> Self {
        WitnessOverrides {
            uniform: Some(y),
            per_set: BTreeMap::new(),
        }
    }

    fn lookup(&self, set: &IndexSet) -> Option<&Vec<f64>> {
        self.per_set.get(set).or(self.uniform.as_ref())
    }
}

fn feasible_with(spec: &SafetySpec, set: &IndexSet, term: &IndexSet) -> Result<bool> {
    if set.iter().all(|i| term.contains(i)) {
        // Terms are checked feasible at construction.
        return Ok(true);
    }
    spec.feasible(&set.union(term))
}

/// All nonempty `I` with `(n_{i in I} C_i) n C` nonempty.
///
/// Subsets are processed by cardinality; a set is only tested when every
/// subset one element smaller already qualified.
pub fn enumerate_s_cap(spec: &SafetySpec) -> Result<Vec<IndexSet>> {
    let r = spec.r();
    if r > MAX_ENUMERATED {
        return Err(Error::TooManyHalfspaces {
            r,
            cap: MAX_ENUMERATED,
        });
    }
    let full = 1u32 << r;
    let mut member = vec![false; full as usize];
    for size in 1..=r as u32 {
        let layer: Vec<u32> = (1..full).filter(|m| m.count_ones() == size).collect();
        let results: Vec<Result<bool>> = layer
            .par_iter()
            .map(|&mask| {
                if size > 1 {
                    let parents_ok = (0..r)
                        .filter(|i| mask & (1 << i) != 0)
                        .all(|i| member[(mask & !(1 << i)) as usize]);
                    if !parents_ok {
                        return Ok(false);
                    }
                }
                let set = IndexSet::from_mask(mask);
                for term in spec.terms() {
                    if feasible_with(spec, &set, term)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            })
            .collect();
        for (mask, res) in layer.iter().zip(results) {
            member[*mask as usize] = res?;
        }
    }
    Ok((1..full)
        .filter(|&m| member[m as usize])
        .map(IndexSet::from_mask)
        .collect())
}

/// `argmax_{x in C} min_{i in set} h_i(x)` via one LP per term.
///
/// Returns the maximizer and its margin. Ties across terms go to the lowest
/// term index.
pub fn max_min_point(spec: &SafetySpec, set: &IndexSet) -> Result<(Vec<f64>, f64)> {
    let n = spec.n();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (l, term) in spec.terms().iter().enumerate() {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        let mut p = LpProblem::maximize(c);
        for i in set.iter() {
            let h = spec.halfspace(i);
            let mut a = h.a().to_vec();
            a.push(-1.0);
            p.push_ge(a, -h.b());
        }
        for i in term.iter() {
            p.push_halfspace(spec.halfspace(i));
        }
        match p.solve()? {
            LpSolution::Optimal { x, objective, .. } => {
                if best.as_ref().is_none_or(|(_, t)| objective > *t) {
                    best = Some((x[..n].to_vec(), objective));
                }
            }
            LpSolution::Infeasible { .. } => {}
            LpSolution::Unbounded { .. } => return Err(Error::UnboundedPositions { term: l + 1 }),
        }
    }
    match best {
        Some((y, t)) if t > 0.0 => Ok((y, t)),
        Some((_, t)) => Err(Error::AssumptionViolated {
            set: set.as_slice().to_vec(),
            margin: t,
        }),
        None => Err(Error::AssumptionViolated {
            set: set.as_slice().to_vec(),
            margin: f64::NEG_INFINITY,
        }),
    }
}

fn checked_override(spec: &SafetySpec, set: &IndexSet, y: &[f64]) -> Result<Vec<f64>> {
    check_dim(spec.n(), y.len())?;
    let margin = term_min(spec, set, y);
    if !contains(spec, y) || margin <= 0.0 {
        return Err(Error::AssumptionViolated {
            set: set.as_slice().to_vec(),
            margin,
        });
    }
    Ok(y.to_vec())
}

pub fn compute_cert(spec: &SafetySpec, overrides: &WitnessOverrides) -> Result<GeometryCert> {
    let mut term_bounded = Vec::with_capacity(spec.terms().len());
    for (l, term) in spec.terms().iter().enumerate() {
        let bounded = is_bounded(&spec.rows(term), spec.n())?;
        if !bounded {
            return Err(Error::UnboundedPositions { term: l + 1 });
        }
        term_bounded.push(bounded);
    }
    let s_cap = enumerate_s_cap(spec)?;
    let points: Vec<Result<Vec<f64>>> = s_cap
        .par_iter()
        .map(|set| match overrides.lookup(set) {
            Some(y) => checked_override(spec, set, y),
            None => max_min_point(spec, set).map(|(y, _)| y),
        })
        .collect();
    let mut witnesses = BTreeMap::new();
    let mut delta = f64::INFINITY;
    for (set, y) in s_cap.iter().zip(points) {
        let y = y?;
        delta = delta.min(term_min(spec, set, &y));
        witnesses.insert(set.clone(), y);
    }
    if !(delta > 0.0) {
        return Err(Error::Internal(format!(
            "non-positive witness margin {delta}"
        )));
    }
    Ok(GeometryCert {
        s_cap,
        witnesses,
        delta,
        proj_bounded: term_bounded.iter().all(|&b| b),
        term_bounded,
    })
}

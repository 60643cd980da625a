use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FACETS: usize = 16;

fn default_facets() -> usize {
    DEFAULT_FACETS
}

/// Admissible inputs `U`.
///
/// `Ball` is the Euclidean ball `||u|| <= radius`. Inside the QP and the
/// witness check it is replaced by an inscribed polytope: a regular polygon
/// with `facets` sides for `m = 2`, the box `|u_k| <= radius / sqrt(m)`
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputSet {
    #[default]
    Unbounded,
    Box {
        limits: Vec<f64>,
    },
    Ball {
        radius: f64,
        #[serde(default = "default_facets")]
        facets: usize,
    },
}

impl InputSet {
    pub fn ball(radius: f64) -> Self {
        InputSet::Ball {
            radius,
            facets: DEFAULT_FACETS,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            InputSet::Unbounded => Ok(()),
            InputSet::Box { limits } => {
                if limits.len() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        got: limits.len(),
                    });
                }
                if limits.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
                    return Err(Error::Validation("box limits must be positive".into()));
                }
                Ok(())
            }
            InputSet::Ball { radius, facets } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Validation("ball radius must be positive".into()));
                }
                if m == 2 && *facets < 3 {
                    return Err(Error::Validation(
                        "ball polygon needs at least 3 facets".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Rows `(n, h)` of the polytope `n . u <= h` used in place of `U`.
    pub fn rows(&self, m: usize) -> Vec<(Vec<f64>, f64)> {
        let axis_box = |lim: &dyn Fn(usize) -> f64| {
            let mut out = Vec::with_capacity(2 * m);
            for k in 0..m {
                for s in [1.0, -1.0] {
                    let mut n = vec![0.0; m];
                    n[k] = s;
                    out.push((n, lim(k)));
                }
            }
            out
        };
        match self {
            InputSet::Unbounded => Vec::new(),
            InputSet::Box { limits } => axis_box(&|k| limits[k]),
            InputSet::Ball { radius, facets } if m == 2 => {
                let k = *facets;
                let h = radius * (std::f64::consts::PI / k as f64).cos();
                (0..k)
                    .map(|j| {
                        let t = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                        (vec![t.cos(), t.sin()], h)
                    })
                    .collect()
            }
            InputSet::Ball { radius, .. } => {
                let h = radius / (m as f64).sqrt();
                axis_box(&|_| h)
            }
        }
    }

    /// Membership in the polytope of [`InputSet::rows`], with slack `tol`.
    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.rows(u.len())
            .iter()
            .all(|(n, h)| n.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() <= h + tol)
    }

    /// Closed interval of `beta` with `u0 + beta v` inside the polytope, or
    /// `None` when the line misses it.
    pub fn line_interval(&self, u0: &[f64], v: &[f64]) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (n, h) in self.rows(u0.len()) {
            let nu: f64 = n.iter().zip(u0).map(|(a, b)| a * b).sum();
            let nv: f64 = n.iter().zip(v).map(|(a, b)| a * b).sum();
            let slack = h - nu;
            if nv > 0.0 {
                hi = hi.min(slack / nv);
            } else if nv < 0.0 {
                lo = lo.max(slack / nv);
            } else if slack < 0.0 {
                return None;
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

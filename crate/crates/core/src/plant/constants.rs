//! Euler-Lagrange constants `k1`, `kG`, `k2` and the input-bounded choice of
//! `gamma`.
//!
//! Maxima are taken over a grid of the safe positions. The grid always has
//! an odd number of points per axis so that the half-resolution grid is a
//! subset of it; the reported constants add twice the gap between the two
//! grids to the fine-grid maximum.

use nalgebra::DVector;

use super::SecondOrderPlant;
use crate::cbf::ExtendedCbf;
use crate::error::{Error, Result};
use crate::polytope::{contains, GeometryCert, LpProblem, SafetySpec};

const DIRECTIONS: usize = 72;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridMaxima {
    pub k1: f64,
    pub k_g: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElConstants {
    /// Bound on `||f2^1(x1)||` over the safe positions.
    pub k1: f64,
    /// Bound on `||G2^+(x1)||`.
    pub k_g: f64,
    /// Gain with `||f2^2(x)|| <= k2 ||x2||` for `||x2|| <= velocity_radius`.
    pub k2: f64,
    pub velocity_radius: f64,
    /// Points per axis actually used (odd).
    pub resolution: usize,
    pub grid: GridMaxima,
    pub coarse: GridMaxima,
}

fn position_box(spec: &SafetySpec) -> Result<Vec<(f64, f64)>> {
    let n = spec.n();
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    for term in spec.terms() {
        for (j, b) in bounds.iter_mut().enumerate() {
            for s in [1.0, -1.0] {
                let mut c = vec![0.0; n];
                c[j] = s;
                let mut p = LpProblem::maximize(c);
                for i in term.iter() {
                    p.push_halfspace(spec.halfspace(i));
                }
                let v = p
                    .solve()?
                    .objective()
                    .ok_or(Error::UnboundedPositions { term: 0 })?;
                if s > 0.0 {
                    b.1 = b.1.max(v);
                } else {
                    b.0 = b.0.min(-v);
                }
            }
        }
    }
    Ok(bounds)
}

fn unit_directions(n: usize) -> Vec<DVector<f64>> {
    match n {
        1 => vec![
            DVector::from_element(1, 1.0),
            DVector::from_element(1, -1.0),
        ],
        2 => (0..DIRECTIONS)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / DIRECTIONS as f64;
                DVector::from_column_slice(&[a.cos(), a.sin()])
            })
            .collect(),
        _ => {
            // Axes and pairwise diagonals.
            let mut out = Vec::new();
            for i in 0..n {
                for s in [1.0, -1.0] {
                    let mut v = DVector::zeros(n);
                    v[i] = s;
                    out.push(v);
                }
                for j in i + 1..n {
                    for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                        let mut v = DVector::zeros(n);
                        v[i] = si / 2f64.sqrt();
                        v[j] = sj / 2f64.sqrt();
                        out.push(v);
                    }
                }
            }
            out
        }
    }
}

fn spectral_norm(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

/// Grid estimate of the Euler-Lagrange constants over the safe positions.
pub fn estimate_constants(
    plant: &dyn SecondOrderPlant,
    spec: &SafetySpec,
    resolution: usize,
    velocity_radius: f64,
) -> Result<ElConstants> {
    if plant.n() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: plant.n(),
        });
    }
    if !(velocity_radius > 0.0) {
        return Err(Error::Validation("velocity radius must be positive".into()));
    }
    let zero = vec![0.0; spec.n()];
    if plant.potential_drift(&zero).is_none() || plant.velocity_drift(&zero, &zero).is_none() {
        return Err(Error::NoSplit);
    }
    let res = resolution.max(3) | 1;
    let n = spec.n();
    let bounds = position_box(spec)?;
    let dirs = unit_directions(n);
    let radii = [
        0.25 * velocity_radius,
        0.5 * velocity_radius,
        velocity_radius,
    ];

    let mut fine = GridMaxima::default();
    let mut coarse = GridMaxima::default();
    let total = res.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut x1 = vec![0.0; n];
    for _ in 0..total {
        for j in 0..n {
            let (lo, hi) = bounds[j];
            x1[j] = lo + (hi - lo) * idx[j] as f64 / (res - 1) as f64;
        }
        if contains(spec, &x1) {
            let on_coarse = idx.iter().all(|k| k % 2 == 0);
            let k1 = plant.potential_drift(&x1).ok_or(Error::NoSplit)?.norm();
            let k_g = spectral_norm(&plant.g2_right_inverse(&x1)?);
            let mut k2 = 0.0_f64;
            let mut k2_coarse = 0.0_f64;
            for (d, dir) in dirs.iter().enumerate() {
                for &rho in &radii {
                    let x2: Vec<f64> = dir.iter().map(|v| v * rho).collect();
                    let ratio = plant.velocity_drift(&x1, &x2).ok_or(Error::NoSplit)?.norm() / rho;
                    k2 = k2.max(ratio);
                    if d % 2 == 0 {
                        k2_coarse = k2_coarse.max(ratio);
                    }
                }
            }
            fine.k1 = fine.k1.max(k1);
            fine.k_g = fine.k_g.max(k_g);
            fine.k2 = fine.k2.max(k2);
            if on_coarse {
                coarse.k1 = coarse.k1.max(k1);
                coarse.k_g = coarse.k_g.max(k_g);
                coarse.k2 = coarse.k2.max(k2_coarse);
            }
        }
        for k in idx.iter_mut() {
            *k += 1;
            if *k < res {
                break;
            }
            *k = 0;
        }
    }
    let pad = |f: f64, c: f64| f + 2.0 * (f - c).max(0.0);
    Ok(ElConstants {
        k1: pad(fine.k1, coarse.k1),
        k_g: pad(fine.k_g, coarse.k_g),
        k2: pad(fine.k2, coarse.k2),
        velocity_radius,
        resolution: res,
        grid: fine,
        coarse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaChoice {
    pub gamma: f64,
    pub epsilon: f64,
    /// Velocity constant with `||x2|| <= gamma c` on the safe set.
    pub c: f64,
}

/// Largest `gamma` with `gamma (k2 + gamma) kG c <= 0.9 * (d - kG k1) / 2`,
/// and `epsilon = gamma delta / 2`.
pub fn select_gamma(
    constants: &ElConstants,
    d: f64,
    spec: &SafetySpec,
    cert: &GeometryCert,
) -> Result<GammaChoice> {
    let c = ExtendedCbf::build(spec.clone(), cert.clone(), 1.0, 0.5 * cert.delta)?
        .velocity_bound()?
        .c;
    gamma_for(constants.k1, constants.k_g, constants.k2, c, d, cert.delta)
}

pub(crate) fn gamma_for(
    k1: f64,
    k_g: f64,
    k2: f64,
    c: f64,
    d: f64,
    delta: f64,
) -> Result<GammaChoice> {
    let required = k_g * k1;
    if !(d > required) {
        return Err(Error::InsufficientActuation { d, required });
    }
    let target = 0.9 * 0.5 * (d - required);
    let lhs = |g: f64| g * (k2 + g) * k_g * c;
    let mut hi = 1.0;
    while lhs(hi) <= target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    if !(lo > 0.0) {
        return Err(Error::Internal("gamma bisection collapsed to zero".into()));
    }
    Ok(GammaChoice {
        gamma: lo,
        epsilon: 0.5 * lo * delta,
        c,
    })
}

/// Picks `gamma` for the input bound `d` with `k2` certified on the velocity
/// ball the resulting safe set actually allows.
///
/// `k2` is first ignored to get an upper bound `gamma0` on `gamma`; `k2` is
/// then estimated on `||x2|| <= gamma0 c`, which can only shrink `gamma`, so
/// the final velocity ball lies inside the certified one.
pub fn certify_input_bound(
    plant: &dyn SecondOrderPlant,
    spec: &SafetySpec,
    cert: &GeometryCert,
    d: f64,
    resolution: usize,
) -> Result<(ElConstants, GammaChoice)> {
    let probe = estimate_constants(plant, spec, resolution, 1.0)?;
    let c = ExtendedCbf::build(spec.clone(), cert.clone(), 1.0, 0.5 * cert.delta)?
        .velocity_bound()?
        .c;
    let upper = gamma_for(probe.k1, probe.k_g, 0.0, c, d, cert.delta)?;
    let constants = estimate_constants(plant, spec, resolution, upper.gamma * c)?;
    let choice = gamma_for(constants.k1, constants.k_g, constants.k2, c, d, cert.delta)?;
    debug_assert!(choice.gamma * c <= constants.velocity_radius * (1.0 + 1e-12));
    Ok((constants, choice))
}

//! Second-order control-affine plants `x1' = x2`, `x2' = f2(x) + G2(x1) u`.

mod arm;
mod constants;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use arm::{ArmCoefficients, ArmParams, NominalTracking, Reference, TwoLinkArm, GRAVITY};
pub use constants::{
    certify_input_bound, estimate_constants, select_gamma, ElConstants, GammaChoice, GridMaxima,
};

use crate::error::{Error, Result};

/// Residual bound on `G2 G2^+ - I` for a usable right inverse.
pub const RIGHT_INVERSE_TOL: f64 = 1e-8;

pub trait SecondOrderPlant: Send + Sync {
    /// Position dimension.
    fn n(&self) -> usize;
    /// Input dimension.
    fn m(&self) -> usize;
    fn f2(&self, x1: &[f64], x2: &[f64]) -> DVector<f64>;
    fn g2(&self, x1: &[f64]) -> DMatrix<f64>;

    /// Potential part `f2^1(x1)` of the drift, when the plant splits it.
    fn potential_drift(&self, _x1: &[f64]) -> Option<DVector<f64>> {
        None
    }

    /// Velocity-dependent part `f2^2(x)` of the drift.
    fn velocity_drift(&self, _x1: &[f64], _x2: &[f64]) -> Option<DVector<f64>> {
        None
    }

    /// Moore-Penrose right inverse of `G2(x1)`, rejected when `G2 G2^+`
    /// is not the identity.
    fn g2_right_inverse(&self, x1: &[f64]) -> Result<DMatrix<f64>> {
        right_inverse(&self.g2(x1))
    }

    fn acceleration(&self, x1: &[f64], x2: &[f64], u: &[f64]) -> DVector<f64> {
        self.f2(x1, x2) + self.g2(x1) * DVector::from_column_slice(u)
    }
}

pub fn right_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let pinv = g
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::NumericalBreakdown(e.to_string()))?;
    let residual = (g * &pinv - DMatrix::identity(g.nrows(), g.nrows())).norm();
    if residual > RIGHT_INVERSE_TOL {
        return Err(Error::NotRightInvertible { residual });
    }
    Ok(pinv)
}

/// `x'' = u` in `n` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleIntegrator {
    pub n: usize,
}

impl SecondOrderPlant for DoubleIntegrator {
    fn n(&self) -> usize {
        self.n
    }

    fn m(&self) -> usize {
        self.n
    }

    fn f2(&self, _x1: &[f64], _x2: &[f64]) -> DVector<f64> {
        DVector::zeros(self.n)
    }

    fn g2(&self, _x1: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }

    fn potential_drift(&self, _x1: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.n))
    }

    fn velocity_drift(&self, _x1: &[f64], _x2: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.n))
    }
}

/// Plant selection as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlantConfig {
    TwoLinkArm {
        #[serde(default = "one")]
        m1: f64,
        #[serde(default = "one")]
        m2: f64,
        #[serde(default = "one")]
        l1: f64,
        #[serde(default = "one")]
        l2: f64,
        #[serde(default)]
        gravity: bool,
    },
    DoubleIntegrator {
        n: usize,
    },
}

fn one() -> f64 {
    1.0
}

/// A concrete plant built from a [`PlantConfig`].
#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Arm(TwoLinkArm),
    DoubleIntegrator(DoubleIntegrator),
}

impl PlantConfig {
    pub fn build(&self) -> Result<Plant> {
        match *self {
            PlantConfig::TwoLinkArm {
                m1,
                m2,
                l1,
                l2,
                gravity,
            } => Ok(Plant::Arm(TwoLinkArm::new(ArmParams {
                m1,
                m2,
                l1,
                l2,
                gravity,
            })?)),
            PlantConfig::DoubleIntegrator { n } => {
                if n == 0 {
                    return Err(Error::Validation("double integrator needs n >= 1".into()));
                }
                Ok(Plant::DoubleIntegrator(DoubleIntegrator { n }))
            }
        }
    }
}

impl Plant {
    pub fn as_dyn(&self) -> &dyn SecondOrderPlant {
        match self {
            Plant::Arm(a) => a,
            Plant::DoubleIntegrator(d) => d,
        }
    }

    pub fn arm(&self) -> Option<&TwoLinkArm> {
        match self {
            Plant::Arm(a) => Some(a),
            Plant::DoubleIntegrator(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_integrator_is_trivial() {
        let p = DoubleIntegrator { n: 2 };
        let a = p.acceleration(&[1.0, 2.0], &[3.0, 4.0], &[0.5, -0.5]);
        assert_eq!(a.as_slice(), &[0.5, -0.5]);
        assert_eq!(
            p.g2_right_inverse(&[0.0, 0.0]).unwrap(),
            DMatrix::identity(2, 2)
        );
    }

    #[test]
    fn wide_matrix_has_right_inverse_tall_does_not() {
        let wide = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let r = right_inverse(&wide).unwrap();
        assert!(((&wide * r)[(0, 0)] - 1.0).abs() < 1e-12);
        let tall = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(
            right_inverse(&tall),
            Err(Error::NotRightInvertible { .. })
        ));
    }

    #[test]
    fn plant_config_parses() {
        let cfg: PlantConfig =
            serde_json::from_str(r#"{"type": "two_link_arm", "gravity": true}"#).unwrap();
        assert_eq!(
            cfg,
            PlantConfig::TwoLinkArm {
                m1: 1.0,
                m2: 1.0,
                l1: 1.0,
                l2: 1.0,
                gravity: true
            }
        );
        let cfg: PlantConfig =
            serde_json::from_str(r#"{"type": "double_integrator", "n": 1}"#).unwrap();
        assert!(cfg.build().is_ok());
    }
}

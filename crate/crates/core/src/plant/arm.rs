use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::SecondOrderPlant;
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Physical parameters of a planar elbow manipulator with point masses at
/// the link ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    /// Enables the `cos(theta1 + theta2)` potential term on the elbow.
    pub gravity: bool,
}

impl Default for ArmParams {
    fn default() -> Self {
        ArmParams {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
            gravity: false,
        }
    }
}

/// Coefficients of
///
/// ```text
/// [c11 + c12 cos q2   c13 + c14 cos q2] q''  =  [c15 s q2' , c16 s q2'] q'  +  [u1                        ]
/// [c22 + c23 cos q2   c21             ]         [c24 s q1' , 0        ]       [c25 cos(q1 + q2) + u2     ]
/// ```
///
/// with `s = sin q2`. Always derived from [`ArmParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmCoefficients {
    pub c11: f64,
    pub c12: f64,
    pub c13: f64,
    pub c14: f64,
    pub c15: f64,
    pub c16: f64,
    pub c21: f64,
    pub c22: f64,
    pub c23: f64,
    pub c24: f64,
    pub c25: f64,
}

impl ArmCoefficients {
    pub fn from_params(p: &ArmParams) -> Self {
        let ll = p.m2 * p.l1 * p.l2;
        let m2l2 = p.m2 * p.l2 * p.l2;
        ArmCoefficients {
            c11: (p.m1 + p.m2) * p.l1 * p.l1 + m2l2,
            c12: 2.0 * ll,
            c13: m2l2,
            c14: ll,
            c15: 2.0 * ll,
            c16: ll,
            c21: m2l2,
            c22: m2l2,
            c23: ll,
            c24: -ll,
            c25: if p.gravity {
                -p.m2 * GRAVITY * p.l2
            } else {
                0.0
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkArm {
    params: ArmParams,
    coeffs: ArmCoefficients,
}

impl TwoLinkArm {
    pub fn new(params: ArmParams) -> Result<Self> {
        let ArmParams { m1, m2, l1, l2, .. } = params;
        if [m1, m2, l1, l2].iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Validation(
                "arm masses and lengths must be positive".into(),
            ));
        }
        let arm = TwoLinkArm {
            params,
            coeffs: ArmCoefficients::from_params(&params),
        };
        // det M >= m1 m2 l1^2 l2^2, attained at q2 = 0.
        let m0 = arm.inertia(0.0);
        if m0.determinant() <= 1e-12 * m0.norm_squared() {
            return Err(Error::SingularInertia { theta: [0.0, 0.0] });
        }
        Ok(arm)
    }

    pub fn params(&self) -> &ArmParams {
        &self.params
    }

    pub fn coefficients(&self) -> &ArmCoefficients {
        &self.coeffs
    }

    pub fn inertia(&self, q2: f64) -> Matrix2<f64> {
        let c = &self.coeffs;
        let cq = q2.cos();
        Matrix2::new(
            c.c11 + c.c12 * cq,
            c.c13 + c.c14 * cq,
            c.c22 + c.c23 * cq,
            c.c21,
        )
    }

    pub fn inertia_inverse(&self, q2: f64) -> Matrix2<f64> {
        self.inertia(q2)
            .try_inverse()
            .expect("inertia is invertible for positive parameters")
    }

    /// The velocity matrix multiplying `q'` on the right-hand side.
    pub fn coriolis(&self, q: [f64; 2], qd: [f64; 2]) -> Matrix2<f64> {
        let c = &self.coeffs;
        let s = q[1].sin();
        Matrix2::new(c.c15 * s * qd[1], c.c16 * s * qd[1], c.c24 * s * qd[0], 0.0)
    }

    pub fn potential_force(&self, q: [f64; 2]) -> Vector2<f64> {
        Vector2::new(0.0, self.coeffs.c25 * (q[0] + q[1]).cos())
    }

    /// `0.5 q'^T M(q) q'`.
    pub fn kinetic_energy(&self, q: [f64; 2], qd: [f64; 2]) -> f64 {
        let v = Vector2::new(qd[0], qd[1]);
        0.5 * v.dot(&(self.inertia(q[1]) * v))
    }
}

fn pair(x: &[f64]) -> [f64; 2] {
    [x[0], x[1]]
}

fn dvec(v: Vector2<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

impl SecondOrderPlant for TwoLinkArm {
    fn n(&self) -> usize {
        2
    }

    fn m(&self) -> usize {
        2
    }

    fn f2(&self, x1: &[f64], x2: &[f64]) -> DVector<f64> {
        let (q, qd) = (pair(x1), pair(x2));
        let rhs = self.coriolis(q, qd) * Vector2::new(qd[0], qd[1]) + self.potential_force(q);
        dvec(self.inertia_inverse(q[1]) * rhs)
    }

    fn g2(&self, x1: &[f64]) -> DMatrix<f64> {
        let inv = self.inertia_inverse(x1[1]);
        DMatrix::from_column_slice(2, 2, inv.as_slice())
    }

    fn g2_right_inverse(&self, x1: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.inertia(x1[1]);
        Ok(DMatrix::from_column_slice(2, 2, m.as_slice()))
    }

    fn potential_drift(&self, x1: &[f64]) -> Option<DVector<f64>> {
        let q = pair(x1);
        Some(dvec(self.inertia_inverse(q[1]) * self.potential_force(q)))
    }

    fn velocity_drift(&self, x1: &[f64], x2: &[f64]) -> Option<DVector<f64>> {
        let (q, qd) = (pair(x1), pair(x2));
        let v = Vector2::new(qd[0], qd[1]);
        Some(dvec(
            self.inertia_inverse(q[1]) * (self.coriolis(q, qd) * v),
        ))
    }
}

/// Joint-space reference trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reference {
    /// `r_j(t) = amplitude_j sin(frequency_j t)`.
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
    },
    Constant {
        value: Vec<f64>,
    },
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Sinusoid {
            amplitude: vec![PI, FRAC_PI_2],
            frequency: vec![1.0, 4.0],
        }
    }
}

impl Reference {
    /// `(r, r', r'')` at `t`.
    pub fn eval(&self, t: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        match self {
            Reference::Sinusoid {
                amplitude,
                frequency,
            } => {
                let mut r = [0.0; 2];
                let mut rd = [0.0; 2];
                let mut rdd = [0.0; 2];
                for j in 0..2 {
                    let (a, w) = (amplitude[j], frequency[j]);
                    r[j] = a * (w * t).sin();
                    rd[j] = a * w * (w * t).cos();
                    rdd[j] = -a * w * w * (w * t).sin();
                }
                (r, rd, rdd)
            }
            Reference::Constant { value } => ([value[0], value[1]], [0.0; 2], [0.0; 2]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Reference::Sinusoid {
                amplitude,
                frequency,
            } => amplitude.len() == 2 && frequency.len() == 2,
            Reference::Constant { value } => value.len() == 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("arm reference needs two joints".into()))
        }
    }
}

/// Computed-torque tracking law `u = M (r'' - e' - e) - C q'` with
/// `e = q - r`, so that `e'' + e' + e = 0` without gravity. The model keeps
/// `C q'` on the right of `M q'' = C q' + u`, hence the minus sign.
/// Gravity is not compensated.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalTracking {
    arm: TwoLinkArm,
    reference: Reference,
}

impl NominalTracking {
    pub fn new(arm: TwoLinkArm, reference: Reference) -> Result<Self> {
        reference.validate()?;
        Ok(NominalTracking { arm, reference })
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn control(&self, t: f64, x1: &[f64], x2: &[f64]) -> DVector<f64> {
        let (q, qd) = (pair(x1), pair(x2));
        let (r, rd, rdd) = self.reference.eval(t);
        let e = Vector2::new(q[0] - r[0], q[1] - r[1]);
        let ed = Vector2::new(qd[0] - rd[0], qd[1] - rd[1]);
        let v = Vector2::new(qd[0], qd[1]);
        let u = self.arm.inertia(q[1]) * (Vector2::new(rdd[0], rdd[1]) - ed - e)
            - self.arm.coriolis(q, qd) * v;
        dvec(u)
    }
}

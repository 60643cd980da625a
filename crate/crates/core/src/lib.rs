//! Safe control of second-order systems under linear position constraints.
//!
//! A safety set given as a union of polytopes is lifted to a set of
//! position/velocity states from which the plant can be kept safe. A QP
//! filter enforces it around any nominal controller.

// `!(x > 0.0)` is used on purpose so NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cbf;
pub mod error;
pub mod plant;
pub mod polytope;
pub mod qp;
pub mod sim;

pub use cbf::{ActiveSet, ConditionReport, ExtendedCbf, VelocityCert};
pub use error::{Error, Result};
pub use plant::{Plant, PlantConfig, SecondOrderPlant, TwoLinkArm};
pub use polytope::{GeometryCert, HalfSpace, IndexSet, SafetySpec};
pub use qp::{InputSet, QpWeights, SafeguardResult};

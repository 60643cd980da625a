//! Strictly convex QP solver and the safeguarding filter built on it.

mod input;
mod safeguard;
mod solver;

pub use input::{InputSet, DEFAULT_FACETS};
pub use safeguard::{
    continuity_probe, filter_rows, safeguard, CostMatrix, FilterRow, NominalFn, QpWeights,
    RowMargin, Safeguard, SafeguardResult, DEFAULT_NEIGHBORHOOD,
};
pub use solver::{solve_qp, solve_qp_from, KktResiduals, QpProblem, QpSolution, QpStatus, KKT_TOL};

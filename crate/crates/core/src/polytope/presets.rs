//! Ready-made safety sets used by the arm scenario, tests and benches.

use std::f64::consts::{FRAC_PI_2, PI};

use super::{HalfSpace, SafetySpec};

/// Joint-space hexagon keeping the planar arm clear of the wall.
///
/// Vertices `(+-pi/2, +-pi/2)` and `(0, +-pi)`.
pub fn hexagon() -> SafetySpec {
    let rows = vec![
        HalfSpace::new(vec![1.0, 0.0], FRAC_PI_2),
        HalfSpace::new(vec![-1.0, 0.0], FRAC_PI_2),
        HalfSpace::new(vec![1.0, -1.0], PI),
        HalfSpace::new(vec![-1.0, -1.0], PI),
        HalfSpace::new(vec![-1.0, 1.0], PI),
        HalfSpace::new(vec![1.0, 1.0], PI),
    ];
    SafetySpec::new(2, rows, vec![(0..6).collect()]).expect("hexagon is valid")
}

/// `-1 <= x <= 1` in one dimension.
pub fn slab() -> SafetySpec {
    SafetySpec::new(
        1,
        vec![
            HalfSpace::new(vec![1.0], 1.0),
            HalfSpace::new(vec![-1.0], 1.0),
        ],
        vec![vec![0, 1]],
    )
    .expect("slab is valid")
}

/// Two disjoint boxes `[-3,-1] x [-1,1]` and `[1,3] x [-1,1]` sharing the
/// `y` rows.
pub fn two_boxes() -> SafetySpec {
    let rows = vec![
        HalfSpace::new(vec![1.0, 0.0], 3.0),
        HalfSpace::new(vec![-1.0, 0.0], -1.0),
        HalfSpace::new(vec![0.0, 1.0], 1.0),
        HalfSpace::new(vec![0.0, -1.0], 1.0),
        HalfSpace::new(vec![1.0, 0.0], -1.0),
        HalfSpace::new(vec![-1.0, 0.0], 3.0),
    ];
    SafetySpec::new(2, rows, vec![vec![0, 1, 2, 3], vec![4, 5, 2, 3]]).expect("boxes are valid")
}

//! Fixtures shared by the benchmarks.

use nalgebra::{DMatrix, DVector};
use vlc_an_core::designer::Channels;
use vlc_an_core::qcqp::QuadConstraint;
use vlc_an_core::{Point, QcqpProblem, SystemModel};

/// `maximize c'x` over an ellipsoid intersected with a box of balls.
pub fn ellipsoid_problem(n: usize) -> QcqpProblem {
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 });
    let c = DVector::from_fn(n, |i, _| 1.0 - 0.2 * i as f64);
    let mut cons = vec![QuadConstraint::new(a, DVector::zeros(n), 1.0)];
    for k in 0..n {
        let mut e = DMatrix::zeros(n, n);
        e[(k, k)] = 1.0;
        cons.push(QuadConstraint::new(e, DVector::zeros(n), 0.5));
    }
    QcqpProblem::new(c, cons).expect("valid benchmark problem")
}

pub fn reference_channels(system: &SystemModel) -> Channels {
    Channels {
        bob: system.channel(&Point::new(-0.85, -0.25, 0.5)).expect("on plane"),
        eve: Some(system.channel(&Point::new(2.25, 1.85, 0.5)).expect("on plane")),
    }
}

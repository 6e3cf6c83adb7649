//! Shared fixtures for the benchmarks.

use jmsos::marginal::uniform_box_moments;
use jmsos::{MarginalMoments, MarginalSpec, ParametricProblem, Polynomial};

/// `min { -x^2 y : x^2 + y^2 <= 1, 0 <= x <= 1 }` with `y` uniform on `[0, 1]`.
pub fn half_disc() -> ParametricProblem {
    let parse = |s: &str| Polynomial::parse(s, 1, 1).unwrap();
    ParametricProblem::new(1, 1, parse("-x1^2*y1"), MarginalSpec::UniformBox(vec![(0.0, 1.0)]))
        .with_inequality(parse("1 - x1^2 - y1^2"))
        .with_inequality(parse("x1*(1 - x1)"))
}

pub fn uniform_moments(degree: usize) -> MarginalMoments {
    uniform_box_moments(&[(0.0, 1.0)], degree).unwrap()
}

//! Parametric polynomial programs
//! `J(y) = inf_x { f(x, y) : h_j(x, y) >= 0 (or = 0), j = 1..m }` for `y ∈ Y`.

use crate::error::Result;
use crate::polyalg::Polynomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `h(x, y) >= 0`
    Inequality,
    /// `h(x, y) = 0`
    Equality,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub poly: Polynomial,
    pub kind: ConstraintKind,
    half_degree: usize,
}

impl Constraint {
    pub fn new(poly: Polynomial, kind: ConstraintKind) -> Self {
        let half_degree = poly.half_degree();
        Constraint {
            poly,
            kind,
            half_degree,
        }
    }

    pub fn inequality(poly: Polynomial) -> Self {
        Constraint::new(poly, ConstraintKind::Inequality)
    }

    pub fn equality(poly: Polynomial) -> Self {
        Constraint::new(poly, ConstraintKind::Equality)
    }

    /// `v = ⌈deg h / 2⌉`, cached at construction.
    pub fn half_degree(&self) -> usize {
        self.half_degree
    }

    pub fn is_equality(&self) -> bool {
        self.kind == ConstraintKind::Equality
    }
}

/// Distribution `φ` of the parameters on `Y`.
#[derive(Clone, Debug, PartialEq)]
pub enum MarginalSpec {
    /// Uniform on `∏ [a_j, b_j]`.
    UniformBox(Vec<(f64, f64)>),
    /// Uniform on the standard simplex `{y >= 0, Σ y_j <= 1}`.
    UniformSimplex,
    /// User-supplied moments `(β, γ_β)`.
    Explicit(Vec<(Vec<u32>, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricProblem {
    n: usize,
    p: usize,
    objective: Polynomial,
    joint: Vec<Constraint>,
    params: Vec<Constraint>,
    marginal: MarginalSpec,
}

impl ParametricProblem {
    /// New problem with no joint constraints.
    ///
    /// Box and simplex marginals are compiled into parameter constraints
    /// `(y_j - a_j)(b_j - y_j) >= 0`, respectively `y_j >= 0, 1 - Σ y_j >= 0`.
    pub fn new(n: usize, p: usize, objective: Polynomial, marginal: MarginalSpec) -> Self {
        let mut params = Vec::new();
        match &marginal {
            MarginalSpec::UniformBox(bounds) => {
                for (j, &(a, b)) in bounds.iter().enumerate().take(p) {
                    let y = Polynomial::y(n, p, j);
                    let lo = y.sub(&Polynomial::constant(n, p, a)).expect("same space");
                    let hi = Polynomial::constant(n, p, b).sub(&y).expect("same space");
                    params.push(Constraint::inequality(lo.mul(&hi).expect("same space")));
                }
            }
            MarginalSpec::UniformSimplex => {
                let mut slack = Polynomial::constant(n, p, 1.0);
                for j in 0..p {
                    let y = Polynomial::y(n, p, j);
                    slack = slack.sub(&y).expect("same space");
                    params.push(Constraint::inequality(y));
                }
                params.push(Constraint::inequality(slack));
            }
            MarginalSpec::Explicit(_) => {}
        }
        ParametricProblem {
            n,
            p,
            objective,
            joint: Vec::new(),
            params,
            marginal,
        }
    }

    pub fn with_inequality(mut self, h: Polynomial) -> Self {
        self.joint.push(Constraint::inequality(h));
        self
    }

    pub fn with_equality(mut self, h: Polynomial) -> Self {
        self.joint.push(Constraint::equality(h));
        self
    }

    /// Adds a constraint `h(y) >= 0` on the parameter set.
    pub fn with_param_constraint(mut self, h: Polynomial) -> Self {
        self.params.push(Constraint::inequality(h));
        self
    }

    pub fn with_objective(mut self, f: Polynomial) -> Self {
        self.objective = f;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn objective(&self) -> &Polynomial {
        &self.objective
    }

    pub fn joint_constraints(&self) -> &[Constraint] {
        &self.joint
    }

    pub fn param_constraints(&self) -> &[Constraint] {
        &self.params
    }

    /// Joint constraints followed by parameter constraints, `h_1..h_t`.
    pub fn all_constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.joint.iter().chain(&self.params)
    }

    pub fn marginal(&self) -> &MarginalSpec {
        &self.marginal
    }

    /// Bounding box of `Y` when it is known from the marginal.
    pub fn param_box(&self) -> Option<Vec<(f64, f64)>> {
        match &self.marginal {
            MarginalSpec::UniformBox(b) => Some(b.clone()),
            MarginalSpec::UniformSimplex => Some(vec![(0.0, 1.0); self.p]),
            MarginalSpec::Explicit(_) => None,
        }
    }

    /// Smallest admissible relaxation order `max(⌈deg f / 2⌉, max_k v_k)`.
    pub fn min_relaxation_order(&self) -> usize {
        self.all_constraints()
            .map(Constraint::half_degree)
            .fold(self.objective.half_degree(), usize::max)
    }

    /// Copy with every polynomial passed through `map`; constraint kinds are kept.
    pub(crate) fn map_polynomials(
        &self,
        map: impl Fn(&Polynomial) -> Result<Polynomial>,
    ) -> Result<ParametricProblem> {
        let remap = |cs: &[Constraint]| -> Result<Vec<Constraint>> {
            cs.iter()
                .map(|c| Ok(Constraint::new(map(&c.poly)?, c.kind)))
                .collect()
        };
        Ok(ParametricProblem {
            n: self.n,
            p: self.p,
            objective: map(&self.objective)?,
            joint: remap(&self.joint)?,
            params: remap(&self.params)?,
            marginal: self.marginal.clone(),
        })
    }

    /// Copy with the redundant constraint `N² - ‖(x, y)‖² >= 0` appended.
    pub fn add_ball_constraint(&self, radius: f64) -> ParametricProblem {
        let (n, p) = (self.n, self.p);
        let mut ball = Polynomial::constant(n, p, radius * radius);
        for k in 0..n + p {
            let v = if k < n {
                Polynomial::x(n, p, k)
            } else {
                Polynomial::y(n, p, k - n)
            };
            ball = ball.sub(&v.mul(&v).expect("same space")).expect("same space");
        }
        self.clone().with_inequality(ball)
    }

    /// Human-readable diagnostics; empty when the problem is well formed.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let same_space = |f: &Polynomial| f.n() == self.n && f.p() == self.p;
        if !same_space(&self.objective) {
            out.push("objective lives in a different variable space".to_string());
        }
        if self.objective.is_zero() {
            out.push("objective is empty".to_string());
        }
        for (j, c) in self.joint.iter().enumerate() {
            if !same_space(&c.poly) {
                out.push(format!("joint constraint {} lives in a different variable space", j + 1));
            }
        }
        for (j, c) in self.params.iter().enumerate() {
            if !same_space(&c.poly) {
                out.push(format!("parameter constraint {} lives in a different variable space", j + 1));
            } else if c.poly.involves_x() {
                out.push(format!(
                    "parameter constraint {} ({}) involves decision variables",
                    j + 1,
                    c.poly
                ));
            }
        }
        match &self.marginal {
            MarginalSpec::UniformBox(bounds) => {
                if bounds.len() != self.p {
                    out.push(format!(
                        "parameter box has {} intervals for {} parameters",
                        bounds.len(),
                        self.p
                    ));
                }
                for (j, &(a, b)) in bounds.iter().enumerate() {
                    if !(a < b) {
                        out.push(format!("parameter box for y{} is degenerate: [{a}, {b}]", j + 1));
                    }
                }
            }
            MarginalSpec::UniformSimplex => {
                if self.p == 0 {
                    out.push("simplex marginal needs at least one parameter".to_string());
                }
            }
            MarginalSpec::Explicit(table) => {
                let zero = table
                    .iter()
                    .find(|(b, _)| b.len() == self.p && b.iter().all(|&e| e == 0));
                match zero {
                    None => out.push("explicit moment table has no gamma_0 entry".to_string()),
                    Some((_, g0)) if (g0 - 1.0).abs() > 1e-12 => out.push(format!(
                        "explicit moments do not describe a probability measure: gamma_0 = {g0}"
                    )),
                    _ => {}
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, n: usize, p: usize) -> Polynomial {
        Polynomial::parse(s, n, p).unwrap()
    }

    fn example_31() -> ParametricProblem {
        ParametricProblem::new(1, 1, parse("-x1^2*y1", 1, 1), MarginalSpec::UniformBox(vec![(0.0, 1.0)]))
            .with_inequality(parse("1 - x1^2 - y1^2", 1, 1))
            .with_inequality(parse("x1*(1 - x1)", 1, 1))
    }

    #[test]
    fn relaxation_orders() {
        assert_eq!(example_31().min_relaxation_order(), 2);
        let lin = ParametricProblem::new(1, 1, parse("x1 + y1", 1, 1), MarginalSpec::UniformBox(vec![(0.0, 1.0)]))
            .with_inequality(parse("1 - x1", 1, 1));
        // the compiled box constraint is quadratic
        assert_eq!(lin.min_relaxation_order(), 1);
        let constant = ParametricProblem::new(1, 1, parse("3", 1, 1), MarginalSpec::Explicit(vec![(vec![0], 1.0)]));
        assert_eq!(constant.min_relaxation_order(), 0);
    }

    #[test]
    fn half_degrees_are_cached_consistently() {
        let prob = example_31().add_ball_constraint(2.0);
        for c in prob.all_constraints() {
            assert_eq!(c.half_degree(), (c.poly.degree() as usize).div_ceil(2));
        }
    }

    #[test]
    fn ball_constraint() {
        let base = ParametricProblem::new(1, 1, parse("x1", 1, 1), MarginalSpec::UniformBox(vec![(0.0, 1.0)]));
        let one = base.add_ball_constraint(1.0);
        assert_eq!(base.joint_constraints().len(), 0);
        assert_eq!(one.joint_constraints()[0].poly, parse("1 - x1^2 - y1^2", 1, 1));
        let two = one.add_ball_constraint(1.0);
        assert_eq!(two.joint_constraints().len(), 2);
        let wide = base.add_ball_constraint(2.0);
        assert_eq!(
            wide.joint_constraints()[0]
                .poly
                .coefficient(&crate::polyalg::MultiIndex::zero(2)),
            4.0
        );
    }

    #[test]
    fn box_compilation() {
        let prob = example_31();
        assert_eq!(prob.param_constraints().len(), 1);
        assert_eq!(prob.param_constraints()[0].poly, parse("y1 - y1^2", 1, 1));
        assert_eq!(prob.param_constraints()[0].half_degree(), 1);
    }

    #[test]
    fn validation() {
        assert!(example_31().validate().is_empty());
        let bad = example_31().with_param_constraint(parse("x1 - y1", 1, 1));
        assert_eq!(bad.validate().len(), 1);
        let heavy = ParametricProblem::new(
            1,
            1,
            parse("x1", 1, 1),
            MarginalSpec::Explicit(vec![(vec![0], 0.9), (vec![1], 0.5)]),
        );
        assert_eq!(heavy.validate().len(), 1);
        let empty = ParametricProblem::new(1, 1, Polynomial::zero(1, 1), MarginalSpec::UniformBox(vec![(0.0, 1.0)]));
        assert_eq!(empty.validate().len(), 1);
    }
}

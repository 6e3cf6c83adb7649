//! Affine recentering `v = c + h ⊙ u` of the variables onto `[-1, 1]` where bounds are known.
//!
//! The hierarchy is invariant under affine changes of variables, but the
//! monomial moment matrices on `[0, 1]` are badly conditioned; solving in
//! centered coordinates and mapping the results back is exact and keeps the
//! interior-point iterations well scaled.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::marginal::MarginalMoments;
use crate::momentstruct::MomentSequence;
use crate::polyalg::{enumerate_basis, graded_rank, Polynomial};
use crate::problem::ParametricProblem;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct VariableScaling {
    n: usize,
    /// Over all `n + p` variables; decision variables without a known interval keep center 0, half-width 1.
    center: Vec<f64>,
    half: Vec<f64>,
}

// interval `{t : a t² + b t + c >= 0}` of a concave quadratic with two real roots
fn concave_quadratic_interval(h: &Polynomial, k: usize) -> Option<(f64, f64)> {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (idx, coef) in h.terms() {
        let e = idx.exponents();
        if e.iter().enumerate().any(|(j, &v)| j != k && v > 0) {
            return None;
        }
        match e[k] {
            0 => c = coef,
            1 => b = coef,
            2 => a = coef,
            _ => return None,
        }
    }
    let disc = b * b - 4.0 * a * c;
    if a >= 0.0 || disc <= 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let (t1, t2) = ((-b + r) / (2.0 * a), (-b - r) / (2.0 * a));
    Some((t1.min(t2), t1.max(t2)))
}

impl VariableScaling {
    /// Centering map from the parameter box and from intervals implied by
    /// univariate concave quadratic constraints on single decision variables.
    ///
    /// `None` when nothing is known or everything is already centered on `[-1, 1]`.
    pub fn for_problem(prob: &ParametricProblem) -> Option<Self> {
        let (n, p) = (prob.n(), prob.p());
        let mut center = vec![0.0; n + p];
        let mut half = vec![1.0; n + p];
        for c in prob.joint_constraints().iter().filter(|c| !c.is_equality()) {
            for k in 0..n {
                if let Some((a, b)) = concave_quadratic_interval(&c.poly, k) {
                    center[k] = 0.5 * (a + b);
                    half[k] = 0.5 * (b - a);
                }
            }
        }
        if let Some(bounds) = prob.param_box() {
            let usable = bounds.len() == p
                && bounds.iter().all(|&(a, b)| a.is_finite() && b.is_finite() && b > a);
            if usable {
                for (j, &(a, b)) in bounds.iter().enumerate() {
                    center[n + j] = 0.5 * (a + b);
                    half[n + j] = 0.5 * (b - a);
                }
            }
        }
        if center.iter().all(|&c| c == 0.0) && half.iter().all(|&h| h == 1.0) {
            return None;
        }
        Some(VariableScaling { n, center, half })
    }

    // (shift, scale) of `v = c + h u` over all variables, or only the parameters when `with_x` is false
    fn forward(&self, with_x: bool) -> (Vec<f64>, Vec<f64>) {
        let from = if with_x { 0 } else { self.n };
        (self.center[from..].to_vec(), self.half[from..].to_vec())
    }

    fn inverse(&self, with_x: bool) -> (Vec<f64>, Vec<f64>) {
        let from = if with_x { 0 } else { self.n };
        let shift = self.center[from..]
            .iter()
            .zip(&self.half[from..])
            .map(|(c, h)| -c / h)
            .collect();
        let scale = self.half[from..].iter().map(|h| 1.0 / h).collect();
        (shift, scale)
    }

    /// Same problem written in `u`: every `q(v)` becomes `q(c + h u)`.
    pub fn problem(&self, prob: &ParametricProblem) -> Result<ParametricProblem> {
        let (shift, scale) = self.forward(true);
        prob.map_polynomials(|q| q.affine_substitute(&shift, &scale))
    }

    /// `∫ ((y - c) / h)^β dφ(y)` for every `|β| <= max_degree`.
    pub fn marginal(&self, gamma: &MarginalMoments) -> Result<MarginalMoments> {
        let p = gamma.p();
        let (shift, scale) = self.inverse(false);
        let values = enumerate_basis(0, p, gamma.max_degree())
            .into_iter()
            .map(|beta| {
                let q = Polynomial::from_terms(0, p, [(beta, 1.0)])?.affine_substitute(&shift, &scale)?;
                q.terms()
                    .map(|(idx, c)| {
                        gamma
                            .get(idx.exponents())
                            .map(|g| c * g)
                            .ok_or_else(|| Error::MissingMoment(idx.exponents().to_vec()))
                    })
                    .sum()
            })
            .collect::<Result<Vec<f64>>>()?;
        MarginalMoments::from_values(p, gamma.max_degree(), values)
    }

    /// Moments in the original variables: `z_γ = L'((c + h u)^γ)`.
    pub fn moments_back(&self, z: &MomentSequence) -> Result<MomentSequence> {
        let (n, p, order) = (z.n(), z.p(), z.order());
        let (shift, scale) = self.forward(true);
        let values = enumerate_basis(n, p, 2 * order)
            .into_iter()
            .map(|idx| {
                let q = Polynomial::from_terms(n, p, [(idx, 1.0)])?.affine_substitute(&shift, &scale)?;
                z.riesz(&q)
            })
            .collect::<Result<Vec<f64>>>()?;
        MomentSequence::new(n, p, order, values)
    }

    /// `q(u)` rewritten in the original variables; works for both `n = 0` and joint polynomials.
    pub fn poly_back(&self, q: &Polynomial) -> Result<Polynomial> {
        let (shift, scale) = self.inverse(q.n() > 0);
        if q.n() > 0 && q.n() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: q.n(),
            });
        }
        q.affine_substitute(&shift, &scale)
    }

    /// Gram matrix over the `u`-monomials of degree `<= half` rewritten over the original monomials.
    ///
    /// With `v_u = T v_y` the quadratic form `v_uᵀ G v_u` equals `v_yᵀ (Tᵀ G T) v_y`.
    pub fn gram_back(&self, gram: &DMatrix<f64>, p: usize, half: usize) -> Result<DMatrix<f64>> {
        let basis = enumerate_basis(self.n, p, half);
        if gram.nrows() != basis.len() {
            return Err(Error::Dimension {
                expected: basis.len(),
                found: gram.nrows(),
            });
        }
        let (shift, scale) = self.inverse(true);
        let mut t = DMatrix::zeros(basis.len(), basis.len());
        for (r, idx) in basis.iter().enumerate() {
            let q = Polynomial::from_terms(self.n, p, [(idx.clone(), 1.0)])?.affine_substitute(&shift, &scale)?;
            for (m, c) in q.terms() {
                t[(r, graded_rank(m))] = c;
            }
        }
        Ok(t.transpose() * gram * t)
    }
}

//! Maximum-entropy reconstruction of a nonnegative function from finitely many moments.
//!
//! Given moments `u_β = ∫ t^β g(t) dt` on the unit box, the Boltzmann–Shannon
//! entropy maximizer has the form `h(t) = exp(Σ λ_β t^β)`, where `λ` maximizes
//! the concave dual `v(λ) = ⟨u, λ⟩ - ∫ exp(Σ λ_β t^β) dt`. The dual is maximized
//! by damped Newton steps with integrals evaluated by tensor Gauss–Legendre rules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::marginal::MarginalMoments;
use crate::momentstruct::MomentSequence;
use crate::polyalg::{basis_size, enumerate_basis, MultiIndex, Polynomial};
use crate::problem::{MarginalSpec, ParametricProblem};
use crate::quadrature::QuadratureRule;
use crate::relaxation::{solve_relaxation, SdpBackend, SolveStatus};

/// Nodes per dimension of the default rule.
pub const DEFAULT_NODES: usize = 64;
/// Largest supported total degree `2d`.
pub const MAX_DEGREE: usize = 10;
const EXP_LIMIT: f64 = 700.0;

/// Moments of `ĝ_k = x*_k - a_k` on the unit box.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTarget {
    /// Coordinate index (0-based).
    pub k: usize,
    /// Lower bound `a_k` that was subtracted.
    pub shift: f64,
    pub p: usize,
    /// `u_β` in graded order of the `p`-variate basis.
    pub u: Vec<f64>,
    /// Original parameter box that was mapped onto `[0, 1]^p`.
    pub domain: Vec<(f64, f64)>,
}

impl MomentTarget {
    /// Target given directly on the unit box with no shift.
    pub fn on_unit_box(p: usize, u: Vec<f64>) -> Self {
        MomentTarget {
            k: 0,
            shift: 0.0,
            p,
            u,
            domain: vec![(0.0, 1.0); p],
        }
    }
}

/// `h*(y) = exp(Σ λ_β t(y)^β)` with `t` the normalized coordinate of `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityEstimate {
    pub lambda: Vec<f64>,
    pub basis: Vec<MultiIndex>,
    /// Total degree `2d`.
    pub degree: usize,
    pub domain: Vec<(f64, f64)>,
    pub shift: f64,
}

impl DensityEstimate {
    /// Exponent polynomial in the normalized coordinates.
    pub fn exponent(&self) -> Polynomial {
        let p = self.domain.len();
        Polynomial::from_terms(0, p, self.basis.iter().cloned().zip(self.lambda.iter().copied()))
            .expect("basis matches dimension")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tolerance: 1e-10,
            max_iterations: 200,
            max_halvings: 50,
        }
    }
}

/// Per-iteration record of a fit.
#[derive(Clone, Debug, Default)]
pub struct FitTrace {
    pub values: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    /// Largest Hessian eigenvalue at each iterate.
    pub hessian_max_eigs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MaxentFit {
    pub estimate: DensityEstimate,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub trace: FitTrace,
}

/// Dual value, gradient and Hessian of the entropy problem for a rule on the unit box.
pub struct EntropyDual<'a> {
    u: &'a [f64],
    weights: &'a [f64],
    // monomial values, one row per quadrature point
    design: DMatrix<f64>,
}

impl<'a> EntropyDual<'a> {
    pub fn new(u: &'a [f64], basis: &[MultiIndex], rule: &'a QuadratureRule) -> Self {
        let design = DMatrix::from_fn(rule.len(), basis.len(), |q, j| {
            basis[j]
                .exponents()
                .iter()
                .zip(&rule.points[q])
                .map(|(&e, &t)| t.powi(e as i32))
                .product()
        });
        EntropyDual {
            u,
            weights: &rule.weights,
            design,
        }
    }

    // w_q · exp(poly_λ(t_q)) at every node
    fn weighted_density(&self, lambda: &[f64]) -> Result<DVector<f64>> {
        let exponents = &self.design * DVector::from_column_slice(lambda);
        let mut out = DVector::zeros(exponents.len());
        for (q, e) in exponents.iter().enumerate() {
            if !e.is_finite() || *e > EXP_LIMIT {
                return Err(Error::ExpOverflow);
            }
            out[q] = self.weights[q] * e.exp();
        }
        Ok(out)
    }

    pub fn value(&self, lambda: &[f64]) -> Result<f64> {
        let wd = self.weighted_density(lambda)?;
        let lin: f64 = self.u.iter().zip(lambda).map(|(u, l)| u * l).sum();
        Ok(lin - wd.sum())
    }

    /// Quadrature moments `∫ t^β h_λ(t) dt`.
    pub fn moments(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        let wd = self.weighted_density(lambda)?;
        Ok((self.design.transpose() * wd).iter().copied().collect())
    }

    pub fn value_grad_hess(&self, lambda: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let wd = self.weighted_density(lambda)?;
        let lin: f64 = self.u.iter().zip(lambda).map(|(u, l)| u * l).sum();
        let value = lin - wd.sum();
        let moments = self.design.transpose() * &wd;
        let grad = DVector::from_column_slice(self.u) - moments;
        let mut scaled = self.design.clone();
        for (q, mut row) in scaled.row_iter_mut().enumerate() {
            row *= wd[q];
        }
        let hess = -(self.design.transpose() * scaled);
        Ok((value, grad, hess))
    }
}

/// `(v(λ), ∇v(λ), ∇²v(λ))` for univariate or bivariate targets on the unit box.
pub fn dual_value_grad_hess(
    lambda: &[f64],
    u: &[f64],
    p: usize,
    rule: &QuadratureRule,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let basis = target_basis(p, u.len())?;
    if lambda.len() != u.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            found: lambda.len(),
        });
    }
    EntropyDual::new(u, &basis, rule).value_grad_hess(lambda)
}

// graded basis whose size matches the moment vector
fn target_basis(p: usize, len: usize) -> Result<Vec<MultiIndex>> {
    if p == 0 || p > 2 {
        return Err(Error::Unsupported(format!(
            "maximum-entropy fits support 1 or 2 parameters, got {p}"
        )));
    }
    let degree = (0..=MAX_DEGREE)
        .find(|&d| basis_size(p, d) == len)
        .ok_or_else(|| {
            Error::Invalid(format!(
                "{len} moments do not form a complete basis of degree <= {MAX_DEGREE} in {p} variables"
            ))
        })?;
    Ok(enumerate_basis(0, p, degree))
}

/// Maximum-entropy fit of degree `2·half_degree`.
pub fn maxent_fit(
    target: &MomentTarget,
    half_degree: usize,
    rule: &QuadratureRule,
    config: &NewtonConfig,
) -> Result<MaxentFit> {
    let degree = 2 * half_degree;
    if degree > MAX_DEGREE {
        return Err(Error::Unsupported(format!(
            "density degree {degree} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    let basis = target_basis(target.p, target.u.len())?;
    if basis.last().map_or(0, |b| b.degree() as usize) != degree {
        return Err(Error::Dimension {
            expected: basis_size(target.p, degree),
            found: target.u.len(),
        });
    }
    if rule.points.first().map(Vec::len) != Some(target.p) {
        return Err(Error::Invalid("quadrature rule dimension does not match the target".into()));
    }
    if !(target.u[0] > 0.0) {
        return Err(Error::Invalid(format!(
            "target mass u_0 = {} must be positive",
            target.u[0]
        )));
    }

    let dual = EntropyDual::new(&target.u, &basis, rule);
    let mut lambda = vec![0.0; basis.len()];
    lambda[0] = target.u[0].ln();
    let mut trace = FitTrace::default();
    let (mut value, mut grad, mut hess) = dual.value_grad_hess(&lambda)?;

    for iter in 0..=config.max_iterations {
        let gnorm = grad.amax();
        trace.values.push(value);
        trace.gradient_norms.push(gnorm);
        trace.hessian_max_eigs.push(hess.clone().symmetric_eigenvalues().max());
        if gnorm <= config.tolerance {
            return Ok(MaxentFit {
                estimate: DensityEstimate {
                    lambda,
                    basis,
                    degree,
                    domain: target.domain.clone(),
                    shift: target.shift,
                },
                iterations: iter,
                gradient_norm: gnorm,
                trace,
            });
        }
        if iter == config.max_iterations {
            break;
        }
        let step = newton_direction(&hess, &grad)?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let trial: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, s)| l + t * s).collect();
            if let Ok(v) = dual.value(&trial) {
                // near the optimum the increase drops below rounding of v
                if v >= value || (v >= value - 1e-14 * value.abs().max(1.0) && t == 1.0) {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(Error::ExpOverflow);
        };
        lambda = next;
        (value, grad, hess) = dual.value_grad_hess(&lambda)?;
    }
    Err(Error::NotConverged {
        iterations: config.max_iterations,
        residual: grad.amax(),
    })
}

// Newton step -H⁻¹g; H is negative definite up to quadrature rounding
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let a = -hess;
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(grad));
    }
    let ridge = 1e-14 * a.diagonal().amax();
    let regularized = &a + DMatrix::identity(a.nrows(), a.ncols()) * ridge;
    regularized
        .cholesky()
        .map(|ch| ch.solve(grad))
        .ok_or_else(|| Error::Invalid("entropy Hessian is numerically singular".into()))
}

fn normalize(y: &[f64], domain: &[(f64, f64)]) -> Result<Vec<f64>> {
    if y.len() != domain.len() {
        return Err(Error::Dimension {
            expected: domain.len(),
            found: y.len(),
        });
    }
    let eps = 1e-12;
    y.iter()
        .zip(domain)
        .map(|(&v, &(a, b))| {
            let t = (v - a) / (b - a);
            if (-eps..=1.0 + eps).contains(&t) {
                Ok(t.clamp(0.0, 1.0))
            } else {
                Err(Error::OutOfDomain(y.to_vec()))
            }
        })
        .collect()
}

/// `h*(y)`; always positive.
pub fn density_eval(est: &DensityEstimate, y: &[f64]) -> Result<f64> {
    let t = normalize(y, &est.domain)?;
    let e: f64 = est
        .basis
        .iter()
        .zip(&est.lambda)
        .map(|(b, l)| {
            l * b
                .exponents()
                .iter()
                .zip(&t)
                .map(|(&k, &v)| v.powi(k as i32))
                .product::<f64>()
        })
        .sum();
    Ok(e.exp())
}

/// Estimate of the coordinate `x*_k(y) = h*(y) + a_k`.
pub fn coordinate_estimate(est: &DensityEstimate, y: &[f64]) -> Result<f64> {
    Ok(density_eval(est, y)? + est.shift)
}

/// Moments `u_β = -a_k γ_β + z_{e(k)β}` for `|β| <= 2d`, transformed to the unit box.
///
/// `domain` is the box of `Y`; when `φ` is uniform on it the fitted density
/// approximates `ĝ_k` itself.
pub fn shifted_moments(
    z: &MomentSequence,
    gamma: &MarginalMoments,
    k: usize,
    shift: f64,
    half_degree: usize,
    domain: &[(f64, f64)],
) -> Result<MomentTarget> {
    let (n, p) = (z.n(), z.p());
    if k >= n {
        return Err(Error::Invalid(format!("coordinate x{} does not exist", k + 1)));
    }
    if domain.len() != p {
        return Err(Error::Dimension {
            expected: p,
            found: domain.len(),
        });
    }
    let degree = 2 * half_degree;
    if degree + 1 > 2 * z.order() {
        return Err(Error::DegreeOverflow {
            degree: degree + 1,
            limit: 2 * z.order(),
        });
    }
    let betas = enumerate_basis(0, p, degree);
    let mut alpha = vec![0u32; n];
    alpha[k] = 1;
    let raw = betas
        .iter()
        .map(|b| {
            let g = gamma.get(b.exponents()).ok_or_else(|| Error::MissingMoment(b.exponents().to_vec()))?;
            Ok(-shift * g + z.get_joint(&alpha, b.exponents())?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let u = to_unit_box(&betas, &raw, domain);
    Ok(MomentTarget {
        k,
        shift,
        p,
        u,
        domain: domain.to_vec(),
    })
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * f64::from(n - j) / f64::from(j + 1))
}

// moments of t = (y - a) / (b - a) from moments in y
fn to_unit_box(betas: &[MultiIndex], raw: &[f64], domain: &[(f64, f64)]) -> Vec<f64> {
    if domain.iter().all(|&(a, b)| a == 0.0 && b == 1.0) {
        return raw.to_vec();
    }
    let lookup = |e: &[u32]| raw[crate::polyalg::graded_rank(&MultiIndex::new(e.to_vec()))];
    betas
        .iter()
        .map(|alpha| {
            let ex = alpha.exponents();
            let mut total = 0.0;
            // κ ranges over all multi-indices below α
            for kappa in enumerate_basis(0, ex.len(), alpha.degree() as usize) {
                let kx = kappa.exponents();
                if kx.iter().zip(ex).any(|(k, a)| k > a) {
                    continue;
                }
                let coef: f64 = kx
                    .iter()
                    .zip(ex)
                    .zip(domain)
                    .map(|((&kk, &aa), &(lo, hi))| {
                        binom(aa, kk) * (-lo).powi((aa - kk) as i32) / (hi - lo).powi(aa as i32)
                    })
                    .product();
                total += coef * lookup(kx);
            }
            total
        })
        .collect()
}

/// Lower bound on `x_k` over `K`: the relaxation value of `min x_k`, minus `1e-6`.
///
/// The auxiliary problem treats the parameters as free variables restricted
/// only by their constraints; keeping the marginal fixed would instead bound
/// the `φ`-average of the pointwise minima.
pub fn lower_bound_for_shift(
    prob: &ParametricProblem,
    k: usize,
    order: usize,
    backend: &dyn SdpBackend,
) -> Result<f64> {
    let (n, p) = (prob.n(), prob.p());
    if k >= n {
        return Err(Error::Invalid(format!("coordinate x{} does not exist", k + 1)));
    }
    let flat = |q: &Polynomial| Polynomial::from_terms(n + p, 0, q.terms().map(|(i, c)| (i.clone(), c)));
    let mut aux = ParametricProblem::new(
        n + p,
        0,
        Polynomial::x(n + p, 0, k),
        MarginalSpec::UniformBox(Vec::new()),
    );
    for c in prob.all_constraints() {
        let h = flat(&c.poly)?;
        aux = if c.is_equality() {
            aux.with_equality(h)
        } else {
            aux.with_inequality(h)
        };
    }
    let mass = MarginalMoments::from_values(0, 2 * order, vec![1.0])?;
    let sol = solve_relaxation(&aux, &mass, order, backend)?;
    match (sol.status, sol.rho) {
        (SolveStatus::Optimal, Some(rho)) => Ok(rho - 1e-6),
        (status, _) => Err(Error::Backend {
            order,
            message: format!("auxiliary bound for x{} ended {}", k + 1, status.as_str()),
        }),
    }
}

/// CSV rows `y, h(y)` (one column per parameter) on the given points.
pub fn density_csv(est: &DensityEstimate, points: &[Vec<f64>]) -> Result<String> {
    let mut out = String::new();
    let p = est.domain.len();
    let header: Vec<String> = (1..=p).map(|j| format!("y{j}")).collect();
    out.push_str(&format!("{},h\n", header.join(",")));
    for y in points {
        let h = density_eval(est, y)?;
        let cols: Vec<String> = y.iter().map(|v| crate::format::num(*v)).collect();
        out.push_str(&format!("{},{}\n", cols.join(","), crate::format::num(h)));
    }
    Ok(out)
}

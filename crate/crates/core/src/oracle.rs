//! Pointwise reference solutions of `J(y) = inf_x { f(x, y) : (x, y) ∈ K }`.
//!
//! Each solve draws uniform samples in a bounding box for `x`, pulls every
//! sample onto the feasible set by Gauss–Newton steps on the violated (and
//! equality) constraints, and refines the best distinct feasible points by a
//! coordinate search whose trial points are restored the same way. Nothing
//! here touches the SDP pipeline.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::num;
use crate::polyalg::Polynomial;
use crate::problem::{MarginalSpec, ParametricProblem};
use crate::quadrature::{gauss_legendre_rule, QuadratureRule};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    /// Uniform samples per parameter value.
    pub samples: usize,
    /// Distinct feasible samples refined by local descent.
    pub refine: usize,
    /// Maximum coordinate-search sweeps per refinement.
    pub descent_iterations: usize,
    pub seed: u64,
    /// Sampling box for `x`; defaults to `[-search_radius, search_radius]^n`.
    pub search_box: Option<Vec<(f64, f64)>>,
    pub search_radius: f64,
    pub feasibility_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            samples: 512,
            refine: 32,
            descent_iterations: 200,
            seed: 0,
            search_box: None,
            search_radius: 2.0,
            feasibility_tol: 1e-9,
        }
    }
}

impl OracleConfig {
    fn sampling_box(&self, n: usize) -> Vec<(f64, f64)> {
        self.search_box
            .clone()
            .unwrap_or_else(|| vec![(-self.search_radius, self.search_radius); n])
    }
}

/// Polynomial flattened for fast repeated evaluation.
#[derive(Clone, Debug)]
struct Compiled {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl Compiled {
    fn new(f: &Polynomial) -> Self {
        let terms = f
            .terms()
            .map(|(idx, c)| {
                let factors = idx
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(v, &e)| (v, e as i32))
                    .collect();
                (c, factors)
            })
            .collect();
        Compiled { terms }
    }

    fn eval(&self, pt: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, factors)| factors.iter().fold(*c, |acc, &(v, e)| acc * pt[v].powi(e)))
            .sum()
    }

    // partial derivative with respect to variable `var`
    fn derivative(f: &Polynomial, var: usize) -> Self {
        let mut d = Polynomial::zero(f.n(), f.p());
        for (idx, c) in f.terms() {
            let e = idx.exponents()[var];
            if e > 0 {
                let mut ex = idx.exponents().to_vec();
                ex[var] -= 1;
                d.add_term(crate::polyalg::MultiIndex::new(ex), c * f64::from(e));
            }
        }
        Compiled::new(&d)
    }
}

struct CompiledConstraint {
    value: Compiled,
    grad: Vec<Compiled>,
    equality: bool,
}

/// Problem with every polynomial compiled once.
struct PointProblem {
    n: usize,
    objective: Compiled,
    constraints: Vec<CompiledConstraint>,
}

impl PointProblem {
    fn new(prob: &ParametricProblem) -> Self {
        let n = prob.n();
        let constraints = prob
            .joint_constraints()
            .iter()
            .map(|c| CompiledConstraint {
                value: Compiled::new(&c.poly),
                grad: (0..n).map(|k| Compiled::derivative(&c.poly, k)).collect(),
                equality: c.is_equality(),
            })
            .collect();
        PointProblem {
            n,
            objective: Compiled::new(prob.objective()),
            constraints,
        }
    }

    fn violation(&self, pt: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let h = c.value.eval(pt);
                if c.equality {
                    h.abs()
                } else {
                    (-h).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Gauss–Newton projection onto the equalities and violated inequalities.
    fn restore(&self, pt: &mut [f64], tol: f64) -> bool {
        for _ in 0..60 {
            let mut rows = Vec::new();
            let mut resid = Vec::new();
            let mut worst: f64 = 0.0;
            for c in &self.constraints {
                let h = c.value.eval(pt);
                let active = c.equality || h < 0.0;
                if !active {
                    continue;
                }
                worst = worst.max(h.abs());
                // aim slightly inside violated inequalities so rounding keeps them satisfied
                let target = if c.equality { 0.0 } else { 0.1 * tol };
                resid.push(h - target);
                rows.push(c.grad.iter().map(|g| g.eval(pt)).collect::<Vec<f64>>());
            }
            if worst <= tol {
                return true;
            }
            let m = rows.len();
            let jac = DMatrix::from_fn(m, self.n, |i, k| rows[i][k]);
            let gram = &jac * jac.transpose();
            let ridge = 1e-14 * gram.diagonal().amax().max(1e-300);
            let reg = gram + DMatrix::identity(m, m) * ridge;
            let Some(ch) = reg.cholesky() else {
                return false;
            };
            let step = jac.transpose() * ch.solve(&DVector::from_vec(resid));
            if !step.iter().all(|v| v.is_finite()) {
                return false;
            }
            for k in 0..self.n {
                pt[k] -= step[k];
            }
        }
        self.violation(pt) <= tol
    }
}

/// Result of one pointwise solve.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSolution {
    pub y: Vec<f64>,
    pub value: f64,
    pub x: Vec<f64>,
    /// Another feasible point within `1e-6` in value but more than `1e-3` away was found.
    pub tie: bool,
}

fn descend(pp: &PointProblem, pt: &mut Vec<f64>, width: f64, cfg: &OracleConfig) -> f64 {
    let tol = cfg.feasibility_tol;
    let mut fx = pp.objective.eval(pt);
    let mut step = 0.1 * width;
    let mut trial = pt.clone();
    for _ in 0..cfg.descent_iterations {
        let mut improved = false;
        for k in 0..pp.n {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(pt);
                trial[k] += dir * step;
                if !pp.restore(&mut trial, tol) {
                    continue;
                }
                let ft = pp.objective.eval(&trial);
                if ft < fx {
                    pt.copy_from_slice(&trial);
                    fx = ft;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-13 * width.max(1.0) {
                break;
            }
        }
    }
    fx
}

/// Best feasible point found for the parameter value `y`.
pub fn solve_pointwise(
    prob: &ParametricProblem,
    y: &[f64],
    config: &OracleConfig,
    stream: u64,
) -> Result<PointSolution> {
    solve_compiled(&PointProblem::new(prob), y, config, stream)
}

fn solve_compiled(pp: &PointProblem, y: &[f64], config: &OracleConfig, stream: u64) -> Result<PointSolution> {
    let n = pp.n;
    let bx = config.sampling_box(n);
    let width = bx.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(stream));

    let mut starts: Vec<(f64, Vec<f64>)> = Vec::new();
    for _ in 0..config.samples {
        let mut pt: Vec<f64> = bx.iter().map(|&(a, b)| rng.gen_range(a..=b)).collect();
        pt.extend_from_slice(y);
        if pp.restore(&mut pt, config.feasibility_tol) {
            starts.push((pp.objective.eval(&pt), pt));
        }
    }
    if starts.is_empty() {
        return Err(Error::InfeasibleAt(y.to_vec()));
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut chosen: Vec<Vec<f64>> = Vec::new();
    for (_, pt) in &starts {
        if chosen.len() >= config.refine {
            break;
        }
        if chosen.iter().all(|c| dist(&c[..n], &pt[..n]) > 1e-3) {
            chosen.push(pt.clone());
        }
    }

    let mut optima: Vec<(f64, Vec<f64>)> = chosen
        .into_iter()
        .map(|mut pt| {
            let mut v = descend(pp, &mut pt, width, config);
            // tighten active constraints so the value is not biased by the feasibility slack
            let mut polished = pt.clone();
            if pp.restore(&mut polished, 1e-14) {
                v = pp.objective.eval(&polished);
                pt = polished;
            }
            (v, pt)
        })
        .collect();
    optima.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (best, best_pt) = optima[0].clone();
    let tie = optima[1..]
        .iter()
        .any(|(v, pt)| (v - best).abs() <= 1e-6 && dist(&pt[..n], &best_pt[..n]) > 1e-3);
    Ok(PointSolution {
        y: y.to_vec(),
        value: best,
        x: best_pt[..n].to_vec(),
        tie,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Pointwise solutions on a set of parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub points: Vec<PointSolution>,
}

impl OracleResult {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|s| s.value).collect()
    }

    /// CSV rows `y_1..y_p, J(y), x*_1(y)..x*_n(y), tie_flag`.
    pub fn to_csv(&self) -> String {
        let Some(first) = self.points.first() else {
            return String::new();
        };
        let mut header: Vec<String> = (1..=first.y.len()).map(|j| format!("y{j}")).collect();
        header.push("J".into());
        header.extend((1..=first.x.len()).map(|k| format!("x{k}")));
        header.push("tie".into());
        let mut out = header.join(",") + "\n";
        for s in &self.points {
            let mut row: Vec<String> = s.y.iter().map(|v| num(*v)).collect();
            row.push(num(s.value));
            row.extend(s.x.iter().map(|v| num(*v)));
            row.push(u8::from(s.tie).to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Solves every grid point in parallel; point `i` uses random stream `seed + i`.
pub fn solve_grid(prob: &ParametricProblem, grid: &[Vec<f64>], config: &OracleConfig) -> Result<OracleResult> {
    let pp = PointProblem::new(prob);
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, y)| solve_compiled(&pp, y, config, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleResult { points })
}

/// `size` equally spaced points per parameter over the parameter box (tensor grid).
pub fn uniform_grid(prob: &ParametricProblem, size: usize) -> Result<Vec<Vec<f64>>> {
    let bx = prob
        .param_box()
        .ok_or_else(|| Error::Unsupported("grids need a box or simplex parameter set".into()))?;
    let axis = |(a, b): (f64, f64)| -> Vec<f64> {
        if size == 1 {
            return vec![0.5 * (a + b)];
        }
        (0..size)
            .map(|i| a + (b - a) * i as f64 / (size - 1) as f64)
            .collect()
    };
    let mut grid = vec![Vec::new()];
    for &interval in &bx {
        let ax = axis(interval);
        grid = grid
            .into_iter()
            .flat_map(|pt| {
                ax.iter().map(move |&v| {
                    let mut q = pt.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    if matches!(prob.marginal(), MarginalSpec::UniformSimplex) {
        grid.retain(|pt| pt.iter().sum::<f64>() <= 1.0 + 1e-12);
    }
    Ok(grid)
}

/// Quadrature rule for `φ` (weights sum to one).
pub fn marginal_rule(prob: &ParametricProblem, nodes: usize) -> Result<QuadratureRule> {
    let p = prob.p();
    if p == 0 || p > 2 {
        return Err(Error::Unsupported(format!("oracle integration needs 1 or 2 parameters, got {p}")));
    }
    match prob.marginal() {
        MarginalSpec::UniformBox(bounds) => {
            let mut rule = QuadratureRule::tensor_gauss_legendre(nodes, bounds)?;
            let vol: f64 = bounds.iter().map(|(a, b)| b - a).product();
            rule.weights.iter_mut().for_each(|w| *w /= vol);
            Ok(rule)
        }
        MarginalSpec::UniformSimplex if p == 1 => QuadratureRule::tensor_gauss_legendre(nodes, &[(0.0, 1.0)]),
        MarginalSpec::UniformSimplex => {
            // collapsed coordinates y1 = u, y2 = (1 - u) v; density 2 on the triangle
            let (x, w) = gauss_legendre_rule(nodes, (0.0, 1.0))?;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    points.push(vec![*u, (1.0 - u) * v]);
                    weights.push(2.0 * wu * wv * (1.0 - u));
                }
            }
            Ok(QuadratureRule { points, weights })
        }
        MarginalSpec::Explicit(_) => Err(Error::Unsupported(
            "explicit moment tables carry no density to integrate against".into(),
        )),
    }
}

/// `ρ_ref = ∫_Y J dφ` by Gauss–Legendre quadrature of pointwise solves.
pub fn integrate_value_function(prob: &ParametricProblem, nodes: usize, config: &OracleConfig) -> Result<f64> {
    let rule = marginal_rule(prob, nodes)?;
    let sol = solve_grid(prob, &rule.points, config)?;
    Ok(sol.points.iter().zip(&rule.weights).map(|(s, w)| w * s.value).sum())
}

/// `∫_Y y^β x*_k(y) dφ(y)` for each requested `β` (single parameter only).
///
/// Nodes where the minimizer is not unique are left out.
pub fn reference_coordinate_moments(
    prob: &ParametricProblem,
    k: usize,
    degrees: &[u32],
    nodes: usize,
    config: &OracleConfig,
) -> Result<Vec<f64>> {
    if prob.p() != 1 {
        return Err(Error::Unsupported("reference coordinate moments need a single parameter".into()));
    }
    if k >= prob.n() {
        return Err(Error::Invalid(format!("coordinate x{} does not exist", k + 1)));
    }
    let rule = marginal_rule(prob, nodes)?;
    let sol = solve_grid(prob, &rule.points, config)?;
    Ok(degrees
        .iter()
        .map(|&b| {
            sol.points
                .iter()
                .zip(&rule.weights)
                .filter(|(s, _)| !s.tie)
                .map(|(s, w)| w * s.y[0].powi(b as i32) * s.x[k])
                .sum()
        })
        .collect())
}

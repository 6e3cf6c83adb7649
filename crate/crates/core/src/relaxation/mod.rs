//! Moment relaxations of the joint+marginal problem and their SOS duals.
//!
//! The primal relaxation of order `i` is
//!
//! ```text
//! ρ_i = min L_z(f)  s.t.  M_i(z) ⪰ 0,  M_{i-v_j}(h_j z) ⪰ 0,  L_z(y^β) = γ_β  (|β| <= 2i)
//! ```
//!
//! and its dual maximizes `∫ p dφ` over `p ∈ R[y]_{2i}` with `f - p = σ_0 + Σ σ_j h_j`.
//! The multipliers of the marginal equalities are the coefficients of `p`, so
//! both programs yield a polynomial lower bound `p_i(y) <= J(y)`.
//!
//! An equality `h = 0` enters the primal as the rows `L_z(h x^m) = 0` and the
//! explicit SOS program as a mirrored pair of Gram blocks; both describe a free
//! multiplier `τ h` with `deg τ <= 2(i - v)`.

pub mod backend;
pub mod conic_format;
mod scaling;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::marginal::MarginalMoments;
use crate::momentstruct::{
    build_localizing_matrix, build_moment_matrix, LinearForm, MomentSequence, StructuredMatrix,
};
use crate::polyalg::{basis_size, enumerate_basis, graded_rank, MultiIndex, Polynomial};
use crate::problem::ParametricProblem;
use scaling::VariableScaling;

pub use backend::{BackendSolution, Capability, ClarabelBackend, SdpBackend, SolveStatus};

/// `min objective·v` subject to `equalities` and every block being PSD.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: LinearForm,
    pub psd_blocks: Vec<StructuredMatrix>,
    pub equalities: Vec<(LinearForm, f64)>,
}

impl ConicProgram {
    /// Checks that every referenced position exists and all data is finite.
    pub fn check(&self) -> Result<()> {
        let forms = std::iter::once(&self.objective)
            .chain(self.equalities.iter().map(|(f, _)| f))
            .chain(self.psd_blocks.iter().flat_map(|b| {
                (0..b.side()).flat_map(move |r| (0..b.side()).map(move |c| b.entry(r, c)))
            }));
        for form in forms {
            if let Some(max) = form.max_position() {
                if max >= self.num_vars {
                    return Err(Error::Dimension {
                        expected: self.num_vars,
                        found: max + 1,
                    });
                }
            }
            if form.terms().iter().any(|(_, c)| !c.is_finite()) {
                return Err(Error::Invalid("non-finite coefficient".into()));
            }
        }
        if self.equalities.iter().any(|(_, b)| !b.is_finite()) {
            return Err(Error::Invalid("non-finite right-hand side".into()));
        }
        Ok(())
    }
}

/// Which constraint a PSD block localizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockRole {
    Moment,
    /// Index into `h_1..h_t` (joint constraints first); `sign` is `-1` for the
    /// mirrored block of an equality.
    Localizing { constraint: usize, sign: f64 },
}

/// Assembled primal relaxation plus the bookkeeping needed to read its solution.
#[derive(Clone, Debug)]
pub struct PrimalRelaxation {
    pub order: usize,
    pub n: usize,
    pub p: usize,
    pub program: ConicProgram,
    pub roles: Vec<BlockRole>,
    /// `β` of each marginal equality, in program order.
    pub marginal_rows: Vec<MultiIndex>,
    /// `(constraint, m)` of each row `L_z(h · x^m) = 0` following the marginal rows.
    pub equality_rows: Vec<(usize, MultiIndex)>,
}

fn check_order(prob: &ParametricProblem, gamma: &MarginalMoments, order: usize) -> Result<()> {
    let minimum = prob.min_relaxation_order();
    if order < minimum || order == 0 {
        return Err(Error::OrderTooSmall {
            order,
            minimum: minimum.max(1),
        });
    }
    if gamma.p() != prob.p() {
        return Err(Error::Dimension {
            expected: prob.p(),
            found: gamma.p(),
        });
    }
    if gamma.max_degree() < 2 * order {
        return Err(Error::DegreeOverflow {
            degree: 2 * order,
            limit: gamma.max_degree(),
        });
    }
    Ok(())
}

// (constraint polynomial, half-degree of its block, role) for every localizing block;
// equalities get a mirrored pair of blocks only when `mirror_equalities` is set
fn localizing_blocks(
    prob: &ParametricProblem,
    order: usize,
    mirror_equalities: bool,
) -> Vec<(Polynomial, usize, BlockRole)> {
    let mut out = Vec::new();
    for (k, c) in prob.all_constraints().enumerate() {
        if c.is_equality() && !mirror_equalities {
            continue;
        }
        let half = order - c.half_degree();
        out.push((
            c.poly.clone(),
            half,
            BlockRole::Localizing {
                constraint: k,
                sign: 1.0,
            },
        ));
        if c.is_equality() {
            out.push((
                c.poly.scale(-1.0),
                half,
                BlockRole::Localizing {
                    constraint: k,
                    sign: -1.0,
                },
            ));
        }
    }
    out
}

/// Primal moment relaxation of order `order`.
pub fn assemble_primal(
    prob: &ParametricProblem,
    gamma: &MarginalMoments,
    order: usize,
) -> Result<PrimalRelaxation> {
    check_order(prob, gamma, order)?;
    let (n, p) = (prob.n(), prob.p());
    let num_vars = basis_size(n + p, 2 * order);

    let mut objective = LinearForm::new();
    for (idx, c) in prob.objective().terms() {
        objective.push(graded_rank(idx), c);
    }

    let mut psd_blocks = vec![build_moment_matrix(n, p, order, order)?];
    let mut roles = vec![BlockRole::Moment];
    for (q, half, role) in localizing_blocks(prob, order, false) {
        psd_blocks.push(build_localizing_matrix(&q, n, p, half, order)?);
        roles.push(role);
    }

    let mut equalities = Vec::new();
    let mut marginal_rows = Vec::new();
    for (beta, g) in gamma.truncate(2 * order)?.iter() {
        let idx = MultiIndex::joint(&vec![0; n], beta.exponents());
        equalities.push((LinearForm::single(graded_rank(&idx), 1.0), g));
        marginal_rows.push(beta);
    }

    // M_{i-v}(h z) = 0 holds iff every distinct entry L_z(h x^m), |m| <= 2(i - v), vanishes
    let mut equality_rows = Vec::new();
    for (k, c) in prob.all_constraints().enumerate() {
        if !c.is_equality() {
            continue;
        }
        for m in enumerate_basis(n, p, 2 * (order - c.half_degree())) {
            let mut row = LinearForm::new();
            for (idx, coef) in c.poly.terms() {
                row.push(graded_rank(&idx.add(&m)), coef);
            }
            equalities.push((row, 0.0));
            equality_rows.push((k, m));
        }
    }

    Ok(PrimalRelaxation {
        order,
        n,
        p,
        program: ConicProgram {
            num_vars,
            objective,
            psd_blocks,
            equalities,
        },
        roles,
        marginal_rows,
        equality_rows,
    })
}

/// Gram matrix of one SOS multiplier, tagged with the block it came from.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub role: BlockRole,
    pub gram: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct RelaxationSolution {
    pub order: usize,
    pub status: SolveStatus,
    /// `ρ_i`; `None` unless optimal.
    pub rho: Option<f64>,
    pub z: Option<MomentSequence>,
    /// `p_i(y)` as a polynomial with no decision variables.
    pub dual_poly: Option<Polynomial>,
    /// `∫ p_i dφ`.
    pub dual_objective: Option<f64>,
    pub certificates: Vec<Certificate>,
    /// Free polynomial multiplier `τ_k` of each equality constraint `h_k = 0`.
    pub equality_multipliers: Vec<(usize, Polynomial)>,
    pub solver_tolerance: f64,
}

impl RelaxationSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Dual objects read off the multipliers of a primal solve.
#[derive(Clone, Debug)]
pub struct RecoveredDual {
    /// `p(y) = Σ_β λ_β y^β` from the marginal-equality multipliers.
    pub poly: Polynomial,
    pub certificates: Vec<Certificate>,
    pub equality_multipliers: Vec<(usize, Polynomial)>,
}

/// Recovers `p` and the SOS certificate from the primal multipliers.
///
/// With the backend's multiplier convention the stationarity condition reads
/// `f - p = Σ_j M_j*(Y_j) + Σ_k τ_k h_k`, i.e. `f - p = σ_0 + Σ σ_j h_j + Σ τ_k h_k`
/// with the block multipliers as Gram matrices, and `∫ p dφ` is the dual objective.
pub fn recover_dual_from_primal(
    relaxation: &PrimalRelaxation,
    solution: &BackendSolution,
) -> Result<RecoveredDual> {
    let m = relaxation.marginal_rows.len();
    if solution.equality_multipliers.len() != m + relaxation.equality_rows.len()
        || solution.block_multipliers.len() != relaxation.roles.len()
    {
        return Err(Error::MultipliersUnavailable);
    }
    let (n, p) = (relaxation.n, relaxation.p);
    let mut poly = Polynomial::zero(0, p);
    for (beta, &lambda) in relaxation.marginal_rows.iter().zip(&solution.equality_multipliers) {
        poly.add_term(beta.clone(), lambda);
    }
    let mut equality_multipliers: Vec<(usize, Polynomial)> = Vec::new();
    for ((k, mono), &lambda) in relaxation.equality_rows.iter().zip(&solution.equality_multipliers[m..]) {
        if equality_multipliers.last().map(|(j, _)| j) != Some(k) {
            equality_multipliers.push((*k, Polynomial::zero(n, p)));
        }
        let tau = &mut equality_multipliers.last_mut().expect("pushed above").1;
        tau.add_term(mono.clone(), lambda);
    }
    let certificates = merge_certificates(&relaxation.roles, &solution.block_multipliers);
    Ok(RecoveredDual {
        poly,
        certificates,
        equality_multipliers,
    })
}

// one Gram matrix per constraint: mirrored equality blocks collapse to Y+ - Y-
fn merge_certificates(roles: &[BlockRole], grams: &[DMatrix<f64>]) -> Vec<Certificate> {
    let mut out: Vec<Certificate> = Vec::new();
    for (role, gram) in roles.iter().zip(grams) {
        match *role {
            BlockRole::Localizing { constraint, sign } if sign < 0.0 => {
                if let Some(prev) = out.iter_mut().find(|c| {
                    matches!(c.role, BlockRole::Localizing { constraint: k, .. } if k == constraint)
                }) {
                    prev.gram -= gram;
                }
            }
            _ => out.push(Certificate {
                role: *role,
                gram: gram.clone(),
            }),
        }
    }
    out
}

// half-degree of the basis indexing the Gram matrix of a block
fn block_half_degree(prob: &ParametricProblem, order: usize, role: &BlockRole) -> usize {
    match *role {
        BlockRole::Moment => order,
        BlockRole::Localizing { constraint, .. } => {
            order - prob.all_constraints().nth(constraint).map_or(0, |c| c.half_degree())
        }
    }
}

fn certificates_back(
    s: &VariableScaling,
    prob: &ParametricProblem,
    order: usize,
    certs: Vec<Certificate>,
) -> Result<Vec<Certificate>> {
    certs
        .into_iter()
        .map(|c| {
            let half = block_half_degree(prob, order, &c.role);
            Ok(Certificate {
                role: c.role,
                gram: s.gram_back(&c.gram, prob.p(), half)?,
            })
        })
        .collect()
}

/// Solves the primal relaxation at one order and recovers its dual polynomial.
///
/// When the parameter box is known the program is solved in coordinates
/// centered on `[-1, 1]^p`; moments, `p_i` and certificates are mapped back.
pub fn solve_relaxation(
    prob: &ParametricProblem,
    gamma: &MarginalMoments,
    order: usize,
    backend: &dyn SdpBackend,
) -> Result<RelaxationSolution> {
    match VariableScaling::for_problem(prob) {
        None => solve_relaxation_as_given(prob, gamma, order, backend),
        Some(s) => {
            let mut sol = solve_relaxation_as_given(&s.problem(prob)?, &s.marginal(gamma)?, order, backend)?;
            if let Some(z) = &sol.z {
                let z = s.moments_back(z)?;
                sol.rho = Some(z.riesz(prob.objective())?);
                sol.z = Some(z);
            }
            if let Some(poly) = &sol.dual_poly {
                sol.dual_poly = Some(s.poly_back(poly)?);
            }
            sol.certificates = certificates_back(&s, prob, order, std::mem::take(&mut sol.certificates))?;
            for (_, tau) in &mut sol.equality_multipliers {
                *tau = s.poly_back(tau)?;
            }
            Ok(sol)
        }
    }
}

fn solve_relaxation_as_given(
    prob: &ParametricProblem,
    gamma: &MarginalMoments,
    order: usize,
    backend: &dyn SdpBackend,
) -> Result<RelaxationSolution> {
    let relax = assemble_primal(prob, gamma, order)?;
    let out = backend.solve(&relax.program).map_err(|e| Error::Backend {
        order,
        message: e.to_string(),
    })?;
    let mut sol = RelaxationSolution {
        order,
        status: out.status,
        rho: None,
        z: None,
        dual_poly: None,
        dual_objective: None,
        certificates: Vec::new(),
        equality_multipliers: Vec::new(),
        solver_tolerance: out.tolerance,
    };
    if out.status != SolveStatus::Optimal {
        return Ok(sol);
    }
    let z = MomentSequence::new(prob.n(), prob.p(), order, out.primal.clone())?;
    sol.rho = Some(relax.program.objective.eval(z.values()));
    sol.z = Some(z);
    if let Ok(rec) = recover_dual_from_primal(&relax, &out) {
        sol.dual_objective = Some(
            relax
                .program
                .equalities
                .iter()
                .zip(&out.equality_multipliers)
                .map(|((_, b), l)| b * l)
                .sum(),
        );
        sol.dual_poly = Some(rec.poly);
        sol.certificates = rec.certificates;
        sol.equality_multipliers = rec.equality_multipliers;
    }
    Ok(sol)
}

/// Solves the relaxations for every order in `orders`, in parallel.
///
/// Numerical failures are reported as errors annotated with the order;
/// infeasible and unbounded outcomes are returned as solutions.
pub fn solve_primal(
    prob: &ParametricProblem,
    gamma: &MarginalMoments,
    orders: std::ops::RangeInclusive<usize>,
    backend: &dyn SdpBackend,
) -> Result<Vec<RelaxationSolution>> {
    let orders: Vec<usize> = orders.collect();
    let solutions: Vec<Result<RelaxationSolution>> = orders
        .par_iter()
        .map(|&i| solve_relaxation(prob, gamma, i, backend))
        .collect();
    let mut out = Vec::with_capacity(solutions.len());
    for s in solutions {
        let s = s?;
        if s.status == SolveStatus::NumericalFailure {
            return Err(Error::Backend {
                order: s.order,
                message: "numerical failure".into(),
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// Assembled SOS program `max ∫ p dφ` s.t. `f - p = σ_0 + Σ σ_j h_j`.
#[derive(Clone, Debug)]
pub struct DualRelaxation {
    pub order: usize,
    pub p: usize,
    /// Minimizes `-∫ p dφ`.
    pub program: ConicProgram,
    pub roles: Vec<BlockRole>,
    /// `β` of each coefficient variable `p_β`, occupying positions `0..len`.
    pub poly_basis: Vec<MultiIndex>,
    /// First decision-vector position of each Gram block and its side.
    pub gram_offsets: Vec<(usize, usize)>,
}

fn tri_index(r: usize, c: usize) -> usize {
    let (r, c) = if r <= c { (r, c) } else { (c, r) };
    c * (c + 1) / 2 + r
}

pub fn assemble_dual(
    prob: &ParametricProblem,
    gamma: &MarginalMoments,
    order: usize,
) -> Result<DualRelaxation> {
    check_order(prob, gamma, order)?;
    let (n, p) = (prob.n(), prob.p());
    let poly_basis = enumerate_basis(0, p, 2 * order);
    let monomials = basis_size(n + p, 2 * order);

    // the localizing structures of the primal give the coefficient matrices A_α
    let mut structures = vec![build_moment_matrix(n, p, order, order)?];
    let mut roles = vec![BlockRole::Moment];
    for (q, half, role) in localizing_blocks(prob, order, true) {
        structures.push(build_localizing_matrix(&q, n, p, half, order)?);
        roles.push(role);
    }

    let mut offset = poly_basis.len();
    let mut gram_offsets = Vec::new();
    let mut psd_blocks = Vec::new();
    for s in &structures {
        let side = s.side();
        let base = offset;
        psd_blocks.push(StructuredMatrix::from_fn(side, |r, c| {
            LinearForm::single(base + tri_index(r, c), 1.0)
        }));
        gram_offsets.push((base, side));
        offset += side * (side + 1) / 2;
    }

    // coefficient identities f_α = p_α + Σ_j <G_j, A_j^α>, one row per monomial
    let mut rows = vec![LinearForm::new(); monomials];
    for (beta_pos, beta) in poly_basis.iter().enumerate() {
        let idx = MultiIndex::joint(&vec![0; n], beta.exponents());
        rows[graded_rank(&idx)].push(beta_pos, 1.0);
    }
    for (s, &(base, side)) in structures.iter().zip(&gram_offsets) {
        for r in 0..side {
            for c in 0..side {
                for &(alpha, coef) in s.entry(r, c).terms() {
                    rows[alpha].push(base + tri_index(r, c), coef);
                }
            }
        }
    }
    let mut rhs = vec![0.0; monomials];
    for (idx, c) in prob.objective().terms() {
        rhs[graded_rank(idx)] += c;
    }
    let equalities = rows.into_iter().zip(rhs).collect();

    let mut objective = LinearForm::new();
    for (pos, (_, g)) in gamma.truncate(2 * order)?.iter().enumerate() {
        objective.push(pos, -g);
    }

    Ok(DualRelaxation {
        order,
        p,
        program: ConicProgram {
            num_vars: offset,
            objective,
            psd_blocks,
            equalities,
        },
        roles,
        poly_basis,
        gram_offsets,
    })
}

#[derive(Clone, Debug)]
pub struct DualSolution {
    pub order: usize,
    pub status: SolveStatus,
    pub poly: Option<Polynomial>,
    /// `∫ p dφ`.
    pub objective: Option<f64>,
    pub certificates: Vec<Certificate>,
    pub solver_tolerance: f64,
}

/// Solves the explicit SOS program, in centered coordinates when the parameter box is known.
pub fn solve_dual(
    prob: &ParametricProblem,
    gamma: &MarginalMoments,
    order: usize,
    backend: &dyn SdpBackend,
) -> Result<DualSolution> {
    match VariableScaling::for_problem(prob) {
        None => solve_dual_as_given(prob, gamma, order, backend),
        Some(s) => {
            let mut sol = solve_dual_as_given(&s.problem(prob)?, &s.marginal(gamma)?, order, backend)?;
            if let Some(poly) = &sol.poly {
                sol.poly = Some(s.poly_back(poly)?);
            }
            sol.certificates = certificates_back(&s, prob, order, std::mem::take(&mut sol.certificates))?;
            Ok(sol)
        }
    }
}

fn solve_dual_as_given(
    prob: &ParametricProblem,
    gamma: &MarginalMoments,
    order: usize,
    backend: &dyn SdpBackend,
) -> Result<DualSolution> {
    let dual = assemble_dual(prob, gamma, order)?;
    let out = backend.solve(&dual.program).map_err(|e| Error::Backend {
        order,
        message: e.to_string(),
    })?;
    let mut sol = DualSolution {
        order,
        status: out.status,
        poly: None,
        objective: None,
        certificates: Vec::new(),
        solver_tolerance: out.tolerance,
    };
    if out.status != SolveStatus::Optimal {
        return Ok(sol);
    }
    let mut poly = Polynomial::zero(0, dual.p);
    for (pos, beta) in dual.poly_basis.iter().enumerate() {
        poly.add_term(beta.clone(), out.primal[pos]);
    }
    let grams: Vec<DMatrix<f64>> = dual
        .program
        .psd_blocks
        .iter()
        .map(|b| b.instantiate(&out.primal))
        .collect::<Result<_>>()?;
    sol.objective = Some(-dual.program.objective.eval(&out.primal));
    sol.poly = Some(poly);
    sol.certificates = merge_certificates(&dual.roles, &grams);
    Ok(sol)
}

/// Running pointwise maximum `p̃_i = max(p̃_{i-1}, p_i)` of dual polynomials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PiecewisePoly {
    members: Vec<Polynomial>,
}

impl PiecewisePoly {
    pub fn new() -> Self {
        PiecewisePoly::default()
    }

    pub fn members(&self) -> &[Polynomial] {
        &self.members
    }

    /// Max over members; `-∞` for the empty envelope.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        self.members
            .iter()
            .try_fold(f64::NEG_INFINITY, |acc, p| Ok(acc.max(p.eval(y)?)))
    }
}

pub fn envelope_update(prev: &PiecewisePoly, p: &Polynomial) -> Result<PiecewisePoly> {
    if let Some(first) = prev.members.first() {
        if first.num_vars() != p.num_vars() {
            return Err(Error::Dimension {
                expected: first.num_vars(),
                found: p.num_vars(),
            });
        }
    }
    let mut next = prev.clone();
    next.members.push(p.clone());
    Ok(next)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnosis {
    FeasibleSoFar,
    /// Relaxation infeasible at `order`: `K_y` is empty on a set of parameters of positive `φ`-measure.
    EmptySlices { order: usize },
}

impl Diagnosis {
    pub fn message(&self) -> String {
        match self {
            Diagnosis::FeasibleSoFar => "all relaxations feasible so far".into(),
            Diagnosis::EmptySlices { order } => format!(
                "relaxation of order {order} is infeasible: the feasible set K_y is empty \
                 for every y in a subset of Y with positive measure"
            ),
        }
    }
}

pub fn check_infeasibility_certificate(solution: &RelaxationSolution) -> Diagnosis {
    match solution.status {
        SolveStatus::Infeasible => Diagnosis::EmptySlices {
            order: solution.order,
        },
        _ => Diagnosis::FeasibleSoFar,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::uniform_box_moments;
    use crate::problem::MarginalSpec;

    fn parse(s: &str, n: usize, p: usize) -> Polynomial {
        Polynomial::parse(s, n, p).unwrap()
    }

    fn unit_box() -> MarginalSpec {
        MarginalSpec::UniformBox(vec![(0.0, 1.0)])
    }

    fn example_31() -> ParametricProblem {
        ParametricProblem::new(1, 1, parse("-x1^2*y1", 1, 1), unit_box())
            .with_inequality(parse("1 - x1^2 - y1^2", 1, 1))
            .with_inequality(parse("x1*(1 - x1)", 1, 1))
    }

    #[test]
    fn primal_sizes() {
        let prob = example_31();
        let gamma = uniform_box_moments(&[(0.0, 1.0)], 6).unwrap();
        let relax = assemble_primal(&prob, &gamma, 3).unwrap();
        assert_eq!(relax.program.num_vars, 28);
        let sides: Vec<usize> = relax.program.psd_blocks.iter().map(|b| b.side()).collect();
        assert_eq!(sides, vec![10, 6, 6, 6]);
        assert_eq!(relax.program.equalities.len(), basis_size(1, 6));
        relax.program.check().unwrap();
    }

    #[test]
    fn order_and_moment_budget_errors() {
        let prob = example_31();
        let gamma = uniform_box_moments(&[(0.0, 1.0)], 4).unwrap();
        assert!(matches!(
            assemble_primal(&prob, &gamma, 1),
            Err(Error::OrderTooSmall { .. })
        ));
        assert!(matches!(
            assemble_primal(&prob, &gamma, 3),
            Err(Error::DegreeOverflow { .. })
        ));
    }

    #[test]
    fn equalities_become_rows_in_the_primal_and_mirrored_blocks_in_the_dual() {
        let prob = ParametricProblem::new(2, 1, parse("x1", 2, 1), unit_box())
            .with_equality(parse("y1*x1^2 + x2^2 - y1", 2, 1));
        let gamma = uniform_box_moments(&[(0.0, 1.0)], 6).unwrap();
        let relax = assemble_primal(&prob, &gamma, 3).unwrap();
        assert_eq!(relax.program.psd_blocks.len(), 2);
        assert_eq!(relax.equality_rows.len(), basis_size(3, 2));
        assert_eq!(relax.program.equalities.len(), 7 + 10);
        let dual = assemble_dual(&prob, &gamma, 3).unwrap();
        assert_eq!(dual.roles.len(), 4);
    }

    // σ(x, y) = v(x, y)ᵀ G v(x, y) over the monomials of degree <= half
    fn gram_polynomial(gram: &DMatrix<f64>, n: usize, p: usize, half: usize) -> Polynomial {
        let basis = enumerate_basis(n, p, half);
        let mut out = Polynomial::zero(n, p);
        for (r, a) in basis.iter().enumerate() {
            for (c, b) in basis.iter().enumerate() {
                out.add_term(a.add(b), gram[(r, c)]);
            }
        }
        out
    }

    #[test]
    fn certificate_identity_holds_in_original_coordinates() {
        let prob = ParametricProblem::new(2, 1, parse("(1 - 2*y1)*(x1 + x2)", 2, 1), unit_box())
            .with_equality(parse("y1 - y1*x1^2 - x2^2", 2, 1))
            .with_equality(parse("y1 - x1^2 - y1*x2^2", 2, 1));
        let order = 3;
        let gamma = uniform_box_moments(&[(0.0, 1.0)], 2 * order).unwrap();
        let sol = solve_relaxation(&prob, &gamma, order, &ClarabelBackend::default()).unwrap();
        assert!(sol.is_optimal());
        let (n, p) = (2, 1);
        let lifted = |q: &Polynomial| {
            let mut out = Polynomial::zero(n, p);
            for (b, c) in q.terms() {
                out.add_term(MultiIndex::joint(&[0, 0], b.exponents()), c);
            }
            out
        };
        let constraints: Vec<_> = prob.all_constraints().cloned().collect();
        let mut rhs = Polynomial::zero(n, p);
        for cert in &sol.certificates {
            let (h, half) = match cert.role {
                BlockRole::Moment => (Polynomial::constant(n, p, 1.0), order),
                BlockRole::Localizing { constraint, .. } => {
                    let c = &constraints[constraint];
                    (c.poly.clone(), order - c.half_degree())
                }
            };
            rhs = rhs.add(&gram_polynomial(&cert.gram, n, p, half).mul(&h).unwrap()).unwrap();
        }
        assert_eq!(sol.equality_multipliers.len(), 2);
        for (k, tau) in &sol.equality_multipliers {
            rhs = rhs.add(&tau.mul(&constraints[*k].poly).unwrap()).unwrap();
        }
        let lhs = prob.objective().sub(&lifted(sol.dual_poly.as_ref().unwrap())).unwrap();
        let residual = lhs.sub(&rhs).unwrap();
        let worst = residual.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-5, "coefficient residual {worst}");
    }

    #[test]
    fn constant_objective() {
        let prob = ParametricProblem::new(1, 1, parse("2.5", 1, 1), unit_box())
            .with_inequality(parse("1 - x1^2", 1, 1));
        let gamma = uniform_box_moments(&[(0.0, 1.0)], 2).unwrap();
        let backend = ClarabelBackend::default();
        let sol = solve_relaxation(&prob, &gamma, 1, &backend).unwrap();
        assert!((sol.rho.unwrap() - 2.5).abs() < 1e-7);
        let p = sol.dual_poly.unwrap();
        assert!((p.eval(&[0.3]).unwrap() - 2.5).abs() < 1e-6);
        let dual = solve_dual(&prob, &gamma, 1, &backend).unwrap();
        let q = dual.poly.unwrap();
        for y in [0.0, 0.5, 1.0] {
            assert!((q.eval(&[y]).unwrap() - 2.5).abs() < 1e-6);
        }
        for cert in &dual.certificates {
            assert!(cert.gram.amax() < 1e-6);
        }
    }

    #[test]
    fn envelope() {
        let p = parse("y1 - 0.5", 0, 1);
        let env = envelope_update(&PiecewisePoly::new(), &p).unwrap();
        assert_eq!(env.eval(&[0.2]).unwrap(), p.eval(&[0.2]).unwrap());
        let twice = envelope_update(&env, &p).unwrap();
        assert_eq!(twice.eval(&[0.7]).unwrap(), p.eval(&[0.7]).unwrap());
        let q = parse("0.25 - y1", 0, 1);
        let both = envelope_update(&env, &q).unwrap();
        assert_eq!(both.eval(&[0.0]).unwrap(), 0.25);
        assert_eq!(both.eval(&[1.0]).unwrap(), 0.5);
        assert!(envelope_update(&env, &parse("x1", 1, 1)).is_err());
    }

    #[test]
    fn unconstrained_problem_is_feasible() {
        let prob = ParametricProblem::new(1, 1, parse("(x1 - y1)^2", 1, 1), unit_box());
        let gamma = uniform_box_moments(&[(0.0, 1.0)], 2).unwrap();
        let sol = solve_relaxation(&prob, &gamma, 1, &ClarabelBackend::default()).unwrap();
        assert_eq!(check_infeasibility_certificate(&sol), Diagnosis::FeasibleSoFar);
        assert!(sol.rho.unwrap().abs() < 1e-6);
    }
}

//! SDP backends for [`ConicProgram`]s.
//!
//! Multiplier convention: for `min c·v` subject to `a_e·v = b_e` and `M_j(v) ⪰ 0`,
//! a backend returns `λ_e` and `Y_j ⪰ 0` with `c = Σ λ_e a_e + Σ M_j*(Y_j)` and
//! dual objective `Σ λ_e b_e`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;

use super::ConicProgram;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capability {
    pub max_block_side: usize,
    pub max_vars: usize,
}

#[derive(Clone, Debug)]
pub struct BackendSolution {
    pub status: SolveStatus,
    /// Decision vector; meaningful only when `status` is optimal.
    pub primal: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub equality_multipliers: Vec<f64>,
    pub block_multipliers: Vec<DMatrix<f64>>,
    /// Tolerance the reported point satisfies (looser when the solver only reached reduced accuracy).
    pub tolerance: f64,
    pub iterations: u32,
}

pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn capability(&self) -> Capability;
    fn tolerance(&self) -> f64;
    fn solve(&self, program: &ConicProgram) -> Result<BackendSolution>;
}

/// Interior-point backend built on the Clarabel conic solver.
#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    tolerance: f64,
    max_iter: u32,
    verbose: bool,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        ClarabelBackend::new(1e-8)
    }
}

impl ClarabelBackend {
    pub fn new(tolerance: f64) -> Self {
        ClarabelBackend {
            tolerance,
            max_iter: 400,
            verbose: false,
        }
    }

    pub fn verbose(mut self, on: bool) -> Self {
        self.verbose = on;
        self
    }
}

// svec ordering of the upper triangle, column by column
fn triangle(side: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..side).flat_map(|c| (0..=c).map(move |r| (r, c)))
}

impl SdpBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn capability(&self) -> Capability {
        Capability {
            max_block_side: 400,
            max_vars: 200_000,
        }
    }

    fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn solve(&self, program: &ConicProgram) -> Result<BackendSolution> {
        program.check()?;
        let cap = self.capability();
        if program.num_vars > cap.max_vars
            || program.psd_blocks.iter().any(|b| b.side() > cap.max_block_side)
        {
            return Err(Error::Unsupported(format!(
                "program exceeds {} capability",
                self.name()
            )));
        }
        let n = program.num_vars;
        let sqrt2 = std::f64::consts::SQRT_2;
        let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones = Vec::new();

        for (form, rhs) in &program.equalities {
            let row = b.len();
            for &(pos, coef) in form.terms() {
                rows.push(row);
                cols.push(pos);
                vals.push(coef);
            }
            b.push(*rhs);
        }
        if !program.equalities.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(program.equalities.len()));
        }
        for block in &program.psd_blocks {
            let side = block.side();
            for (r, c) in triangle(side) {
                let row = b.len();
                let scale = if r == c { 1.0 } else { sqrt2 };
                for &(pos, coef) in block.entry(r, c).terms() {
                    rows.push(row);
                    cols.push(pos);
                    vals.push(-coef * scale);
                }
                b.push(0.0);
            }
            cones.push(if side == 1 {
                SupportedConeT::NonnegativeConeT(1)
            } else {
                SupportedConeT::PSDTriangleConeT(side)
            });
        }

        let a = CscMatrix::new_from_triplets(b.len(), n, rows, cols, vals);
        let mut q = vec![0.0; n];
        for &(pos, coef) in program.objective.terms() {
            q[pos] += coef;
        }
        let data = ConicData { q, a, b, cones };

        // degenerate programs (no interior point) often stall at reduced accuracy;
        // stronger static regularization usually lets them converge fully
        let mut reduced: Option<BackendSolution> = None;
        let mut last = None;
        for reg in STATIC_REGULARIZATION {
            let (out, full) = self.run(&data, reg, program)?;
            match out.status {
                SolveStatus::Optimal if full => return Ok(out),
                SolveStatus::Optimal => {
                    reduced.get_or_insert(out);
                }
                SolveStatus::Infeasible | SolveStatus::Unbounded if reduced.is_none() => return Ok(out),
                _ => last = Some(out),
            }
        }
        Ok(reduced.or(last).expect("at least one attempt"))
    }
}

const STATIC_REGULARIZATION: [f64; 3] = [1e-8, 1e-7, 1e-6];

struct ConicData {
    q: Vec<f64>,
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl ClarabelBackend {
    // one solver run; the flag is false when only the reduced tolerances were met
    fn run(&self, data: &ConicData, reg: f64, program: &ConicProgram) -> Result<(BackendSolution, bool)> {
        let n = data.q.len();
        let sqrt2 = std::f64::consts::SQRT_2;
        let p = CscMatrix::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .tol_gap_abs(self.tolerance)
            .tol_gap_rel(self.tolerance)
            .tol_feas(self.tolerance)
            .static_regularization_constant(reg)
            .chordal_decomposition_enable(false)
            .presolve_enable(false)
            .build()
            .map_err(|e| Error::Invalid(format!("solver settings: {e:?}")))?;
        let reduced = settings.reduced_tol_feas.max(settings.reduced_tol_gap_rel);
        let mut solver = DefaultSolver::new(&p, &data.q, &data.a, &data.b, &data.cones, settings)
            .map_err(|e| Error::Invalid(format!("solver setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;

        let (status, tolerance) = match sol.status {
            SolverStatus::Solved => (SolveStatus::Optimal, self.tolerance),
            SolverStatus::AlmostSolved => (SolveStatus::Optimal, reduced),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                (SolveStatus::Infeasible, self.tolerance)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                (SolveStatus::Unbounded, self.tolerance)
            }
            _ => (SolveStatus::NumericalFailure, self.tolerance),
        };

        let m_eq = program.equalities.len();
        let equality_multipliers = sol.z[..m_eq].iter().map(|z| -z).collect();
        let mut offset = m_eq;
        let mut block_multipliers = Vec::with_capacity(program.psd_blocks.len());
        for block in &program.psd_blocks {
            let side = block.side();
            let mut y = DMatrix::zeros(side, side);
            for (r, c) in triangle(side) {
                let v = sol.z[offset];
                offset += 1;
                if r == c {
                    y[(r, r)] = v;
                } else {
                    y[(r, c)] = v / sqrt2;
                    y[(c, r)] = v / sqrt2;
                }
            }
            block_multipliers.push(y);
        }

        let out = BackendSolution {
            status,
            primal: sol.x.clone(),
            objective: sol.obj_val,
            dual_objective: sol.obj_val_dual,
            equality_multipliers,
            block_multipliers,
            tolerance,
            iterations: sol.iterations,
        };
        Ok((out, sol.status == SolverStatus::Solved))
    }
}

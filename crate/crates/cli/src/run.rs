use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use jmsos::format::num;
use jmsos::marginal::{moments_for, MarginalMoments};
use jmsos::maxent::{
    density_csv, lower_bound_for_shift, maxent_fit, shifted_moments, NewtonConfig, DEFAULT_NODES,
};
use jmsos::oracle::{integrate_value_function, solve_grid, OracleConfig, OracleResult};
use jmsos::polyalg::enumerate_basis;
use jmsos::postproc::persistency;
use jmsos::quadrature::QuadratureRule;
use jmsos::relaxation::{
    check_infeasibility_certificate, envelope_update, solve_dual, solve_relaxation, Diagnosis, PiecewisePoly,
};
use jmsos::{MarginalSpec, Polynomial, RelaxationSolution, SdpBackend, SolveStatus};

use crate::file::{DensityRequest, ProblemFile};

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Inclusive order range; defaults to `i_0 ..= order`.
    pub orders: Option<(usize, usize)>,
    pub out: PathBuf,
    pub seed: u64,
    /// Points per parameter in the envelope and oracle grids.
    pub grid: usize,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        RunOptions {
            orders: None,
            out: out.into(),
            seed: 0,
            grid: 101,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Optimal,
    /// Some relaxation was infeasible: `K_y` is empty on a set of positive measure.
    EmptySlices { order: usize },
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Optimal => 0,
            RunStatus::EmptySlices { .. } => 2,
        }
    }
}

#[derive(Debug)]
pub struct SolveReport {
    pub status: RunStatus,
    pub solutions: Vec<RelaxationSolution>,
    /// `p_i` per optimal order, whichever program produced it.
    pub dual_polys: Vec<(usize, Polynomial)>,
    /// Skipped outputs and other notes, in the order they arose.
    pub log: Vec<String>,
}

impl SolveReport {
    pub fn message(&self) -> Option<String> {
        match self.status {
            RunStatus::Optimal => None,
            RunStatus::EmptySlices { order } => Some(Diagnosis::EmptySlices { order }.message()),
        }
    }
}

fn order_range(pf: &ProblemFile, opts: &RunOptions) -> Result<Vec<usize>> {
    let min = pf.problem().min_relaxation_order();
    let (a, b) = opts.orders.unwrap_or((min, pf.order()));
    if a > b {
        bail!("empty order range {a}..{b}");
    }
    if a < min {
        bail!("order {a} is below the minimum relaxation order {min}");
    }
    Ok((a..=b).collect())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text).with_context(|| format!("cannot write {}", dir.join(name).display()))
}

/// Tensor grid over the domain of `Y`, restricted to the simplex when that is the marginal.
pub fn parameter_grid(pf: &ProblemFile, size: usize) -> Option<Vec<Vec<f64>>> {
    let domain = pf.domain()?;
    let mut grid = vec![Vec::new()];
    for (a, b) in domain {
        let axis: Vec<f64> = match size {
            0 => return None,
            1 => vec![0.5 * (a + b)],
            _ => (0..size).map(|i| a + (b - a) * i as f64 / (size - 1) as f64).collect(),
        };
        grid = grid
            .into_iter()
            .flat_map(|pt| {
                axis.iter().map(move |&v| {
                    let mut q = pt.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    if matches!(pf.problem().marginal(), MarginalSpec::UniformSimplex) {
        grid.retain(|pt| pt.iter().sum::<f64>() <= 1.0 + 1e-12);
    }
    Some(grid)
}

fn grid_size(p: usize, requested: usize) -> Option<usize> {
    match p {
        1 => Some(requested),
        2 => Some(requested.min(41)),
        _ => None,
    }
}

/// Solves every order, writes `rho.csv`, `moments.csv`, `dual_poly.csv`,
/// `envelope.csv`, `persistency.csv` and `density_<k>.csv` into `opts.out`.
pub fn run_solve(pf: &ProblemFile, backend: &dyn SdpBackend, opts: &RunOptions) -> Result<SolveReport> {
    let prob = pf.problem();
    let orders = order_range(pf, opts)?;
    let top = *orders.last().expect("nonempty");
    fs::create_dir_all(&opts.out).with_context(|| format!("cannot create {}", opts.out.display()))?;
    let gamma = moments_for(prob.marginal(), prob.p(), 2 * top)?;

    let mut report = SolveReport {
        status: RunStatus::Optimal,
        solutions: Vec::new(),
        dual_polys: Vec::new(),
        log: Vec::new(),
    };
    for &order in &orders {
        let sol = solve_relaxation(prob, &gamma, order, backend).map_err(|e| anyhow!("order {order}: {e}"))?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                if let Diagnosis::EmptySlices { order } = check_infeasibility_certificate(&sol) {
                    report.status = RunStatus::EmptySlices { order };
                }
                report.solutions.push(sol);
                break;
            }
            other => bail!("order {order}: relaxation ended {}", other.as_str()),
        }
        let poly = match &sol.dual_poly {
            Some(p) => Some(p.clone()),
            None => {
                report.log.push(format!("order {order}: multipliers unavailable, solving the SOS program"));
                let dual = solve_dual(prob, &gamma, order, backend).map_err(|e| anyhow!("order {order}: {e}"))?;
                dual.poly
            }
        };
        match poly {
            Some(p) => report.dual_polys.push((order, p)),
            None => report.log.push(format!("order {order}: no dual polynomial available")),
        }
        report.solutions.push(sol);
    }

    write(&opts.out, "rho.csv", &rho_csv(&report.solutions))?;
    write(&opts.out, "moments.csv", &moments_csv(pf, &report.solutions))?;
    write(&opts.out, "dual_poly.csv", &dual_poly_csv(pf.p, &report.dual_polys))?;
    if let Some(reason) = skip_reason(&report) {
        for name in ["envelope.csv", "persistency.csv", "density_<k>.csv"] {
            report.log.push(format!("{name} skipped: {reason}"));
        }
        return Ok(report);
    }

    match grid_size(pf.p, opts.grid).and_then(|size| parameter_grid(pf, size)) {
        Some(grid) => write(&opts.out, "envelope.csv", &envelope_csv(pf.p, &report.dual_polys, &grid)?)?,
        None => report
            .log
            .push("envelope.csv skipped: grids need a bounded Y with at most 2 parameters".into()),
    }

    let best = report.solutions.last().expect("at least one optimal order");
    let z = best.z.as_ref().expect("optimal solutions carry moments");
    if pf.booleans.is_empty() {
        report.log.push("persistency.csv skipped: no boolean coordinates declared".into());
    } else {
        let mut text = "order,k,persistency,raw,clamped\n".to_string();
        for sol in &report.solutions {
            let z = sol.z.as_ref().expect("optimal");
            for &k in &pf.booleans {
                let pers = persistency(prob, z, k, sol.solver_tolerance)?;
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    sol.order,
                    k + 1,
                    num(pers.value),
                    num(pers.raw),
                    u8::from(pers.clamped)
                ));
            }
        }
        write(&opts.out, "persistency.csv", &text)?;
    }

    if pf.densities.is_empty() {
        report.log.push("density_<k>.csv skipped: no density requested".into());
    }
    for req in &pf.densities {
        let name = format!("density_{}.csv", req.k + 1);
        match density_table(pf, req, z, &gamma, backend, opts, &mut report.log) {
            Ok(text) => write(&opts.out, &name, &text)?,
            Err(e) => report.log.push(format!("{name} skipped: {e:#}")),
        }
    }
    Ok(report)
}

fn skip_reason(report: &SolveReport) -> Option<String> {
    match report.status {
        RunStatus::EmptySlices { order } => Some(format!("relaxation of order {order} is infeasible")),
        RunStatus::Optimal if report.solutions.is_empty() => Some("no relaxation was solved".into()),
        RunStatus::Optimal => None,
    }
}

fn density_table(
    pf: &ProblemFile,
    req: &DensityRequest,
    z: &jmsos::MomentSequence,
    gamma: &MarginalMoments,
    backend: &dyn SdpBackend,
    opts: &RunOptions,
    log: &mut Vec<String>,
) -> Result<String> {
    let domain = pf.domain().ok_or_else(|| anyhow!("density estimation needs a bounded Y"))?;
    let grid = grid_size(pf.p, opts.grid)
        .and_then(|size| parameter_grid(pf, size))
        .ok_or_else(|| anyhow!("density grids need at most 2 parameters"))?;
    let bound = lower_bound_for_shift(pf.problem(), req.k, z.order(), backend)?;
    let rule = QuadratureRule::unit_box(DEFAULT_NODES, pf.p)?;
    let fit = |shift: f64| -> jmsos::Result<_> {
        let target = shifted_moments(z, gamma, req.k, shift, req.degree / 2, &domain)?;
        maxent_fit(&target, req.degree / 2, &rule, &NewtonConfig::default())
    };
    // when x*_k attains the bound the shifted density touches zero and the
    // truncated moments can fall outside the region where the fit converges
    let fit = match fit(bound) {
        Ok(f) => f,
        Err(first) => {
            let f = fit(bound - 1.0).map_err(|_| first.clone())?;
            log.push(format!(
                "density_{}.csv: fit with shift {} failed ({first}); used shift {}",
                req.k + 1,
                num(bound),
                num(bound - 1.0)
            ));
            f
        }
    };
    Ok(density_csv(&fit.estimate, &grid)?)
}

pub fn rho_csv(solutions: &[RelaxationSolution]) -> String {
    let mut text = "order,rho,dual_objective,status\n".to_string();
    for s in solutions {
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{}\n",
            s.order,
            opt(s.rho),
            opt(s.dual_objective),
            s.status.as_str()
        ));
    }
    text
}

fn moments_csv(pf: &ProblemFile, solutions: &[RelaxationSolution]) -> String {
    let mut cols = vec!["order".to_string()];
    cols.extend((1..=pf.n).map(|k| format!("x{k}")));
    cols.extend((1..=pf.p).map(|j| format!("y{j}")));
    cols.push("value".into());
    let mut text = cols.join(",") + "\n";
    for s in solutions {
        let Some(z) = &s.z else { continue };
        for (idx, v) in enumerate_basis(pf.n, pf.p, 2 * s.order).iter().zip(z.values()) {
            let exps: Vec<String> = idx.exponents().iter().map(u32::to_string).collect();
            text.push_str(&format!("{},{},{}\n", s.order, exps.join(","), num(*v)));
        }
    }
    text
}

fn dual_poly_csv(p: usize, polys: &[(usize, Polynomial)]) -> String {
    let mut cols = vec!["order".to_string()];
    cols.extend((1..=p).map(|j| format!("y{j}")));
    cols.push("coefficient".into());
    let mut text = cols.join(",") + "\n";
    for (order, poly) in polys {
        for idx in enumerate_basis(0, p, 2 * order) {
            let exps: Vec<String> = idx.exponents().iter().map(u32::to_string).collect();
            text.push_str(&format!("{order},{},{}\n", exps.join(","), num(poly.coefficient(&idx))));
        }
    }
    text
}

fn envelope_csv(p: usize, polys: &[(usize, Polynomial)], grid: &[Vec<f64>]) -> Result<String> {
    let mut cols: Vec<String> = (1..=p).map(|j| format!("y{j}")).collect();
    let mut envelopes = Vec::new();
    let mut env = PiecewisePoly::new();
    for (order, poly) in polys {
        cols.push(format!("p_{order}"));
        cols.push(format!("envelope_{order}"));
        env = envelope_update(&env, poly)?;
        envelopes.push(env.clone());
    }
    let mut text = cols.join(",") + "\n";
    for y in grid {
        let mut row: Vec<String> = y.iter().map(|v| num(*v)).collect();
        for ((_, poly), env) in polys.iter().zip(&envelopes) {
            row.push(num(poly.eval(y)?));
            row.push(num(env.eval(y)?));
        }
        text.push_str(&(row.join(",") + "\n"));
    }
    Ok(text)
}

fn oracle_config(pf: &ProblemFile, seed: u64) -> OracleConfig {
    let mut config = OracleConfig {
        seed,
        ..OracleConfig::default()
    };
    if let Some(r) = pf.ball {
        config.search_radius = r;
    }
    config
}

/// Pointwise solves on the parameter grid; writes `oracle.csv`.
pub fn run_oracle(pf: &ProblemFile, opts: &RunOptions) -> Result<OracleResult> {
    let grid = grid_size(pf.p, opts.grid)
        .and_then(|size| parameter_grid(pf, size))
        .ok_or_else(|| anyhow!("the oracle needs a bounded Y with at most 2 parameters"))?;
    fs::create_dir_all(&opts.out).with_context(|| format!("cannot create {}", opts.out.display()))?;
    let result = solve_grid(pf.problem(), &grid, &oracle_config(pf, opts.seed))?;
    write(&opts.out, "oracle.csv", &result.to_csv())?;
    Ok(result)
}

/// `run_solve` and `run_oracle`, then `compare.csv` (grid gaps `J - p_i`) and
/// `compare_rho.csv` (`ρ_i` against the quadrature of `J`).
pub fn run_compare(pf: &ProblemFile, backend: &dyn SdpBackend, opts: &RunOptions) -> Result<SolveReport> {
    let mut report = run_solve(pf, backend, opts)?;
    if report.status != RunStatus::Optimal {
        report.log.push("oracle.csv, compare.csv and compare_rho.csv skipped: no optimal relaxation".into());
        return Ok(report);
    }
    let oracle = run_oracle(pf, opts)?;
    let mut cols: Vec<String> = (1..=pf.p).map(|j| format!("y{j}")).collect();
    cols.push("J".into());
    for (order, _) in &report.dual_polys {
        cols.push(format!("p_{order}"));
        cols.push(format!("gap_{order}"));
    }
    let mut text = cols.join(",") + "\n";
    for pt in &oracle.points {
        let mut row: Vec<String> = pt.y.iter().map(|v| num(*v)).collect();
        row.push(num(pt.value));
        for (_, poly) in &report.dual_polys {
            let v = poly.eval(&pt.y)?;
            row.push(num(v));
            row.push(num(pt.value - v));
        }
        text.push_str(&(row.join(",") + "\n"));
    }
    write(&opts.out, "compare.csv", &text)?;

    let nodes = if pf.p == 1 { 64 } else { 16 };
    match integrate_value_function(pf.problem(), nodes, &oracle_config(pf, opts.seed)) {
        Ok(rho_ref) => {
            let mut text = "order,rho,rho_ref,difference\n".to_string();
            for s in &report.solutions {
                if let Some(rho) = s.rho {
                    text.push_str(&format!("{},{},{},{}\n", s.order, num(rho), num(rho_ref), num(rho_ref - rho)));
                }
            }
            write(&opts.out, "compare_rho.csv", &text)?;
        }
        Err(e) => report.log.push(format!("compare_rho.csv skipped: {e}")),
    }
    Ok(report)
}

//! Line-oriented problem files.
//!
//! ```text
//! vars x 2
//! params y 1
//! param_box 0 1
//! objective: y1*x1 + (1 - y1)*x2
//! constraint: 1 - x1^2 - x2^2 >= 0
//! boolean: x1
//! marginal: uniform            # uniform | simplex | file <path>
//! order: 4
//! density: x1 degree 4
//! ball: 2.0
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use jmsos::marginal::read_moment_csv;
use jmsos::postproc::is_boolean;
use jmsos::{Constraint, ConstraintKind, MarginalSpec, ParametricProblem, Polynomial};

#[derive(Clone, Debug, PartialEq)]
pub enum MarginalDecl {
    Uniform,
    Simplex,
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityRequest {
    /// 0-based coordinate.
    pub k: usize,
    /// Total degree `2d` of the exponent.
    pub degree: usize,
}

/// A parsed problem file. [`ProblemFile::problem`] is the compiled problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub n: usize,
    pub p: usize,
    pub param_box: Vec<(f64, f64)>,
    pub objective: Polynomial,
    /// Constraints exactly as written, in file order.
    pub constraints: Vec<Constraint>,
    pub booleans: Vec<usize>,
    pub marginal: MarginalDecl,
    /// `None` when the file has no `order:` line.
    pub order: Option<usize>,
    pub densities: Vec<DensityRequest>,
    pub ball: Option<f64>,
    problem: ParametricProblem,
}

impl ProblemFile {
    pub fn problem(&self) -> &ParametricProblem {
        &self.problem
    }

    /// Declared order, or `i_0 + 2`.
    pub fn order(&self) -> usize {
        self.order.unwrap_or(self.problem.min_relaxation_order() + 2)
    }

    /// Bounding box of `Y` for grids and density normalization.
    pub fn domain(&self) -> Option<Vec<(f64, f64)>> {
        match self.marginal {
            MarginalDecl::Simplex => Some(vec![(0.0, 1.0); self.p]),
            _ if self.param_box.len() == self.p => Some(self.param_box.clone()),
            _ => None,
        }
    }

    /// Text that parses back to the same file.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vars x {}", self.n);
        let _ = writeln!(s, "params y {}", self.p);
        for (a, b) in &self.param_box {
            let _ = writeln!(s, "param_box {a:?} {b:?}");
        }
        let _ = writeln!(s, "objective: {}", self.objective);
        for c in &self.constraints {
            let rel = if c.is_equality() { "==" } else { ">=" };
            let _ = writeln!(s, "constraint: {} {rel} 0", c.poly);
        }
        for k in &self.booleans {
            let _ = writeln!(s, "boolean: x{}", k + 1);
        }
        match &self.marginal {
            MarginalDecl::Uniform => s.push_str("marginal: uniform\n"),
            MarginalDecl::Simplex => s.push_str("marginal: simplex\n"),
            MarginalDecl::File(path) => {
                let _ = writeln!(s, "marginal: file {}", path.display());
            }
        }
        if let Some(order) = self.order {
            let _ = writeln!(s, "order: {order}");
        }
        for d in &self.densities {
            let _ = writeln!(s, "density: x{} degree {}", d.k + 1, d.degree);
        }
        if let Some(r) = self.ball {
            let _ = writeln!(s, "ball: {r:?}");
        }
        s
    }
}

pub fn parse_problem_file(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_problem_text(&text, base).with_context(|| format!("in {}", path.display()))
}

/// Parses file contents; relative `marginal: file` paths resolve against `base`.
pub fn parse_problem_text(text: &str, base: &Path) -> Result<ProblemFile> {
    let mut dims: (Option<usize>, Option<usize>) = (None, None);
    let mut param_box = Vec::new();
    let mut objective: Option<String> = None;
    let mut constraints: Vec<(usize, String)> = Vec::new();
    let mut booleans = Vec::new();
    let mut marginal = MarginalDecl::Uniform;
    let mut order = None;
    let mut densities = Vec::new();
    let mut ball = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |e: anyhow::Error| e.context(format!("line {lineno}: {line}"));
        let (key, rest) = split_key(line).ok_or_else(|| anyhow!("line {lineno}: cannot read `{line}`"))?;
        match key {
            "vars" => dims.0 = Some(parse_count(rest, "x").map_err(at)?),
            "params" => dims.1 = Some(parse_count(rest, "y").map_err(at)?),
            "param_box" => {
                let v = numbers(rest).map_err(at)?;
                if v.len() != 2 || !(v[0] < v[1]) {
                    return Err(at(anyhow!("expected two increasing bounds `a b`")));
                }
                param_box.push((v[0], v[1]));
            }
            "objective" => objective = Some(rest.to_string()),
            "constraint" => constraints.push((lineno, rest.to_string())),
            "boolean" => {
                for name in rest.split([',', ' ']).filter(|s| !s.is_empty()) {
                    booleans.push(parse_x(name).map_err(at)?);
                }
            }
            "marginal" => {
                marginal = match rest.split_once(char::is_whitespace) {
                    Some(("file", path)) => MarginalDecl::File(PathBuf::from(path.trim())),
                    None if rest == "uniform" => MarginalDecl::Uniform,
                    None if rest == "simplex" => MarginalDecl::Simplex,
                    _ => return Err(at(anyhow!("marginal must be uniform, simplex or file <path>"))),
                }
            }
            "order" => order = Some(rest.parse::<usize>().map_err(|e| at(e.into()))?),
            "density" => {
                let words: Vec<&str> = rest.split_whitespace().collect();
                let [name, "degree", deg] = words[..] else {
                    return Err(at(anyhow!("expected `density: xK degree D`")));
                };
                let degree: usize = deg.parse().map_err(|e: std::num::ParseIntError| at(e.into()))?;
                if degree == 0 || degree % 2 != 0 {
                    return Err(at(anyhow!("density degree must be even and positive")));
                }
                densities.push(DensityRequest {
                    k: parse_x(name).map_err(at)?,
                    degree,
                });
            }
            "ball" => {
                let r: f64 = rest.parse().map_err(|e: std::num::ParseFloatError| at(e.into()))?;
                if !(r > 0.0) {
                    return Err(at(anyhow!("ball radius must be positive")));
                }
                ball = Some(r);
            }
            other => bail!("line {lineno}: unknown keyword `{other}`"),
        }
    }

    let n = dims.0.ok_or_else(|| anyhow!("missing `vars x N`"))?;
    let p = dims.1.ok_or_else(|| anyhow!("missing `params y P`"))?;
    let objective = Polynomial::parse(objective.as_deref().ok_or_else(|| anyhow!("missing `objective:`"))?, n, p)
        .context("objective")?;
    let constraints = constraints
        .into_iter()
        .map(|(lineno, text)| parse_constraint(&text, n, p).with_context(|| format!("line {lineno}")))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&k) = booleans.iter().chain(densities.iter().map(|d| &d.k)).find(|&&k| k >= n) {
        bail!("x{} is not one of the {n} decision variables", k + 1);
    }

    let mut pf = ProblemFile {
        n,
        p,
        param_box,
        objective,
        constraints,
        booleans,
        marginal,
        order,
        densities,
        ball,
        problem: ParametricProblem::new(n, p, Polynomial::zero(n, p), MarginalSpec::UniformSimplex),
    };
    pf.problem = compile(&pf, base)?;
    let issues = pf.problem.validate();
    if !issues.is_empty() {
        bail!("invalid problem:\n  {}", issues.join("\n  "));
    }
    if let Some(order) = pf.order {
        let min = pf.problem.min_relaxation_order();
        if order < min {
            bail!("order {order} is below the minimum relaxation order {min}");
        }
    }
    Ok(pf)
}

fn compile(pf: &ProblemFile, base: &Path) -> Result<ParametricProblem> {
    let (n, p) = (pf.n, pf.p);
    let spec = match &pf.marginal {
        MarginalDecl::Uniform => {
            if pf.param_box.len() != p {
                bail!("uniform marginal needs one param_box line per parameter ({} given, {p} needed)", pf.param_box.len());
            }
            MarginalSpec::UniformBox(pf.param_box.clone())
        }
        MarginalDecl::Simplex => MarginalSpec::UniformSimplex,
        MarginalDecl::File(path) => {
            let full = if path.is_absolute() { path.clone() } else { base.join(path) };
            MarginalSpec::Explicit(read_moment_csv(&full, p)?)
        }
    };
    let mut prob = ParametricProblem::new(n, p, pf.objective.clone(), spec);
    // an explicit table carries no support; declared boxes still bound Y
    if matches!(pf.marginal, MarginalDecl::File(_)) {
        for (j, &(a, b)) in pf.param_box.iter().enumerate() {
            let y = Polynomial::y(n, p, j);
            let lo = y.sub(&Polynomial::constant(n, p, a))?;
            let hi = Polynomial::constant(n, p, b).sub(&y)?;
            prob = prob.with_param_constraint(lo.mul(&hi)?);
        }
    }
    for c in &pf.constraints {
        prob = match c.kind {
            ConstraintKind::Inequality if !c.poly.involves_x() => prob.with_param_constraint(c.poly.clone()),
            ConstraintKind::Inequality => prob.with_inequality(c.poly.clone()),
            ConstraintKind::Equality => prob.with_equality(c.poly.clone()),
        };
    }
    for &k in &pf.booleans {
        if !is_boolean(&prob, k) {
            let x = Polynomial::x(n, p, k);
            prob = prob.with_equality(x.mul(&x)?.sub(&x)?);
        }
    }
    if let Some(r) = pf.ball {
        prob = prob.add_ball_constraint(r);
    }
    Ok(prob)
}

fn split_key(line: &str) -> Option<(&str, &str)> {
    if let Some((key, rest)) = line.split_once(':') {
        if !key.contains(char::is_whitespace) {
            return Some((key.trim(), rest.trim()));
        }
    }
    line.split_once(char::is_whitespace).map(|(k, r)| (k, r.trim()))
}

fn parse_count(rest: &str, letter: &str) -> Result<usize> {
    match rest.split_whitespace().collect::<Vec<_>>()[..] {
        [name, count] if name == letter => Ok(count.parse()?),
        _ => bail!("expected `{letter} <count>`"),
    }
}

fn numbers(rest: &str) -> Result<Vec<f64>> {
    Ok(rest
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<Vec<f64>, _>>()?)
}

fn parse_x(name: &str) -> Result<usize> {
    name.strip_prefix('x')
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&k| k >= 1)
        .map(|k| k - 1)
        .ok_or_else(|| anyhow!("`{name}` is not a decision variable name like x1"))
}

/// `lhs >= rhs`, `lhs <= rhs` or `lhs == rhs`, stored as `h >= 0` or `h == 0`.
fn parse_constraint(text: &str, n: usize, p: usize) -> Result<Constraint> {
    for (op, kind, flip) in [
        (">=", ConstraintKind::Inequality, false),
        ("<=", ConstraintKind::Inequality, true),
        ("==", ConstraintKind::Equality, false),
    ] {
        if let Some((lhs, rhs)) = text.split_once(op) {
            let lhs = Polynomial::parse(lhs.trim(), n, p)?;
            let rhs = Polynomial::parse(rhs.trim(), n, p)?;
            let h = if flip { rhs.sub(&lhs)? } else { lhs.sub(&rhs)? };
            return Ok(Constraint::new(h, kind));
        }
    }
    bail!("constraint needs one of >=, <=, ==")
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX31: &str = "\
# Example 3.1
vars x 1
params y 1
param_box 0 1
objective: -x1^2*y1
constraint: 1 - x1^2 - y1^2 >= 0
constraint: x1*(1 - x1) >= 0
order: 4
density: x1 degree 4
";

    fn parse(text: &str) -> Result<ProblemFile> {
        parse_problem_text(text, Path::new("."))
    }

    #[test]
    fn example_31() {
        let pf = parse(EX31).unwrap();
        assert_eq!((pf.n, pf.p), (1, 1));
        assert_eq!(pf.problem().joint_constraints().len(), 2);
        assert_eq!(pf.problem().param_constraints().len(), 1);
        assert_eq!(pf.order(), 4);
        assert_eq!(pf.densities, vec![DensityRequest { k: 0, degree: 4 }]);
    }

    #[test]
    fn default_order_is_two_above_minimum() {
        let pf = parse(&EX31.replace("order: 4\n", "")).unwrap();
        assert_eq!(pf.order, None);
        assert_eq!(pf.order(), 4);
        let quad = "vars x 1\nparams y 1\nparam_box 0 1\nobjective: x1*y1\nconstraint: 1 - x1^2 >= 0\n";
        assert_eq!(parse(quad).unwrap().order(), 3);
    }

    #[test]
    fn boolean_adds_equality_once() {
        let base = "vars x 1\nparams y 1\nparam_box 0 1\nobjective: x1*y1\nboolean: x1\n";
        let pf = parse(base).unwrap();
        assert_eq!(pf.problem().joint_constraints().len(), 1);
        assert!(pf.problem().joint_constraints()[0].is_equality());
        let explicit = parse(&format!("{base}constraint: x1^2 - x1 == 0\n")).unwrap();
        assert_eq!(explicit.problem().joint_constraints().len(), 1);
    }

    #[test]
    fn round_trip() {
        let text = format!("{EX31}boolean: x1\nball: 2\nconstraint: y1 <= 0.9\n");
        let pf = parse(&text).unwrap();
        let again = parse(&pf.to_text()).unwrap();
        assert_eq!(pf, again);
        assert_eq!(pf.to_text(), again.to_text());
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = parse("vars x 1\nparams y 1\nparam_box 0 1\nobjective: x1\nconstraint: x1 + z1 >= 0\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 5"), "{err:#}");
        let err = parse("vars x 1\nparams y 1\nobjective: x1\n").unwrap_err();
        assert!(format!("{err:#}").contains("param_box"), "{err:#}");
        assert!(parse("vars x 1\nparams y 1\nparam_box 1 0\nobjective: x1\n").is_err());
        assert!(parse(&EX31.replace("order: 4", "order: 1")).is_err());
        assert!(parse(&format!("{EX31}boolean: x2\n")).is_err());
        assert!(parse(&format!("{EX31}frobnicate: 1\n")).is_err());
    }

    #[test]
    fn file_marginal() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.csv"), "0,1\n1,0.5\n2,0.333333333333333\n").unwrap();
        let text = "vars x 1\nparams y 1\nparam_box 0 1\nobjective: x1\nconstraint: 1 - x1^2 >= 0\nmarginal: file m.csv\n";
        let pf = parse_problem_text(text, dir.path()).unwrap();
        assert!(matches!(pf.problem().marginal(), MarginalSpec::Explicit(t) if t.len() == 3));
        assert_eq!(pf.problem().param_constraints().len(), 1);
    }
}

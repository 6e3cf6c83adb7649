//! Quantities read off a solved moment sequence.

use crate::error::{Error, Result};
use crate::momentstruct::MomentSequence;
use crate::polyalg::{enumerate_basis, MultiIndex, Polynomial};
use crate::problem::ParametricProblem;

/// `∫_Y h(x*(y)) dφ(y) ≈ Σ_α h_α z_{α0}` for `h` in the decision variables only.
pub fn functional_estimate(h: &Polynomial, z: &MomentSequence) -> Result<f64> {
    if h.involves_y() {
        return Err(Error::Invalid(
            "functional involves parameters; use mixed_functional_estimate".into(),
        ));
    }
    mixed_functional_estimate(h, z)
}

/// `L_z(h)` for an arbitrary `h(x, y)`.
pub fn mixed_functional_estimate(h: &Polynomial, z: &MomentSequence) -> Result<f64> {
    if h.n() != z.n() || h.p() != z.p() {
        return Err(Error::Dimension {
            expected: z.n() + z.p(),
            found: h.num_vars(),
        });
    }
    z.riesz(h)
}

/// `E_φ[x*(y)]`, component `k` being `z_{e(k)0}`.
pub fn mean_vector(z: &MomentSequence) -> Result<Vec<f64>> {
    if z.order() == 0 {
        return Err(Error::DegreeOverflow { degree: 1, limit: 0 });
    }
    let len = z.n() + z.p();
    (0..z.n()).map(|k| z.get(&MultiIndex::unit(len, k))).collect()
}

/// Variance `E[x_k²] - E[x_k]²` of one optimal coordinate.
pub fn coordinate_variance(z: &MomentSequence, k: usize) -> Result<f64> {
    let len = z.n() + z.p();
    let mut sq = MultiIndex::zero(len).exponents().to_vec();
    sq[k] = 2;
    let m1 = z.get(&MultiIndex::unit(len, k))?;
    Ok(z.get(&MultiIndex::new(sq))? - m1 * m1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Persistency {
    /// Estimate clamped to `[0, 1]`.
    pub value: f64,
    pub raw: f64,
    /// Set when `raw` left `[0, 1]` by more than the allowed leakage.
    pub clamped: bool,
}

/// True if the problem carries `x_k² - x_k = 0` (up to scaling).
pub fn is_boolean(prob: &ParametricProblem, k: usize) -> bool {
    let (n, p) = (prob.n(), prob.p());
    if k >= n {
        return false;
    }
    let xk = Polynomial::x(n, p, k);
    let target = xk.mul(&xk).expect("same space").sub(&xk).expect("same space");
    prob.joint_constraints().iter().any(|c| {
        if !c.is_equality() || c.poly.num_terms() != 2 {
            return false;
        }
        let mut sq = vec![0u32; n + p];
        sq[k] = 2;
        let lead = c.poly.coefficient(&MultiIndex::new(sq));
        lead != 0.0 && c.poly.scale(1.0 / lead) == target
    })
}

/// `Prob(x*_k(y) = 1) ≈ z_{e(k)0}` for a boolean coordinate.
pub fn persistency(
    prob: &ParametricProblem,
    z: &MomentSequence,
    k: usize,
    tolerance: f64,
) -> Result<Persistency> {
    if !is_boolean(prob, k) {
        return Err(Error::NotBoolean(k + 1));
    }
    let raw = z.get(&MultiIndex::unit(z.n() + z.p(), k))?;
    let leak = 10.0 * tolerance;
    Ok(Persistency {
        value: raw.clamp(0.0, 1.0),
        raw,
        clamped: raw < -leak || raw > 1.0 + leak,
    })
}

/// `z_{e(k)β}` for all `|β| <= budget`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateMoments {
    pub k: usize,
    pub entries: Vec<(MultiIndex, f64)>,
}

impl CoordinateMoments {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }

    /// CSV rows `β_1,...,β_p,value`.
    pub fn to_csv(&self) -> String {
        let p = self.entries.first().map_or(0, |(b, _)| b.len());
        let mut out: Vec<String> = (1..=p).map(|j| format!("beta{j}")).collect();
        out.push("value".into());
        let mut text = out.join(",") + "\n";
        for (beta, v) in &self.entries {
            let mut row: Vec<String> = beta.exponents().iter().map(u32::to_string).collect();
            row.push(crate::format::num(*v));
            text.push_str(&row.join(","));
            text.push('\n');
        }
        text
    }
}

pub fn coordinate_moment_curve(z: &MomentSequence, k: usize, budget: usize) -> Result<CoordinateMoments> {
    if k >= z.n() {
        return Err(Error::Invalid(format!("coordinate x{} does not exist", k + 1)));
    }
    if budget + 1 > 2 * z.order() {
        return Err(Error::DegreeOverflow {
            degree: budget + 1,
            limit: 2 * z.order(),
        });
    }
    let mut alpha = vec![0u32; z.n()];
    alpha[k] = 1;
    let entries = enumerate_basis(0, z.p(), budget)
        .into_iter()
        .map(|beta| {
            let v = z.get_joint(&alpha, beta.exponents())?;
            Ok((beta, v))
        })
        .collect::<Result<_>>()?;
    Ok(CoordinateMoments { k, entries })
}

//! Moments `γ_β = ∫_Y y^β dφ(y)` of the parameter distribution.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::polyalg::{basis_size, enumerate_basis, graded_rank, MultiIndex};
use crate::problem::MarginalSpec;

/// Complete moment table of `φ` up to `max_degree`, stored in graded basis order.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalMoments {
    p: usize,
    max_degree: usize,
    values: Vec<f64>,
}

impl MarginalMoments {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `γ_β`, or `None` if `|β|` exceeds the table.
    pub fn get(&self, beta: &[u32]) -> Option<f64> {
        if beta.len() != self.p {
            return None;
        }
        let idx = MultiIndex::new(beta.to_vec());
        if idx.degree() as usize > self.max_degree {
            return None;
        }
        Some(self.values[graded_rank(&idx)])
    }

    /// Values in graded order of the `p`-variate basis.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        enumerate_basis(0, self.p, self.max_degree)
            .into_iter()
            .zip(self.values.iter().copied())
    }

    pub(crate) fn from_values(p: usize, max_degree: usize, values: Vec<f64>) -> Result<Self> {
        let expected = basis_size(p, max_degree);
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: values.len(),
            });
        }
        Ok(MarginalMoments {
            p,
            max_degree,
            values,
        })
    }

    /// Copy restricted to `|β| <= degree`.
    pub fn truncate(&self, degree: usize) -> Result<MarginalMoments> {
        if degree > self.max_degree {
            return Err(Error::DegreeOverflow {
                degree,
                limit: self.max_degree,
            });
        }
        Ok(MarginalMoments {
            p: self.p,
            max_degree: degree,
            values: self.values[..basis_size(self.p, degree)].to_vec(),
        })
    }
}

fn tabulate(p: usize, max_degree: usize, f: impl Fn(&[u32]) -> f64) -> MarginalMoments {
    let values = enumerate_basis(0, p, max_degree)
        .iter()
        .map(|b| f(b.exponents()))
        .collect();
    MarginalMoments {
        p,
        max_degree,
        values,
    }
}

/// Moments of the uniform probability measure on `∏_j [a_j, b_j]`.
pub fn uniform_box_moments(bounds: &[(f64, f64)], max_degree: usize) -> Result<MarginalMoments> {
    for (j, &(a, b)) in bounds.iter().enumerate() {
        if !(a < b) {
            return Err(Error::DegenerateInterval {
                index: j,
                lower: a,
                upper: b,
            });
        }
    }
    Ok(tabulate(bounds.len(), max_degree, |beta| {
        beta.iter()
            .zip(bounds)
            .map(|(&e, &(a, b))| {
                let k = e as i32 + 1;
                (b.powi(k) - a.powi(k)) / (k as f64 * (b - a))
            })
            .product()
    }))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Moments of the uniform probability measure on `{y >= 0, Σ y_j <= 1}`.
pub fn uniform_simplex_moments(p: usize, max_degree: usize) -> Result<MarginalMoments> {
    if p == 0 {
        return Err(Error::Invalid("simplex needs at least one parameter".into()));
    }
    Ok(tabulate(p, max_degree, |beta| {
        let total: u32 = beta.iter().sum();
        let num = factorial(p as u32) * beta.iter().map(|&e| factorial(e)).product::<f64>();
        num / factorial(total + p as u32)
    }))
}

/// Wraps a user table after checking completeness and `γ_0 = 1`.
pub fn explicit_moments(
    table: &[(Vec<u32>, f64)],
    p: usize,
    max_degree: usize,
) -> Result<MarginalMoments> {
    let mut lookup: HashMap<&[u32], f64> = HashMap::new();
    for (beta, v) in table {
        if beta.len() != p {
            return Err(Error::Dimension {
                expected: p,
                found: beta.len(),
            });
        }
        lookup.insert(beta.as_slice(), *v);
    }
    let basis = enumerate_basis(0, p, max_degree);
    let mut values = Vec::with_capacity(basis.len());
    for beta in &basis {
        match lookup.get(beta.exponents()) {
            Some(&v) => values.push(v),
            None => return Err(Error::MissingMoment(beta.exponents().to_vec())),
        }
    }
    if (values[0] - 1.0).abs() > 1e-12 {
        return Err(Error::NotProbability(values[0]));
    }
    Ok(MarginalMoments {
        p,
        max_degree,
        values,
    })
}

/// Moment table for a marginal specification.
pub fn moments_for(spec: &MarginalSpec, p: usize, max_degree: usize) -> Result<MarginalMoments> {
    match spec {
        MarginalSpec::UniformBox(bounds) => {
            if bounds.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    found: bounds.len(),
                });
            }
            uniform_box_moments(bounds, max_degree)
        }
        MarginalSpec::UniformSimplex => uniform_simplex_moments(p, max_degree),
        MarginalSpec::Explicit(table) => explicit_moments(table, p, max_degree),
    }
}

/// Reads CSV rows `β_1,...,β_p,value`. Blank lines and `#` comments are skipped.
pub fn read_moment_csv(path: &Path, p: usize) -> Result<Vec<(Vec<u32>, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    parse_moment_csv(&text, p)
}

pub fn parse_moment_csv(text: &str, p: usize) -> Result<Vec<(Vec<u32>, f64)>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != p + 1 {
            return Err(Error::Invalid(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                p + 1,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Invalid(format!("line {}: malformed {what}", lineno + 1));
        let beta = fields[..p]
            .iter()
            .map(|f| f.parse::<u32>().map_err(|_| bad("exponent")))
            .collect::<Result<Vec<_>>>()?;
        let value = fields[p].parse::<f64>().map_err(|_| bad("value"))?;
        rows.push((beta, value));
    }
    Ok(rows)
}

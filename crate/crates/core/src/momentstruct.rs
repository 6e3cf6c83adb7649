//! Truncated moment sequences and the symbolic moment / localizing matrices built on them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polyalg::{basis_size, enumerate_basis, graded_rank, MultiIndex, Polynomial};

/// Sparse linear form `Σ c_k v[pos_k]` over a decision vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm(Vec<(usize, f64)>);

impl LinearForm {
    pub fn new() -> Self {
        LinearForm(Vec::new())
    }

    pub fn single(pos: usize, coef: f64) -> Self {
        let mut f = LinearForm::new();
        f.push(pos, coef);
        f
    }

    /// Adds `coef * v[pos]`, merging with an existing entry at `pos`.
    pub fn push(&mut self, pos: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.0.binary_search_by_key(&pos, |&(p, _)| p) {
            Ok(i) => {
                self.0[i].1 += coef;
                if self.0[i].1 == 0.0 {
                    self.0.remove(i);
                }
            }
            Err(i) => self.0.insert(i, (pos, coef)),
        }
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_position(&self) -> Option<usize> {
        self.0.last().map(|&(p, _)| p)
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.0.iter().map(|&(p, c)| c * v[p]).sum()
    }

    pub fn scale(&self, s: f64) -> LinearForm {
        LinearForm(self.0.iter().map(|&(p, c)| (p, c * s)).collect())
    }
}

/// Truncated sequence `z = (z_{αβ})`, `|α + β| <= 2·order`, in graded basis order.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSequence {
    n: usize,
    p: usize,
    order: usize,
    values: Vec<f64>,
}

impl MomentSequence {
    pub fn new(n: usize, p: usize, order: usize, values: Vec<f64>) -> Result<Self> {
        let expected = basis_size(n + p, 2 * order);
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: values.len(),
            });
        }
        Ok(MomentSequence { n, p, order, values })
    }

    /// Moments of the discrete measure `Σ w_k δ_{atom_k}`.
    pub fn from_atoms(n: usize, p: usize, order: usize, atoms: &[(Vec<f64>, f64)]) -> Self {
        let values = enumerate_basis(n, p, 2 * order)
            .iter()
            .map(|idx| {
                atoms
                    .iter()
                    .map(|(pt, w)| {
                        idx.exponents()
                            .iter()
                            .zip(pt)
                            .fold(*w, |acc, (&e, &v)| acc * v.powi(e as i32))
                    })
                    .sum()
            })
            .collect();
        MomentSequence { n, p, order, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: &MultiIndex) -> Result<f64> {
        Ok(self.values[moment_index(self.n, self.p, self.order, idx)?])
    }

    /// `z_{αβ}` from split exponents.
    pub fn get_joint(&self, alpha: &[u32], beta: &[u32]) -> Result<f64> {
        self.get(&MultiIndex::joint(alpha, beta))
    }

    /// Riesz functional `L_z(f) = Σ f_{αβ} z_{αβ}`.
    pub fn riesz(&self, f: &Polynomial) -> Result<f64> {
        f.terms()
            .map(|(idx, c)| self.get(idx).map(|z| c * z))
            .sum()
    }
}

/// Position of `idx` in `enumerate_basis(n, p, 2·order)`.
pub fn moment_index(n: usize, p: usize, order: usize, idx: &MultiIndex) -> Result<usize> {
    if idx.len() != n + p {
        return Err(Error::Dimension {
            expected: n + p,
            found: idx.len(),
        });
    }
    let deg = idx.degree() as usize;
    if deg > 2 * order {
        return Err(Error::DegreeOverflow {
            degree: deg,
            limit: 2 * order,
        });
    }
    Ok(graded_rank(idx))
}

/// Symmetric matrix whose entries are linear forms in a decision vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredMatrix {
    side: usize,
    // row-major, full storage
    entries: Vec<LinearForm>,
}

impl StructuredMatrix {
    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> LinearForm) -> Self {
        let mut entries = vec![LinearForm::new(); side * side];
        for r in 0..side {
            for c in r..side {
                let e = f(r, c);
                entries[c * side + r] = e.clone();
                entries[r * side + c] = e;
            }
        }
        StructuredMatrix { side, entries }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn entry(&self, r: usize, c: usize) -> &LinearForm {
        &self.entries[r * self.side + c]
    }

    pub fn max_position(&self) -> Option<usize> {
        self.entries.iter().filter_map(LinearForm::max_position).max()
    }

    pub fn negate(&self) -> StructuredMatrix {
        StructuredMatrix {
            side: self.side,
            entries: self.entries.iter().map(|e| e.scale(-1.0)).collect(),
        }
    }

    /// Numeric matrix for the decision vector `v`.
    pub fn instantiate(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(max) = self.max_position() {
            if max >= v.len() {
                return Err(Error::Dimension {
                    expected: max + 1,
                    found: v.len(),
                });
            }
        }
        Ok(DMatrix::from_fn(self.side, self.side, |r, c| self.entry(r, c).eval(v)))
    }
}

/// Moment matrix `M_d(z)` with rows and columns indexed by the degree-`half_degree` basis.
pub fn build_moment_matrix(n: usize, p: usize, half_degree: usize, order: usize) -> Result<StructuredMatrix> {
    build_localizing_matrix(&Polynomial::constant(n, p, 1.0), n, p, half_degree, order)
}

/// Localizing matrix `M_d(q z)`: entry `(r, c)` is `Σ_{uv} q_{uv} z_{idx_r + idx_c + (u,v)}`.
pub fn build_localizing_matrix(
    q: &Polynomial,
    n: usize,
    p: usize,
    half_degree: usize,
    order: usize,
) -> Result<StructuredMatrix> {
    if q.n() != n || q.p() != p {
        return Err(Error::Dimension {
            expected: n + p,
            found: q.num_vars(),
        });
    }
    let needed = 2 * half_degree + q.degree() as usize;
    if needed > 2 * order {
        return Err(Error::DegreeOverflow {
            degree: needed,
            limit: 2 * order,
        });
    }
    let rows = enumerate_basis(n, p, half_degree);
    let terms: Vec<(&MultiIndex, f64)> = q.terms().collect();
    Ok(StructuredMatrix::from_fn(rows.len(), |r, c| {
        let base = rows[r].add(&rows[c]);
        let mut form = LinearForm::new();
        for &(u, coef) in &terms {
            form.push(graded_rank(&base.add(u)), coef);
        }
        form
    }))
}

/// Numeric instantiation of a structured matrix at a moment sequence.
pub fn instantiate(matrix: &StructuredMatrix, z: &MomentSequence) -> Result<DMatrix<f64>> {
    matrix.instantiate(z.values())
}

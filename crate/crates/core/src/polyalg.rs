//! Sparse multivariate polynomials over the joint variable vector `(x_1..x_n, y_1..y_p)`.
//!
//! Every moment object in the crate is indexed by the graded monomial basis
//! produced here: monomials are sorted by total degree, then by descending
//! lexicographic order on the exponent vector, so `x_1` has the highest
//! priority and `y_p` the lowest.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Exponent vector of a monomial `x^α y^β`, stored as `[α..., β...]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// Unit index `e(k)`: a single 1 in slot `k`.
    pub fn unit(len: usize, k: usize) -> Self {
        let mut e = vec![0; len];
        e[k] = 1;
        MultiIndex(e)
    }

    /// Concatenates an x-part and a y-part.
    pub fn joint(alpha: &[u32], beta: &[u32]) -> Self {
        MultiIndex(alpha.iter().chain(beta).copied().collect())
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise sum; lengths must agree.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, j| acc * (n - j) / (j + 1))
}

/// Number of monomials of total degree `<= degree` in `num_vars` variables.
pub fn basis_size(num_vars: usize, degree: usize) -> usize {
    binomial((num_vars + degree) as u64, degree as u64) as usize
}

/// All exponent vectors of length `n + p` with total degree `<= degree`, in basis order.
pub fn enumerate_basis(n: usize, p: usize, degree: usize) -> Vec<MultiIndex> {
    let len = n + p;
    let mut out = Vec::with_capacity(basis_size(len, degree));
    let mut buf = vec![0u32; len];
    for d in 0..=degree as u32 {
        push_compositions(&mut buf, 0, d, &mut out);
    }
    out
}

// Compositions of `rest` into the slots `slot..`, largest leading exponent first.
fn push_compositions(buf: &mut [u32], slot: usize, rest: u32, out: &mut Vec<MultiIndex>) {
    if slot + 1 >= buf.len() {
        if buf.is_empty() {
            if rest == 0 {
                out.push(MultiIndex(Vec::new()));
            }
            return;
        }
        buf[slot] = rest;
        out.push(MultiIndex(buf.to_vec()));
        buf[slot] = 0;
        return;
    }
    for e in (0..=rest).rev() {
        buf[slot] = e;
        push_compositions(buf, slot + 1, rest - e, out);
    }
    buf[slot] = 0;
}

/// Position of `idx` in the graded basis of its length, computed combinatorially.
///
/// Inverse of [`enumerate_basis`]; the basis degree bound does not affect the
/// position because lower degrees always come first.
pub fn graded_rank(idx: &MultiIndex) -> usize {
    let len = idx.len();
    if len == 0 {
        return 0;
    }
    let d = idx.degree() as usize;
    let mut pos = if d == 0 { 0 } else { basis_size(len, d - 1) };
    let mut rest = d;
    for (slot, &e) in idx.0.iter().enumerate().take(len - 1) {
        let free = len - slot - 1;
        // vectors that agree so far but carry a larger exponent in this slot
        for v in (e as usize + 1)..=rest {
            let remaining = rest - v;
            pos += binomial((remaining + free - 1) as u64, (free - 1) as u64) as usize;
        }
        rest -= e as usize;
    }
    pos
}

/// Sparse polynomial in `n` decision variables and `p` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n: usize,
    p: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(n: usize, p: usize) -> Self {
        Polynomial {
            n,
            p,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, p: usize, c: f64) -> Self {
        let mut f = Polynomial::zero(n, p);
        f.add_term(MultiIndex::zero(n + p), c);
        f
    }

    /// The single variable `x_k` (0-based).
    pub fn x(n: usize, p: usize, k: usize) -> Self {
        let mut f = Polynomial::zero(n, p);
        f.add_term(MultiIndex::unit(n + p, k), 1.0);
        f
    }

    /// The single parameter `y_j` (0-based).
    pub fn y(n: usize, p: usize, j: usize) -> Self {
        let mut f = Polynomial::zero(n, p);
        f.add_term(MultiIndex::unit(n + p, n + j), 1.0);
        f
    }

    pub fn from_terms<I>(n: usize, p: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut f = Polynomial::zero(n, p);
        for (idx, c) in terms {
            if idx.len() != n + p {
                return Err(Error::Dimension {
                    expected: n + p,
                    found: idx.len(),
                });
            }
            f.add_term(idx, c);
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_vars(&self) -> usize {
        self.n + self.p
    }

    /// Accumulates `c * x^idx`, dropping the term if it cancels.
    pub fn add_term(&mut self, idx: MultiIndex, c: f64) {
        debug_assert_eq!(idx.len(), self.n + self.p);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(idx);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, idx: &MultiIndex) -> f64 {
        self.terms.get(idx).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// `⌈deg / 2⌉`.
    pub fn half_degree(&self) -> usize {
        (self.degree() as usize).div_ceil(2)
    }

    /// True if some stored term has a positive x-exponent.
    pub fn involves_x(&self) -> bool {
        self.terms
            .keys()
            .any(|k| k.exponents()[..self.n].iter().any(|&e| e > 0))
    }

    pub fn involves_y(&self) -> bool {
        self.terms
            .keys()
            .any(|k| k.exponents()[self.n..].iter().any(|&e| e > 0))
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.num_vars() {
            return Err(Error::Dimension {
                expected: self.num_vars(),
                found: point.len(),
            });
        }
        Ok(self.eval_unchecked(point))
    }

    pub(crate) fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(idx, c)| {
                idx.exponents()
                    .iter()
                    .zip(point)
                    .fold(*c, |acc, (&e, &v)| acc * v.powi(e as i32))
            })
            .sum()
    }

    fn check_same_space(&self, other: &Polynomial) -> Result<()> {
        if self.n != other.n || self.p != other.p {
            return Err(Error::Dimension {
                expected: self.num_vars(),
                found: other.num_vars(),
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_space(other)?;
        let mut out = Polynomial::zero(self.n, self.p);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(a.add(b), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_space(other)?;
        let mut out = self.clone();
        for (b, cb) in &other.terms {
            out.add_term(b.clone(), *cb);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.n, self.p);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c * s);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.n, self.p, 1.0);
        for _ in 0..e {
            out = out.mul(self).expect("same space");
        }
        out
    }

    /// `self(shift + scale ⊙ v)`: every variable replaced by an affine image of itself.
    pub fn affine_substitute(&self, shift: &[f64], scale: &[f64]) -> Result<Polynomial> {
        let len = self.num_vars();
        for s in [shift, scale] {
            if s.len() != len {
                return Err(Error::Dimension {
                    expected: len,
                    found: s.len(),
                });
            }
        }
        let mut out = Polynomial::zero(self.n, self.p);
        for (idx, c) in &self.terms {
            let mut partial: Vec<(Vec<u32>, f64)> = vec![(vec![0; len], *c)];
            for (k, &e) in idx.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut next = Vec::with_capacity(partial.len() * (e as usize + 1));
                for (exps, coef) in &partial {
                    let mut binom = 1.0;
                    for j in 0..=e {
                        let w = binom * scale[k].powi(j as i32) * shift[k].powi((e - j) as i32);
                        binom = binom * f64::from(e - j) / f64::from(j + 1);
                        if w != 0.0 {
                            let mut ex = exps.clone();
                            ex[k] = j;
                            next.push((ex, coef * w));
                        }
                    }
                }
                partial = next;
            }
            for (ex, v) in partial {
                out.add_term(MultiIndex::new(ex), v);
            }
        }
        Ok(out)
    }

    /// Parses an expression in the problem-file grammar, see [`parse`](crate::parse).
    pub fn parse(text: &str, n: usize, p: usize) -> Result<Polynomial> {
        crate::parse::parse_polynomial(text, n, p)
    }
}

impl fmt::Display for Polynomial {
    /// Prints in the same grammar accepted by [`Polynomial::parse`], terms in basis order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (idx, &c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            if i == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut factors = Vec::new();
            for (slot, &e) in idx.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let name = if slot < self.n {
                    format!("x{}", slot + 1)
                } else {
                    format!("y{}", slot - self.n + 1)
                };
                factors.push(if e == 1 { name } else { format!("{name}^{e}") });
            }
            if factors.is_empty() {
                write!(f, "{mag:?}")?;
            } else if mag == 1.0 {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{mag:?}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(basis_size(1, 2), 3);
        assert_eq!(basis_size(3, 4), 35);
        assert_eq!(basis_size(2, 0), 1);
    }

    #[test]
    fn enumerate_small_bases() {
        assert_eq!(enumerate_basis(1, 1, 1), vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1])]);
        assert_eq!(
            enumerate_basis(1, 1, 2),
            vec![
                mi(&[0, 0]),
                mi(&[1, 0]),
                mi(&[0, 1]),
                mi(&[2, 0]),
                mi(&[1, 1]),
                mi(&[0, 2])
            ]
        );
        assert_eq!(
            enumerate_basis(0, 1, 3),
            vec![mi(&[0]), mi(&[1]), mi(&[2]), mi(&[3])]
        );
    }

    #[test]
    fn enumeration_matches_size_and_order() {
        for len in 1..=4 {
            for deg in 0..=6 {
                let basis = enumerate_basis(len, 0, deg);
                assert_eq!(basis.len(), basis_size(len, deg));
                assert!(basis[0].is_zero());
                for w in basis.windows(2) {
                    assert!(w[0] < w[1], "{:?} !< {:?}", w[0], w[1]);
                }
                for (pos, idx) in basis.iter().enumerate() {
                    assert_eq!(graded_rank(idx), pos);
                }
            }
        }
    }

    #[test]
    fn eval_examples() {
        let f = Polynomial::parse("-x1^2*y1", 1, 1).unwrap();
        assert_eq!(f.eval(&[1.0, 0.5]).unwrap(), -0.5);
        let g = Polynomial::parse("y1*x1 + (1 - y1)*x2", 2, 1).unwrap();
        assert!((g.eval(&[1.0, 1.0, 0.25]).unwrap() - 1.0).abs() < 1e-15);
        let h = Polynomial::parse("3 + x1*y1", 1, 1).unwrap();
        assert_eq!(h.eval(&[0.0, 0.0]).unwrap(), 3.0);
        assert!(matches!(h.eval(&[0.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn products() {
        let a = Polynomial::parse("1 + y1", 0, 1).unwrap();
        let b = Polynomial::parse("1 - y1", 0, 1).unwrap();
        assert_eq!(a.mul(&b).unwrap(), Polynomial::parse("1 - y1^2", 0, 1).unwrap());
        assert!(a.mul(&Polynomial::zero(0, 1)).unwrap().is_zero());
        let s = Polynomial::parse("x1 + y1", 1, 1).unwrap();
        let sq = s.mul(&s).unwrap();
        assert_eq!(sq.coefficient(&mi(&[1, 1])), 2.0);
        assert_eq!(sq.num_terms(), 3);
        assert_eq!(sq.degree(), 2);
        assert!(s.mul(&Polynomial::zero(2, 1)).is_err());
    }

    #[test]
    fn affine_substitution() {
        let f = Polynomial::parse("x1^2*y1 - 3*y1 + 2", 1, 1).unwrap();
        let g = f.affine_substitute(&[1.0, -0.5], &[2.0, 0.25]).unwrap();
        for pt in [[0.3, -0.7], [1.5, 2.0], [0.0, 0.0]] {
            let mapped = [1.0 + 2.0 * pt[0], -0.5 + 0.25 * pt[1]];
            assert!((g.eval(&pt).unwrap() - f.eval(&mapped).unwrap()).abs() < 1e-12);
        }
        assert!(f.affine_substitute(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn degree_conventions() {
        assert_eq!(Polynomial::zero(2, 1).degree(), 0);
        let f = Polynomial::parse("x1^3 - y1", 1, 1).unwrap();
        assert_eq!(f.degree(), 3);
        assert_eq!(f.half_degree(), 2);
    }

    #[test]
    fn display_round_trip() {
        let f = Polynomial::parse("-2*x1^2*y1 + 1 - 0.1*x2 + x1*x2*y1^3", 2, 1).unwrap();
        let g = Polynomial::parse(&f.to_string(), 2, 1).unwrap();
        assert_eq!(f, g);
        assert_eq!(Polynomial::zero(1, 1).to_string(), "0");
    }
}

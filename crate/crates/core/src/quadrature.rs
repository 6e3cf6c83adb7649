//! Gauss–Legendre rules and their tensor products on boxes.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Legendre polynomial `P_n(t)` and its derivative, by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// `num_nodes`-point Gauss–Legendre rule on `[a, b]`, nodes ascending.
///
/// Exact for polynomials of degree `<= 2·num_nodes - 1`.
pub fn gauss_legendre_rule(num_nodes: usize, interval: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    if num_nodes == 0 {
        return Err(Error::Invalid("a quadrature rule needs at least one node".into()));
    }
    let n = num_nodes;
    let (a, b) = interval;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        // t is the i-th largest root; mirror it for the smallest
        nodes[n - 1 - i] = mid + half * t;
        nodes[i] = mid - half * t;
        weights[n - 1 - i] = half * w;
        weights[i] = half * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = mid;
    }
    Ok((nodes, weights))
}

/// Tensor-product rule on a box: points and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn tensor_gauss_legendre(num_nodes: usize, domain: &[(f64, f64)]) -> Result<Self> {
        let mut points = vec![Vec::new()];
        let mut weights = vec![1.0];
        for &interval in domain {
            let (x, w) = gauss_legendre_rule(num_nodes, interval)?;
            let mut next_pts = Vec::with_capacity(points.len() * x.len());
            let mut next_w = Vec::with_capacity(points.len() * x.len());
            for (pt, pw) in points.iter().zip(&weights) {
                for (xi, wi) in x.iter().zip(&w) {
                    let mut q = pt.clone();
                    q.push(*xi);
                    next_pts.push(q);
                    next_w.push(pw * wi);
                }
            }
            points = next_pts;
            weights = next_w;
        }
        Ok(QuadratureRule { points, weights })
    }

    /// Rule on `[0, 1]^dim`.
    pub fn unit_box(num_nodes: usize, dim: usize) -> Result<Self> {
        QuadratureRule::tensor_gauss_legendre(num_nodes, &vec![(0.0, 1.0); dim])
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(pt, w)| w * f(pt))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

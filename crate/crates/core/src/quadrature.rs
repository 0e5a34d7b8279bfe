//! Quadrature rules for expectations under the standard Gaussian.

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::linalg::{eigh_desc, Matrix};

/// Half-width of the truncated real line used by piecewise rules.
/// The Gaussian density at 14 is below 1e-42.
const TRUNCATION: f64 = 14.0;

/// A rule `E[g(G)] ≈ Σ wᵢ g(xᵢ)` for `G ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussianRule {
    /// Gauss–Hermite rule (probabilists' weight) with `order` nodes, built
    /// with the Golub–Welsch eigenvalue method.
    pub fn hermite(order: usize) -> Result<Self> {
        if order == 0 {
            bail!(Argument, "quadrature order must be positive");
        }
        let mut jacobi = Matrix::zeros(order, order);
        for k in 1..order {
            let off = (k as f64).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let (vals, vecs) = eigh_desc(&jacobi)?;
        let mut pairs: Vec<(f64, f64)> =
            (0..order).map(|i| (vals[i], vecs[(0, i)] * vecs[(0, i)])).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        // symmetrize: the exact rule is symmetric about zero
        let n = pairs.len();
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let j = n - 1 - i;
            nodes.push(0.5 * (pairs[i].0 - pairs[j].0));
            weights.push(0.5 * (pairs[i].1 + pairs[j].1));
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { nodes, weights })
    }

    /// Composite Gauss–Legendre rule against the Gaussian density on
    /// `[-14, 14]`, split at every breakpoint and into unit-width panels.
    /// Integrands that are smooth between breakpoints converge
    /// geometrically in `per_panel`.
    pub fn piecewise(breakpoints: &[f64], per_panel: usize) -> Result<Self> {
        if per_panel == 0 {
            bail!(Argument, "panel order must be positive");
        }
        let (ref_nodes, ref_weights) = legendre(per_panel)?;
        let mut cuts: Vec<f64> = Vec::new();
        cuts.push(-TRUNCATION);
        let mut inner: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|b| b.is_finite() && b.abs() < TRUNCATION)
            .collect();
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        inner.dedup();
        cuts.extend(inner);
        cuts.push(TRUNCATION);

        let norm = 1.0 / (2.0 * core::f64::consts::PI).sqrt();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in cuts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let panels = ((hi - lo).ceil() as usize).max(1);
            let width = (hi - lo) / panels as f64;
            for p in 0..panels {
                let a = lo + p as f64 * width;
                let half = 0.5 * width;
                let mid = a + half;
                for (t, w) in ref_nodes.iter().zip(&ref_weights) {
                    let x = mid + half * t;
                    nodes.push(x);
                    weights.push(w * half * norm * (-0.5 * x * x).exp());
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut jacobi = Matrix::zeros(order, order);
    for k in 1..order {
        let kf = k as f64;
        let off = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let (vals, vecs) = eigh_desc(&jacobi)?;
    let mut pairs: Vec<(f64, f64)> =
        (0..order).map(|i| (vals[i], 2.0 * vecs[(0, i)] * vecs[(0, i)])).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    Ok(pairs.into_iter().unzip())
}

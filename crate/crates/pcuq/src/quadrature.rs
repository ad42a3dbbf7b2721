//! Gaussian quadrature rules matched to the polynomial families, and their
//! full-tensor products.
//!
//! 1D rules come from the symmetric-tridiagonal Jacobi matrix of the family's
//! monic recurrence (Golub-Welsch); weights are normalized against the
//! probability density, so they sum to one. Tensor grids enumerate nodes in
//! odometer order with the last dimension varying fastest — the node file
//! protocol depends on this ordering.

use nalgebra::DMatrix;

use crate::basis::{PcBasis, PolyFamily};
use crate::error::{Error, Result};
use crate::util::{fnv1a, KahanSum};

/// One-dimensional Gauss rule: ascending nodes, positive weights summing to 1.
#[derive(Debug, Clone)]
pub struct Quad1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// n-point Gauss rule for `family`, exact for polynomials up to degree 2n-1
/// against the family's probability density.
pub fn gauss_1d(family: PolyFamily, n: usize) -> Result<Quad1d> {
    if n == 0 {
        return Err(Error::EmptyQuadrature);
    }
    if n == 1 {
        // Single node at the density mean.
        return Ok(Quad1d {
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = family.monic_beta(k).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eigen = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = eigen
        .eigenvalues
        .iter()
        .enumerate()
        // First eigenvector component squared times mu_0 = 1.
        .map(|(j, &node)| (node, eigen.eigenvectors[(0, j)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Both densities are symmetric; fold the rule about the origin so node
    // pairs are exact negatives and the odd middle node is exactly zero.
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(Quad1d { nodes, weights })
}

/// Full-tensor quadrature grid over d dimensions.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    families: Vec<PolyFamily>,
    points_per_dim: Vec<usize>,
    /// Row-major N_q x d node coordinates.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Cartesian product of per-dimension Gauss rules.
    pub fn tensor(families: &[PolyFamily], points_per_dim: &[usize]) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if families.len() != points_per_dim.len() {
            return Err(Error::DimensionMismatch {
                expected: families.len(),
                got: points_per_dim.len(),
            });
        }
        let rules: Vec<Quad1d> = families
            .iter()
            .zip(points_per_dim)
            .map(|(&fam, &n)| gauss_1d(fam, n))
            .collect::<Result<_>>()?;
        let n_nodes = points_per_dim
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::GridSizeOverflow(format!("{points_per_dim:?}")))?;
        n_nodes
            .checked_mul(families.len())
            .ok_or_else(|| Error::GridSizeOverflow(format!("{points_per_dim:?}")))?;

        let dim = families.len();
        let mut nodes = Vec::with_capacity(n_nodes * dim);
        let mut weights = Vec::with_capacity(n_nodes);
        let mut idx = vec![0usize; dim];
        for _ in 0..n_nodes {
            let mut w = 1.0;
            for (i, &j) in idx.iter().enumerate() {
                nodes.push(rules[i].nodes[j]);
                w *= rules[i].weights[j];
            }
            weights.push(w);
            // odometer increment, last dimension fastest
            for i in (0..dim).rev() {
                idx[i] += 1;
                if idx[i] < points_per_dim[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        Ok(Self {
            families: families.to_vec(),
            points_per_dim: points_per_dim.to_vec(),
            nodes,
            weights,
        })
    }

    /// Isotropic grid: the same family and point count in every dimension.
    pub fn isotropic(dim: usize, family: PolyFamily, n_points: usize) -> Result<Self> {
        Self::tensor(&vec![family; dim], &vec![n_points; dim])
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    /// Total node count N_q.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn points_per_dim(&self) -> &[usize] {
        &self.points_per_dim
    }

    /// Coordinates of node `j`.
    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.dim()..(j + 1) * self.dim()]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Stable identity of the rule's construction inputs. Evaluation tables
    /// record it so a results file cannot silently bind to the wrong grid.
    pub fn fingerprint(&self) -> u64 {
        let mut repr = String::new();
        for (fam, n) in self.families.iter().zip(&self.points_per_dim) {
            repr.push_str(fam.name());
            repr.push(':');
            repr.push_str(&n.to_string());
            repr.push(';');
        }
        fnv1a(repr.as_bytes())
    }
}

/// Result of the discrete-orthogonality check of a basis under a rule.
#[derive(Debug, Clone, Copy)]
pub struct OrthogonalityReport {
    /// max over i, j of |<Psi_i Psi_j>_quad - delta_ij <Psi_i^2>|.
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Measure how well `rule` preserves the discrete orthogonality of `basis`.
///
/// An n-point Gauss factor integrates 1D polynomial products exactly up to
/// degree 2n-1, so the deviation is at roundoff whenever 2*order <= 2n-1 in
/// every dimension, and grows sharply once products alias.
pub fn check_discrete_orthogonality(
    basis: &PcBasis,
    rule: &QuadratureRule,
    tol: f64,
) -> Result<OrthogonalityReport> {
    if basis.dim() != rule.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: rule.dim(),
        });
    }
    let n_terms = basis.len();
    // Gram matrix accumulated with compensation; entries are small sums of
    // mixed-sign products.
    let mut gram = vec![KahanSum::new(); n_terms * n_terms];
    let mut row = vec![0.0; n_terms];
    for j in 0..rule.len() {
        basis.eval_into(rule.node(j), &mut row)?;
        let w = rule.weights()[j];
        for a in 0..n_terms {
            let wa = w * row[a];
            for b in a..n_terms {
                gram[a * n_terms + b].add(wa * row[b]);
            }
        }
    }
    let mut max_deviation = 0.0f64;
    for a in 0..n_terms {
        for b in a..n_terms {
            let exact = if a == b { basis.norms()[a] } else { 0.0 };
            let dev = (gram[a * n_terms + b].value() - exact).abs();
            max_deviation = max_deviation.max(dev);
        }
    }
    Ok(OrthogonalityReport {
        max_deviation,
        tol,
        pass: max_deviation <= tol,
    })
}

//! Orthogonal polynomial families and the multivariate total-degree basis.
//!
//! One-dimensional families are evaluated through their three-term
//! recurrences; the multivariate basis is the tensor product over all
//! multi-indices of total degree at most `order`, in graded-lexicographic
//! order. Squared norms are analytic, taken with respect to each family's
//! probability density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-dimensional orthogonal polynomial family, paired with the probability
/// density it is orthogonal against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolyFamily {
    /// Probabilists' Hermite, orthogonal against the standard normal density;
    /// squared norm n!.
    #[serde(rename = "hermite_probabilist")]
    HermiteProbabilist,
    /// Legendre on [-1, 1] against the uniform probability density 1/2;
    /// squared norm 1/(2n+1).
    #[serde(rename = "legendre")]
    Legendre,
}

impl PolyFamily {
    /// Evaluate the degree-`order` polynomial at `x` via the family's
    /// three-term recurrence.
    pub fn eval(self, order: usize, x: f64) -> f64 {
        match order {
            0 => 1.0,
            1 => x,
            _ => {
                let mut prev = 1.0;
                let mut cur = x;
                for k in 1..order {
                    let next = match self {
                        // He_{k+1} = x He_k - k He_{k-1}
                        PolyFamily::HermiteProbabilist => x * cur - k as f64 * prev,
                        // (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
                        PolyFamily::Legendre => {
                            ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64
                        }
                    };
                    prev = cur;
                    cur = next;
                }
                cur
            }
        }
    }

    /// Analytic squared norm against the family's probability density.
    pub fn norm_sq(self, order: usize) -> f64 {
        match self {
            PolyFamily::HermiteProbabilist => (1..=order).fold(1.0, |acc, k| acc * k as f64),
            PolyFamily::Legendre => 1.0 / (2 * order + 1) as f64,
        }
    }

    /// Off-diagonal recurrence coefficient beta_k of the monic three-term
    /// recurrence; feeds the Jacobi matrix for quadrature construction.
    pub(crate) fn monic_beta(self, k: usize) -> f64 {
        match self {
            PolyFamily::HermiteProbabilist => k as f64,
            PolyFamily::Legendre => {
                let kf = k as f64;
                kf * kf / (4.0 * kf * kf - 1.0)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolyFamily::HermiteProbabilist => "hermite_probabilist",
            PolyFamily::Legendre => "legendre",
        }
    }
}

/// Exponent vector of one multivariate basis term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex {
    orders: Vec<usize>,
}

impl MultiIndex {
    pub fn new(orders: Vec<usize>) -> Self {
        Self { orders }
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    /// Sum of the entries.
    pub fn total_degree(&self) -> usize {
        self.orders.iter().sum()
    }

    /// Number of nonzero entries (the l0-"norm").
    pub fn interaction_order(&self) -> usize {
        self.orders.iter().filter(|&&a| a > 0).count()
    }

    /// Dimensions with a nonzero entry.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.orders
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, _)| i)
    }
}

/// Multivariate total-degree polynomial chaos basis.
///
/// Terms are ordered graded-lexicographically: total degree ascending, and
/// within a degree by descending exponent vector (the monomial lex order with
/// the first dimension ranked highest). The ordering is part of the archive
/// file contract and never changes.
#[derive(Debug, Clone, PartialEq)]
pub struct PcBasis {
    dim: usize,
    order: usize,
    families: Vec<PolyFamily>,
    terms: Vec<MultiIndex>,
    norms: Vec<f64>,
}

impl PcBasis {
    /// Build the basis of all multi-indices with total degree <= `order`.
    pub fn new(dim: usize, order: usize, families: Vec<PolyFamily>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if families.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: families.len(),
            });
        }
        let count = term_count(dim, order).ok_or(Error::BasisSizeOverflow { dim, order })?;
        let mut terms = Vec::with_capacity(count);
        let mut scratch = vec![0usize; dim];
        for degree in 0..=order {
            push_degree_terms(&mut terms, &mut scratch, 0, degree);
        }
        debug_assert_eq!(terms.len(), count);
        let norms = terms
            .iter()
            .map(|mi| {
                mi.orders()
                    .iter()
                    .zip(&families)
                    .map(|(&a, fam)| fam.norm_sq(a))
                    .product()
            })
            .collect();
        Ok(Self {
            dim,
            order,
            families,
            terms,
            norms,
        })
    }

    /// Same family in every dimension.
    pub fn isotropic(dim: usize, order: usize, family: PolyFamily) -> Result<Self> {
        Self::new(dim, order, vec![family; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn terms(&self) -> &[MultiIndex] {
        &self.terms
    }

    /// Squared norms <Psi_k^2>, one per term.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Number of terms, P + 1.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluate every basis term at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(point, &mut out)?;
        Ok(out)
    }

    /// Evaluate every basis term at `point` into a caller-provided buffer.
    ///
    /// The hot path for projection and sampling: 1D values are tabulated once
    /// per dimension up to the basis order, then combined per term.
    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        assert_eq!(out.len(), self.len());
        // vals[i * (order+1) + a] = psi_a(point[i]) for dimension i.
        let stride = self.order + 1;
        let mut vals = vec![1.0; self.dim * stride];
        for (i, (&x, fam)) in point.iter().zip(&self.families).enumerate() {
            let row = &mut vals[i * stride..(i + 1) * stride];
            if stride > 1 {
                row[1] = x;
                for k in 1..self.order {
                    row[k + 1] = match fam {
                        PolyFamily::HermiteProbabilist => x * row[k] - k as f64 * row[k - 1],
                        PolyFamily::Legendre => {
                            ((2 * k + 1) as f64 * x * row[k] - k as f64 * row[k - 1])
                                / (k + 1) as f64
                        }
                    };
                }
            }
        }
        for (slot, mi) in out.iter_mut().zip(&self.terms) {
            let mut prod = 1.0;
            for (i, &a) in mi.orders().iter().enumerate() {
                if a > 0 {
                    prod *= vals[i * stride + a];
                }
            }
            *slot = prod;
        }
        Ok(())
    }
}

/// binomial(dim + order, order), or None on overflow.
pub(crate) fn term_count(dim: usize, order: usize) -> Option<usize> {
    let mut count: usize = 1;
    for i in 1..=order {
        count = count.checked_mul(dim.checked_add(i)?)?;
        count /= i; // exact: product of i consecutive integers is divisible by i!
    }
    Some(count)
}

/// Append all multi-indices of exact total degree `remaining` (over dims
/// `from..`) in descending lexicographic order.
fn push_degree_terms(
    terms: &mut Vec<MultiIndex>,
    scratch: &mut [usize],
    from: usize,
    remaining: usize,
) {
    if from + 1 == scratch.len() {
        scratch[from] = remaining;
        terms.push(MultiIndex::new(scratch.to_vec()));
        return;
    }
    for v in (0..=remaining).rev() {
        scratch[from] = v;
        push_degree_terms(terms, scratch, from + 1, remaining - v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn hermite_base_cases() {
        // psi_2(x) = x^2 - 1
        assert_abs_diff_eq!(PolyFamily::HermiteProbabilist.eval(2, 2.0), 3.0);
        assert_abs_diff_eq!(PolyFamily::Legendre.eval(1, 0.5), 0.5);
    }

    #[test]
    fn hermite_order4_from_recurrence() {
        // Hand-unrolled: psi_2(1) = 0, psi_3(1) = 1*0 - 2*1 = -2,
        // psi_4(1) = 1*(-2) - 3*0 = -2.
        assert_abs_diff_eq!(PolyFamily::HermiteProbabilist.eval(4, 1.0), -2.0);
    }

    #[test]
    fn legendre_matches_closed_forms() {
        for &x in &[-0.9, -0.3, 0.0, 0.4, 1.0] {
            assert_abs_diff_eq!(
                PolyFamily::Legendre.eval(2, x),
                0.5 * (3.0 * x * x - 1.0),
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                PolyFamily::Legendre.eval(3, x),
                0.5 * (5.0 * x * x * x - 3.0 * x),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn paper_production_sizes() {
        let basis = PcBasis::isotropic(4, 4, PolyFamily::HermiteProbabilist).unwrap();
        assert_eq!(basis.len(), 70); // (4+4)! / (4! 4!) = 70
        let constant = PcBasis::isotropic(2, 0, PolyFamily::Legendre).unwrap();
        assert_eq!(constant.len(), 1);
    }

    #[test]
    fn graded_lex_order_d2_p2() {
        let basis = PcBasis::isotropic(2, 2, PolyFamily::HermiteProbabilist).unwrap();
        let expected = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]];
        assert_eq!(basis.len(), 6);
        for (mi, exp) in basis.terms().iter().zip(expected) {
            assert_eq!(mi.orders(), exp);
        }
    }

    #[test]
    fn rejects_zero_dim() {
        assert!(matches!(
            PcBasis::new(0, 2, vec![]),
            Err(Error::ZeroDimension)
        ));
    }

    #[test]
    fn rejects_overflowing_sizes() {
        assert!(matches!(
            PcBasis::isotropic(40, 500, PolyFamily::Legendre),
            Err(Error::BasisSizeOverflow { .. })
        ));
    }

    #[test]
    fn eval_basis_d2_hermite_at_origin() {
        let basis = PcBasis::isotropic(2, 2, PolyFamily::HermiteProbabilist).unwrap();
        let values = basis.eval(&[0.0, 0.0]).unwrap();
        // psi_2(0) = -1; odd orders vanish at 0.
        let expected = [1.0, 0.0, 0.0, -1.0, 0.0, -1.0];
        for (v, e) in values.iter().zip(expected) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn eval_basis_d1_legendre() {
        let basis = PcBasis::isotropic(1, 1, PolyFamily::Legendre).unwrap();
        let values = basis.eval(&[0.25]).unwrap();
        assert_eq!(values, vec![1.0, 0.25]);
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let basis = PcBasis::isotropic(2, 2, PolyFamily::HermiteProbabilist).unwrap();
        assert!(matches!(
            basis.eval(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn norm_product_rule_exhaustive() {
        for dim in 1..=4 {
            for order in 0..=5 {
                let families: Vec<PolyFamily> = (0..dim)
                    .map(|i| {
                        if i % 2 == 0 {
                            PolyFamily::HermiteProbabilist
                        } else {
                            PolyFamily::Legendre
                        }
                    })
                    .collect();
                let basis = PcBasis::new(dim, order, families.clone()).unwrap();
                for (mi, &norm) in basis.terms().iter().zip(basis.norms()) {
                    let expect: f64 = mi
                        .orders()
                        .iter()
                        .zip(&families)
                        .map(|(&a, f)| f.norm_sq(a))
                        .product();
                    assert_abs_diff_eq!(norm, expect, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn term_count_identity() {
        fn binomial(n: usize, k: usize) -> usize {
            let mut acc: usize = 1;
            for i in 1..=k {
                acc = acc * (n - k + i) / i;
            }
            acc
        }
        for dim in 1..=6 {
            for order in 0..=6 {
                let basis = PcBasis::isotropic(dim, order, PolyFamily::Legendre).unwrap();
                assert_eq!(basis.len(), binomial(dim + order, order));
            }
        }
    }

    #[test]
    fn term_zero_is_constant_with_unit_norm() {
        let basis = PcBasis::isotropic(3, 4, PolyFamily::HermiteProbabilist).unwrap();
        assert_eq!(basis.terms()[0].orders(), &[0, 0, 0]);
        assert_eq!(basis.norms()[0], 1.0);
        assert_eq!(basis.eval(&[0.3, -0.7, 1.1]).unwrap()[0], 1.0);
    }

    /// Monte Carlo orthogonality of the 1D families: the sample mean of
    /// psi_m psi_n over 10^6 draws sits within 5 standard errors of
    /// delta_mn <psi_n^2>.
    #[test]
    fn continuous_orthogonality_monte_carlo() {
        let n_samples = 1_000_000usize;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2024);
        for family in [PolyFamily::HermiteProbabilist, PolyFamily::Legendre] {
            let draws: Vec<f64> = (0..n_samples)
                .map(|_| match family {
                    PolyFamily::HermiteProbabilist => {
                        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
                    }
                    PolyFamily::Legendre => rng.random::<f64>() * 2.0 - 1.0,
                })
                .collect();
            for m in 0..=4usize {
                for n in m..=4usize {
                    let prods: Vec<f64> =
                        draws.iter().map(|&x| family.eval(m, x) * family.eval(n, x)).collect();
                    let mean = prods.iter().sum::<f64>() / n_samples as f64;
                    let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>()
                        / (n_samples - 1) as f64;
                    let se = (var / n_samples as f64).sqrt();
                    let expect = if m == n { family.norm_sq(n) } else { 0.0 };
                    assert!(
                        (mean - expect).abs() <= 5.0 * se.max(1e-12),
                        "{family:?} m={m} n={n}: mean {mean} expect {expect} se {se}"
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn deterministic_ordering(dim in 1usize..5, order in 0usize..5) {
            let a = PcBasis::isotropic(dim, order, PolyFamily::HermiteProbabilist).unwrap();
            let b = PcBasis::isotropic(dim, order, PolyFamily::HermiteProbabilist).unwrap();
            prop_assert_eq!(a.terms(), b.terms());
            // degree is non-decreasing and term 0 is the constant
            for w in a.terms().windows(2) {
                prop_assert!(w[0].total_degree() <= w[1].total_degree());
            }
            prop_assert_eq!(a.terms()[0].total_degree(), 0);
        }

        #[test]
        fn eval_matches_termwise_product(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let basis = PcBasis::new(
                3,
                4,
                vec![
                    PolyFamily::HermiteProbabilist,
                    PolyFamily::Legendre,
                    PolyFamily::HermiteProbabilist,
                ],
            )
            .unwrap();
            let point: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let fast = basis.eval(&point).unwrap();
            for (mi, &v) in basis.terms().iter().zip(&fast) {
                let slow: f64 = mi
                    .orders()
                    .iter()
                    .zip(basis.families())
                    .zip(&point)
                    .map(|((&a, f), &x)| f.eval(a, x))
                    .product();
                prop_assert!((v - slow).abs() <= 1e-12 * slow.abs().max(1.0));
            }
        }
    }
}

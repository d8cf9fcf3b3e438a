//! Hermite polynomials in the generating-function normalization
//! `e^{λx − λ²/2} = Σ λ^ℓ h_ℓ(x)`, so that `√(ℓ!)·h_ℓ` is orthonormal in
//! `L²(γ₁)`, plus multi-index algebra and sparse Hermite series.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A multi-index `ℓ ∈ ℕⁿ` with its cached degree `|ℓ|`.
///
/// Ordered by degree first and lexicographically within a degree, so maps
/// keyed by multi-indices iterate deterministically from low to high degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<u32>", into = "Vec<u32>")]
pub struct MultiIndex {
    entries: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        let degree = entries.iter().sum();
        Self { entries, degree }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![0; dim])
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// `ℓ! = ℓ₁!⋯ℓₙ!` in log-space.
    pub fn ln_factorial(&self) -> f64 {
        self.entries.iter().map(|&l| ln_factorial(l)).sum()
    }

    pub fn factorial(&self) -> f64 {
        self.ln_factorial().exp()
    }

    /// All multi-indices of dimension `dim` with `|ℓ| ≤ max_degree`, in
    /// canonical order.
    pub fn all_up_to(dim: usize, max_degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for degree in 0..=max_degree {
            let mut current = vec![0u32; dim];
            compositions(dim, degree, 0, &mut current, &mut out);
        }
        out
    }
}

// Lexicographically decreasing in the first coordinate, so that within a
// degree (d,0,...) comes before (0,...,d); then reversed below so the final
// order is ascending lexicographic.
fn compositions(dim: usize, remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if dim == 0 {
        if remaining == 0 {
            out.push(MultiIndex::new(Vec::new()));
        }
        return;
    }
    if pos == dim - 1 {
        current[pos] = remaining;
        out.push(MultiIndex::new(current.clone()));
        return;
    }
    for v in 0..=remaining {
        current[pos] = v;
        compositions(dim, remaining - v, pos + 1, current, out);
    }
    current[pos] = 0;
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| self.entries.cmp(&other.entries))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(entries: Vec<u32>) -> Self {
        Self::new(entries)
    }
}

impl From<MultiIndex> for Vec<u32> {
    fn from(m: MultiIndex) -> Self {
        m.entries
    }
}

pub fn ln_factorial(l: u32) -> f64 {
    if l < 2 {
        0.0
    } else {
        ln_gamma(l as f64 + 1.0)
    }
}

/// `h_ℓ(x)` by the three-term recurrence `h_{ℓ+1} = (x·h_ℓ − h_{ℓ−1})/(ℓ+1)`.
pub fn hermite_eval(ell: u32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("hermite argument {x}")));
    }
    let mut prev = 1.0;
    if ell == 0 {
        return Ok(prev);
    }
    let mut cur = x;
    for l in 1..ell {
        let next = (x * cur - prev) / (l as f64 + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Normalized values `√(ℓ!)·h_ℓ(x)` for `ℓ = 0..=max_degree`.
///
/// Uses the orthonormal recurrence `ĥ_{ℓ+1} = (x·ĥ_ℓ − √ℓ·ĥ_{ℓ−1})/√(ℓ+1)`,
/// which keeps magnitudes O(1) near the bulk of `γ₁`.
pub fn normalized_hermite_all(max_degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    normalized_hermite_into(max_degree, x, &mut out);
    out
}

pub(crate) fn normalized_hermite_into(max_degree: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max_degree == 0 {
        return;
    }
    out.push(x);
    for l in 1..max_degree {
        let lf = l as f64;
        let next = (x * out[l] - lf.sqrt() * out[l - 1]) / (lf + 1.0).sqrt();
        out.push(next);
    }
}

/// `√(ℓ!)·h_ℓ(x)` for a single degree.
pub fn normalized_hermite(ell: u32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("hermite argument {x}")));
    }
    Ok(*normalized_hermite_all(ell as usize, x).last().unwrap())
}

/// `h_ℓ(x) = ∏ᵢ h_{ℓᵢ}(xᵢ)`.
pub fn hermite_eval_multi(ell: &MultiIndex, x: &[f64]) -> Result<f64> {
    check_dim(ell, x)?;
    ell.entries()
        .iter()
        .zip(x)
        .try_fold(1.0, |acc, (&l, &xi)| Ok(acc * hermite_eval(l, xi)?))
}

/// `√(ℓ!)·h_ℓ(x)` for a multi-index.
pub fn normalized_hermite_multi(ell: &MultiIndex, x: &[f64]) -> Result<f64> {
    check_dim(ell, x)?;
    ell.entries()
        .iter()
        .zip(x)
        .try_fold(1.0, |acc, (&l, &xi)| Ok(acc * normalized_hermite(l, xi)?))
}

fn check_dim(ell: &MultiIndex, x: &[f64]) -> Result<()> {
    if ell.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: ell.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `∫ h_ℓ² dγₙ = 1/ℓ!`.
pub fn hermite_norm_sq(ell: &MultiIndex) -> f64 {
    ln_hermite_norm_sq(ell).exp()
}

pub fn ln_hermite_norm_sq(ell: &MultiIndex) -> f64 {
    -ell.ln_factorial()
}

/// Right-hand side of the growth bound
/// `|h_ℓ(x)√(ℓ!)| ≤ |ℓ|ⁿ·3^{|ℓ|}·∏ max{1, |xᵢ|^{ℓᵢ}}`.
pub fn hermite_growth_bound(ell: &MultiIndex, x: &[f64]) -> Result<f64> {
    check_dim(ell, x)?;
    if ell.degree() == 0 {
        return Err(Error::InvalidArgument("growth bound needs |ℓ| ≥ 1".into()));
    }
    let deg = ell.degree() as f64;
    let n = ell.dim() as i32;
    let prod: f64 = ell
        .entries()
        .iter()
        .zip(x)
        .map(|(&l, &xi)| xi.abs().powi(l as i32).max(1.0))
        .product();
    Ok(deg.powi(n) * 3f64.powf(deg) * prod)
}

/// Sparse expansion `f = Σ a_ℓ √(ℓ!) h_ℓ` in the orthonormal Hermite basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteSeries {
    dim: usize,
    truncation_degree: u32,
    coefficients: BTreeMap<MultiIndex, f64>,
}

impl HermiteSeries {
    pub fn new(dim: usize, truncation_degree: u32) -> Self {
        Self {
            dim,
            truncation_degree,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation_degree(&self) -> u32 {
        self.truncation_degree
    }

    pub fn insert(&mut self, ell: MultiIndex, coefficient: f64) -> Result<()> {
        if ell.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: ell.dim(),
            });
        }
        if ell.degree() > self.truncation_degree {
            return Err(Error::InvalidArgument(format!(
                "degree {} above truncation {}",
                ell.degree(),
                self.truncation_degree
            )));
        }
        self.coefficients.insert(ell, coefficient);
        Ok(())
    }

    pub fn get(&self, ell: &MultiIndex) -> f64 {
        self.coefficients.get(ell).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coefficients.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `Σ_{|ℓ|=m} a_ℓ²` for `m = 0..=truncation_degree`.
    pub fn energy_by_degree(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.truncation_degree as usize + 1];
        for (ell, a) in self.iter() {
            out[ell.degree() as usize] += a * a;
        }
        out
    }

    /// `Σ a_ℓ²`, the squared `L²(γₙ)` norm of the truncated series.
    pub fn norm_sq(&self) -> f64 {
        self.coefficients.values().map(|a| a * a).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let per_axis: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| normalized_hermite_all(self.truncation_degree as usize, xi))
            .collect();
        Ok(self
            .iter()
            .map(|(ell, a)| {
                a * ell
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| per_axis[i][l as usize])
                    .product::<f64>()
            })
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::quadrature::QuadratureGrid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // the explicit factorial sum, used as the oracle for the recurrence
    fn hermite_sum(ell: u32, x: f64) -> f64 {
        let mut total = 0.0;
        for m in 0..=ell / 2 {
            let p = ell - 2 * m;
            let ln_den = ln_factorial(m) + ln_factorial(p);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * x.powi(p as i32) * 2f64.powi(-(m as i32)) * (-ln_den).exp();
        }
        total
    }

    #[test]
    fn low_degree_values() {
        assert_eq!(hermite_eval(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite_eval(1, 3.7).unwrap(), 3.7);
        assert_eq!(hermite_eval(2, 1.0).unwrap(), 0.0);
        assert_relative_eq!(hermite_eval(2, 3.0).unwrap(), 4.0, epsilon = 1e-15);
        assert!(hermite_eval(3, f64::NAN).is_err());
    }

    #[test]
    fn multi_index_products() {
        let zero = MultiIndex::new(vec![0, 0]);
        assert_eq!(hermite_eval_multi(&zero, &[5.0, -2.0]).unwrap(), 1.0);
        let one = MultiIndex::new(vec![1, 1]);
        assert_eq!(hermite_eval_multi(&one, &[0.3, -1.7]).unwrap(), 0.3 * -1.7);
        let mixed = MultiIndex::new(vec![2, 1]);
        assert_eq!(hermite_eval_multi(&mixed, &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(
            hermite_eval_multi(&mixed, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn norms() {
        assert_eq!(hermite_norm_sq(&MultiIndex::new(vec![0])), 1.0);
        assert_relative_eq!(hermite_norm_sq(&MultiIndex::new(vec![3])), 1.0 / 6.0, epsilon = 1e-14);
        assert_relative_eq!(hermite_norm_sq(&MultiIndex::new(vec![2, 2])), 0.25, epsilon = 1e-14);
        // no overflow far beyond 170!
        let big = MultiIndex::new(vec![200, 150]);
        assert!(ln_hermite_norm_sq(&big).is_finite());
        assert_eq!(hermite_norm_sq(&big), 0.0);
    }

    #[test]
    fn norm_of_2_2_by_quadrature() {
        let grid = QuadratureGrid::tensor_gauss_hermite(2, 40);
        let ell = MultiIndex::new(vec![2, 2]);
        let v = grid.integrate(|x| hermite_eval_multi(&ell, x).unwrap().powi(2));
        assert_relative_eq!(v, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn growth_bound_examples() {
        let b = hermite_growth_bound(&MultiIndex::new(vec![1]), &[0.5]).unwrap();
        assert_eq!(b, 3.0);
        let b = hermite_growth_bound(&MultiIndex::new(vec![2, 0]), &[2.0, 0.0]).unwrap();
        assert_eq!(b, 144.0);
        let b = hermite_growth_bound(&MultiIndex::new(vec![1, 1]), &[1.0, 1.0]).unwrap();
        assert_eq!(b, 36.0);
        assert!(hermite_growth_bound(&MultiIndex::zeros(2), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn recurrence_matches_factorial_sum() {
        for ell in 0..=20 {
            for i in 0..=64 {
                let x = -8.0 + 0.25 * i as f64;
                let r = hermite_eval(ell, x).unwrap();
                let s = hermite_sum(ell, x);
                let scale = s.abs().max(r.abs()).max(1e-300);
                // relative accuracy except at roots, where absolute accuracy is what matters
                let err = (r - s).abs();
                let typical: f64 = (0..=ell / 2)
                    .map(|m| {
                        x.abs().powi((ell - 2 * m) as i32)
                            * 2f64.powi(-(m as i32))
                            * (-(ln_factorial(m) + ln_factorial(ell - 2 * m))).exp()
                    })
                    .sum();
                assert!(
                    err <= 1e-10 * scale || err <= 1e-13 * typical,
                    "ell={ell} x={x} rec={r} sum={s}"
                );
            }
        }
    }

    #[test]
    fn normalized_recurrence_is_stable_at_degree_60() {
        for &x in &[-12.0, -3.3, 0.0, 1.5, 12.0] {
            let direct = hermite_eval(60, x).unwrap() * (ln_factorial(60) / 2.0).exp();
            let normalized = normalized_hermite(60, x).unwrap();
            assert_relative_eq!(direct, normalized, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn orthonormality_by_tensor_quadrature() {
        for dim in 1..=3usize {
            let grid = QuadratureGrid::tensor_gauss_hermite(dim, if dim == 3 { 16 } else { 40 });
            let indices = MultiIndex::all_up_to(dim, 6);
            let values: Vec<Vec<f64>> = grid
                .nodes()
                .iter()
                .map(|(x, _)| {
                    indices
                        .iter()
                        .map(|ell| normalized_hermite_multi(ell, x).unwrap())
                        .collect()
                })
                .collect();
            for a in 0..indices.len() {
                for b in a..indices.len() {
                    let ip: f64 = grid
                        .nodes()
                        .iter()
                        .zip(&values)
                        .map(|((_, w), v)| w * v[a] * v[b])
                        .sum();
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (ip - expected).abs() < 1e-8,
                        "dim {dim}: <{:?},{:?}> = {ip}",
                        indices[a],
                        indices[b]
                    );
                }
            }
        }
    }

    #[test]
    fn generating_function() {
        for lambda in [0.3f64, 0.9] {
            for i in 0..=32 {
                let x = -4.0 + 0.25 * i as f64;
                let series: f64 = (0..=40)
                    .map(|l| lambda.powi(l) * hermite_eval(l as u32, x).unwrap())
                    .sum();
                let exact = (lambda * x - lambda * lambda / 2.0).exp();
                assert!((series - exact).abs() < 1e-8, "λ={lambda} x={x}");
            }
        }
    }

    #[test]
    fn canonical_order() {
        let all = MultiIndex::all_up_to(2, 2);
        let entries: Vec<Vec<u32>> = all.iter().map(|m| m.entries().to_vec()).collect();
        assert_eq!(
            entries,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![0, 2], vec![1, 1], vec![2, 0]]
        );
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
        assert_eq!(MultiIndex::all_up_to(3, 24).len(), 2925);
    }

    #[test]
    fn series_evaluates_and_rejects_bad_keys() {
        let mut s = HermiteSeries::new(2, 3);
        s.insert(MultiIndex::new(vec![0, 0]), 0.5).unwrap();
        s.insert(MultiIndex::new(vec![1, 1]), 2.0).unwrap();
        assert!(s.insert(MultiIndex::new(vec![4, 0]), 1.0).is_err());
        assert!(s.insert(MultiIndex::new(vec![1]), 1.0).is_err());
        assert_relative_eq!(s.evaluate(&[0.5, 3.0]).unwrap(), 0.5 + 2.0 * 1.5, epsilon = 1e-15);
        assert_eq!(s.energy_by_degree(), vec![0.25, 0.0, 4.0, 0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn growth_bound_holds(
            entries in prop::collection::vec(0u32..=12, 1..=4),
            xs in prop::collection::vec(-6.0f64..6.0, 4),
        ) {
            let ell = MultiIndex::new(entries);
            prop_assume!(ell.degree() >= 1 && ell.degree() <= 30);
            let x = &xs[..ell.dim()];
            let lhs = normalized_hermite_multi(&ell, x).unwrap().abs();
            let rhs = hermite_growth_bound(&ell, x).unwrap();
            prop_assert!(lhs <= rhs, "{:?} {:?}: {} > {}", ell, x, lhs, rhs);
        }
    }
}

//! Noise stability of functions `{0, …, k−1}ⁿ → Δ_k`.
//!
//! Inputs are indexed row-major with the first coordinate most significant.
//! Coordinates of `σ` use `0` for the constant basis function, so
//! `|σ| = #{c : σ_c ≠ 0}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest table [`discrete_stability`] enumerates by default (`3¹⁰`).
pub const DEFAULT_ENUMERATION_CAP: usize = 59_049;
const SIMPLEX_TOL: f64 = 1e-12;

/// An orthonormal basis of functions on `{0, …, k−1}` under
/// `⟨g, h⟩ = (1/k) Σ g(σ)h(σ)`, with the constant function first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaryBasis {
    k: usize,
    /// `functions[i][σ]`.
    functions: Vec<Vec<f64>>,
}

impl KaryBasis {
    /// Gram–Schmidt on `1_{σ=j} − 1/k` in the given order of `j`, after the
    /// constant function. Any `k − 1` distinct symbols span the complement.
    pub fn gram_schmidt(k: usize, order: &[usize]) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument("need k ≥ 2".into()));
        }
        let mut seen = vec![false; k];
        if order.len() != k - 1 || order.iter().any(|&j| j >= k || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::InvalidArgument("order must list k − 1 distinct symbols".into()));
        }
        let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / k as f64;
        let mut functions = vec![vec![1.0; k]];
        for &j in order {
            let mut v: Vec<f64> = (0..k)
                .map(|s| if s == j { 1.0 } else { 0.0 } - 1.0 / k as f64)
                .collect();
            for w in &functions {
                let c = inner(&v, w);
                v.iter_mut().zip(w).for_each(|(x, y)| *x -= c * y);
            }
            let norm = inner(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            functions.push(v);
        }
        Ok(Self { k, functions })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `Wᵢ(σ)`, 0-based.
    pub fn value(&self, i: usize, sigma: usize) -> f64 {
        self.functions[i][sigma]
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        self.functions[i]
            .iter()
            .zip(&self.functions[j])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.k as f64
    }
}

/// The standard basis: Gram–Schmidt over symbols `0, …, k−2`.
pub fn kary_basis(k: usize) -> Result<KaryBasis> {
    KaryBasis::gram_schmidt(k, &(0..k.saturating_sub(1)).collect::<Vec<_>>())
}

fn table_size(k: usize, n: usize) -> Result<usize> {
    (0..n)
        .try_fold(1usize, |acc, _| acc.checked_mul(k))
        .ok_or(Error::EnumerationCap {
            size: (k as u128).saturating_pow(n as u32),
            cap: usize::MAX as u128,
        })
}

/// The digits of `index` in base `k`, most significant first.
pub fn decode(index: usize, k: usize, n: usize) -> Vec<usize> {
    let mut digits = vec![0; n];
    let mut rest = index;
    for c in (0..n).rev() {
        digits[c] = rest % k;
        rest /= k;
    }
    digits
}

/// A function `{0, …, k−1}ⁿ → Δ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KaryRepr", into = "KaryRepr")]
pub struct KaryFunction {
    k: usize,
    n: usize,
    table: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct KaryRepr {
    k: usize,
    n: usize,
    table: Vec<f64>,
}

impl TryFrom<KaryRepr> for KaryFunction {
    type Error = Error;
    fn try_from(r: KaryRepr) -> Result<Self> {
        if r.k == 0 || !r.table.len().is_multiple_of(r.k) {
            return Err(Error::InvalidArgument(
                "flat table length is not a multiple of k".into(),
            ));
        }
        let rows = r.table.chunks(r.k).map(<[f64]>::to_vec).collect();
        KaryFunction::new(r.k, r.n, rows)
    }
}

impl From<KaryFunction> for KaryRepr {
    fn from(f: KaryFunction) -> Self {
        KaryRepr {
            k: f.k,
            n: f.n,
            table: f.table.into_iter().flatten().collect(),
        }
    }
}

impl KaryFunction {
    pub fn new(k: usize, n: usize, table: Vec<Vec<f64>>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument("need k ≥ 2".into()));
        }
        let size = table_size(k, n)?;
        if table.len() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                got: table.len(),
            });
        }
        for row in &table {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| !v.is_finite() || *v < -SIMPLEX_TOL) || (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidArgument(format!(
                    "entry {row:?} is not a point of the simplex"
                )));
            }
        }
        Ok(Self { k, n, table })
    }

    /// Tabulates `f` over all inputs.
    pub fn from_fn<F: Fn(&[usize]) -> Vec<f64>>(k: usize, n: usize, f: F) -> Result<Self> {
        let size = table_size(k.max(1), n)?;
        let table = (0..size).map(|x| f(&decode(x, k, n))).collect();
        Self::new(k, n, table)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn value(&self, x: &[usize]) -> &[f64] {
        let index = x.iter().fold(0, |acc, &d| acc * self.k + d);
        &self.table[index]
    }

    /// The same function with the symbols of both inputs and outputs
    /// relabeled by `perm`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k];
        if perm.len() != self.k
            || perm
                .iter()
                .any(|&p| p >= self.k || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidArgument("not a permutation of the alphabet".into()));
        }
        let mut inverse = vec![0; self.k];
        for (a, &b) in perm.iter().enumerate() {
            inverse[b] = a;
        }
        Self::from_fn(self.k, self.n, |x| {
            let pre: Vec<usize> = x.iter().map(|&d| inverse[d]).collect();
            let src = self.value(&pre);
            (0..self.k).map(|j| src[inverse[j]]).collect()
        })
    }
}

fn vertex(k: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; k];
    e[j] = 1.0;
    e
}

/// `x ↦ e_{x_c}`.
pub fn dictator(k: usize, n: usize, coordinate: usize) -> Result<KaryFunction> {
    if coordinate >= n {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coordinate} out of range for n = {n}"
        )));
    }
    KaryFunction::from_fn(k, n, |x| vertex(k, x[coordinate]))
}

/// Plurality of `m` votes over `k` symbols; ties map to the uniform point.
pub fn plurality_fn(m: usize, k: usize) -> Result<KaryFunction> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one vote".into()));
    }
    KaryFunction::from_fn(k, m, |x| {
        let mut counts = vec![0usize; k];
        x.iter().for_each(|&d| counts[d] += 1);
        let top = *counts.iter().max().unwrap();
        let winners: Vec<usize> = (0..k).filter(|&j| counts[j] == top).collect();
        if winners.len() == 1 {
            vertex(k, winners[0])
        } else {
            vec![1.0 / k as f64; k]
        }
    })
}

/// `f̂ᵢ(σ)` for every `σ` (row-major like inputs) and output `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTable {
    pub k: usize,
    pub n: usize,
    pub coefficients: Vec<Vec<f64>>,
}

impl FourierTable {
    /// `|σ|` of a coefficient index.
    pub fn level(&self, sigma: usize) -> usize {
        decode(sigma, self.k, self.n).iter().filter(|&&d| d != 0).count()
    }
}

// applies `matrix[new][old]` along every coordinate of a row-major table of k-vectors
fn tensor_apply(table: &mut [Vec<f64>], k: usize, n: usize, matrix: &[Vec<f64>]) {
    let mut stride = 1;
    for _ in 0..n {
        let block = stride * k;
        for start in (0..table.len()).step_by(block) {
            for offset in 0..stride {
                let slots: Vec<usize> = (0..k).map(|d| start + offset + d * stride).collect();
                let old: Vec<Vec<f64>> = slots.iter().map(|&s| table[s].clone()).collect();
                for (new, &slot) in slots.iter().enumerate() {
                    let row = &mut table[slot];
                    row.iter_mut().for_each(|v| *v = 0.0);
                    for (o, vals) in old.iter().enumerate() {
                        let c = matrix[new][o];
                        if c != 0.0 {
                            row.iter_mut().zip(vals).for_each(|(r, v)| *r += c * v);
                        }
                    }
                }
            }
        }
        stride = block;
    }
}

/// The expansion `fᵢ = Σ_σ f̂ᵢ(σ) W_σ`.
pub fn fourier_transform(f: &KaryFunction, basis: &KaryBasis) -> Result<FourierTable> {
    if basis.k() != f.k {
        return Err(Error::DimensionMismatch {
            expected: f.k,
            got: basis.k(),
        });
    }
    let k = f.k;
    let forward: Vec<Vec<f64>> = (0..k)
        .map(|s| (0..k).map(|x| basis.value(s, x) / k as f64).collect())
        .collect();
    let mut coefficients = f.table.clone();
    tensor_apply(&mut coefficients, k, f.n, &forward);
    Ok(FourierTable {
        k,
        n: f.n,
        coefficients,
    })
}

/// Rebuilds the table `x ↦ Σ_σ f̂(σ) W_σ(x)`.
pub fn inverse_fourier_transform(t: &FourierTable, basis: &KaryBasis) -> Result<Vec<Vec<f64>>> {
    if basis.k() != t.k {
        return Err(Error::DimensionMismatch {
            expected: t.k,
            got: basis.k(),
        });
    }
    let backward: Vec<Vec<f64>> = (0..t.k)
        .map(|x| (0..t.k).map(|s| basis.value(s, x)).collect())
        .collect();
    let mut table = t.coefficients.clone();
    tensor_apply(&mut table, t.k, t.n, &backward);
    Ok(table)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidCorrelation(rho));
    }
    Ok(())
}

/// `T_ρ f = Σ_σ ρ^{|σ|} f̂(σ) W_σ` as raw vectors, which need not lie in Δ_k.
pub fn discrete_t_rho(f: &KaryFunction, rho: f64) -> Result<Vec<Vec<f64>>> {
    check_rho(rho)?;
    let basis = kary_basis(f.k)?;
    let mut t = fourier_transform(f, &basis)?;
    for sigma in 0..t.coefficients.len() {
        let damp = rho.powi(t.level(sigma) as i32);
        t.coefficients[sigma].iter_mut().for_each(|c| *c *= damp);
    }
    inverse_fourier_transform(&t, &basis)
}

fn check_cap(f: &KaryFunction, cap: usize) -> Result<()> {
    if f.table.len() > cap {
        return Err(Error::EnumerationCap {
            size: f.table.len() as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

/// `Σ_d ρ^d Σ_{|σ|=d} Σᵢ f̂ᵢ(σ)²`: coefficients of the stability polynomial.
pub fn stability_polynomial(f: &KaryFunction, basis: &KaryBasis) -> Result<Vec<f64>> {
    let t = fourier_transform(f, basis)?;
    let mut poly = vec![0.0; f.n + 1];
    for (sigma, row) in t.coefficients.iter().enumerate() {
        poly[t.level(sigma)] += row.iter().map(|c| c * c).sum::<f64>();
    }
    Ok(poly)
}

/// `(1/kⁿ) Σ_x ⟨f(x), T_ρ f(x)⟩` through the Fourier expansion, capped at
/// [`DEFAULT_ENUMERATION_CAP`] inputs.
pub fn discrete_stability(f: &KaryFunction, rho: f64) -> Result<f64> {
    discrete_stability_capped(f, rho, DEFAULT_ENUMERATION_CAP)
}

pub fn discrete_stability_capped(f: &KaryFunction, rho: f64, cap: usize) -> Result<f64> {
    check_rho(rho)?;
    check_cap(f, cap)?;
    let poly = stability_polynomial(f, &kary_basis(f.k)?)?;
    Ok(poly.iter().rev().fold(0.0, |acc, c| acc * rho + c))
}

/// The same quantity by exact enumeration of all input pairs under the
/// rerandomization kernel `P(y_c | x_c) = ρ·1{y_c = x_c} + (1−ρ)/k`, which is
/// a signed kernel for `ρ < 0`.
pub fn discrete_stability_rerandomized(f: &KaryFunction, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let size = f.table.len();
    if size
        .checked_mul(size)
        .is_none_or(|s| s > DEFAULT_ENUMERATION_CAP * DEFAULT_ENUMERATION_CAP)
    {
        return Err(Error::EnumerationCap {
            size: (size as u128) * (size as u128),
            cap: (DEFAULT_ENUMERATION_CAP as u128).pow(2),
        });
    }
    let (k, n) = (f.k, f.n);
    let keep = rho + (1.0 - rho) / k as f64;
    let fresh = (1.0 - rho) / k as f64;
    let total: f64 = (0..size)
        .into_par_iter()
        .map(|xi| {
            let x = decode(xi, k, n);
            let fx = &f.table[xi];
            (0..size)
                .map(|yi| {
                    let y = decode(yi, k, n);
                    let weight: f64 = x
                        .iter()
                        .zip(&y)
                        .map(|(a, b)| if a == b { keep } else { fresh })
                        .product();
                    weight * fx.iter().zip(&f.table[yi]).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / size as f64)
}

/// `Σ_{σ : σ_c ≠ 0} f̂ᵢ(σ)²`.
pub fn influence(f: &KaryFunction, coordinate: usize, output: usize) -> Result<f64> {
    if coordinate >= f.n || output >= f.k {
        return Err(Error::InvalidArgument("coordinate or output index out of range".into()));
    }
    let t = fourier_transform(f, &kary_basis(f.k)?)?;
    Ok(t.coefficients
        .iter()
        .enumerate()
        .filter(|(sigma, _)| decode(*sigma, f.k, f.n)[coordinate] != 0)
        .map(|(_, row)| row[output] * row[output])
        .sum())
}

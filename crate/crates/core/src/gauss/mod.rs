//! The standard Gaussian measure `γₙ`: densities, correlated sampling,
//! reproducible Monte Carlo, sector and surface measures, and tail moments.

pub mod quadrature;

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::hermite::MultiIndex;

pub use quadrature::{QuadratureGrid, Scheme};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934;

pub fn normal_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

/// Upper tail `P(Z > t)`, accurate far into the tail.
pub fn normal_sf(t: f64) -> f64 {
    0.5 * libm::erfc(t / SQRT_2)
}

/// A correlation coefficient in `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CorrelationParam(f64);

impl CorrelationParam {
    pub fn new(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidCorrelation(rho));
        }
        Ok(Self(rho))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `√(1 − ρ²)`.
    pub fn complement(self) -> f64 {
        (1.0 - self.0 * self.0).max(0.0).sqrt()
    }

    pub fn is_degenerate(self) -> bool {
        self.0.abs() == 1.0
    }
}

impl TryFrom<f64> for CorrelationParam {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CorrelationParam> for f64 {
    fn from(c: CorrelationParam) -> f64 {
        c.0
    }
}

/// Name of the generator behind every stochastic routine.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha), seeded via seed_from_u64";

/// A reproducible random source: ChaCha20 keyed by a 64-bit seed, with an
/// independent stream per sub-task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// A child source for sub-task `index`, disjoint from this source's own
    /// stream and from every other child.
    pub fn derive(&self, index: u64) -> Self {
        let mut rng = self.rng();
        let mut child_seed = rng.random::<u64>();
        child_seed ^= index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Self {
            seed: child_seed,
            stream: 0,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draws `(X, Y)` with `Y = ρX + √(1−ρ²)Z`, `X, Z` independent standard
/// Gaussians in `ℝⁿ`.
pub fn sample_correlated_pair<R: Rng + ?Sized>(rho: CorrelationParam, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    sample_correlated_pair_into(rho, rng, &mut x, &mut y);
    (x, y)
}

pub(crate) fn sample_correlated_pair_into<R: Rng + ?Sized>(
    rho: CorrelationParam,
    rng: &mut R,
    x: &mut [f64],
    y: &mut [f64],
) {
    let r = rho.value();
    let s = rho.complement();
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        *xi = rng.sample(StandardNormal);
        if s == 0.0 {
            *yi = r * *xi;
        } else {
            let z: f64 = rng.sample(StandardNormal);
            *yi = r * *xi + s * z;
        }
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Sample mean and standard error of a vector of Monte Carlo statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: u64,
}

const MC_CHUNK: u64 = 1 << 15;

/// Averages `width` statistics over `samples` draws.
///
/// The budget is cut into fixed-size chunks; chunk `c` draws from stream
/// `c` of the master seed, and chunk sums are merged in chunk order, so the
/// result is bit-identical for any number of worker threads.
pub fn monte_carlo<F>(source: RandomSource, samples: u64, width: usize, draw: F) -> MonteCarloEstimate
where
    F: Fn(&mut ChaCha20Rng, &mut [f64]) + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = source.with_stream(c).rng();
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut sum = vec![0.0; width];
            let mut sum_sq = vec![0.0; width];
            let mut buf = vec![0.0; width];
            for _ in 0..count {
                buf.iter_mut().for_each(|b| *b = 0.0);
                draw(&mut rng, &mut buf);
                for k in 0..width {
                    sum[k] += buf[k];
                    sum_sq[k] += buf[k] * buf[k];
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0; width];
    let mut sum_sq = vec![0.0; width];
    for (s, q) in partials {
        for k in 0..width {
            sum[k] += s[k];
            sum_sq[k] += q[k];
        }
    }
    let n = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = mean
        .iter()
        .zip(&sum_sq)
        .map(|(m, q)| {
            let var = (q / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
            (var / n).sqrt()
        })
        .collect();
    MonteCarloEstimate {
        mean,
        std_error,
        samples,
    }
}

/// `γ₂` of the planar sector `{θ ∈ [lo, hi]}`.
pub fn gaussian_measure_sector(angle_lo: f64, angle_hi: f64) -> Result<f64> {
    let width = angle_hi - angle_lo;
    if !(width >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative sector width {width}")));
    }
    if width > 2.0 * PI + 1e-12 {
        return Err(Error::InvalidArgument(format!("sector width {width} exceeds 2π")));
    }
    Ok((width / (2.0 * PI)).min(1.0))
}

/// A codimension-one affine piece through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "piece")]
pub enum Piece {
    /// `{x : ⟨x, normal⟩ = 0}`.
    Hyperplane { normal: Vec<f64> },
    /// `{x : ⟨x, normal⟩ = 0, ⟨x, direction⟩ ≥ 0}` with `direction ⟂ normal`.
    HalfHyperplane { normal: Vec<f64>, direction: Vec<f64> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let norm = dot(v, v).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Unsupported("degenerate normal or direction".into()));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Gaussian surface measure of `(piece − shift)/scale`.
///
/// For a hyperplane this is the density of `⟨·, ν⟩` at the offset; a
/// half-hyperplane additionally keeps the Gaussian measure of the half-space
/// of its footprint inside the hyperplane.
pub fn gaussian_surface_measure_shifted(piece: &Piece, shift: &[f64], scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!("scale {scale} must be positive")));
    }
    match piece {
        Piece::Hyperplane { normal } => {
            check_len(normal.len(), shift.len())?;
            let nu = unit(normal)?;
            Ok(normal_pdf(dot(shift, &nu) / scale))
        }
        Piece::HalfHyperplane { normal, direction } => {
            check_len(normal.len(), shift.len())?;
            check_len(direction.len(), shift.len())?;
            let nu = unit(normal)?;
            let u = unit(direction)?;
            if dot(&nu, &u).abs() > 1e-10 {
                return Err(Error::Unsupported(
                    "half-hyperplane direction not orthogonal to its normal".into(),
                ));
            }
            Ok(normal_pdf(dot(shift, &nu) / scale) * normal_cdf(dot(shift, &u) / scale))
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Which tail region a moment bound concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRegion {
    /// `[−η, η] × [t, ∞) × ℝⁿ⁻²`.
    Slab,
    /// The complement of the ball `B(0, t)`.
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub region: TailRegion,
    pub lhs: f64,
    pub rhs: f64,
}

impl TailBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// `E|Z|^m` for a standard normal `Z`.
pub(crate) fn abs_moment(m: u32) -> f64 {
    let a = (m as f64 + 1.0) / 2.0;
    (0.5 * m as f64 * 2f64.ln() + ln_gamma(a) - 0.5 * PI.ln()).exp()
}

/// Regularized upper incomplete gamma `Q(a, x)` including the endpoints.
fn upper_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(a, x)
    }
}

/// `∫_lo^hi |y|^m dγ₁(y)` for `0 ≤ lo ≤ hi ≤ ∞`.
fn abs_moment_on(m: u32, lo: f64, hi: f64) -> f64 {
    let a = (m as f64 + 1.0) / 2.0;
    let upper = |t: f64| upper_gamma_q(a, t * t / 2.0);
    0.5 * abs_moment(m) * (upper(lo) - upper(hi))
}

/// Evaluates the cubic moment sum `Σ_{|ℓ|≤3} ∫ ∏|yᵢ|^{ℓᵢ} dγₙ` over the
/// chosen tail region together with the corresponding closed-form bound.
///
/// The slab integrand factors over coordinates and uses exact one-dimensional
/// truncated moments. The ball case splits each monomial into its radial
/// part, a χ-distribution tail, and its angular mean.
pub fn tail_bound_check(eta: f64, t: f64, n: usize, region: TailRegion) -> Result<TailBound> {
    if !(eta > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidArgument("η and t must be positive".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("tail bounds need n ≥ 2".into()));
    }
    let nf = n as f64;
    let decay = (-t * t / 2.0).exp();
    let indices = MultiIndex::all_up_to(n, 3);
    let (lhs, rhs) = match region {
        TailRegion::Slab => {
            let lhs = indices
                .iter()
                .map(|ell| {
                    let e = ell.entries();
                    let first = 2.0 * abs_moment_on(e[0], 0.0, eta);
                    let second = abs_moment_on(e[1], t, f64::INFINITY);
                    let rest: f64 = e[2..].iter().map(|&m| abs_moment(m)).product();
                    first * second * rest
                })
                .sum();
            (lhs, 3000.0 * nf.powi(3) * eta * (t * t + 2.0) * decay)
        }
        TailRegion::Ball => {
            let lhs = indices
                .iter()
                .map(|ell| {
                    let full: f64 = ell.entries().iter().map(|&m| abs_moment(m)).product();
                    full * upper_gamma_q((nf + ell.degree() as f64) / 2.0, t * t / 2.0)
                })
                .sum();
            let fact = ln_gamma(nf + 3.0).exp();
            (lhs, 100.0 * fact * (t.powi(n as i32 + 1) + 1.0) * decay)
        }
    };
    Ok(TailBound { region, lhs, rhs })
}

//! The noise operator `T_ρ`, its generator `L`, the derivative `d/dρ T_ρ`,
//! the stability functional `J` and its first variation `ψ_ρ`.
//!
//! Planar cones get exact treatments: `T_ρ 1_A(x)` is the Gaussian mass of
//! a translated wedge, and its moments come from closed-form radial
//! integrals about the apex. Hermite coefficients of sectors are exact
//! trigonometric polynomials in the arc endpoints.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::quadrature::{gauss_legendre_on, integrate_adaptive, QuadratureGrid};
use crate::gauss::{
    gaussian_surface_measure_shifted, monte_carlo, normal_sf, sample_correlated_pair_into, standard_normal_vec,
    CorrelationParam, Piece, RandomSource,
};
use crate::hermite::{normalized_hermite_into, HermiteSeries, MultiIndex};
use crate::partition::{arc_overlap, dot, ConicalPartition, PlanarView, Sector};

/// Default truncation degree of Hermite series.
pub const DEFAULT_DEGREE: u32 = 24;
/// Step of centered ρ-differences.
pub const RHO_STEP: f64 = 1e-4;

/// A value of an operator at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorPoint {
    pub x: Vec<f64>,
    pub rho: CorrelationParam,
    pub value: f64,
}

/// How `J` (or `ψ_ρ`) is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Method {
    MonteCarlo { samples: u64, seed: u64 },
    Quadrature2d { nodes: usize },
    HermiteSeries { degree: u32 },
}

impl Method {
    /// Quadrature for planar partitions, Monte Carlo otherwise.
    pub fn default_for(p: &ConicalPartition) -> Self {
        if p.planar_view().is_some() {
            Method::Quadrature2d { nodes: 64 }
        } else {
            Method::MonteCarlo {
                samples: 1_000_000,
                seed: 0,
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Method::MonteCarlo { .. } => "montecarlo",
            Method::Quadrature2d { .. } => "quadrature2d",
            Method::HermiteSeries { .. } => "hermite_series",
        }
    }
}

/// A value with the method that produced it and an error estimate: the
/// Monte Carlo standard error, a quadrature refinement difference, or a
/// series tail bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub value: f64,
    pub method: String,
    pub error_estimate: f64,
    pub params: Method,
    pub seed: Option<u64>,
}

impl StabilityResult {
    fn new(value: f64, error_estimate: f64, params: Method) -> Self {
        let seed = match params {
            Method::MonteCarlo { seed, .. } => Some(seed),
            _ => None,
        };
        Self {
            value,
            method: params.tag().to_string(),
            error_estimate,
            params,
            seed,
        }
    }
}

fn open_rho(rho: CorrelationParam) -> Result<(f64, f64)> {
    if rho.is_degenerate() {
        return Err(Error::InvalidArgument(format!(
            "ρ = {} needs |ρ| < 1 here",
            rho.value()
        )));
    }
    Ok((rho.value(), rho.complement()))
}

/// `T_ρ f(x) = ∫ f(xρ + y√(1−ρ²)) dγₙ(y)` on a quadrature grid; `T_{±1} f(x) = f(±x)`.
pub fn t_rho_apply<F: Fn(&[f64]) -> f64>(f: F, rho: CorrelationParam, x: &[f64], grid: &QuadratureGrid) -> Result<f64> {
    if x.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: x.len(),
        });
    }
    let r = rho.value();
    if rho.is_degenerate() {
        let px: Vec<f64> = x.iter().map(|v| r * v).collect();
        return finite(f(&px), "T_ρ at ρ = ±1");
    }
    let s = rho.complement();
    let mut point = vec![0.0; x.len()];
    let mut total = 0.0;
    for (y, w) in grid.nodes() {
        for k in 0..x.len() {
            point[k] = r * x[k] + s * y[k];
        }
        total += w * f(&point);
    }
    finite(total, "T_ρ quadrature sum")
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn spatial_step(x: &[f64]) -> f64 {
    1e-4 * dot(x, x).sqrt().max(1.0)
}

/// `L f(x) = −Δf(x) + ⟨x, ∇f(x)⟩` by centered differences with step
/// `1e−4·max(1, ‖x‖)`.
pub fn l_apply<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Result<f64> {
    let h = spatial_step(x);
    let f0 = f(x);
    let mut point = x.to_vec();
    let mut total = 0.0;
    for k in 0..x.len() {
        point[k] = x[k] + h;
        let fp = f(&point);
        point[k] = x[k] - h;
        let fm = f(&point);
        point[k] = x[k];
        let second = (fp - 2.0 * f0 + fm) / (h * h);
        let first = (fp - fm) / (2.0 * h);
        total += -second + x[k] * first;
    }
    finite(total, "L by finite differences")
}

/// `d/dρ T_ρ f(x)` by the integral form
/// `(1/s)[⟨x, ∫ y f(xρ+ys) dγ⟩ + (ρ/s) ∫ Σ(1−yᵢ²) f(xρ+ys) dγ]`, `s = √(1−ρ²)`.
pub fn dt_drho<F: Fn(&[f64]) -> f64>(f: F, rho: CorrelationParam, x: &[f64], grid: &QuadratureGrid) -> Result<f64> {
    if x.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: x.len(),
        });
    }
    let (r, s) = open_rho(rho)?;
    let n = x.len();
    let mut point = vec![0.0; n];
    let mut first = vec![0.0; n];
    let mut volume = 0.0;
    for (y, w) in grid.nodes() {
        for k in 0..n {
            point[k] = r * x[k] + s * y[k];
        }
        let v = w * f(&point);
        for k in 0..n {
            first[k] += y[k] * v;
        }
        volume += (n as f64 - dot(y, y)) * v;
    }
    finite((dot(x, &first) + r / s * volume) / s, "dT/dρ integral form")
}

/// `d/dρ T_ρ f(x) = ρ⁻¹ L T_ρ f(x)`, with `T_ρ f` on the grid and `L` by
/// finite differences.
pub fn dt_drho_via_l<F: Fn(&[f64]) -> f64>(
    f: F,
    rho: CorrelationParam,
    x: &[f64],
    grid: &QuadratureGrid,
) -> Result<f64> {
    let (r, _) = open_rho(rho)?;
    if r == 0.0 {
        return Err(Error::InvalidArgument(
            "the L-route divides by ρ; use the integral form at ρ = 0".into(),
        ));
    }
    let t = |z: &[f64]| t_rho_apply(&f, rho, z, grid).unwrap_or(f64::NAN);
    Ok(l_apply(t, x)? / r)
}

// ---------------------------------------------------------------------------
// translated wedges

/// Gaussian moments of the translated wedge `apex + {t·u(φ) : t ≥ 0, φ ∈ arc}`:
/// mass, `∫ z` and `∫ z zᵀ` against `γ₂`, with the quadrature error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct WedgeMoments {
    pub mass: f64,
    pub first: [f64; 2],
    pub second: [[f64; 2]; 2],
    pub error: f64,
}

const WEDGE_TOL: f64 = 1e-15;
const LARGE_B: f64 = 3.0;

fn tail_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_on(64, 0.0, 48.0))
}

// ∫₀^∞ t^m e^{−(t+b)²/2} dt for m = 1, 2, 3 multiplied by e^{−h/2}
fn radial_moments(b: f64, h: f64) -> [f64; 3] {
    if b <= LARGE_B {
        let g = (-0.5 * b * b).exp();
        let e = TAU.sqrt() * normal_sf(b);
        let damp = (-0.5 * h).exp();
        [
            damp * (g - b * e),
            damp * ((1.0 + b * b) * e - b * g),
            damp * ((b * b + 2.0) * g - (3.0 * b + b * b * b) * e),
        ]
    } else {
        // e^{−b²/2} b^{−(m+1)} ∫ u^m e^{−u} e^{−u²/(2b²)} du, free of cancellation
        let (us, ws) = tail_rule();
        let mut acc = [0.0; 3];
        for (u, w) in us.iter().zip(ws) {
            let v = w * (-u - 0.5 * u * u / (b * b)).exp();
            acc[0] += v * u;
            acc[1] += v * u * u;
            acc[2] += v * u * u * u;
        }
        let damp = (-0.5 * (h + b * b)).exp();
        [
            damp * acc[0] / (b * b),
            damp * acc[1] / (b * b * b),
            damp * acc[2] / (b * b * b * b),
        ]
    }
}

pub(crate) fn wedge_moments(apex: [f64; 2], arc: Sector) -> WedgeMoments {
    if arc.width >= TAU {
        return WedgeMoments {
            mass: 1.0,
            first: [0.0; 2],
            second: [[1.0, 0.0], [0.0, 1.0]],
            error: 0.0,
        };
    }
    if arc.width <= 0.0 {
        return WedgeMoments {
            mass: 0.0,
            first: [0.0; 2],
            second: [[0.0; 2]; 2],
            error: 0.0,
        };
    }
    let q = apex;
    let qq = q[0] * q[0] + q[1] * q[1];
    let integrand = |phi: f64| -> [f64; 6] {
        let (s, c) = phi.sin_cos();
        let b = q[0] * c + q[1] * s;
        let h = (qq - b * b).max(0.0);
        let [k1, k2, k3] = radial_moments(b, h);
        [
            k1,
            q[0] * k1 + c * k2,
            q[1] * k1 + s * k2,
            q[0] * q[0] * k1 + 2.0 * q[0] * c * k2 + c * c * k3,
            q[0] * q[1] * k1 + (q[0] * s + q[1] * c) * k2 + c * s * k3,
            q[1] * q[1] * k1 + 2.0 * q[1] * s * k2 + s * s * k3,
        ]
    };
    // the integrand peaks where the ray points back through the origin
    let mut cuts = vec![arc.start, arc.end()];
    if qq > 0.0 {
        let peak = (-q[1]).atan2(-q[0]);
        let offset = (peak - arc.start).rem_euclid(TAU);
        if offset > 0.0 && offset < arc.width {
            cuts.insert(1, arc.start + offset);
        }
    }
    let mut acc = [0.0; 6];
    let mut error = 0.0;
    for w in cuts.windows(2) {
        let (v, e) = integrate_adaptive(integrand, w[0], w[1], WEDGE_TOL, 2000);
        for k in 0..6 {
            acc[k] += v[k];
        }
        error += e;
    }
    let scale = 1.0 / TAU;
    WedgeMoments {
        mass: acc[0] * scale,
        first: [acc[1] * scale, acc[2] * scale],
        second: [[acc[3] * scale, acc[4] * scale], [acc[4] * scale, acc[5] * scale]],
        error: error * scale,
    }
}

fn planar_cell(p: &ConicalPartition, i: usize) -> Result<(PlanarView, Sector)> {
    if i >= p.k() {
        return Err(Error::InvalidArgument(format!(
            "cell {i} out of range for k = {}",
            p.k()
        )));
    }
    let view = p.require_planar()?;
    let arc = view.arcs[i];
    Ok((view, arc))
}

fn check_point(p: &ConicalPartition, x: &[f64]) -> Result<()> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    crate::error::ensure_finite("evaluation point", x)
}

/// `T_ρ 1_{Aᵢ}(x)` exactly, as the Gaussian mass of `(Aᵢ − xρ)/√(1−ρ²)`.
pub fn t_rho_indicator(p: &ConicalPartition, i: usize, rho: CorrelationParam, x: &[f64]) -> Result<f64> {
    check_point(p, x)?;
    let (view, arc) = planar_cell(p, i)?;
    let r = rho.value();
    if rho.is_degenerate() {
        let z: Vec<f64> = x.iter().map(|v| r * v).collect();
        return Ok(if p.classify_unchecked(&z) == i { 1.0 } else { 0.0 });
    }
    let s = rho.complement();
    let xp = view.project(x);
    Ok(wedge_moments([-r * xp[0] / s, -r * xp[1] / s], arc).mass)
}

/// The pieces of `d/dρ T_ρ 1_{Aᵢ}(x)`: the gradient term
/// `(1/s)⟨x, ∫ y 1_{A'} dγ⟩` and the volume term `(ρ/s²) ∫ Σ(1−yᵢ²) 1_{A'} dγ`,
/// where `A' = (Aᵢ − xρ)/s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoDerivativeTerms {
    pub gradient: f64,
    pub volume: f64,
    pub error: f64,
}

impl RhoDerivativeTerms {
    pub fn total(&self) -> f64 {
        self.gradient + self.volume
    }
}

/// Both terms of the integral form, from the moments of the translated wedge.
pub fn indicator_dt_drho_terms(
    p: &ConicalPartition,
    i: usize,
    rho: CorrelationParam,
    x: &[f64],
) -> Result<RhoDerivativeTerms> {
    check_point(p, x)?;
    let (view, arc) = planar_cell(p, i)?;
    let (r, s) = open_rho(rho)?;
    let xp = view.project(x);
    let m = wedge_moments([-r * xp[0] / s, -r * xp[1] / s], arc);
    let gradient = (xp[0] * m.first[0] + xp[1] * m.first[1]) / s;
    // the n − 2 coordinates off the plane integrate (1 − y²) to zero
    let volume = r / (s * s) * (2.0 * m.mass - m.second[0][0] - m.second[1][1]);
    let xnorm = dot(&xp, &xp).sqrt();
    Ok(RhoDerivativeTerms {
        gradient,
        volume,
        error: m.error * (xnorm / s + 4.0 * r.abs() / (s * s)),
    })
}

/// `d/dρ T_ρ 1_{Aᵢ}(x)` by the integral form.
pub fn indicator_dt_drho(p: &ConicalPartition, i: usize, rho: CorrelationParam, x: &[f64]) -> Result<f64> {
    Ok(indicator_dt_drho_terms(p, i, rho, x)?.total())
}

// (ray direction, inward normal) for both edges of an arc
fn arc_edges(arc: Sector) -> [([f64; 2], [f64; 2]); 2] {
    let (s0, c0) = arc.start.sin_cos();
    let (s1, c1) = arc.end().sin_cos();
    [([c0, s0], [-s0, c0]), ([c1, s1], [s1, -c1])]
}

/// `ρ⁻¹ ∇T_ρ 1_{Aᵢ}(x)` from the Gaussian surface measures of the shifted
/// boundary rays, `(1/s) Σ n_in · γ(δ_{(ray − xρ)/s})`.
pub fn indicator_scaled_gradient(p: &ConicalPartition, i: usize, rho: CorrelationParam, x: &[f64]) -> Result<Vec<f64>> {
    check_point(p, x)?;
    let (view, arc) = planar_cell(p, i)?;
    let (r, s) = open_rho(rho)?;
    let mut grad = vec![0.0; p.dim()];
    if arc.width <= 0.0 || arc.width >= TAU {
        return Ok(grad);
    }
    let shift: Vec<f64> = x.iter().map(|v| r * v).collect();
    for (dir, normal) in arc_edges(arc) {
        let piece = Piece::HalfHyperplane {
            normal: view.embed(normal),
            direction: view.embed(dir),
        };
        let mass = gaussian_surface_measure_shifted(&piece, &shift, s)?;
        let n_amb = view.embed(normal);
        for k in 0..grad.len() {
            grad[k] += n_amb[k] * mass / s;
        }
    }
    Ok(grad)
}

/// The two evaluations of `ρ⁻¹ L T_ρ(1_{Aᵢ} − 1_{Aⱼ})(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LtDifference {
    /// Boundary route: surface-measure gradient plus the volume term.
    pub boundary: Option<f64>,
    /// Integral route: the full integral form on the indicator difference.
    pub direct: f64,
    pub gradient_term: f64,
    pub volume_term: f64,
    pub error: f64,
}

/// `ρ⁻¹ L T_ρ(1_{Aᵢ} − 1_{Aⱼ})(x)` by the boundary identity and by the
/// integral form; the boundary route is absent when the cells do not reduce
/// to sectors of a plane.
pub fn lt_rho_difference(
    p: &ConicalPartition,
    i: usize,
    j: usize,
    rho: CorrelationParam,
    x: &[f64],
) -> Result<LtDifference> {
    if i == j {
        return Err(Error::InvalidArgument("need two distinct cells".into()));
    }
    let (r, _) = open_rho(rho)?;
    if r == 0.0 {
        return Err(Error::InvalidArgument("need 0 < |ρ| < 1".into()));
    }
    let ti = indicator_dt_drho_terms(p, i, rho, x)?;
    let tj = indicator_dt_drho_terms(p, j, rho, x)?;
    let volume = ti.volume - tj.volume;
    let gi = indicator_scaled_gradient(p, i, rho, x)?;
    let gj = indicator_scaled_gradient(p, j, rho, x)?;
    let gradient: f64 = x.iter().zip(gi.iter().zip(&gj)).map(|(xk, (a, b))| xk * (a - b)).sum();
    Ok(LtDifference {
        boundary: Some(gradient + volume),
        direct: ti.total() - tj.total(),
        gradient_term: gradient,
        volume_term: volume,
        error: ti.error + tj.error,
    })
}

/// `ρ⁻¹ L T_ρ(1_{Aᵢ} − 1_{Aⱼ})(x)` for cones without a planar reduction,
/// through the integral form on a quadrature grid.
pub fn lt_rho_difference_on_grid(
    p: &ConicalPartition,
    i: usize,
    j: usize,
    rho: CorrelationParam,
    x: &[f64],
    grid: &QuadratureGrid,
) -> Result<LtDifference> {
    let f = |z: &[f64]| {
        let c = p.classify_unchecked(z);
        (c == i) as u8 as f64 - (c == j) as u8 as f64
    };
    let direct = dt_drho(f, rho, x, grid)?;
    Ok(LtDifference {
        boundary: None,
        direct,
        gradient_term: f64::NAN,
        volume_term: f64::NAN,
        error: f64::NAN,
    })
}

/// `∫ Σ(1−yᵢ²) 1_{Aᵢ}(y) dγₙ(y)` on a quadrature grid.
pub fn cone_moment(p: &ConicalPartition, i: usize, grid: &QuadratureGrid) -> Result<f64> {
    if grid.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: grid.dim(),
        });
    }
    let n = p.dim() as f64;
    Ok(grid.integrate(|y| {
        if p.classify_unchecked(y) == i {
            n - dot(y, y)
        } else {
            0.0
        }
    }))
}

/// [`cone_moment`] for planar partitions by polar Gauss–Legendre over the
/// arc of cell `i` and `r ∈ [0, 12]`; directions orthogonal to the plane
/// contribute nothing.
pub fn cone_moment_planar(p: &ConicalPartition, i: usize, nodes: usize) -> Result<f64> {
    p.check_cell(i)?;
    let arc = p.require_planar()?.arcs[i];
    if arc.width == 0.0 {
        return Ok(0.0);
    }
    let (radii, rw) = gauss_legendre_on(nodes, 0.0, 12.0);
    let (angles, aw) = gauss_legendre_on(nodes, arc.start, arc.end());
    let mut total = 0.0;
    for (t, wt) in angles.iter().zip(&aw) {
        let u = [t.cos(), t.sin()];
        for (r, wr) in radii.iter().zip(&rw) {
            let y = [r * u[0], r * u[1]];
            total += wt * wr * r * (2.0 - dot(&y, &y)) * (-0.5 * r * r).exp();
        }
    }
    Ok(total / TAU)
}

/// Monte Carlo version of [`cone_moment`], with its standard error.
pub fn cone_moment_monte_carlo(p: &ConicalPartition, i: usize, source: RandomSource, samples: u64) -> (f64, f64) {
    let n = p.dim();
    let est = monte_carlo(source, samples, 1, |rng, out| {
        let y = standard_normal_vec(n, rng);
        if p.classify_unchecked(&y) == i {
            out[0] = n as f64 - dot(&y, &y);
        }
    });
    (est.mean[0], est.std_error[0])
}

// ---------------------------------------------------------------------------
// J

// density of the angle difference δ between ρ-correlated planar Gaussians
fn angle_difference_density(rho: f64, delta: f64) -> f64 {
    let beta = rho * delta.cos();
    let one_minus = 1.0 - beta * beta;
    (1.0 - rho * rho) / (TAU * one_minus) * (1.0 + beta * (-beta).acos() / one_minus.sqrt())
}

fn self_overlap(width: f64, delta: f64) -> f64 {
    let d = delta.abs();
    (width - d).max(0.0) + (width - (TAU - d)).max(0.0)
}

// Σᵢ (1/π) ∫₀^π p_ρ(δ) overlap(αᵢ, δ) dδ by composite Gauss–Legendre, split at
// the kinks of the overlap and graded towards δ = 0 where p_ρ concentrates
fn planar_stability(widths: &[f64], rho: f64, nodes: usize) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let mut base = vec![0.0, PI];
    for g in [0.125, 0.5, 2.0] {
        // the density concentrates at δ = 0 for ρ → 1 and at δ = π for ρ → −1
        let at = if rho >= 0.0 { g * s } else { PI - g * s };
        if at > 0.0 && at < PI {
            base.push(at);
        }
    }
    let mut total = 0.0;
    for &w in widths {
        if w <= 0.0 {
            continue;
        }
        let mut cuts = base.clone();
        for kink in [w.min(PI), TAU - w] {
            if kink > 0.0 && kink < PI {
                cuts.push(kink);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for seg in cuts.windows(2) {
            let (xs, ws) = gauss_legendre_on(nodes, seg[0], seg[1]);
            for (d, wt) in xs.iter().zip(&ws) {
                total += wt * angle_difference_density(rho, *d) * self_overlap(w, *d);
            }
        }
    }
    total / PI
}

/// `J = Σᵢ P(X ∈ Aᵢ, Y ∈ Aᵢ)` for ρ-correlated standard Gaussians.
pub fn noise_stability_j(p: &ConicalPartition, rho: CorrelationParam, method: Method) -> Result<StabilityResult> {
    let r = rho.value();
    match method {
        Method::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidArgument("need at least two samples".into()));
            }
            let n = p.dim();
            let est = monte_carlo(RandomSource::new(seed), samples, 1, |rng, out| {
                let mut x = vec![0.0; n];
                let mut y = vec![0.0; n];
                sample_correlated_pair_into(rho, rng, &mut x, &mut y);
                if p.classify_unchecked(&x) == p.classify_unchecked(&y) {
                    out[0] = 1.0;
                }
            });
            Ok(StabilityResult::new(est.mean[0], est.std_error[0], method))
        }
        Method::Quadrature2d { nodes } => {
            let view = p.planar_view().ok_or_else(|| {
                Error::Unsupported("quadrature2d needs a partition reducible to planar sectors".into())
            })?;
            let widths: Vec<f64> = view.arcs.iter().map(|a| a.width).collect();
            if r == 1.0 {
                return Ok(StabilityResult::new(widths.iter().sum::<f64>() / TAU, 0.0, method));
            }
            if r == -1.0 {
                let v: f64 = view.arcs.iter().map(|a| arc_overlap(*a, a.rotated(PI))).sum::<f64>() / TAU;
                return Ok(StabilityResult::new(v, 0.0, method));
            }
            let nodes = nodes.max(2);
            let fine = planar_stability(&widths, r, nodes);
            let coarse = planar_stability(&widths, r, nodes / 2);
            Ok(StabilityResult::new(fine, (fine - coarse).abs(), method))
        }
        Method::HermiteSeries { degree } => {
            let (r, _) = open_rho(rho)?;
            let energies = cell_degree_energies(p, degree)?;
            let value: f64 = energies
                .iter()
                .map(|e| e.iter().enumerate().map(|(m, v)| r.powi(m as i32) * v).sum::<f64>())
                .sum();
            let mass: f64 = energies.iter().map(|e| e[0].sqrt()).sum();
            let tail = r.abs().powi(degree as i32 + 1) / (1.0 - r.abs()) * mass;
            Ok(StabilityResult::new(value, tail, method))
        }
    }
}

/// `J` as a function of the whole Hermite data of the cells.
pub fn stability_from_coefficients(cells: &[HermiteSeries], rho: f64) -> f64 {
    cells
        .iter()
        .flat_map(|c| {
            c.iter()
                .map(|(ell, a)| rho.powi(ell.degree() as i32) * a * a)
                .collect::<Vec<_>>()
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Hermite coefficients of sectors

struct SectorTable {
    indices: Vec<MultiIndex>,
    // Fourier coefficients of G_ℓ(φ) = (1/2π)∫₀^∞ √ℓ! h_ℓ(r u(φ)) r e^{−r²/2} dr
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl SectorTable {
    fn build(degree: u32) -> Self {
        let d = degree as usize;
        let angles = 2 * d + 2;
        // h_ℓ(r) r e^{−r²/2} is negligible beyond √(2D) + 12
        let cutoff = 12.0 + (2.0 * degree as f64).sqrt();
        let (rs, wr) = gauss_legendre_on(96 + 2 * d, 0.0, cutoff);
        let radial_w: Vec<f64> = rs
            .iter()
            .zip(&wr)
            .map(|(r, w)| w * r * (-0.5 * r * r).exp() / TAU)
            .collect();
        let indices = MultiIndex::all_up_to(2, degree);
        let mut samples = vec![vec![0.0; angles]; indices.len()];
        let mut hx = Vec::new();
        let mut hy = Vec::new();
        for j in 0..angles {
            let (sn, cs) = (TAU * j as f64 / angles as f64).sin_cos();
            for (r, w) in rs.iter().zip(&radial_w) {
                normalized_hermite_into(d, r * cs, &mut hx);
                normalized_hermite_into(d, r * sn, &mut hy);
                for (slot, ell) in indices.iter().enumerate() {
                    let e = ell.entries();
                    samples[slot][j] += w * hx[e[0] as usize] * hy[e[1] as usize];
                }
            }
        }
        let nf = angles as f64;
        let mut cos = Vec::with_capacity(indices.len());
        let mut sin = Vec::with_capacity(indices.len());
        for g in &samples {
            let mut a = vec![0.0; d + 1];
            let mut b = vec![0.0; d + 1];
            for (j, v) in g.iter().enumerate() {
                let phi = TAU * j as f64 / nf;
                for m in 0..=d {
                    let (sm, cm) = (m as f64 * phi).sin_cos();
                    a[m] += v * cm;
                    b[m] += v * sm;
                }
            }
            a[0] /= nf;
            for m in 1..=d {
                a[m] *= 2.0 / nf;
                b[m] *= 2.0 / nf;
            }
            cos.push(a);
            sin.push(b);
        }
        Self { indices, cos, sin }
    }

    fn coefficients(&self, arc: Sector) -> Vec<f64> {
        let (lo, hi) = (arc.start, arc.end());
        let d = self.cos[0].len() - 1;
        let trig: Vec<[f64; 4]> = (0..=d)
            .map(|m| {
                let (sh, ch) = (m as f64 * hi).sin_cos();
                let (sl, cl) = (m as f64 * lo).sin_cos();
                [sh, sl, ch, cl]
            })
            .collect();
        self.cos
            .iter()
            .zip(&self.sin)
            .map(|(a, b)| {
                let mut v = a[0] * (hi - lo);
                for m in 1..=d {
                    let [sh, sl, ch, cl] = trig[m];
                    v += (a[m] * (sh - sl) - b[m] * (ch - cl)) / m as f64;
                }
                v
            })
            .collect()
    }
}

fn sector_table(degree: u32) -> Arc<SectorTable> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<SectorTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&degree) {
        return Arc::clone(t);
    }
    let table = Arc::new(SectorTable::build(degree));
    cache
        .lock()
        .unwrap()
        .entry(degree)
        .or_insert_with(|| Arc::clone(&table))
        .clone()
}

/// Coefficients `∫_{A} √(ℓ!) h_ℓ dγ₂` of a planar sector, `|ℓ| ≤ degree`.
pub fn sector_hermite_coefficients(arc: Sector, degree: u32) -> HermiteSeries {
    let table = sector_table(degree);
    let mut series = HermiteSeries::new(2, degree);
    if arc.width >= TAU {
        series.insert(MultiIndex::zeros(2), 1.0).unwrap();
        return series;
    }
    for (ell, c) in table.indices.iter().zip(table.coefficients(arc)) {
        series.insert(ell.clone(), c).unwrap();
    }
    series
}

// Σ_{|ℓ|=m} c_ℓ² for a sector, which depends only on its width
fn sector_degree_energy(width: f64, degree: u32) -> Vec<f64> {
    if width >= TAU {
        let mut e = vec![0.0; degree as usize + 1];
        e[0] = 1.0;
        return e;
    }
    if width <= 0.0 {
        return vec![0.0; degree as usize + 1];
    }
    let table = sector_table(degree);
    let mut e = vec![0.0; degree as usize + 1];
    for (ell, c) in table.indices.iter().zip(table.coefficients(Sector::new(0.0, width))) {
        e[ell.degree() as usize] += c * c;
    }
    e
}

fn cell_degree_energies(p: &ConicalPartition, degree: u32) -> Result<Vec<Vec<f64>>> {
    let view = p
        .planar_view()
        .ok_or_else(|| Error::Unsupported("exact Hermite data needs a planar partition".into()))?;
    Ok(view
        .arcs
        .iter()
        .map(|a| sector_degree_energy(a.width, degree))
        .collect())
}

/// `∫_{Aᵢ} √(ℓ!) h_ℓ dγₙ` for `|ℓ| ≤ max_degree`.
///
/// Exact when the cells are sectors of the first coordinate plane; other
/// cones use Monte Carlo with the given budget.
pub fn hermite_coefficients_of_cell(
    p: &ConicalPartition,
    i: usize,
    max_degree: u32,
    monte_carlo_budget: Option<(RandomSource, u64)>,
) -> Result<HermiteSeries> {
    if i >= p.k() {
        return Err(Error::InvalidArgument(format!(
            "cell {i} out of range for k = {}",
            p.k()
        )));
    }
    let n = p.dim();
    if n >= 2 {
        let mut frame = [vec![0.0; n], vec![0.0; n]];
        frame[0][0] = 1.0;
        frame[1][1] = 1.0;
        if let Ok(arcs) = p.arcs_in(&frame) {
            let planar = sector_hermite_coefficients(arcs[i], max_degree);
            let mut series = HermiteSeries::new(n, max_degree);
            for (ell, c) in planar.iter() {
                let mut e = vec![0u32; n];
                e[..2].copy_from_slice(ell.entries());
                series.insert(MultiIndex::new(e), c)?;
            }
            return Ok(series);
        }
    }
    let (source, samples) = monte_carlo_budget.ok_or_else(|| {
        Error::Unsupported("cell is not a coordinate-plane sector; a Monte Carlo budget is required".into())
    })?;
    let indices = MultiIndex::all_up_to(n, max_degree);
    let d = max_degree as usize;
    let est = monte_carlo(source, samples, indices.len(), |rng, out| {
        let x = standard_normal_vec(n, rng);
        if p.classify_unchecked(&x) != i {
            return;
        }
        let per_axis: Vec<Vec<f64>> = x
            .iter()
            .map(|&v| crate::hermite::normalized_hermite_all(d, v))
            .collect();
        for (slot, ell) in indices.iter().enumerate() {
            out[slot] = ell
                .entries()
                .iter()
                .enumerate()
                .map(|(k, &l)| per_axis[k][l as usize])
                .product();
        }
    });
    let mut series = HermiteSeries::new(n, max_degree);
    for (ell, c) in indices.into_iter().zip(est.mean) {
        series.insert(ell, c)?;
    }
    Ok(series)
}

// ---------------------------------------------------------------------------
// ψ_ρ

/// Truncation settings for series evaluations of `ψ_ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub degree: u32,
    pub tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            tol: 1e-8,
        }
    }
}

// Σ_{m>D} m|ρ|^{m−1}, the tail weight once each degree's energy is bounded by γ(A)
fn psi_tail_weight(rho: f64, degree: u32) -> f64 {
    let a = rho.abs();
    let d = degree as f64;
    if a == 0.0 {
        return 0.0;
    }
    ((d + 1.0) * a.powi(degree as i32) - d * a.powi(degree as i32 + 1)) / (1.0 - a).powi(2)
}

/// `ψ_ρ = d/dρ J = Σᵢ Σ_ℓ |ℓ| ρ^{|ℓ|−1} (∫_{Aᵢ} √(ℓ!) h_ℓ dγₙ)²`, truncated at
/// `options.degree`; fails if the tail bound exceeds `options.tol`.
pub fn psi_rho(p: &ConicalPartition, rho: f64, options: SeriesOptions) -> Result<StabilityResult> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidCorrelation(rho));
    }
    let energies = cell_degree_energies(p, options.degree)?;
    let mass: f64 = energies.iter().map(|e| e[0].sqrt()).sum();
    let tail = psi_tail_weight(rho, options.degree) * mass;
    if tail > options.tol {
        return Err(Error::TruncationTooSmall {
            degree: options.degree as usize,
            tail,
            tol: options.tol,
        });
    }
    let value = energies.iter().map(|e| psi_from_energies(e, rho)).sum();
    Ok(StabilityResult::new(
        value,
        tail,
        Method::HermiteSeries { degree: options.degree },
    ))
}

fn psi_from_energies(e: &[f64], rho: f64) -> f64 {
    e.iter()
        .enumerate()
        .skip(1)
        .map(|(m, v)| m as f64 * rho.powi(m as i32 - 1) * v)
        .sum()
}

/// `ψ_ρ` of sectors given by their widths alone.
pub fn psi_rho_of_widths(widths: &[f64], rho: f64, degree: u32) -> f64 {
    widths
        .iter()
        .map(|&w| psi_from_energies(&sector_degree_energy(w, degree), rho))
        .sum()
}

/// `ψ_ρ` of a tuple of functions given by their Hermite coefficients, such
/// as a mixture of partitions.
pub fn psi_rho_from_coefficients(cells: &[HermiteSeries], rho: f64) -> f64 {
    cells
        .iter()
        .map(|c| {
            c.iter()
                .filter(|(ell, _)| ell.degree() > 0)
                .map(|(ell, a)| ell.degree() as f64 * rho.powi(ell.degree() as i32 - 1) * a * a)
                .sum::<f64>()
        })
        .sum()
}

/// `ψ_ρ = Σᵢ ∫_{Aᵢ} d/dρ T_ρ 1_{Aᵢ} dγ₂` by polar quadrature of the exact
/// pointwise derivative, used to cross-check the series.
pub fn psi_rho_direct(p: &ConicalPartition, rho: CorrelationParam, radial: usize, angular: usize) -> Result<f64> {
    let view = p.require_planar()?;
    let (r, s) = open_rho(rho)?;
    let (rs, wr) = gauss_legendre_on(radial, 0.0, 12.0);
    let mut total = 0.0;
    for arc in &view.arcs {
        if arc.width <= 0.0 {
            continue;
        }
        let (ts, wt) = gauss_legendre_on(angular, arc.start, arc.end());
        for (t, w2) in ts.iter().zip(&wt) {
            let (sn, cs) = t.sin_cos();
            for (rad, w1) in rs.iter().zip(&wr) {
                let x = [rad * cs, rad * sn];
                let d = planar_dt_drho(*arc, r, s, x);
                total += w1 * w2 * rad * (-0.5 * rad * rad).exp() / TAU * d;
            }
        }
    }
    Ok(total)
}

// d/dρ T_ρ 1_A(x) = ⟨x, ∇W(ρx/s)⟩ / s³ for a sector, W(c) = γ₂(A − c)
fn planar_dt_drho(arc: Sector, r: f64, s: f64, x: [f64; 2]) -> f64 {
    if arc.width <= 0.0 || arc.width >= TAU {
        return 0.0;
    }
    let c = [r * x[0] / s, r * x[1] / s];
    let mut g = 0.0;
    for (dir, normal) in arc_edges(arc) {
        let along = c[0] * dir[0] + c[1] * dir[1];
        let across = c[0] * normal[0] + c[1] * normal[1];
        let mass = crate::gauss::normal_pdf(across) * crate::gauss::normal_cdf(along);
        g += (x[0] * normal[0] + x[1] * normal[1]) * mass;
    }
    g / (s * s * s)
}

/// Centered difference `(J(ρ+h) − J(ρ−h))/2h` with `h = 1e−4`, by quadrature.
pub fn dj_drho_finite_difference(p: &ConicalPartition, rho: f64) -> Result<f64> {
    let h = RHO_STEP;
    let method = Method::Quadrature2d { nodes: 64 };
    let up = noise_stability_j(p, CorrelationParam::new(rho + h)?, method)?.value;
    let down = noise_stability_j(p, CorrelationParam::new(rho - h)?, method)?.value;
    Ok((up - down) / (2.0 * h))
}

#[cfg(test)]
mod tests;

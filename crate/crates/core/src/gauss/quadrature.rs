//! Quadrature rules: Gauss–Legendre, Gauss–Hermite (probabilists'),
//! Gauss–Laguerre, tensor and polar grids against `γₙ`, and an adaptive
//! Gauss–Kronrod integrator for vector-valued integrands on an interval.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

const NEWTON_EPS: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= NEWTON_EPS {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Gauss–Hermite rule for the standard normal density: `Σ wᵢ f(xᵢ) ≈ ∫ f dγ₁`.
///
/// Nodes come from Newton iteration on the orthonormal Hermite recurrence
/// for the weight `e^{−t²}`, then rescaled by `√2`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z: f64 = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * t[0],
            3 => 1.91 * z - 0.91 * t[1],
            _ => 2.0 * z - t[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= NEWTON_EPS * z.abs().max(1.0) {
                break;
            }
        }
        t[i] = z;
        t[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        t[n / 2] = 0.0;
    }
    let sqrt_pi = PI.sqrt();
    let mut x: Vec<f64> = t.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let mut w: Vec<f64> = w.iter().map(|v| v / sqrt_pi).collect();
    x.reverse();
    w.reverse();
    (x, w)
}

/// Gauss–Laguerre rule: `Σ wᵢ f(xᵢ) ≈ ∫₀^∞ f(s) e^{−s} ds`.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z: f64 = 0.0;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - x[i - 2])
            }
        };
        for _ in 0..NEWTON_MAX_ITER {
            let (p1, _, pp) = laguerre_eval(n, z);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= NEWTON_EPS * z.abs().max(1.0) {
                break;
            }
        }
        let (_, p2, pp) = laguerre_eval(n, z);
        x[i] = z;
        w[i] = -1.0 / (pp * nf * p2);
    }
    (x, w)
}

// L_n(z), L_{n-1}(z) and L_n'(z)
fn laguerre_eval(n: usize, z: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    let (mut p1, mut p2) = (1.0, 0.0);
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, p2, (nf * p1 - nf * p2) / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum Scheme {
    TensorGaussHermite { per_axis: usize },
    Polar2d { radial: usize, angular: usize },
    Box { per_axis: usize, half_width: f64 },
}

/// A fixed cubature rule against `γₙ`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<(Vec<f64>, f64)>,
    scheme: Scheme,
}

impl QuadratureGrid {
    /// Tensor product of `per_axis`-point Gauss–Hermite rules.
    pub fn tensor_gauss_hermite(dim: usize, per_axis: usize) -> Self {
        let (x, w) = gauss_hermite(per_axis);
        Self::tensor(dim, &x, &w, Scheme::TensorGaussHermite { per_axis })
    }

    /// Gauss–Legendre product rule on `[−h, h]ⁿ`, weighted by the Gaussian
    /// density. Converges for integrands that are rough at the origin scale
    /// but negligible outside the box.
    pub fn gaussian_box(dim: usize, per_axis: usize, half_width: f64) -> Self {
        let (x, w) = gauss_legendre_on(per_axis, -half_width, half_width);
        let w: Vec<f64> = x.iter().zip(&w).map(|(&t, &wt)| wt * super::normal_pdf(t)).collect();
        Self::tensor(dim, &x, &w, Scheme::Box { per_axis, half_width })
    }

    /// Planar grid: Gauss–Laguerre in `s = r²/2` and the uniform midpoint
    /// rule in angle, so that `Σ w f ≈ ∫ f dγ₂`.
    pub fn polar_2d(radial: usize, angular: usize) -> Self {
        let (s, ws) = gauss_laguerre(radial);
        let mut nodes = Vec::with_capacity(radial * angular);
        let dtheta = 2.0 * PI / angular as f64;
        for (si, wi) in s.iter().zip(&ws) {
            let r = (2.0 * si).sqrt();
            for a in 0..angular {
                let theta = (a as f64 + 0.5) * dtheta;
                nodes.push((vec![r * theta.cos(), r * theta.sin()], wi / angular as f64));
            }
        }
        Self {
            dim: 2,
            nodes,
            scheme: Scheme::Polar2d { radial, angular },
        }
    }

    /// The default planar grid, 64 radial × 256 angular nodes.
    pub fn polar_default() -> Self {
        Self::polar_2d(64, 256)
    }

    fn tensor(dim: usize, x: &[f64], w: &[f64], scheme: Scheme) -> Self {
        let m = x.len();
        let total = m.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let point: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let weight: f64 = idx.iter().map(|&i| w[i]).product();
            nodes.push((point, weight));
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
            }
        }
        Self { dim, nodes, scheme }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[(Vec<f64>, f64)] {
        &self.nodes
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|(x, w)| w * f(x)).sum()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let fc = f(c);
    for k in 0..N {
        kronrod[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kronrod[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    for k in 0..N {
        kronrod[k] *= h;
        gauss[k] *= h;
        err = err.max((kronrod[k] - gauss[k]).abs());
    }
    (kronrod, err)
}

/// Adaptive Gauss–Kronrod 7–15 integration of a vector-valued integrand,
/// bisecting the worst interval until the summed error estimate is below
/// `tol` (absolute, max-norm over components) or `max_intervals` is hit.
///
/// Returns the integral and the final error estimate.
pub fn integrate_adaptive<const N: usize, F: FnMut(f64) -> [f64; N]>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> ([f64; N], f64) {
    let mut intervals = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total_err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if total_err <= tol || intervals.len() >= max_intervals {
            break;
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    let mut sum = [0.0; N];
    let mut err = 0.0;
    // sorting makes the summation order independent of the refinement history
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (_, _, v, e) in &intervals {
        for k in 0..N {
            sum[k] += v[k];
        }
        err += e;
    }
    (sum, err)
}

/// Scalar convenience wrapper around [`integrate_adaptive`].
pub fn integrate_adaptive_scalar<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let ([v], e) = integrate_adaptive(|t| [f(t)], a, b, tol, 4000);
    (v, e)
}

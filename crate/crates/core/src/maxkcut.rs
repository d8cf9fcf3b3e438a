//! The MAX-k-CUT rounding constant `α_k` and a small pipeline comparing
//! conical rounding of a relaxed embedding against brute force.
//!
//! Cut values follow the ordered-pair convention `Σ_{c(i)≠c(j)} a_ij`
//! over all `i ≠ j`: each edge counts twice.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{CorrelationParam, RandomSource};
use crate::partition::{dot, regular_simplex_generators, ConicalPartition};
use crate::stability::{noise_stability_j, Method};

/// Largest `kⁿ` enumerated by [`maxkcut_bruteforce`].
pub const BRUTE_FORCE_CAP: u128 = 10_000_000;

/// A symmetric nonnegative weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct WeightedGraph {
    n: usize,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    weights: Vec<Vec<f64>>,
}

impl TryFrom<GraphRepr> for WeightedGraph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        WeightedGraph::from_matrix(r.weights)
    }
}

impl From<WeightedGraph> for GraphRepr {
    fn from(g: WeightedGraph) -> Self {
        GraphRepr {
            weights: g.weights.chunks(g.n.max(1)).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl WeightedGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            weights: vec![0.0; n * n],
        }
    }

    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut g = Self::empty(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &w) in row.iter().enumerate() {
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "weight a[{i}][{j}] = {w} must be finite and nonnegative"
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "diagonal entry a[{i}][{i}] must be zero"
                    )));
                }
                if (w - rows[j][i]).abs() > 1e-12 * w.abs().max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "weights are not symmetric at ({i}, {j})"
                    )));
                }
                g.weights[i * n + j] = w;
            }
        }
        Ok(g)
    }

    /// Adds `w` to edge `{u, v}` for each `(u, v, w)`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(u, v, w) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidArgument(format!("bad edge ({u}, {v}) for n = {n}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "edge weight {w} must be finite and nonnegative"
                )));
            }
            g.weights[u * n + v] += w;
            g.weights[v * n + u] += w;
        }
        Ok(g)
    }

    /// Parses whitespace-separated `u v w` lines (0-indexed); `#` starts a
    /// comment. The vertex count is one more than the largest index.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidArgument(format!("line {}: expected `u v w`, got `{line}`", line_no + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let u: usize = fields[0].parse().map_err(|_| bad())?;
            let v: usize = fields[1].parse().map_err(|_| bad())?;
            let w: f64 = fields[2].parse().map_err(|_| bad())?;
            edges.push((u, v, w));
        }
        let n = edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0);
        Self::from_edges(n, &edges)
    }

    /// Each edge present with probability `density`, weight uniform on `(0, 1]`.
    pub fn random<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::InvalidArgument(format!("edge density {density} outside [0, 1]")));
        }
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < density {
                    edges.push((u, v, 1.0 - rng.random::<f64>()));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// `Σ_{i≠j, c(i)≠c(j)} a_ij`.
    pub fn cut_value(&self, assignment: &[usize]) -> Result<f64> {
        if assignment.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: assignment.len(),
            });
        }
        Ok(self.cut_unchecked(assignment))
    }

    fn cut_unchecked(&self, c: &[usize]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if c[i] != c[j] {
                    total += self.weights[i * self.n + j];
                }
            }
        }
        total
    }
}

/// Exact optimum by enumeration; vertex 0 is pinned to bin 0 by symmetry.
pub fn maxkcut_bruteforce(g: &WeightedGraph, k: usize) -> Result<(f64, Vec<usize>)> {
    if k == 0 {
        return Err(Error::InvalidArgument("need k ≥ 1".into()));
    }
    let n = g.n();
    let size = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > BRUTE_FORCE_CAP {
        return Err(Error::EnumerationCap {
            size,
            cap: BRUTE_FORCE_CAP,
        });
    }
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    let rest = (k as u64).pow(n as u32 - 1);
    let best = (0..rest)
        .into_par_iter()
        .map(|code| {
            let mut c = vec![0usize; n];
            let mut r = code;
            for slot in c.iter_mut().skip(1) {
                *slot = (r % k as u64) as usize;
                r /= k as u64;
            }
            (g.cut_unchecked(&c), code)
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let mut c = vec![0usize; n];
    let mut r = best.1;
    for slot in c.iter_mut().skip(1) {
        *slot = (r % k as u64) as usize;
        r /= k as u64;
    }
    Ok((best.0, c))
}

/// Unit vectors labelling the vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vectors: Vec<Vec<f64>>,
    /// `Σ_{i≠j} a_ij (1 − ⟨vᵢ, vⱼ⟩)` at the returned vectors.
    pub relaxation_value: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

impl Embedding {
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let d = vectors.first().map_or(0, Vec::len);
        for v in &vectors {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            if (dot(v, v).sqrt() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument("embedding vectors must be unit length".into()));
            }
        }
        Ok(Self {
            vectors,
            relaxation_value: f64::NAN,
            gradient_norm: f64::NAN,
            converged: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

const PENALTY_SCHEDULE: [f64; 6] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6];
const RELAX_TOL: f64 = 1e-9;

/// Projected gradient ascent on `Σ_{i≠j} a_ij(1 − ⟨vᵢ, vⱼ⟩)` over unit vectors
/// in `ℝ^d`, with the quadratic penalty `μ Σ_{i<j} (−1/(k−1) − ⟨vᵢ, vⱼ⟩)₊²`
/// whose weight `μ` is raised through a fixed schedule. `iterations` is the
/// step budget per penalty level.
pub fn relax_embed(
    g: &WeightedGraph,
    k: usize,
    d: usize,
    iterations: usize,
    source: RandomSource,
) -> Result<Embedding> {
    if d < 2 || k < 2 {
        return Err(Error::InvalidArgument("need d ≥ 2 and k ≥ 2".into()));
    }
    let n = g.n();
    let floor = -1.0 / (k as f64 - 1.0);
    let mut rng = source.rng();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dot(&u, &u).sqrt();
            u.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let degree = (0..n)
        .map(|i| (0..n).map(|j| g.weight(i, j)).sum::<f64>())
        .fold(0.0, f64::max);
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    for &mu in &PENALTY_SCHEDULE {
        let step = 0.25 / (2.0 * degree + 2.0 * mu * n as f64).max(1e-12);
        converged = false;
        for _ in 0..iterations {
            let mut grads = vec![vec![0.0; d]; n];
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let ip = dot(&v[i], &v[j]);
                    let coeff = -2.0 * g.weight(i, j) + 2.0 * mu * (floor - ip).max(0.0);
                    if coeff != 0.0 {
                        for c in 0..d {
                            grads[i][c] += coeff * v[j][c];
                        }
                    }
                }
            }
            grad_norm = 0.0;
            for i in 0..n {
                let radial = dot(&grads[i], &v[i]);
                for c in 0..d {
                    grads[i][c] -= radial * v[i][c];
                }
                grad_norm += dot(&grads[i], &grads[i]);
            }
            grad_norm = grad_norm.sqrt();
            if grad_norm < RELAX_TOL {
                converged = true;
                break;
            }
            for i in 0..n {
                for c in 0..d {
                    v[i][c] += step * grads[i][c];
                }
                let norm = dot(&v[i], &v[i]).sqrt();
                v[i].iter_mut().for_each(|x| *x /= norm);
            }
        }
    }
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                value += g.weight(i, j) * (1.0 - dot(&v[i], &v[j]));
            }
        }
    }
    Ok(Embedding {
        vectors: v,
        relaxation_value: value,
        gradient_norm: grad_norm,
        converged: converged || n <= 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingOutcome {
    pub assignment: Vec<usize>,
    pub value: f64,
    pub mean_value: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Rounds with `trials` Haar-random rotations of the regular simplicial
/// partition of `ℝ^d` and keeps the best cut.
pub fn round_conical(
    g: &WeightedGraph,
    e: &Embedding,
    k: usize,
    trials: usize,
    source: RandomSource,
) -> Result<RoundingOutcome> {
    let d = e.dim();
    if e.vectors.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: e.vectors.len(),
        });
    }
    if k < 2 || k > d + 1 || trials == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 2 ≤ k ≤ d + 1 = {} and at least one trial",
            d + 1
        )));
    }
    let simplex = regular_simplex_generators(k, d)?;
    let results: Vec<(f64, Vec<usize>)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = source.derive(t).rng();
            // Gram–Schmidt on Gaussian vectors: a Haar-distributed frame
            let mut frame: Vec<Vec<f64>> = Vec::with_capacity(k - 1);
            while frame.len() < k - 1 {
                let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for b in &frame {
                    let c = dot(&u, b);
                    u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
                let norm = dot(&u, &u).sqrt();
                if norm > 1e-12 {
                    frame.push(u.into_iter().map(|x| x / norm).collect());
                }
            }
            let gens: Vec<Vec<f64>> = simplex
                .iter()
                .map(|z| (0..d).map(|c| (0..k - 1).map(|j| z[j] * frame[j][c]).sum()).collect())
                .collect();
            let rotated = ConicalPartition::induced(gens).expect("rotated simplex is a valid generator set");
            let assignment: Vec<usize> = e.vectors.iter().map(|v| rotated.classify_unchecked(v)).collect();
            (g.cut_unchecked(&assignment), assignment)
        })
        .collect();
    let m = results.len() as f64;
    let mean = results.iter().map(|r| r.0).sum::<f64>() / m;
    let var = results.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let (value, assignment) = results
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one trial");
    Ok(RoundingOutcome {
        assignment,
        value,
        mean_value: mean,
        std_error: (var / m).sqrt(),
        trials,
    })
}

// ---------------------------------------------------------------------------
// α_k

/// Resolution of the `α_k` search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSpec {
    pub grid_points: usize,
    pub nodes: usize,
}

impl Default for AlphaSpec {
    fn default() -> Self {
        Self {
            grid_points: 201,
            nodes: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub k: usize,
    pub rhos: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Infimum after golden-section refinement around the best grid point.
    pub infimum: f64,
    pub argmin: f64,
    pub grid_infimum: f64,
}

/// `(k − k·J(p, ρ)) / ((k−1)(1−ρ))`, the expected cut fraction of rounding
/// ρ-correlated unit vectors with `p` divided by the relaxation's `(1−ρ)`
/// per-edge share.
pub fn alpha_ratio(p: &ConicalPartition, rho: f64, nodes: usize) -> Result<f64> {
    if rho >= 1.0 {
        return Err(Error::InvalidArgument("the ratio is undefined at ρ = 1".into()));
    }
    let k = p.k() as f64;
    let j = noise_stability_j(p, CorrelationParam::new(rho)?, Method::Quadrature2d { nodes })?.value;
    Ok((k - k * j) / ((k - 1.0) * (1.0 - rho)))
}

/// Infimum of [`alpha_ratio`] for the regular partition over `ρ ∈ [−1/(k−1), 0]`.
pub fn alpha_k(k: usize, spec: AlphaSpec) -> Result<AlphaResult> {
    if k != 3 {
        return Err(Error::Unsupported(
            "α_k is evaluated for k = 3, where the regular partition is planar".into(),
        ));
    }
    if spec.grid_points < 3 || spec.nodes < 2 {
        return Err(Error::InvalidArgument(
            "need at least three grid points and two nodes".into(),
        ));
    }
    let p = ConicalPartition::regular(k, k - 1)?;
    let lo = -1.0 / (k as f64 - 1.0);
    let m = spec.grid_points;
    let rhos: Vec<f64> = (0..m).map(|i| lo * (1.0 - i as f64 / (m - 1) as f64)).collect();
    let ratios = rhos
        .iter()
        .map(|&r| alpha_ratio(&p, r, spec.nodes))
        .collect::<Result<Vec<f64>>>()?;
    let (best, &grid_infimum) = ratios
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    let (mut a, mut b) = (rhos[best.saturating_sub(1)], rhos[(best + 1).min(m - 1)]);
    let f = |r: f64| alpha_ratio(&p, r, spec.nodes);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (refined_at, refined) = if fc < fd { (c, fc) } else { (d, fd) };
    let (argmin, infimum) = if refined < grid_infimum {
        (refined_at, refined)
    } else {
        (rhos[best], grid_infimum)
    };
    Ok(AlphaResult {
        k,
        rhos,
        ratios,
        infimum,
        argmin,
        grid_infimum,
    })
}

/// `min` of [`alpha_ratio`] for the regular partition over `points`
/// equally spaced `ρ` in `(0, 1)`.
pub fn alpha_ratio_positive_min(k: usize, points: usize, nodes: usize) -> Result<f64> {
    let p = ConicalPartition::regular(k, k - 1)?;
    (1..=points)
        .map(|i| alpha_ratio(&p, i as f64 / (points + 1) as f64, nodes))
        .try_fold(f64::INFINITY, |acc, r| Ok(acc.min(r?)))
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub instance: usize,
    pub brute_force: f64,
    pub relaxation_value: f64,
    pub best_rounded: f64,
    pub ratio: f64,
}

/// Settings of [`maxkcut_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub instances: usize,
    pub n: usize,
    pub k: usize,
    pub density: f64,
    pub iterations: usize,
    pub trials: usize,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self {
            instances: 100,
            n: 8,
            k: 3,
            density: 0.5,
            iterations: 400,
            trials: 64,
        }
    }
}

/// Random instances: brute force, relaxation and conical rounding each.
pub fn maxkcut_pipeline(spec: PipelineSpec, source: RandomSource) -> Result<Vec<PipelineRow>> {
    (0..spec.instances)
        .into_par_iter()
        .map(|i| {
            let stream = source.derive(i as u64);
            let mut rng = stream.derive(0).rng();
            let g = WeightedGraph::random(spec.n, spec.density, &mut rng)?;
            let (brute_force, _) = maxkcut_bruteforce(&g, spec.k)?;
            let e = relax_embed(&g, spec.k, spec.n.max(2), spec.iterations, stream.derive(1))?;
            let rounded = round_conical(&g, &e, spec.k, spec.trials, stream.derive(2))?;
            Ok(PipelineRow {
                instance: i,
                brute_force,
                relaxation_value: e.relaxation_value,
                best_rounded: rounded.value,
                ratio: if brute_force > 0.0 {
                    rounded.value / brute_force
                } else {
                    1.0
                },
            })
        })
        .collect()
}

/// CSV with header `instance,brute_force,relaxation_value,best_rounded,ratio`.
pub fn write_pipeline_csv<W: Write>(rows: &[PipelineRow], mut out: W) -> Result<()> {
    writeln!(out, "instance,brute_force,relaxation_value,best_rounded,ratio")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.instance, r.brute_force, r.relaxation_value, r.best_rounded, r.ratio
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triangle() -> WeightedGraph {
        WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn brute_force_small_cases() {
        assert_eq!(maxkcut_bruteforce(&triangle(), 3).unwrap().0, 6.0);
        let edge = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(maxkcut_bruteforce(&edge, 2).unwrap().0, 2.0);
        assert_eq!(maxkcut_bruteforce(&WeightedGraph::empty(4), 3).unwrap().0, 0.0);
        assert!(matches!(
            maxkcut_bruteforce(&WeightedGraph::empty(15), 3),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn graph_parsing_and_validation() {
        let g = WeightedGraph::parse_edge_list("# triangle\n0 1 1\n1 2 1.0\n0 2 1\n").unwrap();
        assert_eq!(g, triangle());
        assert!(WeightedGraph::parse_edge_list("0 1").is_err());
        assert!(WeightedGraph::from_matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<WeightedGraph>(&json).unwrap(), g);
    }

    #[test]
    fn relaxation_fixed_points() {
        let edge = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let e = relax_embed(&edge, 3, 2, 2000, RandomSource::new(1)).unwrap();
        assert_abs_diff_eq!(dot(&e.vectors[0], &e.vectors[1]), -0.5, epsilon = 1e-4);
        let k3 = relax_embed(&triangle(), 3, 3, 2000, RandomSource::new(2)).unwrap();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert_abs_diff_eq!(dot(&k3.vectors[i], &k3.vectors[j]), -0.5, epsilon = 1e-4);
        }
        let empty = relax_embed(&WeightedGraph::empty(3), 3, 3, 10, RandomSource::new(3)).unwrap();
        assert_eq!(empty.relaxation_value, 0.0);
    }

    #[test]
    fn rounding_trivial_embeddings() {
        let simplex = regular_simplex_generators(3, 2).unwrap();
        let e = Embedding::from_vectors(simplex).unwrap();
        let out = round_conical(&triangle(), &e, 3, 50, RandomSource::new(4)).unwrap();
        assert_eq!(out.mean_value, 6.0);
        let same = Embedding::from_vectors(vec![vec![1.0, 0.0]; 3]).unwrap();
        let out = round_conical(&triangle(), &same, 3, 20, RandomSource::new(5)).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn rounding_ignores_global_rotation() {
        let mut rng = RandomSource::new(6).rng();
        let g = WeightedGraph::random(8, 0.5, &mut rng).unwrap();
        let e = relax_embed(&g, 3, 3, 400, RandomSource::new(7)).unwrap();
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let turned = Embedding::from_vectors(
            e.vectors
                .iter()
                .map(|v| vec![c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])
                .collect(),
        )
        .unwrap();
        let a = round_conical(&g, &e, 3, 1000, RandomSource::new(8)).unwrap();
        let b = round_conical(&g, &turned, 3, 1000, RandomSource::new(9)).unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean_value - b.mean_value).abs() < 3.0 * se);
        assert!(a.value <= maxkcut_bruteforce(&g, 3).unwrap().0 + 1e-12);
    }

    #[test]
    fn alpha_ratio_values() {
        let p = ConicalPartition::regular(3, 2).unwrap();
        assert_abs_diff_eq!(alpha_ratio(&p, 0.0, 64).unwrap(), 1.0, epsilon = 1e-13);
        let spec = AlphaSpec {
            grid_points: 41,
            nodes: 64,
        };
        let res = alpha_k(3, spec).unwrap();
        assert_abs_diff_eq!(res.infimum, 0.836, epsilon = 5e-3);
        assert!(res.ratios.iter().all(|r| *r >= res.infimum - 1e-15));
        for w in res.ratios.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.05);
        }
        assert!(alpha_ratio_positive_min(3, 19, 64).unwrap() >= res.infimum);
        assert!(alpha_k(4, spec).is_err());
    }
}

//! Conical partitions of `ℝⁿ`: Voronoi cones of generator vectors and planar
//! sector partitions, with their Gaussian barycenters, `ψ₀` and the `d₂`
//! distance between partitions.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{monte_carlo, standard_normal_vec, RandomSource};

const PLANE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    Regular,
    Induced,
    Sector2d,
}

/// A half-open arc `[start, start + width)` of the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub start: f64,
    pub width: f64,
}

impl Sector {
    pub fn new(start: f64, width: f64) -> Self {
        Self { start, width }
    }

    pub fn end(&self) -> f64 {
        self.start + self.width
    }

    pub fn bisector(&self) -> f64 {
        self.start + 0.5 * self.width
    }

    pub fn contains(&self, theta: f64) -> bool {
        if self.width >= TAU {
            return true;
        }
        (theta - self.start).rem_euclid(TAU) < self.width
    }

    /// `γ₂` of the sector.
    pub fn measure(&self) -> f64 {
        self.width / TAU
    }

    /// `∫ x dγ₂` over the sector: the bisector direction scaled by
    /// `sin(α/2)/√(2π)`.
    pub fn barycenter(&self) -> [f64; 2] {
        let mag = (0.5 * self.width).sin() / TAU.sqrt();
        let b = self.bisector();
        [mag * b.cos(), mag * b.sin()]
    }

    pub fn rotated(&self, theta: f64) -> Self {
        Self::new(self.start + theta, self.width)
    }
}

/// Angular length of the intersection of two arcs.
pub fn arc_overlap(a: Sector, b: Sector) -> f64 {
    let a_start = a.start.rem_euclid(TAU);
    let b_start = b.start.rem_euclid(TAU);
    let (a_end, b_w) = (a_start + a.width.min(TAU), b.width.min(TAU));
    let mut total = 0.0;
    for m in -2..=2 {
        let lo = b_start + m as f64 * TAU;
        let hi = lo + b_w;
        total += (a_end.min(hi) - a_start.max(lo)).max(0.0);
    }
    total
}

/// A partition seen inside a 2-plane: an orthonormal basis of the plane and
/// one arc per cell. Cells of the ambient partition are the cylinders over
/// these arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarView {
    pub basis: [Vec<f64>; 2],
    pub arcs: Vec<Sector>,
}

impl PlanarView {
    /// Coordinates of `x` in the plane.
    pub fn project(&self, x: &[f64]) -> [f64; 2] {
        [dot(x, &self.basis[0]), dot(x, &self.basis[1])]
    }

    pub fn embed(&self, p: [f64; 2]) -> Vec<f64> {
        self.basis[0]
            .iter()
            .zip(&self.basis[1])
            .map(|(a, b)| p[0] * a + p[1] * b)
            .collect()
    }
}

/// `k` cones covering `ℝⁿ`, either Voronoi cones of generator vectors or
/// planar sectors between consecutive angular breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct ConicalPartition {
    dim: usize,
    kind: PartitionKind,
    generators: Vec<Vec<f64>>,
    breakpoints: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    n: usize,
    k: usize,
    kind: PartitionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generators: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    breakpoints: Option<Vec<f64>>,
}

impl TryFrom<PartitionRepr> for ConicalPartition {
    type Error = Error;
    fn try_from(r: PartitionRepr) -> Result<Self> {
        let p = match (r.kind, r.generators, r.breakpoints) {
            (PartitionKind::Sector2d, None, Some(b)) => {
                if r.n != 2 {
                    return Err(Error::InvalidArgument("sector partitions live in n = 2".into()));
                }
                Self::sectors(b)?
            }
            (kind, Some(g), None) if kind != PartitionKind::Sector2d => {
                let mut p = Self::induced(g)?;
                p.kind = kind;
                if p.dim != r.n {
                    return Err(Error::DimensionMismatch {
                        expected: r.n,
                        got: p.dim,
                    });
                }
                p
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "partition needs generators or breakpoints matching its kind".into(),
                ))
            }
        };
        if p.k() != r.k {
            return Err(Error::InvalidArgument(format!(
                "declared k = {} but found {} cells",
                r.k,
                p.k()
            )));
        }
        Ok(p)
    }
}

impl From<ConicalPartition> for PartitionRepr {
    fn from(p: ConicalPartition) -> Self {
        let k = p.k();
        let sector = p.kind == PartitionKind::Sector2d;
        PartitionRepr {
            n: p.dim,
            k,
            kind: p.kind,
            generators: (!sector).then_some(p.generators),
            breakpoints: sector.then_some(p.breakpoints),
        }
    }
}

/// `k` unit vectors with pairwise inner product `−1/(k−1)`, spanning the
/// first `k − 1` coordinates, with `z₁ = e₁` and the rest ordered
/// counterclockwise in the first coordinate plane.
pub fn regular_simplex_generators(k: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    if k < 2 {
        return Err(Error::InvalidArgument("a simplex needs k ≥ 2".into()));
    }
    if k > n + 1 {
        return Err(Error::InvalidArgument(format!(
            "k = {k} vertices do not fit in n = {n}"
        )));
    }
    let kf = k as f64;
    let centered: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut v: Vec<f64> = vec![-1.0 / kf; k];
            v[i] += 1.0;
            let norm = dot(&v, &v).sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect();
    // orthonormal basis of the sum-zero hyperplane, started from z₁ then z₂
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k - 1);
    for v in centered.iter().take(k - 1) {
        let mut u = v.clone();
        for b in &basis {
            let c = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let norm = dot(&u, &u).sqrt();
        basis.push(u.iter().map(|x| x / norm).collect());
    }
    Ok(centered
        .iter()
        .map(|v| {
            let mut z = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                z[j] = dot(v, b);
            }
            z
        })
        .collect())
}

impl ConicalPartition {
    /// The regular simplicial conical partition with `k` cells in `ℝⁿ`.
    pub fn regular(k: usize, n: usize) -> Result<Self> {
        Ok(Self {
            dim: n,
            kind: PartitionKind::Regular,
            generators: regular_simplex_generators(k, n)?,
            breakpoints: Vec::new(),
        })
    }

    /// Voronoi cones `{x : ⟨x, zᵢ⟩ = maxⱼ ⟨x, zⱼ⟩}` of arbitrary generators.
    pub fn induced(generators: Vec<Vec<f64>>) -> Result<Self> {
        let dim = generators
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("need at least one generator".into()))?;
        if dim == 0 {
            return Err(Error::InvalidArgument("generators must have positive dimension".into()));
        }
        for g in &generators {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: g.len(),
                });
            }
            crate::error::ensure_finite("generator", g)?;
        }
        Ok(Self {
            dim,
            kind: PartitionKind::Induced,
            generators,
            breakpoints: Vec::new(),
        })
    }

    /// Planar sectors `[bᵢ, bᵢ₊₁)` with `b_k = b₀ + 2π`. Breakpoints must be
    /// nondecreasing and span at most `2π`; equal breakpoints give empty cells.
    pub fn sectors(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidArgument("need at least one breakpoint".into()));
        }
        crate::error::ensure_finite("breakpoint", &breakpoints)?;
        if breakpoints.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("breakpoints must be nondecreasing".into()));
        }
        if breakpoints[breakpoints.len() - 1] - breakpoints[0] > TAU {
            return Err(Error::InvalidArgument("breakpoints span more than 2π".into()));
        }
        Ok(Self {
            dim: 2,
            kind: PartitionKind::Sector2d,
            generators: Vec::new(),
            breakpoints,
        })
    }

    /// Sectors of the given widths laid out counterclockwise from `start`.
    pub fn from_widths(start: f64, widths: &[f64]) -> Result<Self> {
        if widths.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument("negative sector width".into()));
        }
        let total: f64 = widths.iter().sum();
        if (total - TAU).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("sector widths sum to {total}, not 2π")));
        }
        let mut b = Vec::with_capacity(widths.len());
        let mut acc = start;
        for w in widths {
            b.push(acc);
            acc += w;
        }
        Self::sectors(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        match self.kind {
            PartitionKind::Sector2d => self.breakpoints.len(),
            _ => self.generators.len(),
        }
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Rotation by `theta` in the plane of the first two coordinates.
    pub fn rotated(&self, theta: f64) -> Self {
        let mut p = self.clone();
        match self.kind {
            PartitionKind::Sector2d => p.breakpoints.iter_mut().for_each(|b| *b += theta),
            _ => {
                let (s, c) = theta.sin_cos();
                for g in &mut p.generators {
                    if g.len() >= 2 {
                        let (x, y) = (g[0], g[1]);
                        g[0] = c * x - s * y;
                        g[1] = s * x + c * y;
                    }
                }
            }
        }
        p
    }

    /// Index of the cell containing `x`; ties go to the smallest index and the
    /// origin belongs to cell 0.
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.classify_unchecked(x))
    }

    pub(crate) fn classify_unchecked(&self, x: &[f64]) -> usize {
        match self.kind {
            PartitionKind::Sector2d => {
                if x[0] == 0.0 && x[1] == 0.0 {
                    return 0;
                }
                self.sector_index(x[1].atan2(x[0]))
            }
            _ => argmax_smallest(self.generators.iter().map(|g| dot(g, x))),
        }
    }

    fn sector_index(&self, theta: f64) -> usize {
        let b0 = self.breakpoints[0];
        let t = b0 + (theta - b0).rem_euclid(TAU);
        // last breakpoint not beyond t
        self.breakpoints.partition_point(|b| *b <= t).saturating_sub(1)
    }

    /// Arcs of a sector partition, in the order of its cells.
    fn sector_arcs(&self) -> Vec<Sector> {
        let k = self.breakpoints.len();
        (0..k)
            .map(|i| {
                let next = if i + 1 < k {
                    self.breakpoints[i + 1]
                } else {
                    self.breakpoints[0] + TAU
                };
                Sector::new(self.breakpoints[i], next - self.breakpoints[i])
            })
            .collect()
    }

    /// The planar description of the partition, when every cell is a
    /// cylinder over a sector of a fixed 2-plane.
    pub fn planar_view(&self) -> Option<PlanarView> {
        if self.kind == PartitionKind::Sector2d {
            return Some(PlanarView {
                basis: [vec![1.0, 0.0], vec![0.0, 1.0]],
                arcs: self.sector_arcs(),
            });
        }
        if self.dim < 2 {
            return None;
        }
        let basis = plane_of(&self.generators, self.dim)?;
        let arcs = self.arcs_in(&basis).ok()?;
        Some(PlanarView { basis, arcs })
    }

    /// Arcs of the cells in the coordinates of a given orthonormal 2-frame,
    /// which must contain every generator.
    pub fn arcs_in(&self, basis: &[Vec<f64>; 2]) -> Result<Vec<Sector>> {
        for b in basis {
            if b.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: b.len(),
                });
            }
        }
        if self.kind == PartitionKind::Sector2d {
            let offset = basis[0][1].atan2(basis[0][0]);
            let orient = basis[0][0] * basis[1][1] - basis[0][1] * basis[1][0];
            return Ok(self
                .sector_arcs()
                .into_iter()
                .map(|a| {
                    if orient > 0.0 {
                        Sector::new(a.start - offset, a.width)
                    } else {
                        Sector::new(offset - a.end(), a.width)
                    }
                })
                .collect());
        }
        let planar: Vec<[f64; 2]> = self
            .generators
            .iter()
            .map(|g| {
                let p = [dot(g, &basis[0]), dot(g, &basis[1])];
                let resid: f64 = g
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v - p[0] * basis[0][j] - p[1] * basis[1][j])
                    .map(|r| r * r)
                    .sum();
                if resid.sqrt() > PLANE_TOL * dot(g, g).sqrt().max(1.0) {
                    Err(Error::Unsupported("generators leave the chosen plane".into()))
                } else {
                    Ok(p)
                }
            })
            .collect::<Result<_>>()?;
        voronoi_arcs(&planar)
    }

    /// Gaussian measure of each cell; exact for planar partitions.
    pub fn cell_measures(&self) -> Result<Vec<f64>> {
        let view = self.require_planar()?;
        Ok(view.arcs.iter().map(Sector::measure).collect())
    }

    pub fn cell_measures_monte_carlo(&self, source: RandomSource, samples: u64) -> (Vec<f64>, Vec<f64>) {
        let k = self.k();
        let est = monte_carlo(source, samples, k, |rng, out| {
            let x = standard_normal_vec(self.dim, rng);
            out[self.classify_unchecked(&x)] = 1.0;
        });
        (est.mean, est.std_error)
    }

    pub(crate) fn require_planar(&self) -> Result<PlanarView> {
        self.planar_view()
            .ok_or_else(|| Error::Unsupported("operation needs a partition reducible to a plane".into()))
    }

    /// `zᵢ = ∫_{Aᵢ} x dγₙ` in closed form for planar partitions.
    pub fn barycenter_vector(&self, i: usize) -> Result<Vec<f64>> {
        self.check_cell(i)?;
        let view = self.require_planar()?;
        Ok(view.embed(view.arcs[i].barycenter()))
    }

    /// Monte Carlo barycenter and per-coordinate standard errors, for cones
    /// in any dimension.
    pub fn barycenter_vector_monte_carlo(
        &self,
        i: usize,
        source: RandomSource,
        samples: u64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_cell(i)?;
        let n = self.dim;
        let est = monte_carlo(source, samples, n, |rng, out| {
            let x = standard_normal_vec(n, rng);
            if self.classify_unchecked(&x) == i {
                out.copy_from_slice(&x);
            }
        });
        Ok((est.mean, est.std_error))
    }

    pub(crate) fn check_cell(&self, i: usize) -> Result<()> {
        if i >= self.k() {
            return Err(Error::InvalidArgument(format!(
                "cell {i} out of range for k = {}",
                self.k()
            )));
        }
        Ok(())
    }

    /// `ψ₀ = Σᵢ ‖zᵢ‖²`.
    pub fn psi_zero(&self) -> Result<f64> {
        let view = self.require_planar()?;
        Ok(view
            .arcs
            .iter()
            .map(|a| {
                let s = (0.5 * a.width).sin();
                s * s / TAU
            })
            .sum())
    }

    pub fn barycenter_difference_norm(&self, i: usize, j: usize) -> Result<f64> {
        let zi = self.barycenter_vector(i)?;
        let zj = self.barycenter_vector(j)?;
        Ok(zi.iter().zip(&zj).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }
}

// values within a relative 1e-12 of the maximum count as ties
fn argmax_smallest<I: Iterator<Item = f64> + Clone>(values: I) -> usize {
    let (max, scale) = values
        .clone()
        .fold((f64::NEG_INFINITY, 0.0f64), |(m, s), v| (m.max(v), s.max(v.abs())));
    values.into_iter().position(|v| v >= max - 1e-12 * scale).unwrap_or(0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// an orthonormal 2-frame containing all generators, if their span is at most 2-dimensional
fn plane_of(generators: &[Vec<f64>], dim: usize) -> Option<[Vec<f64>; 2]> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = generators.iter().map(|g| dot(g, g).sqrt()).fold(0.0, f64::max).max(1.0);
    let candidates = generators.iter().cloned().chain((0..dim).map(|j| {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        e
    }));
    let gen_count = generators.len();
    for (idx, v) in candidates.enumerate() {
        let mut u = v;
        for b in &basis {
            let c = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let norm = dot(&u, &u).sqrt();
        let threshold = if idx < gen_count { PLANE_TOL * scale } else { 1e-6 };
        if norm > threshold {
            if basis.len() == 2 {
                if idx < gen_count {
                    return None;
                }
                continue;
            }
            basis.push(u.iter().map(|x| x / norm).collect());
        }
    }
    let mut it = basis.into_iter();
    Some([it.next()?, it.next()?])
}

// Voronoi arcs of planar generators with smallest-index tie-breaking
fn voronoi_arcs(g: &[[f64; 2]]) -> Result<Vec<Sector>> {
    let k = g.len();
    let mut cuts: Vec<f64> = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let d = [g[i][0] - g[j][0], g[i][1] - g[j][1]];
            if d[0] != 0.0 || d[1] != 0.0 {
                let phi = d[1].atan2(d[0]);
                cuts.push((phi + PI / 2.0).rem_euclid(TAU));
                cuts.push((phi - PI / 2.0).rem_euclid(TAU));
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let label = |theta: f64| argmax_smallest(g.iter().map(|z| z[0] * theta.cos() + z[1] * theta.sin()));
    let mut arcs = vec![None::<Sector>; k];
    if cuts.is_empty() {
        arcs[label(0.0)] = Some(Sector::new(0.0, TAU));
    } else {
        // pieces between consecutive cuts, merged with their same-label neighbors
        let m = cuts.len();
        let pieces: Vec<(usize, f64, f64)> = (0..m)
            .map(|p| {
                let lo = cuts[p];
                let hi = if p + 1 < m { cuts[p + 1] } else { cuts[0] + TAU };
                (label(0.5 * (lo + hi)), lo, hi - lo)
            })
            .filter(|piece| piece.2 > 0.0)
            .collect();
        let first_change = (0..pieces.len()).find(|&p| pieces[p].0 != pieces[(p + pieces.len() - 1) % pieces.len()].0);
        let start = first_change.unwrap_or(0);
        let mut p = 0;
        while p < pieces.len() {
            let (lab, lo, mut w) = pieces[(start + p) % pieces.len()];
            p += 1;
            while p < pieces.len() && pieces[(start + p) % pieces.len()].0 == lab {
                w += pieces[(start + p) % pieces.len()].2;
                p += 1;
            }
            if arcs[lab].is_some() {
                return Err(Error::Unsupported("cell is not a single sector".into()));
            }
            arcs[lab] = Some(Sector::new(lo, w));
        }
    }
    Ok(arcs.into_iter().map(|a| a.unwrap_or(Sector::new(0.0, 0.0))).collect())
}

/// `Δ_k^ε`: every cell's Gaussian measure lies within `ε` of `1/k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureConstraint {
    pub k: usize,
    pub epsilon: f64,
}

impl MeasureConstraint {
    pub fn new(k: usize, epsilon: f64) -> Result<Self> {
        if k == 0 || !(epsilon >= 0.0) {
            return Err(Error::InvalidArgument("need k ≥ 1 and ε ≥ 0".into()));
        }
        Ok(Self { k, epsilon })
    }

    pub fn admits_measures(&self, measures: &[f64]) -> bool {
        let target = 1.0 / self.k as f64;
        measures.len() == self.k && measures.iter().all(|m| (m - target).abs() <= self.epsilon)
    }

    pub fn admits(&self, p: &ConicalPartition) -> Result<bool> {
        Ok(self.admits_measures(&p.cell_measures()?))
    }
}

/// The `d₂` distance with the rotation and cell matching that attain it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDistance {
    pub value: f64,
    pub rotation: f64,
    pub permutation: Vec<usize>,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    heap_permute(k, &mut current, &mut out);
    out
}

fn heap_permute(m: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if m <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..m {
        heap_permute(m - 1, a, out);
        let j = if m.is_multiple_of(2) { i } else { 0 };
        a.swap(j, m - 1);
    }
}

const MAX_EXACT_K: usize = 8;

/// `d₂(p, q) = inf_{θ, π} (Σᵢ γ(Aᵢ Δ R_θ C_{π(i)}))^{1/2}` for partitions
/// reducible to a common plane.
///
/// For a fixed matching the sum of symmetric differences is piecewise linear
/// in `θ` with kinks only where an endpoint of some `Aᵢ` meets an endpoint of
/// some rotated `Cⱼ`, so the infimum is found exactly among those angles.
pub fn d2_distance(p: &ConicalPartition, q: &ConicalPartition) -> Result<PartitionDistance> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if p.k() != q.k() {
        return Err(Error::InvalidArgument(format!(
            "cell counts differ: {} vs {}",
            p.k(),
            q.k()
        )));
    }
    let k = p.k();
    if k > MAX_EXACT_K {
        return Err(Error::EnumerationCap {
            size: (1..=k as u128).product(),
            cap: (1..=MAX_EXACT_K as u128).product(),
        });
    }
    let view = p.require_planar()?;
    let a = view.arcs;
    let c = q.arcs_in(&view.basis)?;
    let mut candidates = vec![0.0];
    for ai in &a {
        for cj in &c {
            for ea in [ai.start, ai.end()] {
                for ec in [cj.start, cj.end()] {
                    candidates.push((ea - ec).rem_euclid(TAU));
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    let total_width: f64 = a.iter().chain(&c).map(|s| s.width).sum();
    let mut best = PartitionDistance {
        value: f64::INFINITY,
        rotation: 0.0,
        permutation: (0..k).collect(),
    };
    let perms = permutations(k);
    let mut best_sq = f64::INFINITY;
    for &theta in &candidates {
        for perm in &perms {
            let overlap: f64 = (0..k).map(|i| arc_overlap(a[i], c[perm[i]].rotated(theta))).sum();
            let sq = ((total_width - 2.0 * overlap) / TAU).max(0.0);
            if sq < best_sq - 1e-15 {
                best_sq = sq;
                best.rotation = theta;
                best.permutation = perm.clone();
            }
        }
    }
    best.value = best_sq.sqrt();
    Ok(best)
}

/// Monte Carlo estimate of the best-matching distance without rotating
/// either partition, for cones in any dimension.
///
/// This is an upper bound on `d₂`: it fixes the rotation to the identity.
/// Returns the value and its standard error.
pub fn d2_distance_monte_carlo(
    p: &ConicalPartition,
    q: &ConicalPartition,
    source: RandomSource,
    samples: u64,
) -> Result<(PartitionDistance, f64)> {
    if p.dim() != q.dim() || p.k() != q.k() {
        return Err(Error::InvalidArgument("partitions must share n and k".into()));
    }
    let k = p.k();
    if k > MAX_EXACT_K {
        return Err(Error::EnumerationCap {
            size: (1..=k as u128).product(),
            cap: (1..=MAX_EXACT_K as u128).product(),
        });
    }
    // joint cell frequencies; the symmetric difference of a matching follows from them
    let est = monte_carlo(source, samples, k * k, |rng, out| {
        let x = standard_normal_vec(p.dim(), rng);
        out[p.classify_unchecked(&x) * k + q.classify_unchecked(&x)] = 1.0;
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(k) {
        let agree: f64 = (0..k).map(|i| est.mean[i * k + perm[i]]).sum();
        let sq = 2.0 * (1.0 - agree).max(0.0);
        if best.as_ref().is_none_or(|b| sq < b.0) {
            best = Some((sq, perm));
        }
    }
    let (sq, perm) = best.unwrap();
    let agree_se: f64 = (0..k)
        .map(|i| est.std_error[i * k + perm[i]].powi(2))
        .sum::<f64>()
        .sqrt();
    let value = sq.sqrt();
    let se = if value > 0.0 {
        agree_se / value
    } else {
        (2.0 * agree_se).sqrt()
    };
    Ok((
        PartitionDistance {
            value,
            rotation: 0.0,
            permutation: perm,
        },
        se,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    const DEG: f64 = PI / 180.0;

    #[test]
    fn simplex_generators() {
        let g = regular_simplex_generators(2, 2).unwrap();
        assert_eq!(g, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        for (k, n) in [(3, 2), (3, 3), (4, 3), (5, 6)] {
            let g = regular_simplex_generators(k, n).unwrap();
            assert_eq!(g.len(), k);
            for i in 0..k {
                assert_relative_eq!(dot(&g[i], &g[i]), 1.0, epsilon = 1e-14);
                assert!(g[i][k - 1..].iter().all(|v| v.abs() < 1e-15));
                for j in 0..i {
                    assert_relative_eq!(dot(&g[i], &g[j]), -1.0 / (k as f64 - 1.0), epsilon = 1e-14);
                }
            }
        }
        let g = regular_simplex_generators(3, 2).unwrap();
        assert_relative_eq!(g[1][0], -0.5, epsilon = 1e-15);
        assert_relative_eq!(g[1][1], 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert!(regular_simplex_generators(4, 2).is_err());
    }

    #[test]
    fn classify_examples() {
        let p = ConicalPartition::regular(3, 2).unwrap();
        let z = p.generators().to_vec();
        assert_eq!(p.classify(&z[0]).unwrap(), 0);
        let minus: Vec<f64> = z[0].iter().map(|v| -v).collect();
        assert_eq!(p.classify(&minus).unwrap(), 1);
        assert_eq!(p.classify(&[0.0, 0.0]).unwrap(), 0);
        let s = ConicalPartition::from_widths(0.0, &[PI, PI]).unwrap();
        assert_eq!(s.classify(&[0.0, 0.0]).unwrap(), 0);
        assert_eq!(s.classify(&[0.0, -1.0]).unwrap(), 1);
        assert!(p.classify(&[1.0]).is_err());
    }

    #[test]
    fn classify_covers_and_matches_arcs() {
        let p = ConicalPartition::regular(3, 3).unwrap();
        let view = p.planar_view().unwrap();
        let mut rng = RandomSource::new(1).rng();
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            let x = standard_normal_vec(3, &mut rng);
            let c = p.classify(&x).unwrap();
            counts[c] += 1;
            let [u, v] = view.project(&x);
            let claimed: Vec<usize> = (0..3).filter(|&i| view.arcs[i].contains(v.atan2(u))).collect();
            assert_eq!(claimed, vec![c]);
        }
        assert_eq!(counts.iter().sum::<usize>(), 100_000);
    }

    #[test]
    fn regular_arcs_are_centered_on_generators() {
        let view = ConicalPartition::regular(3, 2).unwrap().planar_view().unwrap();
        let widths: Vec<f64> = view.arcs.iter().map(|a| a.width).collect();
        for w in widths {
            assert_relative_eq!(w, 2.0 * PI / 3.0, epsilon = 1e-12);
        }
        assert_relative_eq!(
            view.arcs[0]
                .bisector()
                .rem_euclid(TAU)
                .min(TAU - view.arcs[0].bisector().rem_euclid(TAU)),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn measures_sum_to_one() {
        let p = ConicalPartition::from_widths(0.3, &[1.0, 2.0, TAU - 3.0]).unwrap();
        assert_relative_eq!(p.cell_measures().unwrap().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let q = ConicalPartition::regular(4, 3).unwrap();
        assert!(q.planar_view().is_none());
        let (m, se) = q.cell_measures_monte_carlo(RandomSource::new(2), 400_000);
        for (mi, si) in m.iter().zip(&se) {
            assert!((mi - 0.25).abs() < 4.0 * si);
        }
        assert_relative_eq!(m.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn barycenter_closed_forms() {
        let half = ConicalPartition::from_widths(0.0, &[PI, PI]).unwrap();
        let z = half.barycenter_vector(0).unwrap();
        assert_relative_eq!(dot(&z, &z), 1.0 / TAU, epsilon = 1e-15);
        let reg = ConicalPartition::regular(3, 2).unwrap();
        let z = reg.barycenter_vector(2).unwrap();
        assert_relative_eq!(dot(&z, &z).sqrt(), 6f64.sqrt() / (4.0 * PI.sqrt()), epsilon = 1e-14);
        let full = ConicalPartition::sectors(vec![0.0]).unwrap();
        assert!(full.barycenter_vector(0).unwrap().iter().all(|v| v.abs() < 1e-16));
    }

    #[test]
    fn barycenters_match_polar_quadrature() {
        let (rs, wr) = crate::gauss::quadrature::gauss_legendre_on(120, 0.0, 12.0);
        let mut rng = RandomSource::new(9).rng();
        for _ in 0..50 {
            let start = rng.random_range(0.0..TAU);
            let width = rng.random_range(0.05..TAU);
            let (ts, wt) = crate::gauss::quadrature::gauss_legendre_on(40, start, start + width);
            let mut q = [0.0; 2];
            for (r, w1) in rs.iter().zip(&wr) {
                for (t, w2) in ts.iter().zip(&wt) {
                    let w = w1 * w2 * r * (-r * r / 2.0).exp() / TAU;
                    q[0] += w * r * t.cos();
                    q[1] += w * r * t.sin();
                }
            }
            let z = Sector::new(start, width).barycenter();
            assert!((z[0] - q[0]).abs() < 1e-8 && (z[1] - q[1]).abs() < 1e-8, "{z:?} {q:?}");
        }
    }

    #[test]
    fn barycenter_general_cone_monte_carlo() {
        let reg = ConicalPartition::regular(3, 3).unwrap();
        let exact = reg.barycenter_vector(1).unwrap();
        let (mc, se) = reg
            .barycenter_vector_monte_carlo(1, RandomSource::new(4), 400_000)
            .unwrap();
        for j in 0..3 {
            assert!((mc[j] - exact[j]).abs() < 4.0 * se[j] + 1e-12, "{mc:?} {exact:?}");
        }
    }

    #[test]
    fn psi_zero_values() {
        let half = ConicalPartition::from_widths(1.0, &[PI, PI]).unwrap();
        assert_relative_eq!(half.psi_zero().unwrap(), 1.0 / PI, epsilon = 1e-15);
        let reg = ConicalPartition::regular(3, 2).unwrap();
        assert_relative_eq!(reg.psi_zero().unwrap(), 9.0 / (8.0 * PI), epsilon = 1e-14);
        assert!(ConicalPartition::sectors(vec![0.0]).unwrap().psi_zero().unwrap() < 1e-30);
        let p = ConicalPartition::from_widths(0.2, &[1.0, 2.5, TAU - 3.5]).unwrap();
        for theta in [0.1, 1.7, -4.0] {
            assert_relative_eq!(
                p.rotated(theta).psi_zero().unwrap(),
                p.psi_zero().unwrap(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn barycenter_differences() {
        let reg = ConicalPartition::regular(3, 2).unwrap();
        assert_relative_eq!(
            reg.barycenter_difference_norm(0, 1).unwrap(),
            3.0 * 2f64.sqrt() / (4.0 * PI.sqrt()),
            epsilon = 1e-14
        );
        let twins = ConicalPartition::induced(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(twins.barycenter_difference_norm(1, 1).unwrap(), 0.0);
        let half = ConicalPartition::regular(2, 2).unwrap();
        assert_relative_eq!(
            half.barycenter_difference_norm(0, 1).unwrap(),
            2.0 / TAU.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn d2_identity_and_rotation() {
        let reg = ConicalPartition::regular(3, 2).unwrap();
        assert!(d2_distance(&reg, &reg).unwrap().value < 1e-7);
        assert!(d2_distance(&reg, &reg.rotated(0.77)).unwrap().value < 1e-7);
        let s = ConicalPartition::from_widths(0.0, &[2.0 * PI / 3.0; 3]).unwrap();
        assert!(d2_distance(&reg, &s).unwrap().value < 1e-7);
    }

    #[test]
    fn d2_against_monte_carlo_oracle() {
        let reg = ConicalPartition::regular(3, 2).unwrap();
        let q = ConicalPartition::from_widths(0.0, &[150.0 * DEG, 150.0 * DEG, 60.0 * DEG]).unwrap();
        let exact = d2_distance(&reg, &q).unwrap();
        // brute-force symmetric difference at the optimal rotation, 10⁶ points
        let (mc, se) =
            d2_distance_monte_carlo(&reg, &q.rotated(exact.rotation), RandomSource::new(17), 1_000_000).unwrap();
        assert!(
            (mc.value - exact.value).abs() < 2e-3,
            "{} vs {} (se {se})",
            mc.value,
            exact.value
        );
        // no rotation of a coarse scan beats the exact infimum
        for step in 0..360 {
            let theta = step as f64 * DEG;
            let c = q.rotated(theta).arcs_in(&reg.planar_view().unwrap().basis).unwrap();
            let a = reg.planar_view().unwrap().arcs;
            for perm in permutations(3) {
                let sym: f64 = (0..3)
                    .map(|i| a[i].width + c[perm[i]].width - 2.0 * arc_overlap(a[i], c[perm[i]]))
                    .sum();
                assert!((sym / TAU).sqrt() >= exact.value - 1e-12);
            }
        }
    }

    #[test]
    fn d2_symmetric_and_triangle() {
        let mut rng = RandomSource::new(23).rng();
        let random_partition = |rng: &mut rand_chacha::ChaCha20Rng| {
            let mut cuts: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..TAU)).collect();
            cuts.sort_by(f64::total_cmp);
            ConicalPartition::from_widths(rng.random_range(0.0..TAU), &[cuts[0], cuts[1] - cuts[0], TAU - cuts[1]])
                .unwrap()
        };
        for _ in 0..100 {
            let a = random_partition(&mut rng);
            let b = random_partition(&mut rng);
            let c = random_partition(&mut rng);
            let ab = d2_distance(&a, &b).unwrap().value;
            let ba = d2_distance(&b, &a).unwrap().value;
            let bc = d2_distance(&b, &c).unwrap().value;
            let ac = d2_distance(&a, &c).unwrap().value;
            assert!((ab - ba).abs() < 1e-6);
            assert!(ac <= ab + bc + 1e-6);
        }
    }

    #[test]
    fn reflected_plane_basis_is_handled() {
        let p = ConicalPartition::from_widths(0.4, &[1.0, 2.0, TAU - 3.0]).unwrap();
        let flipped = [vec![1.0, 0.0], vec![0.0, -1.0]];
        let arcs = p.arcs_in(&flipped).unwrap();
        // a point at angle 0.5 lies in cell 0; in the flipped frame it sits at −0.5
        assert!(arcs[0].contains(-0.5));
        assert!(!arcs[0].contains(0.5 + 1.0));
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let p = ConicalPartition::from_widths(0.1234567890123, &[1.0, 2.0, TAU - 3.0]).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"kind\":\"sector2d\""));
        let back: ConicalPartition = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
        let r = ConicalPartition::regular(3, 3).unwrap();
        let back: ConicalPartition = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(r, back);
        let bad = r#"{"n":2,"k":2,"kind":"sector2d","breakpoints":[0.0,1.0,2.0]}"#;
        assert!(serde_json::from_str::<ConicalPartition>(bad).is_err());
    }

    #[test]
    fn measure_constraint() {
        let c = MeasureConstraint::new(3, 0.01).unwrap();
        assert!(c.admits(&ConicalPartition::regular(3, 2).unwrap()).unwrap());
        let q = ConicalPartition::from_widths(0.0, &[2.2, 2.0, TAU - 4.2]).unwrap();
        assert!(!c.admits(&q).unwrap());
    }
}

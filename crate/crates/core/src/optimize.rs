//! Variational experiments around the regular partition: the `ψ₀`
//! supremum, first-variation containment, perturbation searches for small
//! `ρ > 0`, counterexample witnesses for `ρ < 0` and the quantitative
//! stability of near-maximizers.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::quadrature::gauss_legendre_on;
use crate::gauss::{CorrelationParam, RandomSource};
use crate::hermite::HermiteSeries;
use crate::partition::{d2_distance, ConicalPartition};
use crate::stability::{
    indicator_dt_drho, lt_rho_difference, noise_stability_j, psi_rho, psi_rho_from_coefficients, Method, SeriesOptions,
};

/// Step-halving rounds of the coordinate searches.
pub const SEARCH_ROUNDS: usize = 40;
const STEP_FACTOR: f64 = 0.5;
const MAX_MOVES: usize = 64;

/// Multi-start-friendly coordinate ascent: for each coordinate move by
/// `±step` while that improves, then halve the step. `visit` sees every
/// evaluated value.
fn coordinate_ascent<F, V>(
    mut f: F,
    x0: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    step0: f64,
    rounds: usize,
    mut visit: V,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> Option<f64>,
    V: FnMut(&[f64], f64),
{
    let mut x = x0;
    let mut best = f(&x).unwrap_or(f64::NEG_INFINITY);
    visit(&x, best);
    let mut step = step0;
    for _ in 0..rounds {
        for c in 0..x.len() {
            for _ in 0..MAX_MOVES {
                let mut moved = false;
                for dir in [1.0, -1.0] {
                    let mut trial = x.clone();
                    trial[c] = (x[c] + dir * step).clamp(lo[c], hi[c]);
                    if trial[c] == x[c] {
                        continue;
                    }
                    if let Some(v) = f(&trial) {
                        visit(&trial, v);
                        if v > best {
                            best = v;
                            x = trial;
                            moved = true;
                            break;
                        }
                    }
                }
                if !moved {
                    break;
                }
            }
        }
        step *= STEP_FACTOR;
    }
    (x, best)
}

// ---------------------------------------------------------------------------
// sup ψ₀

/// Options of [`sup_psi_zero_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupPsiZeroOptions {
    pub restarts: usize,
    /// Cells forced to be empty.
    pub empty_cells: usize,
}

impl Default for SupPsiZeroOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            empty_cells: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub value: f64,
    pub partition: ConicalPartition,
    pub evaluations: usize,
}

fn psi_zero_of_widths(widths: &[f64]) -> f64 {
    widths.iter().map(|w| (0.5 * w).sin().powi(2)).sum::<f64>() / TAU
}

// widths of the sector partition with nonnegative free widths; None if they overflow 2π
fn closing_widths(free: &[f64], empty: usize) -> Option<Vec<f64>> {
    let used: f64 = free.iter().sum();
    if used > TAU {
        return None;
    }
    let mut w = free.to_vec();
    w.push(TAU - used);
    w.extend(std::iter::repeat_n(0.0, empty));
    Some(w)
}

/// Maximizes `ψ₀` over planar sector partitions with `k` cells by
/// multi-start coordinate ascent on the cell widths.
pub fn sup_psi_zero_search(
    k: usize,
    n: usize,
    options: SupPsiZeroOptions,
    source: RandomSource,
) -> Result<SearchOutcome> {
    if !(2..=3).contains(&k) || n != 2 {
        return Err(Error::Unsupported(
            "the sector search covers k ∈ {2, 3} in the plane".into(),
        ));
    }
    if options.empty_cells >= k || options.restarts == 0 {
        return Err(Error::InvalidArgument(
            "need at least one restart and one nonempty cell".into(),
        ));
    }
    let live = k - options.empty_cells;
    let free = live - 1;
    let lo = vec![0.0; free];
    let hi = vec![TAU; free];
    let runs: Vec<(Vec<f64>, f64, usize)> = (0..options.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = source.derive(r).rng();
            // uniform point of the width simplex
            let mut cuts: Vec<f64> = (0..free).map(|_| rng.random_range(0.0..TAU)).collect();
            cuts.sort_by(f64::total_cmp);
            let x0: Vec<f64> = cuts
                .iter()
                .scan(0.0, |prev, &c| {
                    let w = c - *prev;
                    *prev = c;
                    Some(w)
                })
                .collect();
            let mut count = 0;
            let (x, v) = coordinate_ascent(
                |w| closing_widths(w, options.empty_cells).map(|ws| psi_zero_of_widths(&ws)),
                x0,
                &lo,
                &hi,
                0.5,
                SEARCH_ROUNDS,
                |_, _| count += 1,
            );
            (x, v, count)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.2).sum();
    let (x, value, _) = runs
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("at least one restart");
    let widths = closing_widths(&x, options.empty_cells).expect("incumbent is feasible");
    Ok(SearchOutcome {
        value,
        partition: ConicalPartition::from_widths(0.0, &widths)?,
        evaluations,
    })
}

// ---------------------------------------------------------------------------
// first variation

/// Polar sample grid for [`first_variation_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationGrid {
    pub radial: usize,
    pub angular: usize,
    pub r_max: f64,
    /// Minimum distance to any cell wall.
    pub margin: f64,
    pub tol: f64,
}

impl Default for VariationGrid {
    fn default() -> Self {
        Self {
            radial: 24,
            angular: 48,
            r_max: 3.0,
            margin: 1e-2,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationPoint {
    pub x: Vec<f64>,
    pub cell: usize,
    /// `L T_ρ 1_{Aᵢ}(x)` for every cell `i`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: Vec<f64>,
    pub cell: usize,
    pub maximizer: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub rho: f64,
    pub grid: VariationGrid,
    pub points: Vec<VariationPoint>,
    pub violations: Vec<Violation>,
}

impl VariationReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn distance_to_ray(x: [f64; 2], angle: f64) -> f64 {
    let u = [angle.cos(), angle.sin()];
    let along = x[0] * u[0] + x[1] * u[1];
    if along <= 0.0 {
        (x[0] * x[0] + x[1] * x[1]).sqrt()
    } else {
        (x[0] * u[1] - x[1] * u[0]).abs()
    }
}

/// Checks that `L T_ρ 1_{Aᵢ}(x) ≥ L T_ρ 1_{Aⱼ}(x) − tol` for grid points `x`
/// inside `Aᵢ` away from its walls.
pub fn first_variation_check(p: &ConicalPartition, rho: f64, grid: VariationGrid) -> Result<VariationReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "first variation needs ρ ∈ (0, 1), got {rho}"
        )));
    }
    if grid.radial == 0 || grid.angular == 0 || !(grid.r_max > 0.0) {
        return Err(Error::InvalidArgument("empty variation grid".into()));
    }
    let view = p.require_planar()?;
    let walls: Vec<f64> = view
        .arcs
        .iter()
        .filter(|a| a.width > 0.0 && a.width < TAU)
        .flat_map(|a| [a.start, a.end()])
        .collect();
    let r = CorrelationParam::new(rho)?;
    let mut planar = Vec::new();
    for a in 0..grid.angular {
        let theta = TAU * (a as f64 + 0.5) / grid.angular as f64;
        for j in 0..grid.radial {
            let rad = grid.r_max * (j as f64 + 0.5) / grid.radial as f64;
            let x = [rad * theta.cos(), rad * theta.sin()];
            if rad >= grid.margin && walls.iter().all(|&w| distance_to_ray(x, w) >= grid.margin) {
                planar.push(x);
            }
        }
    }
    let points: Vec<VariationPoint> = planar
        .par_iter()
        .map(|xp| {
            let x = view.embed(*xp);
            let cell = p.classify_unchecked(&x);
            let values = (0..p.k())
                .map(|i| indicator_dt_drho(p, i, r, &x).map(|d| rho * d))
                .collect::<Result<Vec<f64>>>()?;
            Ok(VariationPoint { x, cell, values })
        })
        .collect::<Result<_>>()?;
    let violations = points
        .iter()
        .filter_map(|pt| {
            let (maximizer, top) =
                pt.values
                    .iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (pt.cell, pt.values[pt.cell]),
                        |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
                    );
            let gap = top - pt.values[pt.cell];
            (gap > grid.tol).then(|| Violation {
                x: pt.x.clone(),
                cell: pt.cell,
                maximizer,
                gap,
            })
        })
        .collect();
    Ok(VariationReport {
        rho,
        grid,
        points,
        violations,
    })
}

// ---------------------------------------------------------------------------
// perturbation search

/// How parameters move a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parametrization {
    /// Offsets of the boundary rays of a planar sector partition.
    SectorAngles,
    /// Offsets of every generator coordinate.
    GeneratorVectors,
}

/// A box of perturbations around a base partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFamily {
    pub base: ConicalPartition,
    pub parametrization: Parametrization,
    /// Every parameter ranges over `[−bound, bound]`.
    pub bound: f64,
}

impl PerturbationFamily {
    pub fn new(base: ConicalPartition, parametrization: Parametrization, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bound {bound} must be finite and nonnegative"
            )));
        }
        let view = base.require_planar()?;
        if parametrization == Parametrization::SectorAngles {
            let min_width = view.arcs.iter().map(|a| a.width).fold(f64::INFINITY, f64::min);
            if 2.0 * bound >= min_width {
                return Err(Error::InvalidArgument(
                    "angle bound would let boundary rays cross".into(),
                ));
            }
        } else if base.generators().is_empty() {
            return Err(Error::InvalidArgument("generator perturbations need generators".into()));
        }
        Ok(Self {
            base,
            parametrization,
            bound,
        })
    }

    pub fn parameter_count(&self) -> usize {
        match self.parametrization {
            Parametrization::SectorAngles => self.base.k(),
            Parametrization::GeneratorVectors => self.base.k() * self.base.dim(),
        }
    }

    /// The partition at a parameter point.
    pub fn partition_at(&self, params: &[f64]) -> Result<ConicalPartition> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        if params.iter().any(|v| v.abs() > self.bound * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument("parameter outside the family bounds".into()));
        }
        match self.parametrization {
            Parametrization::SectorAngles => {
                let arcs = self.base.require_planar()?.arcs;
                // consecutive cells in counterclockwise order, starts unwrapped
                let mut breaks: Vec<f64> = Vec::with_capacity(arcs.len() + 1);
                for (a, o) in arcs.iter().zip(params) {
                    let mut b = a.start + o;
                    if let Some(&prev) = breaks.last() {
                        b = prev + (b - prev).rem_euclid(TAU);
                    }
                    breaks.push(b);
                }
                ConicalPartition::sectors(breaks)
            }
            Parametrization::GeneratorVectors => {
                let n = self.base.dim();
                let gens = self
                    .base
                    .generators()
                    .iter()
                    .enumerate()
                    .map(|(i, g)| g.iter().zip(&params[i * n..(i + 1) * n]).map(|(a, b)| a + b).collect())
                    .collect();
                ConicalPartition::induced(gens)
            }
        }
    }
}

/// Options of [`perturbation_search_psi`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBudget {
    pub starts: usize,
    pub rounds: usize,
}

impl Default for PerturbationBudget {
    fn default() -> Self {
        Self {
            starts: 200,
            rounds: SEARCH_ROUNDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub rho: f64,
    pub base_value: f64,
    pub best_value: f64,
    pub best_params: Vec<f64>,
    pub best_partition: ConicalPartition,
    /// `d₂` from the incumbent to the base partition.
    pub distance_to_base: f64,
    /// `max ψ_ρ(q) − ψ_ρ(base)` over every visited `q`.
    pub max_excess: f64,
    pub evaluations: usize,
}

/// Random starts plus coordinate ascent maximizing `ψ_ρ` over a family.
pub fn perturbation_search_psi(
    rho: f64,
    family: &PerturbationFamily,
    budget: PerturbationBudget,
    source: RandomSource,
) -> Result<PerturbationOutcome> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "perturbation search needs ρ ∈ [0, 1), got {rho}"
        )));
    }
    let options = SeriesOptions::default();
    let objective = |params: &[f64]| -> Option<f64> {
        let p = family.partition_at(params).ok()?;
        psi_rho(&p, rho, options).ok().map(|r| r.value)
    };
    let dim = family.parameter_count();
    let base_value = psi_rho(&family.base, rho, options)?.value;
    let b = family.bound;
    let lo = vec![-b; dim];
    let hi = vec![b; dim];
    let runs: Vec<(Vec<f64>, f64, f64, usize)> = (0..budget.starts.max(1) as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = source.derive(s).rng();
            let x0: Vec<f64> = (0..dim)
                .map(|_| if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 })
                .collect();
            let mut max_seen = f64::NEG_INFINITY;
            let mut count = 0;
            let (x, v) = coordinate_ascent(objective, x0, &lo, &hi, 0.5 * b, budget.rounds, |_, v| {
                count += 1;
                max_seen = max_seen.max(v);
            });
            (x, v, max_seen, count)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.3).sum();
    let max_seen = runs.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let (best_params, best_value, _, _) = runs
        .into_iter()
        .reduce(|a, c| if c.1 > a.1 { c } else { a })
        .expect("at least one start");
    let best_partition = family.partition_at(&best_params)?;
    let distance_to_base = d2_distance(&best_partition, &family.base)?.value;
    Ok(PerturbationOutcome {
        rho,
        base_value,
        best_value,
        best_params,
        best_partition,
        distance_to_base,
        max_excess: max_seen - base_value,
        evaluations,
    })
}

// ---------------------------------------------------------------------------
// negative-ρ witness

/// Regular three-sector partition arranged so that cell 0 lies in
/// `{x₁ ≥ 0}` and meets cell 1 along the positive `x₂` axis.
pub fn reflected_regular_partition() -> ConicalPartition {
    ConicalPartition::sectors(vec![-FRAC_PI_6, FRAC_PI_2, PI + FRAC_PI_6]).expect("valid breakpoints")
}

/// Direction along the bisector of cell 0 and its rotation by 90°.
pub const WITNESS_AXIS: [f64; 2] = [0.866_025_403_784_438_6, 0.5];
pub const WITNESS_NORMAL: [f64; 2] = [-0.5, 0.866_025_403_784_438_6];

/// Scan region `x = s·y + t·ỹ` with `t = f·√3·s` for the listed
/// fractions `f ∈ [0, 1]`, which keeps `x` in cell 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSearch {
    pub along: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Required ratio of `|value|` to its error estimate.
    pub certify_factor: f64,
}

impl Default for WitnessSearch {
    fn default() -> Self {
        let along = (0..48).map(|i| 400f64.powf(i as f64 / 47.0)).collect();
        let fractions = (1..=24).map(|i| i as f64 / 24.0 * 0.999).collect();
        Self {
            along,
            fractions,
            certify_factor: 5.0,
        }
    }
}

impl WitnessSearch {
    /// The scan restricted to the bisector `⟨x, ỹ⟩ = 0`.
    pub fn bisector_only(&self) -> Self {
        Self {
            fractions: vec![0.0],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub along: f64,
    pub across: f64,
    pub x: Vec<f64>,
    pub value: f64,
    pub error: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub rho: f64,
    pub x: Vec<f64>,
    pub cells: (usize, usize),
    /// `ρ⁻¹ L T_ρ(1_{Bᵢ} − 1_{Bⱼ})(x)` from the boundary identity.
    pub value: f64,
    /// The same quantity by the integral form.
    pub direct_value: f64,
    pub error: f64,
    /// `d/dλ ψ_ρ` per unit of Gaussian mass moved from `Bᵢ` to `Bⱼ` near `x`.
    pub improvement_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessScan {
    pub rho: f64,
    pub search: WitnessSearch,
    pub points: Vec<ScanPoint>,
    /// The most negative certified point.
    pub witness: Option<Witness>,
}

impl WitnessScan {
    pub fn min_value(&self) -> f64 {
        self.points.iter().map(|p| p.value).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates `ρ⁻¹ L T_ρ(1_{B₀} − 1_{B₁})` over the scan region of the
/// reflected regular partition and keeps the best certified negative point.
pub fn witness_scan(rho: f64, search: &WitnessSearch) -> Result<WitnessScan> {
    let r = CorrelationParam::new(rho)?;
    if rho == 0.0 || r.is_degenerate() {
        return Err(Error::InvalidArgument("need 0 < |ρ| < 1".into()));
    }
    let p = reflected_regular_partition();
    let sqrt3 = 3f64.sqrt();
    let grid: Vec<(f64, f64)> = search
        .along
        .iter()
        .flat_map(|&s| search.fractions.iter().map(move |&f| (s, f * sqrt3 * s)))
        .collect();
    let evaluated: Vec<(ScanPoint, f64)> = grid
        .par_iter()
        .map(|&(s, t)| {
            let x = vec![
                s * WITNESS_AXIS[0] + t * WITNESS_NORMAL[0],
                s * WITNESS_AXIS[1] + t * WITNESS_NORMAL[1],
            ];
            let d = lt_rho_difference(&p, 0, 1, r, &x)?;
            let value = d.boundary.unwrap_or(d.direct);
            let error = (value - d.direct).abs().max(d.error);
            let certified = value < 0.0 && value.abs() > search.certify_factor * error;
            Ok((
                ScanPoint {
                    along: s,
                    across: t,
                    x,
                    value,
                    error,
                    certified,
                },
                d.direct,
            ))
        })
        .collect::<Result<_>>()?;
    let witness = evaluated
        .iter()
        .filter(|(pt, _)| pt.certified)
        .min_by(|a, b| a.0.value.total_cmp(&b.0.value))
        .map(|(pt, direct)| Witness {
            rho,
            x: pt.x.clone(),
            cells: (0, 1),
            value: pt.value,
            direct_value: *direct,
            error: pt.error,
            improvement_rate: -2.0 * pt.value,
        });
    Ok(WitnessScan {
        rho,
        search: search.clone(),
        points: evaluated.into_iter().map(|(pt, _)| pt).collect(),
        witness,
    })
}

/// A certified point showing that the regular partition violates the
/// first-variation condition for `ρ < 0`.
pub fn negative_rho_witness(rho: f64, search: &WitnessSearch) -> Result<Witness> {
    if !(rho > -0.2 && rho < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "witness search expects ρ ∈ (−0.2, 0), got {rho}"
        )));
    }
    let scan = witness_scan(rho, search)?;
    let min = scan.min_value();
    scan.witness.ok_or_else(|| {
        let (s0, s1) = (
            search.along.first().copied().unwrap_or(0.0),
            search.along.last().copied().unwrap_or(0.0),
        );
        Error::NoWitness(format!(
            "ρ = {rho}: {} points with ⟨x, y⟩ ∈ [{s0}, {s1}], minimum value {min:e}",
            scan.points.len()
        ))
    })
}

// ---------------------------------------------------------------------------
// quantitative stability of near-maximizers

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityProbeRow {
    pub epsilon: f64,
    pub max_distance: f64,
    pub bound: f64,
    pub samples: usize,
}

impl StabilityProbeRow {
    pub fn holds(&self) -> bool {
        self.max_distance <= self.bound
    }
}

/// Directions probed per `ε`.
pub const PROBE_DIRECTIONS: usize = 64;

/// For each `ε`, walks from the regular partition along width perturbations
/// `(cos φ, sin φ, −cos φ − sin φ)` to the level set `ψ₀ = 9/(8π) − ε`, and
/// records the largest `d₂` to the regular partition met on the way.
pub fn near_maximizer_probe(epsilons: &[f64]) -> Result<Vec<StabilityProbeRow>> {
    let sup = 9.0 / (8.0 * PI);
    let regular = ConicalPartition::from_widths(0.0, &[TAU / 3.0; 3])?;
    epsilons
        .iter()
        .map(|&eps| {
            if !(0.0..0.01).contains(&eps) {
                return Err(Error::InvalidArgument(format!("ε = {eps} must lie in [0, 1/100)")));
            }
            let mut max_distance: f64 = 0.0;
            if eps > 0.0 {
                for d in 0..PROBE_DIRECTIONS {
                    let phi = TAU * d as f64 / PROBE_DIRECTIONS as f64;
                    let dir = [phi.cos(), phi.sin(), -phi.cos() - phi.sin()];
                    let widths_at = |t: f64| -> Option<[f64; 3]> {
                        let w = [0, 1, 2].map(|i| TAU / 3.0 + t * dir[i]);
                        w.iter().all(|v| *v >= 0.0).then_some(w)
                    };
                    let inside = |t: f64| widths_at(t).is_some_and(|w| psi_zero_of_widths(&w) >= sup - eps);
                    // bracket the level set, then bisect
                    let (mut lo, mut hi) = (0.0, 1e-6);
                    while inside(hi) && hi < 10.0 {
                        lo = hi;
                        hi *= 2.0;
                    }
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if inside(mid) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    if let Some(w) = widths_at(lo) {
                        let q = ConicalPartition::from_widths(0.0, &w)?;
                        max_distance = max_distance.max(d2_distance(&q, &regular)?.value);
                    }
                }
            }
            Ok(StabilityProbeRow {
                epsilon: eps,
                max_distance,
                bound: 6.0 * eps.powf(0.125),
                samples: if eps > 0.0 { PROBE_DIRECTIONS } else { 1 },
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// integrated identities

/// `∫₀^ρ ψ_α dα` by Gauss–Legendre in `α`.
pub fn integrated_psi(p: &ConicalPartition, rho: f64, nodes: usize) -> Result<f64> {
    if rho == 0.0 {
        return Ok(0.0);
    }
    let (alphas, weights) = gauss_legendre_on(nodes, 0.0, rho);
    let options = SeriesOptions { degree: 48, tol: 1e-10 };
    alphas
        .iter()
        .zip(&weights)
        .map(|(a, w)| Ok(w * psi_rho(p, *a, options)?.value))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtcCheck {
    pub rho: f64,
    /// `J(ρ) − Σ γ(Aᵢ)²`.
    pub stability_gain: f64,
    pub integral: f64,
}

impl FtcCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.stability_gain - self.integral).abs()
    }
}

/// Compares `J(ρ) − J(0)` with `∫₀^ρ ψ_α dα` (64-point rule).
pub fn ftc_reconstruction(p: &ConicalPartition, rho: f64) -> Result<FtcCheck> {
    let quad = Method::Quadrature2d { nodes: 64 };
    let j = noise_stability_j(p, CorrelationParam::new(rho)?, quad)?.value;
    let j0 = noise_stability_j(p, CorrelationParam::new(0.0)?, quad)?.value;
    Ok(FtcCheck {
        rho,
        stability_gain: j - j0,
        integral: integrated_psi(p, rho, 64)?,
    })
}

/// `λψ(g) + (1−λ)ψ(h) − ψ(λg + (1−λ)h)` for tuples given by Hermite data.
pub fn convexity_gap(g: &[HermiteSeries], h: &[HermiteSeries], lambda: f64, rho: f64) -> Result<f64> {
    if g.len() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: h.len(),
        });
    }
    let mix = g
        .iter()
        .zip(h)
        .map(|(a, b)| {
            let mut m = HermiteSeries::new(a.dim(), a.truncation_degree().max(b.truncation_degree()));
            for (ell, v) in a.iter() {
                m.insert(ell.clone(), lambda * v + (1.0 - lambda) * b.get(ell))?;
            }
            for (ell, v) in b.iter() {
                if a.get(ell) == 0.0 {
                    m.insert(ell.clone(), (1.0 - lambda) * v)?;
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(
        lambda * psi_rho_from_coefficients(g, rho) + (1.0 - lambda) * psi_rho_from_coefficients(h, rho)
            - psi_rho_from_coefficients(&mix, rho),
    )
}

/// `max_q J(q, ρ) − J(regular, ρ)` over `count` rotations of the regular
/// three-sector partition, the only planar sector partitions with equal
/// cell measures.
pub fn monotone_comparison(rho: f64, count: usize) -> Result<f64> {
    let quad = Method::Quadrature2d { nodes: 64 };
    let r = CorrelationParam::new(rho)?;
    let regular = ConicalPartition::regular(3, 2)?;
    let base = noise_stability_j(&regular, r, quad)?.value;
    let mut worst = f64::NEG_INFINITY;
    for c in 0..count {
        let q = regular.rotated(TAU * c as f64 / count as f64);
        worst = worst.max(noise_stability_j(&q, r, quad)?.value - base);
    }
    Ok(worst)
}

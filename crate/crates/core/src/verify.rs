//! The acceptance suite. Each criterion runs a fixed, seeded experiment and
//! returns a [`CriterionReport`] listing the individual comparisons; the CLI's
//! `verify` subcommand and the `acceptance` test target both call into here.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::{dictator, discrete_stability, discrete_stability_rerandomized, plurality_fn};
use crate::error::Result;
use crate::gauss::quadrature::{gauss_legendre_on, QuadratureGrid};
use crate::gauss::{CorrelationParam, RandomSource};
use crate::hermite::{normalized_hermite_multi, MultiIndex};
use crate::maxkcut::{alpha_k, maxkcut_pipeline, AlphaSpec, PipelineSpec};
use crate::optimize::{
    first_variation_check, ftc_reconstruction, near_maximizer_probe, negative_rho_witness, perturbation_search_psi,
    sup_psi_zero_search, witness_scan, Parametrization, PerturbationBudget, PerturbationFamily, SupPsiZeroOptions,
    VariationGrid, WitnessSearch,
};
use crate::partition::{dot, ConicalPartition};
use crate::stability::{
    cone_moment_planar, dt_drho, dt_drho_via_l, indicator_dt_drho, noise_stability_j, t_rho_apply, t_rho_indicator,
    Method, RHO_STEP,
};

/// Number of acceptance criteria.
pub const CRITERIA: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value − target| ≤ tol`
    Near,
    /// `value ≤ target`
    AtMost,
    /// `value ≥ target`
    AtLeast,
}

/// One comparison inside a criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub target: f64,
    pub tol: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn near(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::build(label, value, target, tol, Relation::Near)
    }

    pub fn at_most(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::build(label, value, bound, 0.0, Relation::AtMost)
    }

    pub fn at_least(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::build(label, value, bound, 0.0, Relation::AtLeast)
    }

    fn build(label: impl Into<String>, value: f64, target: f64, tol: f64, relation: Relation) -> Self {
        let passed = match relation {
            Relation::Near => (value - target).abs() <= tol,
            Relation::AtMost => value <= target,
            Relation::AtLeast => value >= target,
        };
        Self {
            label: label.into(),
            value,
            target,
            tol,
            relation,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub elapsed_secs: f64,
    pub budget_secs: f64,
    pub note: Option<String>,
}

impl CriterionReport {
    /// `PASS`/`FAIL` headline followed by the failing checks.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} criterion {:>2}: {} ({:.1} s of {:.0} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed_secs,
            self.budget_secs
        );
        for c in self.checks.iter().filter(|c| !c.passed) {
            s.push_str(&format!(
                "\n    failed {}: value {:e}, target {:e}, tol {:e} ({:?})",
                c.label, c.value, c.target, c.tol, c.relation
            ));
        }
        s
    }
}

fn timed<F: FnOnce() -> Result<(Vec<Check>, Option<String>)>>(
    id: usize,
    title: &str,
    budget_secs: f64,
    body: F,
) -> CriterionReport {
    let start = Instant::now();
    let outcome = body();
    let elapsed_secs = start.elapsed().as_secs_f64();
    let (mut checks, note) = match outcome {
        Ok(v) => v,
        Err(e) => (vec![], Some(format!("error: {e}"))),
    };
    let failed_to_run = checks.is_empty();
    checks.push(Check::at_most("runtime (s)", elapsed_secs, budget_secs));
    CriterionReport {
        id,
        title: title.to_string(),
        passed: !failed_to_run && checks.iter().all(|c| c.passed),
        checks,
        elapsed_secs,
        budget_secs,
        note,
    }
}

fn rho(v: f64) -> Result<CorrelationParam> {
    CorrelationParam::new(v)
}

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: usize) -> Option<CriterionReport> {
    let report = match id {
        1 => closed_form_constants(),
        2 => regular_geometry(),
        3 => borell_case(),
        4 => spectral_consistency(),
        5 => operator_identities(),
        6 => cone_moment(),
        7 => first_variation(),
        8 => small_rho_optimality(),
        9 => negative_rho_failure(),
        10 => ftc_reconstruction_check(),
        11 => discrete_stability_check(),
        12 => alpha_three(),
        13 => maxcut_pipeline(),
        14 => stability_metric(),
        _ => return None,
    };
    Some(report)
}

pub fn run_all() -> Vec<CriterionReport> {
    (1..=CRITERIA).filter_map(run_criterion).collect()
}

pub fn closed_form_constants() -> CriterionReport {
    timed(1, "sup ψ₀ closed forms for k = 2, 3", 60.0, || {
        let two = sup_psi_zero_search(2, 2, SupPsiZeroOptions::default(), RandomSource::new(1))?;
        let three = sup_psi_zero_search(3, 2, SupPsiZeroOptions::default(), RandomSource::new(2))?;
        Ok((
            vec![
                Check::near("sup ψ₀, k = 2", two.value, 1.0 / PI, 1e-3),
                Check::near("sup ψ₀, k = 3", three.value, 9.0 / (8.0 * PI), 1e-3),
            ],
            None,
        ))
    })
}

// barycenter of a planar arc by tensor Gauss–Legendre in polar coordinates
fn barycenter_by_quadrature(start: f64, width: f64) -> [f64; 2] {
    let (radii, rw) = gauss_legendre_on(64, 0.0, 12.0);
    let (angles, aw) = gauss_legendre_on(64, start, start + width);
    let mut z = [0.0; 2];
    for (t, wt) in angles.iter().zip(&aw) {
        for (r, wr) in radii.iter().zip(&rw) {
            let w = wt * wr * r * r * (-0.5 * r * r).exp() / TAU;
            z[0] += w * t.cos();
            z[1] += w * t.sin();
        }
    }
    z
}

pub fn regular_geometry() -> CriterionReport {
    timed(2, "regular partition barycenter geometry", 1.0, || {
        let p = ConicalPartition::regular(3, 2)?;
        let arcs = p.planar_view().expect("planar").arcs;
        let norm_target = 6f64.sqrt() / (4.0 * PI.sqrt());
        let gap_target = 3.0 * 2f64.sqrt() / (4.0 * PI.sqrt());
        let quad: Vec<[f64; 2]> = arcs
            .iter()
            .map(|a| barycenter_by_quadrature(a.start, a.width))
            .collect();
        let mut checks = Vec::new();
        for i in 0..3 {
            let closed = p.barycenter_vector(i)?;
            checks.push(Check::near(
                format!("‖z{i}‖ closed form"),
                dot(&closed, &closed).sqrt(),
                norm_target,
                1e-8,
            ));
            checks.push(Check::near(
                format!("‖z{i}‖ quadrature"),
                dot(&quad[i], &quad[i]).sqrt(),
                norm_target,
                1e-8,
            ));
            let j = (i + 1) % 3;
            checks.push(Check::near(
                format!("‖z{i} − z{j}‖ closed form"),
                p.barycenter_difference_norm(i, j)?,
                gap_target,
                1e-8,
            ));
            let d = [quad[i][0] - quad[j][0], quad[i][1] - quad[j][1]];
            checks.push(Check::near(
                format!("‖z{i} − z{j}‖ quadrature"),
                dot(&d, &d).sqrt(),
                gap_target,
                1e-8,
            ));
        }
        Ok((checks, None))
    })
}

pub fn borell_case() -> CriterionReport {
    timed(3, "two half-planes match the orthant formula", 60.0, || {
        let p = ConicalPartition::sectors(vec![0.0, PI])?;
        let mut checks = Vec::new();
        for (i, r) in [0.1f64, 0.5, 0.9].into_iter().enumerate() {
            let exact = 0.5 + r.asin() / PI;
            let mc = noise_stability_j(
                &p,
                rho(r)?,
                Method::MonteCarlo {
                    samples: 1_000_000,
                    seed: 30 + i as u64,
                },
            )?;
            checks.push(Check::near(
                format!("Monte Carlo, ρ = {r}"),
                mc.value,
                exact,
                3.0 * mc.error_estimate,
            ));
            let quad = noise_stability_j(&p, rho(r)?, Method::Quadrature2d { nodes: 64 })?;
            checks.push(Check::near(format!("quadrature, ρ = {r}"), quad.value, exact, 1e-5));
        }
        Ok((checks, None))
    })
}

pub fn spectral_consistency() -> CriterionReport {
    timed(4, "Hermite-series J matches quadrature J", 120.0, || {
        let p = ConicalPartition::regular(3, 2)?;
        let mut checks = Vec::new();
        for r in [0.05, 0.1, 0.3] {
            let series = noise_stability_j(&p, rho(r)?, Method::HermiteSeries { degree: 24 })?;
            let quad = noise_stability_j(&p, rho(r)?, Method::Quadrature2d { nodes: 64 })?;
            checks.push(Check::near(format!("ρ = {r}"), series.value, quad.value, 1e-4));
        }
        Ok((checks, None))
    })
}

pub fn operator_identities() -> CriterionReport {
    timed(
        5,
        "eigenrelation, semigroup and ρ-derivative identities",
        120.0,
        || {
            let mut checks = Vec::new();
            let grid = QuadratureGrid::tensor_gauss_hermite(2, 30);
            let x = [0.7, -1.1];
            let mut eigen_gap: f64 = 0.0;
            for ell in MultiIndex::all_up_to(2, 4) {
                for r in [-0.6, 0.5] {
                    let f = |y: &[f64]| normalized_hermite_multi(&ell, y).unwrap_or(f64::NAN);
                    let lhs = t_rho_apply(f, rho(r)?, &x, &grid)?;
                    eigen_gap = eigen_gap.max((lhs - r.powi(ell.degree() as i32) * f(&x)).abs());
                }
            }
            checks.push(Check::at_most("max |T_ρ h_ℓ − ρ^|ℓ| h_ℓ|, |ℓ| ≤ 4", eigen_gap, 1e-6));

            let p = ConicalPartition::regular(3, 2)?;
            let fine = QuadratureGrid::tensor_gauss_hermite(2, 48);
            let (r1, r2) = (0.7, 0.6);
            let mut semigroup_gap: f64 = 0.0;
            for x in [[0.3, 0.4], [-1.0, 0.9], [2.0, -0.5]] {
                let inner = |y: &[f64]| {
                    t_rho_indicator(&p, 0, CorrelationParam::new(r2).expect("valid"), y).unwrap_or(f64::NAN)
                };
                let composed = t_rho_apply(inner, rho(r1)?, &x, &fine)?;
                semigroup_gap = semigroup_gap.max((composed - t_rho_indicator(&p, 0, rho(r1 * r2)?, &x)?).abs());
            }
            checks.push(Check::at_most("max |T_ρ₁T_ρ₂ 1_A − T_ρ₁ρ₂ 1_A|", semigroup_gap, 1e-5));

            let h = RHO_STEP;
            let halves = ConicalPartition::sectors(vec![-PI / 2.0, PI / 2.0])?;
            let xh = [1.0, 0.0];
            let fd = (t_rho_indicator(&halves, 0, rho(0.3 + h)?, &xh)?
                - t_rho_indicator(&halves, 0, rho(0.3 - h)?, &xh)?)
                / (2.0 * h);
            checks.push(Check::near(
                "half-plane dT/dρ vs finite difference",
                indicator_dt_drho(&halves, 0, rho(0.3)?, &xh)?,
                fd,
                1e-4,
            ));

            let smooth = |y: &[f64]| (0.8 * y[0]).sin() + y[0] * y[0] * y[1] + (0.3 * y[1]).exp();
            let xs = [0.6, -0.4];
            let grid40 = QuadratureGrid::tensor_gauss_hermite(2, 40);
            for r in [-0.6, 0.25, 0.7] {
                let fd = (t_rho_apply(smooth, rho(r + h)?, &xs, &grid40)?
                    - t_rho_apply(smooth, rho(r - h)?, &xs, &grid40)?)
                    / (2.0 * h);
                checks.push(Check::near(
                    format!("integral form vs finite difference, ρ = {r}"),
                    dt_drho(smooth, rho(r)?, &xs, &grid40)?,
                    fd,
                    1e-4,
                ));
                checks.push(Check::near(
                    format!("ρ⁻¹ L T_ρ vs finite difference, ρ = {r}"),
                    dt_drho_via_l(smooth, rho(r)?, &xs, &grid40)?,
                    fd,
                    1e-4,
                ));
            }
            Ok((checks, None))
        },
    )
}

pub fn cone_moment() -> CriterionReport {
    timed(6, "cone moment vanishes on random sectors", 10.0, || {
        let mut rng = RandomSource::new(6).rng();
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let start = rng.random_range(0.0..TAU);
            let width = rng.random_range(0.01..(TAU - 0.01));
            let p = ConicalPartition::from_widths(start, &[width, TAU - width])?;
            worst = worst.max(cone_moment_planar(&p, 0, 64)?.abs());
        }
        Ok((
            vec![Check::at_most("max |∫(2 − |y|²) 1_A dγ₂| over 20 sectors", worst, 1e-8)],
            None,
        ))
    })
}

pub fn first_variation() -> CriterionReport {
    timed(7, "first-variation containment at ρ = 0.05", 300.0, || {
        let regular = ConicalPartition::regular(3, 2)?;
        let report = first_variation_check(&regular, 0.05, VariationGrid::default())?;
        let moved = ConicalPartition::sectors(vec![-PI / 3.0 + 0.2, PI / 3.0, PI])?;
        let perturbed = first_variation_check(&moved, 0.05, VariationGrid::default())?;
        Ok((
            vec![
                Check::at_most("violations, regular partition", report.violations.len() as f64, 0.0),
                Check::at_least("violations, moved wall", perturbed.violations.len() as f64, 1.0),
            ],
            Some(format!(
                "{} grid points checked for the regular partition",
                report.points.len()
            )),
        ))
    })
}

pub fn small_rho_optimality() -> CriterionReport {
    timed(8, "perturbation search returns to the regular partition", 900.0, || {
        let regular = ConicalPartition::regular(3, 2)?;
        let family = PerturbationFamily::new(regular, Parametrization::SectorAngles, 0.5)?;
        let out = perturbation_search_psi(0.05, &family, PerturbationBudget::default(), RandomSource::new(8))?;
        Ok((
            vec![
                Check::at_most("d₂(incumbent, regular)", out.distance_to_base, 1e-2),
                Check::at_most("max ψ_ρ(q) − ψ_ρ(regular)", out.max_excess, 1e-6),
            ],
            Some(format!(
                "property-based substitute for a quantitative small-ρ threshold; {} evaluations",
                out.evaluations
            )),
        ))
    })
}

pub fn negative_rho_failure() -> CriterionReport {
    timed(9, "certified negative-ρ witness", 300.0, || {
        let search = WitnessSearch::default();
        let w = negative_rho_witness(-0.05, &search)?;
        let positive = witness_scan(0.05, &search)?;
        Ok((
            vec![
                Check::at_most("witness value, ρ = −0.05", w.value, 0.0),
                Check::at_least(
                    "|value| / error",
                    w.value.abs() / w.error.max(f64::MIN_POSITIVE),
                    search.certify_factor,
                ),
                Check::at_most(
                    "certified witnesses, ρ = +0.05",
                    positive.witness.is_some() as u8 as f64,
                    0.0,
                ),
            ],
            Some(format!("witness at x = {:?}, value {:e}", w.x, w.value)),
        ))
    })
}

pub fn ftc_reconstruction_check() -> CriterionReport {
    timed(10, "J(0.3) − J(0) equals the integral of ψ", 120.0, || {
        let check = ftc_reconstruction(&ConicalPartition::regular(3, 2)?, 0.3)?;
        Ok((
            vec![Check::near(
                "J(0.3) − 1/3 vs ∫₀^0.3 ψ",
                check.stability_gain,
                check.integral,
                1e-4,
            )],
            None,
        ))
    })
}

pub fn discrete_stability_check() -> CriterionReport {
    timed(11, "plurality stability by Fourier and by enumeration", 120.0, || {
        let mut checks = Vec::new();
        for m in [1, 3, 5] {
            let f = plurality_fn(m, 3)?;
            for r in [-0.4, 0.1, 0.5] {
                checks.push(Check::near(
                    format!("PLUR_{{{m},3}}, ρ = {r}"),
                    discrete_stability(&f, r)?,
                    discrete_stability_rerandomized(&f, r)?,
                    1e-12,
                ));
            }
        }
        let d = dictator(3, 3, 1)?;
        for r in [-0.4, 0.1, 0.5] {
            let exact = (1.0 + 2.0 * r) / 3.0;
            checks.push(Check::near(
                format!("dictator Fourier, ρ = {r}"),
                discrete_stability(&d, r)?,
                exact,
                1e-14,
            ));
            checks.push(Check::near(
                format!("dictator enumeration, ρ = {r}"),
                discrete_stability_rerandomized(&d, r)?,
                exact,
                1e-14,
            ));
        }
        Ok((checks, None))
    })
}

/// The two resolutions compared by criterion 12.
pub const ALPHA_RESOLUTIONS: [AlphaSpec; 2] = [
    AlphaSpec {
        grid_points: 201,
        nodes: 64,
    },
    AlphaSpec {
        grid_points: 121,
        nodes: 40,
    },
];

pub fn alpha_three() -> CriterionReport {
    timed(12, "α₃ at two quadrature resolutions", 120.0, || {
        let fine = alpha_k(3, ALPHA_RESOLUTIONS[0])?;
        let coarse = alpha_k(3, ALPHA_RESOLUTIONS[1])?;
        Ok((
            vec![
                Check::near("α₃ (fine)", fine.infimum, 0.836, 5e-3),
                Check::near("α₃ fine vs coarse", fine.infimum, coarse.infimum, 1e-4),
            ],
            Some(format!("infimum {:.10} at ρ = {:.6}", fine.infimum, fine.argmin)),
        ))
    })
}

pub fn maxcut_pipeline() -> CriterionReport {
    timed(13, "MAX-3-CUT rounding against brute force", 600.0, || {
        let spec = PipelineSpec::default();
        let rows = maxkcut_pipeline(spec, RandomSource::new(13))?;
        let good = rows.iter().filter(|r| r.best_rounded >= 0.83 * r.brute_force).count();
        let over = rows
            .iter()
            .filter(|r| r.best_rounded > r.brute_force * (1.0 + 1e-12))
            .count();
        let worst = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        Ok((
            vec![
                Check::at_least("instances with rounded ≥ 0.83 × optimum", good as f64, 95.0),
                Check::at_most("instances with rounded > optimum", over as f64, 0.0),
            ],
            Some(format!("{} instances, worst ratio {worst:.4}", rows.len())),
        ))
    })
}

pub fn stability_metric() -> CriterionReport {
    timed(
        14,
        "near-maximizers of ψ₀ are d₂-close to the regular partition",
        300.0,
        || {
            let rows = near_maximizer_probe(&[1e-4, 1e-6])?;
            let checks = rows
                .iter()
                .map(|r| {
                    Check::at_most(
                        format!("max d₂ at ε = {:e} (bound 6ε^(1/8))", r.epsilon),
                        r.max_distance,
                        r.bound,
                    )
                })
                .collect();
            Ok((checks, None))
        },
    )
}

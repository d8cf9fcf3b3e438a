//! The acceptance suite as a standalone test binary: one PASS/FAIL line per
//! criterion, always printed, and a failing exit status if any criterion
//! fails. Tolerances live in `noise_stability::verify`. Pass criterion
//! numbers as arguments to run a subset.

use std::f64::consts::TAU;
use std::process::ExitCode;

use noise_stability::gauss::quadrature::gauss_legendre_on;
use noise_stability::gauss::CorrelationParam;
use noise_stability::maxkcut::alpha_k;
use noise_stability::partition::ConicalPartition;
use noise_stability::stability::t_rho_indicator;
use noise_stability::verify::{run_criterion, ALPHA_RESOLUTIONS, CRITERIA};

// J as Σᵢ ∫_{Aᵢ} T_ρ 1_{Aᵢ} dγ₂, integrating the pointwise operator in polar
// coordinates instead of going through the angle-difference density
fn stability_by_polar_integral(p: &ConicalPartition, rho: f64) -> f64 {
    let r = CorrelationParam::new(rho).unwrap();
    let (radii, rw) = gauss_legendre_on(80, 0.0, 10.0);
    let mut total = 0.0;
    for (i, arc) in p.planar_view().unwrap().arcs.iter().enumerate() {
        let (angles, aw) = gauss_legendre_on(48, arc.start, arc.end());
        for (t, wt) in angles.iter().zip(&aw) {
            for (s, ws) in radii.iter().zip(&rw) {
                let x = [s * t.cos(), s * t.sin()];
                total += wt * ws * s * (-0.5 * s * s).exp() / TAU * t_rho_indicator(p, i, r, &x).unwrap();
            }
        }
    }
    total
}

fn alpha_three_against_an_independent_stability_oracle() -> bool {
    let res = alpha_k(3, ALPHA_RESOLUTIONS[1]).unwrap();
    let p = ConicalPartition::regular(3, 2).unwrap();
    let j = stability_by_polar_integral(&p, res.argmin);
    let oracle = (3.0 - 3.0 * j) / (2.0 * (1.0 - res.argmin));
    let pass = (oracle - res.infimum).abs() < 1e-6;
    println!(
        "{} α₃ oracle: polar integral {oracle:.10} vs search {:.10} at ρ = {:.6}",
        if pass { "PASS" } else { "FAIL" },
        res.infimum,
        res.argmin
    );
    pass
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --nocapture; only numbers select criteria
    let mut ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if ids.is_empty() {
        ids = (1..=CRITERIA).collect();
    }
    let mut failed = 0;
    for id in &ids {
        let Some(report) = run_criterion(*id) else {
            println!("FAIL criterion {id}: unknown");
            failed += 1;
            continue;
        };
        println!("{}", report.summary());
        if let Some(note) = &report.note {
            println!("    {note}");
        }
        failed += usize::from(!report.passed);
    }
    if ids.contains(&12) && !alpha_three_against_an_independent_stability_oracle() {
        failed += 1;
    }
    println!("{} of {} criteria failed", failed, ids.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use noise_stability::discrete::{
    discrete_stability_capped, discrete_stability_rerandomized, plurality_fn, DEFAULT_ENUMERATION_CAP,
};
use noise_stability::gauss::{CorrelationParam, RandomSource};
use noise_stability::manifest::{unix_now, Experiment, ExperimentManifest, MethodName, RunDirectory, RunMetadata};
use noise_stability::maxkcut::{
    alpha_k, alpha_ratio_positive_min, maxkcut_bruteforce, maxkcut_pipeline, relax_embed, round_conical,
    write_pipeline_csv, AlphaSpec, PipelineSpec, WeightedGraph,
};
use noise_stability::optimize::{
    first_variation_check, perturbation_search_psi, sup_psi_zero_search, witness_scan, Parametrization,
    PerturbationBudget, PerturbationFamily, SupPsiZeroOptions, VariationGrid, WitnessSearch,
};
use noise_stability::partition::ConicalPartition;
use noise_stability::stability::{noise_stability_j, psi_rho, Method, SeriesOptions, DEFAULT_DEGREE};
use noise_stability::verify::{run_criterion, Check, CRITERIA};
use noise_stability::Error;

/// Environment variable overriding the worker-thread count.
const THREADS_ENV: &str = "NOISE_STABILITY_THREADS";

mod exit {
    pub const ASSERTION: u8 = 1;
    // 2 is clap's usage error
    pub const MANIFEST: u8 = 3;
    pub const ENUMERATION_CAP: u8 = 4;
    pub const INVALID_INPUT: u8 = 5;
    pub const IO: u8 = 6;
    pub const NUMERICAL: u8 = 7;
}

#[derive(Parser)]
#[command(name = "noise-stability", version, about = "Gaussian noise stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Run the experiment described by a JSON manifest; explicit flags override its fields.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Default)]
struct CommonArgs {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// ρ-grid: `start:stop:step`, a comma list, or one value.
    #[arg(long, global = true, allow_hyphen_values = true)]
    rho: Option<String>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    n: Option<usize>,
    /// montecarlo | quadrature2d | hermite_series
    #[arg(long, global = true)]
    method: Option<String>,
    /// Samples, nodes, degree, starts or instances, depending on the experiment.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Base directory for run directories.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// J and ψ_ρ of the regular partition over a ρ-grid.
    Stability,
    /// First-variation containment check.
    Variation,
    /// sup ψ₀ search, or the perturbation search for ψ_ρ.
    Optimize {
        #[arg(long = "sup-psi0")]
        sup_psi0: bool,
    },
    /// Negative-ρ witness scan.
    Witness,
    /// Plurality stability tables.
    Discrete,
    /// α_k, the random-graph pipeline, or one graph from a file.
    Maxkcut {
        #[arg(value_enum, default_value_t = MaxkcutMode::Alpha)]
        mode: MaxkcutMode,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// The acceptance suite.
    Verify {
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MaxkcutMode {
    Alpha,
    Pipeline,
    Graph,
}

#[derive(Serialize)]
struct Report<'a> {
    manifest: &'a ExperimentManifest,
    passed: bool,
    assertions: Vec<Check>,
    results: Value,
}

struct Outcome {
    assertions: Vec<Check>,
    results: Value,
    /// Extra files as (name, contents).
    files: Vec<(String, Vec<u8>)>,
    summary: String,
}

fn build_manifest(cli: Cli) -> Result<ExperimentManifest, Error> {
    let mut m = match &cli.manifest {
        Some(path) => ExperimentManifest::load(path)?,
        None => {
            let experiment = match &cli.command {
                None => return Err(Error::InvalidArgument("a subcommand or --manifest is required".into())),
                Some(c) => experiment_of(c),
            };
            ExperimentManifest::new(experiment)
        }
    };
    if let (Some(path), Some(c)) = (&cli.manifest, &cli.command) {
        if experiment_of(c) != m.experiment {
            return Err(Error::Manifest(format!(
                "{} describes a different experiment than the subcommand",
                path.display()
            )));
        }
    }
    let c = cli.common;
    m.seed = c.seed.unwrap_or(m.seed);
    m.rho = c.rho.or(m.rho);
    m.k = c.k.or(m.k);
    m.n = c.n.or(m.n);
    if let Some(s) = c.method {
        m.method = Some(s.parse()?);
    }
    m.budget = c.budget.or(m.budget);
    m.tol = c.tol.or(m.tol);
    m.out = c.out.unwrap_or(m.out);
    match cli.command {
        Some(Command::Maxkcut { graph: Some(g), .. }) => m.graph = Some(g),
        Some(Command::Verify { criteria: Some(list) }) => m.criteria = Some(list),
        _ => {}
    }
    m.validate()?;
    Ok(m)
}

fn experiment_of(c: &Command) -> Experiment {
    match c {
        Command::Stability => Experiment::Stability,
        Command::Variation => Experiment::Variation,
        Command::Optimize { sup_psi0: true } => Experiment::SupPsiZero,
        Command::Optimize { sup_psi0: false } => Experiment::Perturbation,
        Command::Witness => Experiment::Witness,
        Command::Discrete => Experiment::Discrete,
        Command::Maxkcut {
            mode: MaxkcutMode::Alpha,
            graph: None,
        } => Experiment::MaxkcutAlpha,
        Command::Maxkcut {
            mode: MaxkcutMode::Pipeline,
            ..
        } => Experiment::MaxkcutPipeline,
        Command::Maxkcut { .. } => Experiment::MaxkcutGraph,
        Command::Verify { .. } => Experiment::Verify,
    }
}

fn single_rho(m: &ExperimentManifest, default: f64) -> Result<f64, Error> {
    let rhos = m.rhos(&[default])?;
    match rhos.as_slice() {
        [r] => Ok(*r),
        _ => Err(Error::InvalidArgument("this experiment takes a single ρ".into())),
    }
}

fn run(m: &ExperimentManifest) -> Result<Outcome, Error> {
    match m.experiment {
        Experiment::Stability => stability(m),
        Experiment::Variation => variation(m),
        Experiment::Perturbation => perturbation(m),
        Experiment::SupPsiZero => sup_psi_zero(m),
        Experiment::Witness => witness(m),
        Experiment::Discrete => discrete(m),
        Experiment::MaxkcutAlpha => maxkcut_alpha(m),
        Experiment::MaxkcutPipeline => maxkcut_batch(m),
        Experiment::MaxkcutGraph => maxkcut_graph(m),
        Experiment::Verify => verify(m),
    }
}

fn stability(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let k = m.k.unwrap_or(3);
    let p = ConicalPartition::regular(k, m.n.unwrap_or((k - 1).max(2)))?;
    let method = match m.method.unwrap_or(MethodName::Quadrature2d) {
        MethodName::MonteCarlo => Method::MonteCarlo {
            samples: m.budget.unwrap_or(1_000_000),
            seed: m.seed,
        },
        MethodName::Quadrature2d => Method::Quadrature2d {
            nodes: m.budget.unwrap_or(64) as usize,
        },
        MethodName::HermiteSeries => Method::HermiteSeries {
            degree: m.budget.map_or(DEFAULT_DEGREE, |b| b as u32),
        },
    };
    let options = SeriesOptions {
        tol: m.tol.unwrap_or(SeriesOptions::default().tol),
        ..Default::default()
    };
    let mut csv = String::from("rho,J,error_estimate,method,psi,psi_error\n");
    let mut rows = Vec::new();
    let mut assertions = Vec::new();
    for rho in m.rhos(&[0.0, 0.1, 0.2, 0.3])? {
        let j = noise_stability_j(&p, CorrelationParam::new(rho)?, method)?;
        assertions.push(Check::at_least(
            format!("J ≥ 0 at ρ = {rho}"),
            j.value + j.error_estimate,
            0.0,
        ));
        assertions.push(Check::at_most(
            format!("J ≤ 1 at ρ = {rho}"),
            j.value - j.error_estimate,
            1.0,
        ));
        let psi = if rho.abs() < 1.0 {
            psi_rho(&p, rho, options)
        } else {
            Err(Error::InvalidCorrelation(rho))
        };
        let (psi_value, psi_error) = match &psi {
            Ok(r) => (r.value.to_string(), format!("{:e}", r.error_estimate)),
            Err(_) => (String::new(), String::new()),
        };
        csv.push_str(&format!(
            "{rho},{},{:e},{},{psi_value},{psi_error}\n",
            j.value, j.error_estimate, j.method
        ));
        rows.push(json!({
            "rho": rho,
            "j": j,
            "psi": psi.as_ref().ok(),
            "psi_unavailable": psi.as_ref().err().map(ToString::to_string),
        }));
    }
    Ok(Outcome {
        summary: csv.clone(),
        assertions,
        results: json!({ "k": k, "dim": p.dim(), "rows": rows }),
        files: vec![("stability.csv".into(), csv.into_bytes())],
    })
}

fn variation(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let p = ConicalPartition::regular(m.k.unwrap_or(3), 2)?;
    let grid = VariationGrid {
        tol: m.tol.unwrap_or(VariationGrid::default().tol),
        ..Default::default()
    };
    let mut assertions = Vec::new();
    let mut reports = Vec::new();
    let mut summary = String::new();
    for rho in m.rhos(&[0.05])? {
        let r = first_variation_check(&p, rho, grid)?;
        summary.push_str(&format!(
            "ρ = {rho}: {} points, {} violations\n",
            r.points.len(),
            r.violations.len()
        ));
        assertions.push(Check::at_most(
            format!("violations at ρ = {rho}"),
            r.violations.len() as f64,
            0.0,
        ));
        reports.push(json!({ "rho": rho, "grid": r.grid, "points": r.points.len(), "violations": r.violations }));
    }
    Ok(Outcome {
        summary,
        assertions,
        results: json!({ "reports": reports }),
        files: vec![],
    })
}

fn sup_psi_zero(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let k = m.k.unwrap_or(3);
    let options = SupPsiZeroOptions {
        restarts: m.budget.map_or(SupPsiZeroOptions::default().restarts, |b| b as usize),
        ..Default::default()
    };
    let out = sup_psi_zero_search(k, m.n.unwrap_or(2), options, RandomSource::new(m.seed))?;
    let closed = match k {
        2 => 1.0 / std::f64::consts::PI,
        _ => 9.0 / (8.0 * std::f64::consts::PI),
    };
    Ok(Outcome {
        summary: format!("sup ψ₀ (k = {k}) = {:.6}\n", out.value),
        assertions: vec![Check::near(
            "sup ψ₀ vs closed form",
            out.value,
            closed,
            m.tol.unwrap_or(1e-3),
        )],
        results: json!({ "k": k, "outcome": out, "closed_form": closed }),
        files: vec![],
    })
}

fn perturbation(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let rho = single_rho(m, 0.05)?;
    let family = PerturbationFamily::new(ConicalPartition::regular(3, 2)?, Parametrization::SectorAngles, 0.5)?;
    let budget = PerturbationBudget {
        starts: m.budget.map_or(PerturbationBudget::default().starts, |b| b as usize),
        ..Default::default()
    };
    let out = perturbation_search_psi(rho, &family, budget, RandomSource::new(m.seed))?;
    Ok(Outcome {
        summary: format!(
            "ρ = {rho}: incumbent ψ = {:.12}, regular ψ = {:.12}, d₂ to regular = {:.3e} (property-based check)\n",
            out.best_value, out.base_value, out.distance_to_base
        ),
        assertions: vec![
            Check::at_most("d₂(incumbent, regular)", out.distance_to_base, 1e-2),
            Check::at_most("max ψ_ρ(q) − ψ_ρ(regular)", out.max_excess, m.tol.unwrap_or(1e-6)),
        ],
        results: json!({ "label": "property-based substitute for a small-ρ threshold", "outcome": out }),
        files: vec![],
    })
}

fn witness(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let rho = single_rho(m, -0.05)?;
    let scan = witness_scan(rho, &WitnessSearch::default())?;
    let found = scan.witness.is_some();
    Ok(Outcome {
        summary: match &scan.witness {
            Some(w) => format!("witness at x = {:?}: value {:e} ± {:e}\n", w.x, w.value, w.error),
            None => format!(
                "no certified witness at ρ = {rho}; minimum value {:e}\n",
                scan.min_value()
            ),
        },
        assertions: vec![Check::at_least("certified witness found", found as u8 as f64, 1.0)],
        results: json!({ "rho": rho, "search": scan.search, "scanned": scan.points.len(), "min_value": scan.min_value(), "witness": scan.witness }),
        files: vec![],
    })
}

fn discrete(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let (k, votes) = (m.k.unwrap_or(3), m.n.unwrap_or(3));
    let cap = m.budget.map_or(DEFAULT_ENUMERATION_CAP, |b| b as usize);
    let f = plurality_fn(votes, k)?;
    let tol = m.tol.unwrap_or(1e-12);
    let mut csv = String::from("rho,fourier,enumeration,difference\n");
    let mut assertions = Vec::new();
    for rho in m.rhos(&[-0.4, 0.1, 0.5])? {
        let fourier = discrete_stability_capped(&f, rho, cap)?;
        let direct = discrete_stability_rerandomized(&f, rho)?;
        csv.push_str(&format!("{rho},{fourier},{direct},{:e}\n", fourier - direct));
        assertions.push(Check::near(format!("routes agree at ρ = {rho}"), fourier, direct, tol));
    }
    Ok(Outcome {
        summary: csv.clone(),
        assertions,
        results: json!({ "function": format!("plurality of {votes} votes over {k} symbols") }),
        files: vec![("discrete.csv".into(), csv.into_bytes())],
    })
}

fn maxkcut_alpha(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let k = m.k.unwrap_or(3);
    let spec = AlphaSpec {
        grid_points: m.budget.map_or(AlphaSpec::default().grid_points, |b| b as usize),
        ..Default::default()
    };
    let res = alpha_k(k, spec)?;
    let positive = alpha_ratio_positive_min(k, 99, spec.nodes)?;
    let mut csv = String::from("rho,ratio\n");
    for (r, v) in res.rhos.iter().zip(&res.ratios) {
        csv.push_str(&format!("{r},{v}\n"));
    }
    Ok(Outcome {
        summary: format!(
            "α_{k} = {:.6} at ρ = {:.6}; min ratio on (0, 1) = {positive:.6}\n",
            res.infimum, res.argmin
        ),
        assertions: vec![Check::at_least(
            "ratio on (0, 1) does not undercut",
            positive,
            res.infimum,
        )],
        results: json!({ "alpha": res, "positive_min": positive }),
        files: vec![("alpha.csv".into(), csv.into_bytes())],
    })
}

fn maxkcut_batch(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let spec = PipelineSpec {
        instances: m.budget.map_or(PipelineSpec::default().instances, |b| b as usize),
        n: m.n.unwrap_or(PipelineSpec::default().n),
        k: m.k.unwrap_or(3),
        ..Default::default()
    };
    let rows = maxkcut_pipeline(spec, RandomSource::new(m.seed))?;
    let mut csv = Vec::new();
    write_pipeline_csv(&rows, &mut csv)?;
    let over = rows
        .iter()
        .filter(|r| r.best_rounded > r.brute_force * (1.0 + 1e-12))
        .count();
    let good = rows.iter().filter(|r| r.best_rounded >= 0.83 * r.brute_force).count();
    Ok(Outcome {
        summary: format!("{} instances; rounded ≥ 0.83 × optimum in {good}\n", rows.len()),
        assertions: vec![Check::at_most("instances with rounded > optimum", over as f64, 0.0)],
        results: json!({ "spec": spec, "instances_at_least_083": good }),
        files: vec![("pipeline.csv".into(), csv)],
    })
}

fn maxkcut_graph(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let path = m
        .graph
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("--graph FILE is required".into()))?;
    let text = std::fs::read_to_string(path)?;
    let g = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str::<WeightedGraph>(&text)?
    } else {
        WeightedGraph::parse_edge_list(&text)?
    };
    let k = m.k.unwrap_or(3);
    let (optimum, best_assignment) = maxkcut_bruteforce(&g, k)?;
    let e = relax_embed(&g, k, g.n().max(k - 1).max(2), 400, RandomSource::new(m.seed).derive(0))?;
    let rounded = round_conical(
        &g,
        &e,
        k,
        m.budget.unwrap_or(64) as usize,
        RandomSource::new(m.seed).derive(1),
    )?;
    Ok(Outcome {
        summary: format!(
            "optimum {optimum}, relaxation {:.6}, best rounded {} (mean {:.4} ± {:.4})\n",
            e.relaxation_value, rounded.value, rounded.mean_value, rounded.std_error
        ),
        assertions: vec![Check::at_most(
            "rounded − optimum",
            rounded.value - optimum,
            1e-12 * optimum.max(1.0),
        )],
        results: json!({
            "brute_force": optimum,
            "optimal_assignment": best_assignment,
            "relaxation_value": e.relaxation_value,
            "gradient_norm": e.gradient_norm,
            "converged": e.converged,
            "rounding": rounded,
        }),
        files: vec![],
    })
}

fn verify(m: &ExperimentManifest) -> Result<Outcome, Error> {
    let ids = m.criteria.clone().unwrap_or_else(|| (1..=CRITERIA).collect());
    let mut reports = Vec::new();
    let mut summary = String::new();
    for id in ids {
        let r =
            run_criterion(id).ok_or_else(|| Error::InvalidArgument(format!("no criterion {id} (1..={CRITERIA})")))?;
        summary.push_str(&r.summary());
        summary.push('\n');
        reports.push(r);
    }
    let assertions = reports
        .iter()
        .map(|r| Check::at_least(format!("criterion {}", r.id), r.passed as u8 as f64, 1.0))
        .collect();
    Ok(Outcome {
        summary,
        assertions,
        results: json!({ "criteria": reports }),
        files: vec![],
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Manifest(_) => exit::MANIFEST,
        Error::EnumerationCap { .. } => exit::ENUMERATION_CAP,
        Error::Io(_) => exit::IO,
        Error::NonFinite(_) => exit::NUMERICAL,
        Error::NoWitness(_) => exit::ASSERTION,
        _ => exit::INVALID_INPUT,
    }
}

fn execute(cli: Cli) -> Result<bool, Error> {
    let m = build_manifest(cli)?;
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v} is not a count")))?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            n
        }
        Err(_) => rayon::current_num_threads(),
    };
    let started = unix_now();
    let outcome = run(&m)?;
    let passed = outcome.assertions.iter().all(|c| c.passed);
    let dir = RunDirectory::create(&m.out)?;
    dir.write_json("manifest.json", &m)?;
    dir.write_json(
        "report.json",
        &Report {
            manifest: &m,
            passed,
            assertions: outcome.assertions.clone(),
            results: outcome.results,
        },
    )?;
    for (name, bytes) in &outcome.files {
        dir.write(name, bytes)?;
    }
    dir.write_json("metadata.json", &RunMetadata::finish(started, threads))?;
    print!("{}", outcome.summary);
    for c in outcome.assertions.iter().filter(|c| !c.passed) {
        eprintln!(
            "assertion failed: {} (value {:e}, target {:e}, tol {:e})",
            c.label, c.value, c.target, c.tol
        );
    }
    println!("{} → {}", if passed { "ok" } else { "FAILED" }, dir.path().display());
    Ok(passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(exit::ASSERTION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

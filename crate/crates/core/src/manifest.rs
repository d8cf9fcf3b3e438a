//! Experiment manifests, ρ-grid strings and append-only run directories.
//!
//! A manifest fully determines an experiment's results. Reports written
//! from it are split into `report.json`, which is reproducible byte for
//! byte, and `metadata.json`, which holds wall-clock information.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::RNG_ALGORITHM;

/// Endpoint slack of `start:stop:step` grids.
pub const GRID_ENDPOINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Stability,
    Variation,
    Perturbation,
    SupPsiZero,
    Witness,
    Discrete,
    MaxkcutAlpha,
    MaxkcutPipeline,
    MaxkcutGraph,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[serde(rename = "montecarlo", alias = "monte_carlo")]
    MonteCarlo,
    Quadrature2d,
    HermiteSeries,
}

impl std::str::FromStr for MethodName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "montecarlo" | "monte_carlo" => Ok(Self::MonteCarlo),
            "quadrature2d" => Ok(Self::Quadrature2d),
            "hermite_series" => Ok(Self::HermiteSeries),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method `{s}` (expected montecarlo, quadrature2d or hermite_series)"
            ))),
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

/// Everything needed to rerun an experiment. Unset parameters take the
/// experiment's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    /// A ρ-grid string, see [`parse_rho_grid`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Edge-list or JSON weight-matrix file for `maxkcut-graph`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    /// Criteria to run for `verify`; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<usize>>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl ExperimentManifest {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            rho: None,
            k: None,
            n: None,
            method: None,
            budget: None,
            tol: None,
            graph: None,
            criteria: None,
            out: default_out(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = &self.rho {
            parse_rho_grid(r).map_err(|e| Error::Manifest(e.to_string()))?;
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Manifest(format!("tol = {t} must be positive")));
            }
        }
        if self.experiment == Experiment::MaxkcutGraph && self.graph.is_none() {
            return Err(Error::Manifest("maxkcut-graph needs a graph file".into()));
        }
        Ok(())
    }

    /// The ρ values, or `default` when no grid is set.
    pub fn rhos(&self, default: &[f64]) -> Result<Vec<f64>> {
        match &self.rho {
            Some(s) => parse_rho_grid(s),
            None => Ok(default.to_vec()),
        }
    }
}

/// Parses `start:stop:step`, a comma-separated list, or a single value.
/// `stop` is included when the last step lands within [`GRID_ENDPOINT_TOL`].
pub fn parse_rho_grid(spec: &str) -> Result<Vec<f64>> {
    let number = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidArgument(format!("bad number `{s}` in ρ-grid `{spec}`")))
    };
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "ρ-grid `{spec}` must be start:stop:step"
            )));
        }
        let (start, stop, step) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
        if step == 0.0 || (stop - start) * step < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "step of `{spec}` does not move from start toward stop"
            )));
        }
        let count = ((stop - start) / step + GRID_ENDPOINT_TOL / step.abs()).floor() as usize;
        if count > 1_000_000 {
            return Err(Error::InvalidArgument(format!(
                "ρ-grid `{spec}` has more than a million points"
            )));
        }
        (0..=count)
            .map(|i| {
                let v = start + i as f64 * step;
                if (v - stop).abs() <= GRID_ENDPOINT_TOL {
                    stop
                } else {
                    // snap to 12 decimals
                    (v * 1e12).round() / 1e12
                }
            })
            .collect()
    } else {
        spec.split(',').map(number).collect::<Result<Vec<f64>>>()?
    };
    if let Some(bad) = values.iter().find(|v| v.abs() > 1.0) {
        return Err(Error::InvalidCorrelation(*bad));
    }
    Ok(values)
}

/// Wall-clock data kept out of the reproducible report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub started_unix_secs: f64,
    pub finished_unix_secs: f64,
    pub elapsed_secs: f64,
    pub threads: usize,
    pub rng: String,
    pub version: String,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunMetadata {
    pub fn finish(started_unix_secs: f64, threads: usize) -> Self {
        let finished = unix_now();
        Self {
            started_unix_secs,
            finished_unix_secs: finished,
            elapsed_secs: finished - started_unix_secs,
            threads,
            rng: RNG_ALGORITHM.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// A fresh `run-NNNN` directory under `base`; existing runs are never reused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDirectory {
    path: PathBuf,
}

impl RunDirectory {
    pub fn create(base: &Path) -> Result<Self> {
        fs::create_dir_all(base)?;
        for index in 1..=9999u32 {
            let path = base.join(format!("run-{index:04}"));
            match fs::create_dir(&path) {
                Ok(()) => return Ok(Self { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(Error::InvalidArgument(format!(
            "{} already holds 9999 runs",
            base.display()
        )))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes a new file; fails rather than overwrite.
    pub fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.path.join(name);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path)?;
        f.write_all(contents)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_strings() {
        assert_eq!(parse_rho_grid("0:0.3:0.05").unwrap().len(), 7);
        assert_eq!(*parse_rho_grid("0:0.3:0.05").unwrap().last().unwrap(), 0.3);
        assert_eq!(parse_rho_grid("0:0.29:0.05").unwrap().len(), 6);
        assert_eq!(parse_rho_grid("-0.5:0:0.1").unwrap()[5], 0.0);
        assert_eq!(parse_rho_grid("0:0.3:0.05").unwrap()[3], 0.15);
        assert_eq!(parse_rho_grid("0.1,0.5").unwrap(), vec![0.1, 0.5]);
        assert_eq!(parse_rho_grid("-0.05").unwrap(), vec![-0.05]);
        assert!(parse_rho_grid("0:1:-0.1").is_err());
        assert!(parse_rho_grid("0:2:0.5").is_err());
        assert!(parse_rho_grid("a:b").is_err());
    }

    #[test]
    fn manifests_round_trip_and_reject_unknown_fields() {
        let mut m = ExperimentManifest::new(Experiment::Stability);
        m.rho = Some("0:0.3:0.05".into());
        m.k = Some(3);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentManifest>(&text).unwrap(), m);
        let bad = r#"{"experiment": "stability", "rhoo": "0.1"}"#;
        assert!(serde_json::from_str::<ExperimentManifest>(bad).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"experiment": "stability", "rho": "0:3:1"}"#).unwrap();
        assert!(matches!(ExperimentManifest::load(&path), Err(Error::Manifest(_))));
    }

    #[test]
    fn run_directories_are_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunDirectory::create(dir.path()).unwrap();
        let b = RunDirectory::create(dir.path()).unwrap();
        assert_ne!(a.path(), b.path());
        a.write("x.txt", b"1").unwrap();
        assert!(a.write("x.txt", b"2").is_err());
        assert_eq!(fs::read(a.path().join("x.txt")).unwrap(), b"1");
    }
}

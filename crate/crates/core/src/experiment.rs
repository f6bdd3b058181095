//! Experiment orchestration: Monte Carlo over filter variants and L values,
//! with CSV and JSON result files.
//!
//! Output files in the experiment directory:
//!
//! * `summary.csv`: `scan, variant, L, mean_cardinality, cardinality_std,
//!   mean_clutter_rate, rms_tm, true_cardinality, mean_pd`, one row per
//!   variant and scan. `L` is empty for full-trajectory variants.
//! * `runtime.csv`: `variant, L, runs, mean_seconds`, the mean filter wall
//!   time per run.
//! * `manifest.json`: resolved config, master seed, per-run seeds and failures.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, VariantKind};
use crate::error::{Error, Result};
use crate::scenario::{run_monte_carlo, run_seed, MonteCarlo, MonteCarloOptions, Variant};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUNTIME_FILE: &str = "runtime.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub variants: Vec<Variant>,
    pub runs: usize,
    pub seed: u64,
    pub horizon: usize,
    pub out_dir: PathBuf,
    /// Run Monte Carlo runs in parallel. Runtimes are measured per run either way.
    pub parallel: bool,
}

impl ExperimentSpec {
    /// Every configured filter kind at every configured L.
    pub fn from_config(config: &ScenarioConfig, out_dir: impl Into<PathBuf>) -> Self {
        let e = &config.experiment;
        let variants = e
            .variants
            .iter()
            .flat_map(|&kind| e.windows.iter().map(move |&l| Variant { kind, window: Some(l) }))
            .collect();
        Self {
            variants,
            runs: e.runs,
            seed: e.seed,
            horizon: e.horizon,
            out_dir: out_dir.into(),
            parallel: true,
        }
    }

    /// Keeps only the listed kinds and windows; `None` keeps everything.
    pub fn restrict(&mut self, kinds: Option<&[VariantKind]>, windows: Option<&[usize]>) {
        self.variants.retain(|v| {
            kinds.is_none_or(|k| k.contains(&v.kind))
                && windows.is_none_or(|w| v.window.is_some_and(|l| w.contains(&l)))
        });
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("experiment has no filter variants".into()));
        }
        if self.variants.iter().any(|v| v.window == Some(0)) {
            return Err(Error::Config("L-scan windows must be at least 1".into()));
        }
        if self.runs == 0 || self.horizon == 0 {
            return Err(Error::Config("run count and horizon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scan: usize,
    pub variant: VariantKind,
    #[serde(rename = "L")]
    pub window: Option<usize>,
    pub mean_cardinality: f64,
    pub cardinality_std: f64,
    pub mean_clutter_rate: f64,
    pub rms_tm: f64,
    pub true_cardinality: f64,
    pub mean_pd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub variant: VariantKind,
    #[serde(rename = "L")]
    pub window: Option<usize>,
    pub runs: usize,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub variant: VariantKind,
    pub window: Option<usize>,
    pub run: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub runs: usize,
    pub horizon: usize,
    pub variants: Vec<Variant>,
    /// Seed of each run, derived from the master seed.
    pub run_seeds: Vec<u64>,
    pub failures: Vec<RunFailure>,
    pub config: ScenarioConfig,
}

pub fn summary_rows(mc: &MonteCarlo) -> Vec<SummaryRow> {
    mc.summaries
        .iter()
        .flat_map(|s| {
            s.scans.iter().map(move |x| SummaryRow {
                scan: x.scan,
                variant: s.variant.kind,
                window: s.variant.window,
                mean_cardinality: x.mean_cardinality,
                cardinality_std: x.cardinality_std,
                mean_clutter_rate: x.mean_clutter_rate,
                rms_tm: x.rms_tm,
                true_cardinality: x.true_cardinality,
                mean_pd: x.mean_pd,
            })
        })
        .collect()
}

pub fn runtime_rows(mc: &MonteCarlo) -> Vec<RuntimeRow> {
    mc.summaries
        .iter()
        .map(|s| RuntimeRow {
            variant: s.variant.kind,
            window: s.variant.window,
            runs: s.runs,
            mean_seconds: s.mean_seconds,
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_runtime_csv(path: impl AsRef<Path>) -> Result<Vec<RuntimeRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub monte_carlo: MonteCarlo,
    pub manifest: Manifest,
    pub summary_path: PathBuf,
    pub runtime_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Runs the experiment and writes the result files into `spec.out_dir`.
///
/// `keep_records` keeps per-run estimates in the returned Monte Carlo result
/// (needed for track export).
pub fn run_experiment(config: &ScenarioConfig, spec: &ExperimentSpec, keep_records: bool) -> Result<ExperimentOutput> {
    config.validate()?;
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;
    let options = MonteCarloOptions {
        runs: spec.runs,
        seed: spec.seed,
        horizon: spec.horizon,
        variants: spec.variants.clone(),
        keep_records,
        parallel: spec.parallel,
    };
    log::info!("running {} variants x {} runs", spec.variants.len(), spec.runs);
    let mc = run_monte_carlo(config, &options)?;

    let failures = mc
        .summaries
        .iter()
        .flat_map(|s| {
            s.failures.iter().map(move |(run, message)| RunFailure {
                variant: s.variant.kind,
                window: s.variant.window,
                run: *run,
                message: message.clone(),
            })
        })
        .collect();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: spec.seed,
        runs: spec.runs,
        horizon: spec.horizon,
        variants: spec.variants.clone(),
        run_seeds: (0..spec.runs).map(|r| run_seed(spec.seed, r)).collect(),
        failures,
        config: config.clone(),
    };

    let summary_path = spec.out_dir.join(SUMMARY_FILE);
    let runtime_path = spec.out_dir.join(RUNTIME_FILE);
    let manifest_path = spec.out_dir.join(MANIFEST_FILE);
    write_csv(&summary_path, &summary_rows(&mc))?;
    write_csv(&runtime_path, &runtime_rows(&mc))?;
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(ExperimentOutput {
        monte_carlo: mc,
        manifest,
        summary_path,
        runtime_path,
        manifest_path,
    })
}

//! Ground truth and measurement simulation, and Monte Carlo runs of the filters.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::GmTphd;
use crate::config::{ScenarioConfig, VariantKind};
use crate::error::{Error, Result};
use crate::metric::tm_distance;
use crate::models::{ClutterSpatialDensity, MotionModel, SensorModel};
use crate::robust::{Estimate, RobustTphd};
use crate::types::{Scan, Trajectory};

/// Independent random streams of one Monte Carlo run.
const TRUTH_STREAM: u64 = 1;
const MEASUREMENT_STREAM: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run`: `splitmix64(master ^ splitmix64(run))`.
///
/// A run's seed depends only on the master seed and its index, so adding runs
/// leaves earlier runs unchanged.
pub fn run_seed(master: u64, run: usize) -> u64 {
    splitmix64(master ^ splitmix64(run as u64))
}

/// ChaCha8 generator for stream `stream` of run `run`. Truth and measurements
/// use separate streams.
pub fn run_rng(master: u64, run: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(master, run));
    rng.set_stream(stream);
    rng
}

/// Draws from `N(0, cov)` using a symmetric square root, so singular
/// covariances (noise-free coordinates) are allowed.
pub fn sample_gaussian<R: Rng + ?Sized>(cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let eig = cov.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let white = DVector::from_iterator(
        cov.nrows(),
        (0..cov.nrows()).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    &eig.eigenvectors * sqrt_vals.component_mul(&(eig.eigenvectors.transpose() * white))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trajectories: Vec<Trajectory>,
    pub horizon: usize,
}

impl GroundTruth {
    pub fn cardinality(&self, time: usize) -> usize {
        self.trajectories.iter().filter(|t| t.exists_at(time)).count()
    }

    pub fn states_at(&self, time: usize) -> impl Iterator<Item = &DVector<f64>> {
        self.trajectories.iter().filter_map(move |t| t.state_at(time))
    }
}

/// Whether `x` is inside the Cartesian surveillance area and its noise-free
/// measurement lies in the sensor's measurement region.
pub fn observable(
    config: &ScenarioConfig,
    sensor: &dyn SensorModel,
    coverage: &ClutterSpatialDensity,
    x: &DVector<f64>,
) -> bool {
    let r = &config.region;
    let (px, py) = (x[r.position_index[0]], x[r.position_index[1]]);
    (r.x[0]..=r.x[1]).contains(&px)
        && (r.y[0]..=r.y[1]).contains(&py)
        && sensor.observe(x).is_ok_and(|o| coverage.contains(&o.mean))
}

/// Propagates every configured target from its birth to its death time.
///
/// A trajectory ends early at its last observable scan (see [`observable`]).
/// Without `process_noise` the targets follow the noise-free dynamics.
pub fn generate_truth<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    motion: &dyn MotionModel,
    sensor: &dyn SensorModel,
    coverage: &ClutterSpatialDensity,
    horizon: usize,
    rng: &mut R,
) -> GroundTruth {
    let mut trajectories = Vec::with_capacity(config.targets.truth.len());
    for target in &config.targets.truth {
        if target.birth > horizon {
            continue;
        }
        let mut x = DVector::from_column_slice(&target.state);
        let mut states = vec![x.clone()];
        for _ in target.birth..target.death.min(horizon) {
            let tr = motion.transition(&x);
            x = if config.targets.process_noise {
                tr.mean + sample_gaussian(&tr.noise, rng)
            } else {
                tr.mean
            };
            if !observable(config, sensor, coverage, &x) {
                break;
            }
            states.push(x.clone());
        }
        trajectories.push(Trajectory::new(target.birth, states));
    }
    GroundTruth { trajectories, horizon }
}

/// Measurement set at `time`: each existing target is detected with the true
/// detection probability, clutter count is binomial over the clutter
/// generators and uniform on the clutter region. Order is shuffled.
///
/// Detections whose noisy measurement falls outside the clutter region are dropped.
pub fn generate_scan<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    truth: &GroundTruth,
    sensor: &dyn SensorModel,
    clutter: &ClutterSpatialDensity,
    time: usize,
    rng: &mut R,
) -> Result<Scan> {
    let mut measurements = Vec::new();
    let noise = sensor.noise_cov();
    for x in truth.states_at(time) {
        if rng.random::<f64>() < config.targets.detection_probability {
            let z = sensor.observe(x)?.mean + sample_gaussian(noise, rng);
            if clutter.contains(&z) {
                measurements.push(z);
            }
        }
    }
    let binomial = Binomial::new(config.clutter.generators, config.clutter.detection_probability)
        .map_err(|e| Error::Config(format!("clutter binomial: {e}")))?;
    let count = binomial.sample(rng);
    for _ in 0..count {
        let z = DVector::from_iterator(
            clutter.lower.len(),
            clutter
                .lower
                .iter()
                .zip(&clutter.upper)
                .map(|(lo, hi)| rng.random_range(*lo..*hi)),
        );
        measurements.push(z);
    }
    measurements.shuffle(rng);
    Scan::new(time, measurements)
}

/// Truth and measurements of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRun {
    pub truth: GroundTruth,
    pub scans: Vec<Scan>,
}

pub fn simulate_run(config: &ScenarioConfig, horizon: usize, seed: u64, run: usize) -> Result<SimulatedRun> {
    let motion = config.motion_model()?;
    let sensor = config.sensor_model()?;
    let clutter = config.clutter_density()?;
    let mut truth_rng = run_rng(seed, run, TRUTH_STREAM);
    let truth = generate_truth(
        config,
        motion.as_ref(),
        sensor.as_ref(),
        &clutter,
        horizon,
        &mut truth_rng,
    );
    let mut meas_rng = run_rng(seed, run, MEASUREMENT_STREAM);
    let scans = (1..=horizon)
        .map(|k| generate_scan(config, &truth, sensor.as_ref(), &clutter, k, &mut meas_rng))
        .collect::<Result<_>>()?;
    Ok(SimulatedRun { truth, scans })
}

/// A filter variant at one L-scan depth. `window: None` keeps full trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub kind: VariantKind,
    pub window: Option<usize>,
}

/// Reported per-scan output of a filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub cardinality: usize,
    pub clutter_rate: usize,
    pub clutter_mass: f64,
    /// Mean detection probability estimate over the extracted trajectories.
    pub mean_pd: Option<f64>,
    /// Trajectory metric at this scan, normalised per time step.
    pub tm: f64,
}

/// Result of one filter variant on one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    /// Seed of the run, see [`run_seed`].
    pub seed: u64,
    pub variant: Variant,
    pub scans: Vec<ScanRecord>,
    /// Per-scan estimates; empty unless requested.
    pub estimates: Vec<Estimate>,
    pub elapsed: Duration,
}

/// Projects estimated trajectories onto the position coordinates.
pub fn estimate_positions(estimate: &Estimate, position_index: [usize; 2], time: usize) -> Vec<Trajectory> {
    estimate
        .tracks
        .iter()
        .map(|t| {
            let states = (0..t.length)
                .map(|s| {
                    let x = t.state(s);
                    DVector::from_vec(vec![x[position_index[0]], x[position_index[1]]])
                })
                .collect();
            // A trajectory extracted at `time` ends at `time`.
            Trajectory::new(time + 1 - t.length, states)
        })
        .collect()
}

pub fn truth_positions(truth: &GroundTruth, position_index: [usize; 2], time: usize) -> Vec<Trajectory> {
    truth
        .trajectories
        .iter()
        .filter(|t| t.birth_time <= time)
        .map(|t| {
            let states = t
                .states
                .iter()
                .take(time + 1 - t.birth_time)
                .map(|x| DVector::from_vec(vec![x[position_index[0]], x[position_index[1]]]))
                .collect();
            Trajectory::new(t.birth_time, states)
        })
        .collect()
}

type StepFn<'a> = Box<dyn FnMut(&Scan) -> Result<Estimate> + 'a>;

/// Runs one filter variant over a simulated run and scores each scan.
///
/// `keep_estimates` stores the full extracted estimates of every scan.
pub fn run_filter(
    config: &ScenarioConfig,
    sim: &SimulatedRun,
    variant: Variant,
    run: usize,
    seed: u64,
    keep_estimates: bool,
) -> Result<RunRecord> {
    let motion = config.motion_model()?;
    let sensor = config.sensor_model()?;
    let clutter = config.clutter_density()?;
    let pos = config.region.position_index;
    let mut robust;
    let mut baseline;
    let mut step: StepFn<'_> = match variant.kind {
        VariantKind::Robust => {
            robust = RobustTphd::new(
                motion.as_ref(),
                sensor.as_ref(),
                &clutter,
                config.robust_params(variant.window),
            );
            Box::new(move |scan| robust.step(scan).map(|o| o.estimate))
        }
        VariantKind::Baseline => {
            baseline = GmTphd::new(
                motion.as_ref(),
                sensor.as_ref(),
                &clutter,
                config.baseline_params(variant.window),
            );
            Box::new(move |scan| baseline.step(scan))
        }
    };

    let mut elapsed = Duration::ZERO;
    let mut scans = Vec::with_capacity(sim.scans.len());
    let mut estimates = Vec::new();
    for scan in &sim.scans {
        let start = Instant::now();
        let est = step(scan)?;
        elapsed += start.elapsed();

        let k = scan.time;
        let truth = truth_positions(&sim.truth, pos, k);
        let tracks = estimate_positions(&est, pos, k);
        let tm = tm_distance(&truth, &tracks, &config.metric, k)?;
        let mean_pd = (!est.tracks.is_empty())
            .then(|| est.tracks.iter().map(|t| t.detection_probability).sum::<f64>() / est.tracks.len() as f64);
        scans.push(ScanRecord {
            cardinality: est.cardinality,
            clutter_rate: est.clutter_rate,
            clutter_mass: est.clutter_mass,
            mean_pd,
            tm: (tm.distance.powf(config.metric.p) / k as f64).powf(1.0 / config.metric.p),
        });
        if keep_estimates {
            estimates.push(est);
        }
    }
    Ok(RunRecord {
        run,
        seed,
        variant,
        scans,
        estimates,
        elapsed,
    })
}

/// Wall time of the filter recursion alone over every scan of `sim`.
pub fn time_filter(config: &ScenarioConfig, sim: &SimulatedRun, variant: Variant) -> Result<Duration> {
    let motion = config.motion_model()?;
    let sensor = config.sensor_model()?;
    let clutter = config.clutter_density()?;
    let start = Instant::now();
    match variant.kind {
        VariantKind::Robust => {
            let mut f = RobustTphd::new(
                motion.as_ref(),
                sensor.as_ref(),
                &clutter,
                config.robust_params(variant.window),
            );
            for scan in &sim.scans {
                f.step(scan)?;
            }
        }
        VariantKind::Baseline => {
            let mut f = GmTphd::new(
                motion.as_ref(),
                sensor.as_ref(),
                &clutter,
                config.baseline_params(variant.window),
            );
            for scan in &sim.scans {
                f.step(scan)?;
            }
        }
    }
    Ok(start.elapsed())
}

/// Per-scan averages over the successful runs of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub scan: usize,
    pub true_cardinality: f64,
    pub mean_cardinality: f64,
    pub cardinality_std: f64,
    pub mean_clutter_rate: f64,
    /// Root mean square of the per-run trajectory metric.
    pub rms_tm: f64,
    /// Mean over runs that extracted at least one trajectory; NaN if none did.
    pub mean_pd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub failures: Vec<(usize, String)>,
    pub scans: Vec<ScanSummary>,
    /// Mean filter time per run, excluding simulation and scoring.
    pub mean_seconds: f64,
}

impl VariantSummary {
    /// Time average of the per-scan RMS trajectory metric.
    pub fn mean_rms_tm(&self) -> f64 {
        self.scans.iter().map(|s| s.rms_tm).sum::<f64>() / self.scans.len().max(1) as f64
    }
}

fn summarize(
    variant: Variant,
    records: &[&RunRecord],
    truths: &[&GroundTruth],
    failures: Vec<(usize, String)>,
) -> VariantSummary {
    let horizon = records.first().map_or(0, |r| r.scans.len());
    let n = records.len() as f64;
    let scans = (0..horizon)
        .map(|t| {
            let card: Vec<f64> = records.iter().map(|r| r.scans[t].cardinality as f64).collect();
            let mean_card = card.iter().sum::<f64>() / n;
            let var = card.iter().map(|c| (c - mean_card).powi(2)).sum::<f64>() / n;
            let pds: Vec<f64> = records.iter().filter_map(|r| r.scans[t].mean_pd).collect();
            ScanSummary {
                scan: t + 1,
                true_cardinality: truths.iter().map(|g| g.cardinality(t + 1) as f64).sum::<f64>() / n,
                mean_cardinality: mean_card,
                cardinality_std: var.sqrt(),
                mean_clutter_rate: records.iter().map(|r| r.scans[t].clutter_rate as f64).sum::<f64>() / n,
                rms_tm: (records.iter().map(|r| r.scans[t].tm.powi(2)).sum::<f64>() / n).sqrt(),
                mean_pd: if pds.is_empty() {
                    f64::NAN
                } else {
                    pds.iter().sum::<f64>() / pds.len() as f64
                },
            }
        })
        .collect();
    VariantSummary {
        variant,
        runs: records.len(),
        failures,
        scans,
        mean_seconds: records.iter().map(|r| r.elapsed.as_secs_f64()).sum::<f64>() / n.max(1.0),
    }
}

/// Monte Carlo comparison of filter variants on shared simulated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub summaries: Vec<VariantSummary>,
    /// Per-run records, kept only when requested.
    pub records: Vec<RunRecord>,
    pub truths: Vec<GroundTruth>,
}

pub struct MonteCarloOptions {
    pub runs: usize,
    pub seed: u64,
    pub horizon: usize,
    pub variants: Vec<Variant>,
    pub keep_records: bool,
    /// Run the runs in parallel. Disable for timing.
    pub parallel: bool,
}

impl MonteCarloOptions {
    pub fn from_config(config: &ScenarioConfig, variants: Vec<Variant>) -> Self {
        Self {
            runs: config.experiment.runs,
            seed: config.experiment.seed,
            horizon: config.experiment.horizon,
            variants,
            keep_records: false,
            parallel: true,
        }
    }
}

/// Simulates `runs` scenarios and runs every variant on each.
///
/// Results do not depend on thread scheduling: every run draws from its own
/// seeded streams. Runs where a filter fails are reported in `failures` and
/// left out of the averages for that variant.
pub fn run_monte_carlo(config: &ScenarioConfig, options: &MonteCarloOptions) -> Result<MonteCarlo> {
    config.validate()?;
    let one_run = |run: usize| -> Result<(SimulatedRun, Vec<Result<RunRecord>>)> {
        let sim = simulate_run(config, options.horizon, options.seed, run)?;
        let records = options
            .variants
            .iter()
            .map(|&v| run_filter(config, &sim, v, run, run_seed(options.seed, run), options.keep_records))
            .collect();
        Ok((sim, records))
    };
    let results: Vec<Result<(SimulatedRun, Vec<Result<RunRecord>>)>> = if options.parallel {
        (0..options.runs).into_par_iter().map(one_run).collect()
    } else {
        (0..options.runs).map(one_run).collect()
    };
    let mut sims = Vec::with_capacity(options.runs);
    let mut per_run = Vec::with_capacity(options.runs);
    for r in results {
        let (sim, records) = r?;
        sims.push(sim);
        per_run.push(records);
    }

    let mut summaries = Vec::with_capacity(options.variants.len());
    let mut kept = Vec::new();
    for (vi, &variant) in options.variants.iter().enumerate() {
        let mut records = Vec::new();
        let mut truths = Vec::new();
        let mut failures = Vec::new();
        for (run, recs) in per_run.iter().enumerate() {
            match &recs[vi] {
                Ok(rec) => {
                    records.push(rec);
                    truths.push(&sims[run].truth);
                }
                Err(e) => {
                    log::warn!("run {run}, {} L={:?}: {e}", variant.kind, variant.window);
                    failures.push((run, e.to_string()));
                }
            }
        }
        summaries.push(summarize(variant, &records, &truths, failures));
        if options.keep_records {
            kept.extend(records.into_iter().cloned());
        }
    }
    Ok(MonteCarlo {
        summaries,
        records: kept,
        truths: sims.into_iter().map(|s| s.truth).collect(),
    })
}

//! Scenario and experiment configuration, loaded from TOML.
//!
//! [`ScenarioConfig::default`] is the four-target coordinated-turn /
//! bearing-range experiment. Kinematic vectors use the layout
//! `[p_x, v_x, p_y, v_y, turn_rate]`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baseline::{BaselineParams, GmBirth};
use crate::beta::BetaParams;
use crate::error::{Error, Result};
use crate::metric::TmParams;
use crate::mixture::PruneParams;
use crate::models::{BearingRangeSensor, ClutterSpatialDensity, CtModel, LinearModel, MotionModel, SensorModel};
use crate::robust::{ClutterBirth, PredictParams, RobustParams, TrackBirth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MotionConfig {
    CoordinatedTurn {
        dt: f64,
        accel_std: f64,
        turn_rate_std: f64,
    },
    Linear {
        f: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SensorConfig {
    BearingRange { bearing_std: f64, range_std: f64 },
    Linear { h: Vec<Vec<f64>>, r: Vec<Vec<f64>> },
}

/// Cartesian surveillance area; truth trajectories end when they leave it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    /// Indices of the two position coordinates in the state vector.
    pub position_index: [usize; 2],
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthTarget {
    pub state: Vec<f64>,
    pub birth: usize,
    /// Last scan at which the target exists.
    pub death: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsConfig {
    pub survival: f64,
    /// True detection probability used by the simulator (and the baseline filter).
    pub detection_probability: f64,
    /// Draw process noise for the truth trajectories.
    pub process_noise: bool,
    pub truth: Vec<TruthTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterBirthConfig {
    pub weight: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterConfig {
    /// Number of clutter generators of the binomial clutter process.
    pub generators: u64,
    /// Detection probability of each clutter generator.
    pub detection_probability: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub survival: f64,
    pub births: Vec<ClutterBirthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthConfig {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-coordinate standard deviations of the diagonal birth covariance.
    pub std: Vec<f64>,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub k_beta: f64,
    pub prune_threshold: f64,
    pub absorb_threshold: f64,
    pub max_components: usize,
    pub max_clutter_components: usize,
    /// Default L-scan depth.
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Robust,
    Baseline,
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantKind::Robust => "robust",
            VariantKind::Baseline => "baseline",
        })
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(VariantKind::Robust),
            "baseline" => Ok(VariantKind::Baseline),
            other => Err(Error::Config(format!("unknown filter variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub variants: Vec<VariantKind>,
    pub windows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub motion: MotionConfig,
    pub sensor: SensorConfig,
    pub region: RegionConfig,
    pub targets: TargetsConfig,
    pub clutter: ClutterConfig,
    pub births: Vec<BirthConfig>,
    pub filter: FilterConfig,
    pub metric: TmParams,
    pub experiment: ExperimentConfig,
}

/// Reorders a `[p_x, p_y, v_x, v_y]` vector into `[p_x, v_x, p_y, v_y, 0]`.
fn from_position_first(v: [f64; 4]) -> Vec<f64> {
    vec![v[0], v[2], v[1], v[3], 0.0]
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let deg = PI / 180.0;
        let truth = [
            ([1005.0, 1489.0, 8.0, -10.0], 1, 100),
            ([-256.0, 1011.0, 20.0, 3.0], 10, 100),
            ([-1507.0, 257.0, 11.0, 10.0], 10, 80),
            ([250.0, 750.0, -40.0, 25.0], 40, 100),
        ]
        .into_iter()
        .map(|(s, birth, death)| TruthTarget {
            state: from_position_first(s),
            birth,
            death,
        })
        .collect();
        let births = [[-1500.0, 250.0], [-250.0, 1000.0], [250.0, 750.0], [1000.0, 1500.0]]
            .into_iter()
            .map(|[x, y]| BirthConfig {
                weight: 0.01,
                mean: from_position_first([x, y, 0.0, 0.0]),
                std: vec![50.0, 50.0, 50.0, 50.0, 3.0 * deg],
                u: 8.0,
                v: 2.0,
            })
            .collect();
        Self {
            motion: MotionConfig::CoordinatedTurn {
                dt: 1.0,
                accel_std: 1.0,
                turn_rate_std: deg,
            },
            sensor: SensorConfig::BearingRange {
                bearing_std: deg,
                range_std: 2.0,
            },
            region: RegionConfig {
                position_index: [0, 2],
                x: [-2000.0, 2000.0],
                y: [0.0, 2000.0],
            },
            targets: TargetsConfig {
                survival: 0.99,
                detection_probability: 0.98,
                process_noise: true,
                truth,
            },
            clutter: ClutterConfig {
                generators: 20,
                detection_probability: 0.5,
                lower: vec![-2.0 * PI, 0.0],
                upper: vec![2.0 * PI, 2000.0],
                survival: 0.9,
                births: vec![ClutterBirthConfig {
                    weight: 5.0,
                    u: 1.0,
                    v: 1.0,
                }],
            },
            births,
            filter: FilterConfig {
                k_beta: 1.1,
                prune_threshold: 1e-5,
                absorb_threshold: 4.0,
                max_components: 100,
                max_clutter_components: 100,
                window: 5,
            },
            metric: TmParams::default(),
            experiment: ExperimentConfig {
                horizon: 100,
                runs: 100,
                seed: 20_240_501,
                variants: vec![VariantKind::Robust, VariantKind::Baseline],
                windows: vec![1, 2, 5, 10, 15, 30, 60],
            },
        }
    }
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{name}: rows have different lengths")));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

fn check_probability(value: f64, name: &str) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {value} is not a probability")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::TomlParse(inner) => Error::Config(format!("{}: {inner}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn state_dim(&self) -> usize {
        match &self.motion {
            MotionConfig::CoordinatedTurn { .. } => 5,
            MotionConfig::Linear { f, .. } => f.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability(self.targets.survival, "targets.survival")?;
        check_probability(self.targets.detection_probability, "targets.detection_probability")?;
        check_probability(self.clutter.survival, "clutter.survival")?;
        check_probability(self.clutter.detection_probability, "clutter.detection_probability")?;
        let f = &self.filter;
        if !(f.prune_threshold > 0.0) || !f.prune_threshold.is_finite() {
            return Err(Error::Config(
                "filter.prune_threshold must be positive and finite".into(),
            ));
        }
        if !(f.absorb_threshold > 0.0) || !f.absorb_threshold.is_finite() {
            return Err(Error::Config(
                "filter.absorb_threshold must be positive and finite".into(),
            ));
        }
        if !(f.k_beta.abs() >= 1.0) || !f.k_beta.is_finite() {
            return Err(Error::Config("filter.k_beta must be finite with |k_beta| >= 1".into()));
        }
        if f.window == 0 || self.experiment.windows.contains(&0) {
            return Err(Error::Config("L-scan windows must be at least 1".into()));
        }
        if f.max_components == 0 || f.max_clutter_components == 0 {
            return Err(Error::Config("component caps must be positive".into()));
        }
        if self.experiment.horizon == 0 || self.experiment.runs == 0 {
            return Err(Error::Config(
                "experiment.horizon and experiment.runs must be positive".into(),
            ));
        }
        if self.experiment.variants.is_empty() {
            return Err(Error::Config("experiment.variants needs at least one filter".into()));
        }
        self.metric.validate()?;

        let n = self.state_dim();
        let motion = self.motion_model()?;
        let sensor = self.sensor_model()?;
        if motion.state_dim() != n || sensor.state_dim() != n {
            return Err(Error::Config(
                "motion and sensor models disagree on the state dimension".into(),
            ));
        }
        if self.region.position_index.iter().any(|&i| i >= n) {
            return Err(Error::Config("region.position_index out of range".into()));
        }
        if self.clutter.lower.len() != sensor.measurement_dim() {
            return Err(Error::Config(
                "clutter region dimension differs from the measurement dimension".into(),
            ));
        }
        self.clutter_density()?;
        for (i, b) in self.births.iter().enumerate() {
            if b.mean.len() != n || b.std.len() != n {
                return Err(Error::Config(format!("births[{i}] has the wrong dimension")));
            }
            if !(b.weight >= 0.0) || !(b.u > 0.0) || !(b.v > 0.0) {
                return Err(Error::Config(format!("births[{i}] needs weight >= 0 and u, v > 0")));
            }
        }
        for (i, b) in self.clutter.births.iter().enumerate() {
            if !(b.weight >= 0.0) || !(b.u >= 1.0) || !(b.v >= 1.0) {
                return Err(Error::Config(format!(
                    "clutter.births[{i}] needs weight >= 0 and u, v >= 1"
                )));
            }
        }
        for (i, t) in self.targets.truth.iter().enumerate() {
            if t.state.len() != n || t.birth == 0 || t.death < t.birth {
                return Err(Error::Config(format!("targets.truth[{i}] is inconsistent")));
            }
        }
        Ok(())
    }

    pub fn motion_model(&self) -> Result<Box<dyn MotionModel>> {
        Ok(match &self.motion {
            MotionConfig::CoordinatedTurn {
                dt,
                accel_std,
                turn_rate_std,
            } => {
                if !(*dt > 0.0) || !(*accel_std >= 0.0) || !(*turn_rate_std >= 0.0) {
                    return Err(Error::Config(
                        "coordinated turn needs dt > 0 and non-negative noise".into(),
                    ));
                }
                Box::new(CtModel {
                    dt: *dt,
                    accel_std: *accel_std,
                    turn_rate_std: *turn_rate_std,
                })
            }
            MotionConfig::Linear { f, q } => {
                let f = matrix(f, "motion.f")?;
                let n = f.nrows();
                let h = DMatrix::identity(n, n);
                Box::new(LinearModel::new(f, matrix(q, "motion.q")?, h.clone(), h)?)
            }
        })
    }

    pub fn sensor_model(&self) -> Result<Box<dyn SensorModel>> {
        Ok(match &self.sensor {
            SensorConfig::BearingRange { bearing_std, range_std } => Box::new(BearingRangeSensor::new(
                self.state_dim(),
                self.region.position_index,
                *bearing_std,
                *range_std,
            )),
            SensorConfig::Linear { h, r } => {
                let h = matrix(h, "sensor.h")?;
                let n = h.ncols();
                let f = DMatrix::identity(n, n);
                Box::new(LinearModel::new(f, DMatrix::zeros(n, n), h, matrix(r, "sensor.r")?)?)
            }
        })
    }

    pub fn clutter_density(&self) -> Result<ClutterSpatialDensity> {
        ClutterSpatialDensity::new(self.clutter.lower.clone(), self.clutter.upper.clone())
    }

    /// Expected number of clutter measurements per scan.
    pub fn true_clutter_rate(&self) -> f64 {
        self.clutter.generators as f64 * self.clutter.detection_probability
    }

    pub fn prune_params(&self) -> PruneParams {
        PruneParams {
            weight_threshold: self.filter.prune_threshold,
            absorb_threshold: self.filter.absorb_threshold,
            max_tracks: self.filter.max_components,
            max_clutter: self.filter.max_clutter_components,
        }
    }

    fn birth_gaussians(&self) -> impl Iterator<Item = (&BirthConfig, DVector<f64>, DMatrix<f64>)> {
        self.births.iter().map(|b| {
            let mean = DVector::from_column_slice(&b.mean);
            let cov = DMatrix::from_diagonal(&DVector::from_iterator(b.std.len(), b.std.iter().map(|s| s * s)));
            (b, mean, cov)
        })
    }

    pub fn robust_params(&self, window: Option<usize>) -> RobustParams {
        RobustParams {
            predict: PredictParams {
                survival: self.targets.survival,
                clutter_survival: self.clutter.survival,
                k_beta: self.filter.k_beta,
            },
            prune: self.prune_params(),
            births: self
                .birth_gaussians()
                .map(|(b, mean, cov)| TrackBirth {
                    weight: b.weight,
                    mean,
                    cov,
                    beta: BetaParams::new(b.u, b.v),
                })
                .collect(),
            clutter_births: self
                .clutter
                .births
                .iter()
                .map(|b| ClutterBirth {
                    weight: b.weight,
                    beta: BetaParams::new(b.u, b.v),
                })
                .collect(),
            window,
        }
    }

    pub fn baseline_params(&self, window: Option<usize>) -> BaselineParams {
        BaselineParams {
            survival: self.targets.survival,
            detection_probability: self.targets.detection_probability,
            clutter_rate: self.true_clutter_rate(),
            births: self
                .birth_gaussians()
                .map(|(b, mean, cov)| GmBirth {
                    weight: b.weight,
                    mean,
                    cov,
                })
                .collect(),
            prune: self.prune_params(),
            window,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        let text = c.to_toml_string().unwrap();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = ScenarioConfig::default().to_toml_string().unwrap();
        let broken = text.replacen("k_beta = 1.1", "k_beta = \"fast\"", 1);
        let err = ScenarioConfig::from_toml_str(&broken).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn rejects_bad_probability() {
        let mut c = ScenarioConfig::default();
        c.targets.detection_probability = 1.5;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.filter.window = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn defaults_reflect_the_experiment() {
        let c = ScenarioConfig::default();
        assert_eq!(c.true_clutter_rate(), 10.0);
        assert_eq!(c.targets.truth[0].state, vec![1005.0, 8.0, 1489.0, -10.0, 0.0]);
        assert_eq!(c.births.len(), 4);
        assert!((c.clutter_density().unwrap().volume() - 8000.0 * PI).abs() < 1e-9);
    }
}

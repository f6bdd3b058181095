//! Trajectory PHD filtering with unknown detection probability and clutter rate.
//!
//! The robust filter ([`robust`]) tracks whole trajectories with a
//! Beta-Gaussian mixture and estimates detection probabilities and the clutter
//! rate online. [`baseline`] is the Gaussian mixture trajectory PHD filter with
//! known parameters. Both support an L-scan window over the joint trajectory
//! Gaussian.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod beta;
pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod metric;
pub mod mixture;
pub mod models;
pub mod robust;
pub mod scenario;
pub mod types;
pub mod window;

pub use baseline::{GmPhd, GmTphd};
pub use beta::BetaParams;
pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentSpec};
pub use metric::{tm_distance, TmParams, TmResult};
pub use mixture::{PruneParams, PruneStats};
pub use models::{BearingRangeSensor, ClutterSpatialDensity, CtModel, LinearModel, MotionModel, SensorModel};
pub use robust::{Estimate, RobustParams, RobustTphd, TrackEstimate};
pub use scenario::{run_monte_carlo, GroundTruth, MonteCarlo, RunRecord, Variant};
pub use types::{
    BgmPhd, ClutterComponent, GmTrajectoryComponent, Scan, TrackGaussian, Trajectory, TrajectoryComponent,
};

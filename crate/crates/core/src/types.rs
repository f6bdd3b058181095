//! Trajectory, mixture component and scan types shared by both filters.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::beta::BetaParams;
use crate::error::{Error, Result};

/// A trajectory `(t, x^{1:i})`: birth time and the consecutive states from there on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub birth_time: usize,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(birth_time: usize, states: Vec<DVector<f64>>) -> Self {
        Self { birth_time, states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Last time step covered; equals `birth_time - 1` for an empty trajectory.
    pub fn end_time(&self) -> usize {
        self.birth_time + self.states.len() - 1
    }

    pub fn state_at(&self, time: usize) -> Option<&DVector<f64>> {
        time.checked_sub(self.birth_time).and_then(|i| self.states.get(i))
    }

    pub fn exists_at(&self, time: usize) -> bool {
        self.state_at(time).is_some()
    }
}

/// Joint Gaussian over the retained window of a trajectory plus the frozen
/// means of older steps that were evicted from the window.
///
/// `mean` and `cov` cover the last `window_len()` steps; `archive` stacks the
/// evicted means oldest first. Covariance and archive sit behind an `Arc`:
/// every detection copy of a component shares them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackGaussian {
    pub birth_time: usize,
    pub state_dim: usize,
    pub mean: DVector<f64>,
    pub cov: Arc<DMatrix<f64>>,
    pub archive: Arc<Vec<f64>>,
}

impl TrackGaussian {
    /// Single-step trajectory born at `time`.
    pub fn born(time: usize, mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self {
            birth_time: time,
            state_dim: mean.len(),
            mean,
            cov: Arc::new(cov),
            archive: Arc::new(Vec::new()),
        }
    }

    pub fn window_len(&self) -> usize {
        self.mean.len().checked_div(self.state_dim).unwrap_or(0)
    }

    pub fn archive_len(&self) -> usize {
        self.archive.len().checked_div(self.state_dim).unwrap_or(0)
    }

    /// Trajectory length `i`, window plus archive.
    pub fn len(&self) -> usize {
        self.window_len() + self.archive_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Current time step of the trajectory, `t + i - 1`.
    pub fn end_time(&self) -> usize {
        (self.birth_time + self.len()).saturating_sub(1)
    }

    /// Mean and covariance of the most recent state.
    pub fn current_marginal(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let w = self.window_len();
        if w == 0 {
            return Err(Error::EmptyWindow);
        }
        let n = self.state_dim;
        let start = (w - 1) * n;
        let mean = self.mean.rows(start, n).into_owned();
        let cov = self.cov.view((start, start), (n, n)).into_owned();
        Ok((mean, cov))
    }

    /// Current-time block of the window mean, without copying.
    pub fn current_mean(&self) -> Option<&[f64]> {
        let w = self.window_len();
        (w > 0).then(|| &self.mean.as_slice()[(w - 1) * self.state_dim..w * self.state_dim])
    }

    /// Stacked mean of the whole trajectory, `[archive; window]`.
    pub fn full_mean(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.archive.len() + self.mean.len());
        v.extend_from_slice(&self.archive);
        v.extend_from_slice(self.mean.as_slice());
        DVector::from_vec(v)
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let full = self.full_mean();
        let states = full
            .as_slice()
            .chunks(self.state_dim.max(1))
            .map(DVector::from_column_slice)
            .collect();
        Trajectory::new(self.birth_time, states)
    }
}

/// Beta-Gaussian mixture term over an augmented trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryComponent {
    pub weight: f64,
    pub beta: BetaParams,
    pub track: TrackGaussian,
}

impl TrajectoryComponent {
    pub fn current_marginal(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.track.current_marginal()
    }
}

/// Gaussian mixture term of the known-parameter baseline filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmTrajectoryComponent {
    pub weight: f64,
    pub track: TrackGaussian,
}

/// Beta mixture term over the detection probability of a clutter generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterComponent {
    pub weight: f64,
    pub beta: BetaParams,
}

/// Extracts the current-time marginal of a trajectory component.
pub fn current_marginal(c: &TrajectoryComponent) -> Result<(DVector<f64>, DMatrix<f64>)> {
    c.current_marginal()
}

/// Full state of the robust filter: trajectory and clutter mixtures at scan `time`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BgmPhd {
    pub time: usize,
    pub tracks: Vec<TrajectoryComponent>,
    pub clutter: Vec<ClutterComponent>,
}

impl BgmPhd {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn track_weight(&self) -> f64 {
        self.tracks.iter().map(|c| c.weight).sum()
    }

    pub fn clutter_weight(&self) -> f64 {
        self.clutter.iter().map(|c| c.weight).sum()
    }
}

/// Measurement set received at one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub time: usize,
    pub measurements: Vec<DVector<f64>>,
}

impl Scan {
    pub fn new(time: usize, measurements: Vec<DVector<f64>>) -> Result<Self> {
        if let Some(first) = measurements.first() {
            let dim = first.len();
            if measurements.iter().any(|z| z.len() != dim) {
                return Err(Error::Dimension("measurements in one scan differ in dimension".into()));
            }
        }
        Ok(Self { time, measurements })
    }

    pub fn empty(time: usize) -> Self {
        Self {
            time,
            measurements: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationTarget {
    Track(usize),
    Clutter(usize),
}

/// A broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub target: ViolationTarget,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target {
            ViolationTarget::Track(i) => write!(f, "track {i}: {}", self.message),
            ViolationTarget::Clutter(i) => write!(f, "clutter {i}: {}", self.message),
        }
    }
}

/// Relative tolerance for covariance symmetry checks.
const SYMMETRY_TOL: f64 = 1e-9;

fn check_track(track: &TrackGaussian, time: usize) -> Vec<String> {
    let mut out = Vec::new();
    let n = track.state_dim;
    if n == 0 || !track.mean.len().is_multiple_of(n) || !track.archive.len().is_multiple_of(n) {
        out.push(format!(
            "mean length {} is not a multiple of the state dimension {n}",
            track.mean.len()
        ));
        return out;
    }
    if track.window_len() == 0 {
        out.push("empty trajectory window".into());
    }
    let cov = &*track.cov;
    if cov.shape() != (track.mean.len(), track.mean.len()) {
        out.push(format!(
            "covariance shape {:?} does not match mean length {}",
            cov.shape(),
            track.mean.len()
        ));
        return out;
    }
    if track.birth_time + track.len() != time + 1 {
        out.push(format!(
            "trajectory born at {} with length {} does not end at time {time}",
            track.birth_time,
            track.len()
        ));
    }
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    let asym = (cov - cov.transpose()).amax();
    if asym > SYMMETRY_TOL * scale || !asym.is_finite() {
        out.push(format!("covariance is not symmetric (max asymmetry {asym:e})"));
    } else if cov.nrows() > 0 {
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-9 * cov.norm() {
            out.push(format!(
                "covariance is not positive semidefinite (min eigenvalue {min_eig:e})"
            ));
        }
    }
    out
}

/// Lists every broken invariant of the filter state; empty when the state is valid.
///
/// Track Beta parameters only need to be positive: moment-matched prediction
/// of a constantly detected track drives `v` below one.
pub fn validate(phd: &BgmPhd) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (i, c) in phd.tracks.iter().enumerate() {
        let mut push = |message: String| {
            violations.push(Violation {
                target: ViolationTarget::Track(i),
                message,
            })
        };
        if !(c.weight >= 0.0) || !c.weight.is_finite() {
            push(format!("negative or non-finite weight {}", c.weight));
        }
        if !c.beta.is_valid() {
            push(format!("invalid beta parameters ({}, {})", c.beta.u, c.beta.v));
        }
        for message in check_track(&c.track, phd.time) {
            push(message);
        }
    }
    for (i, c) in phd.clutter.iter().enumerate() {
        let mut push = |message: String| {
            violations.push(Violation {
                target: ViolationTarget::Clutter(i),
                message,
            })
        };
        if !(c.weight >= 0.0) || !c.weight.is_finite() {
            push(format!("negative or non-finite weight {}", c.weight));
        }
        if !(c.beta.u >= 1.0 && c.beta.v >= 1.0) || !c.beta.is_valid() {
            push(format!(
                "clutter beta parameters ({}, {}) below one",
                c.beta.u, c.beta.v
            ));
        }
    }
    violations
}

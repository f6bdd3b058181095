//! Beta-Gaussian robust trajectory PHD filter.
//!
//! Each trajectory term carries a Beta density over its current detection
//! probability; clutter is modelled as a mixture of clutter generators whose
//! detection probabilities are also Beta distributed. The update splits every
//! prior term into a misdetection copy (weight `w * psi0`, Beta `(u, v + 1)`)
//! and one detection copy per measurement (weight `w * psi1 * q(z) / theta(z)`,
//! Beta `(u + 1, v)`), where `theta(z)` sums the detection-weighted clutter and
//! target likelihoods of `z`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::beta::{self, BetaParams};
use crate::error::{Error, Result};
use crate::mixture::{self, PruneParams, PruneStats};
use crate::models::{ClutterSpatialDensity, MotionModel, SensorModel};
use crate::types::{BgmPhd, ClutterComponent, Scan, TrackGaussian, TrajectoryComponent};
use crate::window::{predict_window, KalmanTerms};

/// Birth term of the trajectory mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackBirth {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub beta: BetaParams,
}

/// Birth term of the clutter-generator mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterBirth {
    pub weight: f64,
    pub beta: BetaParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictParams {
    pub survival: f64,
    pub clutter_survival: f64,
    /// Variance inflation of the detection-probability Beta per step.
    pub k_beta: f64,
}

/// Per-scan bookkeeping of the update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateDiagnostics {
    /// `theta(z)` for every measurement, in scan order.
    pub denominators: Vec<f64>,
    /// Detection weight of prior track `j` for measurement `z` at `(j, z)`.
    pub association: DMatrix<f64>,
    /// Summed clutter detection weight per measurement.
    pub clutter_association: Vec<f64>,
    pub prune: PruneStats,
}

/// Full-trajectory prediction.
pub fn predict(
    state: &BgmPhd,
    motion: &dyn MotionModel,
    births: &[TrackBirth],
    clutter_births: &[ClutterBirth],
    params: &PredictParams,
) -> Result<BgmPhd> {
    predict_with_window(state, motion, births, clutter_births, params, None)
}

/// Prediction that keeps only the last `window` steps of each trajectory in the joint Gaussian.
pub fn lscan_predict(
    state: &BgmPhd,
    motion: &dyn MotionModel,
    births: &[TrackBirth],
    clutter_births: &[ClutterBirth],
    params: &PredictParams,
    window: usize,
) -> Result<BgmPhd> {
    if window == 0 {
        return Err(Error::Config("L-scan window must be at least 1".into()));
    }
    predict_with_window(state, motion, births, clutter_births, params, Some(window))
}

pub fn predict_with_window(
    state: &BgmPhd,
    motion: &dyn MotionModel,
    births: &[TrackBirth],
    clutter_births: &[ClutterBirth],
    params: &PredictParams,
    window: Option<usize>,
) -> Result<BgmPhd> {
    let time = state.time + 1;
    let mut tracks = Vec::with_capacity(births.len() + state.tracks.len());
    for b in births {
        if b.mean.len() != motion.state_dim() {
            return Err(Error::Dimension(format!(
                "birth mean has length {}, motion model expects {}",
                b.mean.len(),
                motion.state_dim()
            )));
        }
        tracks.push(TrajectoryComponent {
            weight: b.weight,
            beta: b.beta,
            track: TrackGaussian::born(time, b.mean.clone(), b.cov.clone()),
        });
    }
    for (index, c) in state.tracks.iter().enumerate() {
        let beta = beta::predict_beta(c.beta, params.k_beta).map_err(|e| e.in_component(index))?;
        let track = predict_window(&c.track, motion, window).map_err(|e| e.in_component(index))?;
        tracks.push(TrajectoryComponent {
            weight: params.survival * c.weight,
            beta,
            track,
        });
    }

    let mut clutter = Vec::with_capacity(clutter_births.len() + state.clutter.len());
    clutter.extend(clutter_births.iter().map(|b| ClutterComponent {
        weight: b.weight,
        beta: b.beta,
    }));
    // Clutter generator Betas carry over unchanged.
    clutter.extend(state.clutter.iter().map(|c| ClutterComponent {
        weight: params.clutter_survival * c.weight,
        beta: c.beta,
    }));

    Ok(BgmPhd { time, tracks, clutter })
}

/// Measurement update of the trajectory and clutter mixtures.
///
/// Output order: misdetection copies of all tracks, then for every
/// measurement in scan order the detection copies of all tracks. Clutter
/// follows the same layout.
pub fn update(
    state: &BgmPhd,
    scan: &Scan,
    sensor: &dyn SensorModel,
    clutter_density: &ClutterSpatialDensity,
) -> Result<(BgmPhd, UpdateDiagnostics)> {
    if scan.time != state.time {
        return Err(Error::TimeMismatch {
            scan: scan.time,
            filter: state.time,
        });
    }
    let n_tracks = state.tracks.len();
    let n_meas = scan.measurements.len();

    let terms: Vec<KalmanTerms> = if n_meas == 0 {
        Vec::new()
    } else {
        state
            .tracks
            .iter()
            .enumerate()
            .map(|(j, c)| KalmanTerms::new(&c.track, sensor).map_err(|e| e.in_component(j)))
            .collect::<Result<_>>()?
    };
    let psi: Vec<(f64, f64)> = state.tracks.iter().map(|c| beta::psi_pair(c.beta)).collect();
    let clutter_psi: Vec<(f64, f64)> = state.clutter.iter().map(|c| beta::psi_pair(c.beta)).collect();
    let clutter_detect_mass: f64 = state
        .clutter
        .iter()
        .zip(&clutter_psi)
        .map(|(c, (_, d))| d * c.weight)
        .sum();

    let mut tracks = Vec::with_capacity(n_tracks * (n_meas + 1));
    for (c, (psi0, _)) in state.tracks.iter().zip(&psi) {
        tracks.push(TrajectoryComponent {
            weight: c.weight * psi0,
            beta: c.beta.missed(),
            track: c.track.clone(),
        });
    }
    let mut clutter = Vec::with_capacity(state.clutter.len() * (n_meas + 1));
    for (c, (psi0, _)) in state.clutter.iter().zip(&clutter_psi) {
        clutter.push(ClutterComponent {
            weight: c.weight * psi0,
            beta: c.beta.missed(),
        });
    }

    let mut diagnostics = UpdateDiagnostics {
        denominators: Vec::with_capacity(n_meas),
        association: DMatrix::zeros(n_tracks, n_meas),
        clutter_association: Vec::with_capacity(n_meas),
        prune: PruneStats::default(),
    };

    let mut innovations: Vec<DVector<f64>> = Vec::with_capacity(n_tracks);
    let mut likelihoods: Vec<f64> = Vec::with_capacity(n_tracks);
    for (zi, z) in scan.measurements.iter().enumerate() {
        innovations.clear();
        likelihoods.clear();
        for t in &terms {
            let nu = sensor.residual(z, &t.predicted);
            likelihoods.push(t.log_likelihood(&nu).exp());
            innovations.push(nu);
        }
        let clutter_intensity = clutter_density.density(z);
        let target_mass: f64 = state
            .tracks
            .iter()
            .zip(&psi)
            .zip(&likelihoods)
            .map(|((c, (_, d)), q)| d * c.weight * q)
            .sum();
        let theta = clutter_detect_mass * clutter_intensity + target_mass;
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::OutsideSupport(z.iter().copied().collect()));
        }
        diagnostics.denominators.push(theta);

        for (j, c) in state.tracks.iter().enumerate() {
            let weight = c.weight * psi[j].1 * likelihoods[j] / theta;
            diagnostics.association[(j, zi)] = weight;
            tracks.push(TrajectoryComponent {
                weight,
                beta: c.beta.detected(),
                track: terms[j].updated(&c.track, &innovations[j]),
            });
        }
        let mut clutter_sum = 0.0;
        for (c, (_, psi1)) in state.clutter.iter().zip(&clutter_psi) {
            let weight = c.weight * psi1 * clutter_intensity / theta;
            clutter_sum += weight;
            clutter.push(ClutterComponent {
                weight,
                beta: c.beta.detected(),
            });
        }
        diagnostics.clutter_association.push(clutter_sum);
    }

    Ok((
        BgmPhd {
            time: state.time,
            tracks,
            clutter,
        },
        diagnostics,
    ))
}

/// Update after an L-scan prediction. The window was already truncated by the
/// prediction, so the gain and covariance only span the retained steps.
pub fn lscan_update(
    state: &BgmPhd,
    scan: &Scan,
    sensor: &dyn SensorModel,
    clutter_density: &ClutterSpatialDensity,
) -> Result<(BgmPhd, UpdateDiagnostics)> {
    update(state, scan, sensor, clutter_density)
}

pub fn prune_and_absorb(state: &BgmPhd, params: &PruneParams) -> (BgmPhd, PruneStats) {
    let (tracks, mut stats) = mixture::prune_and_absorb_tracks(&state.tracks, params);
    let (clutter, clutter_stats) = mixture::prune_clutter(&state.clutter, params);
    stats.merge(clutter_stats);
    (
        BgmPhd {
            time: state.time,
            tracks,
            clutter,
        },
        stats,
    )
}

/// One extracted trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEstimate {
    pub birth_time: usize,
    pub length: usize,
    pub state_dim: usize,
    /// Stacked states from birth to the current time.
    pub mean: DVector<f64>,
    pub detection_probability: f64,
    pub weight: f64,
}

impl TrackEstimate {
    pub fn state(&self, step: usize) -> DVector<f64> {
        self.mean.rows(step * self.state_dim, self.state_dim).into_owned()
    }

    pub fn current_state(&self) -> DVector<f64> {
        self.state(self.length - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// `round(sum of track weights)`.
    pub cardinality: usize,
    pub tracks: Vec<TrackEstimate>,
    /// `round(sum_j w_cj * u_cj / (u_cj + v_cj))`.
    pub clutter_rate: usize,
    /// Unrounded clutter rate.
    pub clutter_mass: f64,
    /// Set when fewer components than `cardinality` were available.
    pub shortfall: bool,
}

pub(crate) fn top_tracks<'a>(
    components: impl Iterator<Item = (f64, &'a TrackGaussian, f64)>,
) -> (usize, Vec<TrackEstimate>, bool) {
    let mut items: Vec<(f64, &TrackGaussian, f64)> = components.collect();
    let total: f64 = items.iter().map(|c| c.0).sum();
    let cardinality = total.round().max(0.0) as usize;
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let shortfall = cardinality > items.len();
    let tracks = items
        .into_iter()
        .take(cardinality)
        .map(|(weight, track, pd)| TrackEstimate {
            birth_time: track.birth_time,
            length: track.len(),
            state_dim: track.state_dim,
            mean: track.full_mean(),
            detection_probability: pd,
            weight,
        })
        .collect();
    (cardinality, tracks, shortfall)
}

/// Extracts the `round(sum w)` heaviest trajectories with their detection
/// probability estimates, plus the clutter rate.
pub fn estimate(state: &BgmPhd) -> Estimate {
    let (cardinality, tracks, shortfall) = top_tracks(state.tracks.iter().map(|c| (c.weight, &c.track, c.beta.mean())));
    let clutter_mass: f64 = state.clutter.iter().map(|c| c.weight * c.beta.mean()).sum();
    Estimate {
        cardinality,
        tracks,
        clutter_rate: clutter_mass.round().max(0.0) as usize,
        clutter_mass,
        shortfall,
    }
}

/// Filter parameters for a full predict / update / reduce cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustParams {
    pub predict: PredictParams,
    pub prune: PruneParams,
    pub births: Vec<TrackBirth>,
    pub clutter_births: Vec<ClutterBirth>,
    /// L-scan depth; `None` keeps whole trajectories in the joint Gaussian.
    pub window: Option<usize>,
}

/// Output of one filter cycle.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub estimate: Estimate,
    pub diagnostics: UpdateDiagnostics,
}

/// Stateful driver running predict, update, prune/absorb and estimation per scan.
pub struct RobustTphd<'a> {
    motion: &'a dyn MotionModel,
    sensor: &'a dyn SensorModel,
    clutter_density: &'a ClutterSpatialDensity,
    params: RobustParams,
    state: BgmPhd,
}

impl<'a> RobustTphd<'a> {
    pub fn new(
        motion: &'a dyn MotionModel,
        sensor: &'a dyn SensorModel,
        clutter_density: &'a ClutterSpatialDensity,
        params: RobustParams,
    ) -> Self {
        Self {
            motion,
            sensor,
            clutter_density,
            params,
            state: BgmPhd::new(),
        }
    }

    pub fn state(&self) -> &BgmPhd {
        &self.state
    }

    pub fn step(&mut self, scan: &Scan) -> Result<StepOutput> {
        let predicted = predict_with_window(
            &self.state,
            self.motion,
            &self.params.births,
            &self.params.clutter_births,
            &self.params.predict,
            self.params.window,
        )?;
        let (updated, mut diagnostics) = update(&predicted, scan, self.sensor, self.clutter_density)?;
        let (reduced, stats) = prune_and_absorb(&updated, &self.params.prune);
        diagnostics.prune = stats;
        self.state = reduced;
        Ok(StepOutput {
            estimate: estimate(&self.state),
            diagnostics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearModel;

    fn model() -> LinearModel {
        LinearModel::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap()
    }

    fn single_track(weight: f64, u: f64, v: f64) -> BgmPhd {
        BgmPhd {
            time: 1,
            tracks: vec![TrajectoryComponent {
                weight,
                beta: BetaParams::new(u, v),
                track: TrackGaussian::born(1, DVector::from_vec(vec![0.0, 0.0]), DMatrix::identity(2, 2)),
            }],
            clutter: vec![],
        }
    }

    fn params(ps: f64, psc: f64, k: f64) -> PredictParams {
        PredictParams {
            survival: ps,
            clutter_survival: psc,
            k_beta: k,
        }
    }

    #[test]
    fn predicted_track_weight_and_beta() {
        let p = predict(
            &single_track(1.0, 8.0, 2.0),
            &model(),
            &[],
            &[],
            &params(0.99, 0.9, 1.1),
        )
        .unwrap();
        let c = &p.tracks[0];
        assert!((c.weight - 0.99).abs() < 1e-15);
        assert!((c.beta.u - 7.2).abs() < 1e-12);
        assert!((c.beta.v - 1.8).abs() < 1e-12);
        assert_eq!(p.time, 2);
    }

    #[test]
    fn predicted_clutter_passes_beta_through() {
        let mut s = BgmPhd::new();
        s.clutter.push(ClutterComponent {
            weight: 20.0,
            beta: BetaParams::uniform(),
        });
        let p = predict(&s, &model(), &[], &[], &params(0.99, 0.9, 1.1)).unwrap();
        assert!((p.clutter[0].weight - 18.0).abs() < 1e-12);
        assert_eq!(p.clutter[0].beta, BetaParams::uniform());
    }

    #[test]
    fn empty_scan_keeps_only_misdetections() {
        let s = single_track(1.0, 8.0, 2.0);
        let (u, diag) = update(
            &s,
            &Scan::empty(1),
            &model(),
            &ClutterSpatialDensity::new(vec![-1.0; 2], vec![1.0; 2]).unwrap(),
        )
        .unwrap();
        assert_eq!(u.tracks.len(), 1);
        assert!((u.tracks[0].weight - 0.2).abs() < 1e-15);
        assert_eq!(u.tracks[0].beta, BetaParams::new(8.0, 3.0));
        assert!(diag.denominators.is_empty());
    }

    #[test]
    fn time_mismatch_is_rejected() {
        let s = single_track(1.0, 8.0, 2.0);
        let region = ClutterSpatialDensity::new(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        assert!(matches!(
            update(&s, &Scan::empty(3), &model(), &region),
            Err(Error::TimeMismatch { .. })
        ));
    }

    #[test]
    fn zero_denominator_names_measurement() {
        let s = BgmPhd {
            time: 1,
            ..BgmPhd::new()
        };
        let region = ClutterSpatialDensity::new(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let scan = Scan::new(1, vec![DVector::from_vec(vec![5.0, 5.0])]).unwrap();
        let err = update(&s, &scan, &model(), &region).unwrap_err();
        assert!(err.to_string().contains("measurement outside model support"));
    }

    #[test]
    fn estimate_rounding_and_rates() {
        let mut s = single_track(0.9, 8.0, 2.0);
        let mut second = s.tracks[0].clone();
        second.weight = 0.6;
        s.tracks.push(second);
        s.clutter.push(ClutterComponent {
            weight: 20.0,
            beta: BetaParams::uniform(),
        });
        let e = estimate(&s);
        assert_eq!(e.cardinality, 2);
        assert_eq!(e.tracks.len(), 2);
        assert_eq!(e.clutter_rate, 10);
        assert!((e.tracks[0].detection_probability - 0.8).abs() < 1e-15);
        assert!(!e.shortfall);
    }

    #[test]
    fn estimate_flags_shortfall() {
        let e = estimate(&single_track(2.6, 8.0, 2.0));
        assert_eq!(e.cardinality, 3);
        assert_eq!(e.tracks.len(), 1);
        assert!(e.shortfall);
    }
}

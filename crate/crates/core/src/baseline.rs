//! Gaussian mixture trajectory PHD filter with known detection probability
//! and known Poisson clutter rate, used as the reference for the robust filter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{self, PruneParams, PruneStats};
use crate::models::{ClutterSpatialDensity, MotionModel, SensorModel};
use crate::robust::{top_tracks, Estimate};
use crate::types::{GmTrajectoryComponent, Scan, TrackGaussian};
use crate::window::{predict_window, KalmanTerms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmBirth {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GmPhd {
    pub time: usize,
    pub tracks: Vec<GmTrajectoryComponent>,
}

impl GmPhd {
    pub fn total_weight(&self) -> f64 {
        self.tracks.iter().map(|c| c.weight).sum()
    }
}

/// Births first, then survivors with weight `p_S * w` and one appended step.
pub fn tphd_predict(
    state: &GmPhd,
    motion: &dyn MotionModel,
    births: &[GmBirth],
    survival: f64,
    window: Option<usize>,
) -> Result<GmPhd> {
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
        tracks.push(GmTrajectoryComponent {
            weight: b.weight,
            track: TrackGaussian::born(time, b.mean.clone(), b.cov.clone()),
        });
    }
    for (index, c) in state.tracks.iter().enumerate() {
        tracks.push(GmTrajectoryComponent {
            weight: survival * c.weight,
            track: predict_window(&c.track, motion, window).map_err(|e| e.in_component(index))?,
        });
    }
    Ok(GmPhd { time, tracks })
}

/// Update with constant detection probability and clutter rate.
///
/// Same output layout as the robust update: misdetection copies first, then
/// per measurement the detection copies of every component. With
/// `detection_probability == 0` the detection copies are omitted.
pub fn tphd_update(
    state: &GmPhd,
    scan: &Scan,
    sensor: &dyn SensorModel,
    detection_probability: f64,
    clutter_rate: f64,
    clutter_density: &ClutterSpatialDensity,
) -> Result<GmPhd> {
    if scan.time != state.time {
        return Err(Error::TimeMismatch {
            scan: scan.time,
            filter: state.time,
        });
    }
    if !(0.0..=1.0).contains(&detection_probability) {
        return Err(Error::Domain(detection_probability));
    }
    let p_d = detection_probability;
    let miss = 1.0 - p_d;
    let mut tracks: Vec<GmTrajectoryComponent> = state
        .tracks
        .iter()
        .map(|c| GmTrajectoryComponent {
            weight: c.weight * miss,
            track: c.track.clone(),
        })
        .collect();
    if p_d == 0.0 || scan.is_empty() {
        return Ok(GmPhd {
            time: state.time,
            tracks,
        });
    }

    let terms: Vec<KalmanTerms> = state
        .tracks
        .iter()
        .enumerate()
        .map(|(j, c)| KalmanTerms::new(&c.track, sensor).map_err(|e| e.in_component(j)))
        .collect::<Result<_>>()?;

    for z in &scan.measurements {
        let innovations: Vec<DVector<f64>> = terms.iter().map(|t| sensor.residual(z, &t.predicted)).collect();
        let likelihoods: Vec<f64> = terms
            .iter()
            .zip(&innovations)
            .map(|(t, nu)| t.log_likelihood(nu).exp())
            .collect();
        let target_mass: f64 = state
            .tracks
            .iter()
            .zip(&likelihoods)
            .map(|(c, q)| p_d * c.weight * q)
            .sum();
        let theta = clutter_rate * clutter_density.density(z) + target_mass;
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::OutsideSupport(z.iter().copied().collect()));
        }
        for (j, c) in state.tracks.iter().enumerate() {
            tracks.push(GmTrajectoryComponent {
                weight: c.weight * p_d * likelihoods[j] / theta,
                track: terms[j].updated(&c.track, &innovations[j]),
            });
        }
    }
    Ok(GmPhd {
        time: state.time,
        tracks,
    })
}

pub fn prune_and_absorb(state: &GmPhd, params: &PruneParams) -> (GmPhd, PruneStats) {
    let (tracks, stats) = mixture::prune_and_absorb_tracks(&state.tracks, params);
    (
        GmPhd {
            time: state.time,
            tracks,
        },
        stats,
    )
}

/// Extraction with the known detection probability and clutter rate reported back.
pub fn estimate(state: &GmPhd, detection_probability: f64, clutter_rate: f64) -> Estimate {
    let (cardinality, tracks, shortfall) =
        top_tracks(state.tracks.iter().map(|c| (c.weight, &c.track, detection_probability)));
    Estimate {
        cardinality,
        tracks,
        clutter_rate: clutter_rate.round().max(0.0) as usize,
        clutter_mass: clutter_rate,
        shortfall,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub survival: f64,
    pub detection_probability: f64,
    pub clutter_rate: f64,
    pub births: Vec<GmBirth>,
    pub prune: PruneParams,
    pub window: Option<usize>,
}

pub struct GmTphd<'a> {
    motion: &'a dyn MotionModel,
    sensor: &'a dyn SensorModel,
    clutter_density: &'a ClutterSpatialDensity,
    params: BaselineParams,
    state: GmPhd,
}

impl<'a> GmTphd<'a> {
    pub fn new(
        motion: &'a dyn MotionModel,
        sensor: &'a dyn SensorModel,
        clutter_density: &'a ClutterSpatialDensity,
        params: BaselineParams,
    ) -> Self {
        Self {
            motion,
            sensor,
            clutter_density,
            params,
            state: GmPhd::default(),
        }
    }

    pub fn state(&self) -> &GmPhd {
        &self.state
    }

    pub fn step(&mut self, scan: &Scan) -> Result<Estimate> {
        let p = &self.params;
        let predicted = tphd_predict(&self.state, self.motion, &p.births, p.survival, p.window)?;
        let updated = tphd_update(
            &predicted,
            scan,
            self.sensor,
            p.detection_probability,
            p.clutter_rate,
            self.clutter_density,
        )?;
        self.state = prune_and_absorb(&updated, &p.prune).0;
        Ok(estimate(&self.state, p.detection_probability, p.clutter_rate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearModel;

    fn model() -> LinearModel {
        LinearModel::constant_velocity(1, 1.0, 1.0, 1.0)
    }

    fn birth(weight: f64) -> GmBirth {
        GmBirth {
            weight,
            mean: DVector::zeros(2),
            cov: DMatrix::identity(2, 2),
        }
    }

    #[test]
    fn four_births_from_empty() {
        let births: Vec<_> = (0..4).map(|_| birth(0.01)).collect();
        let p = tphd_predict(&GmPhd::default(), &model(), &births, 0.99, None).unwrap();
        assert!((p.total_weight() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn predicted_weight_is_linear() {
        let prior = tphd_predict(&GmPhd::default(), &model(), &[birth(0.4), birth(0.6)], 0.99, None).unwrap();
        let births: Vec<_> = (0..4).map(|_| birth(0.01)).collect();
        let p = tphd_predict(&prior, &model(), &births, 0.99, None).unwrap();
        assert!((p.total_weight() - 1.03).abs() < 1e-12);
    }

    #[test]
    fn empty_scan_scales_by_miss_probability() {
        let prior = tphd_predict(&GmPhd::default(), &model(), &[birth(0.7)], 0.99, None).unwrap();
        let region = ClutterSpatialDensity::new(vec![-100.0], vec![100.0]).unwrap();
        let u = tphd_update(&prior, &Scan::empty(1), &model(), 0.9, 5.0, &region).unwrap();
        assert_eq!(u.tracks.len(), 1);
        assert!((u.tracks[0].weight - 0.07).abs() < 1e-15);
        assert_eq!(u.tracks[0].track, prior.tracks[0].track);
    }

    #[test]
    fn zero_detection_probability_has_no_detection_terms() {
        let prior = tphd_predict(&GmPhd::default(), &model(), &[birth(0.7)], 0.99, None).unwrap();
        let region = ClutterSpatialDensity::new(vec![-100.0], vec![100.0]).unwrap();
        let scan = Scan::new(1, vec![DVector::from_vec(vec![0.5])]).unwrap();
        let u = tphd_update(&prior, &scan, &model(), 0.0, 5.0, &region).unwrap();
        assert_eq!(u.tracks.len(), 1);
        assert_eq!(u.tracks[0].weight, 0.7);
    }
}

//! Prediction and Kalman update of a trajectory's windowed joint Gaussian.
//!
//! Prediction appends one state block. The cross-covariance column between the
//! new step and every retained step is `P[:, last] F^T`, so past states stay
//! correlated with the present and a later measurement smooths them. When the
//! window already holds `L` steps the oldest block is moved to the archive
//! first, keeping only the trailing `L x L` block grid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{MotionModel, SensorModel};
use crate::types::TrackGaussian;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Predicts a trajectory Gaussian one step ahead, evicting into the archive
/// when the window would exceed `max_window` steps.
pub fn predict_window(
    track: &TrackGaussian,
    motion: &dyn MotionModel,
    max_window: Option<usize>,
) -> Result<TrackGaussian> {
    let n = track.state_dim;
    if motion.state_dim() != n {
        return Err(Error::Dimension(format!(
            "motion model has state dimension {}, component has {n}",
            motion.state_dim()
        )));
    }
    let w = track.window_len();
    if w == 0 {
        return Err(Error::EmptyWindow);
    }
    let last = (w - 1) * n;
    let current = track.mean.rows(last, n).into_owned();
    let step = motion.transition(&current);
    let f = &step.jacobian;

    let evict = max_window.is_some_and(|l| w >= l.max(1));
    let first_kept = usize::from(evict);
    let kept = w - first_kept;
    let kept_start = first_kept * n;
    let kept_len = kept * n;
    let new_len = kept_len + n;

    let cov = &*track.cov;
    let mut new_cov = DMatrix::zeros(new_len, new_len);
    new_cov
        .view_mut((0, 0), (kept_len, kept_len))
        .copy_from(&cov.view((kept_start, kept_start), (kept_len, kept_len)));
    let cross = cov.view((kept_start, last), (kept_len, n)) * f.transpose();
    new_cov.view_mut((0, kept_len), (kept_len, n)).copy_from(&cross);
    new_cov
        .view_mut((kept_len, 0), (n, kept_len))
        .copy_from(&cross.transpose());
    let corner = f * cov.view((last, last), (n, n)) * f.transpose() + &step.noise;
    let corner = (&corner + corner.transpose()) * 0.5;
    new_cov.view_mut((kept_len, kept_len), (n, n)).copy_from(&corner);

    let mut new_mean = DVector::zeros(new_len);
    new_mean
        .rows_mut(0, kept_len)
        .copy_from(&track.mean.rows(kept_start, kept_len));
    new_mean.rows_mut(kept_len, n).copy_from(&step.mean);

    let mut archive = Arc::clone(&track.archive);
    if evict {
        Arc::make_mut(&mut archive).extend_from_slice(track.mean.rows(0, n).as_slice());
    }

    Ok(TrackGaussian {
        birth_time: track.birth_time,
        state_dim: n,
        mean: new_mean,
        cov: Arc::new(new_cov),
        archive,
    })
}

/// Measurement-independent update quantities of one trajectory component.
#[derive(Debug, Clone)]
pub struct KalmanTerms {
    /// Predicted measurement `z_hat = h(m_k)`.
    pub predicted: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    innovation_inv: DMatrix<f64>,
    log_norm: f64,
    /// Gain over the whole window, `P[:, k] H^T S^-1`.
    pub gain: DMatrix<f64>,
    pub posterior_cov: Arc<DMatrix<f64>>,
}

impl KalmanTerms {
    pub fn new(track: &TrackGaussian, sensor: &dyn SensorModel) -> Result<Self> {
        let n = track.state_dim;
        if sensor.state_dim() != n {
            return Err(Error::Dimension(format!(
                "sensor expects state dimension {}, component has {n}",
                sensor.state_dim()
            )));
        }
        let (current, current_cov) = track.current_marginal()?;
        let obs = sensor.observe(&current)?;
        let h = &obs.jacobian;
        let r = sensor.noise_cov();

        let s = h * &current_cov * h.transpose() + r;
        let s = (&s + s.transpose()) * 0.5;
        let chol = s.clone().cholesky().ok_or(Error::SingularInnovation)?;
        let s_inv = chol.inverse();
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let log_norm = -0.5 * (s.nrows() as f64 * LN_2PI + log_det);

        let cov = &*track.cov;
        let last = (track.window_len() - 1) * n;
        let column = cov.columns(last, n);
        let ht_sinv = h.transpose() * &s_inv;
        let gain = column * &ht_sinv;
        let posterior = cov - &gain * (h * column.transpose());
        let posterior = (&posterior + posterior.transpose()) * 0.5;

        Ok(Self {
            predicted: obs.mean,
            innovation_cov: s,
            innovation_inv: s_inv,
            log_norm,
            gain,
            posterior_cov: Arc::new(posterior),
        })
    }

    /// Log of the predicted measurement likelihood `N(z; z_hat, S)`.
    pub fn log_likelihood(&self, innovation: &DVector<f64>) -> f64 {
        self.log_norm - 0.5 * (innovation.transpose() * &self.innovation_inv * innovation)[(0, 0)]
    }

    /// Gaussian updated with innovation `z - z_hat` over the whole window.
    pub fn updated(&self, track: &TrackGaussian, innovation: &DVector<f64>) -> TrackGaussian {
        TrackGaussian {
            birth_time: track.birth_time,
            state_dim: track.state_dim,
            mean: &track.mean + &self.gain * innovation,
            cov: Arc::clone(&self.posterior_cov),
            archive: Arc::clone(&track.archive),
        }
    }
}

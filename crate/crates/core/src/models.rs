//! Motion and sensor models.
//!
//! Filters only consume `(mean map, jacobian, noise)` triples, so the linear
//! Gaussian pair and the linearised coordinated-turn / bearing-range pair go
//! through the same code path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Turn rates below this magnitude use the straight-line limit of the CT matrix.
pub const TURN_RATE_EPS: f64 = 1e-9;

/// One linearised transition step.
#[derive(Debug, Clone)]
pub struct Transition {
    pub mean: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

/// Predicted measurement and its jacobian with respect to the state.
#[derive(Debug, Clone)]
pub struct Observation {
    pub mean: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

pub trait MotionModel: Send + Sync {
    fn state_dim(&self) -> usize;

    /// Mean, jacobian and process noise of one step from `x`.
    fn transition(&self, x: &DVector<f64>) -> Transition;
}

pub trait SensorModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn measurement_dim(&self) -> usize;

    fn observe(&self, x: &DVector<f64>) -> Result<Observation>;

    fn noise_cov(&self) -> &DMatrix<f64>;

    /// Innovation `z - z_hat`.
    fn residual(&self, z: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        z - predicted
    }
}

/// Linear Gaussian motion and observation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(f: DMatrix<f64>, q: DMatrix<f64>, h: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n || q.shape() != (n, n) || h.ncols() != n || r.shape() != (h.nrows(), h.nrows()) {
            return Err(Error::Dimension(format!(
                "linear model shapes F {:?}, Q {:?}, H {:?}, R {:?}",
                f.shape(),
                q.shape(),
                h.shape(),
                r.shape()
            )));
        }
        Ok(Self { f, q, h, r })
    }

    /// Nearly-constant-velocity model in one dimension per axis, state `[p, v]` per axis.
    pub fn constant_velocity(axes: usize, dt: f64, accel_std: f64, meas_std: f64) -> Self {
        let n = 2 * axes;
        let mut f = DMatrix::identity(n, n);
        let mut q = DMatrix::zeros(n, n);
        let mut h = DMatrix::zeros(axes, n);
        let s2 = accel_std * accel_std;
        for a in 0..axes {
            let p = 2 * a;
            f[(p, p + 1)] = dt;
            q[(p, p)] = s2 * dt.powi(4) / 4.0;
            q[(p, p + 1)] = s2 * dt.powi(3) / 2.0;
            q[(p + 1, p)] = s2 * dt.powi(3) / 2.0;
            q[(p + 1, p + 1)] = s2 * dt * dt;
            h[(a, p)] = 1.0;
        }
        let r = DMatrix::identity(axes, axes) * (meas_std * meas_std);
        Self { f, q, h, r }
    }
}

impl MotionModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn transition(&self, x: &DVector<f64>) -> Transition {
        Transition {
            mean: &self.f * x,
            jacobian: self.f.clone(),
            noise: self.q.clone(),
        }
    }
}

impl SensorModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.h.ncols()
    }

    fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }

    fn observe(&self, x: &DVector<f64>) -> Result<Observation> {
        Ok(Observation {
            mean: &self.h * x,
            jacobian: self.h.clone(),
        })
    }

    fn noise_cov(&self) -> &DMatrix<f64> {
        &self.r
    }
}

/// Coordinated-turn dynamics on the state `[p_x, v_x, p_y, v_y, turn_rate]`.
///
/// Acceleration noise drives the position/velocity block through the usual
/// `[dt^2/2, dt]` gain per axis; the turn rate follows a random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtModel {
    pub dt: f64,
    pub accel_std: f64,
    pub turn_rate_std: f64,
}

impl CtModel {
    pub fn noise_cov(&self) -> DMatrix<f64> {
        ct_noise(self.dt, self.accel_std, self.turn_rate_std)
    }
}

impl MotionModel for CtModel {
    fn state_dim(&self) -> usize {
        5
    }

    fn transition(&self, x: &DVector<f64>) -> Transition {
        ct_transition(x, self.dt, self.accel_std, self.turn_rate_std)
    }
}

fn ct_noise(dt: f64, accel_std: f64, turn_rate_std: f64) -> DMatrix<f64> {
    let mut noise = DMatrix::zeros(5, 5);
    let s2 = accel_std * accel_std;
    let (g_pos, g_vel) = (dt * dt / 2.0, dt);
    for p in [0, 2] {
        noise[(p, p)] = s2 * g_pos * g_pos;
        noise[(p, p + 1)] = s2 * g_pos * g_vel;
        noise[(p + 1, p)] = s2 * g_pos * g_vel;
        noise[(p + 1, p + 1)] = s2 * g_vel * g_vel;
    }
    noise[(4, 4)] = (turn_rate_std * dt).powi(2);
    noise
}

/// `sin(wT)/w`, `(1 - cos(wT))/w` and their derivatives in `w`.
fn turn_coefficients(w: f64, dt: f64) -> (f64, f64, f64, f64) {
    if w.abs() < TURN_RATE_EPS {
        // Series limits: a -> T, b -> wT^2/2, da -> -wT^3/3, db -> T^2/2.
        return (dt, w * dt * dt / 2.0, -w * dt.powi(3) / 3.0, dt * dt / 2.0);
    }
    let (s, c) = (w * dt).sin_cos();
    // 1 - cos(wT) = 2 sin^2(wT / 2) avoids cancellation for small turn rates.
    let one_minus_c = 2.0 * (0.5 * w * dt).sin().powi(2);
    let a = s / w;
    let b = one_minus_c / w;
    let da = (dt * c * w - s) / (w * w);
    let db = (dt * s * w - one_minus_c) / (w * w);
    (a, b, da, db)
}

/// Coordinated-turn step from state `[p_x, v_x, p_y, v_y, w]`.
pub fn ct_transition(x: &DVector<f64>, dt: f64, accel_std: f64, turn_rate_std: f64) -> Transition {
    let (px, vx, py, vy, w) = (x[0], x[1], x[2], x[3], x[4]);
    let (a, b, da, db) = turn_coefficients(w, dt);
    let (s, c) = (w * dt).sin_cos();

    let mean = DVector::from_vec(vec![
        px + a * vx - b * vy,
        c * vx - s * vy,
        py + b * vx + a * vy,
        s * vx + c * vy,
        w,
    ]);

    #[rustfmt::skip]
    let jacobian = DMatrix::from_row_slice(5, 5, &[
        1.0, a,   0.0, -b,  da * vx - db * vy,
        0.0, c,   0.0, -s,  -dt * s * vx - dt * c * vy,
        0.0, b,   1.0, a,   db * vx + da * vy,
        0.0, s,   0.0, c,   dt * c * vx - dt * s * vy,
        0.0, 0.0, 0.0, 0.0, 1.0,
    ]);

    Transition {
        mean,
        jacobian,
        noise: ct_noise(dt, accel_std, turn_rate_std),
    }
}

/// Bearing/range sensor at the origin. Bearing is `atan2(p_x, p_y)`, measured from the y axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingRangeSensor {
    state_dim: usize,
    position_index: [usize; 2],
    r: DMatrix<f64>,
}

impl BearingRangeSensor {
    pub fn new(state_dim: usize, position_index: [usize; 2], bearing_std: f64, range_std: f64) -> Self {
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![
            bearing_std * bearing_std,
            range_std * range_std,
        ]));
        Self {
            state_dim,
            position_index,
            r,
        }
    }

    pub fn position_index(&self) -> [usize; 2] {
        self.position_index
    }
}

impl SensorModel for BearingRangeSensor {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn measurement_dim(&self) -> usize {
        2
    }

    fn observe(&self, x: &DVector<f64>) -> Result<Observation> {
        let [ix, iy] = self.position_index;
        bearing_range_measure(x, ix, iy)
    }

    fn noise_cov(&self) -> &DMatrix<f64> {
        &self.r
    }
}

/// Noise-free bearing/range of the state and the measurement jacobian.
pub fn bearing_range_measure(x: &DVector<f64>, ix: usize, iy: usize) -> Result<Observation> {
    let (px, py) = (x[ix], x[iy]);
    let range_sq = px * px + py * py;
    if range_sq <= 0.0 || !range_sq.is_finite() {
        return Err(Error::RangeSingularity);
    }
    let range = range_sq.sqrt();
    let mut jacobian = DMatrix::zeros(2, x.len());
    jacobian[(0, ix)] = py / range_sq;
    jacobian[(0, iy)] = -px / range_sq;
    jacobian[(1, ix)] = px / range;
    jacobian[(1, iy)] = py / range;
    Ok(Observation {
        mean: DVector::from_vec(vec![px.atan2(py), range]),
        jacobian,
    })
}

/// Axis-aligned box in measurement space with a uniform clutter density on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSpatialDensity {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ClutterSpatialDensity {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(u > l)) {
            return Err(Error::Config(format!("clutter region bounds {lower:?} / {upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        z.len() == self.lower.len()
            && z.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= *l && *x <= *u)
    }

    pub fn density(&self, z: &DVector<f64>) -> f64 {
        if self.contains(z) {
            1.0 / self.volume()
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn straight_line_limit() {
        let x = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let t = ct_transition(&x, 1.0, 0.0, 0.0);
        assert_eq!(t.mean.as_slice(), &[1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn limit_is_continuous() {
        let base = DVector::from_vec(vec![10.0, 3.0, -4.0, 2.0, 0.0]);
        let mut tiny = base.clone();
        tiny[4] = 1e-6;
        let a = ct_transition(&base, 1.0, 1.0, 0.1);
        let b = ct_transition(&tiny, 1.0, 1.0, 0.1);
        for i in 0..5 {
            assert!((a.mean[i] - b.mean[i]).abs() < 1e-5);
        }
        for (ja, jb) in a.jacobian.iter().zip(b.jacobian.iter()) {
            assert!((ja - jb).abs() < 1e-5);
        }
    }

    #[test]
    fn bearing_range_axes() {
        let x = DVector::from_vec(vec![0.0, 0.0, 1000.0, 0.0, 0.0]);
        let o = bearing_range_measure(&x, 0, 2).unwrap();
        assert!(o.mean[0].abs() < 1e-15);
        assert!((o.mean[1] - 1000.0).abs() < 1e-12);

        let x = DVector::from_vec(vec![1000.0, 0.0, 1000.0, 0.0, 0.0]);
        let o = bearing_range_measure(&x, 0, 2).unwrap();
        assert!((o.mean[0] - PI / 4.0).abs() < 1e-15);
        assert!((o.mean[1] - 1000.0 * 2f64.sqrt()).abs() < 1e-9);
        for col in [1, 3, 4] {
            assert_eq!(o.jacobian[(0, col)], 0.0);
            assert_eq!(o.jacobian[(1, col)], 0.0);
        }
    }

    #[test]
    fn origin_is_singular() {
        let x = DVector::zeros(5);
        assert!(matches!(bearing_range_measure(&x, 0, 2), Err(Error::RangeSingularity)));
    }

    #[test]
    fn clutter_density_in_and_out() {
        let c = ClutterSpatialDensity::new(vec![-2.0 * PI, 0.0], vec![2.0 * PI, 2000.0]).unwrap();
        let inside = DVector::from_vec(vec![0.3, 150.0]);
        let outside = DVector::from_vec(vec![0.3, 2500.0]);
        assert!((c.density(&inside) - 1.0 / (8000.0 * PI)).abs() < 1e-18);
        assert_eq!(c.density(&outside), 0.0);
        assert!((c.density(&inside) * c.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_model_matches_direct_formulas() {
        let m = LinearModel::constant_velocity(2, 1.0, 0.5, 2.0);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let t = MotionModel::transition(&m, &x);
        assert_eq!(t.mean, &m.f * &x);
        assert_eq!(t.jacobian, m.f);
        let o = m.observe(&x).unwrap();
        assert_eq!(o.mean, &m.h * &x);
    }
}

//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rtphd::metric::TmParams;
use rtphd::models::{ClutterSpatialDensity, LinearModel};
use rtphd::types::{TrackGaussian, Trajectory};

pub const TOL: f64 = 1e-9;

pub struct Smoothed {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    /// Cross-covariance `Cov(x_t, x_{t+1})` given all data.
    pub lag_one: Vec<DMatrix<f64>>,
}

/// Textbook Kalman filter followed by the Rauch-Tung-Striebel smoother.
pub fn kalman_rts(model: &LinearModel, m0: &DVector<f64>, p0: &DMatrix<f64>, zs: &[DVector<f64>]) -> Smoothed {
    let (f, q, h, r) = (&model.f, &model.q, &model.h, &model.r);
    let mut filt_m = Vec::new();
    let mut filt_p = Vec::new();
    let mut pred_p = Vec::new();
    let (mut m, mut p) = (m0.clone(), p0.clone());
    for (t, z) in zs.iter().enumerate() {
        if t > 0 {
            m = f * &m;
            p = f * &p * f.transpose() + q;
        }
        pred_p.push(p.clone());
        let s = h * &p * h.transpose() + r;
        let k = &p * h.transpose() * s.try_inverse().unwrap();
        m = &m + &k * (z - h * &m);
        p = (DMatrix::identity(p.nrows(), p.nrows()) - &k * h) * &p;
        filt_m.push(m.clone());
        filt_p.push(p.clone());
    }
    let n = zs.len();
    let mut means = filt_m.clone();
    let mut covs = filt_p.clone();
    let mut lag_one = vec![DMatrix::zeros(0, 0); n.saturating_sub(1)];
    for t in (0..n.saturating_sub(1)).rev() {
        let j = &filt_p[t] * f.transpose() * pred_p[t + 1].clone().try_inverse().unwrap();
        means[t] = &filt_m[t] + &j * (&means[t + 1] - f * &filt_m[t]);
        covs[t] = &filt_p[t] + &j * (&covs[t + 1] - &pred_p[t + 1]) * j.transpose();
        lag_one[t] = &j * &covs[t + 1];
    }
    Smoothed { means, covs, lag_one }
}

pub fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = 1.0 + b.amax();
    (a - b).amax() / scale
}

pub fn scenario(steps: usize) -> (LinearModel, DVector<f64>, DMatrix<f64>, Vec<DVector<f64>>) {
    let model = LinearModel::constant_velocity(2, 1.0, 0.5, 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 3.0).unwrap();
    let mut x = DVector::from_vec(vec![10.0, 2.0, -5.0, 1.0]);
    let mut zs = Vec::new();
    for _ in 0..steps {
        zs.push(&model.h * &x + DVector::from_fn(2, |_, _| noise.sample(&mut rng)));
        x = &model.f * &x + DVector::from_vec(vec![0.1, 0.2, -0.1, 0.05]);
    }
    let m0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0]);
    let p0 = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 25.0, 100.0, 25.0]));
    (model, m0, p0, zs)
}

pub fn region() -> ClutterSpatialDensity {
    ClutterSpatialDensity::new(vec![-1e4; 2], vec![1e4; 2]).unwrap()
}

/// Largest relative deviation of window blocks `[start, start + window_len)`
/// from the smoother: means, marginal covariances and lag-one cross-covariances.
pub fn window_error(track: &TrackGaussian, reference: &Smoothed, start: usize) -> f64 {
    let n = track.state_dim;
    let w = track.window_len();
    let mut worst: f64 = 0.0;
    for b in 0..w {
        let t = start + b;
        let mean = track.mean.rows(b * n, n).into_owned();
        worst = worst.max((&mean - &reference.means[t]).amax() / (1.0 + reference.means[t].amax()));
        let cov = track.cov.view((b * n, b * n), (n, n)).into_owned();
        worst = worst.max(max_rel(&cov, &reference.covs[t]));
        if b + 1 < w {
            let cross = track.cov.view((b * n, (b + 1) * n), (n, n)).into_owned();
            worst = worst.max(max_rel(&cross, &reference.lag_one[t]));
        }
    }
    worst
}

pub fn check_window(track: &TrackGaussian, reference: &Smoothed, start: usize) {
    let err = window_error(track, reference, start);
    assert!(err < TOL, "window deviates from the smoother by {err:e}");
}

/// All partial injective maps from `nx` truth indices into `ny` estimate
/// indices, as `map[i] = 0` (unassigned) or `j + 1`.
pub fn all_maps(nx: usize, ny: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..nx {
        let mut next = Vec::new();
        for m in &out {
            for a in 0..=ny {
                if a == 0 || !m.contains(&a) {
                    let mut m2 = m.clone();
                    m2.push(a);
                    next.push(m2);
                }
            }
        }
        out = next;
    }
    out
}

/// Cost of one time step under assignment `map`, straight from the definition.
pub fn step_cost(x: &[Trajectory], y: &[Trajectory], map: &[usize], t: usize, p: &TmParams) -> f64 {
    let half = p.c.powf(p.p) / 2.0;
    let mut cost = 0.0;
    for (i, xi) in x.iter().enumerate() {
        match (map[i], xi.state_at(t)) {
            (0, Some(_)) => cost += half,
            (0, None) => {}
            (a, xs) => match (xs, y[a - 1].state_at(t)) {
                (Some(u), Some(v)) => cost += (u - v).norm().min(p.c).powf(p.p),
                (Some(_), None) | (None, Some(_)) => cost += half,
                (None, None) => {}
            },
        }
    }
    for (j, yj) in y.iter().enumerate() {
        if yj.exists_at(t) && !map.contains(&(j + 1)) {
            cost += half;
        }
    }
    cost
}

pub fn switch_cost(a: &[usize], b: &[usize], p: &TmParams) -> f64 {
    let g = p.gamma.powf(p.p);
    a.iter()
        .zip(b)
        .map(|(&u, &v)| match (u, v) {
            _ if u == v => 0.0,
            (0, _) | (_, 0) => g / 2.0,
            _ => g,
        })
        .sum()
}

/// Minimum over every assignment sequence by exhaustive enumeration.
pub fn brute_force(x: &[Trajectory], y: &[Trajectory], p: &TmParams, horizon: usize) -> f64 {
    let maps = all_maps(x.len(), y.len());
    let costs: Vec<Vec<f64>> = (1..=horizon)
        .map(|t| maps.iter().map(|m| step_cost(x, y, m, t, p)).collect())
        .collect();
    fn rec(t: usize, prev: usize, acc: f64, maps: &[Vec<usize>], costs: &[Vec<f64>], p: &TmParams, best: &mut f64) {
        if t == costs.len() {
            *best = best.min(acc);
            return;
        }
        for (k, m) in maps.iter().enumerate() {
            let sw = if t == 0 { 0.0 } else { switch_cost(&maps[prev], m, p) };
            rec(t + 1, k, acc + costs[t][k] + sw, maps, costs, p, best);
        }
    }
    let mut best = f64::INFINITY;
    rec(0, 0, 0.0, &maps, &costs, p, &mut best);
    best.powf(1.0 / p.p)
}

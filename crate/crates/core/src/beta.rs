//! Beta distribution helpers for the detection-probability part of the mixture.
//!
//! Parameters are kept as `(u, v)` shape pairs because the measurement update
//! increments one of them by exactly one. Densities go through log-gamma so
//! that long-lived tracks with large shape parameters do not overflow.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Shape parameters of a Beta density over a detection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub u: f64,
    pub v: f64,
}

impl BetaParams {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Uniform density on `[0, 1]`.
    pub const fn uniform() -> Self {
        Self { u: 1.0, v: 1.0 }
    }

    pub fn is_valid(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.u > 0.0 && self.v > 0.0
    }

    pub fn mean(&self) -> f64 {
        beta_mean(*self)
    }

    pub fn variance(&self) -> f64 {
        let s = self.u + self.v;
        self.u * self.v / (s * s * (s + 1.0))
    }

    /// Parameters after a missed detection, `(u, v + 1)`.
    pub fn missed(&self) -> Self {
        Self::new(self.u, self.v + 1.0)
    }

    /// Parameters after a detection, `(u + 1, v)`.
    pub fn detected(&self) -> Self {
        Self::new(self.u + 1.0, self.v)
    }
}

pub fn ln_beta_fn(u: f64, v: f64) -> f64 {
    ln_gamma(u) + ln_gamma(v) - ln_gamma(u + v)
}

/// Beta density `y^(u-1) (1-y)^(v-1) / B(u, v)`.
pub fn beta_pdf(y: f64, p: BetaParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(y));
    }
    // Boundary values need the exponent-zero convention 0^0 = 1.
    let log_term = |base: f64, exponent: f64| {
        if exponent == 0.0 {
            0.0
        } else {
            exponent * base.ln()
        }
    };
    let log_density = log_term(y, p.u - 1.0) + log_term(1.0 - y, p.v - 1.0) - ln_beta_fn(p.u, p.v);
    Ok(log_density.exp())
}

pub fn beta_mean(p: BetaParams) -> f64 {
    p.u / (p.u + p.v)
}

/// Returns `(psi0, psi1)` = `(B(u, v+1) / B(u, v), B(u+1, v) / B(u, v))`.
///
/// The larger ratio is evaluated by division and the smaller one as its
/// complement, which makes `psi0 + psi1 == 1.0` hold exactly in floating point.
pub fn psi_pair(p: BetaParams) -> (f64, f64) {
    let s = p.u + p.v;
    if p.u >= p.v {
        let psi1 = p.u / s;
        (1.0 - psi1, psi1)
    } else {
        let psi0 = p.v / s;
        (psi0, 1.0 - psi0)
    }
}

/// Misdetection factor `v / (u + v)`.
pub fn psi0(p: BetaParams) -> f64 {
    psi_pair(p).0
}

/// Detection factor `u / (u + v)`.
pub fn psi1(p: BetaParams) -> f64 {
    psi_pair(p).1
}

/// Moment-matched Beta prediction: keeps the mean and multiplies the variance by `|k_beta|`.
pub fn predict_beta(p: BetaParams, k_beta: f64) -> Result<BetaParams> {
    let s = p.u + p.v;
    let mean = p.u / s;
    let variance = k_beta.abs() * p.u * p.v / (s * s * (s + 1.0));
    let ratio = mean * (1.0 - mean) / variance;
    if !ratio.is_finite() || ratio <= 1.0 || !k_beta.is_finite() {
        return Err(Error::BetaDegenerate { u: p.u, v: p.v, k_beta });
    }
    let concentration = ratio - 1.0;
    Ok(BetaParams::new(concentration * mean, concentration * (1.0 - mean)))
}

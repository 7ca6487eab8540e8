//! Valid space-time correlation functions for the Gaussian component.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters of the isotropic nonseparable Gneiting space-time correlation
///
/// ```text
/// rho(s,t) = tau^(-d*gamma/2) * exp[ -(s/e^alpha_s)^beta_s / tau^(beta_s*gamma/2) ],
/// tau = (t/e^alpha_t)^beta_t + 1,
/// ```
///
/// where `s` is spatial distance (km) and `t` temporal lag (hr). Scale
/// parameters are stored as logs so optimizer box constraints are plain
/// intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GneitingCorrParams {
    /// Log spatial scale (km).
    pub alpha_s: f64,
    /// Log temporal scale (hr).
    pub alpha_t: f64,
    /// Spatial shape, in (0, 2).
    pub beta_s: f64,
    /// Temporal shape, in (0, 2). Fixed to 1 by default upstream.
    pub beta_t: f64,
    /// Separability, in (0, 1): near 1 means highly nonseparable.
    pub gamma: f64,
}

/// Spatial dimension of the Gneiting family used here.
pub const GNEITING_DIM: f64 = 2.0;

impl GneitingCorrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_s > 0.0 && self.beta_s < 2.0) {
            return Err(Error::domain(format!("beta_s {} outside (0,2)", self.beta_s)));
        }
        if !(self.beta_t > 0.0 && self.beta_t < 2.0) {
            return Err(Error::domain(format!("beta_t {} outside (0,2)", self.beta_t)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::domain(format!("gamma {} outside (0,1)", self.gamma)));
        }
        if !self.alpha_s.is_finite() || !self.alpha_t.is_finite() {
            return Err(Error::domain("non-finite scale parameter"));
        }
        Ok(())
    }
}

/// Evaluate the Gneiting correlation at spatial distance `s` >= 0 km and
/// time lag `t` >= 0 hr.
pub fn gneiting_corr(p: &GneitingCorrParams, s: f64, t: f64) -> Result<f64> {
    p.validate()?;
    if s < 0.0 || t < 0.0 {
        return Err(Error::domain(format!("negative lag ({s}, {t})")));
    }
    Ok(gneiting_corr_unchecked(p, s, t))
}

/// As [`gneiting_corr`] but skipping parameter validation; used in inner
/// loops after a single upfront check.
#[inline]
pub fn gneiting_corr_unchecked(p: &GneitingCorrParams, s: f64, t: f64) -> f64 {
    let tau = (t / p.alpha_t.exp()).powf(p.beta_t) + 1.0;
    let spatial = (s / p.alpha_s.exp()).powf(p.beta_s);
    tau.powf(-GNEITING_DIM * p.gamma / 2.0) * (-spatial / tau.powf(p.beta_s * p.gamma / 2.0)).exp()
}

/// Exponential correlation `exp(-h/lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpCorrParams {
    /// Range parameter; the effective range (decay to e^-3) is `3*lambda`.
    pub lambda: f64,
}

impl ExpCorrParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("lambda {lambda} must be positive")));
        }
        Ok(Self { lambda })
    }
}

pub fn exp_corr(p: &ExpCorrParams, h: f64) -> f64 {
    (-h.max(0.0) / p.lambda).exp()
}

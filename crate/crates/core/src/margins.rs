//! Per-station semiparametric marginal model and the transformation to the
//! unit Fréchet scale.
//!
//! Below a high threshold `u` the distribution is the empirical CDF (with
//! the n/(n+1) convention so it stays strictly below 1); above `u` the tail
//! is a fitted generalized Pareto distribution. The composite CDF feeds
//! `z = -1/log F(x)`, which standardizes observations to unit Fréchet.

use crate::error::{Error, Result};
use crate::numeric::quantile;
use crate::optim::{self, OptimOptions};
use serde::{Deserialize, Serialize};

/// CDF clamp bound applied before log transforms.
pub const CDF_EPS: f64 = 1e-12;

/// Generalized Pareto parameters for threshold excesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    /// Scale, in the units of the data.
    pub sigma: f64,
    /// Shape.
    pub xi: f64,
}

impl GpdParams {
    pub fn new(sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !xi.is_finite() {
            return Err(Error::domain(format!("invalid GPD parameters ({sigma}, {xi})")));
        }
        Ok(Self { sigma, xi })
    }

    /// Upper endpoint of the support: `sigma/|xi|` for `xi < 0`, infinite
    /// otherwise.
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < 0.0 {
            self.sigma / (-self.xi)
        } else {
            f64::INFINITY
        }
    }
}

/// GPD distribution function `H(y) = 1 - (1 + xi*y/sigma)^(-1/xi)` for an
/// excess `y >= 0`, with the exponential limit at `xi = 0`.
pub fn gpd_cdf(p: &GpdParams, y: f64) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::domain(format!("negative excess {y}")));
    }
    if p.xi < 0.0 && y > p.upper_endpoint() {
        return Err(Error::domain(format!(
            "excess {y} beyond finite endpoint {}",
            p.upper_endpoint()
        )));
    }
    if p.xi.abs() < 1e-12 {
        Ok(1.0 - (-y / p.sigma).exp())
    } else {
        let t = 1.0 + p.xi * y / p.sigma;
        Ok(1.0 - t.max(0.0).powf(-1.0 / p.xi))
    }
}

/// GPD log-density at an excess `y > 0` (used by the fitter and tests).
pub fn gpd_logpdf(p: &GpdParams, y: f64) -> f64 {
    if p.xi.abs() < 1e-12 {
        -p.sigma.ln() - y / p.sigma
    } else {
        let t = 1.0 + p.xi * y / p.sigma;
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -p.sigma.ln() - (1.0 + 1.0 / p.xi) * t.ln()
    }
}

/// Negative GPD log-likelihood in the `(log sigma, xi)` parameterization.
fn gpd_nll(excesses: &[f64], log_sigma: f64, xi: f64) -> Result<f64> {
    let sigma = log_sigma.exp();
    let mut nll = excesses.len() as f64 * log_sigma;
    if xi.abs() < 1e-12 {
        for &y in excesses {
            nll += y / sigma;
        }
    } else {
        for &y in excesses {
            let t = 1.0 + xi * y / sigma;
            if t <= 0.0 {
                return Err(Error::evaluation(format!(
                    "excess {y} outside support at (sigma={sigma}, xi={xi})"
                )));
            }
            nll += (1.0 + 1.0 / xi) * t.ln();
        }
    }
    Ok(nll)
}

/// Probability-weighted-moment initializer (Hosking–Wallis).
fn pwm_init(excesses: &[f64]) -> (f64, f64) {
    let n = excesses.len();
    let mut sorted = excesses.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let b0: f64 = sorted.iter().sum::<f64>() / n as f64;
    // alpha_1 = E{Y (1-F(Y))}, plotting position (i - 0.35)/n.
    let mut a1 = 0.0;
    for (i, &y) in sorted.iter().enumerate() {
        let p = (i as f64 + 1.0 - 0.35) / n as f64;
        a1 += y * (1.0 - p);
    }
    a1 /= n as f64;
    // For the GPD: alpha_0 = sigma/(1-xi), alpha_1 = sigma/(2(2-xi)).
    let r = b0 / a1;
    let xi = (r - 4.0) / (r - 2.0);
    let xi = xi.clamp(-0.8, 1.5);
    let sigma = (b0 * (1.0 - xi)).max(1e-10 * b0.max(1e-300));
    (sigma, xi)
}

/// Bounds on the shape during fitting; unconstrained `xi` near -1
/// destabilizes the likelihood.
pub const XI_BOUNDS: (f64, f64) = (-0.9, 2.0);

/// Fit a GPD to positive excesses by numerical maximum likelihood.
///
/// Optimizes in `(log sigma, xi)` with `xi` boxed to [`XI_BOUNDS`], starting
/// from probability-weighted moments. Requires at least 10 excesses.
pub fn fit_gpd(excesses: &[f64]) -> Result<GpdParams> {
    if excesses.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 excesses, got {}",
            excesses.len()
        )));
    }
    if excesses.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
        return Err(Error::domain("excesses must be positive and finite"));
    }
    let mean = excesses.iter().sum::<f64>() / excesses.len() as f64;
    let var = excesses
        .iter()
        .map(|&y| (y - mean) * (y - mean))
        .sum::<f64>()
        / excesses.len() as f64;
    if var < 1e-24 * mean * mean {
        // All excesses (numerically) equal: the likelihood is unbounded as
        // xi -> -1 with sigma -> mean.
        return Err(Error::NoConvergence {
            message: "degenerate sample: all excesses equal, xi at the -1 boundary".into(),
            last: vec![mean.ln(), -1.0],
        });
    }

    let (sigma0, xi0) = pwm_init(excesses);
    let x0 = [sigma0.ln(), xi0.clamp(XI_BOUNDS.0 + 0.05, XI_BOUNDS.1 - 0.05)];
    let lo_ls = (mean * 1e-6).ln();
    let hi_ls = (mean * 1e6).ln();
    let bounds = [(lo_ls, hi_ls), XI_BOUNDS];
    let obj = |x: &[f64]| gpd_nll(excesses, x[0], x[1]);
    let nll0 = obj(&x0)?;
    let opts = OptimOptions {
        tol_grad: 1e-8,
        ..Default::default()
    };
    let res = optim::minimize_box(obj, &x0, &bounds, &opts)?;
    if !res.converged() && res.value > nll0 {
        return Err(Error::NoConvergence {
            message: "GPD likelihood maximization failed".into(),
            last: res.x,
        });
    }
    GpdParams::new(res.x[0].exp(), res.x[1])
}

/// Score of the GPD log-likelihood at `(sigma, xi)`, scaled by 1/n.
///
/// Used to confirm the MLE is a stationary point.
pub fn gpd_score_norm(p: &GpdParams, excesses: &[f64]) -> f64 {
    let f = |x: &[f64]| gpd_nll(excesses, x[0], x[1]);
    let g = optim::fd_gradient(&f, &[p.sigma.ln(), p.xi], 1e-7).unwrap_or(vec![f64::NAN; 2]);
    (g[0] * g[0] + g[1] * g[1]).sqrt() / excesses.len() as f64
}

/// Fitted semiparametric marginal model for one station.
#[derive(Debug, Clone)]
pub struct MarginalTransform {
    /// Threshold in data units.
    pub threshold: f64,
    /// Exceedance probability at the threshold.
    pub zeta_u: f64,
    pub gpd: GpdParams,
    /// Sorted observations backing the empirical CDF.
    pub sorted_sample: Vec<f64>,
}

/// Serialization form of a fitted transform (`u, zeta_u, sigma, xi, n`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalTransformRecord {
    pub u: f64,
    pub zeta_u: f64,
    pub sigma: f64,
    pub xi: f64,
    pub n: usize,
}

impl MarginalTransform {
    /// Fit the marginal model with the threshold at the given quantile of
    /// the observed sample (default 0.97 upstream). Ties at the threshold
    /// count as non-exceedances.
    pub fn fit(series: &[f64], threshold_quantile: f64) -> Result<Self> {
        let mut sorted: Vec<f64> = series.iter().copied().filter(|v| v.is_finite()).collect();
        if sorted.len() < 20 {
            return Err(Error::InsufficientData(format!(
                "need at least 20 finite observations, got {}",
                sorted.len()
            )));
        }
        if !(threshold_quantile > 0.5 && threshold_quantile < 1.0) {
            return Err(Error::domain(format!(
                "threshold quantile {threshold_quantile} outside (0.5, 1)"
            )));
        }
        sorted.sort_by(|a, b| a.total_cmp(b));
        let threshold = quantile(&sorted, threshold_quantile);
        let excesses: Vec<f64> = sorted
            .iter()
            .filter(|&&v| v > threshold)
            .map(|&v| v - threshold)
            .collect();
        if excesses.is_empty() {
            return Err(Error::InsufficientData(
                "no exceedances above the threshold (constant series?)".into(),
            ));
        }
        let gpd = fit_gpd(&excesses)?;
        let n = sorted.len() as f64;
        // zeta_u is taken from the n/(n+1) empirical CDF at u so the
        // composite CDF is exactly continuous at the threshold; it agrees
        // with the raw count proportion within one count.
        let n_below = sorted.iter().filter(|&&v| v <= threshold).count() as f64;
        let zeta_u = 1.0 - n_below / (n + 1.0);
        Ok(Self {
            threshold,
            zeta_u,
            gpd,
            sorted_sample: sorted,
        })
    }

    pub fn record(&self) -> MarginalTransformRecord {
        MarginalTransformRecord {
            u: self.threshold,
            zeta_u: self.zeta_u,
            sigma: self.gpd.sigma,
            xi: self.gpd.xi,
            n: self.sorted_sample.len(),
        }
    }

    /// Empirical CDF with the n/(n+1) convention: rank/(n+1).
    pub fn empirical_cdf(&self, x: f64) -> f64 {
        let rank = self.sorted_sample.partition_point(|&v| v <= x);
        rank as f64 / (self.sorted_sample.len() as f64 + 1.0)
    }

    /// Composite semiparametric CDF: empirical below the threshold, GPD tail
    /// above, clamped to `[CDF_EPS, 1 - CDF_EPS]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let f = if x <= self.threshold {
            self.empirical_cdf(x)
        } else {
            let y = x - self.threshold;
            let tail = if self.gpd.xi.abs() < 1e-12 {
                (-y / self.gpd.sigma).exp()
            } else {
                let t = 1.0 + self.gpd.xi * y / self.gpd.sigma;
                t.max(0.0).powf(-1.0 / self.gpd.xi)
            };
            1.0 - self.zeta_u * tail
        };
        f.clamp(CDF_EPS, 1.0 - CDF_EPS)
    }

    /// Transform a series to the unit Fréchet scale: `z = -1/log F(x)`.
    /// Non-finite (missing) entries pass through unchanged.
    pub fn to_unit_frechet(&self, series: &[f64]) -> Vec<f64> {
        series
            .iter()
            .map(|&x| if x.is_finite() { -1.0 / self.cdf(x).ln() } else { x })
            .collect()
    }

    /// Exact inverse of the fitted tail for `z` above the threshold image;
    /// used for round-trip checks and back-transformation of tail values.
    pub fn invert_tail(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::domain(format!("Fréchet value {z} must be positive")));
        }
        let f = (-1.0 / z).exp();
        let s = (1.0 - f) / self.zeta_u; // GPD survival at the excess
        if s >= 1.0 {
            return Err(Error::domain(format!("{z} maps below the threshold")));
        }
        let y = if self.gpd.xi.abs() < 1e-12 {
            -self.gpd.sigma * s.ln()
        } else {
            self.gpd.sigma / self.gpd.xi * (s.powf(-self.gpd.xi) - 1.0)
        };
        Ok(self.threshold + y)
    }
}

//! Asymptotic relative efficiency of the pairwise likelihood estimator in
//! AR(1)/MA(1) models, and empirical verification of the sandwich variance.
//!
//! With a single station only positive lags contribute. The per-time score
//! is `U_t = sum_{h in K} d/d lambda log f(z_t, z_{t+h})` with bivariate
//! normal pair densities; the estimator's asymptotic variance is the
//! sandwich `K / (J^2 T)` and the ARE divides the MLE variance
//! `(1 - lambda^2)/T` by it.

use crate::error::{Error, Result};
use crate::numeric::{mean, sample_variance, KahanSum};
use crate::rng::replicate_rng;
use crate::simulate::{simulate_ar1, simulate_ma1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Time-series models of the efficiency study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TsModel {
    Ar1,
    Ma1,
}

impl TsModel {
    /// Marginal variance and its lambda-derivative.
    fn variance(&self, lambda: f64, sigma: f64) -> (f64, f64) {
        match self {
            TsModel::Ar1 => {
                let d = 1.0 - lambda * lambda;
                (sigma * sigma / d, 2.0 * sigma * sigma * lambda / (d * d))
            }
            TsModel::Ma1 => (
                sigma * sigma * (1.0 + lambda * lambda),
                2.0 * sigma * sigma * lambda,
            ),
        }
    }

    /// Lag-h autocorrelation and its lambda-derivative.
    fn acf(&self, lambda: f64, h: u32) -> (f64, f64) {
        match self {
            TsModel::Ar1 => {
                let r = lambda.powi(h as i32);
                let dr = if h == 0 {
                    0.0
                } else {
                    h as f64 * lambda.powi(h as i32 - 1)
                };
                (r, dr)
            }
            TsModel::Ma1 => {
                if h == 0 {
                    (1.0, 0.0)
                } else if h == 1 {
                    let d = 1.0 + lambda * lambda;
                    (lambda / d, (1.0 - lambda * lambda) / (d * d))
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    pub fn simulate(&self, lambda: f64, sigma: f64, t_len: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
        match self {
            TsModel::Ar1 => simulate_ar1(lambda, sigma, 0.0, t_len, rng),
            TsModel::Ma1 => simulate_ma1(lambda, sigma, 0.0, t_len, rng),
        }
    }
}

/// Bivariate normal pair log-density at lag `h` (centered series) and its
/// analytic lambda-derivative.
pub fn gaussian_pair_loglik(
    model: TsModel,
    lambda: f64,
    sigma: f64,
    z1: f64,
    z2: f64,
    h: u32,
) -> Result<(f64, f64)> {
    if !(lambda.abs() < 1.0) {
        return Err(Error::domain(format!("|lambda| = {} must be < 1", lambda.abs())));
    }
    let (v, dv) = model.variance(lambda, sigma);
    let (r, dr) = model.acf(lambda, h);
    let omr2 = 1.0 - r * r;
    let q = z1 * z1 - 2.0 * r * z1 * z2 + z2 * z2;
    let lp = -(2.0 * std::f64::consts::PI).ln() - v.ln() - 0.5 * omr2.ln()
        - q / (2.0 * v * omr2);
    let dlp_dv = -1.0 / v + q / (2.0 * v * v * omr2);
    let dlp_dr =
        r / omr2 - ((-2.0 * z1 * z2) * omr2 + 2.0 * r * q) / (2.0 * v * omr2 * omr2);
    Ok((lp, dlp_dv * dv + dlp_dr * dr))
}

/// Pair log-density and its score in `(lambda, log sigma)`.
///
/// The efficiency study scores both parameters jointly: the scale channel
/// absorbs the variance information, and the lambda component of the joint
/// sandwich is what attains full efficiency at lag one.
fn gaussian_pair_score(
    model: TsModel,
    lambda: f64,
    sigma: f64,
    z1: f64,
    z2: f64,
    h: u32,
) -> (f64, [f64; 2]) {
    let (v, dv) = model.variance(lambda, sigma);
    let (r, dr) = model.acf(lambda, h);
    let omr2 = 1.0 - r * r;
    let q = z1 * z1 - 2.0 * r * z1 * z2 + z2 * z2;
    let lp = -(2.0 * std::f64::consts::PI).ln() - v.ln() - 0.5 * omr2.ln()
        - q / (2.0 * v * omr2);
    let dlp_dv = -1.0 / v + q / (2.0 * v * v * omr2);
    let dlp_dr =
        r / omr2 - ((-2.0 * z1 * z2) * omr2 + 2.0 * r * q) / (2.0 * v * omr2 * omr2);
    // d v / d log sigma = 2 v for both models; r is sigma-free.
    (lp, [dlp_dv * dv + dlp_dr * dr, dlp_dv * 2.0 * v])
}

/// Classical asymptotic variance of the MLE of lambda: `(1 - lambda^2)/T`
/// for both the AR(1) and the invertible MA(1).
pub fn mle_avar(_model: TsModel, lambda: f64, t_len: usize) -> Result<f64> {
    if !(lambda.abs() < 1.0) {
        return Err(Error::domain(format!("|lambda| = {} must be < 1", lambda.abs())));
    }
    Ok((1.0 - lambda * lambda) / t_len as f64)
}

/// Per-time score vectors `U_t` in `(lambda, log sigma)` over complete lag
/// windows.
fn scores(model: TsModel, lambda: f64, sigma: f64, z: &[f64], lags: &[u32]) -> Vec<[f64; 2]> {
    let max_k = *lags.iter().max().unwrap() as usize;
    let t_eff = z.len() - max_k;
    let mut out = Vec::with_capacity(t_eff);
    for t in 0..t_eff {
        let mut u = [0.0; 2];
        for &h in lags {
            let (_, d) = gaussian_pair_score(model, lambda, sigma, z[t], z[t + h as usize], h);
            u[0] += d[0];
            u[1] += d[1];
        }
        out.push(u);
    }
    out
}

fn inv2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

/// `(J^{-1} K J^{-T})_{00}` of the 2x2 sandwich.
fn sandwich_lambda_component(j: [[f64; 2]; 2], k: [[f64; 2]; 2]) -> f64 {
    let ji = inv2(j);
    // row 0 of J^{-1}
    let a = [ji[0][0], ji[0][1]];
    let mut out = 0.0;
    for p in 0..2 {
        for q in 0..2 {
            out += a[p] * k[p][q] * a[q];
        }
    }
    out
}

/// Sandwich estimate of the pairwise estimator's asymptotic variance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SandwichEstimate {
    /// Lambda-lambda entry of `J = E(-grad U_t)`.
    pub j: f64,
    /// Lambda-lambda entry of the long-run score covariance `K`.
    pub k: f64,
    /// Lambda component of `J^{-1} K J^{-T} / T`.
    pub avar: f64,
    /// Jackknife (over series) standard error of the implied ARE.
    pub are_se: f64,
    /// Mean per-time lambda-score; near zero at the truth.
    pub mean_score: f64,
    pub mean_score_se: f64,
}

type SeriesStat = ([f64; 2], [[f64; 2]; 2], [f64; 2]);

/// Estimate the 2x2 `J` and `K` of the joint `(lambda, log sigma)` score by
/// Monte Carlo over `n_mc` independent series of length `t_len`, and return
/// the sandwich variance of the pairwise estimator of lambda. `lags` must
/// contain positive lags only.
pub fn sandwich_avar(
    model: TsModel,
    lambda: f64,
    sigma: f64,
    lags: &[u32],
    t_len: usize,
    n_mc: usize,
    seed: u64,
) -> Result<SandwichEstimate> {
    if lags.is_empty() || lags.contains(&0) {
        return Err(Error::domain(
            "lag set must be nonempty and contain positive lags only",
        ));
    }
    if n_mc < 8 {
        return Err(Error::domain("need at least 8 MC series"));
    }
    if !(lambda.abs() < 1.0) {
        return Err(Error::domain(format!("|lambda| = {} must be < 1", lambda.abs())));
    }
    let max_k = *lags.iter().max().unwrap() as usize;
    if t_len < max_k + 32 {
        return Err(Error::domain(format!(
            "series length {t_len} too short for max lag {max_k}"
        )));
    }
    let delta = 1e-5 * (1.0 - lambda.abs()).min(0.5);

    // Per series: mean score vector, mean -grad U (2x2), total score/sqrt(T').
    let per_series: Vec<SeriesStat> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            let z = model.simulate(lambda, sigma, t_len, &mut rng);
            let u0 = scores(model, lambda, sigma, &z, lags);
            let upl = scores(model, lambda + delta, sigma, &z, lags);
            let uml = scores(model, lambda - delta, sigma, &z, lags);
            let ups = scores(model, lambda, sigma * (1.0 + delta), &z, lags);
            let ums = scores(model, lambda, sigma * (1.0 - delta), &z, lags);
            // d log sigma steps: log(sigma(1 +- delta)) ~ log sigma +- delta.
            let dls = (1.0f64 + delta).ln() - 0.0;
            let dls_m = -(1.0f64 - delta).ln();
            let t_eff = u0.len() as f64;
            let mut su = [KahanSum::new(), KahanSum::new()];
            let mut sj = [[KahanSum::new(), KahanSum::new()], [KahanSum::new(), KahanSum::new()]];
            for t in 0..u0.len() {
                for a in 0..2 {
                    su[a].add(u0[t][a]);
                    sj[a][0].add(-(upl[t][a] - uml[t][a]) / (2.0 * delta));
                    sj[a][1].add(-(ups[t][a] - ums[t][a]) / (dls + dls_m));
                }
            }
            let mean_u = [su[0].value() / t_eff, su[1].value() / t_eff];
            let j = [
                [sj[0][0].value() / t_eff, sj[0][1].value() / t_eff],
                [sj[1][0].value() / t_eff, sj[1][1].value() / t_eff],
            ];
            let tot = [
                su[0].value() / t_eff.sqrt(),
                su[1].value() / t_eff.sqrt(),
            ];
            (mean_u, j, tot)
        })
        .collect();

    let t_eff = (t_len - max_k) as f64;
    let g = n_mc as f64;
    let are_of = |skip: Option<usize>| -> (f64, f64, f64) {
        let mut j = [[0.0f64; 2]; 2];
        let mut k = [[0.0f64; 2]; 2];
        let mut n = 0.0;
        for (i, (_, js, tot)) in per_series.iter().enumerate() {
            if skip == Some(i) {
                continue;
            }
            n += 1.0;
            for a in 0..2 {
                for b in 0..2 {
                    j[a][b] += js[a][b];
                    k[a][b] += tot[a] * tot[b];
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                j[a][b] /= n;
                k[a][b] /= n;
            }
        }
        let avar = sandwich_lambda_component(j, k) / t_eff;
        ((1.0 - lambda * lambda) / t_eff / avar, j[0][0], k[0][0])
    };

    let (are_full, j00, k00) = are_of(None);
    let avar = (1.0 - lambda * lambda) / t_eff / are_full;
    let mut ssq = 0.0;
    for i in 0..n_mc {
        let (are_i, _, _) = are_of(Some(i));
        ssq += (are_i - are_full) * (are_i - are_full);
    }
    let are_se = ((g - 1.0) / g * ssq).sqrt();

    let mean_scores: Vec<f64> = per_series.iter().map(|p| p.0[0]).collect();
    Ok(SandwichEstimate {
        j: j00,
        k: k00,
        avar,
        are_se,
        mean_score: mean(&mean_scores),
        mean_score_se: (sample_variance(&mean_scores) / g).sqrt(),
    })
}

/// One point of the efficiency curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreResult {
    pub model: TsModel,
    pub family: crate::likelihood::LagSetKind,
    /// Number of (nonzero) lags in the set.
    pub k: u32,
    pub lags: Vec<u32>,
    pub are: f64,
    pub mc_se: f64,
    pub j: f64,
    pub k_var: f64,
}

/// ARE of the maximum pairwise likelihood estimator relative to the MLE,
/// as a function of the lag-set size within a family.
pub fn are_curve(
    model: TsModel,
    family: crate::likelihood::LagSetKind,
    k_max: u32,
    lambda: f64,
    sigma: f64,
    t_len: usize,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<AreResult>> {
    let mut out = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let lags = crate::likelihood::family_lags(family, k, 2.0)?;
        let sw = sandwich_avar(model, lambda, sigma, &lags, t_len, n_mc, seed)?;
        let t_eff = t_len - *lags.iter().max().unwrap() as usize;
        let are = mle_avar(model, lambda, t_eff)? / sw.avar;
        out.push(AreResult {
            model,
            family,
            k,
            lags,
            are,
            mc_se: sw.are_se,
            j: sw.j,
            k_var: sw.k,
        });
    }
    Ok(out)
}

//! Nonparametric censored estimators of pairwise and trivariate extremal
//! coefficients with confidence intervals.
//!
//! The estimators use the max-stable identity `Pr{all <= u} = exp(-theta/u)`
//! on the unit Fréchet scale: `theta-hat = -u log p-hat` with `p-hat` the
//! proportion of tuples entirely below the threshold. Confidence intervals
//! are delta-method on `log p-hat`, with the effective sample size deflated
//! by a batch-means variance inflation factor to account for temporal
//! dependence.

use crate::error::{Error, Result};
use crate::panel::SpaceTimePanel;
use serde::{Deserialize, Serialize};

/// Default batch length for the dependence-adjusted CI.
pub const DEFAULT_BATCH: usize = 48;

/// A censored extremal-coefficient estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffEstimate {
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Dependence-adjusted effective tuple count.
    pub n_effective: f64,
    /// Contributing tuple count.
    pub n_pairs: usize,
    pub lag: u32,
    /// Set when `p-hat = 0` forced the estimate to its upper cap.
    pub at_bound: bool,
}

/// Batch-means variance inflation factor of a binary sequence relative to
/// i.i.d. binomial sampling; at least 1.
fn variance_inflation(indicators: &[f64], batch: usize) -> f64 {
    let n = indicators.len();
    if n < 2 * batch || batch < 2 {
        return 1.0;
    }
    let p = indicators.iter().sum::<f64>() / n as f64;
    let base = p * (1.0 - p);
    if base <= 0.0 {
        return 1.0;
    }
    let n_batches = n / batch;
    let mut means = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let sl = &indicators[b * batch..(b + 1) * batch];
        means.push(sl.iter().sum::<f64>() / batch as f64);
    }
    let bm = crate::numeric::mean(&means);
    let bv = means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (means.len() as f64 - 1.0);
    // Long-run variance of the mean: bv / n_batches vs iid base / n.
    let vif = (bv / n_batches as f64) / (base / n as f64);
    vif.max(1.0)
}

fn theta_from_indicators(
    indicators: &[f64],
    u: f64,
    dim: f64,
    lag: u32,
    batch: usize,
) -> Result<CoeffEstimate> {
    let n = indicators.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "only {n} contributing tuples at lag {lag}"
        )));
    }
    let hits = indicators.iter().sum::<f64>();
    let p = hits / n as f64;
    if p <= 0.0 {
        // No tuple fully below the threshold: the estimate saturates.
        return Ok(CoeffEstimate {
            value: dim,
            ci_lo: 1.0,
            ci_hi: dim,
            n_effective: n as f64,
            n_pairs: n,
            lag,
            at_bound: true,
        });
    }
    let vif = variance_inflation(indicators, batch);
    let n_eff = n as f64 / vif;
    let raw = -u * p.ln();
    let se = u * ((1.0 - p) / (p * n_eff)).sqrt();
    let value = raw.clamp(1.0, dim);
    Ok(CoeffEstimate {
        value,
        ci_lo: (raw - 1.96 * se).clamp(1.0, dim).min(value),
        ci_hi: (raw + 1.96 * se).clamp(1.0, dim).max(value),
        n_effective: n_eff,
        n_pairs: n,
        lag,
        at_bound: false,
    })
}

/// Censored pairwise estimator from two aligned Fréchet-scale series with
/// block labels; pairs `(z1[t], z2[t+h])` within a block only.
pub fn censored_theta2_hat(
    z1: &[f64],
    z2: &[f64],
    blocks: &[i64],
    h: u32,
    u: f64,
    batch: usize,
) -> Result<CoeffEstimate> {
    if z1.len() != z2.len() || z1.len() != blocks.len() {
        return Err(Error::domain("series/blocks length mismatch"));
    }
    if !(u > 0.0) {
        return Err(Error::domain(format!("threshold {u} must be positive")));
    }
    let n = z1.len();
    let hh = h as usize;
    let mut ind = Vec::with_capacity(n.saturating_sub(hh));
    for t in 0..n.saturating_sub(hh) {
        if blocks[t] != blocks[t + hh] {
            continue;
        }
        let (a, b) = (z1[t], z2[t + hh]);
        if a.is_finite() && b.is_finite() {
            ind.push(if a <= u && b <= u { 1.0 } else { 0.0 });
        }
    }
    theta_from_indicators(&ind, u, 2.0, h, batch)
}

/// Censored trivariate estimator: triples `(z1[t], z2[t+l2], z3[t+l3])`.
pub fn censored_theta3_hat(
    z1: &[f64],
    z2: &[f64],
    z3: &[f64],
    blocks: &[i64],
    l2: u32,
    l3: u32,
    u: f64,
    batch: usize,
) -> Result<CoeffEstimate> {
    let n = z1.len();
    if z2.len() != n || z3.len() != n || blocks.len() != n {
        return Err(Error::domain("series/blocks length mismatch"));
    }
    if !(u > 0.0) {
        return Err(Error::domain(format!("threshold {u} must be positive")));
    }
    let (l2, l3) = (l2 as usize, l3 as usize);
    let max_l = l2.max(l3);
    let mut ind = Vec::with_capacity(n.saturating_sub(max_l));
    for t in 0..n.saturating_sub(max_l) {
        if blocks[t] != blocks[t + l2] || blocks[t] != blocks[t + l3] {
            continue;
        }
        let (a, b, c) = (z1[t], z2[t + l2], z3[t + l3]);
        if a.is_finite() && b.is_finite() && c.is_finite() {
            ind.push(if a <= u && b <= u && c <= u { 1.0 } else { 0.0 });
        }
    }
    theta_from_indicators(&ind, u, 3.0, max_l as u32, batch)
}

/// The full station-grid of pairwise coefficient curves: cell `(r, c)` at
/// lag `h` pairs `Z^c_t` with `Z^r_{t+h}`.
#[derive(Debug, Clone)]
pub struct CoefficientPanel {
    pub n_stations: usize,
    pub max_lag: u32,
    /// Indexed `r * S * (L+1) + c * (L+1) + h`.
    pub cells: Vec<CoeffEstimate>,
    /// First lag whose CI contains 2 ("time to independence"), per (r, c).
    pub indep_lag: Vec<Option<u32>>,
}

impl CoefficientPanel {
    pub fn cell(&self, r: usize, c: usize, h: u32) -> &CoeffEstimate {
        let l = self.max_lag as usize + 1;
        &self.cells[r * self.n_stations * l + c * l + h as usize]
    }

    pub fn indep(&self, r: usize, c: usize) -> Option<u32> {
        self.indep_lag[r * self.n_stations + c]
    }
}

/// Estimate every cell of the station-grid curve panel over lags
/// `0..=max_lag`.
pub fn coefficient_panel(
    panel: &SpaceTimePanel,
    max_lag: u32,
    u: f64,
    batch: usize,
) -> Result<CoefficientPanel> {
    use rayon::prelude::*;
    panel.validate_frechet()?;
    let s = panel.n_stations();
    let series: Vec<Vec<f64>> = (0..s)
        .map(|st| (0..panel.n_times()).map(|t| panel.value(t, st)).collect())
        .collect();
    let cells: Vec<CoeffEstimate> = (0..s * s)
        .into_par_iter()
        .map(|rc| {
            let (r, c) = (rc / s, rc % s);
            let mut out = Vec::with_capacity(max_lag as usize + 1);
            for h in 0..=max_lag {
                if r == c && h == 0 {
                    // A series is completely dependent with itself.
                    out.push(CoeffEstimate {
                        value: 1.0,
                        ci_lo: 1.0,
                        ci_hi: 1.0,
                        n_effective: panel.n_times() as f64,
                        n_pairs: panel.n_times(),
                        lag: 0,
                        at_bound: false,
                    });
                    continue;
                }
                out.push(censored_theta2_hat(
                    &series[c],
                    &series[r],
                    &panel.block_labels,
                    h,
                    u,
                    batch,
                )?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let l = max_lag as usize + 1;
    let indep_lag = (0..s * s)
        .map(|rc| {
            (0..=max_lag).find(|&h| {
                let cell = &cells[rc * l + h as usize];
                cell.ci_lo <= 2.0 && 2.0 <= cell.ci_hi
            })
        })
        .collect();
    Ok(CoefficientPanel {
        n_stations: s,
        max_lag,
        cells,
        indep_lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_rng;
    use rand::Rng;

    fn frechet_series(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                -1.0 / u.max(1e-12).ln()
            })
            .collect()
    }

    /// Fréchet quantile: u with exp(-1/u) = q.
    fn frechet_q(q: f64) -> f64 {
        -1.0 / q.ln()
    }

    #[test]
    fn comonotone_series_estimate_one() {
        let mut rng = master_rng(121);
        let z = frechet_series(50_000, &mut rng);
        let blocks = vec![1i64; z.len()];
        let est = censored_theta2_hat(&z, &z, &blocks, 0, frechet_q(0.95), DEFAULT_BATCH).unwrap();
        assert!(
            est.ci_lo <= 1.0 + 1e-9 && est.value < 1.05,
            "theta2 {} CI [{}, {}]",
            est.value,
            est.ci_lo,
            est.ci_hi
        );
    }

    #[test]
    fn independent_series_estimate_two() {
        let mut rng = master_rng(122);
        let z1 = frechet_series(100_000, &mut rng);
        let z2 = frechet_series(100_000, &mut rng);
        let blocks = vec![1i64; z1.len()];
        let est = censored_theta2_hat(&z1, &z2, &blocks, 0, frechet_q(0.95), DEFAULT_BATCH).unwrap();
        assert!(
            est.ci_lo <= 2.0 && est.value > 1.9,
            "theta2 {} CI [{}, {}]",
            est.value,
            est.ci_lo,
            est.ci_hi
        );
    }

    #[test]
    fn trivariate_identical_and_independent() {
        let mut rng = master_rng(123);
        let z = frechet_series(60_000, &mut rng);
        let blocks = vec![1i64; z.len()];
        let u = frechet_q(0.9);
        let est = censored_theta3_hat(&z, &z, &z, &blocks, 0, 0, u, DEFAULT_BATCH).unwrap();
        assert!(est.value < 1.06, "identical theta3 {}", est.value);

        let a = frechet_series(60_000, &mut rng);
        let b = frechet_series(60_000, &mut rng);
        let c = frechet_series(60_000, &mut rng);
        let est = censored_theta3_hat(&a, &b, &c, &blocks, 0, 0, u, DEFAULT_BATCH).unwrap();
        assert!(
            (est.value - 3.0).abs() < 0.15 || est.ci_hi >= 3.0,
            "independent theta3 {} CI [{}, {}]",
            est.value,
            est.ci_lo,
            est.ci_hi
        );
    }

    #[test]
    fn saturation_flagged_at_bound() {
        // Threshold below every observation: p-hat = 0.
        let z = vec![5.0; 100];
        let blocks = vec![1i64; 100];
        let est = censored_theta2_hat(&z, &z, &blocks, 0, 0.5, DEFAULT_BATCH).unwrap();
        assert!(est.at_bound);
        assert_eq!(est.value, 2.0);
        assert!(est.ci_lo < est.ci_hi);
    }

    #[test]
    fn block_boundaries_and_missing_respected() {
        let mut z = vec![1.0f64; 40];
        z[5] = f64::NAN;
        let blocks: Vec<i64> = (0..40).map(|t| if t < 20 { 1 } else { 2 }).collect();
        let est = censored_theta2_hat(&z, &z, &blocks, 1, 2.0, 4).unwrap();
        // 39 lag-1 slots minus 1 cross-block minus 2 touching the NaN.
        assert_eq!(est.n_pairs, 36);
    }

    #[test]
    fn ci_contains_value() {
        let mut rng = master_rng(124);
        let z1 = frechet_series(5_000, &mut rng);
        let z2: Vec<f64> = z1
            .iter()
            .zip(frechet_series(5_000, &mut rng))
            .map(|(&a, b)| a.max(0.5 * b))
            .collect();
        let blocks = vec![1i64; z1.len()];
        for h in [0u32, 1, 3] {
            let est =
                censored_theta2_hat(&z1, &z2, &blocks, h, frechet_q(0.93), DEFAULT_BATCH).unwrap();
            assert!(est.ci_lo <= est.value && est.value <= est.ci_hi);
            assert!((1.0..=2.0).contains(&est.value));
        }
    }

    #[test]
    fn panel_diagonal_exact_and_lag0_symmetry() {
        let mut rng = master_rng(125);
        let s = 3usize;
        let t = 4_000usize;
        let mut values = Vec::with_capacity(s * t);
        let base: Vec<Vec<f64>> = (0..s).map(|_| frechet_series(t, &mut rng)).collect();
        for ti in 0..t {
            for si in 0..s {
                // Correlated columns: share the first series' extremes.
                let v = if si == 0 {
                    base[0][ti]
                } else {
                    base[si][ti].max(0.7 * base[0][ti])
                };
                values.push(v);
            }
        }
        let panel = SpaceTimePanel::new(
            (0..s).map(|i| format!("S{i}")).collect(),
            (0..s).map(|i| [10.0 * i as f64, 0.0]).collect(),
            (0..t).map(|i| i.to_string()).collect(),
            vec![1; t],
            values,
        )
        .unwrap();
        let cp = coefficient_panel(&panel, 4, frechet_q(0.95), DEFAULT_BATCH).unwrap();
        for r in 0..s {
            let d = cp.cell(r, r, 0);
            assert_eq!(d.value, 1.0);
            assert_eq!((d.ci_lo, d.ci_hi), (1.0, 1.0));
        }
        for r in 0..s {
            for c in 0..s {
                let a = cp.cell(r, c, 0).value;
                let b = cp.cell(c, r, 0).value;
                assert!((a - b).abs() < 1e-12, "({r},{c}): {a} vs {b}");
            }
        }
        // Independence lag exists for weakly dependent pairs.
        assert!(cp.indep(1, 2).is_some());
    }
}

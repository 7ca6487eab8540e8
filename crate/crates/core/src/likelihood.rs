//! Censored pairwise log-likelihood over a space-time panel with
//! configurable time-lag sets — the performance-critical kernel.
//!
//! The log-likelihood sums censored pair contributions over every time `t`,
//! every lag `h` in the set (truncated at the series end), and station pairs
//! with the `(1 - I{s1 >= s2 and h = 0})` deduplication: unordered pairs at
//! lag zero, all ordered pairs (including same-station) at positive lags.
//! Pairs with a missing member or spanning a block boundary are skipped.
//!
//! `(rho, alpha)` depend only on pair geometry, so they are precomputed once
//! per parameter vector into a [`PairTable`] and reused across time. The
//! time sum is evaluated in fixed-size chunks with compensated summation and
//! folded in chunk order, making the value bit-identical for any thread
//! count.

use crate::error::{Error, Result};
use crate::model::{censored_pair_loglik_ra, PairGeometry, SchlatherModelParams};
use crate::numeric::{try_par_sum_indexed, KahanSum};
use crate::optim::Transform;
use crate::panel::SpaceTimePanel;
use serde::{Deserialize, Serialize};

/// Families of time-lag sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LagSetKind {
    /// All lags `{0, 1, ..., K}`.
    All,
    /// `{0}` plus the first `K` Fibonacci lags `1, 2, 3, 5, 8, ...`.
    Fibonacci,
    /// `{0}` plus `floor(a^(k-1))` for `k = 1..K`, deduplicated.
    Powers,
    Explicit,
}

/// A finite, sorted, duplicate-free set of nonnegative time lags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSet {
    pub lags: Vec<u32>,
    pub kind: LagSetKind,
}

impl LagSet {
    pub fn explicit(mut lags: Vec<u32>) -> Self {
        lags.sort_unstable();
        lags.dedup();
        Self {
            lags,
            kind: LagSetKind::Explicit,
        }
    }

    pub fn max_lag(&self) -> u32 {
        self.lags.last().copied().unwrap_or(0)
    }

    /// The positive lags only (drops 0); the single-station pairwise
    /// likelihood has no lag-zero pairs.
    pub fn positive(&self) -> Vec<u32> {
        self.lags.iter().copied().filter(|&h| h > 0).collect()
    }
}

/// Build a lag set of the given family. For `All`, `k` is the maximum lag
/// (`{0, ..., k}`); for `Fibonacci`/`Powers`, `k` is the total element count
/// including the always-present 0. `a` is the power base (only used by
/// `Powers`, must exceed 1).
pub fn make_lag_set(kind: LagSetKind, k: u32, a: f64) -> Result<LagSet> {
    if k < 1 {
        return Err(Error::domain("lag set needs k >= 1"));
    }
    let lags = match kind {
        LagSetKind::All => (0..=k).collect(),
        LagSetKind::Powers | LagSetKind::Fibonacci => {
            let mut v = vec![0u32];
            v.extend(family_lags(kind, k - 1, a)?);
            v.sort_unstable();
            v.dedup();
            v
        }
        LagSetKind::Explicit => {
            return Err(Error::domain("use LagSet::explicit for explicit sets"))
        }
    };
    Ok(LagSet { lags, kind })
}

/// The first `k` nonzero lags of a family, without 0: the time-series form
/// used by the efficiency study (lag-zero pairs do not exist with a single
/// station). `All` gives `{1, ..., k}`.
pub fn family_lags(kind: LagSetKind, k: u32, a: f64) -> Result<Vec<u32>> {
    if k < 1 {
        return Err(Error::domain("family needs k >= 1"));
    }
    match kind {
        LagSetKind::All => Ok((1..=k).collect()),
        LagSetKind::Powers => {
            if !(a > 1.0) {
                return Err(Error::domain(format!("powers base {a} must exceed 1")));
            }
            let mut v: Vec<u32> = (1..=k).map(|i| a.powi(i as i32 - 1).floor() as u32).collect();
            v.sort_unstable();
            v.dedup();
            Ok(v)
        }
        LagSetKind::Fibonacci => {
            // 1, 2, 3, 5, 8, ... (Fibonacci without the duplicate 1).
            let mut v = Vec::with_capacity(k as usize);
            let (mut x, mut y) = (1u32, 2u32);
            for _ in 0..k {
                v.push(x);
                let next = x + y;
                x = y;
                y = next;
            }
            Ok(v)
        }
        LagSetKind::Explicit => Err(Error::domain("explicit sets have no family")),
    }
}

/// Precomputed `(rho, alpha)` per (station pair, lag): the geometry-only
/// part of the likelihood, built once per parameter vector.
#[derive(Debug, Clone)]
pub struct PairTable {
    /// For each lag (aligned with `lags`): entries `(s1, s2, rho, alpha)`.
    /// Lag 0 stores unordered pairs `s1 < s2`; positive lags all ordered
    /// pairs including `s1 == s2`.
    pub lags: Vec<u32>,
    pub entries: Vec<Vec<(usize, usize, f64, f64)>>,
}

impl PairTable {
    pub fn build(
        coords: &[[f64; 2]],
        model: &SchlatherModelParams,
        lags: &LagSet,
    ) -> Result<PairTable> {
        model.validate()?;
        let s = coords.len();
        let mut entries = Vec::with_capacity(lags.lags.len());
        for &h in &lags.lags {
            let mut v = Vec::new();
            if h == 0 {
                for s1 in 0..s {
                    for s2 in (s1 + 1)..s {
                        let g = pair_geometry(coords, s1, s2, 0);
                        let (rho, alpha) = model.rho_alpha(&g)?;
                        v.push((s1, s2, rho, alpha));
                    }
                }
            } else {
                for s1 in 0..s {
                    for s2 in 0..s {
                        let g = pair_geometry(coords, s1, s2, h);
                        let (rho, alpha) = model.rho_alpha(&g)?;
                        v.push((s1, s2, rho, alpha));
                    }
                }
            }
            entries.push(v);
        }
        Ok(PairTable {
            lags: lags.lags.clone(),
            entries,
        })
    }

    /// A table with explicit `(rho, alpha)` for every pair at every lag;
    /// used by tests that pin the dependence structure directly.
    pub fn uniform(n_stations: usize, lags: &LagSet, rho: f64, alpha: f64) -> PairTable {
        let mut entries = Vec::new();
        for &h in &lags.lags {
            let mut v = Vec::new();
            if h == 0 {
                for s1 in 0..n_stations {
                    for s2 in (s1 + 1)..n_stations {
                        v.push((s1, s2, rho, alpha));
                    }
                }
            } else {
                for s1 in 0..n_stations {
                    for s2 in 0..n_stations {
                        v.push((s1, s2, rho, alpha));
                    }
                }
            }
            entries.push(v);
        }
        PairTable {
            lags: lags.lags.clone(),
            entries,
        }
    }
}

/// Geometry of the ordered pair `(z[s1, t], z[s2, t+h])`.
pub fn pair_geometry(coords: &[[f64; 2]], s1: usize, s2: usize, h: u32) -> PairGeometry {
    let ds = [
        coords[s2][0] - coords[s1][0],
        coords[s2][1] - coords[s1][1],
    ];
    PairGeometry::from_lag(ds, h as f64)
}

/// Censored pairwise log-likelihood of the panel under the model, with the
/// Fréchet-scale threshold `u`.
pub fn pairwise_loglik(
    panel: &SpaceTimePanel,
    model: &SchlatherModelParams,
    u: f64,
    lags: &LagSet,
) -> Result<f64> {
    let table = PairTable::build(&panel.coords, model, lags)?;
    pairwise_loglik_with_table(panel, &table, u)
}

/// Likelihood kernel over a prebuilt pair table.
pub fn pairwise_loglik_with_table(
    panel: &SpaceTimePanel,
    table: &PairTable,
    u: f64,
) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::domain(format!("threshold {u} must be positive")));
    }
    panel.validate_frechet()?;
    let t_len = panel.n_times();
    try_par_sum_indexed(t_len, |t| -> Result<f64> {
        let mut acc = KahanSum::new();
        let block = panel.block_labels[t];
        for (li, &h) in table.lags.iter().enumerate() {
            let t2 = t + h as usize;
            if t2 >= t_len || panel.block_labels[t2] != block {
                continue;
            }
            for &(s1, s2, rho, alpha) in &table.entries[li] {
                let z1 = panel.value(t, s1);
                let z2 = panel.value(t2, s2);
                if !(z1.is_finite() && z2.is_finite()) {
                    continue;
                }
                let ll = censored_pair_loglik_ra(z1, z2, u, rho, alpha).map_err(|e| {
                    Error::evaluation(format!(
                        "pair (s1={s1}, s2={s2}, t={t}, h={h}): {e}"
                    ))
                })?;
                acc.add(ll);
            }
        }
        Ok(acc.value())
    })
}

/// Exact number of pair contributions the likelihood would sum, honoring
/// missing values and block boundaries.
pub fn pair_count(panel: &SpaceTimePanel, lags: &LagSet) -> u64 {
    let t_len = panel.n_times();
    let s = panel.n_stations();
    let mut count = 0u64;
    for t in 0..t_len {
        let block = panel.block_labels[t];
        for &h in &lags.lags {
            let t2 = t + h as usize;
            if t2 >= t_len || panel.block_labels[t2] != block {
                continue;
            }
            if h == 0 {
                for s1 in 0..s {
                    if !panel.is_present(t, s1) {
                        continue;
                    }
                    for s2 in (s1 + 1)..s {
                        if panel.is_present(t, s2) {
                            count += 1;
                        }
                    }
                }
            } else {
                for s1 in 0..s {
                    if !panel.is_present(t, s1) {
                        continue;
                    }
                    for s2 in 0..s {
                        if panel.is_present(t2, s2) {
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    count
}

/// Central finite-difference gradient of the pairwise log-likelihood in an
/// unconstrained parameterization.
///
/// `build` maps a constrained parameter vector to model parameters;
/// `transforms` give each coordinate's unconstrained working scale (logs for
/// positive parameters, logits for interval ones). The step is relative on
/// the unconstrained scale.
pub fn gradient_fd<F>(
    panel: &SpaceTimePanel,
    build: F,
    x: &[f64],
    transforms: &[Transform],
    u: f64,
    lags: &LagSet,
    rel_step: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<SchlatherModelParams>,
{
    if transforms.len() != x.len() {
        return Err(Error::domain("transforms/parameter length mismatch"));
    }
    if !(rel_step > 0.0) {
        return Err(Error::domain(format!("step {rel_step} must be positive")));
    }
    let uvec: Vec<f64> = x
        .iter()
        .zip(transforms)
        .map(|(&xi, tr)| tr.to_unconstrained(xi))
        .collect();
    let eval = |uv: &[f64]| -> Result<f64> {
        let xv: Vec<f64> = uv
            .iter()
            .zip(transforms)
            .map(|(&ui, tr)| tr.to_constrained(ui))
            .collect();
        pairwise_loglik(panel, &build(&xv)?, u, lags)
    };
    let mut g = vec![0.0; x.len()];
    let mut work = uvec.clone();
    for i in 0..x.len() {
        let h = rel_step * uvec[i].abs().max(1.0);
        work[i] = uvec[i] + h;
        let fp = eval(&work)?;
        work[i] = uvec[i] - h;
        let fm = eval(&work)?;
        work[i] = uvec[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

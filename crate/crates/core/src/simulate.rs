//! Exact-to-tolerance simulators: Gaussian fields, the random-set
//! max-stable process on the line and in space-time, and AR(1)/MA(1)
//! series.
//!
//! The max-stable simulator realizes `Z(x) = sup_i xi_i c max(0, eps_i(x))
//! I_B(x - X_i)` with `xi_i = 1/Gamma_i` (cumulative standard exponentials),
//! storm centers uniform on the domain dilated by the set extent, and the
//! normalizing constant `c = sqrt(2 pi) |domain~| / E|B|` that makes the
//! margins unit Fréchet. Storms arrive in decreasing intensity, so the
//! process stops once the next possible contribution `xi c M` falls below
//! `eps_sim` times the current grid minimum, `M` bounding the truncated
//! Gaussian sup. The output is exact conditional on no simulated Gaussian
//! exceeding `M`; the diagnostic reports that probability bound.

use crate::correlation::GneitingCorrParams;
use crate::error::{Error, Result};
use crate::randomset::{normal_cdf, CylinderSetParams, IntervalSetParams};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma as GammaDist, Normal, StandardNormal};
use statrs::function::gamma::gamma_ur;

/// Simulation controls shared by the max-stable simulators.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Stopping slack in (0, 0.1]: smaller is stricter.
    pub eps_sim: f64,
    /// Sup bound `M` for the truncated Gaussian argument (>= 3).
    pub gauss_bound: f64,
    /// Hard cap on spectral points before giving up.
    pub max_storms: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            eps_sim: 0.1,
            gauss_bound: 4.0,
            max_storms: 1_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_sim > 0.0 && self.eps_sim <= 0.1) {
            return Err(Error::domain(format!(
                "eps_sim {} outside (0, 0.1]",
                self.eps_sim
            )));
        }
        if !(self.gauss_bound >= 3.0) {
            return Err(Error::domain(format!(
                "gauss_bound {} must be >= 3",
                self.gauss_bound
            )));
        }
        Ok(())
    }
}

/// Stopping diagnostic attached to simulated panels.
#[derive(Debug, Clone, Copy)]
pub struct SimDiagnostic {
    pub n_storms: u64,
    /// Storms that needed a Gaussian draw (the rest were skipped early).
    pub n_gauss_storms: u64,
    /// Upper bound on the expected number of grid evaluations a post-stop
    /// storm could have altered: such storms matter only when a Gaussian
    /// draw exceeds `M / eps_sim` standard deviations, so this is
    /// essentially zero at the default settings.
    pub sup_error_bound: f64,
    /// Potential `xi c M` of the first storm past the stopping rule.
    pub stop_potential: f64,
}

/// Expected number of grid evaluations that storms beyond the stopping
/// index could have changed: `cover_rate * (c/m) * int_{u0}^inf Phi-bar`,
/// with `u0 = M / eps_sim`.
fn post_stop_error_bound(cover_rate: f64, c_over_m: f64, u0: f64) -> f64 {
    let phi = (-0.5 * u0 * u0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail_int = (phi - u0 * normal_cdf(-u0)).max(0.0);
    cover_rate * c_over_m * tail_int
}

// ---------------------------------------------------------------------------
// Gaussian fields
// ---------------------------------------------------------------------------

/// Square-root factor of a correlation matrix via symmetric
/// eigendecomposition with eigenvalue clipping at -1e-10.
pub struct GaussianFactor {
    factor: DMatrix<f64>,
}

impl GaussianFactor {
    pub fn new(corr: &DMatrix<f64>) -> Result<Self> {
        let n = corr.nrows();
        if n > 5000 {
            return Err(Error::domain(format!(
                "dense factorization limited to 5000 points, got {n}"
            )));
        }
        let eig = corr.clone().symmetric_eigen();
        for &l in eig.eigenvalues.iter() {
            if l < -1e-10 {
                return Err(Error::domain(format!(
                    "correlation matrix not PSD: eigenvalue {l}"
                )));
            }
        }
        let mut factor = eig.eigenvectors.clone();
        for j in 0..n {
            let s = eig.eigenvalues[j].max(0.0).sqrt();
            for i in 0..n {
                factor[(i, j)] *= s;
            }
        }
        Ok(Self { factor })
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.nrows() == 0
    }

    pub fn sample(&self, rng: &mut impl Rng, out: &mut [f64]) {
        let n = self.factor.nrows();
        let eta: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for i in 0..n {
            let mut v = 0.0;
            for j in 0..n {
                v += self.factor[(i, j)] * eta[j];
            }
            out[i] = v;
        }
    }
}

/// One zero-mean unit-variance draw with the requested correlation matrix.
pub fn simulate_gaussian(corr: &DMatrix<f64>, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let f = GaussianFactor::new(corr)?;
    let mut out = vec![0.0; f.len()];
    f.sample(rng, &mut out);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Random-set max-stable process on the time axis
// ---------------------------------------------------------------------------

/// Configuration of the one-dimensional study design: exponential
/// correlation with range `lambda`, interval storm sets `[0, 24 delta]`
/// with mean duration `mu`, integer grid `0..t_len`.
#[derive(Debug, Clone, Copy)]
pub struct Interval1dDesign {
    pub t_len: usize,
    pub lambda: f64,
    pub mu: f64,
}

/// Simulate the random-set model on the integer time grid.
pub fn simulate_schlather_interval_1d(
    design: &Interval1dDesign,
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, SimDiagnostic)> {
    cfg.validate()?;
    let set = IntervalSetParams::new(design.mu)?;
    if design.t_len < 2 {
        return Err(Error::domain("grid needs at least 2 points"));
    }
    if !(design.lambda > 0.0) {
        return Err(Error::domain("lambda must be positive"));
    }
    let t_len = design.t_len;
    let beta = Beta::new(10.0, set.beta_b()).map_err(|e| Error::domain(e.to_string()))?;
    // Storm cover [X, X+D] with D <= 24; centers on the exact dilation.
    let span = (t_len - 1) as f64 + 24.0;
    let c = (2.0 * std::f64::consts::PI).sqrt() * span / design.mu;
    let rho1 = (-1.0 / design.lambda).exp();
    let innov = (1.0 - rho1 * rho1).sqrt();

    let mut z = vec![0.0f64; t_len];
    let mut min_z = 0.0f64;
    let mut gamma = 0.0f64;
    let mut n_storms = 0u64;
    let mut n_gauss_storms = 0u64;

    loop {
        gamma += rng.sample::<f64, _>(Exp1);
        let potential = c / gamma * cfg.gauss_bound;
        if potential < cfg.eps_sim * min_z {
            let diag = SimDiagnostic {
                n_storms,
                n_gauss_storms,
                sup_error_bound: post_stop_error_bound(
                    25.0,
                    c / min_z,
                    cfg.gauss_bound / cfg.eps_sim,
                ),
                stop_potential: potential,
            };
            return Ok((z, diag));
        }
        n_storms += 1;
        if n_storms > cfg.max_storms {
            return Err(Error::BudgetExceeded(format!(
                "{} spectral points without meeting the stopping rule",
                cfg.max_storms
            )));
        }
        if n_storms % 512 == 0 {
            min_z = z.iter().cloned().fold(f64::INFINITY, f64::min);
        }
        let x0 = -24.0 + rng.random::<f64>() * span;
        let d = 24.0 * beta.sample(rng);
        let lo = x0.ceil().max(0.0) as usize;
        let hi_f = (x0 + d).floor();
        if hi_f < lo as f64 {
            continue;
        }
        let hi = (hi_f as usize).min(t_len - 1);
        if lo > hi {
            continue;
        }
        // Skip the Gaussian draw when the storm cannot raise any covered
        // point; intensities only decrease, so this is exact.
        let local_min = z[lo..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
        if potential <= local_min {
            continue;
        }
        n_gauss_storms += 1;
        // Exponential correlation on consecutive integers is Markov.
        let scale = c / gamma;
        let mut eps: f64 = rng.sample(StandardNormal);
        z[lo] = z[lo].max(scale * eps.max(0.0));
        for t in (lo + 1)..=hi {
            let e: f64 = rng.sample(StandardNormal);
            eps = rho1 * eps + innov * e;
            z[t] = z[t].max(scale * eps.max(0.0));
        }
    }
}

/// Replicate batch of the 1D design, parallel over derived seeds.
pub fn simulate_interval_1d_batch(
    design: &Interval1dDesign,
    cfg: &SimConfig,
    master_seed: u64,
    n_replicates: usize,
) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::rng::replicate_rng(master_seed, r as u64);
            simulate_schlather_interval_1d(design, cfg, &mut rng).map(|(z, _)| z)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Random-set max-stable process in space-time
// ---------------------------------------------------------------------------

/// Space-time design: a Gneiting-correlated Gaussian inside tilted-cylinder
/// storms, observed at `coords` stations over `t_len` hours.
#[derive(Debug, Clone)]
pub struct SpaceTimeDesign {
    pub coords: Vec<[f64; 2]>,
    pub t_len: usize,
    pub corr: GneitingCorrParams,
    pub set: CylinderSetParams,
    /// Tail mass dropped when truncating the storm extent for center
    /// sampling (bias bound per storm attribute).
    pub extent_tail: f64,
}

fn gamma_quantile(shape: f64, scale: f64, p_upper: f64) -> f64 {
    // Smallest x with survival <= p_upper, by bisection.
    let (mut lo, mut hi) = (0.0f64, scale * shape.max(1.0) * 4.0);
    while gamma_ur(shape, hi / scale) > p_upper {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_ur(shape, mid / scale) > p_upper {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Simulate the cylinder model; returns time-major values `[t * S + s]`.
pub fn simulate_schlather_cylinder(
    design: &SpaceTimeDesign,
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, SimDiagnostic)> {
    cfg.validate()?;
    design.corr.validate()?;
    design.set.validate()?;
    let set = &design.set;
    let s_n = design.coords.len();
    let t_len = design.t_len;
    if s_n == 0 || t_len == 0 {
        return Err(Error::domain("empty design"));
    }
    let q = design.extent_tail.clamp(1e-12, 1e-2);

    // Truncated storm extents for the center-sampling region. The drift
    // dilation is directional: a storm can only reach the stations from
    // upwind of its velocity range.
    let r_max = gamma_quantile(set.k_r, set.theta_r(), q);
    let d_max = gamma_quantile(set.k_d, set.theta_d(), q);
    // Per-component normal quantile at tail q/4.
    let z_q = std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(q / 2.0);
    let (dev1, dev2) = (set.s1sq.sqrt() * z_q, set.s2sq.sqrt() * z_q);
    let (vx_lo, vx_hi) = (set.m_v[0] - dev1, set.m_v[0] + dev1);
    let (vy_lo, vy_hi) = (set.m_v[1] - dev2, set.m_v[1] + dev2);

    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for c in &design.coords {
        x_lo = x_lo.min(c[0]);
        x_hi = x_hi.max(c[0]);
        y_lo = y_lo.min(c[1]);
        y_hi = y_hi.max(c[1]);
    }
    let bx = (
        x_lo - r_max - d_max * vx_hi.max(0.0),
        x_hi + r_max + d_max * (-vx_lo).max(0.0),
    );
    let by = (
        y_lo - r_max - d_max * vy_hi.max(0.0),
        y_hi + r_max + d_max * (-vy_lo).max(0.0),
    );
    let bt = (-d_max, (t_len - 1) as f64);
    let volume = (bx.1 - bx.0) * (by.1 - by.0) * (bt.1 - bt.0);
    let c_norm = (2.0 * std::f64::consts::PI).sqrt() * volume / set.mean_volume();

    let gr = GammaDist::new(set.k_r, set.theta_r()).map_err(|e| Error::domain(e.to_string()))?;
    let gd = GammaDist::new(set.k_d, set.theta_d()).map_err(|e| Error::domain(e.to_string()))?;
    let n1 = Normal::new(0.0, 1.0).unwrap();
    let (sd1, sd2) = (set.s1sq.sqrt(), set.s2sq.sqrt());
    let vrho = set.rho12;

    let mut z = vec![0.0f64; s_n * t_len];
    let mut min_z = 0.0f64;
    let mut gamma = 0.0f64;
    let mut n_storms = 0u64;
    let mut n_gauss_storms = 0u64;
    let mut covered: Vec<(usize, usize)> = Vec::new();

    loop {
        gamma += rng.sample::<f64, _>(Exp1);
        let potential = c_norm / gamma * cfg.gauss_bound;
        if potential < cfg.eps_sim * min_z {
            let diag = SimDiagnostic {
                n_storms,
                n_gauss_storms,
                sup_error_bound: post_stop_error_bound(
                    s_n as f64 * (set.m_d + 1.0),
                    c_norm / min_z,
                    cfg.gauss_bound / cfg.eps_sim,
                ),
                stop_potential: potential,
            };
            return Ok((z, diag));
        }
        n_storms += 1;
        if n_storms > cfg.max_storms {
            return Err(Error::BudgetExceeded(format!(
                "{} spectral points without meeting the stopping rule",
                cfg.max_storms
            )));
        }
        if n_storms % 512 == 0 {
            min_z = z.iter().cloned().fold(f64::INFINITY, f64::min);
        }
        // Marks first, then the center; the draw order is fixed so skipped
        // storms stay reproducible.
        let r: f64 = gr.sample(rng);
        let d: f64 = gd.sample(rng);
        let (e1, e2): (f64, f64) = (n1.sample(rng), n1.sample(rng));
        let v = [
            set.m_v[0] + sd1 * e1,
            set.m_v[1] + sd2 * (vrho * e1 + (1.0 - vrho * vrho).sqrt() * e2),
        ];
        let cx = bx.0 + rng.random::<f64>() * (bx.1 - bx.0);
        let cy = by.0 + rng.random::<f64>() * (by.1 - by.0);
        let ct = bt.0 + rng.random::<f64>() * (bt.1 - bt.0);

        let t_lo = ct.ceil().max(0.0) as usize;
        let t_hi_f = (ct + d).floor();
        if t_hi_f < t_lo as f64 {
            continue;
        }
        let t_hi = (t_hi_f as usize).min(t_len - 1);
        if t_lo > t_hi {
            continue;
        }
        covered.clear();
        let mut local_min = f64::INFINITY;
        for t in t_lo..=t_hi {
            let dt = t as f64 - ct;
            let mx = cx + dt * v[0];
            let my = cy + dt * v[1];
            for (s, c) in design.coords.iter().enumerate() {
                let dx = c[0] - mx;
                let dy = c[1] - my;
                if dx * dx + dy * dy <= r * r {
                    covered.push((s, t));
                    local_min = local_min.min(z[t * s_n + s]);
                }
            }
        }
        if covered.is_empty() || potential <= local_min {
            continue;
        }
        n_gauss_storms += 1;
        let scale = c_norm / gamma;
        if covered.len() == 1 {
            let (s, t) = covered[0];
            let e: f64 = rng.sample(StandardNormal);
            let cell = &mut z[t * s_n + s];
            *cell = cell.max(scale * e.max(0.0));
        } else {
            let k = covered.len();
            let corr = DMatrix::from_fn(k, k, |i, j| {
                let (si, ti) = covered[i];
                let (sj, tj) = covered[j];
                let ds = {
                    let a = design.coords[si];
                    let b = design.coords[sj];
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                };
                crate::correlation::gneiting_corr_unchecked(
                    &design.corr,
                    ds,
                    (ti as f64 - tj as f64).abs(),
                )
            });
            let factor = GaussianFactor::new(&corr)?;
            let mut eps = vec![0.0; k];
            factor.sample(rng, &mut eps);
            for (idx, &(s, t)) in covered.iter().enumerate() {
                let cell = &mut z[t * s_n + s];
                *cell = cell.max(scale * eps[idx].max(0.0));
            }
        }
    }
}

/// Wrap a simulated space-time draw into a panel with integer time labels
/// and a single block.
pub fn cylinder_panel(
    design: &SpaceTimeDesign,
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> Result<(crate::panel::SpaceTimePanel, SimDiagnostic)> {
    let (values, diag) = simulate_schlather_cylinder(design, cfg, rng)?;
    let panel = crate::panel::SpaceTimePanel::new(
        (0..design.coords.len()).map(|i| format!("S{i}")).collect(),
        design.coords.clone(),
        (0..design.t_len).map(|t| t.to_string()).collect(),
        vec![1; design.t_len],
        values,
    )?;
    Ok((panel, diag))
}

// ---------------------------------------------------------------------------
// Simple time series
// ---------------------------------------------------------------------------

/// Stationary AR(1): `(Z_t - mu) = lambda (Z_{t-1} - mu) + eps_t`,
/// initialized from the stationary law.
pub fn simulate_ar1(lambda: f64, sigma: f64, mu: f64, t_len: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(lambda.abs() < 1.0 && sigma > 0.0);
    let mut out = Vec::with_capacity(t_len);
    let mut x = mu + sigma / (1.0 - lambda * lambda).sqrt() * rng.sample::<f64, _>(StandardNormal);
    for _ in 0..t_len {
        out.push(x);
        x = mu + lambda * (x - mu) + sigma * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

/// MA(1): `Z_t = mu + eps_t + lambda eps_{t-1}` (one presample innovation).
pub fn simulate_ma1(lambda: f64, sigma: f64, mu: f64, t_len: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(lambda.abs() < 1.0 && sigma > 0.0);
    let mut out = Vec::with_capacity(t_len);
    let mut prev: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
    for _ in 0..t_len {
        let e = sigma * rng.sample::<f64, _>(StandardNormal);
        out.push(mu + e + lambda * prev);
        prev = e;
    }
    out
}

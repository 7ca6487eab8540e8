//! The Schlather random-set max-stable model: bivariate exponent measure,
//! censored pair density, and pairwise / trivariate extremal coefficients.
//!
//! The bivariate exponent measure is
//!
//! ```text
//! V2(z1,z2) = (1/z1 + 1/z2) {1 - alpha/2 (1 - sqrt(1 - 2(rho+1) z1 z2/(z1+z2)^2))},
//! ```
//!
//! where `rho` is the Gaussian correlation at the pair's space-time lag and
//! `alpha` the normalized expected storm-set overlap. Closed-form partial
//! derivatives feed the censored likelihood; they are validated against a
//! finite-difference oracle on `exp(-V2)` rather than re-derived machinery.

use crate::correlation::{exp_corr, gneiting_corr_unchecked, ExpCorrParams, GneitingCorrParams};
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::randomset::{
    alpha_interval_1d, alpha_spacetime, disc_overlap_area, CylinderSetParams, IntervalSetParams,
};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma as GammaDist, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

/// Spatial distance, absolute time lag and station angle of an ordered pair
/// of space-time points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    /// Spatial separation, km.
    pub s_norm: f64,
    /// Time lag, hr (nonnegative).
    pub t: f64,
    /// Angle of the spatial lag from the west-east axis, radians.
    pub theta: f64,
}

impl PairGeometry {
    pub fn new(s_norm: f64, t: f64, theta: f64) -> Result<Self> {
        if s_norm < 0.0 || t < 0.0 {
            return Err(Error::domain(format!("negative pair lag ({s_norm}, {t})")));
        }
        Ok(Self { s_norm, t, theta })
    }

    /// Geometry of the lag `(ds, dt)` between two space-time points. When
    /// `dt < 0` the whole lag is negated; `alpha(h) = alpha(-h)`.
    pub fn from_lag(ds: [f64; 2], dt: f64) -> Self {
        let (ds, dt) = if dt < 0.0 { ([-ds[0], -ds[1]], -dt) } else { (ds, dt) };
        Self {
            s_norm: (ds[0] * ds[0] + ds[1] * ds[1]).sqrt(),
            t: dt,
            theta: ds[1].atan2(ds[0]),
        }
    }
}

/// A point in space-time with projected km coordinates and time in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn lag_to(&self, other: &SpaceTimePoint) -> ([f64; 2], f64) {
        ([other.x - self.x, other.y - self.y], other.t - self.t)
    }
}

/// Correlation model of the Gaussian component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CorrelationModel {
    Gneiting(GneitingCorrParams),
    /// Isotropic exponential in the combined space-time distance; on a pure
    /// time axis this is `exp(-t/lambda)`.
    Exponential(ExpCorrParams),
}

impl CorrelationModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelationModel::Gneiting(p) => p.validate(),
            CorrelationModel::Exponential(p) => ExpCorrParams::new(p.lambda).map(|_| ()),
        }
    }

    pub fn rho(&self, s_norm: f64, t: f64) -> f64 {
        match self {
            CorrelationModel::Gneiting(p) => gneiting_corr_unchecked(p, s_norm, t),
            CorrelationModel::Exponential(p) => exp_corr(p, (s_norm * s_norm + t * t).sqrt()),
        }
    }
}

/// Random storm-set model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RandomSetModel {
    Cylinder(CylinderSetParams),
    Interval(IntervalSetParams),
}

impl RandomSetModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            RandomSetModel::Cylinder(p) => p.validate(),
            RandomSetModel::Interval(p) => p.validate(),
        }
    }

    pub fn alpha(&self, g: &PairGeometry) -> Result<f64> {
        match self {
            RandomSetModel::Cylinder(p) => alpha_spacetime(p, g.s_norm, g.t, g.theta),
            RandomSetModel::Interval(p) => {
                if g.s_norm > 1e-12 {
                    return Err(Error::domain(
                        "interval random sets live on the time axis; spatial lag must be zero",
                    ));
                }
                alpha_interval_1d(p, g.t)
            }
        }
    }
}

/// Full model: Gaussian correlation plus random-set geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchlatherModelParams {
    pub corr: CorrelationModel,
    pub set: RandomSetModel,
}

impl SchlatherModelParams {
    pub fn validate(&self) -> Result<()> {
        self.corr.validate()?;
        self.set.validate()
    }

    /// Correlation and set overlap at a pair geometry.
    pub fn rho_alpha(&self, g: &PairGeometry) -> Result<(f64, f64)> {
        Ok((self.corr.rho(g.s_norm, g.t), self.set.alpha(g)?))
    }
}

// ---------------------------------------------------------------------------
// Exponent measure and censored density
// ---------------------------------------------------------------------------

fn check_inputs(z1: f64, z2: f64, rho: f64, alpha: f64) -> Result<()> {
    if !(z1 > 0.0 && z2 > 0.0) {
        return Err(Error::domain(format!("z values ({z1}, {z2}) must be positive")));
    }
    if !(rho > -1.0 && rho <= 1.0) {
        return Err(Error::domain(format!("rho {rho} outside (-1, 1]")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// Bivariate exponent measure of the random-set Schlather model.
pub fn v2(z1: f64, z2: f64, rho: f64, alpha: f64) -> Result<f64> {
    check_inputs(z1, z2, rho, alpha)?;
    let w = z1 * z2 / ((z1 + z2) * (z1 + z2));
    let q = 1.0 - 2.0 * (rho + 1.0) * w;
    if !(-1e-12..=1.0 + 1e-12).contains(&q) {
        return Err(Error::domain(format!("square-root argument {q} outside [0, 1]")));
    }
    let r = q.max(0.0).sqrt();
    Ok((1.0 / z1 + 1.0 / z2) * (1.0 - alpha / 2.0 * (1.0 - r)))
}

/// `V2` together with its first and mixed partial derivatives:
/// `(V, dV/dz1, dV/dz2, d2V/dz1 dz2)`.
pub fn v2_partials(z1: f64, z2: f64, rho: f64, alpha: f64) -> Result<(f64, f64, f64, f64)> {
    check_inputs(z1, z2, rho, alpha)?;
    let sum = z1 + z2;
    let w = z1 * z2 / (sum * sum);
    let q = 1.0 - 2.0 * (rho + 1.0) * w;
    if !(-1e-12..=1.0 + 1e-12).contains(&q) {
        return Err(Error::domain(format!("square-root argument {q} outside [0, 1]")));
    }
    let r = q.max(1e-300).sqrt();
    let u = 1.0 / z1 + 1.0 / z2;
    let a_half = alpha / 2.0;
    let big_a = 1.0 - a_half * (1.0 - r);
    let rp1 = rho + 1.0;

    let w1 = z2 * (z2 - z1) / (sum * sum * sum);
    let w2 = z1 * (z1 - z2) / (sum * sum * sum);
    let w12 = (-z1 * z1 + 4.0 * z1 * z2 - z2 * z2) / (sum * sum * sum * sum);

    let v = u * big_a;
    let v1 = -big_a / (z1 * z1) - u * a_half * rp1 * w1 / r;
    let v2d = -big_a / (z2 * z2) - u * a_half * rp1 * w2 / r;
    let v12 = a_half
        * rp1
        * (w2 / (z1 * z1 * r) + w1 / (z2 * z2 * r)
            - u * (w12 / r + rp1 * w1 * w2 / (r * r * r)));
    Ok((v, v1, v2d, v12))
}

/// Pairwise extremal coefficient `theta_2 = 2 - alpha (1 - sqrt((1-rho)/2))`.
pub fn theta2(rho: f64, alpha: f64) -> f64 {
    2.0 - alpha * (1.0 - ((1.0 - rho) / 2.0).sqrt())
}

/// Censored pairwise log-likelihood contribution at Fréchet-scale threshold
/// `u`, with the pair dependence summarized by `(rho, alpha)`.
///
/// Branches: full density when both exceed `u`, one-sided derivatives of
/// `exp(-V2)` when exactly one exceeds, the censored mass `-V2(u,u)` when
/// neither does.
pub fn censored_pair_loglik_ra(z1: f64, z2: f64, u: f64, rho: f64, alpha: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::domain(format!("threshold {u} must be positive")));
    }
    let ll = match (z1 > u, z2 > u) {
        (true, true) => {
            let (v, v1, v2d, v12) = v2_partials(z1, z2, rho, alpha)?;
            -v + (v1 * v2d - v12).ln()
        }
        (true, false) => {
            let (v, v1, _, _) = v2_partials(z1, u, rho, alpha)?;
            -v + (-v1).ln()
        }
        (false, true) => {
            let (v, _, v2d, _) = v2_partials(u, z2, rho, alpha)?;
            -v + (-v2d).ln()
        }
        (false, false) => -v2(u, u, rho, alpha)?,
    };
    if !ll.is_finite() {
        return Err(Error::evaluation(format!(
            "censored pair log-likelihood not finite at (z1={z1}, z2={z2}, u={u}, rho={rho}, alpha={alpha})"
        )));
    }
    Ok(ll)
}

/// As [`censored_pair_loglik_ra`], deriving `(rho, alpha)` from the pair
/// geometry and model parameters.
pub fn censored_pair_loglik(
    z1: f64,
    z2: f64,
    u: f64,
    g: &PairGeometry,
    p: &SchlatherModelParams,
) -> Result<f64> {
    let (rho, alpha) = p.rho_alpha(g)?;
    censored_pair_loglik_ra(z1, z2, u, rho, alpha)
}

// ---------------------------------------------------------------------------
// Triple-disc geometry
// ---------------------------------------------------------------------------

/// Exact lens area of two discs of common radius `r` at center distance `d`.
pub fn lens_area(r: f64, d: f64) -> f64 {
    if d >= 2.0 * r {
        return 0.0;
    }
    if d <= 0.0 {
        return std::f64::consts::PI * r * r;
    }
    let x = d / (2.0 * r);
    2.0 * r * r * (x.acos() - x * (1.0 - x * x).sqrt())
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])
}

/// Exact area of the common intersection of three discs of equal radius `r`:
/// shoelace area of the polygon of pairwise intersection points lying inside
/// the third disc, plus the bulging circular segments on each boundary arc.
pub fn triple_disc_area(r: f64, centers: [[f64; 2]; 3]) -> f64 {
    let eps = 1e-9 * r;
    let d01 = dist2(centers[0], centers[1]).sqrt();
    let d02 = dist2(centers[0], centers[2]).sqrt();
    let d12 = dist2(centers[1], centers[2]).sqrt();
    // Near-coincident centers reduce to the two-disc or one-disc case.
    if d01 < eps {
        return lens_area(r, d02);
    }
    if d02 < eps || d12 < eps {
        return lens_area(r, d01);
    }
    if d01 >= 2.0 * r || d02 >= 2.0 * r || d12 >= 2.0 * r {
        return 0.0;
    }

    // Pairwise circle intersection points inside the third disc.
    let mut verts: Vec<([f64; 2], [usize; 2])> = Vec::with_capacity(6);
    for &(i, j, k) in &[(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)] {
        let d = dist2(centers[i], centers[j]).sqrt();
        let ux = (centers[j][0] - centers[i][0]) / d;
        let uy = (centers[j][1] - centers[i][1]) / d;
        let half = (r * r - d * d / 4.0).max(0.0).sqrt();
        let mx = 0.5 * (centers[i][0] + centers[j][0]);
        let my = 0.5 * (centers[i][1] + centers[j][1]);
        for sgn in [1.0, -1.0] {
            let p = [mx - sgn * half * uy, my + sgn * half * ux];
            if dist2(p, centers[k]).sqrt() <= r + eps {
                verts.push((p, [i, j]));
            }
        }
    }
    if verts.len() < 2 {
        return 0.0;
    }
    // Deduplicate nearly identical vertices (three circles through a point).
    let mut dedup: Vec<([f64; 2], [usize; 2])> = Vec::new();
    for v in verts {
        if !dedup.iter().any(|(p, _)| dist2(*p, v.0).sqrt() < 10.0 * eps) {
            dedup.push(v);
        }
    }
    if dedup.len() < 2 {
        return 0.0;
    }

    // Sort vertices by angle around their centroid.
    let cx = dedup.iter().map(|(p, _)| p[0]).sum::<f64>() / dedup.len() as f64;
    let cy = dedup.iter().map(|(p, _)| p[1]).sum::<f64>() / dedup.len() as f64;
    dedup.sort_by(|a, b| {
        let aa = (a.0[1] - cy).atan2(a.0[0] - cx);
        let ab = (b.0[1] - cy).atan2(b.0[0] - cx);
        aa.total_cmp(&ab)
    });

    // Shoelace polygon area.
    let n = dedup.len();
    let mut area = 0.0;
    for i in 0..n {
        let (p, _) = dedup[i];
        let (q, _) = dedup[(i + 1) % n];
        area += p[0] * q[1] - q[0] * p[1];
    }
    area = area.abs() / 2.0;

    // Circular segments on each boundary arc: the arc between adjacent
    // vertices belongs to the circle through both whose arc midpoint stays
    // inside the other two discs.
    for i in 0..n {
        let (p, owners_p) = dedup[i];
        let (q, owners_q) = dedup[(i + 1) % n];
        let mut best: Option<f64> = None;
        for c_idx in 0..3 {
            let on_p = owners_p.contains(&c_idx)
                || (dist2(p, centers[c_idx]).sqrt() - r).abs() < 10.0 * eps;
            let on_q = owners_q.contains(&c_idx)
                || (dist2(q, centers[c_idx]).sqrt() - r).abs() < 10.0 * eps;
            if !(on_p && on_q) {
                continue;
            }
            let cc = centers[c_idx];
            let ap = (p[1] - cc[1]).atan2(p[0] - cc[0]);
            let aq = (q[1] - cc[1]).atan2(q[0] - cc[0]);
            for (start, sweep) in [
                (ap, (aq - ap).rem_euclid(2.0 * std::f64::consts::PI)),
                (aq, (ap - aq).rem_euclid(2.0 * std::f64::consts::PI)),
            ] {
                let mid_ang = start + 0.5 * sweep;
                let mid = [cc[0] + r * mid_ang.cos(), cc[1] + r * mid_ang.sin()];
                let inside = (0..3)
                    .all(|o| o == c_idx || dist2(mid, centers[o]).sqrt() <= r + 1e-7 * r);
                if inside {
                    let seg = 0.5 * r * r * (sweep - sweep.sin());
                    best = Some(best.map_or(seg, |b: f64| b.min(seg)));
                }
            }
        }
        if let Some(seg) = best {
            area += seg;
        }
    }
    area
}

// ---------------------------------------------------------------------------
// Trivariate set probabilities and the third-order extremal coefficient
// ---------------------------------------------------------------------------

/// The seven conditional inclusion probabilities of three points in the
/// random storm set; each entry is `(estimate, mc standard error)`.
#[derive(Debug, Clone, Copy)]
pub struct TripleSetProbs {
    /// P(x2 in B, x3 in B | x1 in B)
    pub both_given_1: (f64, f64),
    /// P(x2 in B, x3 not in B | x1 in B)
    pub only2_given_1: (f64, f64),
    /// P(x2 not in B, x3 in B | x1 in B)
    pub only3_given_1: (f64, f64),
    /// P(x1 not in B, x3 in B | x2 in B)
    pub only3_given_2: (f64, f64),
    /// P(x2 not in B, x3 not in B | x1 in B)
    pub none_given_1: (f64, f64),
    /// P(x1 not in B, x3 not in B | x2 in B)
    pub none_given_2: (f64, f64),
    /// P(x1 not in B, x2 not in B | x3 in B)
    pub none_given_3: (f64, f64),
}

fn ratio_with_se(pairs: &[(f64, f64)], num: f64, den: f64) -> (f64, f64) {
    let n = pairs.len() as f64;
    let ratio = num / den;
    let dbar = den / n;
    let mut resid = KahanSum::new();
    for &(a, b) in pairs {
        let e = a - ratio * b;
        resid.add(e * e);
    }
    let var = resid.value() / (n - 1.0) / n;
    (ratio, var.sqrt() / dbar)
}

fn check_lag_consistency(
    lag12: ([f64; 2], f64),
    lag13: ([f64; 2], f64),
    lag23: ([f64; 2], f64),
) -> Result<()> {
    let tol = 1e-9
        * (1.0
            + lag12.0[0].abs()
            + lag12.0[1].abs()
            + lag12.1.abs()
            + lag13.0[0].abs()
            + lag13.0[1].abs()
            + lag13.1.abs());
    if (lag12.0[0] + lag23.0[0] - lag13.0[0]).abs() > tol
        || (lag12.0[1] + lag23.0[1] - lag13.0[1]).abs() > tol
        || (lag12.1 + lag23.1 - lag13.1).abs() > tol
    {
        return Err(Error::domain(
            "inconsistent triple lags: lag13 must equal lag12 + lag23",
        ));
    }
    Ok(())
}

/// Monte Carlo estimates of the seven inclusion-pattern probabilities for
/// tilted-cylinder storm sets, with per-draw exact section geometry: linear
/// disc overlap for pairs, exact circular-triple intersection for the
/// irreducible term, closed-form duration overlaps.
pub fn trivariate_set_probs(
    set: &CylinderSetParams,
    lag12: ([f64; 2], f64),
    lag13: ([f64; 2], f64),
    lag23: ([f64; 2], f64),
    n_draws: usize,
    rng: &mut impl Rng,
) -> Result<TripleSetProbs> {
    set.validate()?;
    check_lag_consistency(lag12, lag13, lag23)?;
    if n_draws < 10_000 {
        return Err(Error::domain(format!("n_draws = {n_draws} below 10^4")));
    }
    let gr = GammaDist::new(set.k_r, set.theta_r()).map_err(|e| Error::domain(e.to_string()))?;
    let gd = GammaDist::new(set.k_d, set.theta_d()).map_err(|e| Error::domain(e.to_string()))?;
    let n1 = Normal::new(0.0, 1.0).unwrap();
    let (s1, s2) = (set.s1sq.sqrt(), set.s2sq.sqrt());
    let rho = set.rho12;

    // Per draw: [m12, m13, m23, m123, |B|].
    let mut draws: Vec<[f64; 5]> = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let r: f64 = gr.sample(rng);
        let d: f64 = gd.sample(rng);
        let (e1, e2): (f64, f64) = (n1.sample(rng), n1.sample(rng));
        let v = [
            set.m_v[0] + s1 * e1,
            set.m_v[1] + s2 * (rho * e1 + (1.0 - rho * rho).sqrt() * e2),
        ];
        // Constant section-center offsets of the translated cylinders.
        let c1 = [lag12.0[0] - lag12.1 * v[0], lag12.0[1] - lag12.1 * v[1]];
        let c2 = [lag13.0[0] - lag13.1 * v[0], lag13.0[1] - lag13.1 * v[1]];
        let d12 = (c1[0] * c1[0] + c1[1] * c1[1]).sqrt();
        let d13 = (c2[0] * c2[0] + c2[1] * c2[1]).sqrt();
        let d23 = dist2(c1, c2).sqrt();

        let m12 = disc_overlap_area(r, d12) * (d - lag12.1.abs()).max(0.0);
        let m13 = disc_overlap_area(r, d13) * (d - lag13.1.abs()).max(0.0);
        let m23 = disc_overlap_area(r, d23) * (d - lag23.1.abs()).max(0.0);

        let t_lo = 0.0f64.max(lag12.1).max(lag13.1);
        let t_hi = d.min(d + lag12.1).min(d + lag13.1);
        let time3 = (t_hi - t_lo).max(0.0);
        // The exact triple area never exceeds the linear pairwise overlaps;
        // clamp against rounding so patterns stay nonnegative.
        let m123 = if time3 > 0.0 {
            let a3 = triple_disc_area(r, [[0.0, 0.0], c1, c2]);
            (a3 * time3).min(m12).min(m13).min(m23)
        } else {
            0.0
        };

        let m = std::f64::consts::PI * r * r * d;
        draws.push([m12, m13, m23, m123, m]);
    }
    Ok(assemble_probs(&draws))
}

/// Interval-set analogue of [`trivariate_set_probs`]: storms are `[0, D]`
/// on the time axis, all overlaps are closed-form interval lengths.
pub fn trivariate_set_probs_interval(
    set: &IntervalSetParams,
    t12: f64,
    t13: f64,
    n_draws: usize,
    rng: &mut impl Rng,
) -> Result<TripleSetProbs> {
    set.validate()?;
    if n_draws < 10_000 {
        return Err(Error::domain(format!("n_draws = {n_draws} below 10^4")));
    }
    let beta = Beta::new(10.0, set.beta_b()).map_err(|e| Error::domain(e.to_string()))?;
    let t23 = t13 - t12;
    let mut draws: Vec<[f64; 5]> = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let d = 24.0 * beta.sample(rng);
        let m12 = (d - t12.abs()).max(0.0);
        let m13 = (d - t13.abs()).max(0.0);
        let m23 = (d - t23.abs()).max(0.0);
        let t_lo = 0.0f64.max(t12).max(t13);
        let t_hi = d.min(d + t12).min(d + t13);
        let m123 = (t_hi - t_lo).max(0.0);
        draws.push([m12, m13, m23, m123, d]);
    }
    Ok(assemble_probs(&draws))
}

fn assemble_probs(draws: &[[f64; 5]]) -> TripleSetProbs {
    let m: f64 = draws.iter().map(|d| d[4]).sum();
    let make = |f: &dyn Fn(&[f64; 5]) -> f64| -> (f64, f64) {
        let pairs: Vec<(f64, f64)> = draws.iter().map(|d| (f(d), d[4])).collect();
        let num: f64 = pairs.iter().map(|p| p.0).sum();
        ratio_with_se(&pairs, num, m)
    };
    TripleSetProbs {
        both_given_1: make(&|d| d[3]),
        only2_given_1: make(&|d| d[0] - d[3]),
        only3_given_1: make(&|d| d[1] - d[3]),
        only3_given_2: make(&|d| d[2] - d[3]),
        none_given_1: make(&|d| d[4] - d[0] - d[1] + d[3]),
        none_given_2: make(&|d| d[4] - d[0] - d[2] + d[3]),
        none_given_3: make(&|d| d[4] - d[1] - d[2] + d[3]),
    }
}

/// `sqrt(2 pi) E{max(0, eps_1, ..., eps_n)}` for a centered unit-variance
/// Gaussian vector with the given correlation matrix, by Monte Carlo.
///
/// Factorizes the correlation by symmetric eigendecomposition with
/// eigenvalues clipped at zero (tolerance -1e-10), so exactly singular
/// matrices (coincident points) are handled.
pub fn gaussian_max_positive_mc(
    corr: &DMatrix<f64>,
    n_draws: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let n = corr.nrows();
    let eig = corr.clone().symmetric_eigen();
    for &l in eig.eigenvalues.iter() {
        if l < -1e-10 {
            return Err(Error::domain(format!("correlation matrix not PSD: eigenvalue {l}")));
        }
    }
    let mut factor = eig.eigenvectors.clone();
    for j in 0..n {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        for i in 0..n {
            factor[(i, j)] *= s;
        }
    }
    let c = (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = KahanSum::new();
    let mut acc2 = KahanSum::new();
    let mut eta = vec![0.0f64; n];
    for _ in 0..n_draws {
        for e in eta.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let mut best = 0.0f64;
        for i in 0..n {
            let mut v = 0.0;
            for j in 0..n {
                v += factor[(i, j)] * eta[j];
            }
            best = best.max(v);
        }
        let val = c * best;
        acc.add(val);
        acc2.add(val * val);
    }
    let mean = acc.value() / n_draws as f64;
    let var = (acc2.value() / n_draws as f64 - mean * mean).max(0.0) / n_draws as f64;
    Ok((mean, var.sqrt()))
}

/// Third-order extremal coefficient of the model at three space-time points,
/// by the conditional-inclusion decomposition: set-overlap probabilities
/// combined with the Monte Carlo trivariate Gaussian term and exact pairwise
/// no-set coefficients. Returns `(theta3, mc_se)`.
pub fn theta3_mc(
    p: &SchlatherModelParams,
    x1: &SpaceTimePoint,
    x2: &SpaceTimePoint,
    x3: &SpaceTimePoint,
    n_draws: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    p.validate()?;
    if n_draws < 10_000 {
        return Err(Error::domain(format!("n_draws = {n_draws} below 10^4")));
    }
    let lag12 = x1.lag_to(x2);
    let lag13 = x1.lag_to(x3);
    let lag23 = x2.lag_to(x3);
    let g12 = PairGeometry::from_lag(lag12.0, lag12.1);
    let g13 = PairGeometry::from_lag(lag13.0, lag13.1);
    let g23 = PairGeometry::from_lag(lag23.0, lag23.1);

    let rho12 = p.corr.rho(g12.s_norm, g12.t);
    let rho13 = p.corr.rho(g13.s_norm, g13.t);
    let rho23 = p.corr.rho(g23.s_norm, g23.t);

    // Pairwise no-set coefficients sqrt(2 pi) E max(0, eps_i, eps_j): exact.
    let pair12 = theta2(rho12, 1.0);
    let pair13 = theta2(rho13, 1.0);
    let pair23 = theta2(rho23, 1.0);

    let corr = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, rho12, rho13, rho12, 1.0, rho23, rho13, rho23, 1.0],
    );
    let (g3, g3_se) = gaussian_max_positive_mc(&corr, n_draws, rng)?;

    let probs = match &p.set {
        RandomSetModel::Cylinder(set) => {
            trivariate_set_probs(set, lag12, lag13, lag23, n_draws, rng)?
        }
        RandomSetModel::Interval(set) => {
            if g12.s_norm > 1e-12 || g13.s_norm > 1e-12 {
                return Err(Error::domain(
                    "interval random sets live on the time axis; spatial lags must be zero",
                ));
            }
            trivariate_set_probs_interval(set, lag12.1, lag13.1, n_draws, rng)?
        }
    };

    let theta3 = probs.both_given_1.0 * g3
        + probs.only2_given_1.0 * pair12
        + probs.only3_given_1.0 * pair13
        + probs.only3_given_2.0 * pair23
        + probs.none_given_1.0
        + probs.none_given_2.0
        + probs.none_given_3.0;

    // First-order error propagation treating the terms as independent.
    let se = ((probs.both_given_1.0 * g3_se).powi(2)
        + (probs.both_given_1.1 * g3).powi(2)
        + (probs.only2_given_1.1 * pair12).powi(2)
        + (probs.only3_given_1.1 * pair13).powi(2)
        + (probs.only3_given_2.1 * pair23).powi(2)
        + probs.none_given_1.1.powi(2)
        + probs.none_given_2.1.powi(2)
        + probs.none_given_3.1.powi(2))
    .sqrt();

    Ok((theta3, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_rng;
    use proptest::prelude::*;

    fn rainfall_model() -> SchlatherModelParams {
        SchlatherModelParams {
            corr: CorrelationModel::Gneiting(GneitingCorrParams {
                alpha_s: 35.5f64.ln(),
                alpha_t: 0.0,
                beta_s: 0.98,
                beta_t: 1.0,
                gamma: 0.99,
            }),
            set: RandomSetModel::Cylinder(CylinderSetParams {
                m_r: 51.21,
                k_r: 0.28,
                m_v: [32.67, 11.41],
                s1sq: 9.0,
                s2sq: 11.7649,
                rho12: -0.95,
                m_d: 36.78,
                k_d: 9.75,
            }),
        }
    }

    #[test]
    fn v2_independence_and_complete_dependence() {
        assert!((v2(1.0, 1.0, 0.3, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((v2(1.0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn v2_margin_recovery() {
        // V2(z, infinity) -> 1/z; evaluate at a huge partner argument.
        let v = v2(2.0, 1e8, 0.5, 0.8).unwrap();
        assert!((v - 0.5).abs() < 1e-6, "{v}");
    }

    #[test]
    fn theta2_known_values() {
        assert!((theta2(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(theta2(0.3, 0.0), 2.0);
        // The bound attained at the infimum of valid planar correlations.
        let t = theta2(-0.403, 1.0);
        assert!((t - 1.838).abs() < 5e-4, "{t}");
    }

    proptest! {
        #[test]
        fn v2_homogeneity(
            z1 in 0.05f64..50.0,
            z2 in 0.05f64..50.0,
            c in 0.1f64..10.0,
            rho in -0.9f64..1.0,
            alpha in 0.0f64..1.0,
        ) {
            let lhs = v2(c * z1, c * z2, rho, alpha).unwrap();
            let rhs = v2(z1, z2, rho, alpha).unwrap() / c;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn theta2_in_range(rho in -0.9f64..1.0, alpha in 0.0f64..1.0) {
            let t = theta2(rho, alpha);
            prop_assert!((1.0..=2.0).contains(&t));
        }
    }

    #[test]
    fn partials_match_finite_differences_of_cdf() {
        // All derivative branches vs central differences of exp(-V2) at 100
        // random points; relative error < 1e-6.
        let mut rng = master_rng(51);
        let cdf =
            |z1: f64, z2: f64, rho: f64, alpha: f64| (-v2(z1, z2, rho, alpha).unwrap()).exp();
        for _ in 0..100 {
            let z1 = 0.5 + 9.5 * rng.random::<f64>();
            let z2 = 0.5 + 9.5 * rng.random::<f64>();
            let rho = -0.8 + 1.75 * rng.random::<f64>();
            let alpha = rng.random::<f64>();
            let (v, v1, v2d, v12) = v2_partials(z1, z2, rho, alpha).unwrap();
            let f = cdf(z1, z2, rho, alpha);
            assert!((f - (-v).exp()).abs() < 1e-14);

            let h1 = 1e-5 * z1;
            let h2 = 1e-5 * z2;
            let fd1 = (cdf(z1 + h1, z2, rho, alpha) - cdf(z1 - h1, z2, rho, alpha)) / (2.0 * h1);
            let an1 = -v1 * f;
            assert!(
                (fd1 - an1).abs() <= 1e-6 * an1.abs().max(1e-12),
                "d1 at ({z1},{z2},{rho},{alpha}): fd {fd1} vs {an1}"
            );
            let fd2 = (cdf(z1, z2 + h2, rho, alpha) - cdf(z1, z2 - h2, rho, alpha)) / (2.0 * h2);
            let an2 = -v2d * f;
            assert!(
                (fd2 - an2).abs() <= 1e-6 * an2.abs().max(1e-12),
                "d2: fd {fd2} vs {an2}"
            );
            let fd12 = (cdf(z1 + h1, z2 + h2, rho, alpha) - cdf(z1 + h1, z2 - h2, rho, alpha)
                - cdf(z1 - h1, z2 + h2, rho, alpha)
                + cdf(z1 - h1, z2 - h2, rho, alpha))
                / (4.0 * h1 * h2);
            let an12 = (v1 * v2d - v12) * f;
            // The four-point stencil carries an f64 cancellation floor of
            // roughly eps * f / (4 h1 h2) on top of the relative tolerance.
            let floor12 = 4.0e-15 * f / (4.0 * h1 * h2);
            assert!(
                (fd12 - an12).abs() <= 1e-6 * an12.abs() + floor12,
                "d12: fd {fd12} vs {an12}"
            );
        }
    }

    #[test]
    fn censored_branches() {
        let (u, rho, alpha) = (5.0, 0.4, 0.7);
        // Fourth branch: both censored.
        let ll = censored_pair_loglik_ra(1.0, 2.0, u, rho, alpha).unwrap();
        assert!((ll + v2(u, u, rho, alpha).unwrap()).abs() < 1e-14);
        // Independence factorization: alpha = 0, both exceed.
        let (z1, z2) = (7.0, 9.0);
        let ll = censored_pair_loglik_ra(z1, z2, u, rho, 0.0).unwrap();
        let frechet_logpdf = |z: f64| -1.0 / z - 2.0 * z.ln();
        assert!((ll - frechet_logpdf(z1) - frechet_logpdf(z2)).abs() < 1e-12);
        // One-sided branches are logs of positive densities.
        assert!(censored_pair_loglik_ra(7.0, 1.0, u, rho, alpha).is_ok());
        assert!(censored_pair_loglik_ra(1.0, 7.0, u, rho, alpha).is_ok());
    }

    #[test]
    fn censored_density_total_mass_is_one() {
        // Numeric integral of the density branch over (u, inf)^2 plus the
        // censored masses; substitution z = u/s maps the quadrant to (0,1].
        let (u, rho, alpha) = (2.0, 0.6, 0.85);
        let nodes = crate::numeric::gauss_legendre(64);
        let mut mass = (-v2(u, u, rho, alpha).unwrap()).exp();
        for flip in [false, true] {
            let f = |s: f64| {
                let z = u / s;
                let ll = if flip {
                    censored_pair_loglik_ra(1.0, z, u, rho, alpha).unwrap()
                } else {
                    censored_pair_loglik_ra(z, 1.0, u, rho, alpha).unwrap()
                };
                ll.exp() * u / (s * s)
            };
            mass += crate::numeric::integrate_gl(f, 1e-6, 1.0, &nodes);
        }
        let mut quad = 0.0;
        for &(xs, ws) in &nodes {
            let s1 = 0.5 * (xs + 1.0) * (1.0 - 2e-6) + 1e-6;
            for &(xt, wt) in &nodes {
                let s2 = 0.5 * (xt + 1.0) * (1.0 - 2e-6) + 1e-6;
                let (z1, z2) = (u / s1, u / s2);
                let ll = censored_pair_loglik_ra(z1, z2, u, rho, alpha).unwrap();
                quad += ws * wt * 0.25 * ll.exp() * (u / (s1 * s1)) * (u / (s2 * s2));
            }
        }
        mass += quad * (1.0 - 2e-6) * (1.0 - 2e-6);
        assert!((mass - 1.0).abs() < 1e-3, "total mass {mass}");
    }

    #[test]
    fn lens_area_against_point_mc() {
        let mut rng = master_rng(52);
        for &d in &[0.0, 0.5, 1.0, 1.7] {
            let r = 1.0;
            let exact = lens_area(r, d);
            let n = 200_000;
            let mut hits = 0u32;
            for _ in 0..n {
                let x = -r + 2.0 * r * rng.random::<f64>();
                let y = -r + 2.0 * r * rng.random::<f64>();
                if x * x + y * y <= r * r && (x - d) * (x - d) + y * y <= r * r {
                    hits += 1;
                }
            }
            let mc = hits as f64 / n as f64 * 4.0 * r * r;
            assert!((mc - exact).abs() < 0.02, "d={d}: mc {mc} vs exact {exact}");
        }
    }

    #[test]
    fn triple_disc_area_against_point_mc() {
        let mut rng = master_rng(53);
        let configs: Vec<[[f64; 2]; 3]> = vec![
            [[0.0, 0.0], [0.8, 0.0], [0.4, 0.7]],
            [[0.0, 0.0], [1.5, 0.0], [0.75, 1.3]],
            [[0.0, 0.0], [0.2, 0.1], [0.1, 0.25]],
            [[0.0, 0.0], [1.9, 0.0], [0.95, 1.64]], // near-empty
            [[0.0, 0.0], [0.5, 0.0], [2.5, 0.0]],   // one pair disjoint
            [[0.0, 0.0], [1.2, 0.0], [0.6, 0.2]],   // lens inside third
        ];
        for (ci, centers) in configs.iter().enumerate() {
            let r = 1.0;
            let exact = triple_disc_area(r, *centers);
            let n = 400_000;
            let mut hits = 0u32;
            for _ in 0..n {
                let x = -r + (2.0 * r + 2.0) * rng.random::<f64>();
                let y = -r - 1.0 + (2.0 * r + 2.0) * rng.random::<f64>();
                if centers
                    .iter()
                    .all(|c| (x - c[0]).powi(2) + (y - c[1]).powi(2) <= r * r)
                {
                    hits += 1;
                }
            }
            let box_area = (2.0 * r + 2.0) * (2.0 * r + 2.0);
            let mc = hits as f64 / n as f64 * box_area;
            assert!(
                (mc - exact).abs() < 0.015,
                "config {ci}: mc {mc} vs exact {exact}"
            );
        }
    }

    #[test]
    fn triple_disc_degenerate_cases() {
        let r = 2.0;
        let a = triple_disc_area(r, [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]);
        assert!((a - std::f64::consts::PI * r * r).abs() < 1e-9);
        let a = triple_disc_area(r, [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]);
        assert!((a - lens_area(r, 1.0)).abs() < 1e-9);
        assert_eq!(triple_disc_area(r, [[0.0, 0.0], [5.0, 0.0], [1.0, 0.0]]), 0.0);
    }

    #[test]
    fn set_probs_all_points_identical() {
        let set = CylinderSetParams {
            m_r: 51.21,
            k_r: 0.28,
            m_v: [32.67, 11.41],
            s1sq: 9.0,
            s2sq: 11.7649,
            rho12: -0.95,
            m_d: 36.78,
            k_d: 9.75,
        };
        let mut rng = master_rng(54);
        let zero = ([0.0, 0.0], 0.0);
        let probs = trivariate_set_probs(&set, zero, zero, zero, 10_000, &mut rng).unwrap();
        assert_eq!(probs.both_given_1.0, 1.0);
        assert_eq!(probs.only2_given_1.0, 0.0);
        assert_eq!(probs.none_given_1.0, 0.0);
    }

    #[test]
    fn set_probs_sum_to_one_per_conditioning_point() {
        let set = CylinderSetParams {
            m_r: 30.0,
            k_r: 2.0,
            m_v: [5.0, 2.0],
            s1sq: 6.0,
            s2sq: 7.0,
            rho12: 0.3,
            m_d: 5.0,
            k_d: 2.0,
        };
        let mut rng = master_rng(55);
        let lag12 = ([20.0, 5.0], 1.0);
        let lag13 = ([35.0, -10.0], 3.0);
        let lag23 = ([15.0, -15.0], 2.0);
        let p = trivariate_set_probs(&set, lag12, lag13, lag23, 20_000, &mut rng).unwrap();
        // Conditioning on x1: the four patterns partition the event x1 in B.
        let only1 =
            1.0 - p.both_given_1.0 - p.only2_given_1.0 - p.only3_given_1.0 - p.none_given_1.0;
        assert!(only1.abs() < 1e-12, "patterns given x1 sum defect {only1}");
        for (v, s) in [
            p.both_given_1,
            p.only2_given_1,
            p.only3_given_1,
            p.only3_given_2,
            p.none_given_1,
            p.none_given_2,
            p.none_given_3,
        ] {
            assert!((0.0..=1.0).contains(&v), "pattern prob {v} outside [0,1]");
            assert!(s >= 0.0);
        }
    }

    #[test]
    fn set_probs_pairwise_marginal_matches_alpha_oracle() {
        let set = CylinderSetParams {
            m_r: 30.0,
            k_r: 2.0,
            m_v: [5.0, 2.0],
            s1sq: 6.0,
            s2sq: 7.0,
            rho12: 0.0,
            m_d: 5.0,
            k_d: 2.0,
        };
        let mut rng = master_rng(56);
        let lag12 = ([20.0, 0.0], 1.0);
        let lag13 = ([40.0, 0.0], 2.0);
        let lag23 = ([20.0, 0.0], 1.0);
        let p = trivariate_set_probs(&set, lag12, lag13, lag23, 100_000, &mut rng).unwrap();
        let p2_in = p.both_given_1.0 + p.only2_given_1.0;
        let g = PairGeometry::from_lag(lag12.0, lag12.1);
        let (a, a_se) =
            crate::randomset::alpha_mc_oracle(&set, g.s_norm, g.t, g.theta, 100_000, &mut rng)
                .unwrap();
        let tol = 3.0 * (a_se + p.both_given_1.1 + p.only2_given_1.1) + 0.003;
        assert!((p2_in - a).abs() < tol, "marginal {p2_in} vs alpha {a} (tol {tol})");
    }

    #[test]
    fn gaussian_max_kernel_single_point() {
        let mut rng = master_rng(57);
        let corr = DMatrix::from_element(1, 1, 1.0);
        let (m, se) = gaussian_max_positive_mc(&corr, 200_000, &mut rng).unwrap();
        assert!((m - 1.0).abs() < 3.0 * se, "sqrt(2pi) E max(0,eps) = {m} +- {se}");
    }

    #[test]
    fn gaussian_max_kernel_pair_matches_closed_form() {
        let mut rng = master_rng(58);
        for rho in [-0.5, 0.0, 0.7, 1.0] {
            let corr = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
            let (m, se) = gaussian_max_positive_mc(&corr, 400_000, &mut rng).unwrap();
            let exact = theta2(rho, 1.0);
            assert!(
                (m - exact).abs() < 3.0 * se + 1e-3,
                "rho={rho}: {m} vs {exact} (se {se})"
            );
        }
    }

    #[test]
    fn theta3_coincident_and_distant_anchors() {
        let model = rainfall_model();
        let mut rng = master_rng(59);
        let p0 = SpaceTimePoint { x: 0.0, y: 0.0, t: 0.0 };
        let (t3, se) = theta3_mc(&model, &p0, &p0, &p0, 20_000, &mut rng).unwrap();
        assert!((t3 - 1.0).abs() < 3.0 * se + 1e-3, "coincident theta3 {t3}");

        let far1 = SpaceTimePoint { x: 1e7, y: 0.0, t: 0.0 };
        let far2 = SpaceTimePoint { x: 0.0, y: 1e7, t: 0.0 };
        let (t3, _) = theta3_mc(&model, &p0, &far1, &far2, 20_000, &mut rng).unwrap();
        assert!((t3 - 3.0).abs() < 1e-9, "distant theta3 {t3}");
    }

    #[test]
    fn theta3_bounded_by_pairwise_coefficients() {
        let model = rainfall_model();
        let mut rng = master_rng(60);
        for i in 0..5 {
            let scale = 20.0 + 40.0 * i as f64;
            let x1 = SpaceTimePoint { x: 0.0, y: 0.0, t: 0.0 };
            let x2 = SpaceTimePoint { x: scale, y: 10.0, t: 1.0 };
            let x3 = SpaceTimePoint { x: 10.0, y: scale, t: 2.0 };
            let (t3, se) = theta3_mc(&model, &x1, &x2, &x3, 30_000, &mut rng).unwrap();
            let mut max_t2 = 1.0f64;
            for (a, b) in [(&x1, &x2), (&x1, &x3), (&x2, &x3)] {
                let (ds, dt) = a.lag_to(b);
                let g = PairGeometry::from_lag(ds, dt);
                let (rho, alpha) = model.rho_alpha(&g).unwrap();
                max_t2 = max_t2.max(theta2(rho, alpha));
            }
            assert!(
                t3 >= max_t2 - 3.0 * se - 0.02 && t3 <= 3.0 + 3.0 * se,
                "scale {scale}: theta3 {t3} vs max theta2 {max_t2}"
            );
        }
    }

    #[test]
    fn pair_geometry_flips_negative_time_lags() {
        let g1 = PairGeometry::from_lag([3.0, 4.0], -2.0);
        assert_eq!(g1.t, 2.0);
        assert!((g1.s_norm - 5.0).abs() < 1e-12);
        let g2 = PairGeometry::from_lag([-3.0, -4.0], 2.0);
        assert!((g1.theta - g2.theta).abs() < 1e-12);
    }
}

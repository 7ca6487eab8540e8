//! Browser demo bindings: three interactive views over the core library —
//! pairwise extremal-coefficient curves (with drift asymmetry), the
//! storm-overlap field `alpha(s, t)`, and sample paths of the random-set
//! max-stable process. Compiled to WebAssembly for the static page in
//! `www/`; the functions are plain Rust and run natively in tests.

use stx_core::correlation::GneitingCorrParams;
use stx_core::model::{theta2, PairGeometry};
use stx_core::randomset::{alpha_spacetime, CylinderSetParams};
use stx_core::rng::master_rng;
use stx_core::simulate::{simulate_schlather_interval_1d, Interval1dDesign, SimConfig};
use wasm_bindgen::prelude::*;

fn err_js(e: stx_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn cylinder(
    m_r: f64,
    k_r: f64,
    m_v1: f64,
    m_v2: f64,
    s1sq: f64,
    s2sq: f64,
    rho12: f64,
    m_d: f64,
    k_d: f64,
) -> CylinderSetParams {
    CylinderSetParams {
        m_r,
        k_r,
        m_v: [m_v1, m_v2],
        s1sq,
        s2sq,
        rho12,
        m_d,
        k_d,
    }
}

/// Model pairwise extremal-coefficient curves over time lags `0..=max_lag`
/// for a station pair separated by `(dx_km, dy_km)`.
///
/// Returns `2 * (max_lag + 1)` values: the curve pairing the west station
/// at `t` with the east at `t + h`, then the reversed orientation. Spatial
/// and temporal correlation scales are in natural units (km, hr).
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn theta2_curves(
    scale_s_km: f64,
    scale_t_hr: f64,
    beta_s: f64,
    gamma: f64,
    m_r: f64,
    k_r: f64,
    m_v1: f64,
    m_v2: f64,
    s1sq: f64,
    s2sq: f64,
    rho12: f64,
    m_d: f64,
    k_d: f64,
    dx_km: f64,
    dy_km: f64,
    max_lag: u32,
) -> Result<Vec<f64>, JsValue> {
    theta2_curves_impl(
        scale_s_km, scale_t_hr, beta_s, gamma, m_r, k_r, m_v1, m_v2, s1sq, s2sq, rho12, m_d,
        k_d, dx_km, dy_km, max_lag,
    )
    .map_err(err_js)
}

#[allow(clippy::too_many_arguments)]
fn theta2_curves_impl(
    scale_s_km: f64,
    scale_t_hr: f64,
    beta_s: f64,
    gamma: f64,
    m_r: f64,
    k_r: f64,
    m_v1: f64,
    m_v2: f64,
    s1sq: f64,
    s2sq: f64,
    rho12: f64,
    m_d: f64,
    k_d: f64,
    dx_km: f64,
    dy_km: f64,
    max_lag: u32,
) -> stx_core::Result<Vec<f64>> {
    let corr = GneitingCorrParams {
        alpha_s: scale_s_km.max(1e-6).ln(),
        alpha_t: scale_t_hr.max(1e-6).ln(),
        beta_s,
        beta_t: 1.0,
        gamma,
    };
    corr.validate()?;
    let set = cylinder(m_r, k_r, m_v1, m_v2, s1sq, s2sq, rho12, m_d, k_d);
    set.validate()?;
    let mut out = Vec::with_capacity(2 * (max_lag as usize + 1));
    for ds in [[dx_km, dy_km], [-dx_km, -dy_km]] {
        for h in 0..=max_lag {
            let g = PairGeometry::from_lag(ds, h as f64);
            let rho = stx_core::correlation::gneiting_corr_unchecked(&corr, g.s_norm, g.t);
            let alpha = alpha_spacetime(&set, g.s_norm, g.t, g.theta)?;
            out.push(theta2(rho, alpha));
        }
    }
    Ok(out)
}

/// Storm-overlap field `alpha(s, t)` on an `ns x nt` grid over
/// `[0, s_max] x [0, t_max]`, row-major in `t` (each row scans `s`).
/// The station angle is measured from the west-east axis.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn alpha_field(
    m_r: f64,
    k_r: f64,
    m_v1: f64,
    m_v2: f64,
    s1sq: f64,
    s2sq: f64,
    rho12: f64,
    m_d: f64,
    k_d: f64,
    theta_deg: f64,
    s_max: f64,
    t_max: f64,
    ns: u32,
    nt: u32,
) -> Result<Vec<f64>, JsValue> {
    alpha_field_impl(
        m_r, k_r, m_v1, m_v2, s1sq, s2sq, rho12, m_d, k_d, theta_deg, s_max, t_max, ns, nt,
    )
    .map_err(err_js)
}

#[allow(clippy::too_many_arguments)]
fn alpha_field_impl(
    m_r: f64,
    k_r: f64,
    m_v1: f64,
    m_v2: f64,
    s1sq: f64,
    s2sq: f64,
    rho12: f64,
    m_d: f64,
    k_d: f64,
    theta_deg: f64,
    s_max: f64,
    t_max: f64,
    ns: u32,
    nt: u32,
) -> stx_core::Result<Vec<f64>> {
    if ns < 2 || nt < 2 {
        return Err(stx_core::Error::domain("grid needs at least 2x2 points"));
    }
    let set = cylinder(m_r, k_r, m_v1, m_v2, s1sq, s2sq, rho12, m_d, k_d);
    set.validate()?;
    let theta = theta_deg.to_radians();
    let mut out = Vec::with_capacity((ns * nt) as usize);
    for it in 0..nt {
        let t = t_max * it as f64 / (nt - 1) as f64;
        for is in 0..ns {
            let s = s_max * is as f64 / (ns - 1) as f64;
            out.push(alpha_spacetime(&set, s, t, theta)?);
        }
    }
    Ok(out)
}

/// One sample path of the random-set max-stable process on the integer
/// time grid `0..t_len`: exponential correlation with range `lambda`,
/// interval storms with mean duration `mu`. Values are on the unit Fréchet
/// scale; plot them on a log axis.
#[wasm_bindgen]
pub fn simulate_path(lambda: f64, mu: f64, t_len: u32, seed: u32) -> Result<Vec<f64>, JsValue> {
    simulate_path_impl(lambda, mu, t_len, seed).map_err(err_js)
}

fn simulate_path_impl(lambda: f64, mu: f64, t_len: u32, seed: u32) -> stx_core::Result<Vec<f64>> {
    let design = Interval1dDesign {
        t_len: t_len.clamp(10, 5000) as usize,
        lambda,
        mu,
    };
    let cfg = SimConfig {
        max_storms: 20_000_000,
        ..Default::default()
    };
    let mut rng = master_rng(seed as u64);
    let (z, _) = simulate_schlather_interval_1d(&design, &cfg, &mut rng)?;
    Ok(z)
}

/// Model theta2 against time lag for the 1D design, matching
/// [`simulate_path`]; used to overlay the truth on empirical curves.
#[wasm_bindgen]
pub fn theta2_curve_1d(lambda: f64, mu: f64, max_lag: u32) -> Result<Vec<f64>, JsValue> {
    theta2_curve_1d_impl(lambda, mu, max_lag).map_err(err_js)
}

fn theta2_curve_1d_impl(lambda: f64, mu: f64, max_lag: u32) -> stx_core::Result<Vec<f64>> {
    let set = stx_core::randomset::IntervalSetParams::new(mu)?;
    let corr = stx_core::correlation::ExpCorrParams::new(lambda)?;
    let mut out = Vec::with_capacity(max_lag as usize + 1);
    for h in 0..=max_lag {
        let rho = stx_core::correlation::exp_corr(&corr, h as f64);
        let alpha = stx_core::randomset::alpha_interval_1d(&set, h as f64)?;
        out.push(theta2(rho, alpha));
    }
    Ok(out)
}

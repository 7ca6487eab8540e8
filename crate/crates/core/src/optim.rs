//! Box-constrained quasi-Newton minimization with finite-difference
//! gradients.
//!
//! Projected L-BFGS: limited-memory two-loop recursion on the free
//! coordinates, gradient projection onto the box, Armijo backtracking along
//! the projected path. This matches the contract of a bounded quasi-Newton
//! routine without depending on one.

use crate::error::{Error, Result};

/// Coordinate transform between a constrained parameter and an unconstrained
/// working scale: logs for lower-bounded parameters, logit for interval ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// `u = ln(x - lo)`.
    Log { lo: f64 },
    /// `u = ln((x - lo)/(hi - x))`.
    Logit { lo: f64, hi: f64 },
}

impl Transform {
    pub fn to_unconstrained(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::Log { lo } => (x - lo).ln(),
            Transform::Logit { lo, hi } => ((x - lo) / (hi - x)).ln(),
        }
    }

    pub fn to_constrained(&self, u: f64) -> f64 {
        match *self {
            Transform::Identity => u,
            Transform::Log { lo } => lo + u.exp(),
            Transform::Logit { lo, hi } => {
                // Saturates cleanly for large |u|.
                let e = 1.0 / (1.0 + (-u).exp());
                lo + (hi - lo) * e
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOptions {
    /// Convergence on the infinity norm of the projected gradient.
    pub tol_grad: f64,
    /// Convergence on the infinity norm of the step.
    pub tol_step: f64,
    pub max_iters: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// L-BFGS memory.
    pub memory: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-5,
            tol_step: 1e-8,
            max_iters: 500,
            fd_step: 1e-5,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimStatus {
    /// Projected gradient below tolerance.
    Converged,
    /// Step size below tolerance (possibly wedged against a bound).
    SmallStep,
    /// Iteration budget exhausted; the iterate is the best seen.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub status: OptimStatus,
    pub iterations: usize,
    pub n_evals: usize,
    /// Indices of coordinates resting on a bound at the solution.
    pub active_bounds: Vec<usize>,
}

impl OptimResult {
    pub fn converged(&self) -> bool {
        matches!(self.status, OptimStatus::Converged | OptimStatus::SmallStep)
    }

    pub fn at_bound(&self) -> bool {
        !self.active_bounds.is_empty()
    }
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Central finite-difference gradient with the stencil shrunk to stay inside
/// the box; falls back to one-sided differences at a bound.
pub fn fd_gradient_box<F>(
    f: &F,
    x: &[f64],
    fx: f64,
    bounds: &[(f64, f64)],
    rel_step: f64,
    n_evals: &mut usize,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut xt = x.to_vec();
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let h0 = rel_step * x[i].abs().max(1.0);
        let room_up = hi - x[i];
        let room_dn = x[i] - lo;
        let h = h0.min(room_up.max(0.0) + room_dn.max(0.0));
        if h <= 0.0 {
            return Err(Error::domain(format!(
                "degenerate bound interval for coordinate {i}"
            )));
        }
        let hc = h0.min(room_up).min(room_dn);
        g[i] = if hc > 0.25 * h0 {
            // Central difference fits in the box.
            xt[i] = x[i] + hc;
            let fp = f(&xt)?;
            xt[i] = x[i] - hc;
            let fm = f(&xt)?;
            *n_evals += 2;
            (fp - fm) / (2.0 * hc)
        } else if room_up >= room_dn {
            let hu = h0.min(room_up);
            xt[i] = x[i] + hu;
            let fp = f(&xt)?;
            *n_evals += 1;
            (fp - fx) / hu
        } else {
            let hd = h0.min(room_dn);
            xt[i] = x[i] - hd;
            let fm = f(&xt)?;
            *n_evals += 1;
            (fx - fm) / hd
        };
        xt[i] = x[i];
    }
    Ok(g)
}

/// Central finite-difference gradient without bounds (plain stencil).
pub fn fd_gradient<F>(f: &F, x: &[f64], rel_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let unbounded = vec![(f64::NEG_INFINITY, f64::INFINITY); x.len()];
    let mut evals = 0usize;
    let fx = f(x)?;
    fd_gradient_box(f, x, fx, &unbounded, rel_step, &mut evals)
}

/// Minimize `f` over the box `bounds` starting from `x0`.
///
/// The returned value never exceeds `f(x0)`: every accepted step passes a
/// sufficient-decrease test.
pub fn minimize_box<F>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &OptimOptions,
) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    assert_eq!(bounds.len(), n, "bounds length mismatch");
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) {
            return Err(Error::domain(format!("empty bound interval for coordinate {i}")));
        }
    }
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let mut n_evals = 1usize;
    let mut fx = f(&x)?;
    if !fx.is_finite() {
        return Err(Error::evaluation("objective not finite at the initial point"));
    }
    let mut g = fd_gradient_box(&f, &x, fx, bounds, opts.fd_step, &mut n_evals)?;

    // L-BFGS history.
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    let mut status = OptimStatus::MaxIterations;
    let mut iterations = 0usize;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;

        // Active set: at a bound with the gradient pushing outward.
        let active: Vec<bool> = (0..n)
            .map(|i| {
                let (lo, hi) = bounds[i];
                let span = (hi - lo).max(1.0);
                (x[i] - lo <= 1e-12 * span && g[i] > 0.0)
                    || (hi - x[i] <= 1e-12 * span && g[i] < 0.0)
            })
            .collect();

        // Projected gradient convergence test.
        let pg_norm = (0..n)
            .map(|i| {
                let mut step = x[i] - g[i];
                step = step.clamp(bounds[i].0, bounds[i].1);
                (step - x[i]).abs()
            })
            .fold(0.0f64, f64::max);
        if pg_norm < opts.tol_grad {
            status = OptimStatus::Converged;
            break;
        }

        // Two-loop recursion restricted to the free coordinates.
        let mut d: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect();
        if !s_hist.is_empty() {
            let m = s_hist.len();
            let mut alphas = vec![0.0; m];
            for k in (0..m).rev() {
                let a = rho_hist[k]
                    * s_hist[k]
                        .iter()
                        .zip(&d)
                        .map(|(si, di)| si * di)
                        .sum::<f64>();
                alphas[k] = a;
                for i in 0..n {
                    d[i] -= a * y_hist[k][i];
                }
            }
            let last = m - 1;
            let sy: f64 = s_hist[last].iter().zip(&y_hist[last]).map(|(a, b)| a * b).sum();
            let yy: f64 = y_hist[last].iter().map(|v| v * v).sum();
            if yy > 0.0 && sy > 0.0 {
                let scale = sy / yy;
                for di in d.iter_mut() {
                    *di *= scale;
                }
            }
            for k in 0..m {
                let b = rho_hist[k]
                    * y_hist[k]
                        .iter()
                        .zip(&d)
                        .map(|(yi, di)| yi * di)
                        .sum::<f64>();
                for i in 0..n {
                    d[i] += (alphas[k] - b) * s_hist[k][i];
                }
            }
            for i in 0..n {
                if active[i] {
                    d[i] = 0.0;
                }
            }
        }

        // Ensure descent; fall back to the projected steepest direction.
        let gd: f64 = g.iter().zip(&d).map(|(gi, di)| gi * di).sum();
        if !(gd < 0.0) {
            d = (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        let gd: f64 = g.iter().zip(&d).map(|(gi, di)| gi * di).sum();
        if gd >= 0.0 {
            // Gradient is zero on the free set; everything useful is pinned.
            status = OptimStatus::Converged;
            break;
        }

        // Backtracking Armijo search along the projected path.
        let mut step = 1.0f64;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = (x[i] + step * d[i]).clamp(bounds[i].0, bounds[i].1);
            }
            let dx_norm = x_new
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if dx_norm == 0.0 {
                break;
            }
            n_evals += 1;
            match f(&x_new) {
                Ok(v) if v.is_finite() => {
                    // Directional derivative of the projected step.
                    let gdx: f64 = g.iter().zip(x_new.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
                    if v <= fx + 1e-4 * gdx.min(0.0) {
                        f_new = v;
                        accepted = true;
                        break;
                    }
                }
                // Non-finite or failed evaluations shrink the step.
                Ok(_) | Err(Error::Evaluation(_)) | Err(Error::Domain(_)) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        if !accepted {
            status = OptimStatus::SmallStep;
            break;
        }

        let step_norm = x_new
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);

        let g_new = fd_gradient_box(&f, &x_new, f_new, bounds, opts.fd_step, &mut n_evals)?;

        // Curvature update.
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let yy: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-10 * ss * yy {
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
            if s_hist.len() > opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
        }

        x = x_new;
        fx = f_new;
        g = g_new;

        if step_norm < opts.tol_step {
            status = OptimStatus::SmallStep;
            break;
        }
    }

    let active_bounds: Vec<usize> = (0..n)
        .filter(|&i| {
            let (lo, hi) = bounds[i];
            let span = (hi - lo).max(1.0);
            x[i] - lo <= 1e-9 * span || hi - x[i] <= 1e-9 * span
        })
        .collect();

    Ok(OptimResult {
        x,
        value: fx,
        status,
        iterations,
        n_evals,
        active_bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(center: &[f64]) -> impl Fn(&[f64]) -> Result<f64> + '_ {
        move |x: &[f64]| {
            Ok(x.iter()
                .zip(center)
                .enumerate()
                .map(|(i, (xi, ci))| (i as f64 + 1.0) * (xi - ci) * (xi - ci))
                .sum())
        }
    }

    #[test]
    fn quadratic_interior_optimum_found_exactly() {
        let center = [0.3, -0.4];
        let bounds = [(-2.0, 2.0), (-2.0, 2.0)];
        let res = minimize_box(quadratic(&center), &[1.5, 1.5], &bounds, &OptimOptions::default())
            .unwrap();
        assert!(res.converged(), "{:?}", res.status);
        assert!((res.x[0] - 0.3).abs() < 1e-6, "{:?}", res.x);
        assert!((res.x[1] + 0.4).abs() < 1e-6, "{:?}", res.x);
        assert!(res.active_bounds.is_empty());
    }

    #[test]
    fn bound_active_optimum_is_flagged() {
        // Unconstrained optimum at 1.5, box caps it at 0.99.
        let center = [1.5];
        let bounds = [(0.0, 0.99)];
        let res =
            minimize_box(quadratic(&center), &[0.5], &bounds, &OptimOptions::default()).unwrap();
        assert!((res.x[0] - 0.99).abs() < 1e-9);
        assert!(res.at_bound());
        assert_eq!(res.active_bounds, vec![0]);
    }

    #[test]
    fn rosenbrock_in_a_box() {
        let f = |x: &[f64]| -> Result<f64> {
            Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        };
        let bounds = [(-5.0, 5.0), (-5.0, 5.0)];
        let opts = OptimOptions {
            max_iters: 2000,
            tol_grad: 1e-8,
            ..Default::default()
        };
        let res = minimize_box(f, &[-1.2, 1.0], &bounds, &opts).unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-4, "{:?}", res.x);
        assert!((res.x[1] - 1.0).abs() < 1e-4, "{:?}", res.x);
    }

    #[test]
    fn value_never_increases_from_start() {
        let f = |x: &[f64]| -> Result<f64> { Ok((x[0] - 2.0).powi(4) + x[1].powi(2)) };
        let bounds = [(-3.0, 3.0), (-3.0, 3.0)];
        let x0 = [0.0, 1.0];
        let f0 = f(&x0).unwrap();
        let res = minimize_box(f, &x0, &bounds, &OptimOptions::default()).unwrap();
        assert!(res.value <= f0);
    }

    #[test]
    fn fd_gradient_exact_on_quadratic() {
        let f = |x: &[f64]| -> Result<f64> { Ok(3.0 * x[0] * x[0] + 2.0 * x[0] * x[1]) };
        let g = fd_gradient(&f, &[1.0, -2.0], 1e-6).unwrap();
        assert!((g[0] - (6.0 - 4.0)).abs() < 1e-7);
        assert!((g[1] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn transforms_round_trip() {
        for (tr, x) in [
            (Transform::Identity, -3.4),
            (Transform::Log { lo: 0.0 }, 2.5),
            (Transform::Log { lo: 5.0 }, 9.0),
            (Transform::Logit { lo: 0.0, hi: 2.0 }, 0.98),
            (Transform::Logit { lo: 0.0, hi: 24.0 }, 13.33),
        ] {
            let u = tr.to_unconstrained(x);
            let back = tr.to_constrained(u);
            assert!((back - x).abs() < 1e-12 * x.abs().max(1.0), "{tr:?}: {back} vs {x}");
        }
    }

    #[test]
    fn reparameterization_offset_invariance() {
        // Shifting a log-parameter's window and the init by a constant gives
        // the same constrained optimum up to the shift.
        let f1 = |x: &[f64]| -> Result<f64> { Ok((x[0] - 0.7).powi(2)) };
        let f2 = |x: &[f64]| -> Result<f64> { Ok((x[0] - 10.0 - 0.7).powi(2)) };
        let r1 = minimize_box(f1, &[0.0], &[(-2.0, 2.0)], &OptimOptions::default()).unwrap();
        let r2 = minimize_box(f2, &[10.0], &[(8.0, 12.0)], &OptimOptions::default()).unwrap();
        assert!((r1.x[0] + 10.0 - r2.x[0]).abs() < 1e-6);
    }
}

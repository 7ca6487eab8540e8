//! Cross-module statistical checks: simulator-vs-formula consistency,
//! estimator calibration, and drift asymmetry. Heavier than unit tests but
//! desk-scale; every randomized check runs under a fixed seed.

use stx_core::correlation::{exp_corr, ExpCorrParams, GneitingCorrParams};
use stx_core::empirical::{censored_theta2_hat, coefficient_panel, DEFAULT_BATCH};
use stx_core::inference::{block_jackknife, maximize, FitConfig, ModelSpec};
use stx_core::likelihood::{gradient_fd, LagSet};
use stx_core::model::{theta2, trivariate_set_probs_interval, PairGeometry, SchlatherModelParams};
use stx_core::optim::Transform;
use stx_core::panel::SpaceTimePanel;
use stx_core::randomset::{alpha_interval_1d, alpha_spacetime, CylinderSetParams, IntervalSetParams};
use stx_core::rng::replicate_rng;
use stx_core::simulate::{
    simulate_interval_1d_batch, simulate_schlather_cylinder, Interval1dDesign, SimConfig,
    SpaceTimeDesign,
};

fn frechet_q(q: f64) -> f64 {
    -1.0 / q.ln()
}

fn study_design(t_len: usize) -> Interval1dDesign {
    Interval1dDesign {
        t_len,
        lambda: 4.0,
        mu: 40.0 / 3.0,
    }
}

/// Storm-count budget scaled to the grid length.
fn sim_cfg(t_len: usize) -> SimConfig {
    SimConfig {
        max_storms: (t_len as u64).max(1_000) * 1_000,
        ..Default::default()
    }
}

/// Wrap a 1D path into a panel with `n_blocks` equal blocks.
fn path_panel(z: Vec<f64>, n_blocks: usize) -> SpaceTimePanel {
    let t = z.len();
    let per = t / n_blocks;
    SpaceTimePanel::new(
        vec!["S0".into()],
        vec![[0.0, 0.0]],
        (0..t).map(|i| i.to_string()).collect(),
        (0..t).map(|i| ((i / per).min(n_blocks - 1)) as i64 + 1).collect(),
        z,
    )
    .unwrap()
}

fn fit_log_lambda(panel: &SpaceTimePanel, init: f64, u: f64) -> f64 {
    let spec = ModelSpec::ExpInterval {
        fix_mu: Some(40.0 / 3.0),
    };
    let cfg = FitConfig::for_spec(&spec);
    let lags = LagSet::explicit(vec![1]);
    maximize(panel, &spec, &[init], &cfg, u, &lags)
        .expect("fit")
        .estimates[0]
}

#[test]
fn gradient_norm_shrinks_with_sample_size() {
    // The pairwise score at the truth concentrates as T grows.
    let spec = ModelSpec::ExpInterval { fix_mu: None };
    let truth = [4.0f64.ln(), 40.0 / 3.0];
    let transforms = [Transform::Identity, Transform::Logit { lo: 0.0, hi: 24.0 }];
    let lags = LagSet::explicit(vec![1, 2]);
    let u = frechet_q(0.95);
    let mut norms = Vec::new();
    for (i, t_len) in [2_000usize, 32_000].into_iter().enumerate() {
        // Average the squared score over replicates at each size.
        let reps = 12;
        let mut acc = 0.0;
        for r in 0..reps {
            let mut rng = replicate_rng(130 + i as u64, r);
            let (z, _) = stx_core::simulate::simulate_schlather_interval_1d(
                &study_design(t_len),
                &sim_cfg(t_len),
                &mut rng,
            )
            .unwrap();
            let panel = path_panel(z, 1);
            let g = gradient_fd(
                &panel,
                |x| spec.build(x),
                &truth,
                &transforms,
                u,
                &lags,
                1e-5,
            )
            .unwrap();
            // Per-observation scale so sizes are comparable.
            let n = t_len as f64;
            acc += (g[0] / n).powi(2) + (g[1] / n).powi(2);
        }
        norms.push((acc / reps as f64).sqrt());
    }
    assert!(
        norms[1] < 0.6 * norms[0],
        "score norms did not shrink: {norms:?}"
    );
}

#[test]
fn jackknife_se_calibrated_against_replicate_sd() {
    let u = frechet_q(0.95);
    let t_len = 2_000usize;
    let cfg = SimConfig::default();

    // Empirical SD of log-lambda-hat over independent replicates.
    let n_reps = 60usize;
    let panels = simulate_interval_1d_batch(&study_design(t_len), &cfg, 131, n_reps).unwrap();
    use rayon::prelude::*;
    let fits: Vec<f64> = panels
        .into_par_iter()
        .map(|z| fit_log_lambda(&path_panel(z, 10), 4.0f64.ln(), u))
        .collect();
    let sd = {
        let m = fits.iter().sum::<f64>() / fits.len() as f64;
        (fits.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (fits.len() as f64 - 1.0)).sqrt()
    };

    // Jackknife SE on a handful of fresh panels, 10 equal blocks each.
    let jk_panels = simulate_interval_1d_batch(&study_design(t_len), &cfg, 132, 5).unwrap();
    let mut jk_ses = Vec::new();
    for z in jk_panels {
        let panel = path_panel(z, 10);
        let full = fit_log_lambda(&panel, 4.0f64.ln(), u);
        let jk = block_jackknife(&panel, &[full], |reduced, init| {
            Ok(vec![fit_log_lambda(reduced, init[0], u)])
        })
        .unwrap();
        jk_ses.push(jk.se[0]);
    }
    jk_ses.sort_by(|a, b| a.total_cmp(b));
    let jk_median = jk_ses[jk_ses.len() / 2];
    assert!(
        jk_median > 0.5 * sd && jk_median < 2.0 * sd,
        "jackknife SE {jk_median} vs replicate SD {sd}"
    );
}

#[test]
fn empirical_theta2_consistent_in_t() {
    // Median absolute error at a fixed lag decreases as T grows.
    let lag = 4u32;
    let u = frechet_q(0.95);
    let design = |t| study_design(t);
    let truth = {
        let rho = exp_corr(&ExpCorrParams { lambda: 4.0 }, lag as f64);
        let alpha =
            alpha_interval_1d(&IntervalSetParams { mu: 40.0 / 3.0 }, lag as f64).unwrap();
        theta2(rho, alpha)
    };
    let reps = 50usize;
    let mut medians = Vec::new();
    for (i, t_len) in [2_000usize, 10_000, 50_000].into_iter().enumerate() {
        let panels =
            simulate_interval_1d_batch(&design(t_len), &sim_cfg(t_len), 133 + i as u64, reps)
                .unwrap();
        use rayon::prelude::*;
        let mut errs: Vec<f64> = panels
            .into_par_iter()
            .map(|z| {
                let blocks = vec![1i64; z.len()];
                let est = censored_theta2_hat(&z, &z, &blocks, lag, u, DEFAULT_BATCH).unwrap();
                (est.value - truth).abs()
            })
            .collect();
        errs.sort_by(|a, b| a.total_cmp(b));
        medians.push(errs[reps / 2]);
    }
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "median errors not decreasing: {medians:?}"
    );
}

#[test]
fn empirical_theta2_threshold_stable() {
    let mut rng = replicate_rng(134, 0);
    let (z, _) = stx_core::simulate::simulate_schlather_interval_1d(
        &study_design(30_000),
        &sim_cfg(30_000),
        &mut rng,
    )
    .unwrap();
    let blocks = vec![1i64; z.len()];
    for lag in [0u32, 1, 3, 6] {
        let a = censored_theta2_hat(&z, &z, &blocks, lag, frechet_q(0.95), DEFAULT_BATCH).unwrap();
        let b = censored_theta2_hat(&z, &z, &blocks, lag, frechet_q(0.97), DEFAULT_BATCH).unwrap();
        // Joint CIs overlap.
        assert!(
            a.ci_lo <= b.ci_hi && b.ci_lo <= a.ci_hi,
            "lag {lag}: [{}, {}] vs [{}, {}]",
            a.ci_lo,
            a.ci_hi,
            b.ci_lo,
            b.ci_hi
        );
    }
}

#[test]
fn interval_triple_marginal_matches_pairwise_alpha() {
    let set = IntervalSetParams { mu: 40.0 / 3.0 };
    let mut rng = replicate_rng(135, 0);
    let (t12, t13) = (3.0, 8.0);
    let probs = trivariate_set_probs_interval(&set, t12, t13, 200_000, &mut rng).unwrap();
    let p2 = probs.both_given_1.0 + probs.only2_given_1.0;
    let quad = alpha_interval_1d(&set, t12).unwrap();
    let tol = 3.0 * (probs.both_given_1.1 + probs.only2_given_1.1) + 0.003;
    assert!((p2 - quad).abs() < tol, "marginal {p2} vs alpha {quad}");
}

/// Drift asymmetry: with a strong west-east mean velocity, the model curve
/// dips below its lag-0 value only in the along-wind orientation, and the
/// empirical panel reproduces the orientation ordering.
#[test]
fn drift_asymmetry_in_model_and_simulation() {
    // Slow temporal correlation decay so the along-wind dip at lag 1 is
    // not drowned by the within-storm decorrelation.
    let corr = GneitingCorrParams {
        alpha_s: 35.0f64.ln(),
        alpha_t: 10.0f64.ln(),
        beta_s: 1.0,
        beta_t: 1.0,
        gamma: 0.9,
    };
    let set = CylinderSetParams {
        m_r: 60.0,
        k_r: 8.0,
        m_v: [33.0, 11.0],
        s1sq: 5.5,
        s2sq: 5.5,
        rho12: 0.0,
        m_d: 8.0,
        k_d: 16.0,
    };
    // Stations separated by exactly one hour of mean drift.
    let coords = [[0.0f64, 0.0], [33.0, 11.0]];
    let ds = [coords[1][0] - coords[0][0], coords[1][1] - coords[0][1]];

    let model_t2 = |dsv: [f64; 2], h: f64| {
        let g = PairGeometry::from_lag(dsv, h);
        let rho = stx_core::correlation::gneiting_corr_unchecked(&corr, g.s_norm, g.t);
        let alpha = alpha_spacetime(&set, g.s_norm, g.t, g.theta).unwrap();
        theta2(rho, alpha)
    };
    let t2_lag0 = model_t2(ds, 0.0);
    let t2_along = model_t2(ds, 1.0); // A at t, B at t+1: storm rides east
    let t2_anti = model_t2([-ds[0], -ds[1]], 1.0); // B at t, A at t+1
    assert!(
        t2_along < t2_lag0 && t2_anti > t2_lag0,
        "model dip not one-sided: lag0 {t2_lag0}, along {t2_along}, anti {t2_anti}"
    );

    // Empirical orientation ordering on one simulated panel.
    let design = SpaceTimeDesign {
        coords: coords.to_vec(),
        t_len: 6_000,
        corr,
        set,
        extent_tail: 1e-3,
    };
    let cfg = SimConfig {
        max_storms: 200_000_000,
        ..Default::default()
    };
    let mut rng = replicate_rng(136, 0);
    let (values, _) = simulate_schlather_cylinder(&design, &cfg, &mut rng).unwrap();
    let panel = SpaceTimePanel::new(
        vec!["W".into(), "E".into()],
        coords.to_vec(),
        (0..design.t_len).map(|t| t.to_string()).collect(),
        vec![1; design.t_len],
        values,
    )
    .unwrap();
    let cp = coefficient_panel(&panel, 2, frechet_q(0.9), DEFAULT_BATCH).unwrap();
    // Cell (r, c) pairs Z^c_t with Z^r_{t+h}: along-wind is (E row, W col).
    let along = cp.cell(1, 0, 1).value;
    let anti = cp.cell(0, 1, 1).value;
    assert!(
        along < anti,
        "empirical asymmetry missing: along {along}, anti {anti}"
    );
    // And the along-wind estimate should sit near the model value.
    assert!(
        (along - t2_along).abs() < 0.25,
        "along {along} vs model {t2_along}"
    );
}

/// Simulated panels reproduce the pairwise coefficient formula: empirical
/// curve within CIs at most lags (light version; the acceptance suite runs
/// the full criterion).
#[test]
fn simulated_theta2_curve_matches_formula() {
    let mut rng = replicate_rng(137, 0);
    let (z, _) = stx_core::simulate::simulate_schlather_interval_1d(
        &study_design(40_000),
        &sim_cfg(40_000),
        &mut rng,
    )
    .unwrap();
    let blocks = vec![1i64; z.len()];
    let u = frechet_q(0.95);
    let mut inside = 0;
    let lags: Vec<u32> = (0..=12).collect();
    for &h in &lags {
        let est = censored_theta2_hat(&z, &z, &blocks, h, u, DEFAULT_BATCH).unwrap();
        let rho = exp_corr(&ExpCorrParams { lambda: 4.0 }, h as f64);
        let alpha = alpha_interval_1d(&IntervalSetParams { mu: 40.0 / 3.0 }, h as f64).unwrap();
        let truth = theta2(rho, alpha);
        if est.ci_lo <= truth && truth <= est.ci_hi {
            inside += 1;
        }
        // At this sample size the estimator never needs its clamp away
        // from the lag-zero boundary.
        if h >= 1 {
            assert!(!est.at_bound && est.value > 1.0 && est.value < 2.0);
        }
    }
    assert!(
        inside * 10 >= lags.len() * 8,
        "only {inside}/{} lags inside 95% CIs",
        lags.len()
    );
}

/// The fitted Schlather parameters recover the truth on a simulated panel.
#[test]
fn fit_recovers_range_parameter() {
    let u = frechet_q(0.95);
    let cfg = SimConfig::default();
    use rayon::prelude::*;
    let panels = simulate_interval_1d_batch(&study_design(2_000), &cfg, 138, 24).unwrap();
    let fits: Vec<f64> = panels
        .into_par_iter()
        .map(|z| fit_log_lambda(&path_panel(z, 1), 1.0, u))
        .collect();
    let mean = fits.iter().sum::<f64>() / fits.len() as f64;
    let truth = 4.0f64.ln();
    let sd = (fits.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / (fits.len() as f64 - 1.0))
        .sqrt();
    assert!(
        (mean - truth).abs() < 3.0 * sd / (fits.len() as f64).sqrt() + 0.1,
        "mean log-lambda {mean} vs truth {truth} (sd {sd})"
    );
}

/// Cross-check of the full model pair (rho, alpha) path used by the
/// likelihood against direct module calls.
#[test]
fn model_rho_alpha_consistency() {
    let model = SchlatherModelParams {
        corr: stx_core::model::CorrelationModel::Exponential(ExpCorrParams { lambda: 4.0 }),
        set: stx_core::model::RandomSetModel::Interval(IntervalSetParams { mu: 40.0 / 3.0 }),
    };
    for h in [0.0, 1.0, 5.0, 12.0] {
        let g = PairGeometry::new(0.0, h, 0.0).unwrap();
        let (rho, alpha) = model.rho_alpha(&g).unwrap();
        assert_eq!(rho, exp_corr(&ExpCorrParams { lambda: 4.0 }, h));
        assert_eq!(
            alpha,
            alpha_interval_1d(&IntervalSetParams { mu: 40.0 / 3.0 }, h).unwrap()
        );
    }
}

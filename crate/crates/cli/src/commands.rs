//! Command implementations. Every command writes its result artifacts plus
//! a manifest JSON (inputs, config hash, seed, version, wall time, pair
//! counts, outputs) into the output directory, and is a pure function of
//! (inputs, config, seed): artifacts are byte-identical across reruns and
//! thread counts; only the manifest's wall time varies.

use crate::config::{parse_grid, RunConfig};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use stx_core::correlation::{ExpCorrParams, GneitingCorrParams};
use stx_core::efficiency::{are_curve, TsModel};
use stx_core::empirical::{censored_theta3_hat, coefficient_panel};
use stx_core::error::{Error, Result};
use stx_core::inference::{block_jackknife, maximize, staged_fit, FitConfig, ModelSpec};
use stx_core::likelihood::{make_lag_set, pair_count, LagSet, LagSetKind};
use stx_core::margins::MarginalTransform;
use stx_core::model::{
    theta2, theta3_mc, CorrelationModel, PairGeometry, RandomSetModel, SchlatherModelParams,
    SpaceTimePoint,
};
use stx_core::panel::{
    read_long_csv, read_stations_csv, read_wide_csv, write_stations_csv, write_wide_csv,
    SpaceTimePanel,
};
use stx_core::randomset::{alpha_spacetime, CylinderSetParams, IntervalSetParams};
use stx_core::rng::replicate_rng;
use stx_core::simulate::{
    simulate_schlather_cylinder, simulate_schlather_interval_1d, Interval1dDesign, SimConfig,
    SpaceTimeDesign,
};

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    inputs: Vec<String>,
    config_hash: String,
    seed: u64,
    threads: usize,
    crate_version: &'a str,
    wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_count: Option<u64>,
    outputs: Vec<String>,
    config: Vec<(String, String)>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    details: serde_json::Value,
}

struct Run {
    started: Instant,
    out_dir: PathBuf,
    inputs: Vec<String>,
    outputs: Vec<String>,
    pair_count: Option<u64>,
    details: serde_json::Value,
}

impl Run {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let out_dir = cfg.out_dir();
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self {
            started: Instant::now(),
            out_dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
            pair_count: None,
            details: serde_json::Value::Null,
        })
    }

    fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    fn write(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, content)?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<()> {
        let manifest = Manifest {
            command,
            inputs: self.inputs.clone(),
            config_hash: cfg.config_hash(),
            seed: cfg.seed()?,
            threads: cfg.threads()?,
            crate_version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            pair_count: self.pair_count,
            outputs: self.outputs.clone(),
            config: cfg.entries(),
            details: self.details.clone(),
        };
        let name = format!("manifest_{command}.json");
        self.write_json(&name, &manifest)?;
        println!("{command}: wrote {} file(s) to {}", self.outputs.len(), self.out_dir.display());
        Ok(())
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// Model construction from config
// ---------------------------------------------------------------------------

fn cylinder_from_config(cfg: &RunConfig) -> Result<CylinderSetParams> {
    let set = CylinderSetParams {
        m_r: cfg.f64_or("param.m_r", 51.21)?,
        k_r: cfg.f64_or("param.k_r", 0.28)?,
        m_v: [
            cfg.f64_or("param.m_v1", 32.67)?,
            cfg.f64_or("param.m_v2", 11.41)?,
        ],
        s1sq: cfg.f64_or("param.s1sq", 9.0)?,
        s2sq: cfg.f64_or("param.s2sq", 11.7649)?,
        rho12: cfg.f64_or("param.rho12", -0.95)?,
        m_d: cfg.f64_or("param.m_d", 36.78)?,
        k_d: cfg.f64_or("param.k_d", 9.75)?,
    };
    set.validate()?;
    Ok(set)
}

fn gneiting_from_config(cfg: &RunConfig) -> Result<GneitingCorrParams> {
    let p = GneitingCorrParams {
        alpha_s: cfg.f64_or("param.alpha_s", 35.5f64.ln())?,
        alpha_t: cfg.f64_or("param.alpha_t", 0.0)?,
        beta_s: cfg.f64_or("param.beta_s", 0.98)?,
        beta_t: cfg.f64_or("param.beta_t", 1.0)?,
        gamma: cfg.f64_or("param.gamma", 0.99)?,
    };
    p.validate()?;
    Ok(p)
}

fn model_from_config(cfg: &RunConfig) -> Result<SchlatherModelParams> {
    match cfg.str_or("model.kind", "gneiting_cylinder") {
        "exp_interval" => Ok(SchlatherModelParams {
            corr: CorrelationModel::Exponential(ExpCorrParams {
                lambda: cfg.f64_or("param.lambda", 4.0)?,
            }),
            set: RandomSetModel::Interval(IntervalSetParams {
                mu: cfg.f64_or("param.mu", 40.0 / 3.0)?,
            }),
        }),
        "gneiting_cylinder" => Ok(SchlatherModelParams {
            corr: CorrelationModel::Gneiting(gneiting_from_config(cfg)?),
            set: RandomSetModel::Cylinder(cylinder_from_config(cfg)?),
        }),
        other => Err(Error::Config(format!("unknown model.kind {other:?}"))),
    }
}

fn spec_from_config(cfg: &RunConfig) -> Result<ModelSpec> {
    match cfg.str_or("model.kind", "gneiting_cylinder") {
        "exp_interval" => {
            let fix_mu = match cfg.get("model.fix_mu") {
                None => None,
                Some(v) => Some(v.parse().map_err(|_| {
                    Error::Config(format!("bad number for `model.fix_mu`: {v:?}"))
                })?),
            };
            Ok(ModelSpec::ExpInterval { fix_mu })
        }
        "gneiting_cylinder" => Ok(ModelSpec::GneitingCylinder {
            beta_t: cfg.f64_or("model.beta_t", 1.0)?,
        }),
        other => Err(Error::Config(format!("unknown model.kind {other:?}"))),
    }
}

fn lag_set_from_config(cfg: &RunConfig) -> Result<LagSet> {
    match cfg.str_or("lags.kind", "powers") {
        "explicit" => {
            let list = cfg.require("lags.list")?;
            let lags: Result<Vec<u32>> = list
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad lag {v:?} in lags.list")))
                })
                .collect();
            Ok(LagSet::explicit(lags?))
        }
        kind => {
            let kind = match kind {
                "all" => LagSetKind::All,
                "powers" => LagSetKind::Powers,
                "fibonacci" => LagSetKind::Fibonacci,
                other => return Err(Error::Config(format!("unknown lags.kind {other:?}"))),
            };
            let k = cfg.usize_or("lags.k", 6)? as u32;
            let a = cfg.f64_or("lags.a", 2.0)?;
            make_lag_set(kind, k, a)
        }
    }
}

fn init_from_config(cfg: &RunConfig, spec: &ModelSpec) -> Result<Vec<f64>> {
    let defaults: Vec<f64> = match spec {
        ModelSpec::ExpInterval { fix_mu: Some(_) } => vec![2.0f64.ln()],
        ModelSpec::ExpInterval { fix_mu: None } => vec![2.0f64.ln(), 10.0],
        ModelSpec::GneitingCylinder { .. } => vec![
            30.0f64.ln(),
            0.0,
            1.0,
            0.5,
            40.0,
            1.0,
            0.0,
            0.0,
            8.0,
            8.0,
            0.0,
            10.0,
            2.0,
        ],
    };
    let mut init = defaults;
    for (i, name) in spec.names().iter().enumerate() {
        if let Some(v) = cfg.get(&format!("init.{name}")) {
            init[i] = v
                .parse()
                .map_err(|_| Error::Config(format!("bad number for `init.{name}`: {v:?}")))?;
        }
    }
    Ok(init)
}

fn fit_config_from(cfg: &RunConfig, spec: &ModelSpec) -> Result<FitConfig> {
    let mut fc = match cfg.str_or("fit.stages", "joint") {
        "joint" => FitConfig::for_spec(spec),
        "paper" => FitConfig::with_paper_stages(spec),
        other => return Err(Error::Config(format!("unknown fit.stages {other:?}"))),
    };
    for (i, name) in spec.names().iter().enumerate() {
        if let Some(v) = cfg.get(&format!("bound.{name}")) {
            let (lo, hi) = v.split_once(':').ok_or_else(|| {
                Error::Config(format!("`bound.{name}` must be lo:hi, got {v:?}"))
            })?;
            fc.bounds[i] = (
                lo.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad bound for {name}")))?,
                hi.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad bound for {name}")))?,
            );
        }
    }
    fc.optim.max_iters = cfg.usize_or("fit.max_iters", 500)?;
    fc.optim.tol_grad = cfg.f64_or("fit.tol_grad", 1e-5)?;
    fc.optim.tol_step = cfg.f64_or("fit.tol_step", 1e-8)?;
    fc.optim.fd_step = cfg.f64_or("fit.fd_step", 1e-5)?;
    Ok(fc)
}

fn read_panel_from_config(cfg: &RunConfig, run: &mut Run) -> Result<SpaceTimePanel> {
    let stations_path = cfg.path("data.stations")?;
    let panel_path = cfg.path("data.panel")?;
    run.input(&stations_path);
    run.input(&panel_path);
    let stations = read_stations_csv(&std::fs::read_to_string(&stations_path)?)?;
    let text = std::fs::read_to_string(&panel_path)?;
    match cfg.str_or("data.format", "wide") {
        "wide" => read_wide_csv(&text, &stations),
        "long" => read_long_csv(&text, &stations),
        other => Err(Error::Config(format!("unknown data.format {other:?}"))),
    }
}

/// Fréchet-scale threshold from a quantile: `u = -1/log q`.
fn frechet_threshold(q: f64) -> f64 {
    -1.0 / q.ln()
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

pub fn cmd_transform(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let panel = read_panel_from_config(cfg, &mut run)?;
    let q = cfg.quantile_or("transform.quantile", 0.97)?;

    let s = panel.n_stations();
    let t = panel.n_times();
    let mut transforms = Vec::with_capacity(s);
    for st in 0..s {
        let series: Vec<f64> = (0..t).map(|ti| panel.value(ti, st)).collect();
        let m = MarginalTransform::fit(&series, q).map_err(|e| match e {
            Error::InsufficientData(msg) => Error::InsufficientData(format!(
                "station {}: {msg}",
                panel.station_ids[st]
            )),
            Error::NoConvergence { message, last } => Error::NoConvergence {
                message: format!("station {}: {message}", panel.station_ids[st]),
                last,
            },
            other => other,
        })?;
        transforms.push(m);
    }
    let mut values = vec![f64::NAN; s * t];
    for st in 0..s {
        for ti in 0..t {
            let x = panel.value(ti, st);
            if x.is_finite() {
                values[ti * s + st] = transforms[st].to_unit_frechet(&[x])[0];
            }
        }
    }
    let frechet = panel.with_values(values)?;
    run.write("panel_frechet.csv", &write_wide_csv(&frechet))?;
    run.write("stations.csv", &write_stations_csv(&frechet))?;

    let records: Vec<(String, stx_core::margins::MarginalTransformRecord)> = panel
        .station_ids
        .iter()
        .zip(&transforms)
        .map(|(id, m)| (id.clone(), m.record()))
        .collect();
    run.write_json("margins.json", &records)?;
    run.finish("transform", cfg)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn sim_config_from(cfg: &RunConfig) -> Result<SimConfig> {
    let sc = SimConfig {
        eps_sim: cfg.f64_or("sim.eps", 0.1)?,
        gauss_bound: cfg.f64_or("sim.gauss_bound", 4.0)?,
        max_storms: cfg.u64_or("sim.max_storms", 1_000_000)?,
    };
    sc.validate()?;
    Ok(sc)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let seed = cfg.seed()?;
    let t_len = cfg.usize_or("sim.t_len", 2001)?;
    let n_blocks = cfg.usize_or("sim.blocks", 1)?.max(1);
    let sc = sim_config_from(cfg)?;
    let mut rng = replicate_rng(seed, 0);

    let (panel, diag) = match cfg.str_or("sim.kind", "interval1d") {
        "interval1d" => {
            let design = Interval1dDesign {
                t_len,
                lambda: cfg.f64_or("param.lambda", 4.0)?,
                mu: cfg.f64_or("param.mu", 40.0 / 3.0)?,
            };
            let (z, diag) = simulate_schlather_interval_1d(&design, &sc, &mut rng)?;
            let per = (t_len / n_blocks).max(1);
            let panel = SpaceTimePanel::new(
                vec!["S0".into()],
                vec![[0.0, 0.0]],
                (0..t_len).map(|i| i.to_string()).collect(),
                (0..t_len)
                    .map(|i| ((i / per).min(n_blocks - 1)) as i64 + 1)
                    .collect(),
                z,
            )?;
            (panel, diag)
        }
        "cylinder" => {
            let stations_path = cfg.path("data.stations")?;
            run.input(&stations_path);
            let stations = read_stations_csv(&std::fs::read_to_string(&stations_path)?)?;
            let design = SpaceTimeDesign {
                coords: stations.iter().map(|(_, c)| *c).collect(),
                t_len,
                corr: gneiting_from_config(cfg)?,
                set: cylinder_from_config(cfg)?,
                extent_tail: cfg.f64_or("sim.extent_tail", 1e-3)?,
            };
            let (values, diag) = simulate_schlather_cylinder(&design, &sc, &mut rng)?;
            let per = (t_len / n_blocks).max(1);
            let panel = SpaceTimePanel::new(
                stations.iter().map(|(id, _)| id.clone()).collect(),
                design.coords.clone(),
                (0..t_len).map(|i| i.to_string()).collect(),
                (0..t_len)
                    .map(|i| ((i / per).min(n_blocks - 1)) as i64 + 1)
                    .collect(),
                values,
            )?;
            (panel, diag)
        }
        other => return Err(Error::Config(format!("unknown sim.kind {other:?}"))),
    };

    run.write("panel.csv", &write_wide_csv(&panel))?;
    run.write("stations.csv", &write_stations_csv(&panel))?;
    run.details = serde_json::json!({
        "n_storms": diag.n_storms,
        "n_gauss_storms": diag.n_gauss_storms,
        "sup_error_bound": diag.sup_error_bound,
        "stop_potential": diag.stop_potential,
    });
    run.finish("simulate", cfg)
}

// ---------------------------------------------------------------------------
// fit / jackknife
// ---------------------------------------------------------------------------

pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let panel = read_panel_from_config(cfg, &mut run)?;
    let spec = spec_from_config(cfg)?;
    let lags = lag_set_from_config(cfg)?;
    let u = frechet_threshold(cfg.quantile_or("fit.quantile", 0.95)?);
    let fc = fit_config_from(cfg, &spec)?;
    let init = init_from_config(cfg, &spec)?;

    run.pair_count = Some(pair_count(&panel, &lags));
    let fit = if fc.stages.len() > 1 {
        staged_fit(&panel, &spec, &init, &fc, u, &lags)?
    } else {
        maximize(&panel, &spec, &init, &fc, u, &lags)?
    };
    run.write_json("fit.json", &fit)?;
    run.finish("fit", cfg)
}

pub fn cmd_jackknife(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let panel = read_panel_from_config(cfg, &mut run)?;
    let spec = spec_from_config(cfg)?;
    let lags = lag_set_from_config(cfg)?;
    let u = frechet_threshold(cfg.quantile_or("fit.quantile", 0.95)?);
    let fc = fit_config_from(cfg, &spec)?;
    let init = init_from_config(cfg, &spec)?;

    run.pair_count = Some(pair_count(&panel, &lags));
    let full = maximize(&panel, &spec, &init, &fc, u, &lags)?;
    let jk = block_jackknife(&panel, &full.estimates, |reduced, warm| {
        Ok(maximize(reduced, &spec, warm, &fc, u, &lags)?.estimates)
    })?;
    run.write_json("jackknife.json", &jk)?;

    let mut csv = String::from("block");
    for name in spec.names() {
        let _ = write!(csv, ",{name}");
    }
    csv.push('\n');
    for (label, est) in &jk.per_block {
        let _ = write!(csv, "{label}");
        for v in est {
            let _ = write!(csv, ",{}", fmt_f(*v));
        }
        csv.push('\n');
    }
    run.write("jackknife_blocks.csv", &csv)?;
    run.finish("jackknife", cfg)
}

// ---------------------------------------------------------------------------
// coeffs
// ---------------------------------------------------------------------------

pub fn cmd_coeffs(cfg: &RunConfig, empirical: bool, model: bool) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let (empirical, model) = if !empirical && !model {
        (true, true)
    } else {
        (empirical, model)
    };
    let max_lag = cfg.usize_or("coeffs.max_lag", 24)? as u32;
    let q = cfg.quantile_or("coeffs.quantile", 0.95)?;
    let u = frechet_threshold(q);
    let batch = cfg.usize_or("coeffs.batch", stx_core::empirical::DEFAULT_BATCH)?;
    let seed = cfg.seed()?;

    let mut emp_panel = None;
    if empirical {
        let panel = read_panel_from_config(cfg, &mut run)?;
        let cp = coefficient_panel(&panel, max_lag, u, batch)?;
        let mut csv = String::from(
            "row_station,col_station,lag,theta2,ci_lo,ci_hi,n_pairs,indep_lag\n",
        );
        for r in 0..cp.n_stations {
            for c in 0..cp.n_stations {
                let indep = cp
                    .indep(r, c)
                    .map(|h| h.to_string())
                    .unwrap_or_default();
                for h in 0..=max_lag {
                    let cell = cp.cell(r, c, h);
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{}",
                        panel.station_ids[r],
                        panel.station_ids[c],
                        h,
                        fmt_f(cell.value),
                        fmt_f(cell.ci_lo),
                        fmt_f(cell.ci_hi),
                        cell.n_pairs,
                        indep
                    );
                }
            }
        }
        run.write("theta2_empirical.csv", &csv)?;
        emp_panel = Some((panel, cp));
    }

    let mut model_vals = None;
    if model {
        let params = model_from_config(cfg)?;
        // Station geometry comes from the stations table (or the panel).
        let stations = match &emp_panel {
            Some((panel, _)) => panel
                .station_ids
                .iter()
                .cloned()
                .zip(panel.coords.iter().copied())
                .collect::<Vec<_>>(),
            None => {
                let p = cfg.path("data.stations")?;
                run.input(&p);
                read_stations_csv(&std::fs::read_to_string(&p)?)?
            }
        };
        let s = stations.len();
        let mut csv = String::from("row_station,col_station,lag,theta2\n");
        let mut vals = vec![0.0f64; s * s * (max_lag as usize + 1)];
        for r in 0..s {
            for c in 0..s {
                for h in 0..=max_lag {
                    let ds = [
                        stations[r].1[0] - stations[c].1[0],
                        stations[r].1[1] - stations[c].1[1],
                    ];
                    let g = PairGeometry::from_lag(ds, h as f64);
                    let (rho, alpha) = params.rho_alpha(&g)?;
                    let t2 = theta2(rho, alpha);
                    vals[(r * s + c) * (max_lag as usize + 1) + h as usize] = t2;
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        stations[r].0,
                        stations[c].0,
                        h,
                        fmt_f(t2)
                    );
                }
            }
        }
        run.write("theta2_model.csv", &csv)?;
        model_vals = Some((stations, vals));
    }

    // Empirical-vs-model scatter when both sides are available.
    if let (Some((panel, cp)), Some((_, vals))) = (&emp_panel, &model_vals) {
        let s = cp.n_stations;
        let mut csv = String::from("row_station,col_station,lag,empirical,model,ci_lo,ci_hi\n");
        for r in 0..s {
            for c in 0..s {
                for h in 0..=max_lag {
                    let cell = cp.cell(r, c, h);
                    let m = vals[(r * s + c) * (max_lag as usize + 1) + h as usize];
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{}",
                        panel.station_ids[r],
                        panel.station_ids[c],
                        h,
                        fmt_f(cell.value),
                        fmt_f(m),
                        fmt_f(cell.ci_lo),
                        fmt_f(cell.ci_hi)
                    );
                }
            }
        }
        run.write("theta2_scatter.csv", &csv)?;

        // Trivariate coefficients for station triples at configured lag
        // patterns (l2;l3 pairs, default simultaneous).
        let patterns: Vec<(u32, u32)> = cfg
            .str_or("coeffs.triple_lags", "0,0")
            .split(';')
            .map(|p| {
                let (a, b) = p.split_once(',').ok_or_else(|| {
                    Error::Config(format!("coeffs.triple_lags pattern {p:?} must be l2,l3"))
                })?;
                Ok((
                    a.trim().parse().map_err(|_| Error::Config("bad triple lag".into()))?,
                    b.trim().parse().map_err(|_| Error::Config("bad triple lag".into()))?,
                ))
            })
            .collect::<Result<_>>()?;
        let draws = cfg.usize_or("coeffs.theta3_draws", 100_000)?;
        let params = model_from_config(cfg)?;
        let series: Vec<Vec<f64>> = (0..s)
            .map(|st| (0..panel.n_times()).map(|t| panel.value(t, st)).collect())
            .collect();
        let mut csv =
            String::from("s1,s2,s3,l2,l3,empirical,ci_lo,ci_hi,model,model_se\n");
        let mut rng = replicate_rng(seed, 1);
        for i in 0..s {
            for j in (i + 1)..s {
                for k in (j + 1)..s {
                    for &(l2, l3) in &patterns {
                        let emp = censored_theta3_hat(
                            &series[i],
                            &series[j],
                            &series[k],
                            &panel.block_labels,
                            l2,
                            l3,
                            u,
                            batch,
                        )?;
                        let mk = |st: usize, t: f64| SpaceTimePoint {
                            x: panel.coords[st][0],
                            y: panel.coords[st][1],
                            t,
                        };
                        let (m3, m3se) = theta3_mc(
                            &params,
                            &mk(i, 0.0),
                            &mk(j, l2 as f64),
                            &mk(k, l3 as f64),
                            draws,
                            &mut rng,
                        )?;
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{},{},{},{},{},{}",
                            panel.station_ids[i],
                            panel.station_ids[j],
                            panel.station_ids[k],
                            l2,
                            l3,
                            fmt_f(emp.value),
                            fmt_f(emp.ci_lo),
                            fmt_f(emp.ci_hi),
                            fmt_f(m3),
                            fmt_f(m3se)
                        );
                    }
                }
            }
        }
        run.write("theta3.csv", &csv)?;
    }
    run.finish("coeffs", cfg)
}

// ---------------------------------------------------------------------------
// efficiency / alpha
// ---------------------------------------------------------------------------

pub fn cmd_efficiency(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let model = match cfg.str_or("efficiency.model", "ar1") {
        "ar1" => TsModel::Ar1,
        "ma1" => TsModel::Ma1,
        other => return Err(Error::Config(format!("unknown efficiency.model {other:?}"))),
    };
    let family = match cfg.str_or("efficiency.family", "all") {
        "all" => LagSetKind::All,
        "powers" => LagSetKind::Powers,
        "fibonacci" => LagSetKind::Fibonacci,
        other => return Err(Error::Config(format!("unknown efficiency.family {other:?}"))),
    };
    let k_max = cfg.usize_or("efficiency.kmax", 9)? as u32;
    let lambda = cfg.f64_or("efficiency.lambda", 0.6)?;
    let sigma = cfg.f64_or("efficiency.sigma", 1.0)?;
    let t_len = cfg.usize_or("efficiency.t_len", 500)?;
    let n_mc = cfg.usize_or("efficiency.n_mc", 300)?;
    let curve = are_curve(model, family, k_max, lambda, sigma, t_len, n_mc, cfg.seed()?)?;

    let mut csv = String::from("model,family,K,are,mc_se\n");
    let model_name = match model {
        TsModel::Ar1 => "ar1",
        TsModel::Ma1 => "ma1",
    };
    let family_name = match family {
        LagSetKind::All => "all",
        LagSetKind::Powers => "powers",
        LagSetKind::Fibonacci => "fibonacci",
        LagSetKind::Explicit => "explicit",
    };
    for point in &curve {
        let _ = writeln!(
            csv,
            "{model_name},{family_name},{},{},{}",
            point.k,
            fmt_f(point.are),
            fmt_f(point.mc_se)
        );
    }
    run.write("efficiency.csv", &csv)?;
    run.finish("efficiency", cfg)
}

pub fn cmd_alpha(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let set = cylinder_from_config(cfg)?;
    let s_grid = parse_grid(cfg.str_or("alpha.s", "0:25:100"), "alpha.s")?;
    let t_grid = parse_grid(cfg.str_or("alpha.t", "0:1:8"), "alpha.t")?;
    let theta = cfg.f64_or("alpha.theta_deg", 0.0)?.to_radians();
    let mut csv = String::from("s_km,t_hr,theta_rad,alpha\n");
    for &s in &s_grid {
        for &t in &t_grid {
            let a = alpha_spacetime(&set, s, t, theta)?;
            let _ = writeln!(csv, "{},{},{},{}", fmt_f(s), fmt_f(t), fmt_f(theta), fmt_f(a));
        }
    }
    run.write("alpha.csv", &csv)?;
    run.finish("alpha", cfg)
}

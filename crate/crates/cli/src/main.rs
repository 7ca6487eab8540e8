//! `stxtreme`: threshold-based inference for space-time max-stable
//! processes — marginal transformation, exact simulation, censored pairwise
//! likelihood fitting with block-jackknife errors, extremal-coefficient
//! estimation, storm-overlap curves, and the pairwise-likelihood efficiency
//! lab. All commands are reproducible batch runs: outputs are pure
//! functions of (inputs, config, seed).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

const CONFIG_KEYS: &str = "\
CONFIG KEYS (flat `key = value` lines, `#` comments):
  data.panel              panel CSV (transform: raw observations; others: Fréchet scale)
  data.stations           stations CSV: station_id,x_km,y_km
  data.format             wide | long (default wide). Wide: time,block?,<stations>;
                          long: station_id,timestamp,value. Timestamps are ISO-8601
                          or integer hours; blocks default to the calendar year.
  transform.quantile      marginal threshold quantile (default 0.97)
  model.kind              exp_interval | gneiting_cylinder (default gneiting_cylinder)
  model.fix_mu            exp_interval only: fix the set duration instead of fitting
  model.beta_t            gneiting_cylinder: fixed temporal shape (default 1)
  param.lambda, param.mu  exp_interval model parameters
  param.alpha_s, param.alpha_t, param.beta_s, param.beta_t, param.gamma
  param.m_r, param.k_r, param.m_v1, param.m_v2, param.s1sq, param.s2sq,
  param.rho12, param.m_d, param.k_d
                          gneiting_cylinder / storm-set parameters
  init.<name>             fit starting value for a parameter (names from model.kind)
  bound.<name>            fit box constraint lo:hi
  lags.kind               all | powers | fibonacci | explicit (default powers)
  lags.k                  set size (max lag for `all`; element count incl. 0 otherwise)
  lags.a                  power base (default 2)
  lags.list               comma lags for `explicit`
  fit.quantile            censoring threshold quantile on the Fréchet scale (default 0.95)
  fit.stages              joint | paper (temporal/spatial/space-time/joint; default joint)
  fit.max_iters, fit.tol_grad, fit.tol_step, fit.fd_step
  sim.kind                interval1d | cylinder (default interval1d)
  sim.t_len               hours simulated (default 2001)
  sim.blocks              equal block labels to attach (default 1)
  sim.eps                 stopping slack in (0, 0.1] (default 0.1)
  sim.gauss_bound         truncated-Gaussian sup bound M >= 3 (default 4)
  sim.max_storms          spectral-point budget (default 1e6)
  sim.extent_tail         storm-extent truncation tail for center sampling (default 1e-3)
  coeffs.max_lag          pairwise lag range (default 24)
  coeffs.quantile         censoring quantile (default 0.95)
  coeffs.batch            batch length for dependence-adjusted CIs (default 48)
  coeffs.triple_lags      semicolon list of l2,l3 patterns for theta3 (default 0,0)
  coeffs.theta3_draws     MC draws per model theta3 (default 1e5)
  efficiency.model        ar1 | ma1        efficiency.family   all | powers | fibonacci
  efficiency.kmax         curve length     efficiency.lambda   dependence parameter
  efficiency.sigma        innovation sd    efficiency.t_len    series length
  efficiency.n_mc         MC series count
  alpha.s, alpha.t        lo:step:hi evaluation grids (km, hr)
  alpha.theta_deg         station angle from the west-east axis
  out.dir                 output directory (default ./out)
  seed                    RNG seed (default 1)
  threads                 worker cap, 0 = rayon default";

#[derive(Parser)]
#[command(
    name = "stxtreme",
    version,
    about = "Space-time max-stable threshold inference",
    after_long_help = CONFIG_KEYS
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker cap; overrides the config `threads`.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the config `out.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-station margins and write the unit-Fréchet panel.
    Transform {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate the random-set max-stable model and write a panel.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Maximize the censored pairwise likelihood.
    Fit {
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-block-out jackknife around the fit.
    Jackknife {
        #[command(flatten)]
        common: Common,
    },
    /// Pairwise/trivariate extremal coefficient curves.
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// Emit the empirical (censored estimator) grid.
        #[arg(long)]
        empirical: bool,
        /// Emit the model curves (and the scatter when combined).
        #[arg(long)]
        model: bool,
    },
    /// Asymptotic relative efficiency curves for AR(1)/MA(1).
    Efficiency {
        #[command(flatten)]
        common: Common,
        /// Time-series model (ar1 | ma1); overrides `efficiency.model`.
        #[arg(long)]
        model: Option<String>,
        /// Lag-set family (all | powers | fibonacci); overrides config.
        #[arg(long)]
        family: Option<String>,
        /// Curve length; overrides `efficiency.kmax`.
        #[arg(long = "Kmax")]
        kmax: Option<u32>,
    },
    /// Storm-set overlap alpha(s, t, theta) over a grid.
    Alpha {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, stx_core::Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set("seed", seed.to_string());
    }
    if let Some(threads) = common.threads {
        cfg.set("threads", threads.to_string());
    }
    if let Some(out) = &common.out {
        cfg.set("out.dir", out.display().to_string());
    }
    let threads = cfg.threads()?;
    if threads > 0 {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(cfg)
}

fn run() -> Result<(), stx_core::Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Transform { common } => commands::cmd_transform(&load_config(common)?),
        Command::Simulate { common } => commands::cmd_simulate(&load_config(common)?),
        Command::Fit { common } => commands::cmd_fit(&load_config(common)?),
        Command::Jackknife { common } => commands::cmd_jackknife(&load_config(common)?),
        Command::Coeffs {
            common,
            empirical,
            model,
        } => commands::cmd_coeffs(&load_config(common)?, *empirical, *model),
        Command::Efficiency {
            common,
            model,
            family,
            kmax,
        } => {
            let mut cfg = load_config(common)?;
            if let Some(m) = model {
                cfg.set("efficiency.model", m.clone());
            }
            if let Some(f) = family {
                cfg.set("efficiency.family", f.clone());
            }
            if let Some(k) = kmax {
                cfg.set("efficiency.kmax", k.to_string());
            }
            commands::cmd_efficiency(&cfg)
        }
        Command::Alpha { common } => commands::cmd_alpha(&load_config(common)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match &e {
                stx_core::Error::InsufficientData(_) => "insufficient_data",
                stx_core::Error::NoConvergence { .. } => "no_convergence",
                stx_core::Error::Domain(_) => "domain_error",
                stx_core::Error::Evaluation(_) => "evaluation_error",
                stx_core::Error::BudgetExceeded(_) => "budget_exceeded",
                stx_core::Error::JackknifeIncomplete { .. } => "jackknife_incomplete",
                stx_core::Error::Parse { .. } => "parse_error",
                stx_core::Error::Config(_) => "config_error",
                stx_core::Error::Io(_) => "io_error",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": kind, "message": e.to_string() } })
            );
            ExitCode::FAILURE
        }
    }
}

//! `rfbm` — command-line harness for the storage-process toolkit.
//!
//! Subcommands: constants, sample-fbm, queue-sim, tail-prob, pickands,
//! criterion, lil, grid-check, berman-check. Every run that writes files
//! also writes `<stem>.manifest.json` with content digests; re-running the
//! recorded argv reproduces byte-identical numeric payloads.
//!
//! Exit codes: 0 success, 1 domain/runtime error, 2 usage error.

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use serde_json::json;

use manifest::RunManifest;
use rfbm::asymptotics::{
    criterion_integral_family, derive_constants, Classification, CriterionMethod, ThresholdFamily,
};
use rfbm::fbm::{sample_fbm_circulant, sample_fbm_dense_oracle, Hurst};
use rfbm::field::{berman_gap, random_correlation_pair};
use rfbm::grid::grid_vs_continuum_experiment;
use rfbm::pickands::{estimate_pickands, estimate_pickands_theta, PickandsBudget};
use rfbm::storage::{
    lil_experiment, simulate_reflected, simulate_stationary, sup_tail_probability, LilBranch,
    SupTailParams, WindowSpec,
};

#[derive(Parser)]
#[command(
    name = "rfbm",
    version,
    about = "Simulation and numerics for the fBm-fed storage process",
    after_help = "CONVENTION: tail-prob and the asymptotic it is compared against use the \
                  window scaling of the supremum asymptotic: a window-scale T at level u \
                  covers the unscaled time interval [0, T*u]. The `tail-prob` flag \
                  --interval-t is the unscaled interval length; divide by the level to get T."
)]
struct Cli {
    /// JSON config file (flat key/value map); explicit flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output stem: payload files are written as `<stem>.csv` /
    /// `<stem>.json` plus `<stem>.manifest.json`
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print all derived model constants as JSON (17 significant digits)
    Constants {
        #[arg(long)]
        hurst: Option<f64>,
    },
    /// Sample one exact fBm path and export it as CSV (t,value)
    SampleFbm {
        #[arg(long)]
        hurst: Option<f64>,
        /// Number of grid points
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// "circulant" (default) or "dense" (slow exact reference, n <= 2048)
        #[arg(long)]
        method: Option<String>,
    },
    /// Simulate the storage process and export it as CSV (t,Q)
    QueueSim {
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// "reflected" (default) or "stationary"
        #[arg(long)]
        mode: Option<String>,
        /// Initial level for reflected mode
        #[arg(long)]
        q0: Option<f64>,
        /// Fixed truncation window for stationary mode (overrides the rule)
        #[arg(long)]
        window: Option<f64>,
        /// Largest level of interest; sizes the automatic window
        #[arg(long)]
        max_level: Option<f64>,
    },
    /// Monte Carlo estimate of P(sup over [0,interval-t] of Q > level)
    TailProb {
        #[arg(long)]
        hurst: Option<f64>,
        /// Unscaled observation interval length
        #[arg(long)]
        interval_t: Option<f64>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Window rule multiplier
        #[arg(long)]
        kappa: Option<f64>,
        /// Run the window doubling self-check first
        #[arg(long)]
        validate_window: bool,
    },
    /// Estimate the Pickands constant (extrapolated, or at fixed spacings)
    Pickands {
        #[arg(long)]
        hurst: Option<f64>,
        /// Fixed grid spacing; repeatable. Without it the extrapolated
        /// estimate over the built-in spacing ladder is computed.
        #[arg(long)]
        theta: Vec<f64>,
        #[arg(long)]
        span: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify the threshold-family criterion integral
    Criterion {
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        p: Option<f64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        /// Pickands constant; estimated at a small budget when omitted
        #[arg(long)]
        pickands: Option<f64>,
    },
    /// Iterated-logarithm experiment: crossings of f_p and running extremes
    Lil {
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        p: Option<f64>,
        /// Number of grid steps
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Statistics start at this fraction of the horizon
        #[arg(long)]
        start_frac: Option<f64>,
        #[arg(long)]
        pickands: Option<f64>,
    },
    /// Exceedance probability on the field grid vs a refined grid
    GridCheck {
        #[arg(long)]
        hurst: Option<f64>,
        /// Horizon of the scaled time variable
        #[arg(long)]
        t: Option<f64>,
        /// Grid spacing parameter; repeatable
        #[arg(long)]
        theta: Vec<f64>,
        /// Field level (>= e)
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Refinement factor of the reference grid
        #[arg(long)]
        refine: Option<usize>,
    },
    /// Sweep Berman's inequality on random correlation pairs
    BermanCheck {
        /// Vector dimension (2..=4)
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum CliError {
    Usage(String),
    Run(String),
}

impl From<rfbm::Error> for CliError {
    fn from(e: rfbm::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(format!("io error: {e}"))
    }
}

/// Flat JSON config; flags override its values.
struct Config {
    map: serde_json::Map<String, serde_json::Value>,
}

impl Config {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let map = match path {
            None => serde_json::Map::new(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {p:?}: {e}")))?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {p:?} is not JSON: {e}")))?;
                match value {
                    serde_json::Value::Object(m) => m,
                    _ => {
                        return Err(CliError::Usage(format!(
                            "config {p:?} must be a flat JSON object"
                        )))
                    }
                }
            }
        };
        Ok(Self { map })
    }

    fn f64(&self, key: &str, flag: Option<f64>, default: Option<f64>) -> Result<f64, CliError> {
        flag.or_else(|| self.map.get(key).and_then(|v| v.as_f64()))
            .or(default)
            .ok_or_else(|| CliError::Usage(format!("missing required parameter --{key}")))
    }

    fn u64(&self, key: &str, flag: Option<u64>, default: Option<u64>) -> Result<u64, CliError> {
        flag.or_else(|| self.map.get(key).and_then(|v| v.as_u64()))
            .or(default)
            .ok_or_else(|| CliError::Usage(format!("missing required parameter --{key}")))
    }

    fn usize(
        &self,
        key: &str,
        flag: Option<usize>,
        default: Option<usize>,
    ) -> Result<usize, CliError> {
        Ok(self.u64(key, flag.map(|v| v as u64), default.map(|v| v as u64))? as usize)
    }

    fn string(&self, key: &str, flag: Option<String>, default: &str) -> String {
        flag.or_else(|| self.map.get(key).and_then(|v| v.as_str().map(String::from)))
            .unwrap_or_else(|| default.to_string())
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// RFBM_THREADS caps the rayon worker count (default: all cores).
fn configure_threads() {
    if let Ok(v) = std::env::var("RFBM_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .ok();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref())?;
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let out = cli.out.clone();
    match cli.command {
        Command::Constants { hurst } => cmd_constants(&cfg, hurst, out, argv),
        Command::SampleFbm {
            hurst,
            n,
            dt,
            seed,
            method,
        } => cmd_sample_fbm(&cfg, hurst, n, dt, seed, method, out, argv),
        Command::QueueSim {
            hurst,
            horizon,
            dt,
            seed,
            mode,
            q0,
            window,
            max_level,
        } => cmd_queue_sim(
            &cfg, hurst, horizon, dt, seed, mode, q0, window, max_level, out, argv,
        ),
        Command::TailProb {
            hurst,
            interval_t,
            level,
            dt,
            reps,
            seed,
            kappa,
            validate_window,
        } => cmd_tail_prob(
            &cfg,
            hurst,
            interval_t,
            level,
            dt,
            reps,
            seed,
            kappa,
            validate_window,
            out,
            argv,
        ),
        Command::Pickands {
            hurst,
            theta,
            span,
            reps,
            seed,
        } => cmd_pickands(&cfg, hurst, theta, span, reps, seed, out, argv),
        Command::Criterion {
            hurst,
            p,
            t0,
            t_max,
            pickands,
        } => cmd_criterion(&cfg, hurst, p, t0, t_max, pickands, out, argv),
        Command::Lil {
            hurst,
            p,
            steps,
            dt,
            seed,
            start_frac,
            pickands,
        } => cmd_lil(
            &cfg, hurst, p, steps, dt, seed, start_frac, pickands, out, argv,
        ),
        Command::GridCheck {
            hurst,
            t,
            theta,
            v,
            reps,
            seed,
            refine,
        } => cmd_grid_check(&cfg, hurst, t, theta, v, reps, seed, refine, out, argv),
        Command::BermanCheck { n, instances, seed } => {
            cmd_berman_check(&cfg, n, instances, seed, out, argv)
        }
    }
}

fn parse_hurst(cfg: &Config, flag: Option<f64>) -> Result<Hurst<f64>, CliError> {
    let value = cfg.f64("hurst", flag, None)?;
    Hurst::new(value).map_err(CliError::from)
}

/// 17-significant-digit rendering for full-precision JSON payloads.
fn real17(x: f64) -> String {
    format!("{x:.16e}")
}

fn emit(
    stdout_payload: &str,
    files: Vec<(PathBuf, Vec<u8>)>,
    command: &str,
    argv: Vec<String>,
    parameters: BTreeMap<String, String>,
    seed: u64,
) -> Result<(), CliError> {
    println!("{stdout_payload}");
    if files.is_empty() {
        return Ok(());
    }
    let mut man = RunManifest::new(command, argv, parameters, seed);
    for (path, bytes) in &files {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, bytes)?;
        man.add_output(path)?;
    }
    // the manifest sits next to the first output, named after its stem
    let stem = files[0].0.with_extension("");
    man.write(&stem)?;
    Ok(())
}

fn params_map(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn cmd_constants(
    cfg: &Config,
    hurst: Option<f64>,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let h = parse_hurst(cfg, hurst)?;
    let k = derive_constants(h);
    let payload = format!(
        "{{\n  \"H\": {},\n  \"c\": {},\n  \"tau0\": {},\n  \"A\": {},\n  \"B\": {},\n  \"a\": {},\n  \"b\": {},\n  \"cH\": {},\n  \"lambda\": {}\n}}",
        real17(h.value()),
        real17(k.c),
        real17(k.tau0),
        real17(k.big_a),
        real17(k.big_b),
        real17(k.small_a),
        real17(k.small_b),
        real17(k.c_h),
        real17(k.lambda),
    );
    let files = match out {
        None => vec![],
        Some(stem) => vec![(
            stem.with_extension("json"),
            format!("{payload}\n").into_bytes(),
        )],
    };
    emit(
        &payload,
        files,
        "constants",
        argv,
        params_map(&[("hurst", h.value().to_string())]),
        0,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample_fbm(
    cfg: &Config,
    hurst: Option<f64>,
    n: Option<usize>,
    dt: Option<f64>,
    seed: Option<u64>,
    method: Option<String>,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let h = parse_hurst(cfg, hurst)?;
    let n = cfg.usize("n", n, Some(1024))?;
    let dt = cfg.f64("dt", dt, Some(1.0))?;
    let seed = cfg.u64("seed", seed, Some(0))?;
    let method = cfg.string("method", method, "circulant");
    let path = match method.as_str() {
        "circulant" => sample_fbm_circulant(n, dt, h, seed)?,
        "dense" => sample_fbm_dense_oracle(n, dt, h, seed)?,
        other => return Err(CliError::Usage(format!("unknown method '{other}'"))),
    };
    let mut csv = Vec::new();
    path.write_csv(&mut csv)?;
    let payload = serde_json::to_string_pretty(&json!({
        "points": path.len(),
        "dt": path.dt,
        "horizon": path.horizon(),
        "hurst": h.value(),
        "seed": seed,
        "method": method,
        "terminal_value": path.values[path.len() - 1],
    }))
    .unwrap();
    let files = match out {
        None => vec![],
        Some(stem) => vec![(stem.with_extension("csv"), csv)],
    };
    emit(
        &payload,
        files,
        "sample-fbm",
        argv,
        params_map(&[
            ("hurst", h.value().to_string()),
            ("n", n.to_string()),
            ("dt", dt.to_string()),
            ("seed", seed.to_string()),
            ("method", method),
        ]),
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_queue_sim(
    cfg: &Config,
    hurst: Option<f64>,
    horizon: Option<f64>,
    dt: Option<f64>,
    seed: Option<u64>,
    mode: Option<String>,
    q0: Option<f64>,
    window: Option<f64>,
    max_level: Option<f64>,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let h = parse_hurst(cfg, hurst)?;
    let horizon = cfg.f64("horizon", horizon, Some(100.0))?;
    let dt = cfg.f64("dt", dt, Some(0.01))?;
    let seed = cfg.u64("seed", seed, Some(0))?;
    let mode = cfg.string("mode", mode, "reflected");
    let k = derive_constants(h);
    let qp = match mode.as_str() {
        "reflected" => {
            let q0 = cfg.f64("q0", q0, Some(0.0))?;
            simulate_reflected(q0, horizon, dt, h, seed)?
        }
        "stationary" => {
            let spec = match cfg.f64("window", window, Some(-1.0))? {
                w if w > 0.0 => WindowSpec::Fixed(w),
                _ => WindowSpec::Auto {
                    kappa: 8.0,
                    max_level: cfg.f64("max_level", max_level, Some(2.0))?,
                },
            };
            let w = spec.resolve(&k, dt)?;
            simulate_stationary(horizon, dt, w, h, seed)?
        }
        other => return Err(CliError::Usage(format!("unknown mode '{other}'"))),
    };
    let mut csv = Vec::new();
    qp.write_csv(&mut csv)?;
    let max_q = qp.values.iter().copied().fold(f64::MIN, f64::max);
    let payload = serde_json::to_string_pretty(&json!({
        "mode": mode,
        "points": qp.len(),
        "dt": qp.dt,
        "horizon": qp.horizon(),
        "hurst": h.value(),
        "seed": seed,
        "max_value": max_q,
    }))
    .unwrap();
    let files = match out {
        None => vec![],
        Some(stem) => vec![(stem.with_extension("csv"), csv)],
    };
    emit(
        &payload,
        files,
        "queue-sim",
        argv,
        params_map(&[
            ("hurst", h.value().to_string()),
            ("horizon", horizon.to_string()),
            ("dt", dt.to_string()),
            ("seed", seed.to_string()),
            ("mode", mode),
        ]),
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_tail_prob(
    cfg: &Config,
    hurst: Option<f64>,
    interval_t: Option<f64>,
    level: Option<f64>,
    dt: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    kappa: Option<f64>,
    validate_window: bool,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let h = parse_hurst(cfg, hurst)?;
    let interval_t = cfg.f64("interval_t", interval_t, Some(1.0))?;
    let level = cfg.f64("level", level, None)?;
    let dt = cfg.f64("dt", dt, Some(0.05))?;
    let reps = cfg.usize("reps", reps, Some(10_000))?;
    let seed = cfg.u64("seed", seed, Some(0))?;
    let kappa = cfg.f64("kappa", kappa, Some(8.0))?;
    let k = derive_constants(h);
    let params = SupTailParams {
        interval_t,
        level,
        dt,
        window: WindowSpec::Auto {
            kappa,
            max_level: level.max(1.0),
        },
        reps,
        seed,
        validate_window,
    };
    let est = sup_tail_probability(&params, h, &k)?;
    let (ci_low, ci_high) = est.ci.unwrap_or((f64::NAN, f64::NAN));
    let payload = serde_json::to_string_pretty(&json!({
        "estimate": est.value,
        "stderr": est.std_error,
        "ci_low": ci_low,
        "ci_high": ci_high,
        "reps": est.reps,
        "seed": seed,
    }))
    .unwrap();
    let files = match out {
        None => vec![],
        Some(stem) => vec![(
            stem.with_extension("json"),
            format!("{payload}\n").into_bytes(),
        )],
    };
    emit(
        &payload,
        files,
        "tail-prob",
        argv,
        params_map(&[
            ("hurst", h.value().to_string()),
            ("interval_t", interval_t.to_string()),
            ("level", level.to_string()),
            ("dt", dt.to_string()),
            ("reps", reps.to_string()),
            ("seed", seed.to_string()),
        ]),
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_pickands(
    cfg: &Config,
    hurst: Option<f64>,
    theta: Vec<f64>,
    span: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let h = parse_hurst(cfg, hurst)?;
    let span = match cfg.f64("span", span, Some(-1.0))? {
        s if s > 0.0 => Some(s),
        _ => None,
    };
    let reps = cfg.usize("reps", reps, Some(200_000))?;
    let seed = cfg.u64("seed", seed, Some(0))?;
    let estimates = if theta.is_empty() {
        vec![estimate_pickands(h, seed, PickandsBudget { reps, span })?]
    } else {
        let span = span.unwrap_or_else(|| rfbm::pickands::default_span(h));
        theta
            .iter()
            .map(|&t| estimate_pickands_theta(h, t, span, reps, seed))
            .collect::<Result<Vec<_>, _>>()?
    };
    let entries: Vec<serde_json::Value> = estimates
        .iter()
        .map(|e| {
            json!({
                "hurst": e.hurst.value(),
                "theta": e.theta,
                "span": e.span,
                "reps": e.reps,
                "value": e.value,
                "stderr": e.std_error,
                "rejected": e.rejected,
            })
        })
        .collect();
    let payload =
        serde_json::to_string_pretty(&json!({ "estimates": entries, "seed": seed })).unwrap();
    let files = match out {
        None => vec![],
        Some(stem) => vec![(
            stem.with_extension("json"),
            format!("{payload}\n").into_bytes(),
        )],
    };
    emit(
        &payload,
        files,
        "pickands",
        argv,
        params_map(&[
            ("hurst", h.value().to_string()),
            ("reps", reps.to_string()),
            ("seed", seed.to_string()),
        ]),
        seed,
    )
}

fn pickands_or_default(
    cfg: &Config,
    flag: Option<f64>,
    h: Hurst<f64>,
    seed: u64,
) -> Result<f64, CliError> {
    match cfg.f64("pickands", flag, Some(-1.0))? {
        v if v > 0.0 => Ok(v),
        _ => {
            // quick default estimate; override with --pickands for precision
            let est = estimate_pickands(
                h,
                seed,
                PickandsBudget {
                    reps: 20_000,
                    span: None,
                },
            )?;
            Ok(est.value.max(1e-3))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_criterion(
    cfg: &Config,
    hurst: Option<f64>,
    p: Option<f64>,
    t0: Option<f64>,
    t_max: Option<f64>,
    pickands: Option<f64>,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let h = parse_hurst(cfg, hurst)?;
    let p = cfg.f64("p", p, None)?;
    let t_max = cfg.f64("t_max", t_max, Some(1e9))?;
    let pick = pickands_or_default(cfg, pickands, h, 1)?;
    let k = derive_constants(h);
    let fam = ThresholdFamily::new(p, k, pick)?;
    let t0 = match cfg.f64("t0", t0, Some(-1.0))? {
        v if v > 0.0 => v,
        _ => fam.s_min() + 10.0,
    };
    let report = criterion_integral_family(&fam, t0, t_max)?;
    let payload = serde_json::to_string_pretty(&json!({
        "classification": match report.classification {
            Classification::Finite => "Finite",
            Classification::Infinite => "Infinite",
        },
        "method": match report.method {
            CriterionMethod::AnalyticRate => "AnalyticRate",
            CriterionMethod::Quadrature => "Quadrature",
        },
        "integral_on_window": report.integral_on_window,
        "t0": t0,
        "t_max": t_max,
        "p": p,
        "pickands": pick,
    }))
    .unwrap();
    let files = match out {
        None => vec![],
        Some(stem) => vec![(
            stem.with_extension("json"),
            format!("{payload}\n").into_bytes(),
        )],
    };
    emit(
        &payload,
        files,
        "criterion",
        argv,
        params_map(&[
            ("hurst", h.value().to_string()),
            ("p", p.to_string()),
            ("t0", t0.to_string()),
            ("t_max", t_max.to_string()),
        ]),
        0,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_lil(
    cfg: &Config,
    hurst: Option<f64>,
    p: Option<f64>,
    steps: Option<usize>,
    dt: Option<f64>,
    seed: Option<u64>,
    start_frac: Option<f64>,
    pickands: Option<f64>,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let h = parse_hurst(cfg, hurst)?;
    let p = cfg.f64("p", p, Some(2.0))?;
    let steps = cfg.usize("steps", steps, Some(1_000_000))?;
    let dt = cfg.f64("dt", dt, Some(0.1))?;
    let seed = cfg.u64("seed", seed, Some(0))?;
    let start_frac = cfg.f64("start_frac", start_frac, Some(0.05))?;
    let pick = pickands_or_default(cfg, pickands, h, seed)?;
    let k = derive_constants(h);
    let fam = ThresholdFamily::new(p, k, pick)?;
    let horizon = steps as f64 * dt;
    let outcome = lil_experiment(&fam, horizon, dt, seed, start_frac)?;
    let mut csv = Vec::new();
    outcome.record.write_csv(&mut csv)?;
    let payload = serde_json::to_string_pretty(&json!({
        "branch": match outcome.branch {
            LilBranch::Linear => "linear",
            LilBranch::Logarithmic => "logarithmic",
        },
        "statistic_running_min": outcome.statistic_running_min,
        "growth_running_max": outcome.growth_running_max,
        "growth_constant_target": outcome.growth_constant,
        "t_start": outcome.t_start,
        "horizon": horizon,
        "p": p,
        "hurst": h.value(),
        "seed": seed,
        "pickands": pick,
    }))
    .unwrap();
    let files = match out {
        None => vec![],
        Some(stem) => vec![
            (stem.with_extension("csv"), csv),
            (
                stem.with_extension("json"),
                format!("{payload}\n").into_bytes(),
            ),
        ],
    };
    emit(
        &payload,
        files,
        "lil",
        argv,
        params_map(&[
            ("hurst", h.value().to_string()),
            ("p", p.to_string()),
            ("steps", steps.to_string()),
            ("dt", dt.to_string()),
            ("seed", seed.to_string()),
            ("start_frac", start_frac.to_string()),
        ]),
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_grid_check(
    cfg: &Config,
    hurst: Option<f64>,
    t: Option<f64>,
    theta: Vec<f64>,
    v: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    refine: Option<usize>,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let h = parse_hurst(cfg, hurst)?;
    let t = cfg.f64("t", t, Some(1.0))?;
    let v = cfg.f64("v", v, Some(core::f64::consts::E))?;
    let reps = cfg.usize("reps", reps, Some(2000))?;
    let seed = cfg.u64("seed", seed, Some(0))?;
    let refine = cfg.usize("refine", refine, Some(32))?;
    let thetas = if theta.is_empty() {
        vec![1.0, 0.3, 0.1]
    } else {
        theta
    };
    let k = derive_constants(h);
    let mut entries = Vec::new();
    for &th in &thetas {
        let res = grid_vs_continuum_experiment(t, th, v, h, &k, seed, reps, refine)?;
        entries.push(json!({
            "theta": th,
            "p_grid": res.p_grid.value,
            "p_grid_stderr": res.p_grid.std_error,
            "p_cont": res.p_cont.value,
            "p_cont_stderr": res.p_cont.std_error,
            "ratio": res.p_grid.value / res.p_cont.value,
            "violations": res.violations,
        }));
    }
    let payload = serde_json::to_string_pretty(&json!({
        "levels": entries,
        "v": v,
        "t": t,
        "refine": refine,
        "reps": reps,
        "seed": seed,
    }))
    .unwrap();
    let files = match out {
        None => vec![],
        Some(stem) => vec![(
            stem.with_extension("json"),
            format!("{payload}\n").into_bytes(),
        )],
    };
    emit(
        &payload,
        files,
        "grid-check",
        argv,
        params_map(&[
            ("hurst", h.value().to_string()),
            ("t", t.to_string()),
            ("v", v.to_string()),
            ("reps", reps.to_string()),
            ("seed", seed.to_string()),
            ("refine", refine.to_string()),
        ]),
        seed,
    )
}

fn cmd_berman_check(
    cfg: &Config,
    n: Option<usize>,
    instances: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    argv: Vec<String>,
) -> Result<(), CliError> {
    let n = cfg.usize("n", n, Some(3))?;
    if !(2..=4).contains(&n) {
        return Err(CliError::Usage(format!("dimension must be 2..=4, got {n}")));
    }
    let instances = cfg.usize("instances", instances, Some(1000))?;
    let seed = cfg.u64("seed", seed, Some(0))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    let mut max_gap = f64::NEG_INFINITY;
    let mut holds = 0usize;
    for _ in 0..instances {
        let (c1, c0) = random_correlation_pair::<f64, _>(n, &mut rng);
        let levels: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.5)).collect();
        let (lhs, rhs) = berman_gap(&c1, &c0, &levels)?;
        max_gap = max_gap.max(lhs - rhs);
        if lhs <= rhs + 1e-6 {
            holds += 1;
        }
    }
    let payload = serde_json::to_string_pretty(&json!({
        "dimension": n,
        "instances": instances,
        "holds": holds,
        "max_lhs_minus_rhs": max_gap,
        "all_hold": holds == instances,
        "seed": seed,
    }))
    .unwrap();
    let files = match out {
        None => vec![],
        Some(stem) => vec![(
            stem.with_extension("json"),
            format!("{payload}\n").into_bytes(),
        )],
    };
    emit(
        &payload,
        files,
        "berman-check",
        argv,
        params_map(&[
            ("n", n.to_string()),
            ("instances", instances.to_string()),
            ("seed", seed.to_string()),
        ]),
        seed,
    )
}

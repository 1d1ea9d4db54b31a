//! `gotmmd` — command-line access to the two-moment kernel, MMD estimators,
//! smoothed-OT bounds, discrete-OT solvers, and the three experiments.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 numerical failure
//! (quadrature or solver non-convergence).

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use gotmmd::bounds::{
    dependent_ub_random, got_rate_ub_log, kxx_lb_scale_mixture_log, kxx_ub_finite_moment_log,
    kxx_ub_subgamma_log, moment_ub_subgamma_log, select_params_finite_moment, select_params_subgamma, BoundKind,
    BoundReport,
};
use gotmmd::experiments::{configure_threads, run_to_files, ExperimentConfig, ExperimentKind};
use gotmmd::mmd::{mmd2_v_statistic, mmd2_unbiased};
use gotmmd::ot::{got_empirical, ot_exact, sinkhorn};
use gotmmd::special_fns::{noncentral_chi_moment, ChiMomentQuery};
use gotmmd::{DiscreteMeasure, Error, KernelParams, PointCloud, Result, TwoMomentKernel};

#[derive(Parser)]
#[command(
    name = "gotmmd",
    version,
    about = "Kernel-MMD bounds on Gaussian-smoothed optimal transport",
    disable_help_subcommand = true
)]
struct Cli {
    /// Master seed for randomized subcommands (required where sampling occurs).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (single-result subcommands) or directory (experiments).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON configuration file (experiments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker-thread cap; overrides the GOTMMD_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    VStatistic,
    Unbiased,
}

#[derive(Clone, Copy, ValueEnum)]
enum OtMethod {
    Exact,
    Sinkhorn,
    Got,
}

#[derive(Subcommand)]
enum Cmd {
    /// Noncentral chi moment E[chi_d(u)^s].
    Moments {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        u: f64,
        #[arg(long)]
        s: f64,
    },
    /// Evaluate the two-moment kernel at a pair of points.
    KernelEval {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Comma-separated coordinates, e.g. "1.0,0.0,-0.5".
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Squared MMD between two point-cloud CSV files (no header, one point per row).
    Mmd {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value = "v-statistic")]
        estimator: EstimatorArg,
    },
    /// Closed-form bound report (CSV) for the supplied moment assumptions.
    Bounds {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        sigma: f64,
        /// Moment order for the finite-moment bounds.
        #[arg(long)]
        s: Option<f64>,
        /// Moment value E||X||^s for the finite-moment bounds.
        #[arg(long)]
        m: Option<f64>,
        /// Sub-gamma variance proxy.
        #[arg(long)]
        v: Option<f64>,
        /// Sub-gamma scale proxy.
        #[arg(long)]
        b: Option<f64>,
        /// Sample size for rate bounds.
        #[arg(long)]
        n: Option<f64>,
        /// Design size for the random dependent-sample bound (with --n and --c-kp).
        #[arg(long)]
        big_n: Option<usize>,
        /// Kernel-dependent constant for the dependent-sample bound.
        #[arg(long)]
        c_kp: Option<f64>,
    },
    /// Discrete optimal transport between two point-cloud CSV files (uniform weights).
    Ot {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Cost exponent.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, value_enum, default_value = "exact")]
        method: OtMethod,
        /// Entropic regularization (sinkhorn).
        #[arg(long, default_value_t = 1e-3)]
        reg: f64,
        #[arg(long, default_value_t = 20000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Smoothing noise level (got).
        #[arg(long)]
        sigma: Option<f64>,
        /// Independent noise draws (got).
        #[arg(long, default_value_t = 20)]
        noise_reps: usize,
    },
    /// Run a seeded experiment and write CSV plus metadata.
    Experiment {
        #[arg(value_parser = ["fig1", "fig2", "fig3"])]
        which: String,
        /// Use full-scale grids instead of desk-scale defaults.
        #[arg(long)]
        full_scale: bool,
    },
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad coordinate '{t}'")))
        })
        .collect()
}

fn kernel_from(d: u32, p: f64, sigma: f64, eps: Option<f64>, lambda: Option<f64>) -> Result<TwoMomentKernel> {
    let params = match (eps, lambda) {
        (Some(e), Some(l)) => KernelParams::new(d, p, sigma, e, l)?,
        (None, None) => KernelParams::fallback(d, p, sigma)?,
        _ => {
            return Err(Error::Config(
                "--epsilon and --lambda must be given together".into(),
            ))
        }
    };
    TwoMomentKernel::new(params)
}

fn read_cloud(path: &Path) -> Result<PointCloud> {
    PointCloud::read_csv(BufReader::new(File::open(path)?))
}

/// Writes `text` to `--out` when given, otherwise to stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            File::create(path)?.write_all(text.as_bytes())?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Integers print without an exponent; everything else gets 17 significant digits.
fn fmt_scalar(v: f64) -> String {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) && r.abs() < 1e15 {
        format!("{}", r as i64)
    } else {
        format!("{v:.16e}")
    }
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::Config("this subcommand samples noise; pass --seed".into()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.cmd {
        Cmd::Moments { d, u, s } => {
            let v = noncentral_chi_moment(ChiMomentQuery::new(d, u, s)?)?;
            emit(&cli.out, &fmt_scalar(v))
        }
        Cmd::KernelEval { d, p, sigma, epsilon, lambda, x, y } => {
            let kernel = kernel_from(d, p, sigma, epsilon, lambda)?;
            let (x, y) = (parse_point(&x)?, parse_point(&y)?);
            if x.len() != d as usize || y.len() != d as usize {
                return Err(Error::DimensionMismatch { expected: d as usize, got: x.len().max(y.len()) });
            }
            emit(&cli.out, &format!("{:.16e}", kernel.eval(&x, &y)?))
        }
        Cmd::Mmd { a, b, p, sigma, epsilon, lambda, estimator } => {
            let (ca, cb) = (read_cloud(&a)?, read_cloud(&b)?);
            let kernel = kernel_from(ca.dim() as u32, p, sigma, epsilon, lambda)?;
            let est = match estimator {
                EstimatorArg::VStatistic => mmd2_v_statistic(&ca, &cb, &kernel)?,
                EstimatorArg::Unbiased => mmd2_unbiased(&ca, &cb, &kernel)?,
            };
            if est.negative {
                eprintln!("note: unbiased estimate is negative (within-noise null)");
            }
            emit(&cli.out, &format!("{:.16e}", est.value))
        }
        Cmd::Bounds { d, p, sigma, s, m, v, b, n, big_n, c_kp } => {
            let mut rows = vec![BoundReport::CSV_HEADER.to_string()];
            if let (Some(s), Some(m)) = (s, m) {
                let params = select_params_finite_moment(d, p, sigma, s, m)?;
                rows.push(
                    BoundReport {
                        kind: BoundKind::KxxUbFiniteMoment,
                        log_value: kxx_ub_finite_moment_log(d, p, sigma, m, params.epsilon)?,
                        params_used: Some(params),
                        inputs: format!("d={d};p={p};sigma={sigma};s={s};m={m}"),
                    }
                    .csv_row(),
                );
                if let Some(n) = n {
                    rows.push(
                        BoundReport {
                            kind: BoundKind::RateUb,
                            log_value: got_rate_ub_log(d, p, sigma, s, m, n)?,
                            params_used: Some(params),
                            inputs: format!("d={d};p={p};sigma={sigma};s={s};m={m};n={n}"),
                        }
                        .csv_row(),
                    );
                }
            }
            if let (Some(v), Some(b)) = (v, b) {
                let params = select_params_subgamma(d, p, sigma, v, b)?;
                rows.push(
                    BoundReport {
                        kind: BoundKind::KxxUbSubgamma,
                        log_value: kxx_ub_subgamma_log(d, p, sigma, v, b)?,
                        params_used: Some(params),
                        inputs: format!("d={d};p={p};sigma={sigma};v={v};b={b}"),
                    }
                    .csv_row(),
                );
                rows.push(
                    BoundReport {
                        kind: BoundKind::KxxLbScaleMixture,
                        log_value: kxx_lb_scale_mixture_log(d, p, sigma, b, params.epsilon)?,
                        params_used: Some(params),
                        inputs: format!("d={d};p={p};sigma={sigma};b={b}"),
                    }
                    .csv_row(),
                );
                if let Some(s) = s {
                    rows.push(
                        BoundReport {
                            kind: BoundKind::MomentUbSubgamma,
                            log_value: moment_ub_subgamma_log(d, s, v, b)?,
                            params_used: None,
                            inputs: format!("d={d};s={s};v={v};b={b}"),
                        }
                        .csv_row(),
                    );
                }
            }
            if let (Some(big_n), Some(n), Some(c_kp)) = (big_n, n, c_kp) {
                rows.push(
                    BoundReport {
                        kind: BoundKind::DependentUbRandom,
                        log_value: dependent_ub_random(big_n, n as usize, c_kp)?.ln(),
                        params_used: None,
                        inputs: format!("N={big_n};n={n};c_kp={c_kp}"),
                    }
                    .csv_row(),
                );
            }
            if rows.len() == 1 {
                return Err(Error::Config(
                    "no bound requested: pass --s/--m, --v/--b, or --big-n/--n/--c-kp".into(),
                ));
            }
            emit(&cli.out, &rows.join("\n"))
        }
        Cmd::Ot { a, b, p, method, reg, max_iter, tol, sigma, noise_reps } => {
            let (ca, cb) = (read_cloud(&a)?, read_cloud(&b)?);
            match method {
                OtMethod::Exact => {
                    let ma = DiscreteMeasure::uniform(ca)?;
                    let mb = DiscreteMeasure::uniform(cb)?;
                    emit(&cli.out, &format!("{:.16e}", ot_exact(&ma, &mb, p)?.cost))
                }
                OtMethod::Sinkhorn => {
                    let ma = DiscreteMeasure::uniform(ca)?;
                    let mb = DiscreteMeasure::uniform(cb)?;
                    emit(&cli.out, &format!("{:.16e}", sinkhorn(&ma, &mb, p, reg, max_iter, tol)?.cost))
                }
                OtMethod::Got => {
                    let sigma = sigma
                        .ok_or_else(|| Error::Config("--method got requires --sigma".into()))?;
                    let seed = require_seed(cli.seed)?;
                    let est = got_empirical(&ca, &cb, sigma, p, noise_reps, seed)?;
                    emit(
                        &cli.out,
                        &format!("{:.16e},{:.16e}", est.estimate, est.std_err),
                    )
                }
            }
        }
        Cmd::Experiment { which, full_scale } => {
            let kind: ExperimentKind = which.parse()?;
            let mut config = match &cli.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    let mut cfg = ExperimentConfig::from_json_str(&text)?;
                    if cfg.experiment != kind {
                        return Err(Error::Config(format!(
                            "config is for {}, subcommand asked for {}",
                            cfg.experiment.as_str(),
                            kind.as_str()
                        )));
                    }
                    if let Some(seed) = cli.seed {
                        cfg.master_seed = seed;
                    }
                    cfg
                }
                None => {
                    let mut cfg = ExperimentConfig::new(kind, require_seed(cli.seed)?);
                    cfg.desk_scale = !full_scale;
                    cfg.resolve()?
                }
            };
            if full_scale {
                config.desk_scale = false;
            }
            let out_dir = cli
                .out
                .clone()
                .or_else(|| config.output_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs"));
            let csv_path = run_to_files(&config, &out_dir)?;
            eprintln!("wrote {}", csv_path.display());
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are validation errors (exit 1); bare --help/--version succeed.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

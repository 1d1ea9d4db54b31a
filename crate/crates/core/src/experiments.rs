//! Configuration-driven reproduction of the three experiments, CSV emission,
//! and run metadata. Everything is deterministic given `(config, master_seed)`:
//! replica seeds are pre-derived, cells run in a work pool, and rows are
//! ordered by grid indices before serialization.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{kxx_lb_scale_mixture_log, kxx_ub_subgamma_log, select_params_subgamma};
use crate::distributions::{
    sample_dependent_gp, sample_subgamma_scale_mixture, sample_unit_sphere, DependentDesign, RngSeed,
};
use crate::error::{Error, Result};
use crate::kernel::TwoMomentKernel;
use crate::mmd::{delta_hat, mmd2_v_statistic, pairwise_sum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Fig1,
    Fig2,
    Fig3,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fig1 => "fig1",
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Fig3 => "fig3",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(ExperimentKind::Fig1),
            "fig2" => Ok(ExperimentKind::Fig2),
            "fig3" => Ok(ExperimentKind::Fig3),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

fn default_true() -> bool {
    true
}

/// Flat experiment configuration. Unknown JSON keys are rejected; the master
/// seed is mandatory (there is no entropy default). Empty grids are filled
/// with per-experiment defaults by [`ExperimentConfig::resolve`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub d_grid: Option<Vec<u32>>,
    #[serde(default)]
    pub delta_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub big_n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub sigma_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub replicas: Option<usize>,
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default = "default_true")]
    pub desk_scale: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, master_seed: u64) -> Self {
        Self {
            experiment,
            d_grid: None,
            delta_grid: None,
            n_grid: None,
            big_n_grid: None,
            sigma_grid: None,
            p: None,
            replicas: None,
            master_seed,
            output_dir: None,
            desk_scale: true,
        }
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.resolve()
    }

    /// Fills empty grids with per-experiment defaults and validates.
    pub fn resolve(mut self) -> Result<Self> {
        match self.experiment {
            ExperimentKind::Fig1 => {
                self.d_grid.get_or_insert_with(|| vec![5, 20, 100, 500]);
                self.delta_grid.get_or_insert_with(|| (0..=20).map(|i| i as f64 * 0.05).collect());
                self.sigma_grid.get_or_insert_with(|| vec![0.1]);
            }
            ExperimentKind::Fig2 => {
                self.d_grid.get_or_insert_with(|| (2..=20).collect());
                self.delta_grid.get_or_insert_with(|| vec![0.0, 0.25, 0.5, 0.75]);
                self.sigma_grid.get_or_insert_with(|| vec![1.0, 4.0]);
                let desk = self.desk_scale;
                self.n_grid.get_or_insert_with(|| vec![if desk { 200 } else { 400 }]);
                if self.replicas.is_none() {
                    self.replicas = Some(if self.desk_scale { 50 } else { 200 });
                }
            }
            ExperimentKind::Fig3 => {
                self.d_grid.get_or_insert_with(|| vec![5]);
                self.sigma_grid.get_or_insert_with(|| vec![0.5]);
                self.n_grid.get_or_insert_with(|| vec![30, 50, 70, 100]);
                self.big_n_grid.get_or_insert_with(|| (1..=20).map(|i| i * 5).collect());
                if self.replicas.is_none() {
                    self.replicas = Some(if self.desk_scale { 50 } else { 100 });
                }
            }
        }
        if self.p.is_none() {
            self.p = Some(1.0);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        fn need<T>(name: &str, grid: &Option<Vec<T>>, required: bool) -> Result<()> {
            match grid {
                Some(v) if v.is_empty() => {
                    Err(Error::Config(format!("{name} grid must be non-empty")))
                }
                None if required => Err(Error::Config(format!("{name} grid missing"))),
                _ => Ok(()),
            }
        }
        need("d", &self.d_grid, true)?;
        match self.experiment {
            ExperimentKind::Fig1 => {
                need("delta", &self.delta_grid, true)?;
                need("sigma", &self.sigma_grid, true)?;
            }
            ExperimentKind::Fig2 => {
                need("delta", &self.delta_grid, true)?;
                need("sigma", &self.sigma_grid, true)?;
                need("n", &self.n_grid, true)?;
            }
            ExperimentKind::Fig3 => {
                need("sigma", &self.sigma_grid, true)?;
                need("n", &self.n_grid, true)?;
                need("N", &self.big_n_grid, true)?;
            }
        }
        if let Some(r) = self.replicas {
            if r < 1 {
                return Err(Error::Config("replicas must be >= 1".into()));
            }
        }
        if self.d_grid().iter().any(|&d| d < 1) {
            return Err(Error::Config("dimensions must be >= 1".into()));
        }
        if let Some(p) = self.p {
            if !(p > 0.0) {
                return Err(Error::Config(format!("p must be > 0, got {p}")));
            }
        }
        if self.sigma_grid().iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config("sigma values must be > 0".into()));
        }
        Ok(())
    }

    /// Grid accessors: empty until [`ExperimentConfig::resolve`] fills defaults.
    pub fn d_grid(&self) -> &[u32] {
        self.d_grid.as_deref().unwrap_or(&[])
    }

    pub fn delta_grid(&self) -> &[f64] {
        self.delta_grid.as_deref().unwrap_or(&[])
    }

    pub fn n_grid(&self) -> &[usize] {
        self.n_grid.as_deref().unwrap_or(&[])
    }

    pub fn big_n_grid(&self) -> &[usize] {
        self.big_n_grid.as_deref().unwrap_or(&[])
    }

    pub fn sigma_grid(&self) -> &[f64] {
        self.sigma_grid.as_deref().unwrap_or(&[])
    }

    /// FNV-1a hash of the canonical JSON serialization.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// One deterministic bound-curve cell of the phase-transition experiment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fig1Row {
    pub d: u32,
    pub delta: f64,
    pub log_ub_over_d: f64,
    pub log_lb_over_d: f64,
}

pub const FIG1_HEADER: &str = "d,delta,log_ub_over_d,log_lb_over_d";

pub fn run_fig1(config: &ExperimentConfig) -> Result<Vec<Fig1Row>> {
    let p = config.p.unwrap_or(1.0);
    let sigma = config.sigma_grid()[0];
    let v = 1.0;
    let mut rows = Vec::new();
    for &d in config.d_grid() {
        for &delta in config.delta_grid() {
            let b = (d as f64).powf(-delta);
            let eps = (d as f64).sqrt();
            rows.push(Fig1Row {
                d,
                delta,
                log_ub_over_d: kxx_ub_subgamma_log(d, p, sigma, v, b)? / d as f64,
                log_lb_over_d: kxx_lb_scale_mixture_log(d, p, sigma, b, eps)? / d as f64,
            });
        }
    }
    Ok(rows)
}

pub fn fig1_csv(rows: &[Fig1Row]) -> String {
    let mut out = String::from(FIG1_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.d,
            fmt(r.delta),
            fmt(r.log_ub_over_d),
            fmt(r.log_lb_over_d)
        ));
    }
    out
}

/// One Monte-Carlo cell of the sub-gamma sandwich experiment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fig2Row {
    pub d: u32,
    pub delta: f64,
    pub sigma: f64,
    pub log_ub_over_d: f64,
    pub log_lb_over_d: f64,
    /// `(1/d) ln` of the replica-mean of `delta_hat^2`.
    pub mc_mean_over_d: f64,
    /// Standard error of the (linear) replica mean.
    pub mc_se: f64,
    pub n: usize,
    pub replicas: usize,
}

impl Fig2Row {
    /// Linear replica mean reconstructed from the log column.
    pub fn mc_mean(&self) -> f64 {
        (self.d as f64 * self.mc_mean_over_d).exp()
    }
}

pub const FIG2_HEADER: &str =
    "d,delta,sigma,log_ub_over_d,log_lb_over_d,mc_mean_over_d,mc_se,n,replicas";

pub fn run_fig2(config: &ExperimentConfig) -> Result<Vec<Fig2Row>> {
    let p = config.p.unwrap_or(1.0);
    let n = config.n_grid()[0];
    let replicas = config.replicas.unwrap_or(50);
    let v = 1.0;
    let root = RngSeed::new(config.master_seed);
    let mut cells = Vec::new();
    for &d in config.d_grid() {
        for &delta in config.delta_grid() {
            for &sigma in config.sigma_grid() {
                cells.push((d, delta, sigma));
            }
        }
    }
    let rows: Result<Vec<Fig2Row>> = cells
        .par_iter()
        .enumerate()
        .map(|(cell_idx, &(d, delta, sigma))| {
            let b = (d as f64).powf(-delta);
            let params = select_params_subgamma(d, p, sigma, v, b)?;
            // Sample every replica first so the interpolation table can cover
            // the full u-range; out-of-range queries fall back to the series.
            let mut clouds = Vec::with_capacity(replicas);
            let mut max_norm: f64 = 0.0;
            for t in 0..replicas {
                let sa = root.child2(cell_idx as u64, 2 * t as u64);
                let sb = root.child2(cell_idx as u64, 2 * t as u64 + 1);
                let a = sample_subgamma_scale_mixture(n, d as usize, b, sa)?;
                let bcl = sample_subgamma_scale_mixture(n, d as usize, b, sb)?;
                for cloud in [&a, &bcl] {
                    max_norm = max_norm
                        .max(cloud.rows().map(|r| crate::cloud::sq_norm(r).sqrt()).fold(
                            0.0_f64,
                            f64::max,
                        ));
                }
                clouds.push((a, bcl));
            }
            let u_max = std::f64::consts::SQRT_2 * max_norm / sigma * 1.001;
            let kernel = TwoMomentKernel::with_table(params, u_max)?;
            let vals: Result<Vec<f64>> =
                clouds.iter().map(|(a, bcl)| delta_hat(a, bcl, &kernel)).collect();
            let vals = vals?;
            let mean = pairwise_sum(&vals) / replicas as f64;
            let se = if replicas > 1 {
                let dev: Vec<f64> = vals.iter().map(|x| (x - mean) * (x - mean)).collect();
                (pairwise_sum(&dev) / (replicas as f64 - 1.0) / replicas as f64).sqrt()
            } else {
                0.0
            };
            Ok(Fig2Row {
                d,
                delta,
                sigma,
                log_ub_over_d: kxx_ub_subgamma_log(d, p, sigma, v, b)? / d as f64,
                log_lb_over_d: kxx_lb_scale_mixture_log(d, p, sigma, b, params.epsilon)? / d as f64,
                mc_mean_over_d: mean.ln() / d as f64,
                mc_se: se,
                n,
                replicas,
            })
        })
        .collect();
    rows
}

pub fn fig2_csv(rows: &[Fig2Row]) -> String {
    let mut out = String::from(FIG2_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.d,
            fmt(r.delta),
            fmt(r.sigma),
            fmt(r.log_ub_over_d),
            fmt(r.log_lb_over_d),
            fmt(r.mc_mean_over_d),
            fmt(r.mc_se),
            r.n,
            r.replicas
        ));
    }
    out
}

/// One cell of the dependent-sample experiment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fig3Row {
    pub big_n: usize,
    pub n: usize,
    pub mean_gamma2: f64,
    pub std_gamma2: f64,
    pub replicas: usize,
}

pub const FIG3_HEADER: &str = "N,n,mean_gamma2,std_gamma2,replicas";

pub fn run_fig3(config: &ExperimentConfig) -> Result<Vec<Fig3Row>> {
    let p = config.p.unwrap_or(1.0);
    let d = config.d_grid()[0];
    let sigma = config.sigma_grid()[0];
    let replicas = config.replicas.unwrap_or(50);
    // Kernel parameters follow the sub-gamma rule with (v, b) = (1, 0); the
    // marginals are standard Gaussian.
    let params = select_params_subgamma(d, p, sigma, 1.0, 0.0)?;
    // One shared table: u = ||x+y||/(sqrt(2) sigma) stays modest for Gaussian
    // marginals; out-of-range queries fall back to the exact series.
    let u_max = (2.0 * (d as f64).sqrt() + 24.0) * std::f64::consts::SQRT_2 / sigma;
    let kernel = TwoMomentKernel::with_table(params, u_max)?;
    let root = RngSeed::new(config.master_seed);
    let mut cells = Vec::new();
    for &big_n in config.big_n_grid() {
        for &n in config.n_grid() {
            cells.push((big_n, n));
        }
    }
    let rows: Result<Vec<Fig3Row>> = cells
        .par_iter()
        .enumerate()
        .map(|(cell_idx, &(big_n, n))| {
            // One alpha-design per cell; all realizations condition on it.
            let alphas = sample_unit_sphere(n, big_n, root.child2(cell_idx as u64, 0))?;
            let design = DependentDesign::new(alphas)?;
            let mut vals = Vec::with_capacity(replicas);
            for t in 0..replicas {
                let s1 = root.child2(cell_idx as u64, 1 + 2 * t as u64);
                let s2 = root.child2(cell_idx as u64, 2 + 2 * t as u64);
                let a = sample_dependent_gp(&design, d as usize, s1)?;
                let b = sample_dependent_gp(&design, d as usize, s2)?;
                vals.push(mmd2_v_statistic(&a, &b, &kernel)?.value);
            }
            let mean = pairwise_sum(&vals) / replicas as f64;
            let std = if replicas > 1 {
                let dev: Vec<f64> = vals.iter().map(|x| (x - mean) * (x - mean)).collect();
                (pairwise_sum(&dev) / (replicas as f64 - 1.0)).sqrt()
            } else {
                0.0
            };
            Ok(Fig3Row { big_n, n, mean_gamma2: mean, std_gamma2: std, replicas })
        })
        .collect();
    rows
}

pub fn fig3_csv(rows: &[Fig3Row]) -> String {
    let mut out = String::from(FIG3_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.big_n,
            r.n,
            fmt(r.mean_gamma2),
            fmt(r.std_gamma2),
            r.replicas
        ));
    }
    out
}

/// Least-squares fit of `ln(value)` against `ln(n)`.
pub fn fit_decay_slope(ns: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    if ns.len() != values.len() || ns.len() < 3 {
        return Err(Error::InvalidParameter("need >= 3 (n, value) points".into()));
    }
    if ns.iter().chain(values).any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("degenerate n grid".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, intercept, r_squared))
}

/// Run metadata written next to every CSV.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub master_seed: u64,
    pub version: &'static str,
    pub wall_clock_secs: f64,
    pub rows_written: usize,
}

/// Runs the configured experiment and writes `<fig>.csv` plus
/// `<fig>.meta.json` into `out_dir`. Returns the CSV path.
pub fn run_to_files(config: &ExperimentConfig, out_dir: &std::path::Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let (csv, rows_written) = match config.experiment {
        ExperimentKind::Fig1 => {
            let rows = run_fig1(config)?;
            (fig1_csv(&rows), rows.len())
        }
        ExperimentKind::Fig2 => {
            let rows = run_fig2(config)?;
            (fig2_csv(&rows), rows.len())
        }
        ExperimentKind::Fig3 => {
            let rows = run_fig3(config)?;
            (fig3_csv(&rows), rows.len())
        }
    };
    let name = config.experiment.as_str();
    let csv_path = out_dir.join(format!("{name}.csv"));
    std::fs::File::create(&csv_path)?.write_all(csv.as_bytes())?;
    let record = RunRecord {
        config: config.clone(),
        config_hash: format!("{:016x}", config.hash()),
        master_seed: config.master_seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_clock_secs: start.elapsed().as_secs_f64(),
        rows_written,
    };
    let meta = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Config(format!("metadata serialization: {e}")))?;
    std::fs::File::create(out_dir.join(format!("{name}.meta.json")))?
        .write_all(meta.as_bytes())?;
    Ok(csv_path)
}

/// Configures the global work pool. Priority: explicit argument, then the
/// `GOTMMD_THREADS` environment variable, then the rayon default. Calling it
/// twice is harmless (the second call is a no-op).
pub fn configure_threads(threads: Option<usize>) -> Result<()> {
    let n = match threads {
        Some(n) => Some(n),
        None => std::env::var("GOTMMD_THREADS")
            .ok()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad GOTMMD_THREADS value '{s}'")))
            })
            .transpose()?,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        // Ignore "already initialized": determinism never depends on pool size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

//! MMD estimators (the diagonal-inclusive V-statistic used throughout the
//! experiments, plus the standard unbiased U-statistic), the rescaled
//! `delta_hat` statistic, Monte-Carlo kernel-mean estimation, and pairwise
//! dependence measurement.

use crate::cloud::PointCloud;
use crate::distributions::{PointSampler, RngSeed};
use crate::error::{Error, Result};
use crate::kernel::TwoMomentKernel;

/// Which estimator produced an MMD value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Diagonal-inclusive V-statistic; always nonnegative.
    VStatistic,
    /// Standard unbiased U-statistic; may be negative (reported as-is).
    UnbiasedUStatistic,
}

/// A squared-MMD estimate.
#[derive(Clone, Copy, Debug)]
pub struct MmdEstimate {
    pub value: f64,
    pub kind: EstimatorKind,
    pub n: usize,
    pub m: usize,
    /// Set when an unbiased estimate came out negative.
    pub negative: bool,
}

fn check_pair(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

fn sum_within(cloud: &PointCloud, kernel: &TwoMomentKernel, include_diag: bool) -> Result<f64> {
    let n = cloud.len();
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        if include_diag {
            diag += kernel.eval(cloud.row(i), cloud.row(i))?;
        }
        for j in (i + 1)..n {
            off += kernel.eval(cloud.row(i), cloud.row(j))?;
        }
    }
    Ok(2.0 * off + diag)
}

fn sum_cross(a: &PointCloud, b: &PointCloud, kernel: &TwoMomentKernel) -> Result<f64> {
    let mut s = 0.0;
    for x in a.rows() {
        for y in b.rows() {
            s += kernel.eval(x, y)?;
        }
    }
    Ok(s)
}

/// Diagonal-inclusive squared-MMD V-statistic:
/// `n^{-2} sum k(x_i, x_j) + m^{-2} sum k(y_i, y_j) - 2 (nm)^{-1} sum k(x_i, y_j)`.
///
/// This is the squared RKHS norm of the difference of empirical mean
/// embeddings, hence nonnegative up to Gram round-off.
pub fn mmd2_v_statistic(a: &PointCloud, b: &PointCloud, kernel: &TwoMomentKernel) -> Result<MmdEstimate> {
    check_pair(a, b)?;
    let (n, m) = (a.len(), b.len());
    let kxx = sum_within(a, kernel, true)? / (n * n) as f64;
    let kyy = sum_within(b, kernel, true)? / (m * m) as f64;
    let kxy = sum_cross(a, b, kernel)? / (n * m) as f64;
    Ok(MmdEstimate {
        value: kxx + kyy - 2.0 * kxy,
        kind: EstimatorKind::VStatistic,
        n,
        m,
        negative: false,
    })
}

/// Unbiased squared-MMD U-statistic (diagonals excluded); may be negative.
pub fn mmd2_unbiased(
    a: &PointCloud,
    b: &PointCloud,
    kernel: &TwoMomentKernel,
) -> Result<MmdEstimate> {
    check_pair(a, b)?;
    let (n, m) = (a.len(), b.len());
    if n < 2 || m < 2 {
        return Err(Error::InvalidParameter("unbiased estimator needs n, m >= 2".into()));
    }
    let kxx = sum_within(a, kernel, false)? / (n * (n - 1)) as f64;
    let kyy = sum_within(b, kernel, false)? / (m * (m - 1)) as f64;
    let kxy = sum_cross(a, b, kernel)? / (n * m) as f64;
    let value = kxx + kyy - 2.0 * kxy;
    Ok(MmdEstimate {
        value,
        kind: EstimatorKind::UnbiasedUStatistic,
        n,
        m,
        negative: value < 0.0,
    })
}

/// `delta_hat^2 = (n/2) * mmd2_v_statistic(A, B)` for equal-size clouds; its
/// expectation is `E k(X,X) - E k(X,X')` for iid halves.
pub fn delta_hat(a: &PointCloud, b: &PointCloud, kernel: &TwoMomentKernel) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "delta_hat needs equal sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.len() as f64 / 2.0 * mmd2_v_statistic(a, b, kernel)?.value)
}

/// Pairwise summation of a slice: order-stable, lower round-off than a naive
/// left fold, and independent of how work was scheduled upstream.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimate of `E k(X, X)` with standard error.
pub fn expected_kxx_mc(
    sampler: &dyn PointSampler,
    kernel: &TwoMomentKernel,
    n_draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_draws < 2 {
        return Err(Error::InvalidParameter("need n_draws >= 2".into()));
    }
    let cloud = sampler.sample(n_draws, seed)?;
    let vals: Result<Vec<f64>> = cloud.rows().map(|x| kernel.eval(x, x)).collect();
    Ok(mean_se(&vals?))
}

/// Monte-Carlo estimate of `E k(X, X')` over fresh independent pairs.
pub fn expected_kxy_mc(
    sampler: &dyn PointSampler,
    kernel: &TwoMomentKernel,
    n_pairs: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_pairs < 2 {
        return Err(Error::InvalidParameter("need n_pairs >= 2".into()));
    }
    let root = RngSeed::new(seed);
    let xs = sampler.sample(n_pairs, root.child(0))?;
    let ys = sampler.sample(n_pairs, root.child(1))?;
    let vals: Result<Vec<f64>> =
        xs.rows().zip(ys.rows()).map(|(x, y)| kernel.eval(x, y)).collect();
    Ok(mean_se(&vals?))
}

/// Estimated pairwise dependence between sample slots `i` and `j`.
#[derive(Clone, Copy, Debug)]
pub struct PairwiseDependence {
    pub i: usize,
    pub j: usize,
    pub r_hat: f64,
    pub std_err: f64,
}

/// `r_ij = E k(S_i, S_j) - E k(S_i, S_j')` estimated from independent
/// replicas of the joint sample: the coupled term averages `k` within each
/// replica, the independent term pairs slot `i` of replica `t` with slot `j`
/// of replica `t+1` (cyclically), which are independent draws.
pub fn pairwise_r(
    replicas: &[PointCloud],
    i: usize,
    j: usize,
    kernel: &TwoMomentKernel,
) -> Result<PairwiseDependence> {
    if replicas.len() < 2 {
        return Err(Error::InvalidParameter("pairwise_r needs >= 2 replicas".into()));
    }
    let t_max = replicas.len();
    let mut diffs = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let coupled = kernel.eval(replicas[t].row(i), replicas[t].row(j))?;
        let independent = kernel.eval(replicas[t].row(i), replicas[(t + 1) % t_max].row(j))?;
        diffs.push(coupled - independent);
    }
    let (r_hat, std_err) = mean_se(&diffs);
    Ok(PairwiseDependence { i, j, r_hat, std_err })
}

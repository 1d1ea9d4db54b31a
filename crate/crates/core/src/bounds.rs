//! Closed-form bound evaluation: the finite-moment kernel bound and its
//! parameter rule, the empirical-GOT rate chain, the sub-gamma moment bound,
//! the sub-gamma kernel bound and its parameter rule, the scale-mixture lower
//! bound, phase-transition asymptotes, and the dependent-sample bounds.
//!
//! Everything is computed in log space and stays finite up to d ~ 1e4.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kernel::{alpha_coeff_log, KernelParams};
use crate::special_fns::{central_chi_moment_log, mbar_log};

/// Which bound a report carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    RateUb,
    KxxUbFiniteMoment,
    MomentUbSubgamma,
    KxxUbSubgamma,
    KxxLbScaleMixture,
    DependentUbDesign,
    DependentUbRandom,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::RateUb => "rate_ub",
            BoundKind::KxxUbFiniteMoment => "kxx_ub_finite_moment",
            BoundKind::MomentUbSubgamma => "moment_ub_subgamma",
            BoundKind::KxxUbSubgamma => "kxx_ub_subgamma",
            BoundKind::KxxLbScaleMixture => "kxx_lb_scale_mixture",
            BoundKind::DependentUbDesign => "dependent_ub_design",
            BoundKind::DependentUbRandom => "dependent_ub_random",
        }
    }
}

/// An evaluated bound, stored in log space.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub log_value: f64,
    pub params_used: Option<KernelParams>,
    /// Human-readable input description for the CSV trail.
    pub inputs: String,
}

impl BoundReport {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub const CSV_HEADER: &'static str = "kind,inputs,epsilon,lambda,log_value,value";

    pub fn csv_row(&self) -> String {
        let (eps, lambda) = match &self.params_used {
            Some(p) => (format!("{:.16e}", p.epsilon), format!("{:.16e}", p.lambda)),
            None => (String::new(), String::new()),
        };
        let value = self.value();
        let value_str = if value.is_finite() { format!("{value:.16e}") } else { String::new() };
        format!(
            "{},{},{},{},{:.16e},{}",
            self.kind.as_str(),
            self.inputs,
            eps,
            lambda,
            self.log_value,
            value_str
        )
    }
}

/// Kernel parameters for the finite-moment bound:
/// `eps = min(d+2p, s-d-2p)`, `lambda = sqrt(d+2p+eps) + sqrt(2) m / sigma`.
pub fn select_params_finite_moment(d: u32, p: f64, sigma: f64, s: f64, m: f64) -> Result<KernelParams> {
    let r = d as f64 + 2.0 * p;
    if !(s > r) {
        return Err(Error::InvalidParameter(format!("need s > d+2p = {r}, got s = {s}")));
    }
    if !(m >= 0.0) {
        return Err(Error::InvalidParameter(format!("need m >= 0, got {m}")));
    }
    let eps = r.min(s - r);
    let lambda = (r + eps).sqrt() + std::f64::consts::SQRT_2 * m / sigma;
    KernelParams::new(d, p, sigma, eps, lambda)
}

/// ln of the finite-moment kernel bound
/// `E k(X,X) <= (alpha_{d,p}/eps)(sqrt(2d+2p+eps) + sqrt(2) m/sigma)^{d+2p}`.
pub fn kxx_ub_finite_moment_log(d: u32, p: f64, sigma: f64, m: f64, eps: f64) -> Result<f64> {
    let r = d as f64 + 2.0 * p;
    if !(eps > 0.0 && eps <= r) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, {r}], got {eps}")));
    }
    if !(m >= 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidParameter("need m >= 0 and sigma > 0".into()));
    }
    let base = (2.0 * d as f64 + 2.0 * p + eps).sqrt() + std::f64::consts::SQRT_2 * m / sigma;
    Ok(alpha_coeff_log(d, p)? - eps.ln() + r * base.ln())
}

pub fn kxx_ub_finite_moment(d: u32, p: f64, sigma: f64, m: f64, eps: f64) -> Result<f64> {
    kxx_ub_finite_moment_log(d, p, sigma, m, eps).map(f64::exp)
}

/// ln of the explicit empirical-GOT rate chain
/// `E T_p^(sigma)(P, P_n) <= 2^{max(p-1,0)} sigma^p sqrt(kxx_ub) / sqrt(n)`,
/// with the kernel parameters of the finite-moment rule. No hidden constants.
pub fn got_rate_ub_log(d: u32, p: f64, sigma: f64, s: f64, m: f64, n: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::InvalidParameter(format!("need n >= 1, got {n}")));
    }
    let params = select_params_finite_moment(d, p, sigma, s, m)?;
    let kxx_log = kxx_ub_finite_moment_log(d, p, sigma, m, params.epsilon)?;
    Ok((p - 1.0).max(0.0) * std::f64::consts::LN_2 + p * sigma.ln() + 0.5 * kxx_log
        - 0.5 * n.ln())
}

pub fn got_rate_ub(d: u32, p: f64, sigma: f64, s: f64, m: f64, n: f64) -> Result<f64> {
    got_rate_ub_log(d, p, sigma, s, m, n).map(f64::exp)
}

/// ln of the sub-gamma moment bound
/// `E ||X||^s <= sqrt(2e)(sqrt(v) + sqrt(s) b)^s M_d(s)`.
pub fn moment_ub_subgamma_log(d: u32, s: f64, v: f64, b: f64) -> Result<f64> {
    if !(s >= 0.0) || !(v > 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need s >= 0, v > 0, b >= 0; got ({s}, {v}, {b})"
        )));
    }
    Ok(0.5 * (2.0 * std::f64::consts::E).ln()
        + s * (v.sqrt() + s.sqrt() * b).ln()
        + central_chi_moment_log(d as f64, s)?)
}

pub fn moment_ub_subgamma(d: u32, s: f64, v: f64, b: f64) -> Result<f64> {
    moment_ub_subgamma_log(d, s, v, b).map(f64::exp)
}

/// ln of `m(t) = (sqrt(sigma^2 + 2v) + sqrt(r+t) b)^{r+t} Mbar_d(r+t)`,
/// `r = d+2p`, extended to `t in (-r, r]` so the lambda rule can use m(-eps).
pub fn m_t_subgamma_log(d: u32, p: f64, sigma: f64, v: f64, b: f64, t: f64) -> Result<f64> {
    let r = d as f64 + 2.0 * p;
    if !(t > -r && t <= r) {
        return Err(Error::InvalidParameter(format!("t must lie in (-{r}, {r}], got {t}")));
    }
    if !(sigma > 0.0) || !(v > 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidParameter("need sigma > 0, v > 0, b >= 0".into()));
    }
    let rt = r + t;
    Ok(rt * ((sigma * sigma + 2.0 * v).sqrt() + rt.sqrt() * b).ln() + mbar_log(d as f64, rt)?)
}

pub fn m_t_subgamma(d: u32, p: f64, sigma: f64, v: f64, b: f64, t: f64) -> Result<f64> {
    m_t_subgamma_log(d, p, sigma, v, b, t).map(f64::exp)
}

/// Kernel parameters for the sub-gamma bound: `eps = sqrt(d)` and the
/// geometric-mean-optimal `lambda = (M_+ / M_-)^{1/(2 eps)}` where
/// `M_{+-} ~ m(+-eps)/sigma^{r +- eps}` evaluated with the effective scale
/// `sqrt(2) b` of `Y = (sqrt(2)/sigma) X + Z`. This reduces to
/// `(m(eps)/m(-eps))^{1/(2 eps)}` only at `sigma = 1`; the `1/sigma` factor
/// is required for `kxx_ub_subgamma` to dominate `E k(X,X)` at other
/// bandwidths.
pub fn select_params_subgamma(d: u32, p: f64, sigma: f64, v: f64, b: f64) -> Result<KernelParams> {
    let eps = (d as f64).sqrt();
    let b_eff = std::f64::consts::SQRT_2 * b;
    let log_lambda = (m_t_subgamma_log(d, p, sigma, v, b_eff, eps)?
        - m_t_subgamma_log(d, p, sigma, v, b_eff, -eps)?)
        / (2.0 * eps)
        - sigma.ln();
    KernelParams::new(d, p, sigma, eps, log_lambda.exp())
}

/// ln of the sub-gamma kernel bound
/// `E k(X,X) <= C (d+p)^p (sqrt(1 + 2v/sigma^2) + sqrt(d+2p) b/sigma)^{d+2p}`,
/// `C = sqrt(2 pi) e^{7/8}`.
pub fn kxx_ub_subgamma_log(d: u32, p: f64, sigma: f64, v: f64, b: f64) -> Result<f64> {
    if d < 1 || !(p > 0.0) || !(sigma > 0.0) || !(v > 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid sub-gamma bound inputs (d={d}, p={p}, sigma={sigma}, v={v}, b={b})"
        )));
    }
    let r = d as f64 + 2.0 * p;
    let log_c = 0.5 * (2.0 * std::f64::consts::PI).ln() + 7.0 / 8.0;
    let base = (1.0 + 2.0 * v / (sigma * sigma)).sqrt() + r.sqrt() * b / sigma;
    Ok(log_c + p * (d as f64 + p).ln() + r * base.ln())
}

pub fn kxx_ub_subgamma(d: u32, p: f64, sigma: f64, v: f64, b: f64) -> Result<f64> {
    kxx_ub_subgamma_log(d, p, sigma, v, b).map(f64::exp)
}

/// ln of the scale-mixture lower bound
/// `E k(X,X) >= (alpha_{d,p}/eps)(sqrt(2) b/sigma)^r
///  (M_{1/b^2}(r-eps) M_{1/b^2}(r+eps))^{1/2} (M_d(r-eps) M_d(r+eps))^{1/2}`,
/// valid for every `(eps, lambda)` since the geometric-mean step removed lambda.
pub fn kxx_lb_scale_mixture_log(d: u32, p: f64, sigma: f64, b: f64, eps: f64) -> Result<f64> {
    let r = d as f64 + 2.0 * p;
    if !(eps > 0.0 && eps <= r) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, {r}], got {eps}")));
    }
    if !(b > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidParameter("need b > 0 and sigma > 0".into()));
    }
    let inv_b2 = 1.0 / (b * b);
    Ok(alpha_coeff_log(d, p)? - eps.ln()
        + r * (std::f64::consts::SQRT_2 * b / sigma).ln()
        + 0.5 * (central_chi_moment_log(inv_b2, r - eps)? + central_chi_moment_log(inv_b2, r + eps)?)
        + 0.5 * (central_chi_moment_log(d as f64, r - eps)? + central_chi_moment_log(d as f64, r + eps)?))
}

pub fn kxx_lb_scale_mixture(d: u32, p: f64, sigma: f64, b: f64, eps: f64) -> Result<f64> {
    kxx_lb_scale_mixture_log(d, p, sigma, b, eps).map(f64::exp)
}

/// The exponential-regime plateau `(1/2) ln(1 + 2v/sigma^2)` of
/// `(1/d) ln E k(X,X)` when the scale parameter decays faster than `d^{-1/2}`.
pub fn phase_transition_asymptote(v: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(v >= 0.0) {
        return Err(Error::InvalidParameter("need sigma > 0 and v >= 0".into()));
    }
    Ok(0.5 * (2.0 * v / (sigma * sigma)).ln_1p())
}

/// Design-conditional dependent-sample bound:
/// `E gamma_k^2(P, P_n) <= C_kP (1/n + n^{-2} sum_{i != j} |<alpha_i, alpha_j>|)`.
pub fn dependent_ub_design(alphas: &PointCloud, c_kp: f64, n: usize) -> Result<f64> {
    if !(c_kp >= 0.0) {
        return Err(Error::InvalidParameter(format!("need C_kP >= 0, got {c_kp}")));
    }
    if alphas.len() != n || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "design has {} rows, expected n = {n}",
            alphas.len()
        )));
    }
    for (i, row) in alphas.rows().enumerate() {
        let norm = crate::cloud::sq_norm(row).sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("row {i} has norm {norm}, expected 1")));
        }
    }
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                cross += crate::cloud::dot(alphas.row(i), alphas.row(j)).abs();
            }
        }
    }
    let nf = n as f64;
    Ok(c_kp * (1.0 / nf + cross / (nf * nf)))
}

/// High-probability bound for random sphere designs:
/// `C_kP (1/n + sqrt(ln N / N))`.
pub fn dependent_ub_random(big_n: usize, n: usize, c_kp: f64) -> Result<f64> {
    if big_n < 2 || n < 1 {
        return Err(Error::InvalidParameter(format!("need N >= 2 and n >= 1, got ({big_n}, {n})")));
    }
    if !(c_kp >= 0.0) {
        return Err(Error::InvalidParameter(format!("need C_kP >= 0, got {c_kp}")));
    }
    let nn = big_n as f64;
    Ok(c_kp * (1.0 / n as f64 + (nn.ln() / nn).sqrt()))
}

/// Hellinger control of a pairwise dependence term:
/// `r_ij <= sqrt(2) C_kP2 d_H(Q_ij, P (x) P)`.
pub fn hellinger_r_bound(c_kp2: f64, d_h: f64) -> Result<f64> {
    if !(c_kp2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("need C >= 0, got {c_kp2}")));
    }
    if !(0.0..=std::f64::consts::SQRT_2 + 1e-12).contains(&d_h) {
        return Err(Error::InvalidParameter(format!(
            "Hellinger distance must lie in [0, sqrt(2)], got {d_h}"
        )));
    }
    Ok(std::f64::consts::SQRT_2 * c_kp2 * d_h)
}

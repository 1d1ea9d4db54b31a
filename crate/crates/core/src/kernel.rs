//! The two-moment kernel, its polynomial fast path, Gram matrices, and
//! independent validation routes.
//!
//! The kernel is
//!
//! ```text
//! k(x, y) = alpha_{d,p} exp(-||x-y||^2 / (4 sigma^2)) J(||x+y|| / (sqrt(2) sigma))
//! J(u)    = (lambda^eps M_{d,u}(d+2p-eps) + lambda^{-eps} M_{d,u}(d+2p+eps)) / (2 eps)
//! ```
//!
//! with `M_{d,u}` the noncentral chi moment. Three additional routes exist for
//! cross-validation: an even polynomial in `u` when `d+2p +/- eps` are even
//! integers, a radial-density quadrature, and a direct feature-map inner
//! product in low dimension.

use crate::cloud::{sq_dist, sq_sum, PointCloud};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::special_fns::{
    central_chi_moment_log, log_add, log_gamma, log_sum_exp, noncentral_chi_density,
    ChiMomentQuery,
};

/// Parameters `(d, p, sigma, eps, lambda)` of the two-moment kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub d: u32,
    pub p: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub lambda: f64,
}

impl KernelParams {
    pub fn new(d: u32, p: f64, sigma: f64, epsilon: f64, lambda: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParameter("d must be >= 1".into()));
        }
        if !(p > 0.0) {
            return Err(Error::InvalidParameter(format!("p must be > 0, got {p}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        let r = d as f64 + 2.0 * p;
        if !(epsilon > 0.0 && epsilon <= r) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, d+2p] = (0, {r}], got {epsilon}"
            )));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(Self { d, p, sigma, epsilon, lambda })
    }

    /// Fallback parameters when no distribution-driven selector applies:
    /// `eps = min(d+2p, sqrt(d))`, `lambda = 1`.
    pub fn fallback(d: u32, p: f64, sigma: f64) -> Result<Self> {
        let r = d as f64 + 2.0 * p;
        Self::new(d, p, sigma, r.min((d as f64).sqrt()), 1.0)
    }

    /// `r = d + 2p`.
    pub fn r(&self) -> f64 {
        self.d as f64 + 2.0 * self.p
    }
}

/// ln of `alpha_{d,p} = (2 pi) 2^{-(p+d)} 2^{-d/2} / Gamma(d/2)`.
pub fn alpha_coeff_log(d: u32, p: f64) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p must be > 0, got {p}")));
    }
    let ln2 = std::f64::consts::LN_2;
    Ok((2.0 * std::f64::consts::PI).ln() - (p + d as f64) * ln2 - 0.5 * d as f64 * ln2
        - log_gamma(d as f64 / 2.0)?)
}

pub fn alpha_coeff(d: u32, p: f64) -> Result<f64> {
    alpha_coeff_log(d, p).map(f64::exp)
}

/// ln J(u): log-sum-exp of the two log-moment terms.
pub fn j_log(u: f64, params: &KernelParams) -> Result<f64> {
    let r = params.r();
    let le = params.epsilon * params.lambda.ln();
    let m_minus = crate::special_fns::noncentral_chi_moment_log(ChiMomentQuery::new(
        params.d,
        u,
        r - params.epsilon,
    )?)?;
    let m_plus = crate::special_fns::noncentral_chi_moment_log(ChiMomentQuery::new(
        params.d,
        u,
        r + params.epsilon,
    )?)?;
    Ok(log_add(le + m_minus, -le + m_plus) - (2.0 * params.epsilon).ln())
}

pub fn j(u: f64, params: &KernelParams) -> Result<f64> {
    j_log(u, params).map(f64::exp)
}

/// Precomputed cubic interpolant of `ln J` on a uniform u-grid.
///
/// `ln J` is analytic on `[0, inf)`, so 4-point Lagrange interpolation on a
/// dense grid reproduces the series path to well below 1e-9 relative; queries
/// beyond the table fall back to the exact series.
#[derive(Clone, Debug)]
pub struct JTable {
    u_max: f64,
    step: f64,
    log_j: Vec<f64>,
}

const J_TABLE_NODES: usize = 4096;

impl JTable {
    fn build(params: &KernelParams, u_max: f64) -> Result<Self> {
        let u_max = u_max.max(1.0);
        let step = u_max / (J_TABLE_NODES - 1) as f64;
        let mut log_j = Vec::with_capacity(J_TABLE_NODES);
        for i in 0..J_TABLE_NODES {
            log_j.push(j_log(i as f64 * step, params)?);
        }
        Ok(Self { u_max, step, log_j })
    }

    fn eval_log(&self, u: f64) -> Option<f64> {
        if !(0.0..=self.u_max).contains(&u) {
            return None;
        }
        let pos = u / self.step;
        let i = (pos as usize).min(J_TABLE_NODES - 2);
        // 4-point stencil clamped at the edges.
        let base = i.saturating_sub(1).min(J_TABLE_NODES - 4);
        let t = pos - base as f64;
        let y = &self.log_j[base..base + 4];
        // Cubic Lagrange at nodes 0, 1, 2, 3.
        let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        Some(y[0] * l0 + y[1] * l1 + y[2] * l2 + y[3] * l3)
    }
}

/// A two-moment kernel evaluator: parameters plus optional `J` fast table.
#[derive(Clone, Debug)]
pub struct TwoMomentKernel {
    params: KernelParams,
    log_alpha: f64,
    table: Option<JTable>,
}

impl TwoMomentKernel {
    pub fn new(params: KernelParams) -> Result<Self> {
        let log_alpha = alpha_coeff_log(params.d, params.p)?;
        Ok(Self { params, log_alpha, table: None })
    }

    /// Builds the interpolation table covering `u in [0, u_max]`; evaluations
    /// outside the table fall back to the exact series.
    pub fn with_table(params: KernelParams, u_max: f64) -> Result<Self> {
        let log_alpha = alpha_coeff_log(params.d, params.p)?;
        let table = JTable::build(&params, u_max)?;
        Ok(Self { params, log_alpha, table: Some(table) })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha
    }

    pub fn j_log(&self, u: f64) -> Result<f64> {
        if let Some(t) = &self.table {
            if let Some(v) = t.eval_log(u) {
                return Ok(v);
            }
        }
        j_log(u, &self.params)
    }

    /// `ln k(x, y)`; finite where the linear value would overflow.
    pub fn log_eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.params.d as usize;
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        if y.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: y.len() });
        }
        let sigma = self.params.sigma;
        let u = (sq_sum(x, y)).sqrt() / (std::f64::consts::SQRT_2 * sigma);
        Ok(self.log_alpha - sq_dist(x, y) / (4.0 * sigma * sigma) + self.j_log(u)?)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.log_eval(x, y).map(f64::exp)
    }

    /// `k(x, x) = alpha_{d,p} J(sqrt(2) ||x|| / sigma)`.
    pub fn eval_diag(&self, x: &[f64]) -> Result<f64> {
        self.eval(x, x)
    }

    /// Largest `u = ||x+y|| / (sqrt(2) sigma)` reachable within a cloud.
    pub fn u_max_for(cloud: &PointCloud, sigma: f64) -> f64 {
        let max_norm = cloud
            .rows()
            .map(|r| crate::cloud::sq_norm(r).sqrt())
            .fold(0.0_f64, f64::max);
        2.0 * max_norm / (std::f64::consts::SQRT_2 * sigma)
    }
}

/// Even-polynomial form of `alpha_{d,p} J(u)` available when `d+2p +/- eps`
/// are even integers: `sum_l c_l u^{2l}`, all coefficients nonnegative.
#[derive(Clone, Debug)]
pub struct PolynomialKernel {
    pub coefficients: Vec<f64>,
    pub degree_l: u32,
    pub sigma: f64,
}

impl PolynomialKernel {
    /// `alpha_{d,p} J(u)` via the polynomial.
    pub fn alpha_j(&self, u: f64) -> f64 {
        let u2 = u * u;
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * u2 + c)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let u = sq_sum(x, y).sqrt() / (std::f64::consts::SQRT_2 * self.sigma);
        (-sq_dist(x, y) / (4.0 * self.sigma * self.sigma)).exp() * self.alpha_j(u)
    }
}

fn as_even_integer(x: f64) -> Option<u32> {
    let rounded = x.round();
    if (x - rounded).abs() < 1e-9 && rounded >= 0.0 && (rounded as u64) % 2 == 0 {
        Some(rounded as u32)
    } else {
        None
    }
}

/// Coefficients `c_0..c_L` of the polynomial fast path, `L = (d+2p+eps)/2`.
///
/// Each `c_l` collects the degree-l terms of the two even chi-square moment
/// polynomials, with `lambda^{+eps}` on the lower moment and `lambda^{-eps}`
/// on the upper one so the polynomial reproduces `alpha_{d,p} J` exactly.
pub fn polynomial_coefficients(params: &KernelParams) -> Result<PolynomialKernel> {
    let r = params.r();
    let hi = as_even_integer(r + params.epsilon);
    let lo = as_even_integer(r - params.epsilon);
    let (hi, lo) = match (hi, lo) {
        (Some(h), Some(l)) => (h, l),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "polynomial path requires d+2p +/- eps even integers, got {} and {}",
                r + params.epsilon,
                r - params.epsilon
            )))
        }
    };
    let big_l = hi / 2;
    let small_l = lo / 2;
    let half_d = params.d as f64 / 2.0;
    let ln2 = std::f64::consts::LN_2;
    let log_alpha = alpha_coeff_log(params.d, params.p)?;
    let le = params.epsilon * params.lambda.ln();
    let log_binom = |n: u32, k: u32| -> Result<f64> {
        Ok(log_gamma(n as f64 + 1.0)?
            - log_gamma(k as f64 + 1.0)?
            - log_gamma((n - k) as f64 + 1.0)?)
    };
    let mut coefficients = Vec::with_capacity(big_l as usize + 1);
    for l in 0..=big_l {
        let common = log_alpha - (2.0 * params.epsilon).ln() - l as f64 * ln2
            - log_gamma(l as f64 + half_d)?;
        let upper =
            -le + big_l as f64 * ln2 + log_gamma(big_l as f64 + half_d)? + log_binom(big_l, l)?;
        let c = if l <= small_l {
            let lower = le
                + small_l as f64 * ln2
                + log_gamma(small_l as f64 + half_d)?
                + log_binom(small_l, l)?;
            common + log_add(lower, upper)
        } else {
            common + upper
        };
        coefficients.push(c.exp());
    }
    Ok(PolynomialKernel { coefficients, degree_l: big_l, sigma: params.sigma })
}

/// A probability density on `[0, inf)` with a pointwise lower-bound
/// certificate `f(x) >= a x^{d+2p-1} e^{-b x^2}`, `a > 0`, `b in (0, 1/2)`.
pub struct RadialDensity {
    pdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub certificate_a: f64,
    pub certificate_b: f64,
}

impl RadialDensity {
    pub fn new(
        pdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        certificate_a: f64,
        certificate_b: f64,
    ) -> Self {
        Self { pdf, certificate_a, certificate_b }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }

    /// Checks the certificate on a log-spaced grid for the given `(d, p)`.
    pub fn certificate_holds(&self, d: u32, p: f64, grid: &[f64]) -> bool {
        let r = d as f64 + 2.0 * p;
        grid.iter().all(|&x| {
            self.pdf(x) >= self.certificate_a * x.powf(r - 1.0) * (-self.certificate_b * x * x).exp()
        })
    }
}

/// The generalized beta-prime density behind the two-moment kernel,
/// normalized to unit mass:
/// `f(x) = (2 eps / (pi x)) ((x/lambda)^{-eps} + (x/lambda)^{eps})^{-1}`.
///
/// The `(a, b)` certificate is fitted numerically on a log-spaced grid since
/// no closed form is available; `b` is fixed at 1/4.
pub fn beta_prime_density(d: u32, p: f64, epsilon: f64, lambda: f64) -> Result<RadialDensity> {
    if !(epsilon > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidParameter("beta-prime density needs eps > 0, lambda > 0".into()));
    }
    let pdf = move |x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let t = (x / lambda).powf(epsilon);
        2.0 * epsilon / (std::f64::consts::PI * x * (1.0 / t + t))
    };
    let r = d as f64 + 2.0 * p;
    let b = 0.25;
    let mut a = f64::INFINITY;
    let mut x = 1e-3;
    while x <= 40.0 {
        let ratio = pdf(x) / (x.powf(r - 1.0) * (-b * x * x).exp());
        a = a.min(ratio);
        x *= 1.05;
    }
    Ok(RadialDensity::new(Box::new(pdf), a * 0.999, b))
}

/// `I_f(u)` of the general kernel construction, by adaptive quadrature:
/// `(omega_d / (2^{d+p} (2 pi)^{d/2})) int x^{d-1+2p} g_{d,u}(x) / f(x) dx`
/// on `[0, u + 12 sqrt(d+2p)]` to relative tolerance 1e-8.
pub fn i_f_quadrature(f: &RadialDensity, u: f64, d: u32, p: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("u must be >= 0, got {u}")));
    }
    let ln2 = std::f64::consts::LN_2;
    let log_omega = ln2 + 0.5 * d as f64 * std::f64::consts::PI.ln() - log_gamma(d as f64 / 2.0)?;
    let log_pref = log_omega
        - (d as f64 + p) * ln2
        - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
    let upper = u + 12.0 * (d as f64 + 2.0 * p).sqrt();
    let integrand = |x: f64| -> f64 {
        let g = noncentral_chi_density(d, u, x).unwrap_or(0.0);
        if g == 0.0 {
            return 0.0;
        }
        x.powf(d as f64 - 1.0 + 2.0 * p) * g / f.pdf(x)
    };
    let integral = quadrature::integrate(integrand, 0.0, upper, 1e-8)?;
    Ok(log_pref.exp() * integral)
}

/// Direct feature-map inner product `<psi_x, psi_y>` by tensor-grid Simpson
/// quadrature. Validation-only; refuses d > 3.
pub fn feature_inner_product(
    x: &[f64],
    y: &[f64],
    params: &KernelParams,
    resolution: usize,
) -> Result<f64> {
    let d = params.d as usize;
    if d > 3 {
        return Err(Error::InvalidParameter(
            "feature-map quadrature is restricted to d <= 3".into(),
        ));
    }
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len().max(y.len()) });
    }
    if resolution < 9 {
        return Err(Error::InvalidParameter("resolution must be >= 9".into()));
    }
    let n = if resolution % 2 == 0 { resolution + 1 } else { resolution };
    let f = beta_prime_density(params.d, params.p, params.epsilon, params.lambda)?;
    let sigma = params.sigma;
    let ln2 = std::f64::consts::LN_2;
    let log_omega =
        ln2 + 0.5 * d as f64 * std::f64::consts::PI.ln() - log_gamma(d as f64 / 2.0)?;
    // psi_x psi_y = omega_d / 2^{d+p} * ||z||^{d-1+2p} / f(||z||) * phi(z/sqrt2 - x/sigma) phi(z/sqrt2 - y/sigma)
    let pref = (log_omega - (d as f64 + params.p) * ln2).exp();
    let phi_log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
    let center_norm = x
        .iter()
        .chain(y.iter())
        .map(|v| v.abs())
        .fold(0.0_f64, f64::max);
    let radius = std::f64::consts::SQRT_2 * center_norm / sigma + 12.0;
    let step = 2.0 * radius / (n - 1) as f64;
    let simpson_w = |i: usize| -> f64 {
        if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let value_at = |z: &[f64]| -> f64 {
        let nz = crate::cloud::sq_norm(z).sqrt();
        if nz == 0.0 {
            return 0.0;
        }
        let fz = f.pdf(nz);
        if fz <= 0.0 {
            return 0.0;
        }
        let mut expo = 0.0;
        for k in 0..d {
            let a = z[k] / std::f64::consts::SQRT_2 - x[k] / sigma;
            let b = z[k] / std::f64::consts::SQRT_2 - y[k] / sigma;
            expo += a * a + b * b;
        }
        pref * nz.powf(d as f64 - 1.0 + 2.0 * params.p) / fz
            * (2.0 * phi_log_norm - 0.5 * expo).exp()
    };
    let mut total = 0.0;
    let mut z = vec![0.0; d];
    let mut idx = vec![0usize; d];
    'outer: loop {
        let mut w = 1.0;
        for k in 0..d {
            z[k] = -radius + idx[k] as f64 * step;
            w *= simpson_w(idx[k]);
        }
        total += w * value_at(&z);
        // odometer increment
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < n {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    Ok(total * (step / 3.0).powi(d as i32))
}

/// Dense symmetric Gram matrix, row-major.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Gram matrix of a point cloud. Entries depend only on `||x - y||` and
/// `||x + y||`, so the matrix is symmetric exactly.
pub fn gram(points: &PointCloud, kernel: &TwoMomentKernel) -> Result<GramMatrix> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for jj in i..n {
            let v = kernel.eval(points.row(i), points.row(jj))?;
            data[i * n + jj] = v;
            data[jj * n + i] = v;
        }
    }
    Ok(GramMatrix { n, data })
}

/// Series J evaluated without any table, exposed for cross-route tests.
pub fn j_series_log(u: f64, params: &KernelParams) -> Result<f64> {
    j_log(u, params)
}

/// Growth-bound helper: `ln(1 + ||x||^{d+2p+eps})` for the `k(x,x)` envelope.
pub fn growth_envelope_log(norm: f64, params: &KernelParams) -> f64 {
    log_sum_exp(&[0.0, (params.r() + params.epsilon) * norm.max(1e-300).ln()])
}

/// Central-moment form of `J(0)` used as a sanity anchor in tests:
/// `J(0) = (lambda^eps M_d(r-eps) + lambda^{-eps} M_d(r+eps)) / (2 eps)`.
pub fn j0_central_log(params: &KernelParams) -> Result<f64> {
    let r = params.r();
    let le = params.epsilon * params.lambda.ln();
    Ok(log_add(
        le + central_chi_moment_log(params.d as f64, r - params.epsilon)?,
        -le + central_chi_moment_log(params.d as f64, r + params.epsilon)?,
    ) - (2.0 * params.epsilon).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        let scale = 1.0_f64.max(a.abs()).max(b.abs());
        assert!((a - b).abs() <= tol * scale, "{a} vs {b} (tol {tol})");
    }

    fn remark_params() -> KernelParams {
        KernelParams::new(3, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn alpha_values() {
        // Frozen from a 40-digit evaluation of the alpha formula.
        close(alpha_coeff(3, 1.0).unwrap(), 0.156664267164437531401, 1e-13);
        close(alpha_coeff(1, 1.0).unwrap(), 0.6266570686577501256039, 1e-13);
        for d in 1..=100u32 {
            let lin = alpha_coeff(d, 1.5).unwrap();
            let lg = alpha_coeff_log(d, 1.5).unwrap();
            assert!((lin.ln() - lg).abs() < 1e-12);
        }
    }

    #[test]
    fn j_matches_printed_polynomial() {
        let params = remark_params();
        let poly = |u: f64| 60.0 + 57.5 * u * u + 11.0 * u.powi(4) + 0.5 * u.powi(6);
        for &u in &[0.0, 1.0, 2.0, 3.5, 7.0] {
            close(j(u, &params).unwrap(), poly(u), 1e-11);
        }
        close(j(0.0, &params).unwrap(), 60.0, 1e-12);
        close(j(1.0, &params).unwrap(), 129.0, 1e-12);
        close(j(2.0, &params).unwrap(), 498.0, 1e-12);
    }

    #[test]
    fn polynomial_coefficients_match_remark() {
        let params = remark_params();
        let pk = polynomial_coefficients(&params).unwrap();
        assert_eq!(pk.degree_l, 3);
        let alpha = alpha_coeff(3, 1.0).unwrap();
        let want = [60.0, 57.5, 11.0, 0.5];
        for (c, w) in pk.coefficients.iter().zip(want) {
            close(c / alpha, w, 1e-12);
        }
        // Polynomial path vs series path on a u grid.
        for i in 0..=20 {
            let u = 0.5 * i as f64;
            close(pk.alpha_j(u), alpha * j(u, &params).unwrap(), 1e-9);
        }
    }

    #[test]
    fn polynomial_parity_precondition() {
        let params = KernelParams::new(3, 1.0, 1.0, 0.5, 1.0).unwrap();
        assert!(polynomial_coefficients(&params).is_err());
    }

    #[test]
    fn kernel_eval_anchors() {
        let params = remark_params();
        let kernel = TwoMomentKernel::new(params).unwrap();
        let alpha = alpha_coeff(3, 1.0).unwrap();
        close(kernel.eval(&[0.0; 3], &[0.0; 3]).unwrap(), alpha * 60.0, 1e-11);
        // k(x, x) = alpha J(sqrt(2)||x||/sigma).
        let x = [0.3, -0.8, 1.1];
        let nx = crate::cloud::sq_norm(&x).sqrt();
        close(
            kernel.eval(&x, &x).unwrap(),
            alpha * j(std::f64::consts::SQRT_2 * nx / params.sigma, &params).unwrap(),
            1e-11,
        );
        // Symmetry is exact.
        let y = [-0.2, 0.5, 2.0];
        assert_eq!(kernel.eval(&x, &y).unwrap(), kernel.eval(&y, &x).unwrap());
    }

    #[test]
    fn log_path_survives_high_dimension() {
        // d = 300 overflows the linear path but not the log path.
        let params = KernelParams::fallback(300, 1.0, 1.0).unwrap();
        let kernel = TwoMomentKernel::new(params).unwrap();
        let x = vec![10.0; 300];
        let lg = kernel.log_eval(&x, &x).unwrap();
        assert!(lg.is_finite());
        assert!(lg > 700.0, "expected linear overflow regime, got {lg}");
    }

    #[test]
    fn cauchy_schwarz_in_log_space() {
        let params = remark_params();
        let kernel = TwoMomentKernel::new(params).unwrap();
        let pts = [[0.1, 0.2, -0.4], [1.0, -1.0, 0.5], [2.0, 0.0, -2.0], [0.0, 3.0, 1.0]];
        for a in &pts {
            for b in &pts {
                let lab = kernel.log_eval(a, b).unwrap();
                let laa = kernel.log_eval(a, a).unwrap();
                let lbb = kernel.log_eval(b, b).unwrap();
                assert!(lab <= 0.5 * (laa + lbb) + 1e-10);
            }
        }
    }

    #[test]
    fn j_table_matches_series() {
        let params = KernelParams::new(7, 1.0, 0.7, (7.0_f64).sqrt(), 1.3).unwrap();
        let kernel = TwoMomentKernel::with_table(params, 12.0).unwrap();
        for i in 0..=480 {
            let u = 0.025 * i as f64;
            let t = kernel.j_log(u).unwrap();
            let s = j_log(u, &params).unwrap();
            assert!((t - s).abs() < 1e-9, "u={u}: {t} vs {s}");
        }
        // Beyond the table: falls back to the series.
        let t = kernel.j_log(25.0).unwrap();
        close(t, j_log(25.0, &params).unwrap(), 1e-14);
    }

    #[test]
    fn beta_prime_integrates_to_one() {
        // The truncated mass has the closed form (2/pi) atan((x/lambda)^eps)
        // evaluated at the endpoints; total mass over (0, inf) is 1.
        for &(eps, lambda) in &[(1.0, 1.0), (2.0, 0.7), (0.5, 3.0)] {
            let f = beta_prime_density(3, 1.0, eps, lambda).unwrap();
            let (lo, hi) = (1e-9, 2000.0 * lambda);
            let mass = quadrature::integrate(|x| f.pdf(x), lo, hi, 1e-9).unwrap();
            let cdf = |x: f64| {
                2.0 / std::f64::consts::PI * ((x / lambda) as f64).powf(eps).atan()
            };
            close(mass, cdf(hi) - cdf(lo), 1e-7);
            assert!((cdf(1e12) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn beta_prime_certificate_holds() {
        let f = beta_prime_density(3, 1.0, 1.0, 1.0).unwrap();
        assert!(f.certificate_a > 0.0);
        assert!(f.certificate_b > 0.0 && f.certificate_b < 0.5);
        let grid: Vec<f64> = (0..200).map(|i| 1e-3 * 1.055_f64.powi(i)).collect();
        assert!(f.certificate_holds(3, 1.0, &grid));
    }

    #[test]
    fn i_f_route_matches_j() {
        let params = remark_params();
        let f = beta_prime_density(3, 1.0, 1.0, 1.0).unwrap();
        let alpha = alpha_coeff(3, 1.0).unwrap();
        for &u in &[0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let quad = i_f_quadrature(&f, u, 3, 1.0).unwrap();
            let direct = alpha * j(u, &params).unwrap();
            assert!(
                (quad - direct).abs() <= 1e-6 * direct,
                "u={u}: {quad} vs {direct}"
            );
        }
    }

    #[test]
    fn feature_map_route_d1() {
        let params = KernelParams::new(1, 1.0, 1.0, 1.0, 1.0).unwrap();
        let kernel = TwoMomentKernel::new(params).unwrap();
        for (x, y) in [([0.0], [0.0]), ([0.5], [-0.3]), ([1.0], [1.0])] {
            let fm = feature_inner_product(&x, &y, &params, 2001).unwrap();
            let ke = kernel.eval(&x, &y).unwrap();
            assert!((fm - ke).abs() <= 1e-4 * ke, "{fm} vs {ke}");
        }
    }

    #[test]
    fn feature_map_route_d2() {
        let params = KernelParams::new(2, 1.0, 1.0, 2.0, 1.0).unwrap();
        let kernel = TwoMomentKernel::new(params).unwrap();
        let x = [1.0, 0.0];
        let y = [0.0, 1.0];
        let fm = feature_inner_product(&x, &y, &params, 301).unwrap();
        let ke = kernel.eval(&x, &y).unwrap();
        assert!((fm - ke).abs() <= 1e-4 * ke, "{fm} vs {ke}");
        let fm_sym = feature_inner_product(&y, &x, &params, 301).unwrap();
        close(fm, fm_sym, 1e-12);
    }

    #[test]
    fn feature_map_refuses_high_dimension() {
        let params = KernelParams::fallback(4, 1.0, 1.0).unwrap();
        assert!(feature_inner_product(&[0.0; 4], &[0.0; 4], &params, 64).is_err());
    }

    #[test]
    fn gram_basics() {
        let params = remark_params();
        let kernel = TwoMomentKernel::new(params).unwrap();
        let single = PointCloud::from_rows(&[vec![0.5, 0.5, 0.5]]).unwrap();
        let g1 = gram(&single, &kernel).unwrap();
        assert_eq!(g1.n, 1);
        close(g1.get(0, 0), kernel.eval(single.row(0), single.row(0)).unwrap(), 1e-15);

        let rows = vec![
            vec![0.1, 0.2, 0.3],
            vec![-1.0, 0.4, 0.0],
            vec![2.0, -0.5, 1.5],
        ];
        let pc = PointCloud::from_rows(&rows).unwrap();
        let g = gram(&pc, &kernel).unwrap();
        // Permuting rows permutes the Gram identically.
        let perm = [2usize, 0, 1];
        let rows_p: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let gp = gram(&PointCloud::from_rows(&rows_p).unwrap(), &kernel).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(gp.get(i, j), g.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn growth_bound_on_radial_grid() {
        let params = remark_params();
        let kernel = TwoMomentKernel::new(params).unwrap();
        // k(x,x) / (1 + ||x||^{d+2p+eps}) must stay bounded; the log-ratio
        // settles on the tail.
        let mut tail_ratios = Vec::new();
        for i in 1..=100 {
            let t = i as f64;
            let x = [t, 0.0, 0.0];
            let ratio = kernel.log_eval(&x, &x).unwrap() - growth_envelope_log(t, &params);
            assert!(ratio.is_finite());
            if t >= 50.0 {
                tail_ratios.push(ratio);
            }
        }
        let lo = tail_ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tail_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < std::f64::consts::LN_2, "tail ratio drifts: [{lo}, {hi}]");
    }

    #[test]
    fn j0_central_anchor() {
        let params = remark_params();
        close(j0_central_log(&params).unwrap(), (60.0_f64).ln(), 1e-12);
    }
}

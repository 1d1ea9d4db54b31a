//! Gamma-function ratios and central/noncentral chi moments, log-space capable.
//!
//! Everything here is evaluated internally in log-space; linear values are
//! materialized only at API boundaries. The moment `M_{d,u}(d + 2p + eps)`
//! overflows double precision for d of a few hundred, so callers that assemble
//! kernels or bounds in high dimension must stay on the `_log` paths.

use crate::error::{Error, Result};

/// Natural log of a positive quantity. Addition goes through log-sum-exp so
/// sums of astronomically large terms stay representable.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogValue {
    log: f64,
}

impl LogValue {
    pub fn from_log(log: f64) -> Self {
        Self { log }
    }

    pub fn from_linear(x: f64) -> Result<Self> {
        if x > 0.0 && x.is_finite() {
            Ok(Self { log: x.ln() })
        } else {
            Err(Error::Domain(format!("LogValue requires a finite positive value, got {x}")))
        }
    }

    pub fn log(self) -> f64 {
        self.log
    }

    pub fn linear(self) -> f64 {
        self.log.exp()
    }

    /// log-sum-exp addition.
    pub fn add(self, other: Self) -> Self {
        Self { log: log_add(self.log, other.log) }
    }

    pub fn mul(self, other: Self) -> Self {
        Self { log: self.log + other.log }
    }

    pub fn div(self, other: Self) -> Self {
        Self { log: self.log - other.log }
    }

    pub fn powf(self, e: f64) -> Self {
        Self { log: self.log * e }
    }
}

/// log(e^a + e^b) without overflow.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log-sum-exp over a slice.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let hi = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    let sum: f64 = terms.iter().map(|&t| (t - hi).exp()).sum();
    hi + sum.ln()
}

// Lanczos approximation with g = 607/128 (Godfrey's 15-term coefficient set).
const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS_COEFFS: [f64; 15] = [
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
];
const HALF_LOG_2PI: f64 = 0.91893853320467274178;

/// ln Gamma(z) for z > 0.
pub fn log_gamma(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires z > 0, got {z}")));
    }
    let mut series = LANCZOS_COEFFS[0];
    for (k, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        series += c / (z + k as f64 - 1.0);
    }
    let t = z + LANCZOS_G - 0.5;
    Ok(HALF_LOG_2PI + (z - 0.5) * t.ln() - t + (series / z).ln() + z.ln())
}

/// Query for the s-th moment of the noncentral chi distribution: `||Z||` with
/// `Z ~ N(mu, I_d)` and `u = ||mu||`.
#[derive(Clone, Copy, Debug)]
pub struct ChiMomentQuery {
    pub d: u32,
    pub u: f64,
    pub s: f64,
}

impl ChiMomentQuery {
    pub fn new(d: u32, u: f64, s: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::Domain("degrees of freedom must be >= 1".into()));
        }
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::Domain(format!("noncentrality must be >= 0, got {u}")));
        }
        if !(s > -(d as f64)) {
            return Err(Error::Domain(format!("moment diverges: s = {s} <= -d = -{d}")));
        }
        Ok(Self { d, u, s })
    }
}

/// ln of the central chi moment `M_d(s) = 2^{s/2} Gamma((d+s)/2) / Gamma(d/2)`.
///
/// Real degrees of freedom are allowed: the scale-mixture moment formulas
/// evaluate `M_{1/b^2}(s)` at arbitrary positive 1/b^2.
pub fn central_chi_moment_log(dof: f64, s: f64) -> Result<f64> {
    if !(dof > 0.0) {
        return Err(Error::Domain(format!("degrees of freedom must be > 0, got {dof}")));
    }
    if !(s > -dof) {
        return Err(Error::Domain(format!("moment diverges: s = {s} <= -dof = -{dof}")));
    }
    Ok(0.5 * s * std::f64::consts::LN_2 + log_gamma((dof + s) / 2.0)? - log_gamma(dof / 2.0)?)
}

pub fn central_chi_moment(dof: f64, s: f64) -> Result<f64> {
    central_chi_moment_log(dof, s).map(f64::exp)
}

/// ln of the Stirling-style envelope
/// `Mbar_d(s) = ((d+s)/e)^{s/2} ((d+s)/d)^{(d-1)/2}`, which dominates `M_d(s)`.
pub fn mbar_log(dof: f64, s: f64) -> Result<f64> {
    if !(dof > 0.0) {
        return Err(Error::Domain(format!("degrees of freedom must be > 0, got {dof}")));
    }
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("mbar requires s >= 0, got {s}")));
    }
    let ds = dof + s;
    Ok(0.5 * s * (ds.ln() - 1.0) + 0.5 * (dof - 1.0) * (ds.ln() - dof.ln()))
}

pub fn mbar(dof: f64, s: f64) -> Result<f64> {
    mbar_log(dof, s).map(f64::exp)
}

/// Poisson tail mass retained outside the truncation window.
const POISSON_TAIL: f64 = 1e-15;

/// ln of the noncentral chi moment via the Poisson mixture of central moments:
/// `M_{d,u}(s) = sum_k Poisson(u^2/2)(k) * M_{d+2k}(s)`.
///
/// The window expands outward from `k0 = floor(u^2/2)` on both sides until the
/// accumulated Poisson mass exceeds `1 - 1e-15`, which makes the truncation
/// deterministic and testable.
pub fn noncentral_chi_moment_log(q: ChiMomentQuery) -> Result<f64> {
    let ChiMomentQuery { d, u, s } = q;
    let half = 0.5 * u * u;
    if half == 0.0 {
        return central_chi_moment_log(d as f64, s);
    }
    let log_half = half.ln();
    let log_pois = |k: u64| -> Result<f64> {
        Ok(k as f64 * log_half - half - log_gamma(k as f64 + 1.0)?)
    };
    let term = |k: u64| -> Result<(f64, f64)> {
        let lp = log_pois(k)?;
        Ok((lp, lp + central_chi_moment_log((d + 2 * k as u32) as f64, s)?))
    };

    let k0 = half.floor() as u64;
    let (lp0, t0) = term(k0)?;
    let mut mass = lp0.exp();
    let mut terms = vec![t0];
    let mut lo = k0;
    let mut hi = k0;
    // Alternate expansion; the low side stops at k = 0. Progress is measured
    // by whether `mass` actually moves: near the target the remaining tail
    // can be too small to register in double precision, and waiting for the
    // Poisson weights to underflow to -inf would loop effectively forever.
    while mass < 1.0 - POISSON_TAIL {
        let mut progressed = false;
        if lo > 0 {
            lo -= 1;
            let (lp, t) = term(lo)?;
            let next = mass + lp.exp();
            progressed |= next > mass;
            mass = next;
            terms.push(t);
        }
        if mass >= 1.0 - POISSON_TAIL {
            break;
        }
        hi += 1;
        let (lp, t) = term(hi)?;
        let next = mass + lp.exp();
        progressed |= next > mass;
        mass = next;
        terms.push(t);
        if !progressed && lo == 0 {
            break; // both tails below representable mass increments
        }
    }
    Ok(log_sum_exp(&terms))
}

pub fn noncentral_chi_moment(q: ChiMomentQuery) -> Result<f64> {
    noncentral_chi_moment_log(q).map(f64::exp)
}

fn log_binomial(n: u32, k: u32) -> Result<f64> {
    Ok(log_gamma(n as f64 + 1.0)? - log_gamma(k as f64 + 1.0)? - log_gamma((n - k) as f64 + 1.0)?)
}

/// Even-integer moments in closed form: `M_{d,u}(2l)` is the l-th moment of the
/// noncentral chi-square, a degree-l polynomial in `u^2`:
/// `2^l Gamma(l + d/2) sum_j binom(l, j) (u^2/2)^j / Gamma(j + d/2)`.
pub fn noncentral_chi_moment_even_log(d: u32, u: f64, ell: u32) -> Result<f64> {
    if d < 1 {
        return Err(Error::Domain("degrees of freedom must be >= 1".into()));
    }
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("noncentrality must be >= 0, got {u}")));
    }
    let half_d = d as f64 / 2.0;
    let prefix = ell as f64 * std::f64::consts::LN_2 + log_gamma(ell as f64 + half_d)?;
    if u == 0.0 {
        return Ok(prefix - log_gamma(half_d)?);
    }
    let log_half_u2 = (0.5 * u * u).ln();
    let mut terms = Vec::with_capacity(ell as usize + 1);
    for j in 0..=ell {
        terms.push(log_binomial(ell, j)? + j as f64 * log_half_u2 - log_gamma(j as f64 + half_d)?);
    }
    Ok(prefix + log_sum_exp(&terms))
}

pub fn noncentral_chi_moment_even(d: u32, u: f64, ell: u32) -> Result<f64> {
    noncentral_chi_moment_even_log(d, u, ell).map(f64::exp)
}

/// Density of the noncentral chi distribution at `x > 0`, via a log-space series.
pub fn noncentral_chi_density(d: u32, u: f64, x: f64) -> Result<f64> {
    if d < 1 {
        return Err(Error::Domain("degrees of freedom must be >= 1".into()));
    }
    if !(x > 0.0) {
        return Err(Error::Domain(format!("density requires x > 0, got {x}")));
    }
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("noncentrality must be >= 0, got {u}")));
    }
    let base = -0.5 * (x * x + u * u) + (d as f64 - 1.0) * x.ln()
        - (d as f64 / 2.0 - 1.0) * std::f64::consts::LN_2;
    let w = u * x / 2.0;
    if w == 0.0 {
        return Ok((base - log_gamma(d as f64 / 2.0)?).exp());
    }
    let log_w2 = 2.0 * w.ln();
    let term = |k: u64| -> Result<f64> {
        Ok(k as f64 * log_w2 - log_gamma(k as f64 + 1.0)? - log_gamma(k as f64 + d as f64 / 2.0)?)
    };
    // Terms peak near k ~ w; expand outward until both flanks are negligible.
    let k0 = w.floor() as u64;
    let mut terms = vec![term(k0)?];
    let mut peak = terms[0];
    let mut lo = k0;
    loop {
        if lo == 0 {
            break;
        }
        lo -= 1;
        let t = term(lo)?;
        peak = peak.max(t);
        terms.push(t);
        if t < peak - 40.0 {
            break;
        }
    }
    let mut hi = k0;
    loop {
        hi += 1;
        let t = term(hi)?;
        peak = peak.max(t);
        terms.push(t);
        if t < peak - 40.0 {
            break;
        }
    }
    Ok((base + log_sum_exp(&terms)).exp())
}

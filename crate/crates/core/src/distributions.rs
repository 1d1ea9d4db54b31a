//! Seeded samplers: Gaussians, the scale-mixture sub-gamma family, Gaussian
//! smoothing, and the dependent Gaussian-process construction, plus the exact
//! moment/MGF formulas used to validate them.
//!
//! Every sampler is a pure function of `(parameters, seed)`. Parallel replica
//! loops derive one child seed per replica up front, so results never depend
//! on scheduling.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::special_fns::central_chi_moment_log;

/// Master seed with pure child-stream derivation:
/// `child(master, index) = mix64(master ^ (index * 0x9E3779B97F4A7C15))`,
/// where `mix64` is the splitmix64 finalizer (3 rounds of xor-shift-multiply).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngSeed {
    pub master: u64,
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl RngSeed {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// Child seed for stream `index`.
    pub fn child(self, index: u64) -> u64 {
        mix64(self.master ^ index.wrapping_mul(0x9E3779B97F4A7C15))
    }

    /// Nested derivation: `(cell, replica)` stream.
    pub fn child2(self, cell: u64, replica: u64) -> u64 {
        RngSeed::new(self.child(cell)).child(replica)
    }
}

/// The project-wide RNG: ChaCha8, seeded from a 64-bit value. Fixed (not the
/// platform default) so output is byte-identical across platforms.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sub-gamma variance/scale parameters `(v, b)`, optionally tagged as the
/// generative scale-mixture family (`X = sqrt(U) Z`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubGammaSpec {
    pub v: f64,
    pub b: f64,
    pub generative: bool,
}

impl SubGammaSpec {
    pub fn new(v: f64, b: f64) -> Result<Self> {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("v must be > 0, got {v}")));
        }
        if !(b >= 0.0) {
            return Err(Error::InvalidParameter(format!("b must be >= 0, got {b}")));
        }
        Ok(Self { v, b, generative: false })
    }

    /// The scale-mixture family `X = sqrt(U) Z`, which is sub-gamma `(1, b)`.
    pub fn scale_mixture(b: f64) -> Result<Self> {
        let mut s = Self::new(1.0, b)?;
        s.generative = true;
        Ok(s)
    }

    /// The sub-gamma log-MGF envelope `v a^2 / (2 (1 - b a))` at `a = ||alpha||`.
    pub fn envelope_log_mgf(&self, alpha_norm: f64) -> Result<f64> {
        if !(alpha_norm >= 0.0) || self.b * alpha_norm >= 1.0 {
            return Err(Error::Domain(format!(
                "envelope requires 0 <= ||alpha|| < 1/b, got {alpha_norm}"
            )));
        }
        Ok(self.v * alpha_norm * alpha_norm / (2.0 * (1.0 - self.b * alpha_norm)))
    }
}

/// Unit-norm direction rows `alpha_i` in `R^N` plus the componentwise target
/// transform for the dependent-sample construction.
pub struct DependentDesign {
    pub alphas: PointCloud,
    pub transform: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl DependentDesign {
    /// Identity transform; rows must be unit-norm within 1e-12.
    pub fn new(alphas: PointCloud) -> Result<Self> {
        for (i, row) in alphas.rows().enumerate() {
            let norm = crate::cloud::sq_norm(row).sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "design row {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self { alphas, transform: None })
    }

    pub fn ambient_dim(&self) -> usize {
        self.alphas.dim()
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }
}

/// `n` iid standard Gaussian points in `R^d`.
pub fn sample_gaussian(n: usize, d: usize, seed: u64) -> Result<PointCloud> {
    if n < 1 || d < 1 {
        return Err(Error::InvalidParameter("need n >= 1 and d >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    PointCloud::new(d, data)
}

/// `n` positive Gamma(shape, scale) draws.
pub fn gamma_sample(shape: f64, scale: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(shape > 0.0 && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma needs shape > 0 and scale > 0, got ({shape}, {scale})"
        )));
    }
    let gamma = Gamma::new(shape, scale)
        .map_err(|e| Error::InvalidParameter(format!("gamma distribution: {e}")))?;
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| gamma.sample(&mut rng)).collect())
}

/// The scale-mixture family: rows `X_i = sqrt(U_i) Z_i` with independent
/// `U_i ~ Gamma(1/(2b^2), 2b^2)` and `Z_i ~ N(0, I_d)`. `b = 0` degenerates to
/// the plain Gaussian sampler.
pub fn sample_subgamma_scale_mixture(n: usize, d: usize, b: f64, seed: u64) -> Result<PointCloud> {
    if !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!("b must be >= 0, got {b}")));
    }
    if b == 0.0 {
        return sample_gaussian(n, d, seed);
    }
    if n < 1 || d < 1 {
        return Err(Error::InvalidParameter("need n >= 1 and d >= 1".into()));
    }
    let shape = 1.0 / (2.0 * b * b);
    let scale = 2.0 * b * b;
    let gamma = Gamma::new(shape, scale)
        .map_err(|e| Error::InvalidParameter(format!("gamma distribution: {e}")))?;
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let u: f64 = gamma.sample(&mut rng);
        let root_u = u.sqrt();
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            data.push(root_u * z);
        }
    }
    PointCloud::new(d, data)
}

/// Adds iid `N(0, sigma^2 I_d)` noise to every point; `sigma = 0` is the identity.
pub fn smooth(points: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(points.clone());
    }
    let mut rng = rng_from_seed(seed);
    let mut out = points.clone();
    for v in out.data_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma * z;
    }
    Ok(out)
}

/// `n` uniform points on the unit sphere in `R^N` (normalized Gaussians).
pub fn sample_unit_sphere(n: usize, big_n: usize, seed: u64) -> Result<PointCloud> {
    let raw = sample_gaussian(n, big_n, seed)?;
    let mut data = Vec::with_capacity(n * big_n);
    for row in raw.rows() {
        let norm = crate::cloud::sq_norm(row).sqrt();
        if norm == 0.0 {
            // Probability-zero event; fall back to the first basis vector.
            data.extend((0..big_n).map(|k| if k == 0 { 1.0 } else { 0.0 }));
        } else {
            data.extend(row.iter().map(|v| v / norm));
        }
    }
    PointCloud::new(big_n, data)
}

/// One realization of the dependent Gaussian-process samples:
/// `S_i = T(G^T alpha_i)` with `G` an `N x d` matrix of iid standard normals,
/// so `cov(Z(alpha), Z(beta)) = <alpha, beta> I_d` exactly.
pub fn sample_dependent_gp(design: &DependentDesign, d: usize, seed: u64) -> Result<PointCloud> {
    if d < 1 {
        return Err(Error::InvalidParameter("need d >= 1".into()));
    }
    let big_n = design.ambient_dim();
    let g = sample_gaussian(big_n, d, seed)?;
    let mut data = Vec::with_capacity(design.n() * d);
    for alpha in design.alphas.rows() {
        for k in 0..d {
            let mut z = 0.0;
            for (row, &a) in g.rows().zip(alpha) {
                z += a * row[k];
            }
            data.push(match &design.transform {
                Some(t) => t(z),
                None => z,
            });
        }
    }
    PointCloud::new(d, data)
}

/// Exact moment of the scale-mixture family:
/// `E ||X||^s = b^s M_{1/b^2}(s) M_d(s)`, evaluated in log space.
pub fn scale_mixture_exact_moment_log(d: u32, b: f64, s: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("b must be > 0, got {b}")));
    }
    let inv_b2 = 1.0 / (b * b);
    if !(s > -inv_b2.min(d as f64)) {
        return Err(Error::Domain(format!(
            "moment diverges: s = {s} <= -min(1/b^2, d)"
        )));
    }
    Ok(s * b.ln() + central_chi_moment_log(inv_b2, s)? + central_chi_moment_log(d as f64, s)?)
}

pub fn scale_mixture_exact_moment(d: u32, b: f64, s: f64) -> Result<f64> {
    scale_mixture_exact_moment_log(d, b, s).map(f64::exp)
}

/// Log-MGF of the scale-mixture family along a direction of norm `a`:
/// `ln E exp(<alpha, X>) = -(1/(2 b^2)) ln(1 - a^2 b^2)`, valid for `a b < 1`.
pub fn scale_mixture_log_mgf(alpha_norm: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("b must be > 0, got {b}")));
    }
    if !(alpha_norm >= 0.0) || alpha_norm * b >= 1.0 {
        return Err(Error::Domain(format!(
            "MGF diverges: need 0 <= ||alpha|| < 1/b, got {alpha_norm}"
        )));
    }
    let a2b2 = alpha_norm * alpha_norm * b * b;
    Ok(-(-a2b2).ln_1p() / (2.0 * b * b))
}

/// A seedable point sampler, the abstraction the Monte-Carlo estimators take.
pub trait PointSampler: Send + Sync {
    fn dim(&self) -> usize;
    fn sample(&self, n: usize, seed: u64) -> Result<PointCloud>;
}

/// Standard Gaussian in `R^d`.
pub struct GaussianSampler {
    pub d: usize,
}

impl PointSampler for GaussianSampler {
    fn dim(&self) -> usize {
        self.d
    }
    fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        sample_gaussian(n, self.d, seed)
    }
}

/// Scale-mixture sub-gamma sampler in `R^d`.
pub struct SubGammaSampler {
    pub d: usize,
    pub b: f64,
}

impl PointSampler for SubGammaSampler {
    fn dim(&self) -> usize {
        self.d
    }
    fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        sample_subgamma_scale_mixture(n, self.d, self.b, seed)
    }
}

/// Point mass at a fixed location (testing aid).
pub struct PointMassSampler {
    pub point: Vec<f64>,
}

impl PointSampler for PointMassSampler {
    fn dim(&self) -> usize {
        self.point.len()
    }
    fn sample(&self, n: usize, _seed: u64) -> Result<PointCloud> {
        let mut data = Vec::with_capacity(n * self.point.len());
        for _ in 0..n {
            data.extend_from_slice(&self.point);
        }
        PointCloud::new(self.point.len(), data)
    }
}

/// Helper used only in tests and diagnostics: platform RNG draws are banned in
/// deliverable paths, but a quick StdRng is handy for fuzz-style fixtures.
pub fn fixture_rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

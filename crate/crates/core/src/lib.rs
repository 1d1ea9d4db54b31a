//! Kernel-MMD upper bounds on Gaussian-smoothed optimal transport.
//!
//! The library is organized around a "two-moment" kernel: a Gaussian factor
//! in `||x - y||` times a weighted average of two noncentral-chi moments
//! evaluated at `||x + y|| / (sqrt(2) sigma)`. The MMD induced by this kernel
//! dominates the Gaussian-smoothed OT cost, which turns OT convergence-rate
//! questions into moment computations.
//!
//! Modules:
//! - [`special_fns`]: log-gamma and central/noncentral chi moments, log-space.
//! - [`kernel`]: the two-moment kernel, its polynomial fast path, Gram matrices,
//!   and independent validation routes (radial-density quadrature, feature map).
//! - [`mmd`]: MMD estimators and Monte-Carlo kernel-mean estimation.
//! - [`distributions`]: seeded samplers (Gaussian, sub-gamma scale mixture,
//!   dependent Gaussian-process designs) with exact moment/MGF companions.
//! - [`bounds`]: closed-form convergence-rate and kernel-mean bounds.
//! - [`ot`]: exact discrete OT, log-domain Sinkhorn, weighted-TV bound, and
//!   noise-injected smoothed-OT estimation.
//! - [`experiments`]: seeded, configuration-driven experiment runners with
//!   CSV output and metadata sidecars.

pub mod bounds;
pub mod cloud;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod mmd;
pub mod ot;
pub mod quadrature;
pub mod special_fns;

pub use cloud::{DiscreteMeasure, PointCloud};
pub use error::{Error, Result};
pub use kernel::{KernelParams, TwoMomentKernel};

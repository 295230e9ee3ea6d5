//! Adaptive optimizers next to their stochastic differential equation models.
//!
//! The crate is organised bottom-up:
//!
//! * [`landscapes`]: analytic objectives with exact gradients and curvature constants.
//! * [`noise`]: gradient-noise laws, `erf`, the Student-t `Ξ_ν`, and the sign-drift maps.
//! * [`optimizers`]: discrete SGD, SignSGD, RMSprop(W), Adam(W) and hyperparameter scaling rules.
//! * [`sde`]: drift/diffusion builders for every continuous model plus an Euler–Maruyama integrator.
//! * [`analytics`]: closed-form bounds, stationary moments, phase constants, Lambert W.
//! * [`harness`]: deterministic Monte-Carlo ensembles, weak-error metrics, CSV and config I/O.

pub mod analytics;
pub mod error;
pub mod harness;
pub mod landscapes;
pub mod noise;
pub mod optimizers;
pub mod sde;

pub use error::{LabError, Result};

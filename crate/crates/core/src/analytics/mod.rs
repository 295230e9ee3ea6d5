//! Closed-form oracles: phase constants, loss envelopes, stationary moments.
//!
//! Envelopes (`LossBoundCurve`) are upper bounds. Stationary moments and the
//! phase-3 quadratic loss curve are point predictions.

mod bounds;
mod constants;
mod lambert;
mod stationary;

pub use bounds::{
    adaptive_asymptotic_loss, alt_noise_loss_bound, pl_smooth_loss_bound, scheduler_verdict,
    sgd_loss_bound, signsgd_loss_bound, AdaptiveBoundInputs, AdaptiveFamily, AltNoiseInputs,
    CurveForm, LossBoundCurve, SchedulerVerdict,
};
pub use constants::{phase_constants, PhaseConstants};
pub use lambert::{lambert_w0, lambert_w0_exp};
pub use stationary::{
    adaptive_stationary, sgd_stationary, signsgd_quad_loss_curve, signsgd_stationary,
    StationaryMoments, Transient,
};

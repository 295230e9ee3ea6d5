use super::constants::phase_constants;
use super::lambert::{lambert_w0, lambert_w0_exp};
use crate::error::{LabError, Result};
use crate::noise::StateKind;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveForm {
    /// `s0 e^{−rate t} + floor (1 − e^{−rate t})`.
    ExponentialToFloor,
    /// `¼(√μ t − 2√s0)²` until `t* = 2√(s0/μ)`, zero afterwards.
    QuadraticStopping { mu: f64, t_star: f64 },
    /// Solution of `dS/dt = −α√S + β`: `β²(W(w₀e^{w₀}e^{−α²t/(2β)}) + 1)²/α²`
    /// with `w₀ = α√s0/β − 1`.
    LambertW { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBoundCurve {
    pub s0: f64,
    pub rate: f64,
    pub floor: f64,
    pub form: CurveForm,
    /// Set when the formula's floor was negative and has been clamped to zero.
    pub floor_clamped: bool,
}

impl LossBoundCurve {
    fn exponential(s0: f64, rate: f64, raw_floor: f64) -> Self {
        Self {
            s0,
            rate,
            floor: raw_floor.max(0.0),
            form: CurveForm::ExponentialToFloor,
            floor_clamped: raw_floor < 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.form {
            CurveForm::ExponentialToFloor => {
                let e = (-self.rate * t).exp();
                self.s0 * e + self.floor * (1.0 - e)
            }
            CurveForm::QuadraticStopping { mu, t_star } => {
                if t >= t_star {
                    0.0
                } else {
                    let r = mu.sqrt() * t - 2.0 * self.s0.sqrt();
                    0.25 * r * r
                }
            }
            CurveForm::LambertW { alpha, beta } => {
                if beta <= 0.0 {
                    let r = (self.s0.sqrt() - 0.5 * alpha * t).max(0.0);
                    return r * r;
                }
                let w0 = alpha * self.s0.sqrt() / beta - 1.0;
                let decay = alpha * alpha * t / (2.0 * beta);
                let w = if w0 > 0.0 {
                    lambert_w0_exp(w0.ln() + w0 - decay)
                } else {
                    lambert_w0(w0 * (w0 - decay).exp())
                };
                beta * beta * (w + 1.0) * (w + 1.0) / (alpha * alpha)
            }
        }
    }

    /// `t → ∞` limit.
    pub fn limit(&self) -> f64 {
        match self.form {
            CurveForm::QuadraticStopping { .. } => 0.0,
            _ => self.floor,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::Unsupported(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// SignSGD envelopes for a `μ`-strongly convex loss with `Tr ∇²f ≤ L_τ`, per phase.
pub fn signsgd_loss_bound(
    phase: u8,
    mu: f64,
    l_tau: f64,
    sigma_max: f64,
    eta: f64,
    s0: f64,
    d: usize,
) -> Result<LossBoundCurve> {
    positive("mu", mu)?;
    positive("sigma_max", sigma_max)?;
    let pc = phase_constants();
    match phase {
        1 => Ok(LossBoundCurve {
            s0,
            rate: 0.0,
            floor: 0.0,
            form: CurveForm::QuadraticStopping { mu, t_star: 2.0 * (s0 / mu).sqrt() },
            floor_clamped: false,
        }),
        2 => {
            let delta = pc.m / (std::f64::consts::SQRT_2 * sigma_max)
                + eta * mu * pc.m * pc.m / (4.0 * sigma_max * sigma_max);
            let raw = 0.5 * eta * (l_tau - mu * d as f64 * pc.q_hat * pc.q_hat) / (2.0 * mu * delta);
            Ok(LossBoundCurve::exponential(s0, 2.0 * mu * delta, raw))
        }
        3 => {
            let delta = SQRT_2_OVER_PI / sigma_max + eta / PI * mu / (sigma_max * sigma_max);
            Ok(LossBoundCurve::exponential(s0, 2.0 * mu * delta, 0.5 * eta * l_tau / (2.0 * mu * delta)))
        }
        p => Err(LabError::Config(format!("phase must be 1, 2 or 3, got {p}"))),
    }
}

/// SGD envelope, optionally for the rescaled dynamics with speed `κ`, batch factor `δ`.
#[allow(clippy::too_many_arguments)]
pub fn sgd_loss_bound(
    mu: f64,
    l_tau: f64,
    sigma_max: f64,
    eta: f64,
    s0: f64,
    kappa: f64,
    delta: f64,
    batch: f64,
) -> Result<LossBoundCurve> {
    positive("mu", mu)?;
    let floor = 0.5 * eta * l_tau * sigma_max * sigma_max / (2.0 * mu * batch) * (kappa / delta);
    Ok(LossBoundCurve::exponential(s0, 2.0 * mu * kappa, floor))
}

/// Envelopes needing only the PL inequality and `L`-smoothness; floor `ηLd/(4μΔ)`.
pub fn pl_smooth_loss_bound(
    phase: u8,
    mu: f64,
    l: f64,
    d: usize,
    sigma_max: f64,
    eta: f64,
    s0: f64,
) -> Result<LossBoundCurve> {
    positive("mu", mu)?;
    positive("L", l)?;
    positive("sigma_max", sigma_max)?;
    let delta = match phase {
        2 => phase_constants().m / (std::f64::consts::SQRT_2 * sigma_max),
        3 => SQRT_2_OVER_PI / sigma_max,
        p => return Err(LabError::Config(format!("phase must be 2 or 3, got {p}"))),
    };
    Ok(LossBoundCurve::exponential(s0, 2.0 * mu * delta, eta * l * d as f64 / (4.0 * mu * delta)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerVerdict {
    pub converges: bool,
    /// Envelope coefficient `c` in `c·η_t`, where `η_t` is the effective step size.
    pub coefficient: f64,
}

impl SchedulerVerdict {
    pub fn envelope(&self, step_size: f64) -> f64 {
        self.coefficient * step_size
    }
}

/// Power-law schedulers `(t+1)^{−ϑ}` satisfy `∫η = ∞` and `η_t → 0` exactly when `0 < ϑ ≤ 1`.
pub fn scheduler_verdict(vartheta: f64, mu: f64, l_tau: f64, sigma_max: f64) -> SchedulerVerdict {
    SchedulerVerdict {
        converges: vartheta > 0.0 && vartheta <= 1.0,
        coefficient: l_tau * sigma_max / (4.0 * mu) * (PI / 2.0).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveFamily {
    Rmsprop,
    RmspropW,
    Adam,
    AdamW,
    AdamL2,
}

impl AdaptiveFamily {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "rmsprop" => Self::Rmsprop,
            "rmspropw" => Self::RmspropW,
            "adam" => Self::Adam,
            "adamw" => Self::AdamW,
            "adam-l2" => Self::AdamL2,
            other => return Err(LabError::Config(format!("unknown adaptive family '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveBoundInputs {
    pub mu: f64,
    pub l: f64,
    pub l_tau: f64,
    pub sigma: f64,
    pub eta: f64,
    pub batch: f64,
    pub theta: f64,
    pub kappa: f64,
    pub delta: f64,
    pub xi: f64,
}

impl AdaptiveBoundInputs {
    pub fn new(mu: f64, l: f64, l_tau: f64, sigma: f64, eta: f64) -> Self {
        Self { mu, l, l_tau, sigma, eta, batch: 1.0, theta: 0.0, kappa: 1.0, delta: 1.0, xi: 1.0 }
    }
}

/// Asymptotic loss bound for the adaptive families.
pub fn adaptive_asymptotic_loss(family: AdaptiveFamily, p: &AdaptiveBoundInputs) -> Result<f64> {
    positive("mu", p.mu)?;
    positive("L", p.l)?;
    if p.theta < 0.0 {
        return Err(LabError::Config("theta must be >= 0".into()));
    }
    let sbd = (p.batch * p.delta).sqrt();
    Ok(match family {
        AdaptiveFamily::Rmsprop | AdaptiveFamily::Adam => {
            p.eta * p.sigma * p.l_tau / (4.0 * p.mu * p.batch.sqrt()) * p.kappa / p.delta.sqrt()
        }
        AdaptiveFamily::RmspropW | AdaptiveFamily::AdamW => {
            0.5 * p.eta * p.l_tau * p.sigma * p.l * p.kappa
                / (2.0 * p.mu * sbd * p.l + p.sigma * p.xi * p.theta * (p.l + p.mu))
        }
        AdaptiveFamily::AdamL2 => {
            0.5 * p.eta * p.l_tau * p.sigma * p.l / (2.0 * p.mu * p.l + p.theta * (p.l + p.mu))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltNoiseInputs {
    pub mu: f64,
    pub l: f64,
    pub l_tau: f64,
    pub sigma: f64,
    pub eta: f64,
    pub s0: f64,
    pub d: usize,
    pub batch: f64,
    /// `f(x*)`, frozen-hessian kind only.
    pub anchor_loss: f64,
    /// Largest eigenvalue of `∇²f(x*)`, frozen-hessian kind only.
    pub lambda_max: f64,
}

/// Phase-2/3 envelopes for the state-dependent noise structures.
pub fn alt_noise_loss_bound(kind: StateKind, phase: u8, p: &AltNoiseInputs) -> Result<LossBoundCurve> {
    positive("mu", p.mu)?;
    let pc = phase_constants();
    let (m, q) = (pc.m, pc.q_hat);
    let dq2 = p.mu * p.d as f64 * q * q;
    if !(phase == 2 || phase == 3) {
        return Err(LabError::Config(format!("phase must be 2 or 3, got {phase}")));
    }
    if kind == StateKind::FrozenHessian {
        positive("anchor loss", p.anchor_loss)?;
        positive("lambda_max", p.lambda_max)?;
        positive("sigma", p.sigma)?;
        let (f0, s, lm) = (p.anchor_loss, p.sigma, p.lambda_max);
        return Ok(if phase == 2 {
            let delta = m / ((2.0 * f0).sqrt() * s * lm.sqrt()) + p.eta * p.mu * m * m / (4.0 * f0 * s * s * lm);
            LossBoundCurve::exponential(p.s0, 2.0 * p.mu * delta, 0.5 * p.eta * (p.l_tau - dq2) / (2.0 * p.mu * delta))
        } else {
            let delta = SQRT_2_OVER_PI / (f0.sqrt() * s * lm.sqrt()) + p.eta / PI * p.mu / (f0 * s * s * lm);
            LossBoundCurve::exponential(p.s0, 2.0 * p.mu * delta, 0.5 * p.eta * p.l_tau / (2.0 * p.mu * delta))
        });
    }
    let (alpha, beta) = match kind {
        StateKind::LossIsotropic | StateKind::LossHessian => {
            positive("sigma", p.sigma)?;
            let s2 = if kind == StateKind::LossHessian {
                positive("L", p.l)?;
                p.sigma * p.sigma * p.l
            } else {
                p.sigma * p.sigma
            };
            if phase == 2 {
                (
                    std::f64::consts::SQRT_2 * m * p.mu / s2.sqrt(),
                    0.5 * p.eta * (p.l_tau - dq2 - m * m * p.mu * p.mu / s2),
                )
            } else {
                (
                    2.0 * SQRT_2_OVER_PI * p.mu / s2.sqrt(),
                    p.eta * (0.5 * p.l_tau - 2.0 * p.mu * p.mu / (PI * s2)),
                )
            }
        }
        StateKind::Regression => {
            positive("L", p.l)?;
            let alpha = if phase == 2 {
                m * p.mu * p.batch.sqrt() / (2.0 * p.l).sqrt()
            } else {
                SQRT_2_OVER_PI * p.mu * p.batch.sqrt() / p.l.sqrt()
            };
            (alpha, 0.5 * p.eta * p.l_tau)
        }
        StateKind::FrozenHessian => unreachable!(),
    };
    let degenerate = beta <= 0.0;
    Ok(LossBoundCurve {
        s0: p.s0,
        rate: if degenerate { 0.0 } else { alpha * alpha / (2.0 * beta) },
        floor: if degenerate { 0.0 } else { beta * beta / (alpha * alpha) },
        form: CurveForm::LambertW { alpha, beta },
        floor_clamped: degenerate,
    })
}

//! Discrete optimizer updates, power-law schedulers and batch-size scaling rules.

use crate::error::{LabError, Result};
use crate::noise::sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Sgd,
    SignSgd,
    Rmsprop,
    RmspropW,
    Adam,
    AdamW,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sgd" => Family::Sgd,
            "signsgd" => Family::SignSgd,
            "rmsprop" => Family::Rmsprop,
            "rmspropw" => Family::RmspropW,
            "adam" => Family::Adam,
            "adamw" => Family::AdamW,
            other => return Err(LabError::Config(format!("unknown optimizer family '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Sgd => "sgd",
            Family::SignSgd => "signsgd",
            Family::Rmsprop => "rmsprop",
            Family::RmspropW => "rmspropw",
            Family::Adam => "adam",
            Family::AdamW => "adamw",
        }
    }

    pub fn decoupled(&self) -> bool {
        matches!(self, Family::RmspropW | Family::AdamW)
    }

    pub fn adaptive(&self) -> bool {
        matches!(self, Family::Rmsprop | Family::RmspropW | Family::Adam | Family::AdamW)
    }

    pub fn uses_momentum(&self) -> bool {
        matches!(self, Family::Adam | Family::AdamW)
    }
}

/// Hyperparameters of one discrete method. RMSprop reads its single `β` from `beta2`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub family: Family,
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub l2: f64,
    pub scheduler: Option<f64>,
}

impl OptimizerConfig {
    pub fn new(family: Family, eta: f64) -> Self {
        Self {
            family,
            eta,
            beta1: 0.9,
            beta2: 0.999,
            theta: 0.0,
            epsilon: 1e-8,
            l2: 0.0,
            scheduler: None,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2 = l2;
        self
    }

    pub fn with_scheduler(mut self, vartheta: f64) -> Self {
        self.scheduler = Some(vartheta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::Config(format!("optimizer {}: {m}", self.family.name())));
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad("eta must be finite and > 0");
        }
        if self.family.adaptive() && !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.family.adaptive() && !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2 must lie in [0, 1)");
        }
        if self.family.uses_momentum() && !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1 must lie in [0, 1)");
        }
        if self.theta < 0.0 || (self.theta > 0.0 && !self.family.decoupled()) {
            return bad("theta > 0 is only valid for rmspropw/adamw");
        }
        if self.l2 < 0.0 || (self.l2 > 0.0 && self.theta > 0.0) {
            return bad("l2 must be >= 0 and is exclusive with theta");
        }
        if let Some(v) = self.scheduler {
            if !(v >= 0.0) {
                return bad("scheduler exponent must be >= 0");
            }
        }
        Ok(())
    }

    /// Step-size multiplier at step index `k`.
    pub fn schedule(&self, k: u64) -> f64 {
        self.scheduler.map_or(1.0, |v| scheduler_value(v, k))
    }
}

/// `(t + 1)^{−ϑ}`.
pub fn scheduler_value(vartheta: f64, t: u64) -> f64 {
    if vartheta == 0.0 {
        1.0
    } else {
        ((t + 1) as f64).powf(-vartheta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub k: u64,
}

impl OptimizerState {
    pub fn new(x0: &[f64]) -> Self {
        let d = x0.len();
        Self { x: x0.to_vec(), m: vec![0.0; d], v: vec![0.0; d], k: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Ok,
    Diverged,
}

/// One exact update in place. `grad` is the stochastic gradient at `state.x`.
pub fn step(cfg: &OptimizerConfig, state: &mut OptimizerState, grad: &[f64], sched: f64) -> StepStatus {
    if grad.iter().any(|g| !g.is_finite()) {
        return StepStatus::Diverged;
    }
    let lr = cfg.eta * sched;
    let decay = lr * cfg.theta;
    match cfg.family {
        Family::Sgd => {
            for (x, g) in state.x.iter_mut().zip(grad) {
                *x -= lr * (g + cfg.l2 * *x);
            }
        }
        Family::SignSgd => {
            for (x, g) in state.x.iter_mut().zip(grad) {
                *x -= lr * sign(g + cfg.l2 * *x);
            }
        }
        Family::Rmsprop | Family::RmspropW => {
            let b = cfg.beta2;
            for ((x, v), g) in state.x.iter_mut().zip(state.v.iter_mut()).zip(grad) {
                let g = g + cfg.l2 * *x;
                *v = b * *v + (1.0 - b) * g * g;
                let x0 = *x;
                *x = x0 - lr * g / (v.sqrt() + cfg.epsilon) - decay * x0;
            }
        }
        Family::Adam | Family::AdamW => {
            let (b1, b2) = (cfg.beta1, cfg.beta2);
            let k = state.k + 1;
            let c1 = 1.0 - b1.powf(k as f64);
            let c2 = 1.0 - b2.powf(k as f64);
            for i in 0..state.x.len() {
                let x0 = state.x[i];
                let g = grad[i] + cfg.l2 * x0;
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
                state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
                let mh = state.m[i] / c1;
                let vh = state.v[i] / c2;
                state.x[i] = x0 - lr * mh / (vh.sqrt() + cfg.epsilon) - decay * x0;
            }
        }
    }
    state.k += 1;
    if state.x.iter().any(|x| !x.is_finite()) {
        StepStatus::Diverged
    } else {
        StepStatus::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingKind {
    Ours,
    Malladi,
    LinearSgd,
}

impl ScalingKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ours" => ScalingKind::Ours,
            "malladi" => ScalingKind::Malladi,
            "linear-sgd" => ScalingKind::LinearSgd,
            other => return Err(LabError::Config(format!("unknown scaling rule '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRule {
    pub rule: ScalingKind,
    pub delta: f64,
}

/// A rescaled configuration; the noise covariance is divided by `batch_factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaled {
    pub config: OptimizerConfig,
    pub batch_factor: f64,
}

pub fn apply_scaling(cfg: &OptimizerConfig, rule: ScalingRule) -> Result<Scaled> {
    if !(rule.delta >= 1.0) {
        return Err(LabError::Config(format!("scaling delta must be >= 1, got {}", rule.delta)));
    }
    scale_unchecked(cfg, rule.rule, rule.delta)
}

/// Inverse of [`apply_scaling`], i.e. the same rule with factor `1/δ`.
pub fn undo_scaling(cfg: &OptimizerConfig, rule: ScalingRule) -> Result<Scaled> {
    scale_unchecked(cfg, rule.rule, 1.0 / rule.delta)
}

fn scale_unchecked(cfg: &OptimizerConfig, kind: ScalingKind, delta: f64) -> Result<Scaled> {
    let mut out = cfg.clone();
    let kappa = delta.sqrt();
    let beta = |name: &str, b: f64, factor: f64| -> Result<f64> {
        let nb = 1.0 - factor * (1.0 - b);
        if nb < 0.0 || nb >= 1.0 {
            return Err(LabError::Config(format!("scaled {name} = {nb} leaves [0, 1)")));
        }
        Ok(nb)
    };
    match kind {
        ScalingKind::Ours => {
            out.eta = kappa * cfg.eta;
            out.theta = kappa * cfg.theta;
            if cfg.family.adaptive() {
                out.beta2 = beta("beta2", cfg.beta2, kappa)?;
            }
            if cfg.family.uses_momentum() {
                out.beta1 = beta("beta1", cfg.beta1, kappa)?;
            }
        }
        ScalingKind::Malladi => {
            out.eta = kappa * cfg.eta;
            if cfg.family.adaptive() {
                out.beta2 = beta("beta2", cfg.beta2, delta)?;
            }
            if cfg.family.uses_momentum() {
                out.beta1 = beta("beta1", cfg.beta1, delta)?;
            }
        }
        ScalingKind::LinearSgd => {
            if cfg.family != Family::Sgd {
                return Err(LabError::Config("linear-sgd scaling applies to sgd only".into()));
            }
            out.eta = delta * cfg.eta;
        }
    }
    Ok(Scaled { config: out, batch_factor: delta })
}

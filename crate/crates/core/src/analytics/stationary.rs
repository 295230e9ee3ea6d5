use super::bounds::AdaptiveFamily;
use crate::error::{LabError, Result};

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const PI: f64 = std::f64::consts::PI;

/// Per-coordinate relaxation rates of the first two moments.
///
/// `E[X_t] = x₀e^{−a t}` and
/// `Var[X_t] = x₀²(e^{−r t} − e^{−2a t}) + v∞(1 − e^{−r t})`.
/// For Ornstein–Uhlenbeck dynamics `r = 2a` and the first term vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Transient {
    pub mean_rate: Vec<f64>,
    pub cov_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMoments {
    pub mean: Vec<f64>,
    /// Diagonal of the stationary covariance.
    pub cov: Vec<f64>,
    pub x0: Vec<f64>,
    pub transient: Transient,
}

impl StationaryMoments {
    pub fn transient_mean(&self, t: f64) -> Vec<f64> {
        self.x0.iter().zip(&self.transient.mean_rate).map(|(x, a)| x * (-a * t).exp()).collect()
    }

    pub fn transient_cov(&self, t: f64) -> Vec<f64> {
        (0..self.cov.len())
            .map(|i| {
                let a = self.transient.mean_rate[i];
                let r = self.transient.cov_rate[i];
                let er = (-r * t).exp();
                self.x0[i] * self.x0[i] * (er - (-2.0 * a * t).exp()) + self.cov[i] * (1.0 - er)
            })
            .collect()
    }

    /// `½ Σ λ_i Var[X_i]` at stationarity (mean is zero).
    pub fn expected_loss(&self, lambdas: &[f64]) -> f64 {
        0.5 * lambdas.iter().zip(&self.cov).map(|(l, c)| l * c).sum::<f64>()
    }
}

fn check(lambdas: &[f64], sigmas: &[f64], x0: &[f64]) -> Result<()> {
    if sigmas.len() != lambdas.len() {
        return Err(LabError::Dimension { expected: lambdas.len(), got: sigmas.len() });
    }
    if x0.len() != lambdas.len() {
        return Err(LabError::Dimension { expected: lambdas.len(), got: x0.len() });
    }
    if lambdas.iter().chain(sigmas).any(|v| !(*v > 0.0)) {
        return Err(LabError::Unsupported(
            "stationary moments need a positive diagonal Hessian and noise".into(),
        ));
    }
    Ok(())
}

fn phase3_speed(lambda: f64, sigma: f64, eta: f64) -> f64 {
    SQRT_2_OVER_PI / sigma + lambda * eta / (PI * sigma * sigma)
}

/// Phase-3 SignSGD moments on `½xᵀHx` with `H = diag(λ)` and `Σ = diag(σ²)`.
pub fn signsgd_stationary(lambdas: &[f64], sigmas: &[f64], eta: f64, x0: &[f64]) -> Result<StationaryMoments> {
    check(lambdas, sigmas, x0)?;
    let d = lambdas.len();
    let mut mean_rate = Vec::with_capacity(d);
    let mut cov_rate = Vec::with_capacity(d);
    let mut cov = Vec::with_capacity(d);
    for (&l, &s) in lambdas.iter().zip(sigmas) {
        let r = 2.0 * l * phase3_speed(l, s, eta);
        mean_rate.push(SQRT_2_OVER_PI * l / s);
        cov_rate.push(r);
        cov.push(eta / r);
    }
    Ok(StationaryMoments { mean: vec![0.0; d], cov, x0: x0.to_vec(), transient: Transient { mean_rate, cov_rate } })
}

/// SGD moments: `Var[X_t] = (η/2)σ²/λ (1 − e^{−2λt})`.
pub fn sgd_stationary(lambdas: &[f64], sigmas: &[f64], eta: f64, x0: &[f64]) -> Result<StationaryMoments> {
    check(lambdas, sigmas, x0)?;
    let d = lambdas.len();
    Ok(StationaryMoments {
        mean: vec![0.0; d],
        cov: lambdas.iter().zip(sigmas).map(|(l, s)| 0.5 * eta * s * s / l).collect(),
        x0: x0.to_vec(),
        transient: Transient {
            mean_rate: lambdas.to_vec(),
            cov_rate: lambdas.iter().map(|l| 2.0 * l).collect(),
        },
    })
}

/// Long-run moments of the adaptive families near the minimum, where the
/// preconditioner has settled at `√V = σ`. The `θ` argument is ignored for
/// the coupled families.
pub fn adaptive_stationary(
    family: AdaptiveFamily,
    lambdas: &[f64],
    sigmas: &[f64],
    eta: f64,
    theta: f64,
    x0: &[f64],
) -> Result<StationaryMoments> {
    check(lambdas, sigmas, x0)?;
    let theta = match family {
        AdaptiveFamily::Rmsprop | AdaptiveFamily::Adam => 0.0,
        AdaptiveFamily::RmspropW | AdaptiveFamily::AdamW => theta,
        AdaptiveFamily::AdamL2 => {
            return Err(LabError::Unsupported("no stationary law for Adam with coupled L2".into()))
        }
    };
    if theta < 0.0 {
        return Err(LabError::Config("theta must be >= 0".into()));
    }
    let d = lambdas.len();
    let rate: Vec<f64> = lambdas.iter().zip(sigmas).map(|(l, s)| l / s + theta).collect();
    Ok(StationaryMoments {
        mean: vec![0.0; d],
        cov: lambdas.iter().zip(sigmas).map(|(l, s)| 0.5 * eta * s / (l + theta * s)).collect(),
        x0: x0.to_vec(),
        transient: Transient { cov_rate: rate.iter().map(|r| 2.0 * r).collect(), mean_rate: rate },
    })
}

/// Expected Phase-3 loss `E[½XᵀHX]` at time `t`.
pub fn signsgd_quad_loss_curve(lambdas: &[f64], sigmas: &[f64], eta: f64, x0: &[f64], t: f64) -> Result<f64> {
    check(lambdas, sigmas, x0)?;
    Ok(lambdas
        .iter()
        .zip(sigmas)
        .zip(x0)
        .map(|((&l, &s), &x)| {
            let dd = phase3_speed(l, s, eta);
            let e = (-2.0 * l * dd * t).exp();
            0.5 * l * x * x * e + eta / (4.0 * dd) * (1.0 - e)
        })
        .sum())
}

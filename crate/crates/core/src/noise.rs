//! Gradient-noise laws and the sign-drift maps built from them.
//!
//! Every law is coordinate-independent except the regression kind, whose
//! covariance `(2f(φ)D + ∇f∇fᵀ)/B` carries a rank-one coupling.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{LabError, Result};
use crate::landscapes::Landscape;

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Gauss error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `Ξ_ν(x) = F_ν(x) − ½` for the Student-t distribution with `ν` degrees of freedom.
///
/// With `s = √ν tan φ` the integral of the density becomes
/// `Γ((ν+1)/2) / (√π Γ(ν/2)) ∫₀^{atan(x/√ν)} cos^{ν−1} φ dφ`, a smooth integrand on a
/// bounded interval.
pub fn student_xi(nu: u32, x: f64) -> f64 {
    assert!(nu >= 1, "student_xi: nu must be >= 1");
    match nu {
        1 => x.atan() / std::f64::consts::PI,
        2 => x / (2.0 * (2.0 + x * x).sqrt()),
        _ => {
            let n = nu as f64;
            let c = (libm::lgamma(0.5 * (n + 1.0)) - libm::lgamma(0.5 * n)).exp()
                / std::f64::consts::PI.sqrt();
            let upper = (x / n.sqrt()).atan();
            let k = (nu - 1) as i32;
            c * adaptive_simpson(&|p: f64| p.cos().powi(k), 0.0, upper, 1e-11)
        }
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDiagNoise {
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StudentTNoise {
    pub nu: u32,
    pub scale: Vec<f64>,
    chi: ChiSquared<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    FrozenHessian,
    LossIsotropic,
    LossHessian,
    Regression,
}

impl StateKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "frozen-hessian" => Ok(Self::FrozenHessian),
            "loss-isotropic" => Ok(Self::LossIsotropic),
            "loss-hessian" => Ok(Self::LossHessian),
            "regression" => Ok(Self::Regression),
            other => Err(LabError::Config(format!("unknown state-scaled noise kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::FrozenHessian => "frozen-hessian",
            Self::LossIsotropic => "loss-isotropic",
            Self::LossHessian => "loss-hessian",
            Self::Regression => "regression",
        }
    }
}

/// Noise whose covariance depends on the current state.
///
/// `anchor_loss` and `anchor_hessian` hold `f(x*)` and `diag ∇²f(x*)` for the
/// frozen-hessian kind. `batch` only enters the regression kind explicitly; the
/// other kinds fold `1/B` into `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateScaledNoise {
    pub kind: StateKind,
    pub sigma: f64,
    pub anchor_loss: Option<f64>,
    pub anchor_hessian: Option<Vec<f64>>,
    pub batch: f64,
}

#[derive(Debug, Clone)]
pub enum NoiseModel {
    Gaussian(GaussianDiagNoise),
    StudentT(StudentTNoise),
    StateScaled(StateScaledNoise),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diag(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl GaussianDiagNoise {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() || sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(LabError::Config("gaussian noise: every sigma must be finite and > 0".into()));
        }
        Ok(Self { sigmas })
    }
}

impl StudentTNoise {
    pub fn new(nu: u32, scale: Vec<f64>) -> Result<Self> {
        if nu < 1 {
            return Err(LabError::Config("student-t noise: nu must be >= 1".into()));
        }
        if scale.is_empty() || scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(LabError::Config("student-t noise: every scale must be finite and > 0".into()));
        }
        let chi = ChiSquared::new(nu as f64).map_err(|e| LabError::Config(e.to_string()))?;
        Ok(Self { nu, scale, chi })
    }
}

impl StateScaledNoise {
    pub fn new(kind: StateKind, sigma: f64, batch: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() || !(batch > 0.0) {
            return Err(LabError::Config("state-scaled noise: sigma >= 0 and batch > 0 required".into()));
        }
        Ok(Self { kind, sigma, anchor_loss: None, anchor_hessian: None, batch })
    }

    pub fn with_anchor(mut self, loss: f64, hessian: Vec<f64>) -> Result<Self> {
        if !(loss >= 0.0) {
            return Err(LabError::Domain("anchor loss f(x*) must be >= 0".into()));
        }
        self.anchor_loss = Some(loss);
        self.anchor_hessian = Some(hessian);
        Ok(self)
    }

    fn loss_at(&self, landscape: &Landscape, x: &[f64]) -> Result<f64> {
        let f = landscape.value(x);
        if f < 0.0 {
            return Err(LabError::Domain(format!(
                "{} noise needs f(x) >= 0, got {f}",
                self.kind.name()
            )));
        }
        Ok(f)
    }

    fn variances(&self, landscape: &Landscape, x: &[f64]) -> Result<Vec<f64>> {
        let s2 = self.sigma * self.sigma;
        match self.kind {
            StateKind::FrozenHessian => {
                let f0 = self
                    .anchor_loss
                    .ok_or_else(|| LabError::Config("frozen-hessian noise needs an anchor".into()))?;
                let h = self.anchor_hessian.as_ref().unwrap();
                Ok(h.iter().map(|hi| s2 * f0 * hi.max(0.0)).collect())
            }
            StateKind::LossIsotropic => {
                let f = self.loss_at(landscape, x)?;
                Ok(vec![s2 * f; x.len()])
            }
            StateKind::LossHessian => {
                let f = self.loss_at(landscape, x)?;
                Ok(landscape.hessian_diag(x).iter().map(|h| s2 * f * h.max(0.0)).collect())
            }
            StateKind::Regression => Err(LabError::Unsupported(
                "regression noise has a full covariance".into(),
            )),
        }
    }
}

impl NoiseModel {
    pub fn dim(&self) -> Option<usize> {
        match self {
            NoiseModel::Gaussian(g) => Some(g.sigmas.len()),
            NoiseModel::StudentT(t) => Some(t.scale.len()),
            NoiseModel::StateScaled(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian(_) => "gaussian",
            NoiseModel::StudentT(_) => "student-t",
            NoiseModel::StateScaled(s) => s.kind.name(),
        }
    }

    /// Draw one `Z(x)` into `out`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        landscape: &Landscape,
        x: &[f64],
        rng: &mut R,
        out: &mut [f64],
    ) -> Result<()> {
        match self {
            NoiseModel::Gaussian(g) => {
                for (o, s) in out.iter_mut().zip(&g.sigmas) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = s * z;
                }
            }
            NoiseModel::StudentT(t) => {
                let nu = t.nu as f64;
                for (o, s) in out.iter_mut().zip(&t.scale) {
                    let z: f64 = StandardNormal.sample(rng);
                    let c = t.chi.sample(rng);
                    *o = s * z / (c / nu).sqrt();
                }
            }
            NoiseModel::StateScaled(n) if n.kind == StateKind::Regression => {
                // Z = (√(2f) D^{1/2} ξ + ∇f ζ)/√B has covariance (2fD + ∇f∇fᵀ)/B.
                let d = match landscape {
                    Landscape::Quadratic(q) => &q.lambdas,
                    _ => {
                        return Err(LabError::Unsupported(
                            "regression noise runs in residual coordinates (quadratic landscape)".into(),
                        ))
                    }
                };
                let f = n.loss_at(landscape, x)?;
                let zeta: f64 = StandardNormal.sample(rng);
                let inv_sqrt_b = 1.0 / n.batch.sqrt();
                for i in 0..x.len() {
                    let xi: f64 = StandardNormal.sample(rng);
                    let g = d[i] * x[i];
                    out[i] = inv_sqrt_b * ((2.0 * f * d[i]).sqrt() * xi + g * zeta);
                }
            }
            NoiseModel::StateScaled(n) => {
                let var = n.variances(landscape, x)?;
                for (o, v) in out.iter_mut().zip(var) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = v.sqrt() * z;
                }
            }
        }
        Ok(())
    }

    pub fn covariance(&self, landscape: &Landscape, x: &[f64]) -> Result<Covariance> {
        match self {
            NoiseModel::Gaussian(g) => Ok(Covariance::Diag(g.sigmas.iter().map(|s| s * s).collect())),
            NoiseModel::StudentT(t) if t.nu <= 2 => Err(LabError::InfiniteVariance(format!(
                "student-t with nu = {} has no covariance",
                t.nu
            ))),
            NoiseModel::StudentT(t) => {
                let nu = t.nu as f64;
                Ok(Covariance::Diag(t.scale.iter().map(|s| s * s * nu / (nu - 2.0)).collect()))
            }
            NoiseModel::StateScaled(n) if n.kind == StateKind::Regression => {
                let d = match landscape {
                    Landscape::Quadratic(q) => &q.lambdas,
                    _ => return Err(LabError::Unsupported("regression noise needs residual coordinates".into())),
                };
                let f = n.loss_at(landscape, x)?;
                let g: Vec<f64> = d.iter().zip(x).map(|(a, b)| a * b).collect();
                let full = (0..x.len())
                    .map(|i| {
                        (0..x.len())
                            .map(|j| {
                                let diag = if i == j { 2.0 * f * d[i] } else { 0.0 };
                                (diag + g[i] * g[j]) / n.batch
                            })
                            .collect()
                    })
                    .collect();
                Ok(Covariance::Full(full))
            }
            NoiseModel::StateScaled(n) => Ok(Covariance::Diag(n.variances(landscape, x)?)),
        }
    }

    /// Per-coordinate scale entering the sign drift: the standard deviation for
    /// Gaussian-type laws, the t scale for Student noise.
    pub fn sign_scales(&self, landscape: &Landscape, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            NoiseModel::Gaussian(g) => out.copy_from_slice(&g.sigmas),
            NoiseModel::StudentT(t) => out.copy_from_slice(&t.scale),
            NoiseModel::StateScaled(n) => {
                for (o, v) in out.iter_mut().zip(n.variances(landscape, x)?) {
                    *o = v.sqrt();
                }
            }
        }
        Ok(())
    }

    /// Diagonal of `Σ(x)` for coordinate-independent finite-variance laws.
    pub fn diag_variances(&self, landscape: &Landscape, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            NoiseModel::Gaussian(g) => {
                for (o, s) in out.iter_mut().zip(&g.sigmas) {
                    *o = s * s;
                }
            }
            NoiseModel::StudentT(t) if t.nu <= 2 => {
                return Err(LabError::InfiniteVariance(format!("student-t with nu = {}", t.nu)))
            }
            NoiseModel::StudentT(t) => {
                let nu = t.nu as f64;
                for (o, s) in out.iter_mut().zip(&t.scale) {
                    *o = s * s * nu / (nu - 2.0);
                }
            }
            NoiseModel::StateScaled(n) => out.copy_from_slice(&n.variances(landscape, x)?),
        }
        Ok(())
    }

    pub fn is_gaussian(&self) -> bool {
        match self {
            NoiseModel::Gaussian(_) => true,
            NoiseModel::StudentT(_) => false,
            NoiseModel::StateScaled(n) => n.kind != StateKind::Regression,
        }
    }

    /// `E[sign(g + Z_i)] = 1 − 2 P(g + Z_i < 0)`.
    pub fn sign_drift(&self, g: f64, scale: f64) -> f64 {
        if scale == 0.0 {
            return sign(g);
        }
        match self {
            NoiseModel::StudentT(t) => 2.0 * student_xi(t.nu, g / scale),
            _ => erf(g / (SQRT_2 * scale)),
        }
    }

    pub fn sign_diffusion(&self, g: f64, scale: f64) -> f64 {
        if scale == 0.0 {
            return 0.0;
        }
        let d = self.sign_drift(g, scale);
        (1.0 - d * d).max(0.0).sqrt()
    }

    /// Rescale for a batch-size factor: `Σ → Σ/δ`.
    pub fn scaled_by_batch(&self, delta: f64) -> Result<Self> {
        let k = 1.0 / delta.sqrt();
        Ok(match self {
            NoiseModel::Gaussian(g) => {
                NoiseModel::Gaussian(GaussianDiagNoise::new(g.sigmas.iter().map(|s| s * k).collect())?)
            }
            NoiseModel::StudentT(t) => {
                NoiseModel::StudentT(StudentTNoise::new(t.nu, t.scale.iter().map(|s| s * k).collect())?)
            }
            NoiseModel::StateScaled(n) => {
                let mut n = n.clone();
                if n.kind == StateKind::Regression {
                    n.batch *= delta;
                } else {
                    n.sigma *= k;
                }
                NoiseModel::StateScaled(n)
            }
        })
    }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

//! Analytic objectives: diagonal quadratics, the embedded saddle and the power-law regression.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LabError, Result};

/// `f(x) = ½ Σ λ_i x_i²`, minimiser at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDiag {
    pub lambdas: Vec<f64>,
}

/// `f(x) = ½ Σ λ_i x_i² + ¼ q Σ x_i⁴ − (ξ/3) Σ x_i³`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSaddle {
    pub lambdas: Vec<f64>,
    pub quartic: f64,
    pub cubic: f64,
}

/// `f(θ) = ½ ⟨D(Wθ − b), Wθ − b⟩` with `D = diag(j^{−2α})`.
///
/// `W` is stored row-major with `v` rows and `d` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawQuadratic {
    pub v: usize,
    pub d: usize,
    pub alpha: f64,
    pub design: Vec<f64>,
    pub target: Vec<f64>,
    spectrum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Landscape {
    Quadratic(QuadraticDiag),
    Saddle(EmbeddedSaddle),
    PowerLaw(PowerLawQuadratic),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureConstants {
    pub mu: Option<f64>,
    pub smoothness: Option<f64>,
    pub trace_bound: Option<f64>,
}

impl CurvatureConstants {
    pub fn require_mu(&self) -> Result<f64> {
        self.mu
            .ok_or_else(|| LabError::Unsupported("landscape has no strong-convexity constant".into()))
    }

    pub fn require_smoothness(&self) -> Result<f64> {
        self.smoothness
            .ok_or_else(|| LabError::Unsupported("landscape has no smoothness constant".into()))
    }

    pub fn require_trace(&self) -> Result<f64> {
        self.trace_bound
            .ok_or_else(|| LabError::Unsupported("landscape has no Hessian trace bound".into()))
    }
}

fn check_finite(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(LabError::Config(format!("{name}: dimension must be at least 1")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Config(format!("{name}: entries must be finite")));
    }
    Ok(())
}

impl QuadraticDiag {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        check_finite("quadratic lambdas", &lambdas)?;
        Ok(Self { lambdas })
    }

    pub fn is_convex(&self) -> bool {
        self.lambdas.iter().all(|&l| l > 0.0)
    }
}

impl EmbeddedSaddle {
    pub fn new(lambdas: Vec<f64>, quartic: f64, cubic: f64) -> Result<Self> {
        check_finite("saddle lambdas", &lambdas)?;
        if !(quartic > 0.0) || !cubic.is_finite() {
            return Err(LabError::Config("saddle: quartic must be > 0 and cubic finite".into()));
        }
        Ok(Self { lambdas, quartic, cubic })
    }
}

impl PowerLawQuadratic {
    pub fn new(v: usize, d: usize, alpha: f64, design: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if v == 0 || d == 0 {
            return Err(LabError::Config("power-law: v and d must be positive".into()));
        }
        if design.len() != v * d {
            return Err(LabError::Dimension { expected: v * d, got: design.len() });
        }
        if target.len() != v {
            return Err(LabError::Dimension { expected: v, got: target.len() });
        }
        if !(alpha >= 0.0) {
            return Err(LabError::Config("power-law: alpha must be >= 0".into()));
        }
        let spectrum = (1..=v).map(|j| (j as f64).powf(-2.0 * alpha)).collect();
        Ok(Self { v, d, alpha, design, target, spectrum })
    }

    /// Gaussian design with entries `N(0, 1/d)` and target `N(0, 1)`.
    pub fn random(v: usize, d: usize, alpha: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (d as f64).sqrt();
        let design = (0..v * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect::<Vec<f64>>();
        let target = (0..v).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self::new(v, d, alpha, design, target)
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// `φ = Wθ − b`.
    pub fn phi(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.v)
            .map(|r| {
                let row = &self.design[r * self.d..(r + 1) * self.d];
                row.iter().zip(theta).map(|(w, t)| w * t).sum::<f64>() - self.target[r]
            })
            .collect()
    }

    /// The same objective written in the residual coordinates `φ`.
    pub fn phi_landscape(&self) -> QuadraticDiag {
        QuadraticDiag { lambdas: self.spectrum.clone() }
    }
}

impl Landscape {
    pub fn dim(&self) -> usize {
        match self {
            Landscape::Quadratic(q) => q.lambdas.len(),
            Landscape::Saddle(s) => s.lambdas.len(),
            Landscape::PowerLaw(p) => p.d,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(LabError::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.value(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g = vec![0.0; x.len()];
        self.grad_into(x, &mut g);
        Ok(g)
    }

    /// Unchecked evaluation for inner loops; callers guarantee `x.len() == dim()`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Landscape::Quadratic(q) => {
                0.5 * q.lambdas.iter().zip(x).map(|(l, xi)| l * xi * xi).sum::<f64>()
            }
            Landscape::Saddle(s) => s
                .lambdas
                .iter()
                .zip(x)
                .map(|(l, &xi)| {
                    let x2 = xi * xi;
                    0.5 * l * x2 + 0.25 * s.quartic * x2 * x2 - s.cubic / 3.0 * x2 * xi
                })
                .sum(),
            Landscape::PowerLaw(p) => {
                let phi = p.phi(x);
                0.5 * p.spectrum.iter().zip(&phi).map(|(dj, f)| dj * f * f).sum::<f64>()
            }
        }
    }

    /// Unchecked gradient for inner loops.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Landscape::Quadratic(q) => {
                for ((o, l), xi) in out.iter_mut().zip(&q.lambdas).zip(x) {
                    *o = l * xi;
                }
            }
            Landscape::Saddle(s) => {
                for ((o, l), &xi) in out.iter_mut().zip(&s.lambdas).zip(x) {
                    *o = l * xi + s.quartic * xi * xi * xi - s.cubic * xi * xi;
                }
            }
            Landscape::PowerLaw(p) => {
                let phi = p.phi(x);
                out.iter_mut().for_each(|o| *o = 0.0);
                for r in 0..p.v {
                    let w = p.spectrum[r] * phi[r];
                    let row = &p.design[r * p.d..(r + 1) * p.d];
                    for (o, wr) in out.iter_mut().zip(row) {
                        *o += wr * w;
                    }
                }
            }
        }
    }

    /// Diagonal of `∇²f(x)`.
    pub fn hessian_diag(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Landscape::Quadratic(q) => q.lambdas.clone(),
            Landscape::Saddle(s) => s
                .lambdas
                .iter()
                .zip(x)
                .map(|(l, &xi)| l + 3.0 * s.quartic * xi * xi - 2.0 * s.cubic * xi)
                .collect(),
            Landscape::PowerLaw(p) => (0..p.d)
                .map(|c| {
                    (0..p.v)
                        .map(|r| p.spectrum[r] * p.design[r * p.d + c].powi(2))
                        .sum()
                })
                .collect(),
        }
    }

    pub fn minimizer(&self) -> Option<Vec<f64>> {
        match self {
            Landscape::Quadratic(q) if q.is_convex() => Some(vec![0.0; q.lambdas.len()]),
            _ => None,
        }
    }

    /// Curvature constants. The power-law landscape reports them in `φ` coordinates.
    pub fn constants(&self) -> CurvatureConstants {
        match self {
            Landscape::Quadratic(q) => {
                let max = q.lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if q.is_convex() {
                    CurvatureConstants {
                        mu: Some(q.lambdas.iter().cloned().fold(f64::INFINITY, f64::min)),
                        smoothness: Some(max),
                        trace_bound: Some(q.lambdas.iter().sum()),
                    }
                } else {
                    CurvatureConstants { mu: None, smoothness: Some(max.abs()), trace_bound: None }
                }
            }
            Landscape::Saddle(_) => CurvatureConstants { mu: None, smoothness: None, trace_bound: None },
            Landscape::PowerLaw(p) => CurvatureConstants {
                mu: p.spectrum.last().copied(),
                smoothness: p.spectrum.first().copied(),
                trace_bound: Some(p.spectrum.iter().sum()),
            },
        }
    }

    /// Diagonal quadratic view, required by every closed-form oracle.
    pub fn as_quadratic(&self) -> Result<&QuadraticDiag> {
        match self {
            Landscape::Quadratic(q) if q.is_convex() => Ok(q),
            _ => Err(LabError::Unsupported(
                "closed-form oracles need a convex diagonal quadratic".into(),
            )),
        }
    }
}

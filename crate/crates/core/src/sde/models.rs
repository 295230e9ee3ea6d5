use super::{SdeSystem, StateLayout};
use crate::error::{LabError, Result};
use crate::landscapes::Landscape;
use crate::noise::{sign, NoiseModel, StateKind, SQRT_2};
use crate::optimizers::OptimizerConfig;

const FRAC_2_PI_SQRT: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignVariant {
    /// `1 − 2P(g + Z < 0)` for whichever law the noise model carries.
    Full,
    Erf,
    Phase1Ode,
    Phase3,
    Student,
}

impl SignVariant {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => Self::Full,
            "erf" => Self::Erf,
            "phase1-ode" => Self::Phase1Ode,
            "phase3" => Self::Phase3,
            "student" => Self::Student,
            other => return Err(LabError::Config(format!("unknown SignSGD SDE variant '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Ours,
    Malladi,
}

impl Baseline {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Self::Ours),
            "malladi" => Ok(Self::Malladi),
            other => Err(LabError::Config(format!("unknown SDE baseline '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ours => "ours",
            Self::Malladi => "malladi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Phase1 = 1,
    Phase2 = 2,
    Phase3 = 3,
}

/// Label each coordinate by its signal-to-noise ratio `Y = Σ^{−½}∇f/√2`.
/// Ties go to the outer phase at `|Y| = 3/2` and to phase 3 at `|Y| = 1`.
pub fn phase_classify(x: &[f64], landscape: &Landscape, noise: &NoiseModel) -> Result<Vec<Phase>> {
    if !noise.is_gaussian() {
        return Err(LabError::InfiniteVariance(
            "phase labels need Gaussian noise (Y is defined through Σ^{-1/2})".into(),
        ));
    }
    let g = landscape.gradient(x)?;
    let mut s = vec![0.0; x.len()];
    noise.sign_scales(landscape, x, &mut s)?;
    Ok(g.iter()
        .zip(&s)
        .map(|(gi, si)| {
            let y = if *si == 0.0 {
                if *gi == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                (gi / (SQRT_2 * si)).abs()
            };
            Phase::from_snr(y)
        })
        .collect())
}

impl Phase {
    /// Label for `|Y|`; ties go to the outer phase at 3/2 and to phase 3 at 1.
    pub fn from_snr(y: f64) -> Self {
        let y = y.abs();
        if y >= 1.5 {
            Phase::Phase1
        } else if y > 1.0 {
            Phase::Phase2
        } else {
            Phase::Phase3
        }
    }
}

/// `ι(t) = 1 − e^{−ρt}`.
pub fn iota(rho: f64, t: f64) -> f64 {
    -(-rho * t).exp_m1()
}

/// SignSGD models: the general drift `−(1 − 2P(∇f + Z < 0))` and its closed forms.
#[derive(Debug, Clone)]
pub struct SignSgdSde {
    landscape: Landscape,
    noise: NoiseModel,
    variant: SignVariant,
    sqrt_eta: f64,
    slope0: f64,
}

impl SignSgdSde {
    pub fn new(landscape: Landscape, noise: NoiseModel, variant: SignVariant, eta: f64) -> Result<Self> {
        let regression = matches!(&noise, NoiseModel::StateScaled(n) if n.kind == StateKind::Regression);
        if regression {
            return Err(LabError::Unsupported(
                "SignSGD SDE supports coordinate-independent noise only".into(),
            ));
        }
        let student = matches!(noise, NoiseModel::StudentT(_));
        match variant {
            SignVariant::Erf if student => {
                return Err(LabError::Config("erf variant requires Gaussian noise".into()))
            }
            SignVariant::Student if !student => {
                return Err(LabError::Config("student variant requires Student-t noise".into()))
            }
            _ => {}
        }
        if let Some(d) = noise.dim() {
            if d != landscape.dim() {
                return Err(LabError::Dimension { expected: landscape.dim(), got: d });
            }
        }
        let slope0 = match &noise {
            NoiseModel::StudentT(t) => {
                let n = t.nu as f64;
                2.0 * (libm::lgamma(0.5 * (n + 1.0)) - libm::lgamma(0.5 * n)).exp()
                    / (n * std::f64::consts::PI).sqrt()
            }
            _ => FRAC_2_PI_SQRT,
        };
        Ok(Self { landscape, noise, variant, sqrt_eta: eta.sqrt(), slope0 })
    }

    pub fn sqrt_eta(&self) -> f64 {
        self.sqrt_eta
    }
}

impl SdeSystem for SignSgdSde {
    fn layout(&self) -> StateLayout {
        StateLayout::x_only(self.landscape.dim())
    }

    fn coefficients(&self, _t: f64, x: &[f64], drift: &mut [f64], diffusion: &mut [f64]) {
        self.landscape.grad_into(x, drift);
        if self.noise.sign_scales(&self.landscape, x, diffusion).is_err() {
            drift.iter_mut().for_each(|b| *b = f64::NAN);
            return;
        }
        for (b, s) in drift.iter_mut().zip(diffusion.iter_mut()) {
            let (g, sc) = (*b, *s);
            match self.variant {
                SignVariant::Phase1Ode => {
                    *b = -sign(g);
                    *s = 0.0;
                }
                SignVariant::Phase3 => {
                    if sc == 0.0 {
                        *b = -sign(g);
                        *s = 0.0;
                    } else {
                        let r = self.slope0 * g / sc;
                        *b = -r;
                        *s = self.sqrt_eta * (1.0 - r * r).max(0.0).sqrt();
                    }
                }
                _ => {
                    let m = self.noise.sign_drift(g, sc);
                    *b = -m;
                    *s = if sc == 0.0 { 0.0 } else { self.sqrt_eta * (1.0 - m * m).max(0.0).sqrt() };
                }
            }
        }
    }
}

/// `dX = −κ∇f dt + κ√η Σ^{½} dW`; batch scaling lives in the noise model.
#[derive(Debug, Clone)]
pub struct SgdSde {
    landscape: Landscape,
    noise: NoiseModel,
    kappa: f64,
    sqrt_eta: f64,
}

impl SgdSde {
    pub fn new(landscape: Landscape, noise: NoiseModel, kappa: f64, eta: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(LabError::Config("kappa must be > 0".into()));
        }
        check_finite_variance(&noise)?;
        Ok(Self { landscape, noise, kappa, sqrt_eta: eta.sqrt() })
    }
}

fn check_finite_variance(noise: &NoiseModel) -> Result<()> {
    match noise {
        NoiseModel::StudentT(t) if t.nu <= 2 => Err(LabError::InfiniteVariance(
            "this SDE requires a finite noise covariance".into(),
        )),
        NoiseModel::StateScaled(n) if n.kind == StateKind::Regression => Err(LabError::Unsupported(
            "this SDE supports coordinate-independent noise only".into(),
        )),
        _ => Ok(()),
    }
}

impl SdeSystem for SgdSde {
    fn layout(&self) -> StateLayout {
        StateLayout::x_only(self.landscape.dim())
    }

    fn coefficients(&self, _t: f64, x: &[f64], drift: &mut [f64], diffusion: &mut [f64]) {
        self.landscape.grad_into(x, drift);
        if self.noise.diag_variances(&self.landscape, x, diffusion).is_err() {
            drift.iter_mut().for_each(|b| *b = f64::NAN);
            return;
        }
        let a = self.kappa * self.sqrt_eta;
        for (b, s) in drift.iter_mut().zip(diffusion.iter_mut()) {
            *b *= -self.kappa;
            *s = a * s.sqrt();
        }
    }
}

/// RMSprop(W) over `(X, V)`.
#[derive(Debug, Clone)]
pub struct RmspropSde {
    landscape: Landscape,
    noise: NoiseModel,
    baseline: Baseline,
    theta: f64,
    rho: f64,
    beta: f64,
    epsilon: f64,
    sqrt_eta: f64,
}

impl RmspropSde {
    pub fn new(landscape: Landscape, noise: NoiseModel, cfg: &OptimizerConfig, baseline: Baseline) -> Result<Self> {
        check_finite_variance(&noise)?;
        if !(0.0..1.0).contains(&cfg.beta2) {
            return Err(LabError::Config("rmsprop beta must lie in [0, 1)".into()));
        }
        Ok(Self {
            landscape,
            noise,
            baseline,
            theta: cfg.theta,
            rho: (1.0 - cfg.beta2) / cfg.eta,
            beta: cfg.beta2,
            epsilon: cfg.epsilon,
            sqrt_eta: cfg.eta.sqrt(),
        })
    }

    /// Checks a user-supplied initial `V` block.
    pub fn check_initial_v(v: &[f64]) -> Result<()> {
        if v.iter().any(|&vi| !(vi >= 0.0)) {
            return Err(LabError::Domain("initial V must be non-negative".into()));
        }
        Ok(())
    }
}

impl SdeSystem for RmspropSde {
    fn layout(&self) -> StateLayout {
        StateLayout { d: self.landscape.dim(), has_m: false, has_v: true }
    }

    /// `V₀ = (1−β)(∇f(x₀)² + diag Σ(x₀))`, the expected second moment after the first update.
    fn initial_state(&self, x0: &[f64]) -> Vec<f64> {
        let d = x0.len();
        let mut s = vec![0.0; 2 * d];
        s[..d].copy_from_slice(x0);
        let g = self.landscape.gradient(x0).unwrap_or_else(|_| vec![f64::NAN; d]);
        let mut var = vec![0.0; d];
        if self.noise.diag_variances(&self.landscape, x0, &mut var).is_err() {
            var.iter_mut().for_each(|v| *v = f64::NAN);
        }
        for i in 0..d {
            s[d + i] = (1.0 - self.beta) * (g[i] * g[i] + var[i]);
        }
        s
    }

    fn coefficients(&self, _t: f64, state: &[f64], drift: &mut [f64], diffusion: &mut [f64]) {
        let d = self.landscape.dim();
        let (x, v) = state.split_at(d);
        let (bx, bv) = drift.split_at_mut(d);
        let (sx, sv) = diffusion.split_at_mut(d);
        self.landscape.grad_into(x, bx);
        if self.noise.diag_variances(&self.landscape, x, sx).is_err() {
            drift.iter_mut().for_each(|b| *b = f64::NAN);
            return;
        }
        for i in 0..d {
            let (g, var) = (bx[i], sx[i]);
            let p = v[i].max(0.0).sqrt() + self.epsilon;
            bx[i] = -g / p - self.theta * x[i];
            sx[i] = self.sqrt_eta * var.sqrt() / p;
            let target = match self.baseline {
                Baseline::Ours => g * g + var,
                Baseline::Malladi => var,
            };
            bv[i] = self.rho * (target - v[i]);
            sv[i] = 0.0;
        }
    }
}

/// Adam(W) over `(X, M, V)` with the bias-correction factors `ι₁(t)`, `ι₂(t)`.
#[derive(Debug, Clone)]
pub struct AdamSde {
    landscape: Landscape,
    noise: NoiseModel,
    baseline: Baseline,
    theta: f64,
    rho1: f64,
    rho2: f64,
    epsilon: f64,
    eta: f64,
    dt: f64,
}

impl AdamSde {
    pub fn new(
        landscape: Landscape,
        noise: NoiseModel,
        cfg: &OptimizerConfig,
        baseline: Baseline,
        dt: f64,
    ) -> Result<Self> {
        check_finite_variance(&noise)?;
        if !(0.0..1.0).contains(&cfg.beta1) || !(0.0..1.0).contains(&cfg.beta2) {
            return Err(LabError::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(dt > 0.0) {
            return Err(LabError::Config("dt must be > 0".into()));
        }
        Ok(Self {
            landscape,
            noise,
            baseline,
            theta: cfg.theta,
            rho1: (1.0 - cfg.beta1) / cfg.eta,
            rho2: (1.0 - cfg.beta2) / cfg.eta,
            epsilon: cfg.epsilon,
            eta: cfg.eta,
            dt,
        })
    }
}

impl SdeSystem for AdamSde {
    fn layout(&self) -> StateLayout {
        StateLayout { d: self.landscape.dim(), has_m: true, has_v: true }
    }

    /// `M₀ = 0`, `V₀ = ι₂(Δt)(∇f(x₀)² + diag Σ(x₀))`: the second moment one update in,
    /// which keeps `P` away from `ε√ι₂` at the first step.
    fn initial_state(&self, x0: &[f64]) -> Vec<f64> {
        let d = x0.len();
        let mut s = vec![0.0; 3 * d];
        s[..d].copy_from_slice(x0);
        let g = self.landscape.gradient(x0).unwrap_or_else(|_| vec![f64::NAN; d]);
        let mut var = vec![0.0; d];
        if self.noise.diag_variances(&self.landscape, x0, &mut var).is_err() {
            var.iter_mut().for_each(|v| *v = f64::NAN);
        }
        let i2 = iota(self.rho2, self.dt);
        for i in 0..d {
            s[2 * d + i] = i2 * (g[i] * g[i] + var[i]);
        }
        s
    }

    fn coefficients(&self, t: f64, state: &[f64], drift: &mut [f64], diffusion: &mut [f64]) {
        let d = self.landscape.dim();
        let x = &state[..d];
        let m = &state[d..2 * d];
        let v = &state[2 * d..3 * d];
        let tc = t.max(self.dt);
        let i1 = iota(self.rho1, tc);
        let i2 = iota(self.rho2, tc);
        let lead = i2.sqrt() / i1;
        let (bx, rest) = drift.split_at_mut(d);
        let (bm, bv) = rest.split_at_mut(d);
        let (sx, rest) = diffusion.split_at_mut(d);
        let (sm, sv) = rest.split_at_mut(d);
        self.landscape.grad_into(x, bx);
        if self.noise.diag_variances(&self.landscape, x, sx).is_err() {
            drift.iter_mut().for_each(|b| *b = f64::NAN);
            return;
        }
        let sqrt_eta = self.eta.sqrt();
        for i in 0..d {
            let (g, var) = (bx[i], sx[i]);
            let p = v[i].max(0.0).sqrt() + self.epsilon * i2.sqrt();
            let num = match self.baseline {
                Baseline::Ours => m[i] + self.eta * self.rho1 * (g - m[i]),
                Baseline::Malladi => m[i],
            };
            bx[i] = -lead * num / p - self.theta * x[i];
            sx[i] = 0.0;
            bm[i] = self.rho1 * (g - m[i]);
            sm[i] = sqrt_eta * self.rho1 * var.sqrt();
            let target = match self.baseline {
                Baseline::Ours => g * g + var,
                Baseline::Malladi => var,
            };
            bv[i] = self.rho2 * (target - v[i]);
            sv[i] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscapes::QuadraticDiag;
    use crate::noise::{GaussianDiagNoise, StudentTNoise};
    use crate::optimizers::Family;

    fn quad(l: &[f64]) -> Landscape {
        Landscape::Quadratic(QuadraticDiag::new(l.to_vec()).unwrap())
    }

    fn gauss(s: &[f64]) -> NoiseModel {
        NoiseModel::Gaussian(GaussianDiagNoise::new(s.to_vec()).unwrap())
    }

    #[test]
    fn erf_variant_at_minimizer_is_pure_diffusion() {
        let sde = SignSgdSde::new(quad(&[1.0, 2.0]), gauss(&[0.1, 0.1]), SignVariant::Erf, 1e-3).unwrap();
        assert_eq!(sde.drift(0.0, &[0.0, 0.0]), vec![0.0, 0.0]);
        for s in sde.diffusion(0.0, &[0.0, 0.0]) {
            assert!((s - 1e-3f64.sqrt()).abs() < 1e-16);
        }
    }

    #[test]
    fn erf_variant_unit_snr() {
        // g/σ = 1 on both coordinates.
        let sde = SignSgdSde::new(quad(&[1.0, 2.0]), gauss(&[0.1, 0.2]), SignVariant::Erf, 1e-3).unwrap();
        for b in sde.drift(0.0, &[0.1, 0.1]) {
            assert!((b + 0.682_689_5).abs() < 1e-7);
        }
    }

    #[test]
    fn variant_noise_pairing() {
        let t = NoiseModel::StudentT(StudentTNoise::new(2, vec![1.0]).unwrap());
        assert!(SignSgdSde::new(quad(&[1.0]), t.clone(), SignVariant::Erf, 1e-3).is_err());
        assert!(SignSgdSde::new(quad(&[1.0]), gauss(&[1.0]), SignVariant::Student, 1e-3).is_err());
        assert!(SignSgdSde::new(quad(&[1.0]), t.clone(), SignVariant::Student, 1e-3).is_ok());
        assert!(matches!(SgdSde::new(quad(&[1.0]), t, 1.0, 1e-3), Err(LabError::InfiniteVariance(_))));
    }

    #[test]
    fn student_phase3_slope_ratio() {
        let t = NoiseModel::StudentT(StudentTNoise::new(2, vec![1.0]).unwrap());
        let st = SignSgdSde::new(quad(&[1.0]), t, SignVariant::Phase3, 1e-3).unwrap();
        let ga = SignSgdSde::new(quad(&[1.0]), gauss(&[1.0]), SignVariant::Phase3, 1e-3).unwrap();
        let r = st.drift(0.0, &[0.01])[0] / ga.drift(0.0, &[0.01])[0];
        assert!((r - (std::f64::consts::PI / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sgd_kappa_scales_both_coefficients() {
        let a = SgdSde::new(quad(&[1.0, 3.0]), gauss(&[0.1, 0.3]), 1.0, 1e-2).unwrap();
        let b = SgdSde::new(quad(&[1.0, 3.0]), gauss(&[0.1, 0.3]), 2.0, 1e-2).unwrap();
        let x = [0.4, -0.7];
        for (p, q) in a.drift(0.0, &x).iter().zip(b.drift(0.0, &x)) {
            assert_eq!(2.0 * p, q);
        }
        for (p, q) in a.diffusion(0.0, &x).iter().zip(b.diffusion(0.0, &x)) {
            assert!((2.0 * p - q).abs() < 1e-16);
        }
    }

    #[test]
    fn phase_labels() {
        let f = quad(&[1.0, 2.0]);
        let n = gauss(&[0.1, 0.1]);
        assert_eq!(phase_classify(&[0.0, 0.0], &f, &n).unwrap(), vec![Phase::Phase3; 2]);
        assert_eq!(phase_classify(&[1.0, 1.0], &f, &n).unwrap(), vec![Phase::Phase1; 2]);
        // Y = g/(√2σ) with σ = 1/√2 gives Y = g.
        let unit = gauss(&[std::f64::consts::FRAC_1_SQRT_2; 2]);
        let id = quad(&[1.0, 1.0]);
        assert_eq!(phase_classify(&[1.2, 0.5], &id, &unit).unwrap(), vec![Phase::Phase2, Phase::Phase3]);
        assert_eq!(Phase::from_snr(1.5), Phase::Phase1);
        assert_eq!(Phase::from_snr(-1.0), Phase::Phase3);
    }

    #[test]
    fn iota_example() {
        assert!((iota(10.0, 1.0) - 0.999_954_6).abs() < 1e-7);
    }

    #[test]
    fn rmsprop_targets_differ_by_squared_gradient() {
        let cfg = OptimizerConfig::new(Family::Rmsprop, 1e-2).with_betas(0.9, 0.99);
        let ours = RmspropSde::new(quad(&[10.0, 2.0]), gauss(&[0.1, 0.1]), &cfg, Baseline::Ours).unwrap();
        let mal = RmspropSde::new(quad(&[10.0, 2.0]), gauss(&[0.1, 0.1]), &cfg, Baseline::Malladi).unwrap();
        let s = [0.3, -0.2, 0.5, 0.05];
        let (a, b) = (ours.drift(0.0, &s), mal.drift(0.0, &s));
        let rho = (1.0 - 0.99) / 1e-2;
        assert!((a[2] - b[2] - rho * 9.0).abs() < 1e-12);
        assert!((a[3] - b[3] - rho * 0.16).abs() < 1e-12);
    }

    #[test]
    fn adam_baselines_coincide_when_m_equals_gradient() {
        let cfg = OptimizerConfig::new(Family::AdamW, 1e-3).with_theta(0.5);
        let f = quad(&[10.0, 2.0]);
        let ours = AdamSde::new(f.clone(), gauss(&[0.01, 0.01]), &cfg, Baseline::Ours, 1e-3).unwrap();
        let mal = AdamSde::new(f, gauss(&[0.01, 0.01]), &cfg, Baseline::Malladi, 1e-3).unwrap();
        let s = [0.1, -0.3, 1.0, -0.6, 0.4, 0.2];
        let (a, b) = (ours.drift(0.7, &s), mal.drift(0.7, &s));
        assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
    }

    #[test]
    fn adam_at_time_zero_is_finite() {
        let cfg = OptimizerConfig::new(Family::Adam, 1e-3);
        let sde = AdamSde::new(quad(&[1.0]), gauss(&[0.1]), &cfg, Baseline::Ours, 1e-3).unwrap();
        let s0 = sde.initial_state(&[1.0]);
        assert!(sde.drift(0.0, &s0).iter().all(|b| b.is_finite()));
    }
}

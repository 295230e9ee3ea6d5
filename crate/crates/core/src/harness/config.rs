//! Experiment description read from a TOML file.
//!
//! ```toml
//! [experiment]
//! id = "fig2"            # output file prefix
//! runs = 500
//! steps = 3000
//! seed = 1
//! x0 = [1.0, 1.0]
//! record_every = 1
//! oracles = ["quad-loss-curve"]
//!
//! [landscape]
//! kind = "quadratic"     # quadratic | saddle | power-law
//! lambdas = [1.0, 2.0]
//!
//! [noise]
//! kind = "gaussian"      # gaussian | student-t | frozen-hessian | loss-isotropic | loss-hessian | regression
//! sigma = 0.1            # scalar or per-coordinate list
//!
//! [optimizer]
//! family = "signsgd"
//! eta = 1e-3
//!
//! [sde]
//! variant = "erf"        # full | erf | phase1-ode | phase3 | student
//! baseline = "ours"      # ours | malladi
//!
//! [scaling]
//! rule = "ours"          # ours | malladi | linear-sgd
//! delta = 4
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::ensemble::{Engine, EnsembleSpec};
use crate::error::{LabError, Result};
use crate::landscapes::{EmbeddedSaddle, Landscape, PowerLawQuadratic, QuadraticDiag};
use crate::noise::{GaussianDiagNoise, NoiseModel, StateKind, StateScaledNoise, StudentTNoise};
use crate::optimizers::{apply_scaling, Family, OptimizerConfig, ScalingKind, ScalingRule};
use crate::sde::{AdamSde, Baseline, RmspropSde, SdeSystem, SgdSde, SignSgdSde, SignVariant};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: ExperimentSection,
    landscape: LandscapeSection,
    noise: NoiseSection,
    optimizer: Option<OptimizerSection>,
    sde: Option<SdeSection>,
    scaling: Option<ScalingSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    #[serde(default = "default_id")]
    id: String,
    #[serde(default = "default_runs", deserialize_with = "count")]
    runs: usize,
    #[serde(deserialize_with = "count")]
    steps: usize,
    #[serde(default)]
    seed: u64,
    x0: Vec<f64>,
    #[serde(default = "one", deserialize_with = "count")]
    record_every: usize,
    #[serde(default = "default_observables")]
    observables: Vec<String>,
    #[serde(default)]
    oracles: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Number {
    Int(u64),
    Float(f64),
}

/// Counts may be written in scientific notation (`steps = 1e5`).
fn count<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<usize, D::Error> {
    match Number::deserialize(de)? {
        Number::Int(n) => Ok(n as usize),
        Number::Float(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e15 => Ok(x as usize),
        Number::Float(x) => Err(serde::de::Error::custom(format!("expected a non-negative integer, got {x}"))),
    }
}

fn opt_count<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Option<usize>, D::Error> {
    count(de).map(Some)
}

fn default_id() -> String {
    "experiment".into()
}
fn default_runs() -> usize {
    500
}
fn one() -> usize {
    1
}
fn default_observables() -> Vec<String> {
    vec!["loss".into(), "mean".into(), "cov".into()]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandscapeSection {
    kind: String,
    lambdas: Option<Vec<f64>>,
    quartic: Option<f64>,
    cubic: Option<f64>,
    #[serde(default, deserialize_with = "opt_count")]
    v: Option<usize>,
    #[serde(default, deserialize_with = "opt_count")]
    d: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(untagged)]
enum Sigma {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    kind: String,
    sigma: Sigma,
    nu: Option<u32>,
    #[serde(default = "one_f")]
    batch: f64,
    anchor_loss: Option<f64>,
}

fn one_f() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSection {
    family: String,
    eta: f64,
    beta1: Option<f64>,
    beta2: Option<f64>,
    theta: Option<f64>,
    epsilon: Option<f64>,
    l2: Option<f64>,
    scheduler_exponent: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SdeSection {
    family: Option<String>,
    variant: Option<String>,
    baseline: Option<String>,
    dt: Option<f64>,
    #[serde(default, deserialize_with = "opt_count")]
    steps: Option<usize>,
    kappa: Option<f64>,
    eta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingSection {
    rule: String,
    delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeSpec {
    pub family: Family,
    pub variant: SignVariant,
    pub baseline: Baseline,
    pub dt: f64,
    pub steps: usize,
    pub kappa: f64,
    /// `η` entering the diffusion amplitude.
    pub eta: f64,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: String,
    pub runs: usize,
    pub steps: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub record_every: usize,
    pub observables: Vec<String>,
    pub oracles: Vec<String>,
    pub landscape: Landscape,
    pub noise: NoiseModel,
    pub optimizer: Option<OptimizerConfig>,
    pub sde: Option<SdeSpec>,
    pub scaling: Option<ScalingRule>,
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| LabError::Config(format!("missing key {what}")))
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| LabError::Config(e.message().to_string()))?;
        let e = cfg.experiment;
        let (landscape, x0) = build_landscape(&cfg.landscape, e.x0)?;
        let noise = build_noise(&cfg.noise, &landscape)?;
        let optimizer = match cfg.optimizer {
            Some(o) => {
                let mut c = OptimizerConfig::new(Family::parse(&o.family)?, o.eta);
                c.beta1 = o.beta1.unwrap_or(c.beta1);
                c.beta2 = o.beta2.unwrap_or(c.beta2);
                c.theta = o.theta.unwrap_or(0.0);
                c.epsilon = o.epsilon.unwrap_or(c.epsilon);
                c.l2 = o.l2.unwrap_or(0.0);
                c.scheduler = o.scheduler_exponent;
                c.validate()?;
                Some(c)
            }
            None => None,
        };
        let sde = match cfg.sde {
            Some(s) => {
                let family = match (&s.family, &optimizer) {
                    (Some(f), _) => Family::parse(f)?,
                    (None, Some(o)) => o.family,
                    (None, None) => return Err(LabError::Config("missing key sde.family".into())),
                };
                if let Some(o) = &optimizer {
                    if o.family != family {
                        return Err(LabError::Config(format!(
                            "sde.family '{}' does not match optimizer.family '{}'",
                            family.name(),
                            o.family.name()
                        )));
                    }
                }
                let eta = match (s.eta, &optimizer) {
                    (Some(v), _) => v,
                    (None, Some(o)) => o.eta,
                    (None, None) => return Err(LabError::Config("missing key sde.eta".into())),
                };
                if family.adaptive() && optimizer.is_none() {
                    return Err(LabError::Config(format!(
                        "sde.family '{}' reads its hyperparameters from [optimizer]",
                        family.name()
                    )));
                }
                let default_variant = if matches!(noise, NoiseModel::StudentT(_)) { "student" } else { "erf" };
                Some(SdeSpec {
                    family,
                    variant: SignVariant::parse(s.variant.as_deref().unwrap_or(default_variant))?,
                    baseline: Baseline::parse(s.baseline.as_deref().unwrap_or("ours"))?,
                    dt: s.dt.unwrap_or(eta),
                    steps: s.steps.unwrap_or(e.steps),
                    kappa: s.kappa.unwrap_or(1.0),
                    eta,
                })
            }
            None => None,
        };
        if optimizer.is_none() && sde.is_none() {
            return Err(LabError::Config("need at least one of [optimizer] and [sde]".into()));
        }
        let scaling = match cfg.scaling {
            Some(s) => Some(ScalingRule { rule: ScalingKind::parse(&s.rule)?, delta: s.delta }),
            None => None,
        };
        if e.runs == 0 || e.record_every == 0 {
            return Err(LabError::Config("experiment.runs and experiment.record_every must be >= 1".into()));
        }
        Ok(Self {
            id: e.id,
            runs: e.runs,
            steps: e.steps,
            seed: e.seed,
            x0,
            record_every: e.record_every,
            observables: e.observables,
            oracles: e.oracles,
            landscape,
            noise,
            optimizer,
            sde,
            scaling,
        })
    }

    pub fn d(&self) -> usize {
        self.landscape.dim()
    }

    pub fn wants(&self, observable: &str) -> bool {
        self.observables.iter().any(|o| o == observable)
    }

    pub fn discrete_engine(&self) -> Result<Engine> {
        let cfg = self
            .optimizer
            .clone()
            .ok_or_else(|| LabError::Config("this command needs an [optimizer] section".into()))?;
        Engine::discrete(self.landscape.clone(), self.noise.clone(), cfg)
    }

    pub fn sde_engine(&self) -> Result<Engine> {
        let s = self.sde.as_ref().ok_or_else(|| LabError::Config("this command needs an [sde] section".into()))?;
        self.sde_engine_with(s.baseline)
    }

    pub fn sde_engine_with(&self, baseline: Baseline) -> Result<Engine> {
        let s = self.sde.as_ref().ok_or_else(|| LabError::Config("this command needs an [sde] section".into()))?;
        let sys = build_sde(&self.landscape, &self.noise, s, baseline, self.optimizer.as_ref())?;
        Engine::sde(self.landscape.clone(), sys, s.dt)
    }

    /// Ensemble settings for `engine` (the SDE may override the step count).
    pub fn ensemble(&self, engine: &Engine, id: impl Into<String>) -> EnsembleSpec {
        let steps = match (engine, &self.sde) {
            (Engine::Sde { .. }, Some(s)) => s.steps,
            _ => self.steps,
        };
        let mut spec = EnsembleSpec::new(id, self.runs, steps, self.seed, self.x0.clone()).record_every(self.record_every);
        if self.wants("phases") {
            spec = spec.with_phases(self.noise.clone());
        }
        spec
    }

    /// The experiment after applying `rule`: rescaled hyperparameters, noise
    /// covariance divided by the batch factor and the step count adjusted to
    /// keep the time horizon `steps·η`.
    pub fn rescaled(&self, rule: ScalingRule) -> Result<Self> {
        let cfg = self
            .optimizer
            .as_ref()
            .ok_or_else(|| LabError::Config("scaling needs an [optimizer] section".into()))?;
        if rule.rule == ScalingKind::LinearSgd && cfg.family != Family::Sgd {
            return Err(LabError::Config("the linear rule applies to sgd only".into()));
        }
        let scaled = apply_scaling(cfg, rule)?;
        let ratio = cfg.eta / scaled.config.eta;
        let mut out = self.clone();
        out.noise = self.noise.scaled_by_batch(scaled.batch_factor)?;
        out.steps = (self.steps as f64 * ratio).round() as usize;
        out.record_every = ((self.record_every as f64 * ratio).round() as usize).max(1);
        if let Some(s) = &mut out.sde {
            s.eta = scaled.config.eta;
            s.dt *= scaled.config.eta / cfg.eta;
            s.steps = (s.steps as f64 * ratio).round() as usize;
        }
        out.optimizer = Some(scaled.config);
        Ok(out)
    }

    /// Per-coordinate Gaussian standard deviations, as the closed forms need them.
    pub fn gaussian_sigmas(&self) -> Result<Vec<f64>> {
        match &self.noise {
            NoiseModel::Gaussian(g) => Ok(g.sigmas.clone()),
            _ => Err(LabError::Unsupported("this oracle needs Gaussian noise".into())),
        }
    }
}

fn build_landscape(l: &LandscapeSection, x0: Vec<f64>) -> Result<(Landscape, Vec<f64>)> {
    let land = match l.kind.as_str() {
        "quadratic" => Landscape::Quadratic(QuadraticDiag::new(need(l.lambdas.clone(), "landscape.lambdas")?)?),
        "saddle" => Landscape::Saddle(EmbeddedSaddle::new(
            need(l.lambdas.clone(), "landscape.lambdas")?,
            need(l.quartic, "landscape.quartic")?,
            l.cubic.unwrap_or(0.0),
        )?),
        "power-law" => {
            // Runs in residual coordinates φ = Wθ − b; x0 may be given as θ₀ (length d) or φ₀ (length v).
            let p = PowerLawQuadratic::random(
                need(l.v, "landscape.v")?,
                need(l.d, "landscape.d")?,
                need(l.alpha, "landscape.alpha")?,
                l.seed.unwrap_or(0),
            )?;
            let phi0 = if x0.len() == p.d && p.d != p.v { p.phi(&x0) } else { x0 };
            return check_x0(Landscape::Quadratic(p.phi_landscape()), phi0);
        }
        other => return Err(LabError::Config(format!("unknown landscape kind '{other}'"))),
    };
    check_x0(land, x0)
}

fn check_x0(land: Landscape, x0: Vec<f64>) -> Result<(Landscape, Vec<f64>)> {
    if x0.len() != land.dim() {
        return Err(LabError::Dimension { expected: land.dim(), got: x0.len() });
    }
    Ok((land, x0))
}

fn build_noise(n: &NoiseSection, land: &Landscape) -> Result<NoiseModel> {
    let d = land.dim();
    let per_coord = || -> Result<Vec<f64>> {
        let v = match &n.sigma {
            Sigma::Scalar(s) => vec![*s; d],
            Sigma::List(v) => v.clone(),
        };
        if v.len() != d {
            return Err(LabError::Dimension { expected: d, got: v.len() });
        }
        let b = n.batch.sqrt();
        Ok(v.into_iter().map(|s| s / b).collect())
    };
    let scalar = || match n.sigma {
        Sigma::Scalar(s) => Ok(s),
        Sigma::List(_) => Err(LabError::Config(format!("noise.sigma must be a scalar for kind '{}'", n.kind))),
    };
    if !(n.batch > 0.0) {
        return Err(LabError::Config("noise.batch must be > 0".into()));
    }
    Ok(match n.kind.as_str() {
        "gaussian" => NoiseModel::Gaussian(GaussianDiagNoise::new(per_coord()?)?),
        "student-t" => NoiseModel::StudentT(StudentTNoise::new(need(n.nu, "noise.nu")?, per_coord()?)?),
        kind => {
            let kind = StateKind::parse(kind)?;
            let (sigma, batch) = if kind == StateKind::Regression {
                (scalar()?, n.batch)
            } else {
                (scalar()? / n.batch.sqrt(), 1.0)
            };
            let mut s = StateScaledNoise::new(kind, sigma, batch)?;
            if kind == StateKind::FrozenHessian {
                let xs = land
                    .minimizer()
                    .ok_or_else(|| LabError::Unsupported("frozen-hessian noise needs a minimiser".into()))?;
                let f0 = n.anchor_loss.unwrap_or_else(|| land.value(&xs));
                s = s.with_anchor(f0, land.hessian_diag(&xs))?;
            }
            NoiseModel::StateScaled(s)
        }
    })
}

/// Construct the SDE for `spec.family` with the given baseline.
pub fn build_sde(
    landscape: &Landscape,
    noise: &NoiseModel,
    spec: &SdeSpec,
    baseline: Baseline,
    optimizer: Option<&OptimizerConfig>,
) -> Result<Arc<dyn SdeSystem>> {
    let adaptive_cfg = || -> Result<OptimizerConfig> {
        let mut c = optimizer
            .cloned()
            .ok_or_else(|| LabError::Config("adaptive SDEs need [optimizer] hyperparameters".into()))?;
        c.eta = spec.eta;
        Ok(c)
    };
    Ok(match spec.family {
        Family::SignSgd => Arc::new(SignSgdSde::new(landscape.clone(), noise.clone(), spec.variant, spec.eta)?),
        Family::Sgd => Arc::new(SgdSde::new(landscape.clone(), noise.clone(), spec.kappa, spec.eta)?),
        Family::Rmsprop | Family::RmspropW => {
            Arc::new(RmspropSde::new(landscape.clone(), noise.clone(), &adaptive_cfg()?, baseline)?)
        }
        Family::Adam | Family::AdamW => {
            Arc::new(AdamSde::new(landscape.clone(), noise.clone(), &adaptive_cfg()?, baseline, spec.dt)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"
[experiment]
id = "fig2"
runs = 8
steps = 10
x0 = [1.0, 1.0]

[landscape]
kind = "quadratic"
lambdas = [1.0, 2.0]

[noise]
kind = "gaussian"
sigma = 1e-1

[optimizer]
family = "signsgd"
eta = 1e-3

[sde]
variant = "erf"
"#;

    #[test]
    fn parses_and_defaults() {
        let s = ExperimentSpec::from_toml_str(FIG2).unwrap();
        assert_eq!(s.gaussian_sigmas().unwrap(), vec![0.1, 0.1]);
        let sde = s.sde.as_ref().unwrap();
        assert_eq!(sde.dt, 1e-3);
        assert_eq!(sde.family, Family::SignSgd);
        assert_eq!(sde.steps, 10);
        assert!(s.wants("mean") && !s.wants("phases"));
    }

    #[test]
    fn unknown_keys_and_family_mismatch_rejected() {
        let bad = FIG2.replace("variant = \"erf\"", "variant = \"erf\"\nfoo = 1");
        assert!(ExperimentSpec::from_toml_str(&bad).is_err());
        let mismatch = FIG2.replace("variant = \"erf\"", "family = \"sgd\"");
        let err = ExperimentSpec::from_toml_str(&mismatch).unwrap_err();
        assert!(err.to_string().contains("does not match"));
    }

    #[test]
    fn counts_accept_scientific_notation() {
        let s = ExperimentSpec::from_toml_str(&FIG2.replace("steps = 10", "steps = 1e1")).unwrap();
        assert_eq!(s.steps, 10);
        assert!(ExperimentSpec::from_toml_str(&FIG2.replace("steps = 10", "steps = 1.5")).is_err());
    }

    #[test]
    fn rescaling_keeps_horizon() {
        let text = FIG2.replace("family = \"signsgd\"", "family = \"adamw\"\ntheta = 1.0\nbeta1 = 0.9\nbeta2 = 0.99")
            .replace("steps = 10", "steps = 1000");
        let s = ExperimentSpec::from_toml_str(&text).unwrap();
        let r = s.rescaled(ScalingRule { rule: ScalingKind::Ours, delta: 4.0 }).unwrap();
        let c = r.optimizer.as_ref().unwrap();
        assert!((c.eta - 2e-3).abs() < 1e-18);
        assert!((c.theta - 2.0).abs() < 1e-15);
        assert_eq!(r.steps, 500);
        assert!((r.gaussian_sigmas().unwrap()[0] - 0.05).abs() < 1e-15);
    }
}

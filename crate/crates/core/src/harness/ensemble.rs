use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::seed::{trajectory_rng, STREAM_DISCRETE, STREAM_SDE};
use super::stats::{tree_merge, EngineKind, EnsembleStats, Moments};
use crate::error::{LabError, Result};
use crate::landscapes::Landscape;
use crate::noise::NoiseModel;
use crate::optimizers::{self, OptimizerConfig, OptimizerState, StepStatus};
use crate::sde::{phase_classify, EmStepper, SdeSystem, DIVERGENCE_NORM};

/// Paths per work unit. Fixed so the merge tree never depends on the thread count.
pub const CHUNK: usize = 32;

/// What advances a trajectory by one step.
#[derive(Clone)]
pub enum Engine {
    Discrete { landscape: Landscape, noise: NoiseModel, config: OptimizerConfig },
    Sde { landscape: Landscape, system: Arc<dyn SdeSystem>, dt: f64 },
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Engine::Discrete { config, .. } => write!(f, "Engine::Discrete({})", config.family.name()),
            Engine::Sde { dt, .. } => write!(f, "Engine::Sde(dt = {dt})"),
        }
    }
}

impl Engine {
    pub fn discrete(landscape: Landscape, noise: NoiseModel, config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        if let Some(d) = noise.dim() {
            if d != landscape.dim() {
                return Err(LabError::Dimension { expected: landscape.dim(), got: d });
            }
        }
        Ok(Engine::Discrete { landscape, noise, config })
    }

    pub fn sde(landscape: Landscape, system: Arc<dyn SdeSystem>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(LabError::Config("dt must be > 0".into()));
        }
        if system.layout().d != landscape.dim() {
            return Err(LabError::Dimension { expected: landscape.dim(), got: system.layout().d });
        }
        Ok(Engine::Sde { landscape, system, dt })
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            Engine::Discrete { .. } => EngineKind::Discrete,
            Engine::Sde { .. } => EngineKind::Sde,
        }
    }

    /// Continuous time covered by one step: `η` for the optimizer, `Δt` for the SDE.
    pub fn time_step(&self) -> f64 {
        match self {
            Engine::Discrete { config, .. } => config.eta,
            Engine::Sde { dt, .. } => *dt,
        }
    }

    pub fn landscape(&self) -> &Landscape {
        match self {
            Engine::Discrete { landscape, .. } | Engine::Sde { landscape, .. } => landscape,
        }
    }

    fn stream(&self) -> u64 {
        match self {
            Engine::Discrete { .. } => STREAM_DISCRETE,
            Engine::Sde { .. } => STREAM_SDE,
        }
    }

    fn start(&self, x0: &[f64]) -> Path {
        match self {
            Engine::Discrete { .. } => Path::Discrete {
                state: OptimizerState::new(x0),
                grad: vec![0.0; x0.len()],
                z: vec![0.0; x0.len()],
            },
            Engine::Sde { system, .. } => {
                Path::Sde { state: system.initial_state(x0), stepper: EmStepper::new(system.layout().len()) }
            }
        }
    }
}

enum Path {
    Discrete { state: OptimizerState, grad: Vec<f64>, z: Vec<f64> },
    Sde { state: Vec<f64>, stepper: EmStepper },
}

impl Path {
    fn x(&self, d: usize) -> &[f64] {
        match self {
            Path::Discrete { state, .. } => &state.x,
            Path::Sde { state, .. } => &state[..d],
        }
    }

    fn floor_events(&self) -> usize {
        match self {
            Path::Discrete { .. } => 0,
            Path::Sde { stepper, .. } => stepper.floor_events,
        }
    }

    fn step(&mut self, engine: &Engine, k: u64, rng: &mut ChaCha8Rng) -> StepStatus {
        match (self, engine) {
            (Path::Discrete { state, grad, z }, Engine::Discrete { landscape, noise, config }) => {
                landscape.grad_into(&state.x, grad);
                if noise.sample(landscape, &state.x, rng, z).is_err() {
                    return StepStatus::Diverged;
                }
                for (g, zi) in grad.iter_mut().zip(z.iter()) {
                    *g += zi;
                }
                let status = optimizers::step(config, state, grad, config.schedule(k));
                let n2: f64 = state.x.iter().map(|v| v * v).sum();
                if status == StepStatus::Diverged || !(n2 <= DIVERGENCE_NORM * DIVERGENCE_NORM) {
                    StepStatus::Diverged
                } else {
                    StepStatus::Ok
                }
            }
            (Path::Sde { state, stepper }, Engine::Sde { system, dt, .. }) => {
                stepper.step(system.as_ref(), k as f64 * dt, state, *dt, rng)
            }
            _ => unreachable!("path and engine kinds always match"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub experiment_id: String,
    pub runs: usize,
    pub steps: usize,
    pub seed: u64,
    /// Initial point shared by every trajectory.
    pub x0: Vec<f64>,
    /// Record statistics every this many steps (the final step is always recorded).
    pub record_every: usize,
    /// Keep each trajectory's loss at every record (needed for bootstrap tests).
    pub keep_paths: bool,
    /// Noise model used to label phases; `None` disables the histogram.
    pub phases: Option<NoiseModel>,
}

impl EnsembleSpec {
    pub fn new(experiment_id: impl Into<String>, runs: usize, steps: usize, seed: u64, x0: Vec<f64>) -> Self {
        Self {
            experiment_id: experiment_id.into(),
            runs,
            steps,
            seed,
            x0,
            record_every: 1,
            keep_paths: false,
            phases: None,
        }
    }

    pub fn record_every(mut self, r: usize) -> Self {
        self.record_every = r;
        self
    }

    pub fn keep_paths(mut self) -> Self {
        self.keep_paths = true;
        self
    }

    pub fn with_phases(mut self, noise: NoiseModel) -> Self {
        self.phases = Some(noise);
        self
    }

    /// Step indices at which statistics are recorded.
    pub fn record_steps(&self) -> Vec<u64> {
        let r = self.record_every.max(1);
        let mut v: Vec<u64> = (0..=self.steps).step_by(r).map(|s| s as u64).collect();
        if self.steps % r != 0 {
            v.push(self.steps as u64);
        }
        v
    }
}

/// Output of [`run_ensemble`]: the persisted statistics plus in-memory extras.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub stats: EnsembleStats,
    /// `phase_counts[k][i]` counts alive paths of coordinate `i` in phases 1, 2, 3 at record `k`.
    pub phase_counts: Option<Vec<Vec<[u64; 3]>>>,
    /// `path_losses[p][k]`; `NaN` after the path diverged.
    pub path_losses: Option<Vec<Vec<f64>>>,
    pub floor_events: usize,
    pub first_divergence: Option<u64>,
}

#[derive(Clone)]
struct Partial {
    loss: Vec<Moments>,
    x: Vec<Moments>,
    phases: Vec<[u64; 3]>,
    paths: Vec<Vec<f64>>,
    floor_events: usize,
    first_divergence: Option<u64>,
}

impl Partial {
    fn merge(a: &Partial, b: &Partial) -> Partial {
        let zip = |p: &[Moments], q: &[Moments]| p.iter().zip(q).map(|(u, v)| u.merge(v)).collect();
        Partial {
            loss: zip(&a.loss, &b.loss),
            x: zip(&a.x, &b.x),
            phases: a
                .phases
                .iter()
                .zip(&b.phases)
                .map(|(u, v)| [u[0] + v[0], u[1] + v[1], u[2] + v[2]])
                .collect(),
            paths: a.paths.iter().chain(&b.paths).cloned().collect(),
            floor_events: a.floor_events + b.floor_events,
            first_divergence: match (a.first_divergence, b.first_divergence) {
                (Some(u), Some(v)) => Some(u.min(v)),
                (u, v) => u.or(v),
            },
        }
    }
}

fn run_chunk(engine: &Engine, spec: &EnsembleSpec, n_rec: usize, range: std::ops::Range<usize>) -> Partial {
    let d = spec.x0.len();
    let landscape = engine.landscape();
    let r = spec.record_every.max(1);
    let mut part = Partial {
        loss: vec![Moments::default(); n_rec],
        x: vec![Moments::default(); n_rec * d],
        phases: if spec.phases.is_some() { vec![[0; 3]; n_rec * d] } else { Vec::new() },
        paths: Vec::new(),
        floor_events: 0,
        first_divergence: None,
    };
    for p in range {
        let mut rng = trajectory_rng(spec.seed, p as u64, engine.stream());
        let mut path = engine.start(&spec.x0);
        let mut losses = if spec.keep_paths { vec![f64::NAN; n_rec] } else { Vec::new() };
        let mut record = |rec: usize, x: &[f64], part: &mut Partial| {
            let f = landscape.value(x);
            part.loss[rec].push(f);
            for (i, xi) in x.iter().enumerate() {
                part.x[rec * d + i].push(*xi);
            }
            if let Some(noise) = &spec.phases {
                if let Ok(labels) = phase_classify(x, landscape, noise) {
                    for (i, l) in labels.iter().enumerate() {
                        part.phases[rec * d + i][*l as usize - 1] += 1;
                    }
                }
            }
            if spec.keep_paths {
                losses[rec] = f;
            }
        };
        record(0, path.x(d), &mut part);
        for k in 0..spec.steps {
            if path.step(engine, k as u64, &mut rng) == StepStatus::Diverged {
                let s = k as u64 + 1;
                part.first_divergence = Some(part.first_divergence.map_or(s, |v| v.min(s)));
                break;
            }
            let s = k + 1;
            if s % r == 0 {
                record(s / r, path.x(d), &mut part);
            } else if s == spec.steps {
                record(n_rec - 1, path.x(d), &mut part);
            }
        }
        part.floor_events += path.floor_events();
        if spec.keep_paths {
            part.paths.push(losses);
        }
    }
    part
}

/// Run `spec.runs` independent trajectories and aggregate them deterministically.
///
/// Trajectory `p` draws from `ChaCha8Rng::seed_from_u64(mix(seed, p, stream))`.
/// Paths are processed in fixed chunks of [`CHUNK`] (in parallel with the
/// `parallel` feature) and the chunk summaries are combined by a balanced
/// merge tree over chunk order, so the output is bit-identical for any thread count.
pub fn run_ensemble(engine: &Engine, spec: &EnsembleSpec) -> Result<Ensemble> {
    let d = engine.landscape().dim();
    if spec.x0.len() != d {
        return Err(LabError::Dimension { expected: d, got: spec.x0.len() });
    }
    if spec.runs == 0 {
        return Err(LabError::Config("runs must be >= 1".into()));
    }
    if spec.record_every == 0 {
        return Err(LabError::Config("record_every must be >= 1".into()));
    }
    if let Some(noise) = &spec.phases {
        if !noise.is_gaussian() {
            return Err(LabError::InfiniteVariance("phase labels need Gaussian noise".into()));
        }
    }
    let rec_steps = spec.record_steps();
    let n_rec = rec_steps.len();
    let n_chunks = spec.runs.div_ceil(CHUNK);
    let chunk = |c: usize| run_chunk(engine, spec, n_rec, c * CHUNK..((c + 1) * CHUNK).min(spec.runs));

    #[cfg(feature = "parallel")]
    let parts: Vec<Partial> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Partial> = (0..n_chunks).map(chunk).collect();

    let total = tree_merge(&parts, &Partial::merge).expect("at least one chunk");
    if total.loss.last().map_or(0, |m| m.n) == 0 {
        return Err(LabError::AllDiverged { first_step: total.first_divergence.unwrap_or(0) as usize });
    }
    let dt = engine.time_step();
    let stats = EnsembleStats {
        experiment_id: spec.experiment_id.clone(),
        engine: engine.kind(),
        d,
        times: rec_steps.iter().map(|&s| s as f64 * dt).collect(),
        loss_mean: total.loss.iter().map(Moments::mean_or_nan).collect(),
        loss_std: total.loss.iter().map(|m| m.variance().sqrt()).collect(),
        n_alive: total.loss.iter().map(|m| m.n).collect(),
        mean: (0..n_rec).map(|k| (0..d).map(|i| total.x[k * d + i].mean_or_nan()).collect()).collect(),
        cov: (0..n_rec).map(|k| (0..d).map(|i| total.x[k * d + i].variance()).collect()).collect(),
        steps: rec_steps,
    };
    let phase_counts = spec
        .phases
        .as_ref()
        .map(|_| (0..n_rec).map(|k| total.phases[k * d..(k + 1) * d].to_vec()).collect());
    if total.floor_events > 0 {
        log::info!("{}: V block floored {} times", spec.experiment_id, total.floor_events);
    }
    Ok(Ensemble {
        stats,
        phase_counts,
        path_losses: spec.keep_paths.then_some(total.paths),
        floor_events: total.floor_events,
        first_divergence: total.first_divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscapes::QuadraticDiag;
    use crate::noise::GaussianDiagNoise;
    use crate::optimizers::Family;

    fn quad(l: &[f64]) -> Landscape {
        Landscape::Quadratic(QuadraticDiag::new(l.to_vec()).unwrap())
    }

    #[test]
    fn deterministic_sgd_geometric_decay() {
        // Loss-isotropic noise with sigma = 0 injects exactly zero noise.
        let noise = NoiseModel::StateScaled(
            crate::noise::StateScaledNoise::new(crate::noise::StateKind::LossIsotropic, 0.0, 1.0).unwrap(),
        );
        let e = Engine::discrete(quad(&[1.0]), noise, OptimizerConfig::new(Family::Sgd, 0.1)).unwrap();
        let out = run_ensemble(&e, &EnsembleSpec::new("geo", 1, 10, 3, vec![2.0])).unwrap();
        for (k, l) in out.stats.loss_mean.iter().enumerate() {
            let expect = 0.5 * 0.81f64.powi(k as i32) * 4.0;
            assert!((l - expect).abs() <= 1e-13 * expect, "k = {k}");
        }
        assert!(out.stats.loss_std.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn record_steps_include_final() {
        let s = EnsembleSpec::new("r", 1, 10, 0, vec![0.0]).record_every(4);
        assert_eq!(s.record_steps(), vec![0, 4, 8, 10]);
    }

    #[test]
    fn all_diverged_is_an_error() {
        let noise = NoiseModel::Gaussian(GaussianDiagNoise::new(vec![1.0]).unwrap());
        let e = Engine::discrete(quad(&[1.0]), noise, OptimizerConfig::new(Family::Sgd, 3.0)).unwrap();
        let err = run_ensemble(&e, &EnsembleSpec::new("boom", 4, 2000, 0, vec![1.0])).unwrap_err();
        assert!(matches!(err, LabError::AllDiverged { first_step } if first_step > 0));
    }
}

//! Runners behind the command-line subcommands. Each returns the files it
//! wrote and a few human-readable summary lines.

use std::path::{Path, PathBuf};

use super::config::ExperimentSpec;
use super::csv_io::{fmt_f64, write_stats_file, write_weak_file};
use super::ensemble::{run_ensemble, Engine, Ensemble};
use super::stats::{EngineKind, EnsembleStats};
use super::weak::{weak_error, Observable, WeakErrorReport};
use crate::analytics::{
    adaptive_asymptotic_loss, adaptive_stationary, scheduler_verdict, sgd_loss_bound, sgd_stationary,
    signsgd_loss_bound, signsgd_quad_loss_curve, signsgd_stationary, AdaptiveBoundInputs, AdaptiveFamily,
    StationaryMoments,
};
use crate::error::{LabError, Result};
use crate::optimizers::{Family, OptimizerConfig, ScalingRule};
use crate::sde::Baseline;

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl Outcome {
    fn file(&mut self, p: PathBuf) {
        self.files.push(p);
    }
    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }
}

fn out_path(out: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    Ok(out.join(format!("{name}.csv")))
}

fn family_of(spec: &ExperimentSpec) -> Family {
    spec.optimizer.as_ref().map(|o| o.family).or(spec.sde.as_ref().map(|s| s.family)).unwrap()
}

fn eta_of(spec: &ExperimentSpec) -> f64 {
    spec.optimizer.as_ref().map(|o| o.eta).or(spec.sde.as_ref().map(|s| s.eta)).unwrap()
}

fn adaptive_family(cfg: &OptimizerConfig) -> Option<AdaptiveFamily> {
    Some(match cfg.family {
        Family::Rmsprop => AdaptiveFamily::Rmsprop,
        Family::RmspropW => AdaptiveFamily::RmspropW,
        Family::Adam if cfg.l2 > 0.0 => AdaptiveFamily::AdamL2,
        Family::Adam => AdaptiveFamily::Adam,
        Family::AdamW => AdaptiveFamily::AdamW,
        _ => return None,
    })
}

/// Stationary law predicted for the configured family on a diagonal quadratic with Gaussian noise.
pub fn predicted_moments(spec: &ExperimentSpec) -> Result<StationaryMoments> {
    let lambdas = spec.landscape.as_quadratic()?.lambdas.clone();
    let sigmas = spec.gaussian_sigmas()?;
    let eta = eta_of(spec);
    match family_of(spec) {
        Family::SignSgd => signsgd_stationary(&lambdas, &sigmas, eta, &spec.x0),
        Family::Sgd => sgd_stationary(&lambdas, &sigmas, eta, &spec.x0),
        _ => {
            let cfg = spec.optimizer.as_ref().ok_or_else(|| LabError::Config("missing [optimizer]".into()))?;
            adaptive_stationary(adaptive_family(cfg).unwrap(), &lambdas, &sigmas, eta, cfg.theta, &spec.x0)
        }
    }
}

/// Asymptotic loss envelope for the configured family.
pub fn asymptotic_envelope(spec: &ExperimentSpec) -> Result<f64> {
    let c = spec.landscape.constants();
    let (mu, l, l_tau) = (c.require_mu()?, c.require_smoothness()?, c.require_trace()?);
    let sigma = spec.gaussian_sigmas()?.into_iter().fold(0.0, f64::max);
    let eta = eta_of(spec);
    let s0 = spec.landscape.value(&spec.x0);
    match family_of(spec) {
        Family::SignSgd => Ok(signsgd_loss_bound(3, mu, l_tau, sigma, eta, s0, spec.d())?.limit()),
        Family::Sgd => Ok(sgd_loss_bound(mu, l_tau, sigma, eta, s0, 1.0, 1.0, 1.0)?.limit()),
        _ => {
            let cfg = spec.optimizer.as_ref().ok_or_else(|| LabError::Config("missing [optimizer]".into()))?;
            let fam = adaptive_family(cfg).unwrap();
            let mut p = AdaptiveBoundInputs::new(mu, l, l_tau, sigma, eta);
            p.theta = if fam == AdaptiveFamily::AdamL2 { cfg.l2 } else { cfg.theta };
            adaptive_asymptotic_loss(fam, &p)
        }
    }
}

/// Closed-form overlays on the time grid of `like`.
pub fn oracle_blocks(spec: &ExperimentSpec, like: &EnsembleStats) -> Result<Vec<EnsembleStats>> {
    let mut blocks = Vec::new();
    for name in &spec.oracles {
        let id = format!("{}_{}", spec.id, name);
        let t = &like.times;
        let block = match name.as_str() {
            "stationary" => {
                let m = predicted_moments(spec)?;
                let lambdas = &spec.landscape.as_quadratic()?.lambdas;
                let mean: Vec<Vec<f64>> = t.iter().map(|&s| m.transient_mean(s)).collect();
                let cov: Vec<Vec<f64>> = t.iter().map(|&s| m.transient_cov(s)).collect();
                let loss = mean
                    .iter()
                    .zip(&cov)
                    .map(|(mu, c)| 0.5 * (0..spec.d()).map(|i| lambdas[i] * (c[i] + mu[i] * mu[i])).sum::<f64>())
                    .collect();
                EnsembleStats::oracle(id, like.steps.clone(), t.clone(), loss, Some(mean), Some(cov), spec.d())
            }
            "quad-loss-curve" => {
                let lambdas = &spec.landscape.as_quadratic()?.lambdas;
                let sigmas = spec.gaussian_sigmas()?;
                let loss = t
                    .iter()
                    .map(|&s| signsgd_quad_loss_curve(lambdas, &sigmas, eta_of(spec), &spec.x0, s))
                    .collect::<Result<_>>()?;
                EnsembleStats::oracle(id, like.steps.clone(), t.clone(), loss, None, None, spec.d())
            }
            "bound" => {
                let curve = loss_bound_curve(spec)?;
                let loss = t.iter().map(|&s| curve(s)).collect();
                EnsembleStats::oracle(id, like.steps.clone(), t.clone(), loss, None, None, spec.d())
            }
            other => return Err(LabError::Config(format!("unknown oracle '{other}'"))),
        };
        blocks.push(block);
    }
    Ok(blocks)
}

fn loss_bound_curve(spec: &ExperimentSpec) -> Result<Box<dyn Fn(f64) -> f64>> {
    let c = spec.landscape.constants();
    let (mu, l_tau) = (c.require_mu()?, c.require_trace()?);
    let sigma = spec.gaussian_sigmas()?.into_iter().fold(0.0, f64::max);
    let s0 = spec.landscape.value(&spec.x0);
    let eta = eta_of(spec);
    Ok(match family_of(spec) {
        Family::SignSgd => {
            let b = signsgd_loss_bound(3, mu, l_tau, sigma, eta, s0, spec.d())?;
            Box::new(move |t| b.value(t))
        }
        Family::Sgd => {
            let b = sgd_loss_bound(mu, l_tau, sigma, eta, s0, 1.0, 1.0, 1.0)?;
            Box::new(move |t| b.value(t))
        }
        _ => {
            let v = asymptotic_envelope(spec)?;
            Box::new(move |_| v)
        }
    })
}

fn run(engine: &Engine, spec: &ExperimentSpec, id: &str) -> Result<Ensemble> {
    run_ensemble(engine, &spec.ensemble(engine, id))
}

fn summarize(o: &mut Outcome, s: &EnsembleStats) {
    o.line(format!(
        "{} [{}]: final loss {} (std {}), window loss {}, diverged {}/{}",
        s.experiment_id,
        s.engine.name(),
        fmt_f64(*s.loss_mean.last().unwrap()),
        fmt_f64(*s.loss_std.last().unwrap()),
        fmt_f64(s.window_loss(0.2)),
        s.diverged_count(),
        s.runs()
    ));
}

/// One engine; the optimizer unless `engine` asks for the SDE or only `[sde]` is configured.
pub fn simulate(spec: &ExperimentSpec, engine: Option<EngineKind>, out: &Path) -> Result<Outcome> {
    let kind = engine.unwrap_or(if spec.optimizer.is_some() { EngineKind::Discrete } else { EngineKind::Sde });
    let e = match kind {
        EngineKind::Discrete => spec.discrete_engine()?,
        EngineKind::Sde => spec.sde_engine()?,
        EngineKind::Oracle => return Err(LabError::Config("simulate runs discrete or sde engines".into())),
    };
    let ens = run(&e, spec, &spec.id)?;
    let mut o = Outcome::default();
    let oracles = oracle_blocks(spec, &ens.stats)?;
    let mut blocks = vec![&ens.stats];
    blocks.extend(oracles.iter());
    let p = out_path(out, &format!("{}_{}", spec.id, kind.name()))?;
    write_stats_file(&p, &blocks)?;
    o.file(p);
    summarize(&mut o, &ens.stats);
    Ok(o)
}

fn weak_reports(a: &EnsembleStats, b: &EnsembleStats) -> Result<Vec<WeakErrorReport>> {
    let mut v = vec![weak_error(a, b, Observable::Loss)?];
    for i in 0..a.d.min(16) {
        v.push(weak_error(a, b, Observable::Mean(i))?);
    }
    Ok(v)
}

/// Optimizer against its SDE. With `baselines`, the optimizer is also compared
/// with the other SDE baseline and a bootstrap confidence is reported.
pub fn compare(spec: &ExperimentSpec, baselines: bool, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let sde = spec.sde.as_ref().ok_or_else(|| LabError::Config("compare needs an [sde] section".into()))?;
    if spec.optimizer.is_none() {
        return Err(LabError::Config("compare needs an [optimizer] section".into()));
    }
    let eta = eta_of(spec);
    if (sde.dt - eta).abs() > 1e-12 * eta || sde.steps != spec.steps {
        return Err(LabError::Grid("compare needs sde.dt = optimizer.eta and equal step counts".into()));
    }
    let keep = |e: &Engine, id: &str| {
        let mut es = spec.ensemble(e, id);
        es.keep_paths = baselines;
        run_ensemble(e, &es)
    };
    let disc = keep(&spec.discrete_engine()?, &spec.id)?;
    let mut sdes = vec![(sde.baseline, keep(&spec.sde_engine()?, &spec.id)?)];
    if baselines {
        let other = match sde.baseline {
            Baseline::Ours => Baseline::Malladi,
            Baseline::Malladi => Baseline::Ours,
        };
        sdes.push((other, keep(&spec.sde_engine_with(other)?, &spec.id)?));
    }
    let p = out_path(out, &format!("{}_discrete", spec.id))?;
    write_stats_file(&p, &[&disc.stats])?;
    o.file(p);
    summarize(&mut o, &disc.stats);
    for (b, ens) in &sdes {
        let tag = if baselines { format!("sde_{}", b.name()) } else { "sde".into() };
        let p = out_path(out, &format!("{}_{tag}", spec.id))?;
        write_stats_file(&p, &[&ens.stats])?;
        o.file(p);
        summarize(&mut o, &ens.stats);
        let reports = weak_reports(&disc.stats, &ens.stats)?;
        let wtag = if baselines { format!("weak_{}", b.name()) } else { "weak".into() };
        let p = out_path(out, &format!("{}_{wtag}", spec.id))?;
        write_weak_file(&p, &reports.iter().collect::<Vec<_>>())?;
        o.file(p);
        let r = &reports[0];
        o.line(format!(
            "weak error (loss, {}): max gap {} at step {} (pooled stderr {}); {:.1}% of steps within 4 stderr",
            b.name(),
            fmt_f64(r.max_gap),
            r.steps[r.argmax],
            fmt_f64(r.stderr_at_max()),
            100.0 * r.fraction_within(4.0)
        ));
    }
    if baselines {
        let paths = |e: &Ensemble| e.path_losses.clone().unwrap();
        let (ours, malladi) = match sdes[0].0 {
            Baseline::Ours => (&sdes[0].1, &sdes[1].1),
            Baseline::Malladi => (&sdes[1].1, &sdes[0].1),
        };
        let c = super::weak::bootstrap_max_gap_confidence(&paths(&disc), &paths(ours), &paths(malladi), 1000, spec.seed)?;
        o.line(format!("bootstrap confidence that ours tracks the optimizer better: {:.3}", c));
    }
    Ok(o)
}

/// Phase timeline (`step, time, coord, phase1, phase2, phase3`) plus the per-phase loss envelopes.
pub fn phases(spec: &ExperimentSpec, out: &Path) -> Result<Outcome> {
    let engine = if spec.sde.is_some() { spec.sde_engine()? } else { spec.discrete_engine()? };
    let mut es = spec.ensemble(&engine, &spec.id);
    es.phases = Some(spec.noise.clone());
    let ens = run_ensemble(&engine, &es)?;
    let counts = ens.phase_counts.as_ref().unwrap();
    let mut o = Outcome::default();
    let p = out_path(out, &format!("{}_phases", spec.id))?;
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["step", "time", "coord", "phase1", "phase2", "phase3"])?;
    for (k, row) in counts.iter().enumerate() {
        for (i, c) in row.iter().enumerate() {
            w.write_record([
                ens.stats.steps[k].to_string(),
                fmt_f64(ens.stats.times[k]),
                i.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
            ])?;
        }
    }
    w.flush()?;
    o.file(p);
    let c = spec.landscape.constants();
    let (mu, l_tau) = (c.require_mu()?, c.require_trace()?);
    let sigma = spec.gaussian_sigmas()?.into_iter().fold(0.0, f64::max);
    let s0 = spec.landscape.value(&spec.x0);
    let mut blocks = vec![ens.stats.clone()];
    for phase in [1u8, 2, 3] {
        let b = signsgd_loss_bound(phase, mu, l_tau, sigma, eta_of(spec), s0, spec.d())?;
        let loss = ens.stats.times.iter().map(|&t| b.value(t)).collect();
        blocks.push(EnsembleStats::oracle(
            format!("{}_phase{phase}_bound", spec.id),
            ens.stats.steps.clone(),
            ens.stats.times.clone(),
            loss,
            None,
            None,
            spec.d(),
        ));
        if phase == 1 {
            if let crate::analytics::CurveForm::QuadraticStopping { t_star, .. } = b.form {
                o.line(format!("phase-1 stopping time t* = {}", fmt_f64(t_star)));
            }
        }
    }
    let p = out_path(out, &format!("{}_{}", spec.id, engine.kind().name()))?;
    write_stats_file(&p, &blocks.iter().collect::<Vec<_>>())?;
    o.file(p);
    for i in 0..spec.d() {
        let majority: Vec<usize> = counts
            .iter()
            .map(|row| (0..3).max_by_key(|&j| (row[i][j], std::cmp::Reverse(j))).unwrap() + 1)
            .collect();
        let mut seq = vec![majority[0]];
        for m in majority {
            if *seq.last().unwrap() != m {
                seq.push(m);
            }
        }
        o.line(format!(
            "coordinate {i}: majority phase sequence {}",
            seq.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" -> ")
        ));
    }
    Ok(o)
}

/// Long-run moments against the closed-form stationary law.
pub fn stationary(spec: &ExperimentSpec, out: &Path) -> Result<Outcome> {
    let engine = if spec.optimizer.is_some() { spec.discrete_engine()? } else { spec.sde_engine()? };
    let ens = run(&engine, spec, &spec.id)?;
    let m = predicted_moments(spec)?;
    let emp = ens.stats.window_cov(0.2);
    let mut o = Outcome::default();
    for i in 0..spec.d() {
        o.line(format!(
            "coordinate {i}: empirical variance {} vs predicted {} (relative error {:.2}%)",
            fmt_f64(emp[i]),
            fmt_f64(m.cov[i]),
            100.0 * (emp[i] - m.cov[i]).abs() / m.cov[i]
        ));
    }
    let mut s2 = spec.clone();
    if !s2.oracles.iter().any(|n| n == "stationary") {
        s2.oracles.push("stationary".into());
    }
    let oracles = oracle_blocks(&s2, &ens.stats)?;
    let mut blocks = vec![&ens.stats];
    blocks.extend(oracles.iter());
    let p = out_path(out, &format!("{}_stationary", spec.id))?;
    write_stats_file(&p, &blocks)?;
    o.file(p);
    summarize(&mut o, &ens.stats);
    Ok(o)
}

/// Baseline, fully rescaled, and rescaled-but-`θ`-kept runs for a scaling rule.
pub fn scaling(spec: &ExperimentSpec, rule: ScalingRule, out: &Path) -> Result<Outcome> {
    let base_cfg = spec.optimizer.clone().ok_or_else(|| LabError::Config("scaling needs [optimizer]".into()))?;
    let scaled = spec.rescaled(rule)?;
    let mut keep_theta = scaled.clone();
    if let Some(c) = keep_theta.optimizer.as_mut() {
        c.theta = base_cfg.theta;
    }
    let mut o = Outcome::default();
    let mut plateaus = Vec::new();
    for (s, tag) in [(spec, "baseline"), (&scaled, "rescaled"), (&keep_theta, "rescaled_theta_kept")] {
        let ens = run(&s.discrete_engine()?, s, &format!("{}_{tag}", spec.id))?;
        let p = out_path(out, &format!("{}_{tag}", spec.id))?;
        write_stats_file(&p, &[&ens.stats])?;
        o.file(p);
        summarize(&mut o, &ens.stats);
        plateaus.push(ens.stats.window_loss(0.2));
    }
    for (tag, v) in [("rescaled", plateaus[1]), ("rescaled_theta_kept", plateaus[2])] {
        o.line(format!("{tag}: plateau ratio to baseline {:.4}", v / plateaus[0]));
    }
    Ok(o)
}

/// Power-law schedulers `(t+1)^{−ϑ}` against the decaying envelope.
pub fn schedulers(spec: &ExperimentSpec, varthetas: &[f64], out: &Path) -> Result<Outcome> {
    let c = spec.landscape.constants();
    let (mu, l_tau) = (c.require_mu()?, c.require_trace()?);
    let sigma = spec.gaussian_sigmas()?.into_iter().fold(0.0, f64::max);
    let mut o = Outcome::default();
    for &v in varthetas {
        let mut s = spec.clone();
        if let Some(cfg) = s.optimizer.as_mut() {
            cfg.scheduler = Some(v);
        }
        let id = format!("{}_vartheta={v}", spec.id);
        let ens = run(&s.discrete_engine()?, &s, &id)?;
        let verdict = scheduler_verdict(v, mu, l_tau, sigma);
        let eta = eta_of(spec);
        let env: Vec<f64> = ens
            .stats
            .steps
            .iter()
            .map(|&k| verdict.envelope(eta * crate::optimizers::scheduler_value(v, k)))
            .collect();
        let oracle = EnsembleStats::oracle(
            format!("{id}_envelope"),
            ens.stats.steps.clone(),
            ens.stats.times.clone(),
            env.clone(),
            None,
            None,
            s.d(),
        );
        let p = out_path(out, &id)?;
        write_stats_file(&p, &[&ens.stats, &oracle])?;
        o.file(p);
        o.line(format!(
            "vartheta {v}: {} ; final loss {} vs envelope {}",
            if verdict.converges { "converges" } else { "violates the condition" },
            fmt_f64(*ens.stats.loss_mean.last().unwrap()),
            fmt_f64(*env.last().unwrap())
        ));
    }
    Ok(o)
}

/// One row of a noise-level sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub family: Family,
    pub sigma: f64,
    /// Mean loss over the last 20% of the horizon.
    pub plateau: f64,
    /// Average per-step standard error over the same window.
    pub stderr: f64,
    pub envelope: f64,
}

/// Run `spec` with isotropic Gaussian noise of level `sigma`.
///
/// With `horizon_per_sigma = Some(c)` the run lasts at least time `c·σ`
/// (relaxation times grow linearly in `σ` for the sign-based methods),
/// keeping about the configured number of records.
pub fn sweep_point(spec: &ExperimentSpec, sigma: f64, horizon_per_sigma: Option<f64>) -> Result<(SweepPoint, EnsembleStats)> {
    let mut s = spec.clone();
    s.noise = crate::noise::NoiseModel::Gaussian(crate::noise::GaussianDiagNoise::new(vec![sigma; spec.d()])?);
    if let Some(c) = horizon_per_sigma {
        let records = (spec.steps / spec.record_every.max(1)).max(1);
        s.steps = spec.steps.max((c * sigma / eta_of(spec)).ceil() as usize);
        s.record_every = (s.steps / records).max(1);
    }
    let id = format!("{}_sigma={sigma}", spec.id);
    let engine = if s.optimizer.is_some() { s.discrete_engine()? } else { s.sde_engine()? };
    let st = run(&engine, &s, &id)?.stats;
    let start = st.window_start(0.2);
    let stderr = (start..st.len()).map(|k| st.loss_stderr(k)).sum::<f64>() / (st.len() - start) as f64;
    let point = SweepPoint {
        family: family_of(&s),
        sigma,
        plateau: st.window_loss(0.2),
        stderr,
        envelope: asymptotic_envelope(&s)?,
    };
    Ok((point, st))
}

/// Asymptotic loss across noise levels, with the closed-form envelope per level.
pub fn sweep_sigma(spec: &ExperimentSpec, sigmas: &[f64], horizon_per_sigma: Option<f64>, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let summary = out_path(out, &format!("{}_sigma_sweep", spec.id))?;
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record(["family", "sigma", "plateau_loss", "plateau_stderr", "envelope"])?;
    let mut blocks = Vec::new();
    for &sg in sigmas {
        let (p, st) = sweep_point(spec, sg, horizon_per_sigma)?;
        let fam = p.family.name();
        w.write_record([fam.to_string(), fmt_f64(sg), fmt_f64(p.plateau), fmt_f64(p.stderr), fmt_f64(p.envelope)])?;
        o.line(format!("{fam} sigma {sg}: plateau {} (envelope {})", fmt_f64(p.plateau), fmt_f64(p.envelope)));
        blocks.push(st);
    }
    w.flush()?;
    o.file(summary);
    let p = out_path(out, &format!("{}_sweep", spec.id))?;
    write_stats_file(&p, &blocks.iter().collect::<Vec<_>>())?;
    o.file(p);
    Ok(o)
}

/// Closed-form values for the configuration, as `name = value` lines.
pub fn oracle_report(spec: &ExperimentSpec) -> Result<Outcome> {
    let mut o = Outcome::default();
    let pc = crate::analytics::phase_constants();
    o.line(format!("phase constants: m = {}, q1 = {}, q2 = {}", pc.m, pc.q1, pc.q2));
    let c = spec.landscape.constants();
    let show = |v: Option<f64>| v.map_or("unavailable".to_string(), fmt_f64);
    o.line(format!("mu = {}, L = {}, L_tau = {}", show(c.mu), show(c.smoothness), show(c.trace_bound)));
    o.line(format!("family = {}", family_of(spec).name()));
    match predicted_moments(spec) {
        Ok(m) => o.line(format!(
            "stationary covariance diagonal = [{}]",
            m.cov.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(", ")
        )),
        Err(e) => o.line(format!("stationary covariance: {e}")),
    }
    match asymptotic_envelope(spec) {
        Ok(v) => o.line(format!("asymptotic loss bound = {}", fmt_f64(v))),
        Err(e) => o.line(format!("asymptotic loss bound: {e}")),
    }
    Ok(o)
}

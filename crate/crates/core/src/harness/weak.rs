use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stats::EnsembleStats;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Loss,
    /// Coordinate `i` of the state.
    Mean(usize),
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Loss => "loss".into(),
            Observable::Mean(i) => format!("mean_{i}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "loss" {
            return Ok(Observable::Loss);
        }
        s.strip_prefix("mean_")
            .and_then(|i| i.parse().ok())
            .map(Observable::Mean)
            .ok_or_else(|| LabError::Config(format!("unknown observable '{s}'")))
    }

    /// Ensemble mean and its Monte-Carlo standard error at record `k`.
    fn estimate(&self, s: &EnsembleStats, k: usize) -> (f64, f64) {
        let n = s.n_alive[k] as f64;
        match self {
            Observable::Loss => (s.loss_mean[k], s.loss_std[k] / n.sqrt()),
            Observable::Mean(i) => (s.mean[k][*i], (s.cov[k][*i] / n).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakErrorReport {
    pub observable: Observable,
    pub steps: Vec<u64>,
    /// `|Ê g(x_k) − Ê g(X_{kη})|` per recorded step.
    pub gap: Vec<f64>,
    /// Pooled standard error `√(se_a² + se_b²)` per recorded step.
    pub mc_stderr: Vec<f64>,
    pub max_gap: f64,
    pub argmax: usize,
}

impl WeakErrorReport {
    /// Fraction of steps whose gap is at most `z` pooled standard errors.
    pub fn fraction_within(&self, z: f64) -> f64 {
        let ok = self.gap.iter().zip(&self.mc_stderr).filter(|(g, s)| **g <= z * **s).count();
        ok as f64 / self.gap.len() as f64
    }

    /// Pooled standard error at the step of the largest gap.
    pub fn stderr_at_max(&self) -> f64 {
        self.mc_stderr[self.argmax]
    }
}

fn check_grids(a: &EnsembleStats, b: &EnsembleStats) -> Result<()> {
    if a.steps != b.steps {
        return Err(LabError::Grid(format!("step grids differ ({} vs {} records)", a.len(), b.len())));
    }
    for (k, (ta, tb)) in a.times.iter().zip(&b.times).enumerate() {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(tb.abs()).max(1.0) {
            return Err(LabError::Grid(format!("times differ at record {k}: {ta} vs {tb}")));
        }
    }
    Ok(())
}

/// Per-step weak error between two ensembles on the same time grid.
pub fn weak_error(a: &EnsembleStats, b: &EnsembleStats, observable: Observable) -> Result<WeakErrorReport> {
    check_grids(a, b)?;
    if let Observable::Mean(i) = observable {
        if i >= a.d.min(b.d) {
            return Err(LabError::Dimension { expected: a.d, got: i + 1 });
        }
    }
    let mut gap = Vec::with_capacity(a.len());
    let mut se = Vec::with_capacity(a.len());
    for k in 0..a.len() {
        let (ma, sa) = observable.estimate(a, k);
        let (mb, sb) = observable.estimate(b, k);
        gap.push((ma - mb).abs());
        se.push((sa * sa + sb * sb).sqrt());
    }
    let (argmax, max_gap) = gap
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(i, m), (j, g)| if g > m { (j, g) } else { (i, m) });
    Ok(WeakErrorReport { observable, steps: a.steps.clone(), gap, mc_stderr: se, max_gap, argmax })
}

fn mean_curve(paths: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let n_rec = paths[0].len();
    let mut acc = vec![0.0; n_rec];
    let mut cnt = vec![0usize; n_rec];
    for &p in idx {
        for (k, v) in paths[p].iter().enumerate() {
            if v.is_finite() {
                acc[k] += v;
                cnt[k] += 1;
            }
        }
    }
    acc.iter().zip(cnt).map(|(a, c)| a / c as f64).collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Bootstrap confidence that `maxGap(reference, candidate) < maxGap(reference, baseline)`.
///
/// Each argument is a `path × record` loss matrix. Every replicate resamples
/// the paths of all three ensembles independently with replacement and the
/// returned value is the fraction of replicates in which the candidate's max
/// gap is strictly smaller.
pub fn bootstrap_max_gap_confidence(
    reference: &[Vec<f64>],
    candidate: &[Vec<f64>],
    baseline: &[Vec<f64>],
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    if reference.is_empty() || candidate.is_empty() || baseline.is_empty() {
        return Err(LabError::Config("bootstrap needs non-empty path sets".into()));
    }
    let n_rec = reference[0].len();
    if candidate[0].len() != n_rec || baseline[0].len() != n_rec {
        return Err(LabError::Grid("path records differ in length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |n: usize, rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(0..n)).collect::<Vec<_>>();
    let mut wins = 0usize;
    for _ in 0..replicates {
        let r = mean_curve(reference, &draw(reference.len(), &mut rng));
        let c = mean_curve(candidate, &draw(candidate.len(), &mut rng));
        let b = mean_curve(baseline, &draw(baseline.len(), &mut rng));
        if max_gap(&r, &c) < max_gap(&r, &b) {
            wins += 1;
        }
    }
    Ok(wins as f64 / replicates as f64)
}

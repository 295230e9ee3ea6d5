use crate::error::{LabError, Result};

/// Running count, mean and centred second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Pairwise combination of two disjoint samples.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
        }
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn mean_or_nan(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }
}

/// Merge a left-to-right sequence with a fixed balanced tree, so the result
/// depends only on the order of `parts`.
pub fn tree_merge<T: Clone>(parts: &[T], merge: &impl Fn(&T, &T) -> T) -> Option<T> {
    match parts.len() {
        0 => None,
        1 => Some(parts[0].clone()),
        n => {
            let (a, b) = parts.split_at(n / 2);
            Some(merge(&tree_merge(a, merge)?, &tree_merge(b, merge)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    Discrete,
    Sde,
    Oracle,
}

impl EngineKind {
    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::Discrete => "discrete",
            EngineKind::Sde => "sde",
            EngineKind::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "discrete" => EngineKind::Discrete,
            "sde" => EngineKind::Sde,
            "oracle" => EngineKind::Oracle,
            other => return Err(LabError::Config(format!("unknown engine '{other}'"))),
        })
    }
}

/// Per-recorded-step ensemble statistics of one engine.
///
/// `mean[k][i]` and `cov[k][i]` are the mean and variance of coordinate `i` at
/// record `k`, computed over the trajectories still alive at that step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub experiment_id: String,
    pub engine: EngineKind,
    pub d: usize,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub loss_mean: Vec<f64>,
    pub loss_std: Vec<f64>,
    pub n_alive: Vec<u64>,
    pub mean: Vec<Vec<f64>>,
    pub cov: Vec<Vec<f64>>,
}

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn runs(&self) -> u64 {
        self.n_alive.first().copied().unwrap_or(0)
    }

    pub fn diverged_count(&self) -> u64 {
        self.runs() - self.n_alive.last().copied().unwrap_or(0)
    }

    /// Monte-Carlo standard error of `loss_mean` at record `k`.
    pub fn loss_stderr(&self, k: usize) -> f64 {
        let n = self.n_alive[k];
        if n == 0 {
            f64::NAN
        } else {
            self.loss_std[k] / (n as f64).sqrt()
        }
    }

    /// Index of the first record in the trailing `fraction` of the horizon.
    pub fn window_start(&self, fraction: f64) -> usize {
        let n = self.len();
        let w = ((n as f64) * fraction).ceil() as usize;
        n - w.clamp(1, n.max(1))
    }

    /// Average of `loss_mean` over the trailing `fraction` of records.
    pub fn window_loss(&self, fraction: f64) -> f64 {
        let s = self.window_start(fraction);
        let xs = &self.loss_mean[s..];
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    /// Average per-coordinate variance over the trailing `fraction` of records.
    pub fn window_cov(&self, fraction: f64) -> Vec<f64> {
        let s = self.window_start(fraction);
        let rows = &self.cov[s..];
        (0..self.d)
            .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64)
            .collect()
    }

    /// Statistics for a deterministic curve (`n_alive = 0`, zero spread).
    pub fn oracle(
        experiment_id: impl Into<String>,
        steps: Vec<u64>,
        times: Vec<f64>,
        loss: Vec<f64>,
        mean: Option<Vec<Vec<f64>>>,
        cov: Option<Vec<Vec<f64>>>,
        d: usize,
    ) -> Self {
        let n = steps.len();
        let nan = || vec![vec![f64::NAN; d]; n];
        Self {
            experiment_id: experiment_id.into(),
            engine: EngineKind::Oracle,
            d,
            times,
            loss_std: vec![0.0; n],
            n_alive: vec![0; n],
            loss_mean: loss,
            mean: mean.unwrap_or_else(nan),
            cov: cov.unwrap_or_else(nan),
            steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..101).map(|i| ((i * 37) % 17) as f64 * 0.3 - 1.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let parts: Vec<Moments> = xs
            .chunks(7)
            .map(|c| {
                let mut m = Moments::default();
                c.iter().for_each(|&x| m.push(x));
                m
            })
            .collect();
        let merged = tree_merge(&parts, &|a: &Moments, b: &Moments| a.merge(b)).unwrap();
        assert_eq!(merged.n, all.n);
        assert!((merged.mean - all.mean).abs() < 1e-13);
        assert!((merged.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn window_is_last_fifth() {
        let mut s = EnsembleStats::oracle("w", (0..10).collect(), vec![0.0; 10], (0..10).map(|v| v as f64).collect(), None, None, 1);
        assert_eq!(s.window_start(0.2), 8);
        assert_eq!(s.window_loss(0.2), 8.5);
        s.n_alive = vec![4; 10];
        assert_eq!(s.diverged_count(), 0);
    }
}

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SdeSystem;
use crate::optimizers::StepStatus;

/// Trajectories whose `X` block exceeds this Euclidean norm count as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub diverged_at: Option<usize>,
    pub floor_events: usize,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Reusable buffers for `x̂ ← x̂ + Δt b + √Δt σ ⊙ Z`.
#[derive(Debug, Clone, Default)]
pub struct EmStepper {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    pub floor_events: usize,
}

impl EmStepper {
    pub fn new(n: usize) -> Self {
        Self { drift: vec![0.0; n], diffusion: vec![0.0; n], floor_events: 0 }
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        sys: &dyn SdeSystem,
        t: f64,
        state: &mut [f64],
        dt: f64,
        rng: &mut R,
    ) -> StepStatus {
        let layout = sys.layout();
        sys.coefficients(t, state, &mut self.drift, &mut self.diffusion);
        let sq = dt.sqrt();
        let noisy = layout.noisy_len();
        for i in 0..noisy {
            let z: f64 = StandardNormal.sample(rng);
            state[i] += dt * self.drift[i] + sq * self.diffusion[i] * z;
        }
        for i in noisy..state.len() {
            state[i] += dt * self.drift[i];
        }
        if let Some(r) = layout.v_range() {
            for v in &mut state[r] {
                if *v < 0.0 {
                    *v = 0.0;
                    self.floor_events += 1;
                    if self.floor_events == 1 {
                        log::debug!("V block floored at 0 (t = {t})");
                    }
                }
            }
        }
        let x = &state[..layout.d];
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        if state.iter().all(|v| v.is_finite()) && norm2 <= DIVERGENCE_NORM * DIVERGENCE_NORM {
            StepStatus::Ok
        } else {
            StepStatus::Diverged
        }
    }
}

/// Integrate `n_steps` steps from `initial`, keeping every state.
pub fn euler_maruyama<R: Rng + ?Sized>(
    sys: &dyn SdeSystem,
    initial: &[f64],
    dt: f64,
    n_steps: usize,
    rng: &mut R,
) -> Trajectory {
    assert!(dt > 0.0, "dt must be positive");
    let mut stepper = EmStepper::new(initial.len());
    let mut state = initial.to_vec();
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(state.clone());
    let mut diverged_at = None;
    for k in 0..n_steps {
        if stepper.step(sys, k as f64 * dt, &mut state, dt, rng) == StepStatus::Diverged {
            diverged_at = Some(k + 1);
            states.push(state.clone());
            break;
        }
        states.push(state.clone());
    }
    Trajectory { dt, states, diverged_at, floor_events: stepper.floor_events }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::FnSde;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_without_drift_or_diffusion() {
        let sys = FnSde::new(2, |_, _, o| o.fill(0.0), |_, _, o| o.fill(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tr = euler_maruyama(&sys, &[1.0, -2.0], 0.1, 50, &mut rng);
        assert!(tr.states.iter().all(|s| s == &vec![1.0, -2.0]));
    }

    #[test]
    fn one_explicit_euler_step() {
        let sys = FnSde::new(1, |_, x, o| o[0] = -x[0], |_, _, o| o.fill(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tr = euler_maruyama(&sys, &[1.0], 0.1, 1, &mut rng);
        assert_eq!(tr.states[1][0], 0.9);
    }

    #[test]
    fn divergence_is_recorded() {
        let sys = FnSde::new(1, |_, x, o| o[0] = x[0] * x[0], |_, _, o| o.fill(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tr = euler_maruyama(&sys, &[10.0], 0.5, 100, &mut rng);
        assert!(tr.diverged_at.is_some());
        assert!(tr.states.len() < 101);
    }
}

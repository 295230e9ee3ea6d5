//! Continuous-time models and their integration.
//!
//! A model exposes drift and per-coordinate diffusion over an augmented state
//! `[X | M | V]`, where the `M` and `V` blocks exist only for the adaptive families.
//! Diffusion amplitudes already include the `√η` factor.

mod integrator;
mod models;

pub use integrator::{euler_maruyama, EmStepper, Trajectory, DIVERGENCE_NORM};
pub use models::{
    iota, phase_classify, AdamSde, Baseline, Phase, RmspropSde, SgdSde, SignSgdSde, SignVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub d: usize,
    pub has_m: bool,
    pub has_v: bool,
}

impl StateLayout {
    pub fn x_only(d: usize) -> Self {
        Self { d, has_m: false, has_v: false }
    }

    pub fn len(&self) -> usize {
        self.d * (1 + self.has_m as usize + self.has_v as usize)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn m_range(&self) -> Option<std::ops::Range<usize>> {
        self.has_m.then(|| self.d..2 * self.d)
    }

    pub fn v_range(&self) -> Option<std::ops::Range<usize>> {
        let start = self.d * (1 + self.has_m as usize);
        self.has_v.then(|| start..start + self.d)
    }

    /// Number of leading state entries that receive Brownian increments (X and M blocks).
    pub fn noisy_len(&self) -> usize {
        self.d * (1 + self.has_m as usize)
    }
}

pub trait SdeSystem: Send + Sync {
    fn layout(&self) -> StateLayout;

    /// Fill `drift` and `diffusion` (both of layout length) at `(t, state)`.
    /// Domain failures are reported as non-finite entries.
    fn coefficients(&self, t: f64, state: &[f64], drift: &mut [f64], diffusion: &mut [f64]);

    /// Augmented initial state for a parameter vector `x0`.
    fn initial_state(&self, x0: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.layout().len()];
        s[..x0.len()].copy_from_slice(x0);
        s
    }

    fn drift(&self, t: f64, state: &[f64]) -> Vec<f64> {
        let n = self.layout().len();
        let (mut b, mut s) = (vec![0.0; n], vec![0.0; n]);
        self.coefficients(t, state, &mut b, &mut s);
        b
    }

    fn diffusion(&self, t: f64, state: &[f64]) -> Vec<f64> {
        let n = self.layout().len();
        let (mut b, mut s) = (vec![0.0; n], vec![0.0; n]);
        self.coefficients(t, state, &mut b, &mut s);
        s
    }
}

type CoeffFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A model given by plain closures over an `X`-only state.
pub struct FnSde {
    d: usize,
    drift: Box<CoeffFn>,
    diffusion: Box<CoeffFn>,
}

impl FnSde {
    pub fn new(
        d: usize,
        drift: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { d, drift: Box::new(drift), diffusion: Box::new(diffusion) }
    }

    /// `dX = −λX dt + √η dW` per coordinate.
    pub fn ornstein_uhlenbeck(lambdas: Vec<f64>, eta: f64) -> Self {
        let d = lambdas.len();
        let s = eta.sqrt();
        Self::new(
            d,
            move |_, x, out| {
                for ((o, l), xi) in out.iter_mut().zip(&lambdas).zip(x) {
                    *o = -l * xi;
                }
            },
            move |_, _, out| out.iter_mut().for_each(|o| *o = s),
        )
    }
}

impl SdeSystem for FnSde {
    fn layout(&self) -> StateLayout {
        StateLayout::x_only(self.d)
    }

    fn coefficients(&self, t: f64, state: &[f64], drift: &mut [f64], diffusion: &mut [f64]) {
        (self.drift)(t, state, drift);
        (self.diffusion)(t, state, diffusion);
    }
}

use crate::noise::erf;

/// Secant and tangent lines sandwiching `erf` on `[1, 3/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseConstants {
    /// Secant slope through `(1, erf 1)` and `(3/2, erf 3/2)`.
    pub m: f64,
    /// Secant intercept.
    pub q1: f64,
    /// Intercept of the tangent with slope `m`.
    pub q2: f64,
    pub q_hat: f64,
    /// Tangency point.
    pub x_star: f64,
}

pub fn phase_constants() -> PhaseConstants {
    let m = (erf(1.5) - erf(1.0)) / 0.5;
    let q1 = erf(1.0) - m;
    // erf'(x) = (2/√π) e^{−x²} is decreasing on [1, 3/2].
    let slope = |x: f64| std::f64::consts::FRAC_2_SQRT_PI * (-x * x).exp() - m;
    let (mut lo, mut hi) = (1.0f64, 1.5f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x_star = 0.5 * (lo + hi);
    let q2 = erf(x_star) - m * x_star;
    PhaseConstants { m, q1, q2, q_hat: q1.max(q2), x_star }
}

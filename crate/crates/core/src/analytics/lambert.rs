/// Principal branch `W₀` of the Lambert W function, `W(x) e^{W(x)} = x` for `x ≥ −1/e`.
///
/// Initial guess: branch-point series `−1 + p − p²/3 + 11p³/72` with `p = √(2(ex+1))`
/// near `−1/e`, `ln(1+x)` on the middle range, and `L₁ − L₂ + L₂/L₁` (`L₁ = ln x`,
/// `L₂ = ln ln x`) for large arguments; then Halley iteration.
pub fn lambert_w0(x: f64) -> f64 {
    const INV_E: f64 = 0.367_879_441_171_442_33;
    if x.is_nan() || x < -INV_E {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut w = if x < -0.25 {
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    if w <= -1.0 {
        return -1.0;
    }
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    w
}

/// `W₀(e^l)`, i.e. the root of `w + ln w = l`, usable where `e^l` overflows.
pub fn lambert_w0_exp(l: f64) -> f64 {
    if l < 20.0 {
        return lambert_w0(l.exp());
    }
    let mut w = l - l.ln();
    for _ in 0..64 {
        let f = w + w.ln() - l;
        let next = w - f / (1.0 + 1.0 / w);
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * next;
        w = next;
        if done {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defining_values() {
        assert_eq!(lambert_w0(0.0), 0.0);
        assert!((lambert_w0(std::f64::consts::E) - 1.0).abs() < 1e-15);
        assert!((lambert_w0(-(-1.0f64).exp()) + 1.0).abs() < 1e-7);
        assert!(lambert_w0(-0.5).is_nan());
        for l in [19.0, 21.0, 50.0, 700.0, 5000.0] {
            let w = lambert_w0_exp(l);
            assert!((w + w.ln() - l).abs() < 1e-12 * l);
        }
        assert!((lambert_w0_exp(21.0) - lambert_w0(21f64.exp())).abs() < 1e-12);
    }
}

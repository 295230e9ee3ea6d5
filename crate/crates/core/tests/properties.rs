use adaptive_sde_lab::analytics::{
    lambert_w0, sgd_loss_bound, signsgd_loss_bound, signsgd_stationary,
};
use adaptive_sde_lab::landscapes::{EmbeddedSaddle, Landscape, PowerLawQuadratic, QuadraticDiag};
use adaptive_sde_lab::noise::{GaussianDiagNoise, NoiseModel, StudentTNoise};
use adaptive_sde_lab::optimizers::{
    apply_scaling, step, undo_scaling, Family, OptimizerConfig, OptimizerState, ScalingKind, ScalingRule,
};
use proptest::prelude::*;

fn landscapes() -> impl Strategy<Value = Landscape> {
    prop_oneof![
        prop::collection::vec(0.1f64..10.0, 1..5)
            .prop_map(|l| Landscape::Quadratic(QuadraticDiag::new(l).unwrap())),
        (prop::collection::vec(-2.0f64..3.0, 2..4), 0.5f64..2.0, -0.5f64..0.5)
            .prop_map(|(l, a, b)| Landscape::Saddle(EmbeddedSaddle::new(l, a, b).unwrap())),
        (1u64..50).prop_map(|s| Landscape::PowerLaw(PowerLawQuadratic::random(6, 4, 1.5, s).unwrap())),
    ]
}

fn gaussian(sigma: f64) -> NoiseModel {
    NoiseModel::Gaussian(GaussianDiagNoise::new(vec![sigma]).unwrap())
}

fn student(nu: u32, scale: f64) -> NoiseModel {
    NoiseModel::StudentT(StudentTNoise::new(nu, vec![scale]).unwrap())
}

proptest! {
    #[test]
    fn gradient_matches_central_differences(land in landscapes(), seed in prop::collection::vec(-1.5f64..1.5, 8)) {
        let d = land.dim();
        let x: Vec<f64> = (0..d).map(|i| seed[i % seed.len()]).collect();
        let g = land.gradient(&x).unwrap();
        let h = 1e-5;
        for i in 0..d {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (land.value(&xp) - land.value(&xm)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "coord {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn sign_drift_is_odd_and_monotone(g in -50.0f64..50.0, dg in 0.0f64..5.0, s in 0.01f64..10.0, nu in 1u32..6) {
        for n in [gaussian(s), student(nu, s)] {
            let a = n.sign_drift(g, s);
            prop_assert!((a + n.sign_drift(-g, s)).abs() < 1e-12);
            prop_assert!(n.sign_drift(g + dg, s) >= a - 1e-12);
            prop_assert!(a.abs() <= 1.0);
        }
    }

    #[test]
    fn sign_drift_and_diffusion_are_complementary(g in -20.0f64..20.0, s in 0.01f64..10.0, nu in 1u32..6) {
        for n in [gaussian(s), student(nu, s)] {
            let (a, b) = (n.sign_drift(g, s), n.sign_diffusion(g, s));
            prop_assert!((a * a + b * b - 1.0).abs() < 1e-12);
            prop_assert!(b >= 0.0);
        }
    }

    #[test]
    fn lambert_identity(x in -0.3678f64..1e6) {
        let w = lambert_w0(x);
        prop_assert!((w * w.exp() - x).abs() <= 1e-10 * x.abs().max(1e-3));
        prop_assert!(w >= -1.0);
    }

    #[test]
    fn sgd_bound_decreases_to_its_floor(s0 in 1e-3f64..10.0, sigma in 0.01f64..2.0, t in 0.0f64..50.0, dt in 0.0f64..5.0) {
        let b = sgd_loss_bound(1.0, 3.0, sigma, 1e-3, s0, 1.0, 1.0, 1.0).unwrap();
        let (u, v) = (b.value(t), b.value(t + dt));
        if s0 >= b.limit() {
            prop_assert!(v <= u + 1e-15);
            prop_assert!(v >= b.limit() - 1e-15);
        }
        prop_assert!((b.value(0.0) - s0).abs() <= 1e-12 * s0);
        prop_assert!((b.value(1e6) - b.limit()).abs() <= 1e-12 * b.limit().max(1e-300));
    }

    #[test]
    fn signsgd_bounds_start_at_s0_and_do_not_increase(phase in 1u8..4, s0 in 0.01f64..5.0, sigma in 0.05f64..1.0, t in 0.0f64..20.0) {
        let b = signsgd_loss_bound(phase, 1.0, 3.0, sigma, 1e-3, s0, 2).unwrap();
        prop_assert!((b.value(0.0) - s0).abs() <= 1e-9 * s0);
        if s0 >= b.limit() {
            prop_assert!(b.value(t + 0.5) <= b.value(t) + 1e-12);
        }
    }

    #[test]
    fn transient_moments_reach_the_stationary_law(l in 0.1f64..5.0, sigma in 0.01f64..1.0, x0 in -1.0f64..1.0) {
        let m = signsgd_stationary(&[l], &[sigma], 1e-3, &[x0]).unwrap();
        prop_assert_eq!(m.transient_mean(0.0)[0], x0);
        prop_assert!(m.transient_cov(0.0)[0].abs() < 1e-15);
        let late = 60.0 / m.transient.cov_rate[0].min(m.transient.mean_rate[0]);
        prop_assert!((m.transient_cov(late)[0] - m.cov[0]).abs() <= 1e-9 * m.cov[0]);
        prop_assert!(m.transient_mean(late)[0].abs() < 1e-12);
    }

    #[test]
    fn adamw_with_zero_decay_is_adam(grads in prop::collection::vec(-5.0f64..5.0, 2..40), x0 in -2.0f64..2.0) {
        let adam = OptimizerConfig::new(Family::Adam, 1e-2);
        let adamw = OptimizerConfig::new(Family::AdamW, 1e-2);
        let (mut a, mut b) = (OptimizerState::new(&[x0]), OptimizerState::new(&[x0]));
        for g in &grads {
            step(&adam, &mut a, &[*g], 1.0);
            step(&adamw, &mut b, &[*g], 1.0);
            prop_assert_eq!(&a.x, &b.x);
            prop_assert!(a.v[0] >= 0.0);
        }
    }

    #[test]
    fn second_moment_stays_nonnegative(grads in prop::collection::vec(-1e3f64..1e3, 1..60), beta2 in 0.5f64..0.9999) {
        for fam in [Family::Rmsprop, Family::RmspropW, Family::Adam, Family::AdamW] {
            let cfg = OptimizerConfig::new(fam, 1e-3).with_betas(0.9, beta2).with_theta(0.1);
            let mut s = OptimizerState::new(&[0.5]);
            for g in &grads {
                step(&cfg, &mut s, &[*g], 1.0);
                prop_assert!(s.v[0] >= 0.0);
            }
        }
    }

    #[test]
    fn scaling_round_trips(eta in 1e-4f64..1e-2, b1 in 0.8f64..0.99, b2 in 0.99f64..0.9999, theta in 0.0f64..2.0, delta in 1.0f64..4.0) {
        let cfg = OptimizerConfig::new(Family::AdamW, eta).with_betas(b1, b2).with_theta(theta);
        for kind in [ScalingKind::Ours, ScalingKind::Malladi] {
            let rule = ScalingRule { rule: kind, delta };
            let Ok(up) = apply_scaling(&cfg, rule) else { continue };
            let back = undo_scaling(&up.config, rule).unwrap();
            prop_assert!((back.config.eta - eta).abs() <= 1e-12 * eta);
            prop_assert!((back.config.beta1 - b1).abs() <= 1e-12);
            prop_assert!((back.config.beta2 - b2).abs() <= 1e-12);
            prop_assert!((back.config.theta - theta).abs() <= 1e-12 * (1.0 + theta));
            prop_assert!((up.batch_factor * back.batch_factor - 1.0).abs() <= 1e-12);
        }
    }
}

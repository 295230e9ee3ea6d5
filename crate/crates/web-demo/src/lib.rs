//! Browser bindings: each export returns a JSON string consumed by `www/index.html`.

use adaptive_sde_lab::analytics::{sgd_stationary, signsgd_quad_loss_curve, signsgd_stationary};
use adaptive_sde_lab::harness::{run_ensemble, ExperimentSpec};
use adaptive_sde_lab::noise::{erf, student_xi, SQRT_2};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn to_js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn quad_spec(l1: f64, l2: f64, sigma: f64, eta: f64, steps: u32, runs: u32, seed: u32) -> String {
    let every = (steps / 200).max(1);
    format!(
        "[experiment]\nid = \"demo\"\nruns = {runs}\nsteps = {steps}\nseed = {seed}\nrecord_every = {every}\n\
         x0 = [0.1, -0.1]\n\n[landscape]\nkind = \"quadratic\"\nlambdas = [{l1:?}, {l2:?}]\n\n\
         [noise]\nkind = \"gaussian\"\nsigma = {sigma:?}\n\n[optimizer]\nfamily = \"signsgd\"\neta = {eta:?}\n\n\
         [sde]\nvariant = \"erf\"\n"
    )
}

fn compare_impl(l1: f64, l2: f64, sigma: f64, eta: f64, steps: u32, runs: u32, seed: u32) -> Result<String, String> {
    let spec = ExperimentSpec::from_toml_str(&quad_spec(l1, l2, sigma, eta, steps, runs, seed)).map_err(|e| e.to_string())?;
    let disc_engine = spec.discrete_engine().map_err(|e| e.to_string())?;
    let disc = run_ensemble(&disc_engine, &spec.ensemble(&disc_engine, "demo")).map_err(|e| e.to_string())?;
    let sde_engine = spec.sde_engine().map_err(|e| e.to_string())?;
    let sde = run_ensemble(&sde_engine, &spec.ensemble(&sde_engine, "demo")).map_err(|e| e.to_string())?;
    let lambdas = [l1, l2];
    let sigmas = [sigma, sigma];
    let x0 = spec.x0.clone();
    let closed: Vec<f64> = disc
        .stats
        .times
        .iter()
        .map(|&t| signsgd_quad_loss_curve(&lambdas, &sigmas, eta, &x0, t))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "time": disc.stats.times,
        "discrete": disc.stats.loss_mean,
        "sde": sde.stats.loss_mean,
        "closed_form": closed,
    })
    .to_string())
}

/// Mean loss of SignSGD and its SDE on `½(λ₁x₁² + λ₂x₂²)`, plus the closed-form curve.
#[wasm_bindgen]
pub fn compare_signsgd(l1: f64, l2: f64, sigma: f64, eta: f64, steps: u32, runs: u32, seed: u32) -> Result<String, JsError> {
    compare_impl(l1, l2, sigma, eta, steps, runs, seed).map_err(to_js)
}

fn drift_impl(nu: u32, gmax: f64, n: u32) -> Result<String, String> {
    if nu == 0 || n < 2 || !(gmax > 0.0) {
        return Err("need nu >= 1, n >= 2, gmax > 0".into());
    }
    let g: Vec<f64> = (0..n).map(|i| -gmax + 2.0 * gmax * i as f64 / (n - 1) as f64).collect();
    let gauss: Vec<f64> = g.iter().map(|&x| erf(x / SQRT_2)).collect();
    let student: Vec<f64> = g.iter().map(|&x| 2.0 * student_xi(nu, x)).collect();
    Ok(json!({ "g": g, "gaussian": gauss, "student": student }).to_string())
}

/// `E[sign(g + Z)]` for unit-scale Gaussian and Student-t(`ν`) noise on a grid over `[-gmax, gmax]`.
#[wasm_bindgen]
pub fn sign_drift(nu: u32, gmax: f64, n: u32) -> Result<String, JsError> {
    drift_impl(nu, gmax, n).map_err(to_js)
}

fn stationary_impl(l1: f64, l2: f64, sigma: f64, eta: f64) -> Result<String, String> {
    let lambdas = [l1, l2];
    let sigmas = [sigma, sigma];
    let x0 = [0.0, 0.0];
    let s = signsgd_stationary(&lambdas, &sigmas, eta, &x0).map_err(|e| e.to_string())?;
    let g = sgd_stationary(&lambdas, &sigmas, eta, &x0).map_err(|e| e.to_string())?;
    Ok(json!({
        "signsgd_cov": s.cov,
        "signsgd_loss": s.expected_loss(&lambdas),
        "sgd_cov": g.cov,
        "sgd_loss": g.expected_loss(&lambdas),
    })
    .to_string())
}

/// Stationary covariance diagonal and expected loss of SignSGD and SGD on the same quadratic.
#[wasm_bindgen]
pub fn stationary(l1: f64, l2: f64, sigma: f64, eta: f64) -> Result<String, JsError> {
    stationary_impl(l1, l2, sigma, eta).map_err(to_js)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn compare_returns_aligned_series() {
        let v = parse(&compare_impl(1.0, 2.0, 0.1, 1e-3, 400, 16, 3).unwrap());
        let n = v["time"].as_array().unwrap().len();
        assert!(n > 2);
        for k in ["discrete", "sde", "closed_form"] {
            assert_eq!(v[k].as_array().unwrap().len(), n, "{k}");
        }
        assert_eq!(v["discrete"][0], v["sde"][0]);
    }

    #[test]
    fn drift_is_odd_and_bounded() {
        let v = parse(&drift_impl(3, 4.0, 41).unwrap());
        let s = v["student"].as_array().unwrap();
        assert_eq!(s.len(), 41);
        for i in 0..41 {
            let a = s[i].as_f64().unwrap();
            assert!((a + s[40 - i].as_f64().unwrap()).abs() < 1e-12 && a.abs() < 1.0);
        }
        assert!(drift_impl(0, 1.0, 10).is_err());
    }

    #[test]
    fn stationary_loss_matches_covariance() {
        let v = parse(&stationary_impl(1.0, 3.0, 0.1, 0.01).unwrap());
        let c: Vec<f64> = v["sgd_cov"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let loss = 0.5 * (c[0] + 3.0 * c[1]);
        assert!((loss - v["sgd_loss"].as_f64().unwrap()).abs() < 1e-15);
    }
}

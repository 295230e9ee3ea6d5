use super::stats::EnsembleStats;
use crate::error::{LabError, Result};

/// Fraction of the horizon used as the asymptotic window for point oracles.
pub const ASYMPTOTIC_WINDOW: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// An upper envelope: the statistic must stay below it at every step.
    Bound,
    /// A predicted value: checked on the window average of the trailing 20% of steps.
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    LossMean,
    /// Variance of coordinate `i`.
    Var(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCurve {
    pub kind: OracleKind,
    pub statistic: Statistic,
    /// One value per recorded step of the compared statistics.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub pass: bool,
    /// `statistic − oracle` per recorded step.
    pub residuals: Vec<f64>,
    /// First step (not record index) violating a bound.
    pub first_violation: Option<u64>,
    /// `(window mean − oracle mean)/|oracle mean|` for point oracles.
    pub window_relative_error: Option<f64>,
}

fn column(stats: &EnsembleStats, s: Statistic) -> Result<Vec<f64>> {
    match s {
        Statistic::LossMean => Ok(stats.loss_mean.clone()),
        Statistic::Var(i) if i < stats.d => Ok(stats.cov.iter().map(|r| r[i]).collect()),
        Statistic::Var(i) => Err(LabError::Dimension { expected: stats.d, got: i + 1 }),
    }
}

/// Compare a statistic against a closed-form curve.
///
/// Bounds pass when `stat ≤ oracle·(1 + tolerance)` at every step; point
/// oracles pass when the window averages agree to `tolerance` relative error.
pub fn compare_to_oracle(stats: &EnsembleStats, oracle: &OracleCurve, tolerance: f64) -> Result<OracleReport> {
    if oracle.values.len() != stats.len() {
        return Err(LabError::Grid(format!(
            "oracle has {} values for {} records",
            oracle.values.len(),
            stats.len()
        )));
    }
    let stat = column(stats, oracle.statistic)?;
    let residuals: Vec<f64> = stat.iter().zip(&oracle.values).map(|(s, o)| s - o).collect();
    Ok(match oracle.kind {
        OracleKind::Bound => {
            let first = stat
                .iter()
                .zip(&oracle.values)
                .position(|(s, o)| !(*s <= o + tolerance * o.abs()))
                .map(|k| stats.steps[k]);
            OracleReport { pass: first.is_none(), residuals, first_violation: first, window_relative_error: None }
        }
        OracleKind::Point => {
            let start = stats.window_start(ASYMPTOTIC_WINDOW);
            let n = (stat.len() - start) as f64;
            let sm = stat[start..].iter().sum::<f64>() / n;
            let om = oracle.values[start..].iter().sum::<f64>() / n;
            let rel = if om == 0.0 { (sm - om).abs() } else { (sm - om).abs() / om.abs() };
            OracleReport { pass: rel <= tolerance, residuals, first_violation: None, window_relative_error: Some(rel) }
        }
    })
}

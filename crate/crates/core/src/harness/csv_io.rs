use std::io::{Read, Write};
use std::path::Path;

use super::stats::{EngineKind, EnsembleStats};
use super::weak::WeakErrorReport;
use crate::error::{LabError, Result};

/// Largest dimension whose per-coordinate columns are persisted.
pub const MAX_PERSISTED_DIM: usize = 16;

const FIXED: [&str; 7] = ["experiment_id", "engine", "step", "time", "loss_mean", "loss_std", "n_alive"];

/// Shortest round-trip representation; exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn stats_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    if d <= MAX_PERSISTED_DIM {
        h.extend((0..d).map(|i| format!("mean_{i}")));
        h.extend((0..d).map(|i| format!("cov_{i}{i}")));
    }
    h
}

/// Write several statistics blocks (same dimension) under one header.
pub fn write_stats<W: Write>(out: W, blocks: &[&EnsembleStats]) -> Result<()> {
    let d = blocks.first().map_or(0, |b| b.d);
    if blocks.iter().any(|b| b.d != d) {
        return Err(LabError::Config("all blocks in one CSV must share the dimension".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(stats_header(d))?;
    let per_coord = d <= MAX_PERSISTED_DIM;
    for b in blocks {
        for k in 0..b.len() {
            let mut row = vec![
                b.experiment_id.clone(),
                b.engine.name().to_string(),
                b.steps[k].to_string(),
                fmt_f64(b.times[k]),
                fmt_f64(b.loss_mean[k]),
                fmt_f64(b.loss_std[k]),
                b.n_alive[k].to_string(),
            ];
            if per_coord {
                row.extend(b.mean[k].iter().map(|v| fmt_f64(*v)));
                row.extend(b.cov[k].iter().map(|v| fmt_f64(*v)));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_stats_file(path: &Path, blocks: &[&EnsembleStats]) -> Result<()> {
    write_stats(std::fs::File::create(path)?, blocks)
}

fn num<T: std::str::FromStr>(s: &str, col: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| LabError::Io(format!("line {line}: column {col}: cannot parse '{s}'")))
}

/// Parse a statistics CSV back into blocks, one per consecutive `(experiment_id, engine)` run.
pub fn read_stats<R: Read>(input: R) -> Result<Vec<EnsembleStats>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    if header.len() < FIXED.len() || header[..FIXED.len()] != FIXED {
        return Err(LabError::Io(format!("unexpected stats header: {}", header.join(","))));
    }
    let extra = header.len() - FIXED.len();
    if extra % 2 != 0 {
        return Err(LabError::Io("mean/cov columns must come in pairs".into()));
    }
    let d = extra / 2;
    if header != stats_header(d) {
        return Err(LabError::Io(format!("unexpected stats header: {}", header.join(","))));
    }
    let mut blocks: Vec<EnsembleStats> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = line + 2;
        let id = &rec[0];
        let engine = EngineKind::parse(&rec[1])?;
        let start_new = blocks.last().map_or(true, |b| b.experiment_id != id || b.engine != engine);
        if start_new {
            blocks.push(EnsembleStats {
                experiment_id: id.to_string(),
                engine,
                d,
                steps: vec![],
                times: vec![],
                loss_mean: vec![],
                loss_std: vec![],
                n_alive: vec![],
                mean: vec![],
                cov: vec![],
            });
        }
        let b = blocks.last_mut().unwrap();
        b.steps.push(num(&rec[2], "step", line)?);
        b.times.push(num(&rec[3], "time", line)?);
        b.loss_mean.push(num(&rec[4], "loss_mean", line)?);
        b.loss_std.push(num(&rec[5], "loss_std", line)?);
        b.n_alive.push(num(&rec[6], "n_alive", line)?);
        let mut m = Vec::with_capacity(d);
        let mut c = Vec::with_capacity(d);
        for i in 0..d {
            m.push(num(&rec[7 + i], &header[7 + i], line)?);
            c.push(num(&rec[7 + d + i], &header[7 + d + i], line)?);
        }
        b.mean.push(m);
        b.cov.push(c);
    }
    Ok(blocks)
}

pub fn read_stats_file(path: &Path) -> Result<Vec<EnsembleStats>> {
    read_stats(std::fs::File::open(path)?)
}

/// `observable, step, gap, mc_stderr` rows for each report.
pub fn write_weak<W: Write>(out: W, reports: &[&WeakErrorReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["observable", "step", "gap", "mc_stderr"])?;
    for r in reports {
        let name = r.observable.name();
        for k in 0..r.steps.len() {
            w.write_record([name.clone(), r.steps[k].to_string(), fmt_f64(r.gap[k]), fmt_f64(r.mc_stderr[k])])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_weak_file(path: &Path, reports: &[&WeakErrorReport]) -> Result<()> {
    write_weak(std::fs::File::create(path)?, reports)
}

//! Experiment dispatch.

use std::collections::BTreeMap;
use std::fmt;

use holosense::analysis::{self, BoundCheck};
use holosense::channel::received_grid;
use holosense::experiments::{nmse_vs_order, nmse_vs_size, nmse_vs_snr, square_sizes, SweepPoint};
use holosense::holography::{naive_reconstruction_weights, psis_recover, record, record_psi_set};
use holosense::pmcs::ratio_to_db;
use holosense::seed::derive_seed;
use holosense::{Field, NoiseModel, Peak, ReferenceWave};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::output::{num, snr, Artifacts, Csv};

/// Peaks copied into the manifest for figure annotation.
const MANIFEST_PEAKS: usize = 10;

#[derive(Debug)]
pub enum RunError {
    Model(holosense::Error),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Model(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl From<holosense::Error> for RunError {
    fn from(e: holosense::Error) -> Self {
        RunError::Model(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub peaks: Vec<Peak>,
    pub summary: Value,
}

pub fn run(cfg: &ExperimentConfig, kind: Kind, out: &mut Artifacts) -> Result<Report, RunError> {
    match kind {
        Kind::PatternRaw => pattern(cfg, false, out),
        Kind::PatternPsis => pattern(cfg, true, out),
        Kind::PsisDemo => psis_demo(cfg, out),
        Kind::NmseSnr => {
            let geom = cfg.geometry()?;
            let pts = nmse_vs_snr(
                geom,
                &cfg.users(),
                cfg.pmcs_config(),
                &cfg.recovery,
                &cfg.noise.snr_db,
                cfg.noise.trials,
                cfg.noise.seed,
            )?;
            write_sweep(pts, out)
        }
        Kind::NmseSize => {
            let shapes = square_sizes(&cfg.sweep.sizes)?;
            let g = &cfg.geometry;
            let users = cfg.users();
            let mut pts = Vec::new();
            for (i, &s) in cfg.noise.snr_db.iter().enumerate() {
                pts.extend(nmse_vs_size(
                    &shapes,
                    g.spacing_wl,
                    g.f_c_hz,
                    &users,
                    cfg.recovery[0],
                    s,
                    cfg.noise.trials,
                    derive_seed(cfg.noise.seed, i as u64),
                )?);
            }
            write_sweep(pts, out)
        }
        Kind::NmseOrder => {
            let geom = cfg.geometry()?;
            let users = cfg.users();
            let mut pts = Vec::new();
            for (i, &s) in cfg.noise.snr_db.iter().enumerate() {
                pts.extend(nmse_vs_order(
                    geom,
                    &users,
                    &cfg.sweep.orders,
                    cfg.recovery[0],
                    s,
                    cfg.noise.trials,
                    derive_seed(cfg.noise.seed, i as u64),
                )?);
            }
            write_sweep(pts, out)
        }
        Kind::Bounds => bounds(cfg, out),
    }
}

fn pattern(cfg: &ExperimentConfig, psis: bool, out: &mut Artifacts) -> Result<Report, RunError> {
    let geom = cfg.geometry()?;
    let grid = cfg.pattern.angular_grid()?;
    let object = received_grid(&geom, &cfg.users(), 0.0)?;
    let reference = ReferenceWave::normal_incidence(1.0, &geom)?;
    let noise = match cfg.pattern.snr_db {
        None => NoiseModel::noiseless(),
        Some(s) => NoiseModel::for_snr(&object, s, cfg.noise.seed)?,
    };
    let weights: Field = if psis {
        psis_recover(&record_psi_set(&object, &reference, &geom, &noise)?, &reference)?
    } else {
        naive_reconstruction_weights(&record(&object, &reference, &geom, &mut noise.source())?, &reference)
    };
    let pat = holosense::patterns::array_pattern(&DVector::from_column_slice(weights.as_slice()), &geom, &grid)?;
    let mut buf = Vec::new();
    pat.write_csv(&mut buf)?;
    out.write("pattern.csv", &buf)?;
    let mut csv = Csv::new(&["rank", "theta_deg", "phi_deg", "gain_db"]);
    for (i, p) in pat.peaks.iter().enumerate() {
        csv.row([(i + 1).to_string(), num(p.theta_deg), num(p.phi_deg), num(p.gain_db)]);
    }
    out.write_csv("results.csv", csv)?;
    Ok(Report {
        summary: json!({ "grid_points": grid.len(), "peaks_found": pat.peaks.len(), "peak_gain": pat.peak_gain }),
        peaks: pat.peaks.into_iter().take(MANIFEST_PEAKS).collect(),
    })
}

/// `‖a − b‖² / ‖b‖²`.
fn rel_error(a: &Field, b: &Field) -> f64 {
    (a - b).norm_squared() / b.norm_squared()
}

fn psis_demo(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Report, RunError> {
    let geom = cfg.geometry()?;
    let object = received_grid(&geom, &cfg.users(), 0.0)?;
    let reference = ReferenceWave::normal_incidence(1.0, &geom)?;
    let e_r = reference.field(&geom);

    let clean = record_psi_set(&object, &reference, &geom, &NoiseModel::noiseless())?;
    for (suffix, h) in [("hologram_0.csv", &clean.i0), ("hologram_half.csv", &clean.i_half), ("hologram_pi.csv", &clean.i_pi)] {
        let mut buf = Vec::new();
        h.write_csv(&mut buf)?;
        out.write(suffix, &buf)?;
    }

    let mut results = Csv::new(&["config_id", "snr_db", "trials", "psis_error_db", "raw_error_db"]);
    let mut trials_csv = Csv::new(&["config_id", "snr_db", "trial", "psis_error_db", "raw_error_db"]);
    let mut summary = Vec::new();
    for (config_id, &s) in cfg.noise.snr_db.iter().enumerate() {
        let base = derive_seed(cfg.noise.seed, config_id as u64);
        let errors: Vec<holosense::Result<(f64, f64)>> = (0..cfg.noise.trials)
            .into_par_iter()
            .map(|t| {
                let seed = derive_seed(base, t as u64);
                let noise = match s {
                    None => NoiseModel::noiseless(),
                    Some(db) => NoiseModel::for_snr(&object, db, seed)?,
                };
                let set = record_psi_set(&object, &reference, &geom, &noise)?;
                let psis = psis_recover(&set, &reference)?;
                let raw = naive_reconstruction_weights(&set.i0, &reference).zip_map(&e_r, |c, r| c / r.norm_sqr());
                Ok((rel_error(&psis, &object), rel_error(&raw, &object)))
            })
            .collect();
        let errors = errors.into_iter().collect::<holosense::Result<Vec<_>>>()?;
        let n = errors.len() as f64;
        let psis_mean = errors.iter().map(|e| e.0).sum::<f64>() / n;
        let raw_mean = errors.iter().map(|e| e.1).sum::<f64>() / n;
        for (t, (p, r)) in errors.iter().enumerate() {
            trials_csv.row([config_id.to_string(), snr(s), t.to_string(), num(ratio_to_db(*p)), num(ratio_to_db(*r))]);
        }
        results.row([
            config_id.to_string(),
            snr(s),
            errors.len().to_string(),
            num(ratio_to_db(psis_mean)),
            num(ratio_to_db(raw_mean)),
        ]);
        summary.push(json!({
            "config_id": config_id,
            "snr_db": s,
            "psis_error_db": ratio_to_db(psis_mean),
            "raw_error_db": ratio_to_db(raw_mean),
        }));
    }
    out.write_csv("results.csv", results)?;
    out.write_csv("trials.csv", trials_csv)?;
    Ok(Report {
        summary: Value::Array(summary),
        ..Default::default()
    })
}

#[derive(Serialize)]
struct PointSummary {
    config_id: usize,
    series: &'static str,
    n_t: usize,
    snr_db: Option<f64>,
    est_order: usize,
    failures: usize,
    nmse_db: f64,
}

fn write_sweep(mut pts: Vec<SweepPoint>, out: &mut Artifacts) -> Result<Report, RunError> {
    for (i, p) in pts.iter_mut().enumerate() {
        p.config_id = i;
    }
    let mut results = Csv::new(&[
        "config_id", "series", "n_v", "n_h", "n_t", "snr_db", "est_order", "trials", "failures", "nmse_db",
    ]);
    let mut trials = Csv::new(&["config_id", "n_t", "snr_db", "trial", "nmse_db"]);
    for p in &pts {
        results.row([
            p.config_id.to_string(),
            p.series.name().to_string(),
            p.n_v.to_string(),
            p.n_h.to_string(),
            p.n_t().to_string(),
            snr(p.snr_db),
            p.est_order.to_string(),
            p.summary.outcomes.len().to_string(),
            p.summary.failures.to_string(),
            num(p.summary.nmse_db),
        ]);
        for (t, o) in p.summary.outcomes.iter().enumerate() {
            trials.row([
                p.config_id.to_string(),
                p.n_t().to_string(),
                snr(p.snr_db),
                t.to_string(),
                num(ratio_to_db(o.ratio)),
            ]);
        }
    }
    out.write_csv("results.csv", results)?;
    out.write_csv("trials.csv", trials)?;
    let summary: Vec<PointSummary> = pts
        .iter()
        .map(|p| PointSummary {
            config_id: p.config_id,
            series: p.series.name(),
            n_t: p.n_t(),
            snr_db: p.snr_db,
            est_order: p.est_order,
            failures: p.summary.failures,
            nmse_db: p.summary.nmse_db,
        })
        .collect();
    Ok(Report {
        summary: serde_json::to_value(summary).unwrap_or(Value::Null),
        ..Default::default()
    })
}

fn bounds(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Report, RunError> {
    let b = &cfg.bounds;
    let seed = cfg.noise.seed;
    let mut checks: Vec<BoundCheck> = analysis::lemma1_monte_carlo(b.k, b.n, b.est_order, b.epsilon, b.draws, derive_seed(seed, 1))?;
    for (i, &k) in b.lemma2_k.iter().enumerate() {
        let mut part = analysis::lemma2_monte_carlo(k, b.lemma2_max_n, b.draws, derive_seed(seed, 100 + i as u64))?;
        for c in &mut part {
            c.bound_name = format!("lemma2_k{k}");
        }
        checks.extend(part);
    }
    checks.extend(analysis::lemma3_monte_carlo(b.k, b.n, b.delta, b.epsilon, b.draws, derive_seed(seed, 3))?);

    let mut csv = Csv::new(&["bound_name", "instance_id", "measured", "bound", "holds"]);
    let mut stats: BTreeMap<&str, (usize, usize, f64)> = BTreeMap::new();
    for c in &checks {
        csv.row([
            c.bound_name.clone(),
            c.instance_id.to_string(),
            num(c.measured),
            num(c.bound),
            c.holds.to_string(),
        ]);
        let e = stats.entry(c.bound_name.as_str()).or_insert((0, 0, 0.0));
        e.0 += 1;
        e.1 += usize::from(!c.holds);
        e.2 = e.2.max(c.measured / c.bound);
    }
    out.write_csv("results.csv", csv)?;
    let summary: Vec<Value> = stats
        .iter()
        .map(|(name, (n, bad, worst))| json!({ "bound_name": name, "instances": n, "violations": bad, "max_ratio": worst }))
        .collect();
    for s in &summary {
        log::info!("{s}");
    }
    Ok(Report {
        summary: Value::Array(summary),
        ..Default::default()
    })
}

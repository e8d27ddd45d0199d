//! Monte-Carlo runs of the full record → recover → segment pipeline.
//!
//! Trial `t` of a run seeded with `seed` draws its noise from
//! `derive_seed(seed, t)`. Trials are evaluated in parallel and reduced in
//! index order, so summaries do not depend on the worker count.

use std::f64::consts::PI;

use log::{debug, warn};
use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{rad, received_field, received_grid, Field, UpaGeometry, UserScenario};
use crate::error::{Error, Result};
use crate::holography::{naive_reconstruction_weights, psis_recover, record, record_psi_set, NoiseModel, ReferenceWave};
use crate::pmcs::{mean_nmse_db, segment, PmcsConfig, PmcsResult};
use crate::seed::derive_seed;

/// LOS user given by its arrival angles and composite gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub amplitude: f64,
    pub phase_deg: f64,
}

impl UserSpec {
    pub fn new(theta_deg: f64, phi_deg: f64, amplitude: f64, phase_deg: f64) -> Self {
        Self { theta_deg, phi_deg, amplitude, phase_deg }
    }

    pub fn b(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, rad(self.phase_deg))
    }

    pub fn scenario(&self) -> UserScenario {
        UserScenario::los(rad(self.theta_deg), rad(self.phi_deg), self.b())
    }
}

/// Anything that describes one user's propagation.
pub trait ToScenario {
    fn to_scenario(&self) -> UserScenario;
}

impl ToScenario for UserSpec {
    fn to_scenario(&self) -> UserScenario {
        self.scenario()
    }
}

impl ToScenario for UserScenario {
    fn to_scenario(&self) -> UserScenario {
        self.clone()
    }
}

/// The two-user scene used for the array-size and estimation-order sweeps.
pub fn two_user_scene() -> Vec<UserSpec> {
    vec![UserSpec::new(90.0, 0.0, 1.0, 0.0), UserSpec::new(30.0, 60.0, 0.8, 60.0)]
}

/// How the object field is obtained from the holograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Recovery {
    /// Three phase-shifted exposures.
    #[default]
    Psis,
    /// One exposure re-illuminated by the reference, `E_r I / |E_r|²`.
    Raw,
}

impl Recovery {
    pub fn name(&self) -> &'static str {
        match self {
            Recovery::Psis => "psis",
            Recovery::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub geom: UpaGeometry,
    pub users: Vec<UserScenario>,
    pub reference: ReferenceWave,
    pub pmcs: PmcsConfig,
    pub recovery: Recovery,
}

impl Pipeline {
    pub fn new<U: ToScenario>(geom: UpaGeometry, users: &[U], pmcs: PmcsConfig, recovery: Recovery) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::domain("scenario has no users"));
        }
        if pmcs.n_users != users.len() {
            return Err(Error::domain(format!(
                "pmcs expects {} users, scenario has {}",
                pmcs.n_users,
                users.len()
            )));
        }
        pmcs.validate(&geom)?;
        let users: Vec<UserScenario> = users.iter().map(ToScenario::to_scenario).collect();
        for u in &users {
            u.validate()?;
        }
        Ok(Self {
            reference: ReferenceWave::normal_incidence(1.0, &geom)?,
            geom,
            users,
            pmcs,
            recovery,
        })
    }

    /// Default order `P_e` on each axis.
    pub fn with_default_order<U: ToScenario>(geom: UpaGeometry, users: &[U], recovery: Recovery) -> Result<Self> {
        let n = users.len();
        let mut cfg = PmcsConfig::new(n, PmcsConfig::default_order(n, geom.n_h));
        cfg.est_order_v = PmcsConfig::default_order(n, geom.n_v);
        Self::new(geom, users, cfg, recovery)
    }

    pub fn object(&self) -> Result<Field> {
        received_grid(&self.geom, &self.users, 0.0)
    }

    /// Per-user true channels.
    pub fn truths(&self) -> Result<Vec<DVector<Complex64>>> {
        self.users
            .iter()
            .map(|u| received_field(&self.geom, std::slice::from_ref(u), 0.0))
            .collect()
    }

    /// Recovered object field under `noise`.
    pub fn recover(&self, noise: &NoiseModel) -> Result<Field> {
        let object = self.object()?;
        match self.recovery {
            Recovery::Psis => psis_recover(&record_psi_set(&object, &self.reference, &self.geom, noise)?, &self.reference),
            Recovery::Raw => {
                let holo = record(&object, &self.reference, &self.geom, &mut noise.source())?;
                let e_r = self.reference.field(&self.geom);
                Ok(naive_reconstruction_weights(&holo, &self.reference).zip_map(&e_r, |c, r| c / r.norm_sqr()))
            }
        }
    }

    /// Segmented and scored estimate for one noise draw, with the mean
    /// per-user NMSE ratio.
    pub fn run(&self, noise: &NoiseModel) -> Result<(PmcsResult, f64)> {
        let field = self.recover(noise)?;
        let mut res = segment(&field, &self.pmcs, &self.geom)?;
        let ratio = res.evaluate(&self.truths()?)?;
        Ok((res, ratio))
    }

    fn noise(&self, snr_db: Option<f64>, seed: u64) -> Result<NoiseModel> {
        match snr_db {
            None => Ok(NoiseModel::noiseless()),
            Some(s) => NoiseModel::for_snr(&self.object()?, s, seed),
        }
    }

    /// One trial; any pipeline error counts as a failure with ratio 1.
    pub fn trial(&self, snr_db: Option<f64>, seed: u64) -> TrialOutcome {
        let outcome = self.noise(snr_db, seed).and_then(|n| self.run(&n));
        match outcome {
            Ok((_, ratio)) => TrialOutcome { ratio, error: None },
            Err(e) => {
                debug!("trial with seed {seed:#x} failed: {e}");
                TrialOutcome {
                    ratio: 1.0,
                    error: Some(e.to_string()),
                }
            }
        }
    }

    /// `trials` independent trials at one noise level.
    pub fn monte_carlo(&self, snr_db: Option<f64>, trials: usize, seed: u64) -> McSummary {
        let outcomes: Vec<TrialOutcome> = (0..trials)
            .into_par_iter()
            .map(|t| self.trial(snr_db, derive_seed(seed, t as u64)))
            .collect();
        McSummary::from_outcomes(outcomes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Mean per-user `‖ĥ − h‖² / ‖h‖²`.
    pub ratio: f64,
    pub error: Option<String>,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub outcomes: Vec<TrialOutcome>,
    pub mean_ratio: f64,
    pub nmse_db: f64,
    pub failures: usize,
}

impl McSummary {
    pub fn from_outcomes(outcomes: Vec<TrialOutcome>) -> Self {
        let ratios: Vec<f64> = outcomes.iter().map(|o| o.ratio).collect();
        // fixed-order sum
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
        Self {
            nmse_db: mean_nmse_db(&ratios),
            failures: outcomes.iter().filter(|o| o.failed()).count(),
            mean_ratio,
            outcomes,
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub config_id: usize,
    pub series: Recovery,
    pub n_v: usize,
    pub n_h: usize,
    pub snr_db: Option<f64>,
    pub est_order: usize,
    pub summary: McSummary,
}

impl SweepPoint {
    pub fn n_t(&self) -> usize {
        self.n_v * self.n_h
    }
}

fn point(config_id: usize, p: &Pipeline, snr_db: Option<f64>, trials: usize, seed: u64) -> SweepPoint {
    SweepPoint {
        config_id,
        series: p.recovery,
        n_v: p.geom.n_v,
        n_h: p.geom.n_h,
        snr_db,
        est_order: p.pmcs.est_order_h,
        summary: p.monte_carlo(snr_db, trials, derive_seed(seed, config_id as u64)),
    }
}

/// NMSE against SNR for each recovery series.
pub fn nmse_vs_snr<U: ToScenario>(
    geom: UpaGeometry,
    users: &[U],
    pmcs: PmcsConfig,
    series: &[Recovery],
    snrs: &[Option<f64>],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &rec in series {
        let p = Pipeline::new(geom, users, pmcs, rec)?;
        for &snr in snrs {
            out.push(point(out.len(), &p, snr, trials, seed));
        }
    }
    Ok(out)
}

/// Square `(side, side)` shapes for a list of unit counts.
pub fn square_sizes(n_t: &[usize]) -> Result<Vec<(usize, usize)>> {
    n_t.iter()
        .map(|&n| {
            let side = (n as f64).sqrt().round() as usize;
            if side * side == n && side > 0 {
                Ok((side, side))
            } else {
                Err(Error::domain(format!("array size {n} is not a perfect square")))
            }
        })
        .collect()
}

/// NMSE against array shape at one SNR, default orders per shape. Shapes
/// too small for the user count are skipped with a warning.
#[allow(clippy::too_many_arguments)]
pub fn nmse_vs_size<U: ToScenario>(
    shapes: &[(usize, usize)],
    spacing_wl: f64,
    f_c: f64,
    users: &[U],
    recovery: Recovery,
    snr_db: Option<f64>,
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let n = users.len();
    let mut out = Vec::new();
    for (config_id, &(n_v, n_h)) in shapes.iter().enumerate() {
        if n_v < 2 * n || n_h < 2 * n {
            warn!("skipping {n_v}x{n_h}: {n} users need at least {} samples per axis", 2 * n);
            continue;
        }
        let geom = UpaGeometry::new(n_v, n_h, spacing_wl, spacing_wl, f_c)?;
        let p = Pipeline::with_default_order(geom, users, recovery)?;
        out.push(point(config_id, &p, snr_db, trials, seed));
    }
    Ok(out)
}

/// NMSE against estimation order (both axes) at one SNR.
pub fn nmse_vs_order<U: ToScenario>(
    geom: UpaGeometry,
    users: &[U],
    orders: &[usize],
    recovery: Recovery,
    snr_db: Option<f64>,
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    orders
        .iter()
        .enumerate()
        .map(|(config_id, &p_e)| {
            let p = Pipeline::new(geom, users, PmcsConfig::new(users.len(), p_e), recovery)?;
            Ok(point(config_id, &p, snr_db, trials, seed))
        })
        .collect()
}

/// Every admissible order `N..=K-N` for `k` samples.
pub fn admissible_orders(n_users: usize, k: usize) -> Vec<usize> {
    if k < 2 * n_users {
        return Vec::new();
    }
    (n_users..=k - n_users).collect()
}

/// Mean NMSE (dB) per unit count for square half-wavelength arrays.
pub fn theorem1_trend<U: ToScenario>(
    users: &[U],
    snr_db: Option<f64>,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let shapes = square_sizes(sizes)?;
    let f_c = UpaGeometry::default().f_c;
    Ok(nmse_vs_size(&shapes, 0.5, f_c, users, Recovery::Psis, snr_db, trials, seed)?
        .into_iter()
        .map(|p| (p.n_t(), p.summary.nmse_db))
        .collect())
}

/// Users at random angles whose spatial frequencies are at least `min_gap`
/// apart on both axes, with amplitudes at least `min_gap` apart in modulus.
pub fn random_separated_users<R: rand::Rng>(rng: &mut R, n: usize, min_gap: f64, geom: &UpaGeometry) -> Vec<UserSpec> {
    let gap = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    };
    loop {
        let users: Vec<UserSpec> = (0..n)
            .map(|_| {
                UserSpec::new(
                    rng.random_range(10.0..170.0),
                    rng.random_range(-80.0..80.0),
                    rng.random_range(0.5..1.5),
                    rng.random_range(-180.0..180.0),
                )
            })
            .collect();
        let phases: Vec<(f64, f64)> = users
            .iter()
            .map(|u| {
                let (th, ph) = (rad(u.theta_deg), rad(u.phi_deg));
                (geom.vertical_phase(th), geom.horizontal_phase(th, ph))
            })
            .collect();
        let ok = (0..n).all(|i| {
            (i + 1..n).all(|j| {
                gap(phases[i].0, phases[j].0) >= min_gap
                    && gap(phases[i].1, phases[j].1) >= min_gap
                    && (users[i].amplitude - users[j].amplitude).abs() >= min_gap
            })
        });
        if ok {
            return users;
        }
    }
}

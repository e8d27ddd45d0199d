//! Prony-based multi-user channel segmentation.
//!
//! The recovered object field of a multi-user LOS scene is separable per
//! user: `y(m, n) = Σ_u b_u z_{u,v}^m z_{u,h}^n`. The first column and the
//! first row are each a sum of `N` undamped exponentials sharing the same
//! amplitudes `b_u`. Both are run through the Prony engine, the two estimate
//! sets are matched by amplitude, and each user's channel is rebuilt from its
//! `(z_h, z_v, b)` triple.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{Field, UpaGeometry};
use crate::error::{Error, Result};
use crate::prony::{self, PronyConfig, Solver};

/// NMSE reported for an exact estimate.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Exhaustive assignment is used up to this many users.
const EXHAUSTIVE_PAIRING_MAX: usize = 8;
const AMBIGUITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmcsConfig {
    pub n_users: usize,
    pub est_order_h: usize,
    pub est_order_v: usize,
    pub root_tolerance: f64,
    pub solver: Solver,
    /// Largest accepted pair distance, as a multiple of the median `|b̂|`.
    pub pairing_tolerance: f64,
}

impl PmcsConfig {
    pub fn new(n_users: usize, est_order: usize) -> Self {
        Self {
            n_users,
            est_order_h: est_order,
            est_order_v: est_order,
            root_tolerance: 0.1,
            solver: Solver::Pseudoinverse,
            pairing_tolerance: 2.0,
        }
    }

    /// Default order for a square array: `5/8` of the side length, clamped
    /// into the admissible range (10 for a 16 x 16 surface).
    pub fn default_order(n_users: usize, samples: usize) -> usize {
        let pe = (5 * samples + 4) / 8;
        pe.clamp(n_users, samples.saturating_sub(n_users).max(n_users))
    }

    fn prony(&self, est_order: usize) -> PronyConfig {
        PronyConfig {
            n_signals: self.n_users,
            est_order,
            root_tolerance: self.root_tolerance,
            solver: self.solver,
        }
    }

    pub fn validate(&self, geom: &UpaGeometry) -> Result<()> {
        self.prony(self.est_order_h)
            .validate(geom.n_h)
            .map_err(|e| Error::domain(format!("horizontal: {e}")))?;
        self.prony(self.est_order_v)
            .validate(geom.n_v)
            .map_err(|e| Error::domain(format!("vertical: {e}")))?;
        if !(self.pairing_tolerance > 0.0) {
            return Err(Error::domain("pairing tolerance must be positive"));
        }
        let half = geom.lambda0 / 2.0;
        if geom.d_v > half * (1.0 + 1e-12) || geom.d_h > half * (1.0 + 1e-12) {
            return Err(Error::domain(
                "unit spacing above half a wavelength aliases the spatial frequency; unsupported",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEstimate {
    /// Horizontal root projected onto the unit circle.
    pub z_h: Complex64,
    /// Vertical root projected onto the unit circle.
    pub z_v: Complex64,
    /// Mean of the paired row and column amplitudes.
    pub b: Complex64,
    pub b_h: Complex64,
    pub b_v: Complex64,
    /// Largest `||z| - 1|` of the raw roots.
    pub root_offset: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub channel: DVector<Complex64>,
    pub nmse_db: Option<f64>,
}

impl UserEstimate {
    /// Raw roots stayed within the unit-circle band.
    pub fn accepted(&self, root_tolerance: f64) -> bool {
        self.root_offset <= root_tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmcsResult {
    pub per_user: Vec<UserEstimate>,
    pub nmse_db: Option<f64>,
}

/// First row (`y_h`, vertical index 0) and first column (`y_v`, horizontal index 0).
pub fn extract_row_col_samples(grid: &Field) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if grid.is_empty() {
        return Err(Error::domain("empty field"));
    }
    let y_h = grid.row(0).iter().copied().collect();
    let y_v = grid.column(0).iter().copied().collect();
    Ok((y_h, y_v))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Assignment `perm` with `b_h[i]` paired to `b_v[perm[i]]`, minimizing
/// `Σ |b_h(i) − b_v(perm(i))|`.
pub fn pair_estimates(b_h: &[Complex64], b_v: &[Complex64], tol: f64) -> Result<Vec<usize>> {
    let n = b_h.len();
    if b_v.len() != n {
        return Err(Error::domain(format!("cannot pair {} with {} amplitudes", n, b_v.len())));
    }
    if n <= 1 {
        return Ok((0..n).collect());
    }
    let cost = |perm: &[usize]| -> f64 { perm.iter().enumerate().map(|(i, &j)| (b_h[i] - b_v[j]).norm()).sum() };
    let scale = median(b_h.iter().chain(b_v).map(|b| b.norm()).collect());

    let (best, ranked) = if n <= EXHAUSTIVE_PAIRING_MAX {
        let mut ranked: Vec<(Vec<usize>, f64)> = permutations(n)
            .into_iter()
            .map(|p| {
                let c = cost(&p);
                (p, c)
            })
            .collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        if ranked[1].1 - ranked[0].1 <= AMBIGUITY_EPS * scale.max(1.0) {
            return Err(Error::Pairing {
                reason: format!(
                    "assignments tie at cost {:.3e}; amplitudes are not distinct across users",
                    ranked[0].1
                ),
                candidates: ranked.into_iter().take(4).collect(),
            });
        }
        (ranked[0].0.clone(), ranked)
    } else {
        let mut perm = vec![usize::MAX; n];
        let mut used_h = vec![false; n];
        let mut used_v = vec![false; n];
        let mut pairs: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, (b_h[i] - b_v[j]).norm()))
            .collect();
        pairs.sort_by(|a, b| a.2.total_cmp(&b.2));
        for (i, j, _) in pairs {
            if !used_h[i] && !used_v[j] {
                perm[i] = j;
                used_h[i] = true;
                used_v[j] = true;
            }
        }
        let c = cost(&perm);
        (perm.clone(), vec![(perm, c)])
    };

    let worst = best.iter().enumerate().map(|(i, &j)| (b_h[i] - b_v[j]).norm()).fold(0.0, f64::max);
    if worst > tol * scale {
        return Err(Error::Pairing {
            reason: format!(
                "best assignment has a pair {worst:.3e} apart, above {tol} x median |b| = {:.3e}",
                tol * scale
            ),
            candidates: ranked.into_iter().take(4).collect(),
        });
    }
    Ok(best)
}

/// `b z_v^m z_h^n` at every unit, flattened in unit order.
pub fn reconstruct_channel(z_h: Complex64, z_v: Complex64, b: Complex64, geom: &UpaGeometry) -> DVector<Complex64> {
    let col: Vec<Complex64> = (0..geom.n_v).map(|m| z_v.powu(m as u32)).collect();
    let mut out = DVector::zeros(geom.n_t());
    for n in 0..geom.n_h {
        let row = b * z_h.powu(n as u32);
        for m in 0..geom.n_v {
            out[geom.unit_index(m, n)] = row * col[m];
        }
    }
    out
}

/// `‖ĥ − h‖² / ‖h‖²`.
pub fn nmse_ratio(estimate: &DVector<Complex64>, truth: &DVector<Complex64>) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::domain(format!("length mismatch {} vs {}", estimate.len(), truth.len())));
    }
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return Err(Error::domain("reference channel has zero norm"));
    }
    Ok((estimate - truth).norm_squared() / denom)
}

/// Ratio in dB, clamped at [`NMSE_FLOOR_DB`].
pub fn ratio_to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        return NMSE_FLOOR_DB;
    }
    (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
}

/// `10 log10(‖ĥ − h‖² / ‖h‖²)`.
pub fn nmse(estimate: &DVector<Complex64>, truth: &DVector<Complex64>) -> Result<f64> {
    nmse_ratio(estimate, truth).map(ratio_to_db)
}

/// NMSE of a Monte-Carlo run: the log of the mean ratio.
pub fn mean_nmse_db(ratios: &[f64]) -> f64 {
    if ratios.is_empty() {
        return f64::NAN;
    }
    ratio_to_db(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

fn angles_from_roots(z_h: Complex64, z_v: Complex64, geom: &UpaGeometry) -> (f64, f64) {
    let cos_theta = (geom.lambda0 * z_v.arg() / (2.0 * PI * geom.d_v)).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let sin_theta = theta.sin();
    let phi = if sin_theta < 1e-12 {
        0.0
    } else {
        (geom.lambda0 * z_h.arg() / (2.0 * PI * geom.d_h * sin_theta)).clamp(-1.0, 1.0).asin()
    };
    (theta.to_degrees(), phi.to_degrees())
}

fn unit(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

/// Run the full segmentation on a recovered object field.
///
/// The azimuth is reported in the front half-space `[-90°, 90°]`; a planar
/// array cannot tell `φ` from `180° − φ`.
pub fn segment(field: &Field, cfg: &PmcsConfig, geom: &UpaGeometry) -> Result<PmcsResult> {
    cfg.validate(geom)?;
    if field.nrows() != geom.n_v || field.ncols() != geom.n_h {
        return Err(Error::domain("field shape does not match geometry"));
    }
    let (y_h, y_v) = extract_row_col_samples(field)?;
    let est_h = prony::estimate(&y_h, &cfg.prony(cfg.est_order_h))?;
    let est_v = prony::estimate(&y_v, &cfg.prony(cfg.est_order_v))?;
    if est_h.roots_signal.len() < cfg.n_users || est_v.roots_signal.len() < cfg.n_users {
        return Err(Error::Estimation("fewer signal roots than users".into()));
    }
    let perm = pair_estimates(est_h.amplitudes.as_slice(), est_v.amplitudes.as_slice(), cfg.pairing_tolerance)?;

    let per_user = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let (raw_h, raw_v) = (est_h.roots_signal[i], est_v.roots_signal[j]);
            let (b_h, b_v) = (est_h.amplitudes[i], est_v.amplitudes[j]);
            let (z_h, z_v) = (unit(raw_h), unit(raw_v));
            let b = (b_h + b_v) * 0.5;
            let (theta_deg, phi_deg) = angles_from_roots(z_h, z_v, geom);
            UserEstimate {
                z_h,
                z_v,
                b,
                b_h,
                b_v,
                root_offset: (raw_h.norm() - 1.0).abs().max((raw_v.norm() - 1.0).abs()),
                theta_deg,
                phi_deg,
                channel: reconstruct_channel(z_h, z_v, b, geom),
                nmse_db: None,
            }
        })
        .collect();
    Ok(PmcsResult { per_user, nmse_db: None })
}

impl PmcsResult {
    /// Match estimated users to `truths` (minimum total NMSE ratio), fill in
    /// per-user NMSE and return the mean ratio across users.
    pub fn evaluate(&mut self, truths: &[DVector<Complex64>]) -> Result<f64> {
        let n = self.per_user.len();
        if truths.len() != n {
            return Err(Error::domain(format!("{} estimated users vs {} true channels", n, truths.len())));
        }
        let ratios: Vec<Vec<f64>> = self
            .per_user
            .iter()
            .map(|u| truths.iter().map(|t| nmse_ratio(&u.channel, t)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let assign = if n <= EXHAUSTIVE_PAIRING_MAX {
            permutations(n)
                .into_iter()
                .min_by(|a, b| {
                    let ca: f64 = a.iter().enumerate().map(|(i, &j)| ratios[i][j]).sum();
                    let cb: f64 = b.iter().enumerate().map(|(i, &j)| ratios[i][j]).sum();
                    ca.total_cmp(&cb)
                })
                .unwrap_or_default()
        } else {
            (0..n).collect()
        };
        let mut total = 0.0;
        for (i, &j) in assign.iter().enumerate() {
            self.per_user[i].nmse_db = Some(ratio_to_db(ratios[i][j]));
            total += ratios[i][j];
        }
        let mean = total / n.max(1) as f64;
        self.nmse_db = Some(ratio_to_db(mean));
        Ok(mean)
    }

    pub fn to_record(&self) -> PmcsRecord {
        PmcsRecord {
            users: self
                .per_user
                .iter()
                .map(|u| UserRecord {
                    theta_deg: u.theta_deg,
                    phi_deg: u.phi_deg,
                    z_h: [u.z_h.re, u.z_h.im],
                    z_v: [u.z_v.re, u.z_v.im],
                    b: [u.b.re, u.b.im],
                    nmse_db: u.nmse_db,
                })
                .collect(),
            nmse_db: self.nmse_db,
        }
    }
}

/// JSON-friendly view of a [`PmcsResult`]; complex values as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmcsRecord {
    pub users: Vec<UserRecord>,
    pub nmse_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub z_h: [f64; 2],
    pub z_v: [f64; 2],
    pub b: [f64; 2],
    pub nmse_db: Option<f64>,
}

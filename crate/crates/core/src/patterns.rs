//! Array-factor radiation patterns over an angular grid.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{rad, UpaGeometry};
use crate::error::{Error, Result};
use crate::holography::format_sig12;

/// Peaks below this level are not reported.
pub const PEAK_FLOOR_DB: f64 = -40.0;
/// Stand-in for `10 log10(0)`.
pub const GAIN_FLOOR_DB: f64 = -300.0;
/// Neighbors closer than this (relative) count as equal when picking peaks.
const TIE_RTOL: f64 = 1e-10;
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    /// Inclusive elevation range in degrees.
    pub theta_range: [f64; 2],
    /// Inclusive azimuth range in degrees.
    pub phi_range: [f64; 2],
    pub step: f64,
}

impl AngularGrid {
    pub fn new(theta_range: [f64; 2], phi_range: [f64; 2], step: f64) -> Result<Self> {
        let g = Self { theta_range, phi_range, step };
        g.validate()?;
        Ok(g)
    }

    /// `θ ∈ [0°, 180°]`, `φ ∈ (−180°, 180°]`.
    pub fn full_circle(step: f64) -> Result<Self> {
        Self::new([0.0, 180.0], [-180.0 + step, 180.0], step)
    }

    /// `θ ∈ [0°, 180°]`, `φ ∈ [−90°, 90°]`.
    pub fn front(step: f64) -> Result<Self> {
        Self::new([0.0, 180.0], [-90.0, 90.0], step)
    }

    fn count(lo: f64, hi: f64, step: f64) -> Option<usize> {
        let q = (hi - lo) / step;
        let r = q.round();
        ((q - r).abs() < GRID_EPS * r.max(1.0) && r >= 1.0).then_some(r as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::domain(format!("grid step must be positive, got {}", self.step)));
        }
        let [t0, t1] = self.theta_range;
        let [p0, p1] = self.phi_range;
        if !(0.0..=180.0).contains(&t0) || !(0.0..=180.0).contains(&t1) || t0 > t1 {
            return Err(Error::domain(format!("theta range [{t0}, {t1}] outside [0, 180]")));
        }
        if p0 <= -180.0 || p1 > 180.0 || p0 > p1 {
            return Err(Error::domain(format!("phi range [{p0}, {p1}] outside (-180, 180]")));
        }
        if Self::count(t0, t1, self.step).is_none() || Self::count(p0, p1, self.step).is_none() {
            return Err(Error::domain(format!(
                "step {} must divide both ranges into at least two points",
                self.step
            )));
        }
        Ok(())
    }

    pub fn thetas(&self) -> Vec<f64> {
        let [lo, hi] = self.theta_range;
        let n = Self::count(lo, hi, self.step).unwrap_or(1);
        (0..n).map(|i| lo + i as f64 * self.step).collect()
    }

    pub fn phis(&self) -> Vec<f64> {
        let [lo, hi] = self.phi_range;
        let n = Self::count(lo, hi, self.step).unwrap_or(1);
        (0..n).map(|i| lo + i as f64 * self.step).collect()
    }

    pub fn len(&self) -> usize {
        self.thetas().len() * self.phis().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The azimuth axis closes on itself.
    pub fn phi_wraps(&self) -> bool {
        let [lo, hi] = self.phi_range;
        (hi - lo + self.step - 360.0).abs() < GRID_EPS * 360.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternResult {
    pub grid: AngularGrid,
    /// Rows follow `grid.thetas()`, columns `grid.phis()`.
    pub gain_db: DMatrix<f64>,
    /// Largest linear gain before normalization.
    pub peak_gain: f64,
    pub peaks: Vec<Peak>,
}

/// Linear `|a(θ,φ)^H w|²` at every grid point.
pub fn raw_gain(weights: &DVector<Complex64>, geom: &UpaGeometry, grid: &AngularGrid) -> Result<DMatrix<f64>> {
    if weights.len() != geom.n_t() {
        return Err(Error::domain(format!("{} weights for {} units", weights.len(), geom.n_t())));
    }
    grid.validate()?;
    let thetas = grid.thetas();
    let phis = grid.phis();
    let rows: Vec<Vec<f64>> = thetas
        .par_iter()
        .map(|&th| {
            let th = rad(th);
            // fold the vertical sum first: u_n = Σ_m conj(a_v[m]) w[m, n]
            let step_v = geom.vertical_phase(th);
            let u: Vec<Complex64> = (0..geom.n_h)
                .map(|n| {
                    (0..geom.n_v)
                        .map(|m| Complex64::from_polar(1.0, -step_v * m as f64) * weights[geom.unit_index(m, n)])
                        .sum()
                })
                .collect();
            phis.iter()
                .map(|&ph| {
                    let step_h = geom.horizontal_phase(th, rad(ph));
                    let s: Complex64 = u
                        .iter()
                        .enumerate()
                        .map(|(n, un)| Complex64::from_polar(1.0, -step_h * n as f64) * un)
                        .sum();
                    s.norm_sqr()
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(thetas.len(), phis.len(), |i, j| rows[i][j]))
}

fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(GAIN_FLOOR_DB)
    } else {
        GAIN_FLOOR_DB
    }
}

/// 8-neighbor local maxima of `values` above `floor`, sorted by value.
///
/// Equal neighbors (plateaus) resolve to the first cell in row-major order.
/// Azimuth wraps around when the grid covers the full circle.
pub fn local_maxima(values: &DMatrix<f64>, grid: &AngularGrid, floor: f64) -> Vec<(usize, usize)> {
    let (rows, cols) = values.shape();
    let wrap = grid.phi_wraps();
    let mut out = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let v = values[(i, j)];
            if v <= floor {
                continue;
            }
            let mut is_peak = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = i as i64 + di;
                    let mut nj = j as i64 + dj;
                    if ni < 0 || ni >= rows as i64 {
                        continue;
                    }
                    if nj < 0 || nj >= cols as i64 {
                        if !wrap {
                            continue;
                        }
                        nj = nj.rem_euclid(cols as i64);
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if (ni, nj) == (i, j) {
                        continue;
                    }
                    let w = values[(ni, nj)];
                    let tie = (v - w).abs() <= TIE_RTOL * v.abs().max(w.abs());
                    let earlier = (ni, nj) < (i, j);
                    if w > v && !tie || tie && earlier {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if is_peak {
                out.push((i, j));
            }
        }
    }
    out.sort_by(|a, b| values[*b].total_cmp(&values[*a]));
    out
}

/// Normalized pattern `|a^H w|² / max` in dB with its peaks.
pub fn array_pattern(weights: &DVector<Complex64>, geom: &UpaGeometry, grid: &AngularGrid) -> Result<PatternResult> {
    if weights.iter().all(|w| *w == Complex64::new(0.0, 0.0)) {
        return Err(Error::domain("all weights are zero"));
    }
    let raw = raw_gain(weights, geom, grid)?;
    let peak_gain = raw.max();
    if !(peak_gain > 0.0) {
        return Err(Error::domain("pattern vanishes over the whole grid"));
    }
    let gain_db = raw.map(|g| to_db(g / peak_gain));
    let (thetas, phis) = (grid.thetas(), grid.phis());
    let peaks = local_maxima(&gain_db, grid, PEAK_FLOOR_DB)
        .into_iter()
        .map(|(i, j)| Peak {
            theta_deg: thetas[i],
            phi_deg: phis[j],
            gain_db: gain_db[(i, j)],
        })
        .collect();
    Ok(PatternResult {
        grid: *grid,
        gain_db,
        peak_gain,
        peaks,
    })
}

impl PatternResult {
    /// Rows `theta_deg,phi_deg,gain_db` in grid scan order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "theta_deg,phi_deg,gain_db")?;
        let (thetas, phis) = (self.grid.thetas(), self.grid.phis());
        for (i, th) in thetas.iter().enumerate() {
            for (j, ph) in phis.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{}",
                    format_sig12(*th),
                    format_sig12(*ph),
                    format_sig12(self.gain_db[(i, j)])
                )?;
            }
        }
        Ok(())
    }

    /// Gain in dB at the grid point closest to `(theta, phi)`.
    pub fn gain_at(&self, theta_deg: f64, phi_deg: f64) -> f64 {
        let nearest = |axis: &[f64], x: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map_or(0, |(i, _)| i)
        };
        let i = nearest(&self.grid.thetas(), theta_deg);
        let j = nearest(&self.grid.phis(), phi_deg);
        self.gain_db[(i, j)]
    }
}

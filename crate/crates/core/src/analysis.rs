//! Error bounds for the segmentation estimator and their empirical checks.
//!
//! Bound quantities are measured on the concrete instance (noiseless and
//! noisy matrices, drawn perturbations) rather than bounded further.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Field, UpaGeometry};
use crate::error::{Error, Result};
use crate::patterns::{local_maxima, raw_gain, AngularGrid};
use crate::prony::{self, PronyConfig, Solver};
use crate::seed::{derive_seed, rng_from_seed};

/// Relative slack on float comparisons against a bound.
const BOUND_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundInputs {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub n: usize,
    pub p_e: usize,
    pub sigma1: f64,
    pub delta_sigma1_sq: f64,
    pub norm_y1: f64,
    pub norm_y0: f64,
    pub norm_h: f64,
    pub beta0_abs: f64,
    pub q: f64,
}

/// One measured-vs-bound comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound_name: String,
    pub instance_id: u64,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(name: &str, instance_id: u64, measured: f64, bound: f64) -> Self {
        Self {
            bound_name: name.to_string(),
            instance_id,
            measured,
            bound,
            holds: measured.is_finite() && measured <= bound * (1.0 + BOUND_RTOL),
        }
    }
}

/// Root-error bound of the segmentation estimator for one root.
pub fn lemma1_bound(inp: &BoundInputs) -> Result<f64> {
    if !(inp.beta0_abs > 0.0) {
        return Err(Error::domain("beta0 is zero: coincident roots"));
    }
    if !(inp.sigma1 > 0.0) {
        return Err(Error::domain("sigma1 must be positive"));
    }
    let kn = inp.k.saturating_sub(inp.n) as f64;
    let t1 = inp.norm_y1 * kn.sqrt() * inp.epsilon / (inp.sigma1 * inp.sigma1);
    let t2 = inp.norm_y0 * kn * inp.epsilon;
    let t3 = inp.delta_sigma1_sq * inp.norm_h;
    Ok((inp.p_e as f64).sqrt() / inp.beta0_abs * (t1 + t2 + t3))
}

/// Amplitude-error bound.
pub fn lemma3_bound(inp: &BoundInputs, norm_y: f64) -> f64 {
    let k = inp.k as f64;
    3f64.sqrt() / k * (k - 0.5).powf(1.5) * (inp.n as f64).sqrt() * inp.delta * norm_y + 3f64.sqrt() * inp.epsilon
}

/// `π √(2K) / K`.
pub fn separation_threshold(k: usize) -> f64 {
    PI * (2.0 * k as f64).sqrt() / k as f64
}

/// Smallest circular gap between the angular frequencies of `z`.
pub fn min_circular_gap(z: &[Complex64]) -> f64 {
    if z.len() < 2 {
        return TAU;
    }
    let mut w: Vec<f64> = z.iter().map(|x| x.arg().rem_euclid(TAU)).collect();
    w.sort_by(f64::total_cmp);
    let wrap = w[0] + TAU - w[w.len() - 1];
    w.windows(2).map(|p| p[1] - p[0]).fold(wrap, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub q: f64,
    pub separation_ok: bool,
    pub norm_l_sq: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `‖(Φ^H Φ)^{-1} Φ^H‖₂²` for nodes `z` and `k` samples, against `3/K`.
pub fn lemma2_check(z: &[Complex64], k: usize) -> Result<Lemma2Report> {
    if z.is_empty() || k < z.len() {
        return Err(Error::domain(format!("{} nodes need at least as many samples, got {k}", z.len())));
    }
    if let Some(bad) = z.iter().find(|x| (x.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::domain(format!("node {bad} is off the unit circle")));
    }
    let q = min_circular_gap(z);
    if q < 1e-12 {
        return Err(Error::domain("repeated node"));
    }
    let phi = prony::vandermonde(z, k);
    let gram = phi.adjoint() * &phi;
    let inv = gram
        .try_inverse()
        .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    let l = inv * phi.adjoint();
    let norm_l = prony::singular_values(&l)?.first().copied().unwrap_or(0.0);
    let norm_l_sq = norm_l * norm_l;
    let bound = 3.0 / k as f64;
    Ok(Lemma2Report {
        q,
        separation_ok: q > separation_threshold(k),
        norm_l_sq,
        bound,
        holds: norm_l_sq <= bound * (1.0 + BOUND_RTOL),
    })
}

/// Random node sets just above the separation threshold, with `N` drawn
/// uniformly from the counts that fit on the circle (capped at `max_n`).
pub fn lemma2_monte_carlo(k: usize, max_n: usize, draws: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    let gap = separation_threshold(k) * (1.0 + 1e-9);
    let fit = ((TAU / gap).ceil() as usize).saturating_sub(1).min(k).min(max_n);
    if fit == 0 {
        return Err(Error::domain(format!("no node set of size >= 1 fits with K = {k}")));
    }
    (0..draws)
        .map(|d| {
            let mut rng = rng_from_seed(derive_seed(seed, d as u64));
            let n = rng.random_range(1..=fit);
            let omega = random_separated_frequencies(&mut rng, n, gap)?;
            let z: Vec<Complex64> = omega.iter().map(|w| Complex64::from_polar(1.0, *w)).collect();
            let r = lemma2_check(&z, k)?;
            Ok(BoundCheck::new("lemma2", d as u64, r.norm_l_sq, r.bound))
        })
        .collect()
}

/// `n` angular frequencies with circular gaps of at least `gap`, uniformly
/// placed otherwise.
pub fn random_separated_frequencies<R: Rng>(rng: &mut R, n: usize, gap: f64) -> Result<Vec<f64>> {
    if n as f64 * gap >= TAU {
        return Err(Error::domain(format!("{n} frequencies cannot be {gap} apart on the circle")));
    }
    let span = TAU - n as f64 * gap;
    let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * span).collect();
    u.sort_by(f64::total_cmp);
    let rot = rng.random::<f64>() * TAU;
    Ok(u.iter().enumerate().map(|(i, x)| (x + i as f64 * gap + rot).rem_euclid(TAU)).collect())
}

/// Point uniform in the disk of radius `r`.
pub fn disk_sample<R: Rng>(rng: &mut R, r: f64) -> Complex64 {
    Complex64::from_polar(r * rng.random::<f64>().sqrt(), rng.random::<f64>() * TAU)
}

fn poly_derivative(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    // coeffs[i] multiplies z^(deg - i)
    let deg = coeffs.len() - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, c) in coeffs.iter().enumerate().take(deg) {
        acc = acc * z + c * (deg - i) as f64;
    }
    acc
}

/// Root-error bound against the measured error for every signal root of one
/// noisy instance `y + w`.
pub fn lemma1_verify(
    z: &[Complex64],
    b: &[Complex64],
    k: usize,
    p_e: usize,
    noise: &[Complex64],
    instance_id: u64,
) -> Result<Vec<BoundCheck>> {
    let n = z.len();
    if noise.len() != k || b.len() != n {
        return Err(Error::domain("noise or amplitude length mismatch"));
    }
    let cfg = PronyConfig::new(n, p_e);
    cfg.validate(k)?;
    let clean = prony::synthesize(z, b, k);
    let noisy: Vec<Complex64> = clean.iter().zip(noise).map(|(y, w)| y + w).collect();

    let y = prony::build_data_matrix(&clean, p_e)?;
    let y_noisy = prony::build_data_matrix(&noisy, p_e)?;
    let y1 = y.columns(1, p_e).into_owned();
    let y1_noisy = y_noisy.columns(1, p_e).into_owned();
    let y0 = y.column(0).into_owned();
    let sigma1 = prony::singular_values(&y1)?[0];
    let sigma1_noisy = prony::singular_values(&y1_noisy)?[0];
    let h = prony::solve_min_norm(&y, Some(n), Solver::Pseudoinverse)?;
    let norm_h = h.rows(1, p_e).norm();
    let epsilon = noise.iter().map(|w| w.norm()).fold(0.0, f64::max);

    let est = prony::estimate(&noisy, &cfg);
    let mut used = vec![false; n];
    z.iter()
        .map(|&zn| {
            let beta0 = poly_derivative(h.as_slice(), zn).norm();
            let inputs = BoundInputs {
                epsilon,
                k,
                n,
                p_e,
                sigma1,
                delta_sigma1_sq: (sigma1_noisy * sigma1_noisy - sigma1 * sigma1).abs(),
                norm_y1: sigma1,
                norm_y0: y0.norm(),
                norm_h,
                beta0_abs: beta0,
                ..Default::default()
            };
            let bound = lemma1_bound(&inputs)?;
            let measured = match &est {
                Ok(e) => {
                    let best = (0..n)
                        .filter(|&i| !used[i])
                        .min_by(|&a, &c| (e.roots_signal[a] - zn).norm().total_cmp(&(e.roots_signal[c] - zn).norm()));
                    best.map_or(f64::INFINITY, |i| {
                        used[i] = true;
                        (e.roots_signal[i] - zn).norm()
                    })
                }
                Err(_) => f64::INFINITY,
            };
            Ok(BoundCheck::new("lemma1", instance_id, measured, bound))
        })
        .collect()
}

/// Random instances for the root-error bound: unit-modulus roots separated
/// by at least the resolution threshold, unit-scale amplitudes and noise
/// uniform in the disk of radius `epsilon`.
pub fn lemma1_monte_carlo(k: usize, n: usize, p_e: usize, epsilon: f64, draws: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::with_capacity(draws * n);
    for d in 0..draws {
        let mut rng = rng_from_seed(derive_seed(seed, d as u64));
        let omega = random_separated_frequencies(&mut rng, n, separation_threshold(k))?;
        let z: Vec<Complex64> = omega.iter().map(|w| Complex64::from_polar(1.0, *w)).collect();
        let b: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(0.5 + rng.random::<f64>(), rng.random::<f64>() * TAU))
            .collect();
        let noise: Vec<Complex64> = (0..k).map(|_| disk_sample(&mut rng, epsilon)).collect();
        out.extend(lemma1_verify(&z, &b, k, p_e, &noise, d as u64)?);
    }
    Ok(out)
}

/// Wrapped difference of two angles, in `[0, π]`.
fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Amplitude-error bound against the measured error when the amplitudes are
/// fitted at perturbed frequencies `omega_hat` to noisy samples.
pub fn lemma3_verify(
    omega: &[f64],
    b: &[Complex64],
    omega_hat: &[f64],
    noise: &[Complex64],
    instance_id: u64,
) -> Result<BoundCheck> {
    let (n, k) = (omega.len(), noise.len());
    if b.len() != n || omega_hat.len() != n {
        return Err(Error::domain("frequency or amplitude length mismatch"));
    }
    let z: Vec<Complex64> = omega.iter().map(|w| Complex64::from_polar(1.0, *w)).collect();
    let z_hat: Vec<Complex64> = omega_hat.iter().map(|w| Complex64::from_polar(1.0, *w)).collect();
    let clean = prony::synthesize(&z, b, k);
    let noisy: Vec<Complex64> = clean.iter().zip(noise).map(|(y, w)| y + w).collect();
    let b_hat = prony::fit_amplitudes(&noisy, &z_hat)?;
    let measured = (b_hat - DVector::from_column_slice(b)).norm();
    let inputs = BoundInputs {
        epsilon: noise.iter().map(|w| w.norm()).fold(0.0, f64::max),
        delta: omega.iter().zip(omega_hat).map(|(a, c)| angle_gap(*a, *c)).fold(0.0, f64::max),
        k,
        n,
        q: min_circular_gap(&z),
        ..Default::default()
    };
    let norm_y = DVector::from_column_slice(&clean).norm();
    Ok(BoundCheck::new("lemma3", instance_id, measured, lemma3_bound(&inputs, norm_y)))
}

/// Random instances for the amplitude bound: separated frequencies,
/// frequency errors uniform in `[-delta, delta]`, noise uniform in the disk
/// of radius `epsilon`.
pub fn lemma3_monte_carlo(k: usize, n: usize, delta: f64, epsilon: f64, draws: usize, seed: u64) -> Result<Vec<BoundCheck>> {
    (0..draws)
        .map(|d| {
            let mut rng = rng_from_seed(derive_seed(seed, d as u64));
            let omega = random_separated_frequencies(&mut rng, n, separation_threshold(k) * (1.0 + 1e-9))?;
            let b: Vec<Complex64> = (0..n)
                .map(|_| Complex64::from_polar(0.5 + rng.random::<f64>(), rng.random::<f64>() * TAU))
                .collect();
            let omega_hat: Vec<f64> = omega.iter().map(|w| w + delta * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let noise: Vec<Complex64> = (0..k).map(|_| disk_sample(&mut rng, epsilon)).collect();
            lemma3_verify(&omega, &b, &omega_hat, &noise, d as u64)
        })
        .collect()
}

/// Arc length between two unit-circle points a chord `chord` apart.
pub fn chord_to_arc(chord: f64) -> f64 {
    2.0 * (chord / 2.0).clamp(-1.0, 1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamscanPeak {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamscan {
    pub grid: AngularGrid,
    /// `|a^H vec(E)|² / N_t²`, rows over θ, columns over φ.
    pub power: DMatrix<f64>,
    pub peaks: Vec<BeamscanPeak>,
}

/// Exhaustive beam scan of a field over the front half-space.
pub fn beamscan_oracle(field: &Field, geom: &UpaGeometry, resolution_deg: f64) -> Result<Beamscan> {
    if !(resolution_deg > 0.0) {
        return Err(Error::domain("resolution must be positive"));
    }
    let grid = AngularGrid::front(resolution_deg)?;
    let w = DVector::from_column_slice(field.as_slice());
    let nt2 = (geom.n_t() * geom.n_t()) as f64;
    let power = raw_gain(&w, geom, &grid)? / nt2;
    let (thetas, phis) = (grid.thetas(), grid.phis());
    let peaks = local_maxima(&power, &grid, 0.0)
        .into_iter()
        .map(|(i, j)| BeamscanPeak {
            theta_deg: thetas[i],
            phi_deg: phis[j],
            power: power[(i, j)],
        })
        .collect();
    Ok(Beamscan { grid, power, peaks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{rad, received_grid, UserScenario};

    fn cis(w: f64) -> Complex64 {
        Complex64::from_polar(1.0, w)
    }

    #[test]
    fn lemma1_noiseless_limit_is_zero() {
        let inp = BoundInputs {
            k: 16,
            n: 2,
            p_e: 4,
            sigma1: 3.0,
            norm_y1: 3.0,
            norm_y0: 2.0,
            norm_h: 1.5,
            beta0_abs: 0.7,
            ..Default::default()
        };
        assert_eq!(lemma1_bound(&inp).unwrap(), 0.0);
    }

    #[test]
    fn lemma1_first_terms_linear_in_epsilon() {
        let base = BoundInputs {
            k: 16,
            n: 2,
            p_e: 4,
            sigma1: 3.0,
            norm_y1: 3.0,
            norm_y0: 2.0,
            norm_h: 1.5,
            beta0_abs: 0.7,
            epsilon: 1e-3,
            ..Default::default()
        };
        let twice = BoundInputs { epsilon: 2e-3, ..base };
        assert!((lemma1_bound(&twice).unwrap() - 2.0 * lemma1_bound(&base).unwrap()).abs() < 1e-15);
        // direct evaluation
        let want = 2.0 / 0.7 * (3.0 * 14f64.sqrt() * 1e-3 / 9.0 + 2.0 * 14.0 * 1e-3);
        assert!((lemma1_bound(&base).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn lemma1_rejects_coincident_roots() {
        let inp = BoundInputs { sigma1: 1.0, ..Default::default() };
        assert!(matches!(lemma1_bound(&inp), Err(Error::Domain(_))));
    }

    #[test]
    fn beta0_is_product_of_root_gaps() {
        let roots = [cis(0.3), cis(2.0), Complex64::new(0.2, -0.4), Complex64::new(-0.5, 0.1)];
        // monic polynomial from its roots
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = c.clone();
            next.push(Complex64::new(0.0, 0.0));
            for i in 0..c.len() {
                next[i + 1] -= c[i] * r;
            }
            c = next;
        }
        let want: Complex64 = roots[1..].iter().map(|r| roots[0] - r).product();
        assert!((poly_derivative(&c, roots[0]) - want).norm() < 1e-12);
    }

    #[test]
    fn lemma1_instance_without_noise_has_zero_error_and_bound() {
        let z = [cis(0.4), cis(2.5)];
        let b = [Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.7)];
        let checks = lemma1_verify(&z, &b, 16, 4, &[Complex64::new(0.0, 0.0); 16], 0).unwrap();
        assert_eq!(checks.len(), 2);
        for c in checks {
            assert!(c.measured < 1e-10);
            assert!(c.bound < 1e-12);
        }
    }

    #[test]
    fn lemma1_holds_at_high_snr() {
        let checks = lemma1_monte_carlo(16, 2, 4, 1e-3, 50, 7).unwrap();
        assert_eq!(checks.len(), 100);
        assert!(checks.iter().all(|c| c.holds), "{:?}", checks.iter().find(|c| !c.holds));
    }

    #[test]
    fn lemma2_single_node() {
        let r = lemma2_check(&[cis(1.3)], 16).unwrap();
        assert!((r.norm_l_sq - 1.0 / 16.0).abs() < 1e-14);
        assert!(r.holds);
        assert!(r.separation_ok);
    }

    #[test]
    fn lemma2_spaced_frequencies() {
        let z: Vec<Complex64> = (0..4).map(|i| cis(0.5 + 0.3 * i as f64)).collect();
        let r = lemma2_check(&z, 256).unwrap();
        assert!((separation_threshold(256) - 0.277_680_183_634_897_9).abs() < 1e-12);
        assert!(r.separation_ok);
        assert!(r.holds, "{r:?}");
        assert!(r.norm_l_sq <= 3.0 / 256.0);
    }

    #[test]
    fn lemma2_reports_violated_separation() {
        let r = lemma2_check(&[cis(0.0), cis(0.05)], 16).unwrap();
        assert!(!r.separation_ok);
    }

    #[test]
    fn lemma2_norm_matches_smallest_singular_value() {
        let z = [cis(0.1), cis(1.9), cis(4.0)];
        let r = lemma2_check(&z, 20).unwrap();
        let sv = prony::singular_values(&prony::vandermonde(&z, 20)).unwrap();
        let smin = *sv.last().unwrap();
        assert!((r.norm_l_sq - 1.0 / (smin * smin)).abs() < 1e-12 * r.norm_l_sq);
    }

    #[test]
    fn lemma2_rejects_bad_nodes() {
        assert!(lemma2_check(&[cis(0.2), cis(0.2)], 16).is_err());
        assert!(lemma2_check(&[Complex64::new(0.5, 0.0)], 16).is_err());
    }

    #[test]
    fn circular_gap_wraps() {
        let z = [cis(0.1), cis(TAU - 0.1), cis(3.0)];
        assert!((min_circular_gap(&z) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn separated_draws_respect_gap() {
        let mut rng = rng_from_seed(3);
        for n in 1..6 {
            let w = random_separated_frequencies(&mut rng, n, 1.0).unwrap();
            let z: Vec<Complex64> = w.iter().map(|x| cis(*x)).collect();
            assert!(min_circular_gap(&z) >= 1.0 - 1e-12);
        }
        assert!(random_separated_frequencies(&mut rng, 7, 1.0).is_err());
    }

    #[test]
    fn disk_samples_stay_inside() {
        let mut rng = rng_from_seed(11);
        assert!((0..1000).all(|_| disk_sample(&mut rng, 1e-3).norm() <= 1e-3));
    }

    #[test]
    fn lemma3_trivial_values() {
        let inp = BoundInputs { k: 64, n: 2, ..Default::default() };
        assert_eq!(lemma3_bound(&inp, 5.0), 0.0);
        let inp = BoundInputs { epsilon: 1e-3, ..inp };
        assert!((lemma3_bound(&inp, 5.0) - 3f64.sqrt() * 1e-3).abs() < 1e-18);
    }

    #[test]
    fn lemma3_holds_on_random_instances() {
        let checks = lemma3_monte_carlo(64, 2, 1e-4, 1e-3, 100, 5).unwrap();
        assert!(checks.iter().all(|c| c.holds), "{:?}", checks.iter().find(|c| !c.holds));
    }

    #[test]
    fn chord_arc_conversion() {
        assert!((chord_to_arc((cis(0.3) - cis(0.0)).norm()) - 0.3).abs() < 1e-14);
        assert!((chord_to_arc(2.0) - PI).abs() < 1e-14);
    }

    #[test]
    fn beamscan_single_user() {
        let g = UpaGeometry::default();
        let f = received_grid(&g, &[UserScenario::los(rad(70.0), rad(40.0), Complex64::new(1.0, 0.0))], 0.0).unwrap();
        let scan = beamscan_oracle(&f, &g, 1.0).unwrap();
        let top = scan.peaks[0];
        assert_eq!((top.theta_deg, top.phi_deg), (70.0, 40.0));
        assert!((top.power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beamscan_zero_field() {
        let g = UpaGeometry::half_wavelength(4, 4, 3.5e9).unwrap();
        let scan = beamscan_oracle(&g.zero_field(), &g, 5.0).unwrap();
        assert!(scan.power.iter().all(|p| *p == 0.0));
        assert!(scan.peaks.is_empty());
    }

    #[test]
    fn beamscan_two_users() {
        let g = UpaGeometry::default();
        let users = [
            UserScenario::los(rad(90.0), 0.0, Complex64::new(1.0, 0.0)),
            UserScenario::los(rad(30.0), rad(60.0), Complex64::from_polar(0.8, PI / 3.0)),
        ];
        let scan = beamscan_oracle(&received_grid(&g, &users, 0.0).unwrap(), &g, 1.0).unwrap();
        let top: Vec<(f64, f64)> = scan.peaks[..2].iter().map(|p| (p.theta_deg, p.phi_deg)).collect();
        assert!(top.contains(&(90.0, 0.0)));
        assert!(top.contains(&(30.0, 60.0)));
    }

    #[test]
    fn lemma2_batch_holds() {
        let checks = lemma2_monte_carlo(64, 8, 200, 11).unwrap();
        assert_eq!(checks.len(), 200);
        assert!(checks.iter().all(|c| c.holds && c.bound_name == "lemma2"));
        assert_eq!(checks, lemma2_monte_carlo(64, 8, 200, 11).unwrap());
    }
}

//! Extended Prony estimation of undamped complex exponentials.
//!
//! Given `K` samples `y(k) = Σ b_n z_n^k`, an estimation order `P_e` with
//! `N <= P_e <= K - N` is used to build the forward linear-prediction matrix,
//! whose minimum-norm annihilating vector `h` (with `h_0 = 1`) defines the
//! polynomial `H(z) = Σ h_n z^{P_e - n}`. `H` has `N` signal zeros on the unit
//! circle and `P_e - N` extraneous zeros strictly inside it; the signal zeros
//! are collected and their amplitudes fitted by Vandermonde least squares.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative singular-value cutoff for the effective rank.
const RANK_RTOL: f64 = 1e-10;
/// Nodes closer than this are treated as coincident.
const MIN_NODE_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Rank-truncated pseudoinverse of the prediction matrix.
    #[default]
    Pseudoinverse,
    /// Minimum-norm vector in the noise subspace of the whole data matrix.
    TotalLeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PronyConfig {
    pub n_signals: usize,
    pub est_order: usize,
    /// Half-width of the band around a boundary root modulus inside which
    /// candidates are ranked by a joint amplitude fit instead of modulus.
    pub root_tolerance: f64,
    pub solver: Solver,
}

impl PronyConfig {
    pub fn new(n_signals: usize, est_order: usize) -> Self {
        Self {
            n_signals,
            est_order,
            root_tolerance: 0.1,
            solver: Solver::Pseudoinverse,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let n = self.n_signals;
        if n == 0 {
            return Err(Error::domain("number of signals must be positive"));
        }
        if self.est_order < n || self.est_order + n > k {
            return Err(Error::domain(format!(
                "estimation order {} outside [N, K-N] = [{n}, {}]",
                self.est_order,
                k as isize - n as isize
            )));
        }
        if !(self.root_tolerance > 0.0) {
            return Err(Error::domain("root tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PronyEstimate {
    /// `[1, h_1, ..., h_{P_e}]`.
    pub coeffs: DVector<Complex64>,
    pub roots_all: Vec<Complex64>,
    pub roots_signal: Vec<Complex64>,
    pub amplitudes: DVector<Complex64>,
    /// `||Y h||_2`.
    pub residual: f64,
    /// `||Φ b̂ - y||_2`.
    pub fit_residual: f64,
}

/// Forward prediction matrix: row `r` is `[y(P_e + r), y(P_e + r - 1), ..., y(r)]`.
pub fn build_data_matrix(samples: &[Complex64], est_order: usize) -> Result<DMatrix<Complex64>> {
    let k = samples.len();
    if k < est_order + 1 {
        return Err(Error::domain(format!(
            "{k} samples cannot fill a prediction matrix of order {est_order}"
        )));
    }
    Ok(DMatrix::from_fn(k - est_order, est_order + 1, |r, c| samples[est_order + r - c]))
}

/// Singular triplets sorted by descending singular value.
struct SortedSvd {
    u: DMatrix<Complex64>,
    s: Vec<f64>,
    /// Rows are `v_i^H`.
    v_t: DMatrix<Complex64>,
    order: Vec<usize>,
}

impl SortedSvd {
    fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let (r, c) = m.shape();
        let fm = faer::Mat::<Complex64>::from_fn(r, c, |i, j| m[(i, j)]);
        let svd = fm
            .thin_svd()
            .map_err(|e| Error::Estimation(format!("SVD did not converge: {e:?}")))?;
        let k = r.min(c);
        let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
        let s: Vec<f64> = (0..k).map(|i| fs[i].re).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        Ok(Self {
            u: DMatrix::from_fn(r, k, |i, j| fu[(i, j)]),
            s,
            v_t: DMatrix::from_fn(k, c, |i, j| fv[(j, i)].conj()),
            order,
        })
    }

    fn sigma(&self, i: usize) -> f64 {
        self.s[self.order[i]]
    }

    fn effective_rank(&self) -> usize {
        let top = self.sigma(0);
        (0..self.s.len()).take_while(|&i| self.sigma(i) > RANK_RTOL * top).count()
    }

    /// Right singular vector `i` (in sorted order).
    fn v(&self, i: usize) -> DVector<Complex64> {
        self.v_t.row(self.order[i]).adjoint()
    }

    fn u(&self, i: usize) -> DVector<Complex64> {
        self.u.column(self.order[i]).into_owned()
    }
}

/// Singular values of `m` in descending order.
pub fn singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd = SortedSvd::new(m.clone())?;
    Ok((0..svd.s.len()).map(|i| svd.sigma(i)).collect())
}

/// Minimum-norm `h` with `h_0 = 1` approximately annihilating `y`.
///
/// `rank` truncates the decomposition (the known number of exponentials);
/// `None` keeps the full effective rank.
pub fn solve_min_norm(y: &DMatrix<Complex64>, rank: Option<usize>, solver: Solver) -> Result<DVector<Complex64>> {
    if y.ncols() < 2 || y.nrows() == 0 {
        return Err(Error::Degenerate("prediction matrix needs at least two columns".into()));
    }
    if y.iter().all(|x| *x == ZERO) {
        return Err(Error::Degenerate("prediction matrix is all zeros".into()));
    }
    let p = y.ncols() - 1;
    match solver {
        Solver::Pseudoinverse => {
            let y0 = y.column(0).into_owned();
            let y1 = y.columns(1, p).into_owned();
            let svd = SortedSvd::new(y1)?;
            if svd.sigma(0) == 0.0 {
                return Err(Error::Degenerate("prediction columns are all zero".into()));
            }
            let r = rank.map_or(svd.effective_rank(), |r| r.min(svd.effective_rank()));
            let mut h = DVector::from_element(p + 1, ZERO);
            h[0] = ONE;
            for i in 0..r {
                let coef = svd.u(i).dotc(&y0) / svd.sigma(i);
                let v = svd.v(i);
                for j in 0..p {
                    h[j + 1] -= v[j] * coef;
                }
            }
            Ok(h)
        }
        Solver::TotalLeastSquares => {
            let svd = SortedSvd::new(y.clone())?;
            let r = rank.map_or(svd.effective_rank(), |r| r.min(svd.effective_rank()));
            // h ∝ (I - V_r V_r^H) e_1, scaled so that h_0 = 1
            let mut h = DVector::from_element(p + 1, ZERO);
            h[0] = ONE;
            for i in 0..r {
                let v = svd.v(i);
                let proj = v[0].conj();
                h -= &v * proj;
            }
            let lead = h[0];
            if lead.norm() < 1e-12 {
                return Err(Error::Degenerate(
                    "first coordinate lies in the signal subspace; no monic annihilator".into(),
                ));
            }
            Ok(h / lead)
        }
    }
}

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All `P_e` roots of the monic `Σ h_n z^{P_e - n}`, via companion-matrix
/// eigenvalues followed by a guarded Newton polish.
pub fn find_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let Some(&lead) = coeffs.first() else {
        return Err(Error::domain("empty coefficient vector"));
    };
    let scale = coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if (lead - ONE).norm() > 1e-12 * scale {
        return Err(Error::domain(format!("polynomial is not monic (leading coefficient {lead})")));
    }
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    if degree == 1 {
        return Ok(vec![-coeffs[1]]);
    }
    let mut companion = DMatrix::from_element(degree, degree, ZERO);
    for j in 0..degree {
        companion[(0, j)] = -coeffs[j + 1];
    }
    for i in 1..degree {
        companion[(i, i - 1)] = ONE;
    }
    let schur = Schur::try_new(companion, f64::EPSILON, 100 * degree)
        .ok_or_else(|| Error::Estimation("companion eigenvalue iteration did not converge".into()))?;
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::Estimation("companion matrix eigenvalues unavailable".into()))?;
    let mut roots: Vec<Complex64> = eig.iter().copied().collect();

    for i in 0..roots.len() {
        let nearest = roots
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| (r - roots[i]).norm())
            .fold(f64::INFINITY, f64::min);
        let mut z = roots[i];
        let (mut pz, _) = horner(coeffs, z);
        for _ in 0..3 {
            let (p, dp) = horner(coeffs, z);
            if dp == ZERO {
                break;
            }
            let step = p / dp;
            let cand = z - step;
            let (pc, _) = horner(coeffs, cand);
            if step.norm() < 0.1 * nearest && pc.norm() < pz.norm() {
                z = cand;
                pz = pc;
            } else {
                break;
            }
        }
        roots[i] = z;
    }
    Ok(roots)
}

fn sort_by_modulus_desc(roots: &[Complex64]) -> Vec<Complex64> {
    let mut sorted = roots.to_vec();
    sorted.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
    sorted
}

/// The `n` roots of largest modulus.
///
/// In the noiseless undamped case these are exactly the unit-circle roots,
/// since all extraneous zeros of the minimum-norm polynomial lie inside.
pub fn select_signal_roots(roots: &[Complex64], n: usize, tol: f64) -> Result<Vec<Complex64>> {
    select_roots(roots, n, tol, None)
}

/// Like [`select_signal_roots`], but when more candidates than free slots
/// have a modulus within `tol` of the `n`-th largest, the slots go to the
/// candidates whose unit-circle projections, fitted jointly with the clear
/// winners, leave the smallest least-squares residual against `samples`.
pub fn select_signal_roots_fitted(
    roots: &[Complex64],
    n: usize,
    tol: f64,
    samples: &[Complex64],
) -> Result<Vec<Complex64>> {
    select_roots(roots, n, tol, Some(samples))
}

/// Subsets tried exhaustively before falling back to greedy selection.
const MAX_SUBSETS: usize = 20_000;

fn select_roots(roots: &[Complex64], n: usize, tol: f64, samples: Option<&[Complex64]>) -> Result<Vec<Complex64>> {
    if roots.len() < n {
        return Err(Error::domain(format!("need {n} roots, only {} available", roots.len())));
    }
    let sorted = sort_by_modulus_desc(roots);
    if n == 0 || n == sorted.len() {
        return Ok(sorted.into_iter().take(n).collect());
    }
    let Some(samples) = samples else {
        return Ok(sorted.into_iter().take(n).collect());
    };
    let boundary = sorted[n - 1].norm();
    let certain: Vec<Complex64> = sorted.iter().copied().filter(|z| z.norm() > boundary + tol).collect();
    let tied: Vec<Complex64> = sorted
        .iter()
        .copied()
        .filter(|z| z.norm() <= boundary + tol && z.norm() >= boundary - tol)
        .collect();
    let slots = n - certain.len();
    if tied.len() <= slots || samples.len() < n {
        return Ok(sorted.into_iter().take(n).collect());
    }
    let residual = |pick: &[usize]| {
        let nodes: Vec<Complex64> = certain
            .iter()
            .chain(pick.iter().map(|&i| &tied[i]))
            .map(|z| z / z.norm())
            .collect();
        projected_residual(samples, &nodes)
    };
    let pick = if binomial(tied.len(), slots) <= MAX_SUBSETS {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for_each_subset(tied.len(), slots, &mut |pick| {
            let r = residual(pick);
            if best.as_ref().is_none_or(|(b, _)| r < *b) {
                best = Some((r, pick.to_vec()));
            }
        });
        best.map(|(_, p)| p).unwrap_or_default()
    } else {
        let mut pick: Vec<usize> = Vec::with_capacity(slots);
        for _ in 0..slots {
            let next = (0..tied.len())
                .filter(|i| !pick.contains(i))
                .map(|i| {
                    let mut trial = pick.clone();
                    trial.push(i);
                    (i, residual(&trial))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i);
            pick.extend(next);
        }
        pick
    };
    if pick.len() != slots {
        return Ok(sorted.into_iter().take(n).collect());
    }
    let mut out = certain;
    out.extend(pick.into_iter().map(|i| tied[i]));
    Ok(sort_by_modulus_desc(&out))
}

/// Least-squares residual of `samples` on the given nodes; infinite when
/// the nodes cannot be fitted.
fn projected_residual(samples: &[Complex64], nodes: &[Complex64]) -> f64 {
    match fit_amplitudes(samples, nodes) {
        Ok(b) => (vandermonde(nodes, samples.len()) * b - DVector::from_column_slice(samples)).norm(),
        Err(_) => f64::INFINITY,
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut c: usize = 1;
    for i in 0..k {
        c = c.saturating_mul(n - i) / (i + 1);
    }
    c
}

/// Calls `f` on every increasing `k`-subset of `0..n`.
fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Vandermonde matrix `Φ_{k,n} = z_n^k`, `k = 0..K-1`.
pub fn vandermonde(roots: &[Complex64], k: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(k, roots.len(), |row, col| roots[col].powu(row as u32))
}

/// Least-squares amplitudes `b̂ = (Φ^H Φ)^{-1} Φ^H y`.
pub fn fit_amplitudes(samples: &[Complex64], roots: &[Complex64]) -> Result<DVector<Complex64>> {
    let (k, n) = (samples.len(), roots.len());
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    if k < n {
        return Err(Error::domain(format!("{k} samples cannot determine {n} amplitudes")));
    }
    let phi = vandermonde(roots, k);
    let min_gap = roots
        .iter()
        .enumerate()
        .flat_map(|(i, a)| roots[i + 1..].iter().map(move |b| (a - b).norm()))
        .fold(f64::INFINITY, f64::min);
    let svd = SortedSvd::new(phi)?;
    let smax = svd.sigma(0);
    let smin = svd.sigma(n - 1);
    if min_gap <= MIN_NODE_DISTANCE || smin <= f64::EPSILON * smax {
        return Err(Error::IllConditioned {
            condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        });
    }
    let y = DVector::from_column_slice(samples);
    let mut b = DVector::from_element(n, ZERO);
    for i in 0..n {
        b += svd.v(i) * (svd.u(i).dotc(&y) / svd.sigma(i));
    }
    Ok(b)
}

/// Full estimate of `cfg.n_signals` exponentials from `samples`.
pub fn estimate(samples: &[Complex64], cfg: &PronyConfig) -> Result<PronyEstimate> {
    cfg.validate(samples.len())?;
    let y = build_data_matrix(samples, cfg.est_order)?;
    let coeffs = solve_min_norm(&y, Some(cfg.n_signals), cfg.solver)?;
    let roots_all = find_roots(coeffs.as_slice())?;
    let roots_signal = select_signal_roots_fitted(&roots_all, cfg.n_signals, cfg.root_tolerance, samples)?;
    let amplitudes = fit_amplitudes(samples, &roots_signal)?;
    let residual = (&y * &coeffs).norm();
    let fit_residual = (vandermonde(&roots_signal, samples.len()) * &amplitudes - DVector::from_column_slice(samples)).norm();
    Ok(PronyEstimate {
        coeffs,
        roots_all,
        roots_signal,
        amplitudes,
        residual,
        fit_residual,
    })
}

/// `y(k) = Σ b_n z_n^k` for `k = 0..k_len-1`.
pub fn synthesize(roots: &[Complex64], amplitudes: &[Complex64], k_len: usize) -> Vec<Complex64> {
    (0..k_len)
        .map(|k| roots.iter().zip(amplitudes).map(|(z, b)| b * z.powu(k as u32)).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cis(w: f64) -> Complex64 {
        Complex64::from_polar(1.0, w)
    }

    #[test]
    fn data_matrix_small_case() {
        let y: Vec<Complex64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| c(v, 0.0)).collect();
        let m = build_data_matrix(&y, 2).unwrap();
        let want = DMatrix::from_row_slice(2, 3, &[3.0, 2.0, 1.0, 4.0, 3.0, 2.0].map(|v| c(v, 0.0)));
        assert_eq!(m, want);
    }

    #[test]
    fn data_matrix_index_oracle() {
        let y: Vec<Complex64> = (0..32).map(|k| c((k as f64 * 0.37).sin(), (k as f64 * 1.3).cos())).collect();
        let m = build_data_matrix(&y, 10).unwrap();
        assert_eq!(m.shape(), (22, 11));
        for r in 0..22 {
            for col in 0..11 {
                assert_eq!(m[(r, col)], y[10 + r - col]);
            }
        }
    }

    #[test]
    fn data_matrix_too_few_samples() {
        let y = vec![ONE; 3];
        assert!(matches!(build_data_matrix(&y, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn single_pole_annihilator() {
        let z = cis(PI / 4.0);
        let y = synthesize(&[z], &[ONE], 8);
        let h = solve_min_norm(&build_data_matrix(&y, 1).unwrap(), None, Solver::Pseudoinverse).unwrap();
        assert!((h[0] - ONE).norm() < 1e-14);
        assert!((h[1] + z).norm() < 1e-12);
    }

    #[test]
    fn two_pole_annihilator_matches_expansion() {
        let (z1, z2) = (cis(PI / 3.0), cis(-PI / 5.0));
        let y = synthesize(&[z1, z2], &[c(1.0, 0.5), c(-0.7, 0.2)], 12);
        for solver in [Solver::Pseudoinverse, Solver::TotalLeastSquares] {
            let h = solve_min_norm(&build_data_matrix(&y, 2).unwrap(), Some(2), solver).unwrap();
            // (z - z1)(z - z2) = z² - (z1 + z2) z + z1 z2
            assert!((h[1] + z1 + z2).norm() < 1e-10);
            assert!((h[2] - z1 * z2).norm() < 1e-10);
        }
    }

    #[test]
    fn noiseless_rank_equals_signal_count() {
        let z = [cis(0.4), cis(2.1), cis(-1.7)];
        let y = synthesize(&z, &[ONE, c(0.5, 0.5), c(-1.0, 0.3)], 16);
        for pe in 3..=13 {
            let m = build_data_matrix(&y, pe).unwrap();
            let sv = m.singular_values();
            let mut s: Vec<f64> = sv.iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            assert!(s[2] > 1e-6 * s[0]);
            assert!(s[3..].iter().all(|&x| x < 1e-9 * s[0]), "pe={pe}: {s:?}");
        }
    }

    #[test]
    fn all_zero_matrix_is_degenerate() {
        let m = DMatrix::from_element(4, 3, ZERO);
        assert!(matches!(solve_min_norm(&m, None, Solver::Pseudoinverse), Err(Error::Degenerate(_))));
        assert!(matches!(solve_min_norm(&m, None, Solver::TotalLeastSquares), Err(Error::Degenerate(_))));
    }

    #[test]
    fn roots_of_simple_polynomials() {
        let r = find_roots(&[ONE, -ONE]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - ONE).norm() < 1e-15);

        let mut r = find_roots(&[ONE, ZERO, ONE]).unwrap();
        r.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-12);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn non_monic_is_rejected() {
        assert!(matches!(find_roots(&[c(2.0, 0.0), ONE]), Err(Error::Domain(_))));
    }

    #[test]
    fn random_degree_ten_residual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let mut h = vec![ONE];
            h.extend((0..10).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
            let roots = find_roots(&h).unwrap();
            assert_eq!(roots.len(), 10);
            let hnorm = h.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            for z in &roots {
                // residual of the polynomial scaled by |z|^deg to stay meaningful off the unit disk
                let (p, _) = horner(&h, *z);
                assert!(p.norm() < 1e-6 * hnorm * z.norm().max(1.0).powi(10), "|H(z)|={}", p.norm());
            }
            let sum: Complex64 = roots.iter().sum();
            assert!((sum + h[1]).norm() < 1e-8 * h[1].norm().max(1.0));
        }
    }

    #[test]
    fn selection_picks_unit_circle_root() {
        let roots = [c(0.3, 0.0), Complex64::from_polar(0.5, PI / 7.0), cis(PI / 3.0)];
        let sel = select_signal_roots(&roots, 1, 0.1).unwrap();
        assert_eq!(sel, vec![cis(PI / 3.0)]);
        assert_eq!(select_signal_roots(&roots, 3, 0.1).unwrap().len(), 3);
        assert!(matches!(select_signal_roots(&roots, 4, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn extraneous_roots_fall_inside_circle() {
        let (z1, z2) = (cis(0.9), cis(-2.2));
        let y = synthesize(&[z1, z2], &[c(1.0, -0.4), c(0.6, 0.8)], 16);
        let est = estimate(&y, &PronyConfig::new(2, 6)).unwrap();
        let mut sel = est.roots_signal.clone();
        sel.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        assert!((sel[0] - z2).norm() < 1e-8);
        assert!((sel[1] - z1).norm() < 1e-8);
        let inside = est.roots_all.iter().filter(|z| z.norm() < 1.0 - 1e-6).count();
        assert_eq!(inside, 4);
    }

    #[test]
    fn fit_single_amplitude() {
        let z = cis(0.77);
        let b = Complex64::from_polar(3.0, PI / 5.0);
        let y = synthesize(&[z], &[b], 10);
        let fit = fit_amplitudes(&y, &[z]).unwrap();
        assert!((fit[0] - b).norm() < 1e-10);
    }

    #[test]
    fn fit_two_amplitudes() {
        let z = [cis(1.1), cis(-0.4)];
        let b = [c(0.3, -1.2), c(2.0, 0.1)];
        let fit = fit_amplitudes(&synthesize(&z, &b, 16), &z).unwrap();
        assert!((fit[0] - b[0]).norm() < 1e-9);
        assert!((fit[1] - b[1]).norm() < 1e-9);
    }

    #[test]
    fn repeated_roots_are_ill_conditioned() {
        let z = cis(0.5);
        let y = synthesize(&[z], &[ONE], 8);
        assert!(matches!(fit_amplitudes(&y, &[z, z]), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn fit_is_stationary() {
        let z = [cis(0.3), cis(2.5)];
        let y: Vec<Complex64> = synthesize(&z, &[ONE, c(0.0, 1.0)], 12)
            .into_iter()
            .enumerate()
            .map(|(k, v)| v + c(0.05 * (k as f64).sin(), -0.03 * (k as f64 * 0.7).cos()))
            .collect();
        let b = fit_amplitudes(&y, &z).unwrap();
        let phi = vandermonde(&z, 12);
        let yv = DVector::from_column_slice(&y);
        let base = (&phi * &b - &yv).norm();
        for i in 0..2 {
            for d in [c(1e-3, 0.0), c(-1e-3, 0.0), c(0.0, 1e-3), c(0.0, -1e-3)] {
                let mut p = b.clone();
                p[i] += d;
                assert!((&phi * &p - &yv).norm() >= base);
            }
        }
    }

    #[test]
    fn config_enforces_order_range() {
        assert!(PronyConfig::new(2, 1).validate(16).is_err());
        assert!(PronyConfig::new(2, 15).validate(16).is_err());
        assert!(PronyConfig::new(2, 14).validate(16).is_ok());
        assert!(PronyConfig::new(0, 1).validate(16).is_err());
    }

    #[test]
    fn min_norm_against_null_space_parameterization() {
        // K = 12, P_e = 6, N = 2: the 6 x 7 matrix has a 5-dimensional null space.
        let z = [cis(0.6), cis(-1.9)];
        let y = synthesize(&z, &[c(1.0, 0.2), c(-0.4, 0.9)], 12);
        let m = build_data_matrix(&y, 6).unwrap();
        let gram = m.adjoint() * &m;
        let eig = gram.clone().symmetric_eigen();
        let mut idx: Vec<usize> = (0..7).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let null = DMatrix::from_columns(&idx[..5].iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
        let mut e1 = DVector::from_element(7, ZERO);
        e1[0] = ONE;
        let proj = &null * (null.adjoint() * &e1);
        let oracle = &proj / proj[0];
        for solver in [Solver::Pseudoinverse, Solver::TotalLeastSquares] {
            let h = solve_min_norm(&m, Some(2), solver).unwrap();
            assert!((&h - &oracle).norm() < 1e-8, "{solver:?}");
            assert!((&m * &h).norm() < 1e-10);
        }
    }

    #[test]
    fn damped_candidates_do_not_displace_a_signal_root() {
        let truth = [Complex64::from_polar(1.0, 0.0), Complex64::from_polar(1.0, 2.72)];
        let y = synthesize(&truth, &[Complex64::new(1.0, 0.0), Complex64::from_polar(0.8, 1.0)], 16);
        let roots = [
            Complex64::from_polar(1.014, 2.722),
            Complex64::from_polar(0.995, 0.011),
            Complex64::from_polar(0.906, -0.357),
            Complex64::from_polar(0.898, 3.072),
            Complex64::from_polar(0.887, -2.884),
        ];
        let picked = select_signal_roots_fitted(&roots, 2, 0.1, &y).unwrap();
        assert_eq!(picked, vec![roots[0], roots[1]]);
    }

    #[test]
    fn exhaustive_and_greedy_agree_on_clean_data() {
        let truth: Vec<Complex64> = [0.3, 1.4, -2.0].iter().map(|w| Complex64::from_polar(1.0, *w)).collect();
        let y = synthesize(&truth, &[Complex64::new(1.0, 0.0); 3], 24);
        let mut roots = truth.clone();
        roots.extend((0..30).map(|i| Complex64::from_polar(0.95, 0.2 * i as f64 + 0.05)));
        assert!(binomial(33, 3) <= MAX_SUBSETS);
        let picked = select_signal_roots_fitted(&roots, 3, 0.1, &y).unwrap();
        assert_eq!(match_all(&truth, &picked), 3);
        let mut many = truth.clone();
        many.extend((0..60).map(|i| Complex64::from_polar(0.95, 0.1 * i as f64 + 0.05)));
        assert!(binomial(63, 3) > MAX_SUBSETS);
        let picked = select_signal_roots_fitted(&many, 3, 0.1, &y).unwrap();
        assert_eq!(match_all(&truth, &picked), 3);
    }

    fn match_all(truth: &[Complex64], picked: &[Complex64]) -> usize {
        truth.iter().filter(|t| picked.iter().any(|p| (p - *t).norm() < 1e-12)).count()
    }

    #[test]
    fn subsets_enumerated_once() {
        let mut seen = Vec::new();
        for_each_subset(5, 2, &mut |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), binomial(5, 2));
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[9], vec![3, 4]);
    }

    #[test]
    fn rank_deficient_rows_with_rounding_are_exact() {
        // DC plus one tone, built the way a field slice is (sum of rounded terms)
        let b = Complex64::from_polar(0.8, 1.0);
        for step in 0..50 {
            let w = -3.0 + 0.12 * step as f64;
            let y: Vec<Complex64> = (0..16).map(|k| ONE + b * cis(w).powu(k)).collect();
            for solver in [Solver::Pseudoinverse, Solver::TotalLeastSquares] {
                let mut cfg = PronyConfig::new(2, 10);
                cfg.solver = solver;
                let e = estimate(&y, &cfg).unwrap();
                assert!(e.residual < 1e-10, "w={w} {solver:?} residual {}", e.residual);
                assert!(e.fit_residual < 1e-10, "w={w} {solver:?} fit {}", e.fit_residual);
            }
        }
    }
}

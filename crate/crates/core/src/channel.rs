//! UPA geometry, steering vectors and multipath channel synthesis.
//!
//! Units are indexed column-major starting from the lower-left unit: the
//! vertical index `m` runs fastest (bottom to top), then the horizontal index
//! `n` advances one column. A [`Field`] stores exactly this layout, so
//! `field.as_slice()` is the flattened per-unit vector.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Per-unit complex field on the array: `n_v` rows (vertical) by `n_h` columns.
pub type Field = DMatrix<Complex64>;

const ANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaGeometry {
    pub n_v: usize,
    pub n_h: usize,
    /// Vertical spacing, meters.
    pub d_v: f64,
    /// Horizontal spacing, meters.
    pub d_h: f64,
    /// Carrier wavelength, meters.
    pub lambda0: f64,
    /// Carrier frequency, Hz.
    pub f_c: f64,
}

impl UpaGeometry {
    /// Geometry with spacings given in wavelengths.
    pub fn new(n_v: usize, n_h: usize, spacing_v_wl: f64, spacing_h_wl: f64, f_c: f64) -> Result<Self> {
        if n_v == 0 || n_h == 0 {
            return Err(Error::domain(format!("array must have at least one unit (got {n_v}x{n_h})")));
        }
        if !(f_c.is_finite() && f_c > 0.0) {
            return Err(Error::domain(format!("carrier frequency must be positive, got {f_c}")));
        }
        if !(spacing_v_wl > 0.0 && spacing_h_wl > 0.0) {
            return Err(Error::domain("unit spacing must be positive"));
        }
        let lambda0 = SPEED_OF_LIGHT / f_c;
        Ok(Self {
            n_v,
            n_h,
            d_v: spacing_v_wl * lambda0,
            d_h: spacing_h_wl * lambda0,
            lambda0,
            f_c,
        })
    }

    /// Half-wavelength square-lattice array.
    pub fn half_wavelength(n_v: usize, n_h: usize, f_c: f64) -> Result<Self> {
        Self::new(n_v, n_h, 0.5, 0.5, f_c)
    }

    pub fn n_t(&self) -> usize {
        self.n_v * self.n_h
    }

    /// Flat unit index of the unit at vertical index `m`, horizontal index `n`.
    pub fn unit_index(&self, m: usize, n: usize) -> usize {
        n * self.n_v + m
    }

    /// Position of unit `(m, n)`; the surface lies in the y-z plane with the
    /// x-axis as its normal and the origin at the lower-left unit.
    pub fn unit_position(&self, m: usize, n: usize) -> [f64; 3] {
        [0.0, n as f64 * self.d_h, m as f64 * self.d_v]
    }

    /// Vertical inter-unit phase progression `2π d_v cosθ / λ0`.
    pub fn vertical_phase(&self, theta: f64) -> f64 {
        2.0 * PI * self.d_v * theta.cos() / self.lambda0
    }

    /// Horizontal inter-unit phase progression `2π d_h sinθ sinφ / λ0`.
    pub fn horizontal_phase(&self, theta: f64, phi: f64) -> f64 {
        2.0 * PI * self.d_h * theta.sin() * phi.sin() / self.lambda0
    }

    pub fn zero_field(&self) -> Field {
        Field::zeros(self.n_v, self.n_h)
    }
}

impl Default for UpaGeometry {
    /// 16 x 16 half-wavelength array at 3.5 GHz.
    fn default() -> Self {
        Self::half_wavelength(16, 16, 3.5e9).expect("valid default geometry")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub theta_zod: f64,
    pub phi_aod: f64,
    pub theta_zoa: f64,
    pub phi_aoa: f64,
    pub beta: Complex64,
    /// Delay, seconds.
    pub tau: f64,
}

impl PathParams {
    /// Path whose arrival angles mirror its departure angles.
    pub fn new(theta: f64, phi: f64, beta: Complex64, tau: f64) -> Self {
        Self {
            theta_zod: theta,
            phi_aod: phi,
            theta_zoa: theta,
            phi_aoa: phi,
            beta,
            tau,
        }
    }

    fn validate(&self) -> Result<()> {
        check_theta(self.theta_zod)?;
        check_phi(self.phi_aod)?;
        check_theta(self.theta_zoa)?;
        check_phi(self.phi_aoa)?;
        if !(self.beta.re.is_finite() && self.beta.im.is_finite()) {
            return Err(Error::domain("path gain must be finite"));
        }
        Ok(())
    }

    /// Spherical unit vector at the receiver.
    ///
    /// The third component uses the departure zenith angle, matching the
    /// published model; it only enters the constant phase of the gain.
    pub fn rx_direction(&self) -> [f64; 3] {
        [
            self.theta_zoa.sin() * self.phi_aoa.cos(),
            self.theta_zoa.sin() * self.phi_aoa.sin(),
            self.theta_zod.cos(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScenario {
    pub paths: Vec<PathParams>,
    /// UE antenna location, meters.
    pub rx_location: [f64; 3],
    /// Speed, m/s.
    pub speed: f64,
    pub theta_v: f64,
    pub phi_v: f64,
    pub tx_symbol: Complex64,
}

impl UserScenario {
    /// Static line-of-sight user whose composite coefficient equals `b`.
    pub fn los(theta: f64, phi: f64, b: Complex64) -> Self {
        Self {
            paths: vec![PathParams::new(theta, phi, b, 0.0)],
            rx_location: [0.0; 3],
            speed: 0.0,
            theta_v: 0.0,
            phi_v: 0.0,
            tx_symbol: Complex64::new(1.0, 0.0),
        }
    }

    pub fn velocity(&self) -> [f64; 3] {
        [
            self.speed * self.theta_v.sin() * self.phi_v.cos(),
            self.speed * self.theta_v.sin() * self.phi_v.sin(),
            self.speed * self.theta_v.cos(),
        ]
    }

    /// Doppler term `ω_p = r̂_rx,p · v / λ0` of path `p`.
    pub fn doppler(&self, path: &PathParams, geom: &UpaGeometry) -> f64 {
        dot(&path.rx_direction(), &self.velocity()) / geom.lambda0
    }

    /// Diagonal entry `c_{u,p}(t) = β_p e^{j2π r̂·d/λ0} e^{jω_p t}`.
    pub fn path_coefficient(&self, path: &PathParams, geom: &UpaGeometry, t: f64) -> Complex64 {
        let location_phase = 2.0 * PI * dot(&path.rx_direction(), &self.rx_location) / geom.lambda0;
        let doppler_phase = self.doppler(path, geom) * t;
        path.beta * Complex64::from_polar(1.0, location_phase + doppler_phase)
    }

    /// LOS composite coefficient `b_u` at subcarrier frequency `f`, using the first path.
    pub fn composite_gain(&self, geom: &UpaGeometry, f: f64, t: f64) -> Result<Complex64> {
        let path = self
            .paths
            .first()
            .ok_or_else(|| Error::domain("user has no propagation path"))?;
        let delay = Complex64::from_polar(1.0, -2.0 * PI * f * path.tau);
        Ok(self.tx_symbol * self.path_coefficient(path, geom, t) * delay)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::domain("user has no propagation path"));
        }
        self.paths.iter().try_for_each(PathParams::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierGrid {
    pub delta_f: f64,
    pub f: Vec<f64>,
}

impl SubcarrierGrid {
    pub fn new(f_first: f64, delta_f: f64, n_f: usize) -> Result<Self> {
        if n_f == 0 {
            return Err(Error::domain("subcarrier grid needs at least one frequency"));
        }
        Ok(Self {
            delta_f,
            f: (0..n_f).map(|i| f_first + i as f64 * delta_f).collect(),
        })
    }

    pub fn single(f: f64) -> Self {
        Self { delta_f: 0.0, f: vec![f] }
    }

    pub fn n_f(&self) -> usize {
        self.f.len()
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && (-ANGLE_SLACK..=PI + ANGLE_SLACK).contains(&theta) {
        Ok(())
    } else {
        Err(Error::domain(format!("elevation {theta} rad outside [0, pi]")))
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if phi.is_finite() && phi > -PI + ANGLE_SLACK && phi <= PI + ANGLE_SLACK {
        Ok(())
    } else {
        Err(Error::domain(format!("azimuth {phi} rad outside (-pi, pi]")))
    }
}

/// Vertical factor `a_v(θ)`.
pub fn vertical_steering(geom: &UpaGeometry, theta: f64) -> DVector<Complex64> {
    let step = geom.vertical_phase(theta);
    DVector::from_iterator(geom.n_v, (0..geom.n_v).map(|k| Complex64::from_polar(1.0, step * k as f64)))
}

/// Horizontal factor `a_h(θ, φ)`.
pub fn horizontal_steering(geom: &UpaGeometry, theta: f64, phi: f64) -> DVector<Complex64> {
    let step = geom.horizontal_phase(theta, phi);
    DVector::from_iterator(geom.n_h, (0..geom.n_h).map(|k| Complex64::from_polar(1.0, step * k as f64)))
}

/// Steering vector without angle-range validation; used by grid scans.
pub(crate) fn steering_unchecked(geom: &UpaGeometry, theta: f64, phi: f64) -> DVector<Complex64> {
    let a_v = vertical_steering(geom, theta);
    let a_h = horizontal_steering(geom, theta, phi);
    a_h.kronecker(&a_v)
}

/// `a(θ, φ) = a_h(θ, φ) ⊗ a_v(θ)`, length `N_t`, in unit order.
pub fn steering_vector(geom: &UpaGeometry, theta: f64, phi: f64) -> Result<DVector<Complex64>> {
    check_theta(theta)?;
    check_phi(phi)?;
    Ok(steering_unchecked(geom, theta, phi))
}

/// `H_u(t) = A C_u(t) B`, an `N_t x N_f` matrix.
pub fn channel_matrix(
    geom: &UpaGeometry,
    user: &UserScenario,
    grid: &SubcarrierGrid,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    user.validate()?;
    let p = user.paths.len();
    let mut a = DMatrix::<Complex64>::zeros(geom.n_t(), p);
    let mut b = DMatrix::<Complex64>::zeros(p, grid.n_f());
    let mut c = DMatrix::<Complex64>::zeros(p, p);
    for (i, path) in user.paths.iter().enumerate() {
        a.set_column(i, &steering_unchecked(geom, path.theta_zod, path.phi_aod));
        for (j, f) in grid.f.iter().enumerate() {
            b[(i, j)] = Complex64::from_polar(1.0, -2.0 * PI * f * path.tau);
        }
        c[(i, i)] = user.path_coefficient(path, geom, t);
    }
    Ok(a * c * b)
}

/// Superposed LOS field from all users at the carrier frequency, as an
/// `n_v x n_h` grid: `y(m,n) = Σ_u b_u z_{u,v}^m z_{u,h}^n`.
pub fn received_grid(geom: &UpaGeometry, users: &[UserScenario], t: f64) -> Result<Field> {
    if users.is_empty() {
        return Err(Error::domain("received field needs at least one user"));
    }
    let mut field = geom.zero_field();
    for user in users {
        user.validate()?;
        let path = &user.paths[0];
        let b = user.composite_gain(geom, geom.f_c, t)?;
        let a_v = vertical_steering(geom, path.theta_zod);
        let a_h = horizontal_steering(geom, path.theta_zod, path.phi_aod);
        field += (a_v * a_h.transpose()) * b;
    }
    Ok(field)
}

/// [`received_grid`] flattened to a length-`N_t` vector in unit order.
pub fn received_field(geom: &UpaGeometry, users: &[UserScenario], t: f64) -> Result<DVector<Complex64>> {
    let grid = received_grid(geom, users, t)?;
    Ok(DVector::from_column_slice(grid.as_slice()))
}

/// Reshape a unit-ordered vector into an `n_v x n_h` grid.
pub fn vector_to_grid(geom: &UpaGeometry, v: &DVector<Complex64>) -> Result<Field> {
    if v.len() != geom.n_t() {
        return Err(Error::domain(format!("vector length {} != N_t {}", v.len(), geom.n_t())));
    }
    Ok(Field::from_column_slice(geom.n_v, geom.n_h, v.as_slice()))
}

pub fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn rad(deg: f64) -> f64 {
    deg.to_radians()
}

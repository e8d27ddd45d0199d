//! Interferometric recording against a programmable reference wave, and
//! three-step phase-shifting recovery (PSIS) of the object field.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{Field, UpaGeometry};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Locally generated plane wave used for interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceWave {
    pub amplitude: f64,
    /// Propagation vector, rad/m.
    pub k_vec: [f64; 3],
    /// Global rotation applied to the whole wave, radians.
    pub phase_shift: f64,
    /// Angular frequency, rad/s. Equal to the object carrier; exposures are
    /// instantaneous so it never enters the recorded values.
    pub omega_r: f64,
}

impl ReferenceWave {
    /// Normal-incidence wave: identical phase at every unit.
    pub fn normal_incidence(amplitude: f64, geom: &UpaGeometry) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::domain(format!("reference amplitude must be positive, got {amplitude}")));
        }
        let k = 2.0 * std::f64::consts::PI / geom.lambda0;
        Ok(Self {
            amplitude,
            k_vec: [k, 0.0, 0.0],
            phase_shift: 0.0,
            omega_r: k * crate::channel::SPEED_OF_LIGHT,
        })
    }

    pub fn with_phase_shift(self, phase_shift: f64) -> Self {
        Self { phase_shift, ..self }
    }

    /// `E_r` at every unit: `A_r e^{j(k_r · r + shift)}`.
    pub fn field(&self, geom: &UpaGeometry) -> Field {
        Field::from_fn(geom.n_v, geom.n_h, |m, n| {
            let r = geom.unit_position(m, n);
            let kr = self.k_vec[0] * r[0] + self.k_vec[1] * r[1] + self.k_vec[2] * r[2];
            Complex64::from_polar(self.amplitude, kr + self.phase_shift)
        })
    }
}

/// Per-unit, per-exposure complex Gaussian perturbation of the object field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation: `E|w|² = sigma²`.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }

    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::domain(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }

    /// Noise level giving `snr_db` relative to the mean per-unit power of `field`.
    pub fn for_snr(field: &Field, snr_db: f64, seed: u64) -> Result<Self> {
        let power = field.iter().map(|x| x.norm_sqr()).sum::<f64>() / field.len() as f64;
        Self::new((power / 10f64.powf(snr_db / 10.0)).sqrt(), seed)
    }

    pub fn source(&self) -> NoiseSource {
        NoiseSource {
            sigma: self.sigma,
            rng: rng_from_seed(self.seed),
        }
    }
}

/// Stateful draw stream; each recorded exposure consumes fresh samples.
pub struct NoiseSource {
    sigma: f64,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    fn draw(&mut self) -> Complex64 {
        if self.sigma == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let s = self.sigma * std::f64::consts::FRAC_1_SQRT_2;
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hologram {
    /// `n_v x n_h` intensities.
    pub intensity: DMatrix<f64>,
    pub phase_shift: f64,
    pub geom: UpaGeometry,
}

impl Hologram {
    /// One line per vertical index, comma-separated intensities along `n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for m in 0..self.intensity.nrows() {
            let row: Vec<String> = (0..self.intensity.ncols())
                .map(|n| format_sig12(self.intensity[(m, n)]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Holograms recorded at reference shifts 0, π/2 and π.
#[derive(Debug, Clone, PartialEq)]
pub struct HologramSet {
    pub i0: Hologram,
    pub i_half: Hologram,
    pub i_pi: Hologram,
}

/// Decimal scientific notation with 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.11e}")
}

fn check_dims(object: &Field, geom: &UpaGeometry) -> Result<()> {
    if object.nrows() != geom.n_v || object.ncols() != geom.n_h {
        return Err(Error::domain(format!(
            "object field is {}x{}, geometry is {}x{}",
            object.nrows(),
            object.ncols(),
            geom.n_v,
            geom.n_h
        )));
    }
    Ok(())
}

/// Record `|E_o + w + E_r|²` at every unit, drawing `w` from `noise`.
pub fn record(
    object: &Field,
    reference: &ReferenceWave,
    geom: &UpaGeometry,
    noise: &mut NoiseSource,
) -> Result<Hologram> {
    check_dims(object, geom)?;
    let e_r = reference.field(geom);
    let mut intensity = DMatrix::zeros(geom.n_v, geom.n_h);
    // column-major walk keeps the noise stream aligned with unit order
    for n in 0..geom.n_h {
        for m in 0..geom.n_v {
            let w = noise.draw();
            intensity[(m, n)] = (object[(m, n)] + w + e_r[(m, n)]).norm_sqr();
        }
    }
    Ok(Hologram {
        intensity,
        phase_shift: reference.phase_shift,
        geom: *geom,
    })
}

/// Three exposures of a fixed object field at reference shifts 0, π/2, π.
///
/// `reference` must carry the zero-shift phase; noise for the three
/// exposures comes from one stream seeded by `noise.seed`.
pub fn record_psi_set(
    object: &Field,
    reference: &ReferenceWave,
    geom: &UpaGeometry,
    noise: &NoiseModel,
) -> Result<HologramSet> {
    let mut source = noise.source();
    let base = reference.with_phase_shift(0.0);
    Ok(HologramSet {
        i0: record(object, &base, geom, &mut source)?,
        i_half: record(object, &base.with_phase_shift(FRAC_PI_2), geom, &mut source)?,
        i_pi: record(object, &base.with_phase_shift(std::f64::consts::PI), geom, &mut source)?,
    })
}

/// Recover the object field:
/// `Ê_o = (1 − j) / (4 E_r*) · {I(0) − I(π/2) + j[I(π/2) − I(π)]}`.
pub fn psis_recover(set: &HologramSet, reference: &ReferenceWave) -> Result<Field> {
    let geom = set.i0.geom;
    if set.i_half.geom != geom || set.i_pi.geom != geom {
        return Err(Error::domain("holograms in the set have different geometries"));
    }
    let e_r = reference.with_phase_shift(0.0).field(&geom);
    let scale = Complex64::new(1.0, -1.0) / 4.0;
    let mut out = geom.zero_field();
    for n in 0..geom.n_h {
        for m in 0..geom.n_v {
            let r = e_r[(m, n)];
            if r.norm() < f64::MIN_POSITIVE.sqrt() {
                return Err(Error::SingularReference { m, n });
            }
            let (a, b, c) = (
                set.i0.intensity[(m, n)],
                set.i_half.intensity[(m, n)],
                set.i_pi.intensity[(m, n)],
            );
            let combo = Complex64::new(a - b, 0.0) + J * (b - c);
            out[(m, n)] = scale * combo / r.conj();
        }
    }
    Ok(out)
}

/// Emission coefficients `E_c = E_r · I` obtained by re-illuminating a raw
/// zero-shift hologram with the reference; contains DC, object and conjugate
/// components.
pub fn naive_reconstruction_weights(holo: &Hologram, reference: &ReferenceWave) -> Field {
    let e_r = reference.with_phase_shift(0.0).field(&holo.geom);
    e_r.zip_map(&holo.intensity, |r, i| r * i)
}

//! JSON experiment configuration.
//!
//! Every section is optional; missing fields take the defaults of the
//! reference setup (16 x 16 half-wavelength array at 3.5 GHz, `P_e = 10`,
//! SNR -10..30 dB in 5 dB steps, 500 trials).

use std::fmt;
use std::path::Path;

use holosense::channel::{rad, PathParams, UserScenario};
use holosense::experiments::{admissible_orders, two_user_scene};
use holosense::prony::Solver;
use holosense::{AngularGrid, PmcsConfig, Recovery, UpaGeometry, UserSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    PatternRaw,
    PatternPsis,
    PsisDemo,
    NmseSnr,
    NmseSize,
    NmseOrder,
    Bounds,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::PatternRaw => "pattern-raw",
            Kind::PatternPsis => "pattern-psis",
            Kind::PsisDemo => "psis-demo",
            Kind::NmseSnr => "nmse-snr",
            Kind::NmseSize => "nmse-size",
            Kind::NmseOrder => "nmse-order",
            Kind::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub n_v: usize,
    pub n_h: usize,
    pub spacing_wl: f64,
    pub f_c_hz: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            n_v: 16,
            n_h: 16,
            spacing_wl: 0.5,
            f_c_hz: 3.5e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub theta_zod_deg: f64,
    pub phi_aod_deg: f64,
    /// Defaults to `theta_zod_deg`.
    #[serde(default)]
    pub theta_zoa_deg: Option<f64>,
    /// Defaults to `phi_aod_deg`.
    #[serde(default)]
    pub phi_aoa_deg: Option<f64>,
    #[serde(default = "one")]
    pub gain_amplitude: f64,
    #[serde(default)]
    pub gain_phase_deg: f64,
    #[serde(default)]
    pub delay_s: f64,
}

/// A user is either a LOS direction with a composite gain, or a list of
/// propagation paths with optional motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<PathConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_location_m: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_v_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_v_deg: Option<f64>,
}

impl From<UserSpec> for UserConfig {
    fn from(u: UserSpec) -> Self {
        Self {
            theta_deg: Some(u.theta_deg),
            phi_deg: Some(u.phi_deg),
            amplitude: Some(u.amplitude),
            phase_deg: Some(u.phase_deg),
            ..Default::default()
        }
    }
}

impl UserConfig {
    fn check(&self, at: &str, errs: &mut Vec<String>) {
        let los = self.theta_deg.is_some() || self.phi_deg.is_some();
        match (&self.paths, los) {
            (Some(_), true) => errs.push(format!("{at}: give either theta_deg/phi_deg or paths, not both")),
            (None, false) => errs.push(format!("{at}: needs theta_deg and phi_deg, or paths")),
            (None, true) => {
                if self.theta_deg.is_none() {
                    errs.push(format!("{at}.theta_deg: missing"));
                }
                if self.phi_deg.is_none() {
                    errs.push(format!("{at}.phi_deg: missing"));
                }
                for (name, v) in [("rx_location_m", self.rx_location_m.is_some()), ("speed_mps", self.speed_mps.is_some())] {
                    if v {
                        errs.push(format!("{at}.{name}: only allowed with paths"));
                    }
                }
            }
            (Some(paths), false) => {
                if paths.is_empty() {
                    errs.push(format!("{at}.paths: must not be empty"));
                }
                if self.amplitude.is_some() || self.phase_deg.is_some() {
                    errs.push(format!("{at}: amplitude/phase_deg belong to LOS users; use gain_amplitude per path"));
                }
                for (i, p) in paths.iter().enumerate() {
                    let pat = format!("{at}.paths[{i}]");
                    check_theta(&format!("{pat}.theta_zod_deg"), p.theta_zod_deg, errs);
                    check_phi(&format!("{pat}.phi_aod_deg"), p.phi_aod_deg, errs);
                    if let Some(t) = p.theta_zoa_deg {
                        check_theta(&format!("{pat}.theta_zoa_deg"), t, errs);
                    }
                    if let Some(t) = p.phi_aoa_deg {
                        check_phi(&format!("{pat}.phi_aoa_deg"), t, errs);
                    }
                    check_finite(&format!("{pat}.gain_amplitude"), p.gain_amplitude, errs);
                    check_finite(&format!("{pat}.gain_phase_deg"), p.gain_phase_deg, errs);
                    check_finite(&format!("{pat}.delay_s"), p.delay_s, errs);
                }
                if self.speed_mps.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
                    errs.push(format!("{at}.speed_mps: must be finite and >= 0"));
                }
            }
        }
        if let Some(t) = self.theta_deg {
            check_theta(&format!("{at}.theta_deg"), t, errs);
        }
        if let Some(p) = self.phi_deg {
            check_phi(&format!("{at}.phi_deg"), p, errs);
        }
        if let Some(a) = self.amplitude {
            if !(a > 0.0 && a.is_finite()) {
                errs.push(format!("{at}.amplitude: must be positive, got {a}"));
            }
        }
    }

    pub fn scenario(&self) -> UserScenario {
        match &self.paths {
            None => UserSpec::new(
                self.theta_deg.unwrap_or(90.0),
                self.phi_deg.unwrap_or(0.0),
                self.amplitude.unwrap_or(1.0),
                self.phase_deg.unwrap_or(0.0),
            )
            .scenario(),
            Some(paths) => UserScenario {
                paths: paths
                    .iter()
                    .map(|p| PathParams {
                        theta_zod: rad(p.theta_zod_deg),
                        phi_aod: rad(p.phi_aod_deg),
                        theta_zoa: rad(p.theta_zoa_deg.unwrap_or(p.theta_zod_deg)),
                        phi_aoa: rad(p.phi_aoa_deg.unwrap_or(p.phi_aod_deg)),
                        beta: Complex64::from_polar(p.gain_amplitude, rad(p.gain_phase_deg)),
                        tau: p.delay_s,
                    })
                    .collect(),
                rx_location: self.rx_location_m.unwrap_or([0.0; 3]),
                speed: self.speed_mps.unwrap_or(0.0),
                theta_v: rad(self.theta_v_deg.unwrap_or(0.0)),
                phi_v: rad(self.phi_v_deg.unwrap_or(0.0)),
                tx_symbol: Complex64::new(1.0, 0.0),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Empty means the experiment's default scene.
    pub users: Vec<UserConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// `null` entries run noiseless.
    pub snr_db: Vec<Option<f64>>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            snr_db: (0..9).map(|i| Some(-10.0 + 5.0 * i as f64)).collect(),
            trials: 500,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PmcsSection {
    /// Defaults to the number of users.
    pub n_users: Option<usize>,
    /// Row order; defaults to 5/8 of the row length (10 for 16 units).
    pub est_order: Option<usize>,
    /// Column order; defaults to `est_order`.
    pub est_order_v: Option<usize>,
    pub solver: Solver,
    pub root_tolerance: f64,
    pub pairing_tolerance: f64,
}

impl Default for PmcsSection {
    fn default() -> Self {
        Self {
            n_users: None,
            est_order: None,
            est_order_v: None,
            solver: Solver::Pseudoinverse,
            root_tolerance: 0.1,
            pairing_tolerance: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// `φ ∈ [−90°, 90°]`.
    #[default]
    Front,
    /// `φ ∈ (−180°, 180°]`.
    FullCircle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternConfig {
    pub step_deg: f64,
    pub grid: GridKind,
    /// Hologram noise for the pattern experiments; `None` records noiselessly.
    pub snr_db: Option<f64>,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            step_deg: 1.0,
            grid: GridKind::Front,
            snr_db: None,
        }
    }
}

impl PatternConfig {
    pub fn angular_grid(&self) -> holosense::Result<AngularGrid> {
        match self.grid {
            GridKind::Front => AngularGrid::front(self.step_deg),
            GridKind::FullCircle => AngularGrid::full_circle(self.step_deg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Unit counts of square arrays for `nmse-size`.
    pub sizes: Vec<usize>,
    /// Orders for `nmse-order`; empty means every admissible order.
    pub orders: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sizes: vec![16, 64, 256, 1024],
            orders: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub draws: usize,
    /// Sample count for the root and amplitude bounds.
    pub k: usize,
    pub n: usize,
    pub est_order: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Sample counts for the Vandermonde-norm bound.
    pub lemma2_k: Vec<usize>,
    pub lemma2_max_n: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            draws: 1000,
            k: 64,
            n: 2,
            est_order: 32,
            epsilon: 1e-4,
            delta: 1e-4,
            lemma2_k: vec![16, 64, 256],
            lemma2_max_n: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// File-name prefix; defaults to the experiment name.
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// When present it must match the subcommand.
    pub experiment: Option<Kind>,
    pub geometry: GeometryConfig,
    pub scenario: ScenarioConfig,
    pub noise: NoiseConfig,
    pub pmcs: PmcsSection,
    /// Recovery series; `nmse-snr` runs each, the other sweeps use the first.
    pub recovery: Vec<Recovery>,
    pub pattern: PatternConfig,
    pub sweep: SweepConfig,
    pub bounds: BoundsConfig,
    pub output: OutputConfig,
}

/// Why a configuration was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    /// JSON syntax or type error at a 1-based line and column.
    Parse { line: usize, column: usize, message: String },
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "{m}"),
            ConfigError::Parse { line, column, message } => write!(f, "line {line}, column {column}: {message}"),
            ConfigError::Invalid(errs) => {
                write!(f, "{} invalid field(s):", errs.len())?;
                for e in errs {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
        }
    }
}

fn one() -> f64 {
    1.0
}

fn check_finite(at: &str, v: f64, errs: &mut Vec<String>) {
    if !v.is_finite() {
        errs.push(format!("{at}: must be finite"));
    }
}

fn check_theta(at: &str, v: f64, errs: &mut Vec<String>) {
    if !(0.0..=180.0).contains(&v) {
        errs.push(format!("{at}: elevation {v} outside [0, 180]"));
    }
}

fn check_phi(at: &str, v: f64, errs: &mut Vec<String>) {
    if !(v > -180.0 && v <= 180.0) {
        errs.push(format!("{at}: azimuth {v} outside (-180, 180]"));
    }
}

/// The reference pattern scene: one user at `(70°, 40°)`.
pub fn pattern_scene() -> Vec<UserSpec> {
    vec![UserSpec::new(70.0, 40.0, 1.0, 0.0)]
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fill experiment-dependent defaults and apply the seed override.
    pub fn resolve(mut self, kind: Kind, seed: Option<u64>) -> Self {
        if self.scenario.users.is_empty() {
            let scene = match kind {
                Kind::PatternRaw | Kind::PatternPsis | Kind::PsisDemo => pattern_scene(),
                _ => two_user_scene(),
            };
            self.scenario.users = scene.into_iter().map(UserConfig::from).collect();
        }
        if self.recovery.is_empty() {
            self.recovery = vec![Recovery::Psis];
        }
        if self.pmcs.n_users.is_none() {
            self.pmcs.n_users = Some(self.scenario.users.len());
        }
        if self.pmcs.est_order.is_none() {
            let n = self.pmcs.n_users.unwrap_or(1);
            self.pmcs.est_order = Some(PmcsConfig::default_order(n, self.geometry.n_h));
            self.pmcs.est_order_v = self.pmcs.est_order_v.or(Some(PmcsConfig::default_order(n, self.geometry.n_v)));
        }
        if self.pmcs.est_order_v.is_none() {
            self.pmcs.est_order_v = self.pmcs.est_order;
        }
        if kind == Kind::NmseOrder && self.sweep.orders.is_empty() {
            let n = self.pmcs.n_users.unwrap_or(1);
            self.sweep.orders = admissible_orders(n, self.geometry.n_h.min(self.geometry.n_v));
        }
        if self.output.prefix.is_none() {
            self.output.prefix = Some(kind.name().to_string());
        }
        if let Some(s) = seed {
            self.noise.seed = s;
        }
        self.experiment = self.experiment.or(Some(kind));
        self
    }

    pub fn geometry(&self) -> holosense::Result<UpaGeometry> {
        let g = &self.geometry;
        UpaGeometry::new(g.n_v, g.n_h, g.spacing_wl, g.spacing_wl, g.f_c_hz)
    }

    pub fn users(&self) -> Vec<UserScenario> {
        self.scenario.users.iter().map(UserConfig::scenario).collect()
    }

    pub fn pmcs_config(&self) -> PmcsConfig {
        let n = self.pmcs.n_users.unwrap_or(self.scenario.users.len());
        let mut cfg = PmcsConfig::new(n, self.pmcs.est_order.unwrap_or(n));
        cfg.est_order_v = self.pmcs.est_order_v.unwrap_or(cfg.est_order_h);
        cfg.solver = self.pmcs.solver;
        cfg.root_tolerance = self.pmcs.root_tolerance;
        cfg.pairing_tolerance = self.pmcs.pairing_tolerance;
        cfg
    }

    pub fn prefix(&self) -> &str {
        self.output.prefix.as_deref().unwrap_or("holosense")
    }

    /// Check a resolved configuration, collecting every problem.
    pub fn validate(&self, kind: Kind) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if let Some(k) = self.experiment {
            if k != kind {
                errs.push(format!("experiment: config names '{}' but '{}' was requested", k.name(), kind.name()));
            }
        }
        let g = &self.geometry;
        if g.n_v == 0 {
            errs.push("geometry.n_v: must be positive".into());
        }
        if g.n_h == 0 {
            errs.push("geometry.n_h: must be positive".into());
        }
        if !(g.spacing_wl > 0.0 && g.spacing_wl.is_finite()) {
            errs.push(format!("geometry.spacing_wl: must be positive, got {}", g.spacing_wl));
        }
        if !(g.f_c_hz > 0.0 && g.f_c_hz.is_finite()) {
            errs.push(format!("geometry.f_c_hz: must be positive, got {}", g.f_c_hz));
        }
        for (i, u) in self.scenario.users.iter().enumerate() {
            u.check(&format!("scenario.users[{i}]"), &mut errs);
        }
        let noise_kinds = [Kind::PsisDemo, Kind::NmseSnr, Kind::NmseSize, Kind::NmseOrder];
        if noise_kinds.contains(&kind) {
            if self.noise.snr_db.is_empty() {
                errs.push("noise.snr_db: must list at least one value (null for noiseless)".into());
            }
            if self.noise.snr_db.iter().flatten().any(|s| !s.is_finite()) {
                errs.push("noise.snr_db: values must be finite".into());
            }
            if self.noise.trials == 0 {
                errs.push("noise.trials: must be positive".into());
            }
        }
        if let Some(s) = self.pattern.snr_db {
            check_finite("pattern.snr_db", s, &mut errs);
        }
        match kind {
            Kind::PatternRaw | Kind::PatternPsis => {
                if let Err(e) = self.pattern.angular_grid() {
                    errs.push(format!("pattern.step_deg: {e}"));
                }
            }
            Kind::NmseSnr | Kind::NmseSize | Kind::NmseOrder => self.check_pmcs(kind, &mut errs),
            Kind::Bounds => self.check_bounds(&mut errs),
            Kind::PsisDemo => {}
        }
        if let Some(p) = &self.output.prefix {
            if p.is_empty() || p.contains(['/', '\\']) {
                errs.push(format!("output.prefix: '{p}' must be a non-empty file-name prefix"));
            }
        }
        if errs.is_empty() {
            // module-level preconditions that need a consistent config
            match self.geometry() {
                Err(e) => errs.push(format!("geometry: {e}")),
                Ok(geom) if kind == Kind::NmseSnr => {
                    if let Err(e) = self.pmcs_config().validate(&geom) {
                        errs.push(format!("pmcs: {e}"));
                    }
                }
                Ok(_) => {}
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    fn check_pmcs(&self, kind: Kind, errs: &mut Vec<String>) {
        let n = self.pmcs.n_users.unwrap_or(0);
        if n != self.scenario.users.len() {
            errs.push(format!(
                "pmcs.n_users: {n} does not match the {} scenario users",
                self.scenario.users.len()
            ));
        }
        if !(self.pmcs.root_tolerance > 0.0) {
            errs.push("pmcs.root_tolerance: must be positive".into());
        }
        if !(self.pmcs.pairing_tolerance > 0.0) {
            errs.push("pmcs.pairing_tolerance: must be positive".into());
        }
        if self.recovery.is_empty() {
            errs.push("recovery: must name at least one series".into());
        }
        let g = &self.geometry;
        match kind {
            Kind::NmseSnr => {
                for (name, order, k) in [
                    ("pmcs.est_order", self.pmcs.est_order, g.n_h),
                    ("pmcs.est_order_v", self.pmcs.est_order_v, g.n_v),
                ] {
                    let p = order.unwrap_or(0);
                    if p < n || p + n > k {
                        errs.push(format!("{name}: {p} outside [N, K-N] = [{n}, {}]", k as isize - n as isize));
                    }
                }
            }
            Kind::NmseSize => {
                if self.sweep.sizes.is_empty() {
                    errs.push("sweep.sizes: must not be empty".into());
                }
                for (i, &s) in self.sweep.sizes.iter().enumerate() {
                    let side = (s as f64).sqrt().round() as usize;
                    if side * side != s || s == 0 {
                        errs.push(format!("sweep.sizes[{i}]: {s} is not a perfect square"));
                    }
                }
            }
            Kind::NmseOrder => {
                let k = g.n_h.min(g.n_v);
                if self.sweep.orders.is_empty() {
                    errs.push(format!("sweep.orders: no admissible order for {n} users and {k} samples"));
                }
                for (i, &p) in self.sweep.orders.iter().enumerate() {
                    if p < n || p + n > k {
                        errs.push(format!("sweep.orders[{i}]: {p} outside [N, K-N] = [{n}, {}]", k as isize - n as isize));
                    }
                }
            }
            _ => {}
        }
    }

    fn check_bounds(&self, errs: &mut Vec<String>) {
        let b = &self.bounds;
        if b.draws == 0 {
            errs.push("bounds.draws: must be positive".into());
        }
        if b.n == 0 {
            errs.push("bounds.n: must be positive".into());
        }
        if b.est_order < b.n || b.est_order + b.n > b.k {
            errs.push(format!(
                "bounds.est_order: {} outside [N, K-N] = [{}, {}]",
                b.est_order,
                b.n,
                b.k as isize - b.n as isize
            ));
        }
        if !(b.epsilon >= 0.0 && b.epsilon.is_finite()) {
            errs.push("bounds.epsilon: must be finite and >= 0".into());
        }
        if !(b.delta >= 0.0 && b.delta.is_finite()) {
            errs.push("bounds.delta: must be finite and >= 0".into());
        }
        if b.lemma2_k.iter().any(|&k| k < 2) {
            errs.push("bounds.lemma2_k: sample counts must be at least 2".into());
        }
        if b.lemma2_max_n == 0 {
            errs.push("bounds.lemma2_max_n: must be positive".into());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_takes_defaults() {
        let c = ExperimentConfig::parse("{}").unwrap().resolve(Kind::NmseSnr, None);
        assert_eq!(c.geometry, GeometryConfig::default());
        assert_eq!(c.scenario.users.len(), 2);
        assert_eq!(c.pmcs.est_order, Some(10));
        assert_eq!(c.noise.snr_db.len(), 9);
        assert_eq!(c.prefix(), "nmse-snr");
        c.validate(Kind::NmseSnr).unwrap();
    }

    #[test]
    fn parse_error_has_position() {
        let err = ExperimentConfig::parse("{\n  \"geometry\": {\"n_v\": 16,}\n}").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(matches!(
            ExperimentConfig::parse(r#"{"geometry": {"nv": 4}}"#),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn errors_are_aggregated() {
        let c = ExperimentConfig::parse(
            r#"{"geometry": {"n_v": 0, "spacing_wl": -1},
                "scenario": {"users": [{"theta_deg": 200}]},
                "noise": {"trials": 0}}"#,
        )
        .unwrap()
        .resolve(Kind::NmseSnr, None);
        let ConfigError::Invalid(errs) = c.validate(Kind::NmseSnr).unwrap_err() else {
            panic!()
        };
        let text = errs.join("\n");
        for field in ["geometry.n_v", "geometry.spacing_wl", "scenario.users[0].theta_deg", "scenario.users[0].phi_deg", "noise.trials"] {
            assert!(text.contains(field), "{field} missing from {text}");
        }
    }

    #[test]
    fn experiment_field_must_match() {
        let c = ExperimentConfig::parse(r#"{"experiment": "bounds"}"#).unwrap();
        assert!(c.clone().resolve(Kind::Bounds, None).validate(Kind::Bounds).is_ok());
        let ConfigError::Invalid(errs) = c.resolve(Kind::NmseSnr, None).validate(Kind::NmseSnr).unwrap_err() else {
            panic!()
        };
        assert!(errs[0].starts_with("experiment:"));
    }

    #[test]
    fn path_users_build_scenarios() {
        let c = ExperimentConfig::parse(
            r#"{"scenario": {"users": [
                {"paths": [{"theta_zod_deg": 60, "phi_aod_deg": 10, "gain_amplitude": 0.5}], "speed_mps": 3}
            ]}}"#,
        )
        .unwrap()
        .resolve(Kind::PatternPsis, None);
        c.validate(Kind::PatternPsis).unwrap();
        let s = &c.users()[0];
        assert_eq!(s.paths.len(), 1);
        assert!((s.paths[0].theta_zoa - rad(60.0)).abs() < 1e-15);
        assert!((s.paths[0].beta.norm() - 0.5).abs() < 1e-15);
        assert_eq!(s.speed, 3.0);
    }

    #[test]
    fn mixed_user_forms_rejected() {
        let c = ExperimentConfig::parse(
            r#"{"scenario": {"users": [{"theta_deg": 60, "phi_deg": 0, "paths": []}]}}"#,
        )
        .unwrap()
        .resolve(Kind::PatternRaw, None);
        assert!(c.validate(Kind::PatternRaw).is_err());
    }

    #[test]
    fn seed_override_wins() {
        let c = ExperimentConfig::parse(r#"{"noise": {"seed": 5}}"#).unwrap();
        assert_eq!(c.clone().resolve(Kind::NmseSnr, None).noise.seed, 5);
        assert_eq!(c.resolve(Kind::NmseSnr, Some(9)).noise.seed, 9);
    }

    #[test]
    fn order_sweep_defaults_to_admissible_range() {
        let c = ExperimentConfig::parse("{}").unwrap().resolve(Kind::NmseOrder, None);
        assert_eq!(c.sweep.orders, (2..=14).collect::<Vec<_>>());
    }
}

//! Experiment configuration: TOML with sections, unknown keys rejected,
//! `section.key=value` overrides applied before validation.

use std::path::{Path, PathBuf};

use iskak_core::dtn_ww::DtnBackend;
use iskak_core::ik_solver::SimConfig;
use iskak_core::operators::CgSettings;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("override `{0}` must have the form key=value")]
    BadOverride(String),
    #[error("override key `{0}` does not address a table entry")]
    BadOverridePath(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dispersion,
    Convergence,
    Consistency,
    Conservation,
    Simulate,
    EllipticSuite,
    Dtn,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Dispersion,
        Experiment::Convergence,
        Experiment::Consistency,
        Experiment::Conservation,
        Experiment::Simulate,
        Experiment::EllipticSuite,
        Experiment::Dtn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Dispersion => "dispersion",
            Experiment::Convergence => "convergence",
            Experiment::Consistency => "consistency",
            Experiment::Conservation => "conservation",
            Experiment::Simulate => "simulate",
            Experiment::EllipticSuite => "elliptic-suite",
            Experiment::Dtn => "dtn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridSection,
    pub model: ModelSection,
    pub initial: InitialSection,
    pub time: TimeSection,
    pub dtn: DtnSection,
    pub fit: FitSection,
    pub checks: ChecksSection,
    pub dispersion: DispersionSection,
    pub elliptic: EllipticSection,
    pub simulate: SimulateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 1,
            output_dir: PathBuf::from("out"),
            grid: GridSection::default(),
            model: ModelSection::default(),
            initial: InitialSection::default(),
            time: TimeSection::default(),
            dtn: DtnSection::default(),
            fit: FitSection::default(),
            checks: ChecksSection::default(),
            dispersion: DispersionSection::default(),
            elliptic: EllipticSection::default(),
            simulate: SimulateSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_points: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_points: 128, length: 2.0 * std::f64::consts::PI }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub delta_list: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { delta_list: vec![0.4, 0.3, 0.2, 0.15, 0.1] }
    }
}

/// `η₀ = amplitude·cos(k₀x')`, `φ₀ = phi_amplitude·sin(k₀x')` with
/// `x' = 2πx/L`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub amplitude: f64,
    pub wavenumber: u32,
    pub phi_amplitude: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { amplitude: 0.05, wavenumber: 1, phi_amplitude: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    pub reproject_every: usize,
    pub cfl_factor: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub h_min: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            t_end: 1.0,
            dt: 5e-4,
            record_every: 20,
            reproject_every: 10,
            cfl_factor: sim.cfl_factor,
            cg_tol: sim.cg.tol,
            cg_max_iter: sim.cg.max_iter,
            h_min: sim.cg.h_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Exact,
    Series,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtnSection {
    pub backend: BackendKind,
    pub n_z: usize,
    pub order: usize,
}

impl Default for DtnSection {
    fn default() -> Self {
        Self { backend: BackendKind::Exact, n_z: 16, order: 2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Rows whose error is below ten times this value are left out of fits.
    pub noise_floor: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { noise_floor: 1e-13 }
    }
}

/// Pass/fail thresholds.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    pub min_slope: f64,
    pub control: bool,
    pub control_max_slope: f64,
    pub rest_tol: f64,
    pub mass_tol: f64,
    pub min_depth: f64,
    pub min_a: f64,
    pub band_factor: f64,
    pub identity_tol: f64,
    pub identity_delta: f64,
    pub ratio_target: f64,
    pub ratio_tol: f64,
    pub constraint_tol: f64,
    pub drift_rest_tol: f64,
    pub slope_tol: f64,
    pub flat_tol: f64,
    pub nz_change_tol: f64,
    pub closed_form_tol: f64,
    pub residual_tol: f64,
    pub symmetry_tol: f64,
    pub dtn_symmetry_tol: f64,
    pub estimate_decades: f64,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            min_slope: 5.5,
            control: true,
            control_max_slope: 2.5,
            rest_tol: 1e-11,
            mass_tol: 1e-11,
            min_depth: 0.5,
            min_a: 0.5,
            band_factor: 3.0,
            identity_tol: 1e-6,
            identity_delta: 0.3,
            ratio_target: 16.0,
            ratio_tol: 4.0,
            constraint_tol: 1e-8,
            drift_rest_tol: 1e-12,
            slope_tol: 0.3,
            flat_tol: 1e-9,
            nz_change_tol: 1e-9,
            closed_form_tol: 1e-10,
            residual_tol: 1e-8,
            symmetry_tol: 1e-10,
            dtn_symmetry_tol: 1e-8,
            estimate_decades: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionSection {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub extra_x: Vec<f64>,
    pub slope_target: f64,
    pub reference_x: f64,
    pub reference_value: f64,
    pub reference_rel_tol: f64,
}

impl Default for DispersionSection {
    fn default() -> Self {
        Self {
            x_min: 0.05,
            x_max: 0.5,
            points: 10,
            extra_x: vec![1e-3, 0.1, 1.0, 2.0],
            slope_target: 6.0,
            reference_x: 1.0,
            reference_value: 3.11e-4,
            reference_rel_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipticSection {
    pub trials: usize,
    pub h_floor: f64,
    pub modes: usize,
    pub estimate_deltas: Vec<f64>,
    pub closed_form_modes: Vec<u32>,
}

impl Default for EllipticSection {
    fn default() -> Self {
        Self {
            trials: 100,
            h_floor: 0.5,
            modes: 6,
            estimate_deltas: vec![0.05, 0.1, 0.2, 0.4],
            closed_form_modes: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimModel {
    Ik,
    Ww,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub model: SimModel,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { model: SimModel::Ik }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `a.b.c = value` inside `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::BadOverride(assignment.to_string()))?;
    let path: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::BadOverride(assignment.to_string()));
    }
    let (last, parents) = path.split_last().expect("split yields at least one element");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::BadOverridePath(key.to_string()))?;
    }
    cur.insert(last.to_string(), parse_value(raw));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.model.delta_list.is_empty() {
            return bad("model.delta_list must not be empty".into());
        }
        if let Some(d) = self.model.delta_list.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return bad(format!("every delta must lie in (0, 1], got {d}"));
        }
        if self.initial.amplitude.is_nan() || self.initial.amplitude < 0.0 {
            return bad(format!("initial.amplitude must be >= 0, got {}", self.initial.amplitude));
        }
        if !self.initial.phi_amplitude.is_finite() {
            return bad("initial.phi_amplitude must be finite".into());
        }
        if self.grid.n_points < 8 || !self.grid.n_points.is_multiple_of(2) {
            return bad(format!("grid.n_points must be even and >= 8, got {}", self.grid.n_points));
        }
        if !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            return bad(format!("grid.length must be positive, got {}", self.grid.length));
        }
        if !(self.time.t_end > 0.0 && self.time.dt > 0.0) {
            return bad("time.t_end and time.dt must be positive".into());
        }
        if self.time.record_every == 0 {
            return bad("time.record_every must be >= 1".into());
        }
        if self.fit.noise_floor.is_nan() || self.fit.noise_floor < 0.0 {
            return bad("fit.noise_floor must be >= 0".into());
        }
        self.backend().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn backend(&self) -> DtnBackend {
        match self.dtn.backend {
            BackendKind::Exact => DtnBackend::Exact { n_z: self.dtn.n_z },
            BackendKind::Series => DtnBackend::Series { order: self.dtn.order },
        }
    }

    pub fn cg(&self) -> CgSettings {
        CgSettings { tol: self.time.cg_tol, max_iter: self.time.cg_max_iter, h_min: self.time.h_min }
    }

    pub fn sim(&self, keep_trajectory: bool) -> SimConfig {
        SimConfig {
            t_end: self.time.t_end,
            dt: self.time.dt,
            reproject_every: self.time.reproject_every,
            record_every: self.time.record_every,
            cfl_factor: self.time.cfl_factor,
            cg: self.cg(),
            keep_trajectory,
        }
    }

    /// Sorted copy of the δ list, largest first.
    pub fn deltas(&self) -> Vec<f64> {
        let mut d = self.model.delta_list.clone();
        d.sort_by(|a, b| b.total_cmp(a));
        d.dedup();
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_text() {
        let c = ExperimentConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(c.grid.n_points, 128);
        assert_eq!(c.backend(), DtnBackend::Exact { n_z: 16 });
        assert_eq!(c.deltas(), vec![0.4, 0.3, 0.2, 0.15, 0.1]);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::from_toml_str("[grid]\nn_pointz = 64\n", &[]).unwrap_err();
        assert!(err.to_string().contains("n_pointz"), "{err}");
        let err = ExperimentConfig::from_toml_str("[gird]\n", &[]).unwrap_err();
        assert!(err.to_string().contains("gird"), "{err}");
    }

    #[test]
    fn overrides_replace_and_create_entries() {
        let c = ExperimentConfig::from_toml_str(
            "[grid]\nn_points = 64\n",
            &["grid.n_points=32".into(), "model.delta_list=[0.5]".into(), "dtn.backend=series".into()],
        )
        .unwrap();
        assert_eq!(c.grid.n_points, 32);
        assert_eq!(c.model.delta_list, vec![0.5]);
        assert_eq!(c.backend(), DtnBackend::Series { order: 2 });
        assert!(ExperimentConfig::from_toml_str("", &["grid.n_points".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str("seed = 3\n", &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn validation() {
        for bad in ["model.delta_list=[]", "model.delta_list=[1.5]", "initial.amplitude=-1", "grid.n_points=7", "dtn.n_z=4"] {
            assert!(ExperimentConfig::from_toml_str("", &[bad.to_string()]).is_err(), "{bad}");
        }
        assert_eq!(Experiment::parse("elliptic-suite"), Some(Experiment::EllipticSuite));
        assert_eq!(Experiment::parse("nope"), None);
    }
}

//! TOML run configuration: parsing, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::characteristics::Coordinates;
use crate::error::{Error, Result};
use crate::geometry::{Background, GhostPolicy};
use crate::harness::{InitialData, Preset, KRUZHKOV_LEVELS};
use crate::model::{burgers_model, FluxModel, Polynomial, MAX_POLY_DEGREE};
use crate::scheme::{Boundaries, FluxKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Burgers,
    Custom,
}

/// Polynomial coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub f: Vec<f64>,
    #[serde(default = "zero_poly")]
    pub h: Vec<f64>,
}

fn zero_poly() -> Vec<f64> {
    vec![0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharacteristicsConfig {
    pub coordinates: Coordinates,
    pub r0: f64,
    pub u0: f64,
    pub ds: f64,
    pub s_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_stop: Option<f64>,
    /// Shift `R0` of the interior slicing.
    pub r0_shift: f64,
}

impl Default for CharacteristicsConfig {
    fn default() -> Self {
        Self {
            coordinates: Coordinates::Exterior,
            r0: 8.0,
            u0: 0.6,
            ds: 1e-3,
            s_max: 10.0,
            r_stop: None,
            r0_shift: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyConfig {
    pub r0: f64,
    pub u0: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self { r0: 4.0, u0: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    /// `smooth`, `riemann`, `flat`, or `config` for the top-level problem.
    pub preset: String,
    pub levels: usize,
    pub oracle_cells: Vec<usize>,
    pub drift_cells: Vec<usize>,
    pub trials: usize,
    pub fuzz_cells: usize,
    pub max_steps: usize,
    pub max_mass: f64,
    pub tau_scale: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            preset: "smooth".into(),
            levels: 4,
            oracle_cells: vec![100, 200, 400, 800],
            drift_cells: vec![100, 200, 400, 800],
            trials: 100,
            fuzz_cells: 200,
            max_steps: 2000,
            max_mass: 2.0,
            tau_scale: 1.0,
        }
    }
}

fn default_cfl() -> f64 {
    0.9
}

fn default_levels() -> Vec<f64> {
    KRUZHKOV_LEVELS.to_vec()
}

fn default_seed() -> u64 {
    42
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_initial() -> InitialData {
    InitialData::Gaussian {
        amplitude: 0.5,
        center: 6.0,
        width: 1.0,
    }
}

/// A fully resolved run description. Tables come last so the struct serializes to TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub mass: f64,
    pub r_max: f64,
    pub cells: usize,
    pub t_end: f64,
    #[serde(default = "default_flux")]
    pub flux: FluxKind,
    #[serde(default = "default_cfl")]
    pub cfl_fraction: f64,
    /// Keep every k-th step; 0 keeps only the initial and final states.
    #[serde(default)]
    pub snapshot_every: u64,
    #[serde(default)]
    pub outer_boundary: GhostPolicy,
    #[serde(default)]
    pub entropy_diagnostics: bool,
    #[serde(default = "default_levels")]
    pub kruzhkov_levels: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomModel>,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub characteristics: CharacteristicsConfig,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default)]
    pub harness: HarnessConfig,
}

fn default_flux() -> FluxKind {
    FluxKind::Godunov
}

/// 1-based line of the first `key = ...` assignment, or 0 if the key is absent.
fn line_of(source: &str, key: &str) -> usize {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    source
        .lines()
        .position(|line| {
            let t = line.trim_start();
            t.strip_prefix(leaf)
                .map(|rest| rest.trim_start().starts_with('='))
                .unwrap_or(false)
        })
        .map_or(0, |i| i + 1)
}

fn config_error(source: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        line: line_of(source, key),
        message: message.into(),
    }
}

fn from_toml_error(source: &str, err: toml::de::Error) -> Error {
    let message = err.message().to_string();
    let line = err
        .span()
        .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1);
    let quoted = message.split('`').nth(1).map(str::to_string);
    let key = quoted.unwrap_or_else(|| {
        line.and_then(|l| source.lines().nth(l - 1))
            .and_then(|text| text.split('=').next())
            .map(|k| k.trim().to_string())
            .unwrap_or_default()
    });
    let line = match line {
        Some(l) => l,
        None => line_of(source, &key),
    };
    Error::Config { key, line, message }
}

impl RunConfig {
    pub fn parse(source: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(source).map_err(|e| from_toml_error(source, e))?;
        cfg.validate(source)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)?;
        Self::parse(&source)
    }

    /// Checks every constraint; `source` is only used to locate offending keys.
    pub fn validate(&self, source: &str) -> Result<()> {
        let err = |key: &str, msg: String| Err(config_error(source, key, msg));
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return err("mass", format!("mass must be a finite value >= 0, got {}", self.mass));
        }
        if self.cells < 2 {
            return err("cells", format!("cells >= 2 required, got {}", self.cells));
        }
        if !(self.r_max > 2.0 * self.mass) || !self.r_max.is_finite() {
            return err("r_max", format!("r_max must exceed the horizon 2M = {}", 2.0 * self.mass));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return err("t_end", format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.cfl_fraction > 0.0 && self.cfl_fraction <= 1.0) {
            return err("cfl_fraction", format!("cfl_fraction must lie in (0, 1], got {}", self.cfl_fraction));
        }
        if let Some(k) = self.kruzhkov_levels.iter().find(|k| !(-1.0..=1.0).contains(*k)) {
            return err("kruzhkov_levels", format!("Kruzhkov level {k} outside [-1, 1]"));
        }
        match (self.model, &self.custom) {
            (ModelChoice::Custom, None) => {
                return err("model", "model = \"custom\" needs a [custom] table with coefficients f and h".into())
            }
            (ModelChoice::Custom, Some(c)) => {
                for (key, coeffs) in [("custom.f", &c.f), ("custom.h", &c.h)] {
                    if coeffs.is_empty() || coeffs.len() > MAX_POLY_DEGREE + 1 {
                        return err(key, format!("between 1 and {} coefficients required", MAX_POLY_DEGREE + 1));
                    }
                }
            }
            (ModelChoice::Burgers, Some(_)) => {
                return err("custom", "[custom] is only used with model = \"custom\"".into())
            }
            (ModelChoice::Burgers, None) => {}
        }
        if let Err(e) = self.initial.validate() {
            return err("initial", e.to_string());
        }
        let c = &self.characteristics;
        if !(c.ds > 0.0) || !(c.s_max >= 0.0) {
            return err("characteristics.ds", "ds must be positive and s_max nonnegative".into());
        }
        if !(c.u0.abs() <= 1.0) {
            return err("characteristics.u0", format!("u0 must lie in [-1, 1], got {}", c.u0));
        }
        if !(c.r0 > 2.0 * self.mass) {
            return err("characteristics.r0", "r0 must lie outside the horizon".into());
        }
        let s = &self.steady;
        if !(s.r0 > 2.0 * self.mass) {
            return err("steady.r0", "r0 must lie outside the horizon".into());
        }
        if !(s.u0.abs() < 1.0) {
            return err("steady.u0", format!("u0 must satisfy |u0| < 1, got {}", s.u0));
        }
        let h = &self.harness;
        if !["smooth", "riemann", "flat", "config"].contains(&h.preset.as_str()) {
            return err("harness.preset", format!("unknown preset '{}'", h.preset));
        }
        if h.levels < 3 {
            return err("harness.levels", format!("levels >= 3 required, got {}", h.levels));
        }
        for (key, list) in [("harness.oracle_cells", &h.oracle_cells), ("harness.drift_cells", &h.drift_cells)] {
            if list.len() < 2 || list.iter().any(|&n| n < 2) {
                return err(key, "at least two cell counts, each >= 2".into());
            }
        }
        if h.trials < 1 {
            return err("harness.trials", "trials >= 1 required".into());
        }
        if h.fuzz_cells < 2 || h.max_steps < 1 {
            return err("harness.fuzz_cells", "fuzz_cells >= 2 and max_steps >= 1 required".into());
        }
        if !(h.max_mass >= 0.0 && h.max_mass.is_finite()) {
            return err("harness.max_mass", "max_mass must be finite and >= 0".into());
        }
        if !(h.tau_scale > 0.0 && h.tau_scale <= 1.0) {
            return err(
                "harness.tau_scale",
                format!("tau_scale must lie in (0, 1] to respect the stability bound, got {}", h.tau_scale),
            );
        }
        Ok(())
    }

    pub fn model(&self) -> Result<FluxModel> {
        match (&self.model, &self.custom) {
            (ModelChoice::Burgers, _) => Ok(burgers_model()),
            (ModelChoice::Custom, Some(c)) => {
                FluxModel::from_polynomials("custom", Polynomial::new(c.f.clone())?, Polynomial::new(c.h.clone())?)
            }
            (ModelChoice::Custom, None) => Err(Error::Config {
                key: "custom".into(),
                line: 0,
                message: "missing [custom] table".into(),
            }),
        }
    }

    pub fn background(&self) -> Result<Background> {
        Background::new(self.mass)
    }

    pub fn boundaries(&self) -> Boundaries {
        Boundaries {
            inner: GhostPolicy::Copy,
            outer: self.outer_boundary,
        }
    }

    /// The top-level problem as a preset.
    pub fn as_preset(&self) -> Result<Preset> {
        Ok(Preset {
            name: "config".into(),
            model: self.model()?,
            mass: self.mass,
            r_max: self.r_max,
            cells: self.cells,
            t_end: self.t_end,
            flux: self.flux,
            cfl_fraction: self.cfl_fraction,
            boundaries: self.boundaries(),
            initial: self.initial.clone(),
        })
    }

    pub fn harness_preset(&self) -> Result<Preset> {
        match self.harness.preset.as_str() {
            "config" => self.as_preset(),
            name => Preset::by_name(name),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }
}

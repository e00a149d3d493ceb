//! Scenario configuration in laboratory units.
//!
//! Files are JSON; lines whose first non-blank character is `#` are
//! dropped before parsing.

use std::fmt;

use eit_core::cooling::{BeamGeometry, MotionalMode, SidebandModel, SidebandOptions, DEFAULT_DIFFUSION_WEIGHT};
use eit_core::spectra::DressedModel;
use eit_core::thermometry::{ReleaseSetup, DEFAULT_TAUS_US, STANDARD_GRAVITY};
use eit_core::trap::TrapSpec;
use eit_core::types::{from_khz, from_mhz, saturation_to_rabi};
use eit_core::{LambdaParams, PhysicalConstants};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Spectrum,
    SpectrumObe,
    CoolingMap,
    CoolingDynamics,
    Thermometry,
    InvertTemperature,
    FitFano,
    FitExp,
    Presets,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::SpectrumObe => "spectrum-obe",
            Scenario::CoolingMap => "cooling-map",
            Scenario::CoolingDynamics => "cooling-dynamics",
            Scenario::Thermometry => "thermometry",
            Scenario::InvertTemperature => "invert-temperature",
            Scenario::FitFano => "fit-fano",
            Scenario::FitExp => "fit-exp",
            Scenario::Presets => "presets",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    /// Artifact stem relative to the output directory; the scenario picks
    /// the extensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sideband: Option<SidebandConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermometry: Option<ThermometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inversion: Option<InversionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<CountsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitInputConfig>,
}

fn default_gamma_mhz() -> f64 {
    6.07
}

fn default_branching() -> [f64; 2] {
    [0.5, 0.5]
}

/// Rabi frequencies as Ω/2π in MHz or as saturation parameters; exactly
/// one form per beam. Δp defaults to Δc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_p_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_p_mhz: Option<f64>,
    pub delta_c_mhz: f64,
    #[serde(default = "default_gamma_mhz")]
    pub gamma_mhz: f64,
    /// Fractions of e → g and e → g′ decays.
    #[serde(default = "default_branching")]
    pub branching: [f64; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FanoModelName {
    Perturbative,
    #[default]
    ProbeCorrected,
}

impl From<FanoModelName> for DressedModel {
    fn from(m: FanoModelName) -> Self {
        match m {
            FanoModelName::Perturbative => DressedModel::Perturbative,
            FanoModelName::ProbeCorrected => DressedModel::ProbeCorrected,
        }
    }
}

/// Probe-detuning grid, absolute Δp/2π in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub points: usize,
    #[serde(default)]
    pub model: FanoModelName,
    /// Sum over the three σ-Λ configurations of the F=2 → F′=3 line, with
    /// the configured Rabi frequencies taken as those of the cycling
    /// transition.
    #[serde(default)]
    pub multi_lambda: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub delta_p_center_mhz: f64,
    pub delta_c_center_mhz: f64,
    pub half_range_mhz: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeAxis {
    Radial,
    Axial,
}

/// Motional mode. Either a beam-geometry axis or an explicit η.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub trap_khz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<ModeAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

fn default_diffusion() -> f64 {
    DEFAULT_DIFFUSION_WEIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidebandConfig {
    #[serde(default)]
    pub model: SidebandModel,
    #[serde(default = "default_diffusion")]
    pub diffusion_weight: f64,
}

impl Default for SidebandConfig {
    fn default() -> Self {
        Self {
            model: SidebandModel::default(),
            diffusion_weight: DEFAULT_DIFFUSION_WEIGHT,
        }
    }
}

/// Initial occupation as `n0` or as a temperature `t0_uk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_uk: Option<f64>,
    pub t_max_ms: f64,
    pub points: usize,
}

fn default_taus() -> Vec<f64> {
    DEFAULT_TAUS_US.to_vec()
}

fn default_sampling() -> [f64; 2] {
    [73.0, 10.0]
}

fn default_gravity() -> [f64; 3] {
    [STANDARD_GRAVITY, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermometryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_uk: Option<f64>,
    #[serde(default = "default_taus")]
    pub taus_us: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub trap: TrapSpec,
    /// (radial, axial) frequencies in kHz for sampling the initial state.
    #[serde(default = "default_sampling")]
    pub sampling_khz: [f64; 2],
    /// m/s², trap frame (beam along z).
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
}

/// Temperature grid and simulation size for the inversion. Without
/// `measured_path` the measured curve is synthesised from
/// `params.thermometry` with an independent seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_path: Option<String>,
    pub t_min_uk: f64,
    pub t_max_uk: f64,
    pub t_step_uk: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsConfig {
    pub rate_scale_cps: f64,
    pub duration_ms: f64,
    pub background_cps: f64,
}

/// Fit input: a CSV file, or inline `[t_ms, temperature_uk]` pairs for
/// the exponential fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitInputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
}

pub fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_value(text: &str) -> ConfigResult<Value> {
    serde_json::from_str(&strip_comments(text)).map_err(|e| ConfigError::new("", format!("invalid JSON: {e}")))
}

pub fn from_value(value: Value) -> ConfigResult<ScenarioConfig> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { String::new() } else { path };
        ConfigError::new(key, e.inner().to_string())
    })
}

pub fn parse_config(text: &str) -> ConfigResult<ScenarioConfig> {
    from_value(parse_value(text)?)
}

pub fn to_value(config: &ScenarioConfig) -> Value {
    serde_json::to_value(config).expect("config serialises")
}

/// Single-line canonical form, used for hashing and provenance.
pub fn canonical_json(config: &ScenarioConfig) -> String {
    serde_json::to_string(config).expect("config serialises")
}

/// Sets a dotted path, creating objects as needed. The value is read as
/// JSON, falling back to a plain string.
pub fn set_path(root: &mut Value, path: &str, raw: &str) -> ConfigResult<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path_value(root, path, value)
}

pub fn set_path_value(root: &mut Value, path: &str, value: Value) -> ConfigResult<()> {
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(ConfigError::new(path, "malformed key path"));
    }
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            _ => {
                return Err(ConfigError::new(parts[..i].join("."), "is not an object"));
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    unreachable!()
}

pub fn get_path<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(root, |node, part| node.get(part))
}

/// Parses `key=value` overrides.
pub fn split_override(arg: &str) -> ConfigResult<(&str, &str)> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| ConfigError::new(arg, "override must have the form key=value"))
}

// Validation helpers; each names the key it checks.

pub(crate) fn finite(key: &str, v: f64) -> ConfigResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(key, format!("must be finite (got {v})")))
    }
}

pub(crate) fn positive(key: &str, v: f64) -> ConfigResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(key, format!("must be > 0 (got {v})")))
    }
}

pub(crate) fn non_negative(key: &str, v: f64) -> ConfigResult<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(key, format!("must be >= 0 (got {v})")))
    }
}

pub(crate) fn require<'a, T>(key: &str, v: &'a Option<T>) -> ConfigResult<&'a T> {
    v.as_ref().ok_or_else(|| ConfigError::new(key, "is required for this scenario"))
}

fn rabi(prefix: &str, beam: char, mhz: Option<f64>, s: Option<f64>, gamma: f64) -> ConfigResult<f64> {
    let k_mhz = format!("{prefix}.omega_{beam}_mhz");
    let k_s = format!("{prefix}.s_{beam}");
    match (mhz, s) {
        (Some(f), None) => Ok(from_mhz(non_negative(&k_mhz, f)?)),
        (None, Some(s)) => saturation_to_rabi(non_negative(&k_s, s)?, gamma)
            .map_err(|e| ConfigError::new(k_s, e.to_string())),
        (Some(_), Some(_)) => Err(ConfigError::new(k_mhz, format!("give either this or {k_s}, not both"))),
        (None, None) => Err(ConfigError::new(k_mhz, format!("one of this or {k_s} is required"))),
    }
}

impl LambdaConfig {
    pub fn resolve(&self, prefix: &str) -> ConfigResult<LambdaParams> {
        let gamma = from_mhz(positive(&format!("{prefix}.gamma_mhz"), self.gamma_mhz)?);
        let omega_p = rabi(prefix, 'p', self.omega_p_mhz, self.s_p, gamma)?;
        let omega_c = rabi(prefix, 'c', self.omega_c_mhz, self.s_c, gamma)?;
        let delta_c = from_mhz(finite(&format!("{prefix}.delta_c_mhz"), self.delta_c_mhz)?);
        let delta_p = match self.delta_p_mhz {
            Some(d) => from_mhz(finite(&format!("{prefix}.delta_p_mhz"), d)?),
            None => delta_c,
        };
        let key = format!("{prefix}.branching");
        let [bg, bgp] = self.branching;
        non_negative(&key, bg)?;
        non_negative(&key, bgp)?;
        if bg + bgp > 1.0 + 1e-12 {
            return Err(ConfigError::new(key, format!("fractions must sum to <= 1 (got {})", bg + bgp)));
        }
        LambdaParams::with_branching(omega_p, omega_c, delta_p, delta_c, gamma, bg, bgp)
            .map_err(|e| ConfigError::new(prefix, e.to_string()))
    }
}

impl ModeConfig {
    pub fn resolve(&self, prefix: &str) -> ConfigResult<MotionalMode> {
        let omega = from_khz(positive(&format!("{prefix}.trap_khz"), self.trap_khz)?);
        let c = PhysicalConstants::CODATA;
        let mode = match (self.eta, self.axis) {
            (Some(eta), None) => MotionalMode::new(omega, c.mass_rb87, finite(&format!("{prefix}.eta"), eta)?, 0.0),
            (None, axis) => {
                let geometry = match axis.unwrap_or(ModeAxis::Radial) {
                    ModeAxis::Radial => BeamGeometry::tweezer_radial(&c),
                    ModeAxis::Axial => BeamGeometry::tweezer_axial(&c),
                };
                MotionalMode::from_geometry(&geometry, omega, c.mass_rb87, 0.0)
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(format!("{prefix}.eta"), format!("give either this or {prefix}.axis")))
            }
        };
        mode.map_err(|e| ConfigError::new(prefix, e.to_string()))
    }
}

impl SidebandConfig {
    pub fn resolve(&self, prefix: &str) -> ConfigResult<SidebandOptions> {
        Ok(SidebandOptions {
            model: self.model,
            diffusion_weight: non_negative(&format!("{prefix}.diffusion_weight"), self.diffusion_weight)?,
        })
    }
}

impl ThermometryConfig {
    pub fn setup(&self, prefix: &str) -> ConfigResult<ReleaseSetup> {
        let trap = self
            .trap
            .to_geometry(PhysicalConstants::CODATA.mass_rb87)
            .map_err(|e| ConfigError::new(format!("{prefix}.trap"), e.to_string()))?;
        let key = format!("{prefix}.sampling_khz");
        let setup = ReleaseSetup {
            trap,
            sampling_frequencies: (
                from_khz(positive(&key, self.sampling_khz[0])?),
                from_khz(positive(&key, self.sampling_khz[1])?),
            ),
            gravity: self.gravity,
        };
        for g in self.gravity {
            finite(&format!("{prefix}.gravity"), g)?;
        }
        setup.validate().map_err(|e| ConfigError::new(prefix, e.to_string()))?;
        Ok(setup)
    }

    pub fn taus(&self, prefix: &str) -> ConfigResult<Vec<f64>> {
        let key = format!("{prefix}.taus_us");
        if self.taus_us.is_empty() {
            return Err(ConfigError::new(key, "must not be empty"));
        }
        for t in &self.taus_us {
            non_negative(&key, *t)?;
        }
        if self.taus_us.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::new(key, "must be strictly increasing"));
        }
        Ok(self.taus_us.iter().map(|t| t * 1e-6).collect())
    }

    pub fn trials(&self, prefix: &str) -> ConfigResult<u64> {
        if self.trials == 0 {
            return Err(ConfigError::new(format!("{prefix}.trials"), "must be >= 1"));
        }
        Ok(self.trials)
    }
}

/// `start..=stop` with `points` entries; checks ordering and size.
pub(crate) fn grid(prefix: &str, start: f64, stop: f64, points: usize) -> ConfigResult<Vec<f64>> {
    finite(&format!("{prefix}.start_mhz"), start)?;
    finite(&format!("{prefix}.stop_mhz"), stop)?;
    if points < 2 {
        return Err(ConfigError::new(format!("{prefix}.points"), format!("must be >= 2 (got {points})")));
    }
    if stop <= start {
        return Err(ConfigError::new(format!("{prefix}.stop_mhz"), "must exceed start_mhz"));
    }
    Ok(eit_core::types::linspace(start, stop, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
# comment line
{
  "scenario": "spectrum",
  "seed": 3,
  "params": {
    # another comment
    "lambda": { "s_p": 1.0, "s_c": 3.92, "delta_c_mhz": -80.0 },
    "scan": { "start_mhz": -81.0, "stop_mhz": -79.0, "points": 11 }
  }
}
"#;

    #[test]
    fn parses_with_comments_and_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.scenario, Scenario::Spectrum);
        let l = c.params.lambda.as_ref().unwrap();
        assert_eq!(l.gamma_mhz, 6.07);
        assert_eq!(l.branching, [0.5, 0.5]);
        let p = l.resolve("params.lambda").unwrap();
        assert_eq!(p.delta_p, p.delta_c);
        assert!((p.omega_c / p.gamma - 1.4).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("\"s_p\"", "\"s_probe\"");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.key, "params.lambda.s_probe");
        assert!(err.message.contains("s_probe"), "{err}");
    }

    #[test]
    fn validation_names_key() {
        let text = MINIMAL.replace("\"s_p\": 1.0", "\"s_p\": -1.0");
        let c = parse_config(&text).unwrap();
        let err = c.params.lambda.unwrap().resolve("params.lambda").unwrap_err();
        assert_eq!(err.key, "params.lambda.s_p");
        let both = MINIMAL.replace("\"s_p\": 1.0", "\"s_p\": 1.0, \"omega_p_mhz\": 2.0");
        let err = parse_config(&both).unwrap().params.lambda.unwrap().resolve("params.lambda").unwrap_err();
        assert_eq!(err.key, "params.lambda.omega_p_mhz");
    }

    #[test]
    fn round_trip_is_identity() {
        let c = parse_config(MINIMAL).unwrap();
        let back = parse_config(&canonical_json(&c)).unwrap();
        assert_eq!(c, back);
        assert_eq!(canonical_json(&c), canonical_json(&back));
    }

    #[test]
    fn overrides() {
        let mut v = parse_value(MINIMAL).unwrap();
        set_path(&mut v, "params.lambda.delta_c_mhz", "-60").unwrap();
        set_path(&mut v, "params.mode.trap_khz", "73").unwrap();
        set_path(&mut v, "output_path", "run1").unwrap();
        assert_eq!(get_path(&v, "params.lambda.delta_c_mhz").unwrap().as_f64(), Some(-60.0));
        assert_eq!(get_path(&v, "output_path").unwrap().as_str(), Some("run1"));
        assert!(set_path(&mut v, "seed.x", "1").is_err());
        assert!(set_path(&mut v, "a..b", "1").is_err());
        assert!(split_override("novalue").is_err());
        assert_eq!(split_override("a.b = 2").unwrap(), ("a.b", "2"));
    }
}

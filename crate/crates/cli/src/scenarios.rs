//! Resolve a configuration into a validated plan, then execute it.

use std::fmt;
use std::fmt::Write as _;

use eit_core::bloch::excitation_spectrum_obe;
use eit_core::cooling::{
    cooling_map, cooling_rate, phonon_dynamics, phonon_to_temperature, sideband_rates_with, steady_state_phonon,
    temperature_to_phonon, MotionalMode, SidebandOptions,
};
use eit_core::fit::{fit_exponential, fit_fano, simulate_photon_counts};
use eit_core::rng::derive_seed;
use eit_core::spectra::{
    dressed_pair, fano_spectrum, multi_lambda_components, multi_lambda_spectrum, DressedModel, RB87_CYCLING_CG2,
    RB87_F2_F3_SIGMA_LAMBDAS,
};
use eit_core::thermometry::{chi2_profile, infer_temperature, recapture_curve, RecaptureCurve, ReleaseSetup};
use eit_core::types::{from_mhz, linspace, to_khz, to_mhz};
use eit_core::{LambdaParams, Spectrum, SpectrumKind};
use serde_json::json;

use crate::config::{
    grid, non_negative, positive, require, ConfigError, FitInputConfig, Scenario, ScenarioConfig, ThermometryConfig,
};
use crate::presets;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numeric { scenario: &'static str, message: String },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Numeric { scenario, message } => write!(f, "{scenario} failed: {message}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

fn numeric(scenario: Scenario) -> impl Fn(eit_core::Error) -> CliError {
    move |e| CliError::Numeric {
        scenario: scenario.name(),
        message: e.to_string(),
    }
}

/// One output file: `<stem><suffix>`, body without the provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub suffix: String,
    pub body: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}

enum SpectrumSource {
    Single(LambdaParams, DressedModel),
    Multi(LambdaParams, DressedModel),
}

impl SpectrumSource {
    fn spectrum(&self, scan: &[f64]) -> eit_core::Result<Spectrum> {
        match self {
            SpectrumSource::Single(p, m) => fano_spectrum(scan, p, *m),
            SpectrumSource::Multi(p, m) => multi_lambda_spectrum(
                &multi_lambda_components(p, &RB87_F2_F3_SIGMA_LAMBDAS, RB87_CYCLING_CG2),
                scan,
                *m,
            ),
        }
    }
}

enum Measured {
    Curve(RecaptureCurve),
    Synthetic { temperature: f64, trials: u64 },
}

enum FanoInput {
    File(Spectrum),
    Synthetic {
        source: SpectrumSource,
        grid: Vec<f64>,
        rate_scale: f64,
        duration: f64,
        background: f64,
    },
}

enum Plan {
    Spectrum {
        source: SpectrumSource,
        grid: Vec<f64>,
    },
    SpectrumObe {
        params: LambdaParams,
        grid: Vec<f64>,
    },
    CoolingMap {
        params: LambdaParams,
        delta_p: Vec<f64>,
        delta_c: Vec<f64>,
        mode: MotionalMode,
        opts: SidebandOptions,
    },
    CoolingDynamics {
        params: LambdaParams,
        mode: MotionalMode,
        opts: SidebandOptions,
        n0: f64,
        times: Vec<f64>,
    },
    Thermometry {
        temperature: f64,
        taus: Vec<f64>,
        trials: u64,
        setup: ReleaseSetup,
    },
    Invert {
        measured: Measured,
        taus: Vec<f64>,
        setup: ReleaseSetup,
        grid: Vec<f64>,
        trials: u64,
    },
    FitFano(FanoInput),
    FitExp(Vec<(f64, f64)>),
    Presets,
}

fn read_input(key: &str, path: &str) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::new(key, format!("cannot read {path}: {e}")))
}

fn spectrum_source(config: &ScenarioConfig) -> Result<(SpectrumSource, Vec<f64>), ConfigError> {
    let p = &config.params;
    let params = require("params.lambda", &p.lambda)?.resolve("params.lambda")?;
    let scan = require("params.scan", &p.scan)?;
    let g = grid("params.scan", scan.start_mhz, scan.stop_mhz, scan.points)?;
    let model = DressedModel::from(scan.model);
    let source = if scan.multi_lambda {
        SpectrumSource::Multi(params, model)
    } else {
        SpectrumSource::Single(params, model)
    };
    if model == DressedModel::Perturbative && params.delta_c == 0.0 {
        return Err(ConfigError::new("params.scan.model", "perturbative model needs delta_c_mhz != 0"));
    }
    Ok((source, g.into_iter().map(from_mhz).collect()))
}

fn thermometry_section(config: &ScenarioConfig) -> Result<&ThermometryConfig, ConfigError> {
    require("params.thermometry", &config.params.thermometry)
}

fn exp_points(fit: &FitInputConfig) -> Result<Vec<(f64, f64)>, ConfigError> {
    let raw: Vec<[f64; 2]> = match (&fit.input_path, &fit.points) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::new("params.fit.points", "give either this or params.fit.input_path"))
        }
        (None, Some(pts)) => pts.clone(),
        (Some(path), None) => {
            let text = read_input("params.fit.input_path", path)?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_ascii_alphabetic()) {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').collect();
                let parse = |s: &str| s.trim().parse::<f64>();
                match (cols.first().map(|s| parse(s)), cols.get(1).map(|s| parse(s))) {
                    (Some(Ok(t)), Some(Ok(v))) => out.push([t, v]),
                    _ => {
                        return Err(ConfigError::new(
                            "params.fit.input_path",
                            format!("{path}:{}: expected t_ms,temperature_uk", i + 1),
                        ))
                    }
                }
            }
            out
        }
        (None, None) => return Err(ConfigError::new("params.fit.points", "one of this or params.fit.input_path is required")),
    };
    for [t, v] in &raw {
        crate::config::finite("params.fit.points", *t)?;
        non_negative("params.fit.points", *v)?;
    }
    if raw.len() < 4 {
        return Err(ConfigError::new("params.fit.points", format!("need at least 4 points (got {})", raw.len())));
    }
    if raw.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(ConfigError::new("params.fit.points", "times must be strictly increasing"));
    }
    Ok(raw.iter().map(|[t, v]| (t * 1e-3, v * 1e-6)).collect())
}

fn prepare(config: &ScenarioConfig) -> Result<Plan, ConfigError> {
    let p = &config.params;
    Ok(match config.scenario {
        Scenario::Spectrum => {
            let (source, grid) = spectrum_source(config)?;
            Plan::Spectrum { source, grid }
        }
        Scenario::SpectrumObe => {
            let (source, grid) = spectrum_source(config)?;
            let params = match source {
                SpectrumSource::Single(p, _) => p,
                SpectrumSource::Multi(..) => {
                    return Err(ConfigError::new("params.scan.multi_lambda", "not supported for spectrum-obe"))
                }
            };
            if params.omega_p == 0.0 && params.omega_c == 0.0 {
                return Err(ConfigError::new("params.lambda", "at least one beam must drive the system"));
            }
            Plan::SpectrumObe { params, grid }
        }
        Scenario::CoolingMap => {
            let params = require("params.lambda", &p.lambda)?.resolve("params.lambda")?;
            let map = require("params.map", &p.map)?;
            let half = positive("params.map.half_range_mhz", map.half_range_mhz)?;
            let axis = |key: &str, c: f64| {
                crate::config::finite(key, c)?;
                grid("params.map", c - half, c + half, map.points)
            };
            let delta_p = axis("params.map.delta_p_center_mhz", map.delta_p_center_mhz)?;
            let delta_c = axis("params.map.delta_c_center_mhz", map.delta_c_center_mhz)?;
            Plan::CoolingMap {
                params,
                delta_p: delta_p.into_iter().map(from_mhz).collect(),
                delta_c: delta_c.into_iter().map(from_mhz).collect(),
                mode: require("params.mode", &p.mode)?.resolve("params.mode")?,
                opts: p.sideband.clone().unwrap_or_default().resolve("params.sideband")?,
            }
        }
        Scenario::CoolingDynamics => {
            let params = require("params.lambda", &p.lambda)?.resolve("params.lambda")?;
            let mode = require("params.mode", &p.mode)?.resolve("params.mode")?;
            let dynamics = require("params.dynamics", &p.dynamics)?;
            let n0 = match (dynamics.n0, dynamics.t0_uk) {
                (Some(n), None) => non_negative("params.dynamics.n0", n)?,
                (None, Some(t)) => temperature_to_phonon(positive("params.dynamics.t0_uk", t)? * 1e-6, mode.omega_trap)
                    .map_err(|e| ConfigError::new("params.dynamics.t0_uk", e.to_string()))?,
                _ => return Err(ConfigError::new("params.dynamics.n0", "give exactly one of this or params.dynamics.t0_uk")),
            };
            let t_max = positive("params.dynamics.t_max_ms", dynamics.t_max_ms)? * 1e-3;
            if dynamics.points < 2 {
                return Err(ConfigError::new("params.dynamics.points", "must be >= 2"));
            }
            Plan::CoolingDynamics {
                params,
                mode,
                opts: p.sideband.clone().unwrap_or_default().resolve("params.sideband")?,
                n0,
                times: linspace(0.0, t_max, dynamics.points),
            }
        }
        Scenario::Thermometry => {
            let th = thermometry_section(config)?;
            let temperature = non_negative(
                "params.thermometry.temperature_uk",
                *require("params.thermometry.temperature_uk", &th.temperature_uk)?,
            )? * 1e-6;
            Plan::Thermometry {
                temperature,
                taus: th.taus("params.thermometry")?,
                trials: th.trials("params.thermometry")?,
                setup: th.setup("params.thermometry")?,
            }
        }
        Scenario::InvertTemperature => {
            let inv = require("params.inversion", &p.inversion)?;
            let lo = positive("params.inversion.t_min_uk", inv.t_min_uk)?;
            let hi = positive("params.inversion.t_max_uk", inv.t_max_uk)?;
            let step = positive("params.inversion.t_step_uk", inv.t_step_uk)?;
            if hi <= lo + 2.0 * step {
                return Err(ConfigError::new("params.inversion.t_max_uk", "grid needs at least three temperatures"));
            }
            let n = ((hi - lo) / step).round() as usize + 1;
            let grid: Vec<f64> = (0..n).map(|i| (lo + step * i as f64) * 1e-6).collect();
            if inv.trials == 0 {
                return Err(ConfigError::new("params.inversion.trials", "must be >= 1"));
            }
            let (measured, taus, setup) = match &inv.measured_path {
                Some(path) => {
                    let text = read_input("params.inversion.measured_path", path)?;
                    let curve = RecaptureCurve::from_csv(&text)
                        .map_err(|e| ConfigError::new("params.inversion.measured_path", e.to_string()))?;
                    let setup = match &p.thermometry {
                        Some(th) => th.setup("params.thermometry")?,
                        None => ReleaseSetup::tweezer(),
                    };
                    let taus = curve.taus();
                    (Measured::Curve(curve), taus, setup)
                }
                None => {
                    let th = thermometry_section(config)?;
                    let t = *require("params.thermometry.temperature_uk", &th.temperature_uk)?;
                    let m = Measured::Synthetic {
                        temperature: non_negative("params.thermometry.temperature_uk", t)? * 1e-6,
                        trials: th.trials("params.thermometry")?,
                    };
                    (m, th.taus("params.thermometry")?, th.setup("params.thermometry")?)
                }
            };
            Plan::Invert {
                measured,
                taus,
                setup,
                grid,
                trials: inv.trials,
            }
        }
        Scenario::FitFano => {
            let input = match p.fit.as_ref().and_then(|f| f.input_path.as_ref()) {
                Some(path) => {
                    let text = read_input("params.fit.input_path", path)?;
                    let s = Spectrum::from_csv(&text, SpectrumKind::PhotonCounts)
                        .map_err(|e| ConfigError::new("params.fit.input_path", e.to_string()))?;
                    FanoInput::File(s)
                }
                None => {
                    let (source, grid) = spectrum_source(config)?;
                    let counts = require("params.counts", &p.counts)?;
                    FanoInput::Synthetic {
                        source,
                        grid,
                        rate_scale: non_negative("params.counts.rate_scale_cps", counts.rate_scale_cps)?,
                        duration: positive("params.counts.duration_ms", counts.duration_ms)? * 1e-3,
                        background: non_negative("params.counts.background_cps", counts.background_cps)?,
                    }
                }
            };
            Plan::FitFano(input)
        }
        Scenario::FitExp => Plan::FitExp(exp_points(require("params.fit", &p.fit)?)?),
        Scenario::Presets => Plan::Presets,
    })
}

/// Checks a configuration without computing anything.
pub fn validate(config: &ScenarioConfig) -> Result<(), ConfigError> {
    prepare(config).map(|_| ())
}

fn artifact(suffix: &str, body: String) -> Artifact {
    Artifact {
        suffix: suffix.to_string(),
        body,
    }
}

pub fn execute(config: &ScenarioConfig) -> Result<RunOutput, CliError> {
    let plan = prepare(config)?;
    let sc = config.scenario;
    let err = numeric(sc);
    let mut out = RunOutput::default();
    match plan {
        Plan::Spectrum { source, grid } => {
            let s = source.spectrum(&grid).map_err(&err)?;
            if let SpectrumSource::Single(p, m) = &source {
                let d = dressed_pair(p, *m).map_err(&err)?;
                out.summary.push(("delta_shift_khz".into(), num(to_khz(d.delta_shift))));
                out.summary.push(("gamma_plus_khz".into(), num(to_khz(d.gamma_plus))));
            }
            out.artifacts.push(artifact(".csv", s.to_csv(&[])));
        }
        Plan::SpectrumObe { params, grid } => {
            let s = excitation_spectrum_obe(&grid, &params).map_err(&err)?;
            let (i, min) = s
                .values()
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((0, f64::NAN));
            out.summary.push(("min_delta_p_mhz".into(), num(to_mhz(grid[i]))));
            out.summary.push(("min_value".into(), num(min)));
            out.artifacts.push(artifact(".csv", s.to_csv(&[])));
        }
        Plan::CoolingMap {
            params,
            delta_p,
            delta_c,
            mode,
            opts,
        } => {
            if let Some(w) = mode.validity_warning() {
                out.warnings.push(w);
            }
            let map = cooling_map(&delta_p, &delta_c, &params, &mode, &opts).map_err(&err)?;
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, row) in map.cells.iter().enumerate() {
                for (j, cell) in row.iter().enumerate() {
                    if let Some(n) = cell.n_ss() {
                        if best.is_none_or(|b| n < b.0) {
                            best = Some((n, i, j));
                        }
                    }
                }
            }
            if let Some((n, i, j)) = best {
                out.summary.push(("min_n_ss".into(), num(n)));
                out.summary.push(("min_delta_p_mhz".into(), num(to_mhz(delta_p[i]))));
                out.summary.push(("min_delta_c_mhz".into(), num(to_mhz(delta_c[j]))));
            }
            out.artifacts.push(artifact(".csv", map.to_csv(&[])));
        }
        Plan::CoolingDynamics {
            params,
            mode,
            opts,
            n0,
            times,
        } => {
            if let Some(w) = mode.validity_warning() {
                out.warnings.push(w);
            }
            let rates = sideband_rates_with(&params, &mode, &opts).map_err(&err)?;
            let w = cooling_rate(&rates);
            out.summary.push(("a_plus_per_s".into(), num(rates.a_plus)));
            out.summary.push(("a_minus_per_s".into(), num(rates.a_minus)));
            match steady_state_phonon(&rates) {
                Ok(n) => {
                    out.summary.push(("n_ss".into(), num(n)));
                    out.summary.push(("tau_ms".into(), num(1e3 / w)));
                }
                Err(_) => {
                    out.summary.push(("n_ss".into(), "heating".into()));
                    out.summary.push(("tau_ms".into(), "heating".into()));
                }
            }
            let mut body = String::new();
            for (k, v) in &out.summary {
                let _ = writeln!(body, "# {k}: {v}");
            }
            body.push_str("t_ms,n,temperature_uk\n");
            for &t in &times {
                let e = phonon_dynamics(&rates, n0, t).map_err(&err)?;
                let temp = phonon_to_temperature(e.n, mode.omega_trap).map_err(&err)?;
                let _ = writeln!(body, "{},{},{}", num(t * 1e3), num(e.n), num(temp * 1e6));
            }
            out.artifacts.push(artifact(".csv", body));
        }
        Plan::Thermometry {
            temperature,
            taus,
            trials,
            setup,
        } => {
            let curve = recapture_curve(temperature, &taus, trials, &setup, config.seed).map_err(&err)?;
            out.artifacts.push(artifact(".csv", curve.to_csv(&[])));
        }
        Plan::Invert {
            measured,
            taus,
            setup,
            grid,
            trials,
        } => {
            let (curve, injected) = match measured {
                Measured::Curve(c) => (c, None),
                Measured::Synthetic { temperature, trials } => {
                    let seed = derive_seed(config.seed, 1);
                    (recapture_curve(temperature, &taus, trials, &setup, seed).map_err(&err)?, Some(temperature))
                }
            };
            let est = infer_temperature(&curve, &setup, &grid, trials, config.seed).map_err(&err)?;
            let profile = chi2_profile(&curve, &setup, &grid, trials, config.seed).map_err(&err)?;
            out.summary.push(("temperature_uk".into(), num(est.temperature * 1e6)));
            out.summary.push(("sigma_uk".into(), num(est.sigma * 1e6)));
            let doc = json!({
                "temperature_uk": est.temperature * 1e6,
                "sigma_uk": est.sigma * 1e6,
                "chi2": est.chi2,
                "dof": est.dof,
                "injected_temperature_uk": injected.map(|t| t * 1e6),
                "simulation_trials": trials,
                "profile": grid.iter().zip(&profile).map(|(t, c)| json!([t * 1e6, c])).collect::<Vec<_>>(),
            });
            out.artifacts.push(artifact(".json", pretty(&doc)));
            if injected.is_some() {
                out.artifacts.push(artifact("_measured.csv", curve.to_csv(&[])));
            }
        }
        Plan::FitFano(input) => {
            let (data, injected) = match input {
                FanoInput::File(s) => (s, None),
                FanoInput::Synthetic {
                    source,
                    grid,
                    rate_scale,
                    duration,
                    background,
                } => {
                    let s = source.spectrum(&grid).map_err(&err)?;
                    let counts = simulate_photon_counts(&s, rate_scale, duration, background, config.seed).map_err(&err)?;
                    let injected = match &source {
                        SpectrumSource::Single(p, m) => Some(dressed_pair(p, *m).map_err(&err)?),
                        SpectrumSource::Multi(..) => None,
                    };
                    out.artifacts.push(artifact("_counts.csv", counts.to_csv(&[])));
                    (counts, injected)
                }
            };
            let fit = fit_fano(&data, None).map_err(&err)?;
            out.summary.push(("gamma_plus_khz".into(), num(to_khz(fit.gamma_plus))));
            out.summary.push(("delta_shift_khz".into(), num(to_khz(fit.delta_shift))));
            let mut doc = fit.to_json();
            if let Some(d) = injected {
                doc["injected"] = json!({
                    "delta_shift_mhz": to_mhz(d.delta_shift),
                    "gamma_plus_mhz": to_mhz(d.gamma_plus),
                });
            }
            out.artifacts.insert(0, artifact(".json", pretty(&doc)));
        }
        Plan::FitExp(points) => {
            let fit = fit_exponential(&points).map_err(&err)?;
            out.summary.push(("tau_ms".into(), num(fit.tau_cool * 1e3)));
            out.summary.push(("t_final_uk".into(), num(fit.t_final * 1e6)));
            out.artifacts.push(artifact(".json", pretty(&fit.to_json())));
        }
        Plan::Presets => {
            let mut body = String::from("name,scenario,description\n");
            for p in presets::ALL {
                let _ = writeln!(body, "{},{},\"{}\"", p.name, p.scenario().name(), p.description().replace('"', "'"));
            }
            out.artifacts.push(artifact(".csv", body));
        }
    }
    Ok(out)
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON serialises");
    s.push('\n');
    s
}

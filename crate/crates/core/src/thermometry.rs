//! Release-and-recapture thermometry by Monte Carlo.
//!
//! Atoms are drawn from a thermal state of the harmonic trap, released for
//! τ, and counted as recaptured when their total energy in the full Gaussian
//! potential is negative. Every trial draws from its own counter-based
//! stream keyed by (release index, trial index), and the temperature only
//! scales those draws, so the simulated curve is a smooth function of T at
//! fixed seed.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{stream_key, stream_rng};
use crate::trap::{potential, TrapGeometry};
use crate::types::{fmt_f64, fmt_fixed, from_khz, PhysicalConstants};

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

impl AtomState {
    pub fn at_rest() -> Self {
        Self {
            position: [0.0; 3],
            velocity: [0.0; 3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(&self.velocity).all(|v| v.is_finite())
    }
}

/// Everything the Monte Carlo needs besides temperature and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseSetup {
    pub trap: TrapGeometry,
    /// (radial, axial) frequencies used to sample the initial state.
    pub sampling_frequencies: (f64, f64),
    pub gravity: [f64; 3],
}

impl ReleaseSetup {
    /// Default tweezer sampled with the measured (73, 10) kHz frequencies and
    /// gravity along the radial x axis.
    pub fn tweezer() -> Self {
        Self {
            trap: TrapGeometry::tweezer(),
            sampling_frequencies: (from_khz(73.0), from_khz(10.0)),
            gravity: [STANDARD_GRAVITY, 0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        let (wr, wz) = self.sampling_frequencies;
        if !(wr > 0.0) || !(wz > 0.0) {
            return Err(domain("sampling frequencies must be positive"));
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err(domain("gravity must be finite"));
        }
        Ok(())
    }
}

/// Six standard normal deviates: three for position, three for velocity.
fn normals<R: Rng>(rng: &mut R) -> [f64; 6] {
    std::array::from_fn(|_| rng.sample(StandardNormal))
}

fn scale_state(z: &[f64; 6], temperature: f64, mass: f64, frequencies: (f64, f64)) -> AtomState {
    let kt = PhysicalConstants::CODATA.kb * temperature;
    let (wr, wz) = frequencies;
    let sx = (kt / mass).sqrt() / wr;
    let sz = (kt / mass).sqrt() / wz;
    let sv = (kt / mass).sqrt();
    AtomState {
        position: [sx * z[0], sx * z[1], sz * z[2]],
        velocity: [sv * z[3], sv * z[4], sv * z[5]],
    }
}

/// Thermal state of the harmonic trap: position variance kT/(mω_i²) per
/// axis, velocity variance kT/m.
pub fn sample_thermal_state<R: Rng>(
    temperature: f64,
    trap: &TrapGeometry,
    frequencies: (f64, f64),
    rng: &mut R,
) -> Result<AtomState> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(domain(format!("temperature must be >= 0, got {temperature}")));
    }
    if !(frequencies.0 > 0.0) || !(frequencies.1 > 0.0) {
        return Err(domain("sampling frequencies must be positive"));
    }
    if temperature == 0.0 {
        return Ok(AtomState::at_rest());
    }
    Ok(scale_state(&normals(rng), temperature, trap.mass, frequencies))
}

/// Ballistic flight for τ, then the bound-state test ½m|v|² + U(r) < 0.
pub fn release_recapture_trial(state: &AtomState, tau: f64, trap: &TrapGeometry, gravity: &[f64; 3]) -> bool {
    let r: [f64; 3] = std::array::from_fn(|i| state.position[i] + state.velocity[i] * tau + 0.5 * gravity[i] * tau * tau);
    let v2: f64 = (0..3).map(|i| (state.velocity[i] + gravity[i] * tau).powi(2)).sum();
    0.5 * trap.mass * v2 + potential(trap, &r) < 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecapturePoint {
    pub tau: f64,
    pub p_recapture: f64,
    pub n_trials: u64,
}

impl RecapturePoint {
    pub fn recaptured(&self) -> u64 {
        (self.p_recapture * self.n_trials as f64).round() as u64
    }

    pub fn stderr(&self) -> f64 {
        let p = self.p_recapture;
        (p * (1.0 - p) / self.n_trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecaptureCurve {
    pub entries: Vec<RecapturePoint>,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
}

impl RecaptureCurve {
    pub fn new(entries: Vec<RecapturePoint>, temperature: Option<f64>, seed: Option<u64>) -> Result<Self> {
        let c = Self {
            entries,
            temperature,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidArgument("recapture curve is empty".into()));
        }
        if self.entries.windows(2).any(|w| w[1].tau <= w[0].tau) {
            return Err(domain("release intervals must be strictly increasing"));
        }
        for e in &self.entries {
            if !(e.tau >= 0.0) || !(0.0..=1.0).contains(&e.p_recapture) || e.n_trials == 0 {
                return Err(domain(format!(
                    "invalid recapture entry (tau {}, p {}, n {})",
                    e.tau, e.p_recapture, e.n_trials
                )));
            }
        }
        Ok(())
    }

    pub fn taus(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.tau).collect()
    }

    /// CSV `tau_us,p_recapture,n_trials,stderr` after `#` metadata lines.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        if let Some(t) = self.temperature {
            let _ = writeln!(out, "# temperature_uk: {}", fmt_f64(t * 1e6));
        }
        if let Some(s) = self.seed {
            let _ = writeln!(out, "# seed: {s}");
        }
        out.push_str("tau_us,p_recapture,n_trials,stderr\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_fixed(e.tau * 1e6, 9),
                fmt_f64(e.p_recapture),
                e.n_trials,
                fmt_f64(e.stderr())
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut temperature = None;
        let mut seed = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("tau_us") {
                continue;
            }
            let err = |e: &dyn std::fmt::Display| Error::Parse(format!("line {}: {e}", lineno + 1));
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("temperature_uk:") {
                    temperature = Some(v.trim().parse::<f64>().map_err(|e| err(&e))? * 1e-6);
                } else if let Some(v) = comment.strip_prefix("seed:") {
                    seed = Some(v.trim().parse::<u64>().map_err(|e| err(&e))?);
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() < 3 {
                return Err(err(&"expected at least 3 columns"));
            }
            entries.push(RecapturePoint {
                tau: cols[0].parse::<f64>().map_err(|e| err(&e))? * 1e-6,
                p_recapture: cols[1].parse().map_err(|e| err(&e))?,
                n_trials: cols[2].parse().map_err(|e| err(&e))?,
            });
        }
        Self::new(entries, temperature, seed)
    }
}

/// Number of recaptured atoms out of `n_trials` at each release interval.
fn recapture_counts(temperature: f64, taus: &[f64], n_trials: u64, setup: &ReleaseSetup, seed: u64) -> Vec<u64> {
    let mass = setup.trap.mass;
    taus.iter()
        .enumerate()
        .map(|(i, &tau)| {
            (0..n_trials)
                .into_par_iter()
                .filter(|&j| {
                    let state = if temperature == 0.0 {
                        AtomState::at_rest()
                    } else {
                        let mut rng = stream_rng(seed, stream_key(i as u64, j));
                        scale_state(&normals(&mut rng), temperature, mass, setup.sampling_frequencies)
                    };
                    release_recapture_trial(&state, tau, &setup.trap, &setup.gravity)
                })
                .count() as u64
        })
        .collect()
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::InvalidArgument("no release intervals given".into()));
    }
    if taus.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("release intervals must be >= 0 and strictly increasing"));
    }
    Ok(())
}

pub fn recapture_curve(
    temperature: f64,
    taus: &[f64],
    n_trials: u64,
    setup: &ReleaseSetup,
    seed: u64,
) -> Result<RecaptureCurve> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(domain(format!("temperature must be >= 0, got {temperature}")));
    }
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be >= 1".into()));
    }
    check_taus(taus)?;
    setup.validate()?;
    let counts = recapture_counts(temperature, taus, n_trials, setup, seed);
    let entries = taus
        .iter()
        .zip(counts)
        .map(|(&tau, k)| RecapturePoint {
            tau,
            p_recapture: k as f64 / n_trials as f64,
            n_trials,
        })
        .collect();
    RecaptureCurve::new(entries, Some(temperature), Some(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureEstimate {
    pub temperature: f64,
    pub sigma: f64,
    pub chi2: f64,
    pub dof: usize,
}

/// Binomial variance with the (k+1)/(n+2) estimator, so that p = 0 or 1
/// still carries weight.
fn binomial_variance(k: u64, n: u64) -> f64 {
    let p = (k as f64 + 1.0) / (n as f64 + 2.0);
    p * (1.0 - p) / n as f64
}

/// χ² between a measured curve and a simulation with `n_trials` per point.
pub fn chi2_against(measured: &RecaptureCurve, simulated_counts: &[u64], n_trials: u64) -> f64 {
    measured
        .entries
        .iter()
        .zip(simulated_counts)
        .map(|(m, &k)| {
            let ps = k as f64 / n_trials as f64;
            let var = binomial_variance(m.recaptured(), m.n_trials) + binomial_variance(k, n_trials);
            (m.p_recapture - ps).powi(2) / var
        })
        .sum()
}

/// χ² profile over a temperature grid.
pub fn chi2_profile(
    measured: &RecaptureCurve,
    setup: &ReleaseSetup,
    t_grid: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    measured.validate()?;
    setup.validate()?;
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be >= 1".into()));
    }
    if t_grid.len() < 3 {
        return Err(Error::InvalidArgument("temperature grid needs at least 3 points".into()));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("temperature grid must be >= 0 and strictly increasing"));
    }
    let taus = measured.taus();
    Ok(t_grid
        .iter()
        .map(|&t| chi2_against(measured, &recapture_counts(t, &taus, n_trials, setup, seed), n_trials))
        .collect())
}

/// Grid search for the χ² minimum followed by a parabola through the
/// minimum and its two neighbours; σ from Δχ² = 1.
pub fn infer_temperature(
    measured: &RecaptureCurve,
    setup: &ReleaseSetup,
    t_grid: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<TemperatureEstimate> {
    let chi2 = chi2_profile(measured, setup, t_grid, n_trials, seed)?;
    let best = chi2
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidArgument("empty grid".into()))?;
    if best == 0 {
        return Err(Error::GridEdge { edge: "lower" });
    }
    if best == t_grid.len() - 1 {
        return Err(Error::GridEdge { edge: "upper" });
    }
    let dof = measured.entries.len().saturating_sub(1);
    let (x0, x1, x2) = (t_grid[best - 1], t_grid[best], t_grid[best + 1]);
    let (y0, y1, y2) = (chi2[best - 1], chi2[best], chi2[best + 1]);
    // Newton divided differences: y = y1 + b(x − x1) + a(x − x1)(x − x0)...
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a > 0.0) {
        return Ok(TemperatureEstimate {
            temperature: x1,
            sigma: 0.5 * (x2 - x0),
            chi2: y1,
            dof,
        });
    }
    let b = d01 - a * (x0 - x1); // slope at x1
    let t_min = (x1 - b / (2.0 * a)).clamp(x0, x2);
    let chi2_min = y1 + b * (t_min - x1) + a * (t_min - x1).powi(2);
    Ok(TemperatureEstimate {
        temperature: t_min,
        sigma: 1.0 / a.sqrt(),
        chi2: chi2_min.max(0.0),
        dof,
    })
}

/// The twelve release intervals from 1 to 80 µs used for the default curve.
pub const DEFAULT_TAUS_US: [f64; 12] = [1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0];

pub fn default_taus() -> Vec<f64> {
    DEFAULT_TAUS_US.iter().map(|t| t * 1e-6).collect()
}

//! Sideband cooling of a harmonic motional mode in the Lamb-Dicke regime.
//!
//! The mean phonon number obeys `dn/dt = −(A₋ − A₊)·n + A₊`. The default
//! rate model ([`SidebandModel::ForceSpectrum`]) takes A∓ from the
//! fluctuation spectrum of the optical force evaluated at ±ω_trap, which
//! captures the interference between probe and coupling recoil that makes
//! EIT cooling work. A simpler model built from shifted steady-state
//! scattering rates is kept as [`SidebandModel::ScatteringOffset`].

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{force_spectrum, scattering_rate, steady_state};
use crate::error::{domain, Error, Result};
use crate::types::{fmt_f64, fmt_mhz, LambdaParams, PhysicalConstants};

pub const LAMB_DICKE_WARNING_THRESHOLD: f64 = 0.3;
pub const DEFAULT_DIFFUSION_WEIGHT: f64 = 0.4;

pub type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Probe and coupling wavevectors and the direction of one motional mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    pub k_p: Vec3,
    pub k_c: Vec3,
    pub axis: Vec3,
}

impl BeamGeometry {
    /// Normalises `axis`; fails on a zero or non-finite axis.
    pub fn new(k_p: Vec3, k_c: Vec3, axis: Vec3) -> Result<Self> {
        if k_p.iter().chain(&k_c).chain(&axis).any(|v| !v.is_finite()) {
            return Err(domain("beam geometry must be finite"));
        }
        let n = norm(&axis);
        if n == 0.0 {
            return Err(domain("motional axis must be nonzero"));
        }
        Ok(Self {
            k_p,
            k_c,
            axis: [axis[0] / n, axis[1] / n, axis[2] / n],
        })
    }

    /// Probe orthogonal to the tweezer axis (ŷ), coupling along it (ẑ), both
    /// on the D2 line. The radial mode is taken along ŷ, which sits at 45° to
    /// Δk = k_p − k_c.
    pub fn tweezer_radial(constants: &PhysicalConstants) -> Self {
        let k = constants.k_d2();
        Self {
            k_p: [0.0, k, 0.0],
            k_c: [0.0, 0.0, k],
            axis: [0.0, 1.0, 0.0],
        }
    }

    /// Same beams, mode along the tweezer axis ẑ.
    pub fn tweezer_axial(constants: &PhysicalConstants) -> Self {
        Self {
            axis: [0.0, 0.0, 1.0],
            ..Self::tweezer_radial(constants)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_p.iter().chain(&self.k_c).chain(&self.axis).any(|v| !v.is_finite()) {
            return Err(domain("beam geometry must be finite"));
        }
        if (norm(&self.axis) - 1.0).abs() > 1e-12 {
            return Err(domain("motional axis must be a unit vector"));
        }
        Ok(())
    }

    /// Checks that both wavevectors have the D2-line magnitude to 0.1%.
    pub fn validate_d2(&self, constants: &PhysicalConstants) -> Result<()> {
        self.validate()?;
        let k = constants.k_d2();
        for (name, v) in [("k_p", &self.k_p), ("k_c", &self.k_c)] {
            if (norm(v) / k - 1.0).abs() > 1e-3 {
                return Err(domain(format!("|{name}| = {} differs from the D2 wavenumber {k}", norm(v))));
            }
        }
        Ok(())
    }

    pub fn delta_k(&self) -> Vec3 {
        [self.k_p[0] - self.k_c[0], self.k_p[1] - self.k_c[1], self.k_p[2] - self.k_c[2]]
    }

    /// Direction cosine between Δk and the mode axis (0 when Δk = 0).
    pub fn cos_phi(&self) -> f64 {
        let dk = self.delta_k();
        let n = norm(&dk);
        if n == 0.0 {
            0.0
        } else {
            dot(&dk, &self.axis) / n
        }
    }
}

/// Ground-state wavepacket extent `sqrt(ħ/(2mω))`.
pub fn ground_state_size(omega_trap: f64, mass: f64) -> Result<f64> {
    if !(omega_trap > 0.0) || !(mass > 0.0) {
        return Err(domain(format!(
            "trap frequency and mass must be positive (got {omega_trap}, {mass})"
        )));
    }
    Ok((PhysicalConstants::CODATA.hbar / (2.0 * mass * omega_trap)).sqrt())
}

/// `η = |k_p − k_c|·cos φ·a₀`, reported as a magnitude.
pub fn lamb_dicke(geometry: &BeamGeometry, omega_trap: f64, mass: f64) -> Result<f64> {
    geometry.validate()?;
    let a0 = ground_state_size(omega_trap, mass)?;
    Ok(dot(&geometry.delta_k(), &geometry.axis).abs() * a0)
}

/// Warning text when `eta` is outside the Lamb-Dicke regime.
pub fn lamb_dicke_warning(eta: f64) -> Option<String> {
    (eta >= LAMB_DICKE_WARNING_THRESHOLD).then(|| {
        format!("Lamb-Dicke parameter {eta:.3} >= {LAMB_DICKE_WARNING_THRESHOLD}: rate equations lose validity")
    })
}

/// A harmonic motional mode and how the two beams couple to it.
///
/// `eta_p` and `eta_c` are the signed projections of each beam's wavevector
/// on the mode axis times a₀, so the Lamb-Dicke parameter is
/// `|eta_p − eta_c|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionalMode {
    pub omega_trap: f64,
    pub mass: f64,
    pub eta_p: f64,
    pub eta_c: f64,
    pub n_bar: f64,
}

impl MotionalMode {
    /// Mode with all recoil on the probe beam.
    pub fn new(omega_trap: f64, mass: f64, eta: f64, n_bar: f64) -> Result<Self> {
        let m = Self {
            omega_trap,
            mass,
            eta_p: eta,
            eta_c: 0.0,
            n_bar,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_geometry(geometry: &BeamGeometry, omega_trap: f64, mass: f64, n_bar: f64) -> Result<Self> {
        geometry.validate()?;
        let a0 = ground_state_size(omega_trap, mass)?;
        let m = Self {
            omega_trap,
            mass,
            eta_p: dot(&geometry.k_p, &geometry.axis) * a0,
            eta_c: dot(&geometry.k_c, &geometry.axis) * a0,
            n_bar,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn eta(&self) -> f64 {
        (self.eta_p - self.eta_c).abs()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_trap > 0.0) || !(self.mass > 0.0) {
            return Err(domain("trap frequency and mass must be positive"));
        }
        if !self.eta_p.is_finite() || !self.eta_c.is_finite() || !(self.eta() < 1.0) {
            return Err(domain(format!("Lamb-Dicke parameter must lie in [0, 1), got {}", self.eta())));
        }
        if !(self.n_bar >= 0.0) {
            return Err(domain(format!("mean phonon number must be >= 0, got {}", self.n_bar)));
        }
        Ok(())
    }

    pub fn validity_warning(&self) -> Option<String> {
        lamb_dicke_warning(self.eta())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandRates {
    /// Heating coefficient A₊ (1/s).
    pub a_plus: f64,
    /// Cooling coefficient A₋ (1/s).
    pub a_minus: f64,
}

impl SidebandRates {
    pub fn new(a_plus: f64, a_minus: f64) -> Result<Self> {
        if !(a_plus >= 0.0) || !(a_minus >= 0.0) || !a_plus.is_finite() || !a_minus.is_finite() {
            return Err(domain(format!("sideband rates must be finite and >= 0 ({a_plus}, {a_minus})")));
        }
        Ok(Self { a_plus, a_minus })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SidebandModel {
    /// A∓ from the force-fluctuation spectrum at ±ω_trap.
    #[default]
    ForceSpectrum,
    /// A∓ = η²·[W(Δp ± ω_trap) + α̃·W(Δp)] from steady-state scattering
    /// rates W with the probe detuning offset.
    ScatteringOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandOptions {
    pub model: SidebandModel,
    /// Diffusion weight α̃ of spontaneous-emission recoil.
    pub diffusion_weight: f64,
}

impl Default for SidebandOptions {
    fn default() -> Self {
        Self {
            model: SidebandModel::ForceSpectrum,
            diffusion_weight: DEFAULT_DIFFUSION_WEIGHT,
        }
    }
}

pub fn sideband_rates(params: &LambdaParams, mode: &MotionalMode) -> Result<SidebandRates> {
    sideband_rates_with(params, mode, &SidebandOptions::default())
}

pub fn sideband_rates_with(params: &LambdaParams, mode: &MotionalMode, opts: &SidebandOptions) -> Result<SidebandRates> {
    mode.validate()?;
    if !(opts.diffusion_weight >= 0.0) {
        return Err(domain("diffusion weight must be >= 0"));
    }
    let eta = mode.eta();
    if eta == 0.0 {
        return SidebandRates::new(0.0, 0.0);
    }
    let nu = mode.omega_trap;
    let carrier = |p: &LambdaParams| -> Result<f64> { Ok(scattering_rate(&steady_state(p)?.rho, p)) };
    let (minus, plus) = match opts.model {
        SidebandModel::ForceSpectrum => {
            let s = force_spectrum(params, mode.eta_p, mode.eta_c, &[nu, -nu])?;
            let diffusion = eta * eta * opts.diffusion_weight * carrier(params)?;
            (s[0] + diffusion, s[1] + diffusion)
        }
        SidebandModel::ScatteringOffset => {
            let w_red = carrier(&params.with_delta_p(params.delta_p + nu))?;
            let w_blue = carrier(&params.with_delta_p(params.delta_p - nu))?;
            let w0 = carrier(params)?;
            let e2 = eta * eta;
            (e2 * (w_red + opts.diffusion_weight * w0), e2 * (w_blue + opts.diffusion_weight * w0))
        }
    };
    // Round-off can push a vanishing spectrum a hair below zero.
    SidebandRates::new(plus.max(0.0), minus.max(0.0))
}

/// Mean phonon number at time `t` and whether the mode heats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhononEvolution {
    pub n: f64,
    pub heating: bool,
}

/// Closed-form solution of `dn/dt = −(A₋ − A₊)n + A₊`.
pub fn phonon_dynamics(rates: &SidebandRates, n0: f64, t: f64) -> Result<PhononEvolution> {
    if !(t >= 0.0) || !(n0 >= 0.0) {
        return Err(domain(format!("need t >= 0 and n0 >= 0 (got {t}, {n0})")));
    }
    let kappa = rates.a_minus - rates.a_plus;
    let growth = if kappa == 0.0 {
        t
    } else {
        -(-kappa * t).exp_m1() / kappa
    };
    Ok(PhononEvolution {
        n: n0 * (-kappa * t).exp() + rates.a_plus * growth,
        heating: kappa <= 0.0,
    })
}

/// `A₊/(A₋ − A₊)`.
pub fn steady_state_phonon(rates: &SidebandRates) -> Result<f64> {
    if rates.a_minus <= rates.a_plus {
        return Err(Error::Heating {
            a_plus: rates.a_plus,
            a_minus: rates.a_minus,
        });
    }
    Ok(rates.a_plus / (rates.a_minus - rates.a_plus))
}

/// Net cooling rate `A₋ − A₊` (negative when heating).
pub fn cooling_rate(rates: &SidebandRates) -> f64 {
    rates.a_minus - rates.a_plus
}

/// Coupling Rabi frequency placing the perturbative light shift on the trap
/// frequency: `Ωc = sqrt(4·Δc·ω_trap)`.
pub fn optimal_coupling_rabi(omega_trap: f64, delta_c: f64) -> Result<f64> {
    if !(omega_trap > 0.0) || !(delta_c > 0.0) {
        return Err(domain(format!(
            "trap frequency and coupling detuning must be positive (got {omega_trap}, {delta_c})"
        )));
    }
    Ok((4.0 * delta_c * omega_trap).sqrt())
}

/// Temperature of a thermal state with mean occupation `n_bar`.
pub fn phonon_to_temperature(n_bar: f64, omega_trap: f64) -> Result<f64> {
    if !(n_bar >= 0.0) || !(omega_trap > 0.0) {
        return Err(domain(format!("need n_bar >= 0 and omega > 0 (got {n_bar}, {omega_trap})")));
    }
    if n_bar == 0.0 {
        return Ok(0.0);
    }
    let c = PhysicalConstants::CODATA;
    Ok(c.hbar * omega_trap / (c.kb * (1.0 / n_bar).ln_1p()))
}

pub fn temperature_to_phonon(temperature: f64, omega_trap: f64) -> Result<f64> {
    if !(temperature >= 0.0) || !(omega_trap > 0.0) {
        return Err(domain(format!(
            "need T >= 0 and omega > 0 (got {temperature}, {omega_trap})"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let c = PhysicalConstants::CODATA;
    Ok(1.0 / (c.hbar * omega_trap / (c.kb * temperature)).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum MapCell {
    Cooling { n_ss: f64, rates: SidebandRates },
    /// Net heating; `rate` is A₋ − A₊ ≤ 0.
    Heating { rate: f64, rates: SidebandRates },
    /// No motional coupling (both rates zero).
    Neutral,
}

impl MapCell {
    fn from_rates(rates: SidebandRates) -> Self {
        if rates.a_plus == 0.0 && rates.a_minus == 0.0 {
            MapCell::Neutral
        } else {
            match steady_state_phonon(&rates) {
                Ok(n_ss) => MapCell::Cooling { n_ss, rates },
                Err(_) => MapCell::Heating {
                    rate: cooling_rate(&rates),
                    rates,
                },
            }
        }
    }

    pub fn n_ss(&self) -> Option<f64> {
        match self {
            MapCell::Cooling { n_ss, .. } => Some(*n_ss),
            _ => None,
        }
    }

    pub fn is_heating(&self) -> bool {
        matches!(self, MapCell::Heating { .. })
    }

    fn csv_token(&self) -> String {
        match self {
            MapCell::Cooling { n_ss, .. } => fmt_f64(*n_ss),
            MapCell::Heating { rate, .. } => format!("HEAT:{}", fmt_f64(*rate)),
            MapCell::Neutral => "NEUTRAL".to_string(),
        }
    }
}

/// Steady-state phonon numbers over a (Δp, Δc) grid; `cells[i][j]` belongs
/// to `delta_p[i]`, `delta_c[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingMap {
    pub delta_p: Vec<f64>,
    pub delta_c: Vec<f64>,
    pub cells: Vec<Vec<MapCell>>,
}

impl CoolingMap {
    pub fn cell(&self, i: usize, j: usize) -> &MapCell {
        &self.cells[i][j]
    }

    /// Matrix CSV: first row holds the Δc grid (MHz), first column the Δp
    /// grid (MHz).
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("delta_p_mhz\\delta_c_mhz");
        for &dc in &self.delta_c {
            let _ = write!(out, ",{}", fmt_mhz(dc));
        }
        out.push('\n');
        for (dp, row) in self.delta_p.iter().zip(&self.cells) {
            out.push_str(&fmt_mhz(*dp));
            for cell in row {
                let _ = write!(out, ",{}", cell.csv_token());
            }
            out.push('\n');
        }
        out
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("{name} grid must be finite and strictly increasing")));
    }
    Ok(())
}

pub fn cooling_map(
    delta_p_grid: &[f64],
    delta_c_grid: &[f64],
    params: &LambdaParams,
    mode: &MotionalMode,
    opts: &SidebandOptions,
) -> Result<CoolingMap> {
    check_grid("delta_p", delta_p_grid)?;
    check_grid("delta_c", delta_c_grid)?;
    let nc = delta_c_grid.len();
    let flat = (0..delta_p_grid.len() * nc)
        .into_par_iter()
        .map(|idx| {
            let p = params
                .with_delta_p(delta_p_grid[idx / nc])
                .with_delta_c(delta_c_grid[idx % nc]);
            sideband_rates_with(&p, mode, opts).map(MapCell::from_rates)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoolingMap {
        delta_p: delta_p_grid.to_vec(),
        delta_c: delta_c_grid.to_vec(),
        cells: flat.chunks(nc).map(|c| c.to_vec()).collect(),
    })
}

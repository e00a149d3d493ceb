//! Shared domain types, physical constants and unit conversions.
//!
//! Every frequency stored in this crate is an angular frequency in rad/s.
//! Laboratory units (MHz, kHz as ordinary frequency) only appear at the I/O
//! boundary, through the helpers at the bottom of this module.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Physical constants used throughout the toolkit (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub kb: f64,
    pub mass_rb87: f64,
    /// Natural linewidth of the Rb87 D2 line, rad/s.
    pub gamma_d2: f64,
    pub wavelength_d2: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: 1.054_571_817e-34,
        kb: 1.380_649e-23,
        mass_rb87: 1.443_16e-25,
        gamma_d2: TWO_PI * 6.07e6,
        wavelength_d2: 780.24e-9,
    };

    pub fn new(hbar: f64, kb: f64, mass_rb87: f64, gamma_d2: f64, wavelength_d2: f64) -> Result<Self> {
        let c = Self {
            hbar,
            kb,
            mass_rb87,
            gamma_d2,
            wavelength_d2,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hbar", self.hbar),
            ("kb", self.kb),
            ("mass_rb87", self.mass_rb87),
            ("gamma_d2", self.gamma_d2),
            ("wavelength_d2", self.wavelength_d2),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("constant {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Wavenumber of the D2 line, rad/m.
    pub fn k_d2(&self) -> f64 {
        TWO_PI / self.wavelength_d2
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// A driven three-level Λ system: probe on g–e, coupling on g′–e.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    pub omega_p: f64,
    pub omega_c: f64,
    pub delta_p: f64,
    pub delta_c: f64,
    /// Total decay rate of |e⟩.
    pub gamma: f64,
    /// Fraction of decays e → g.
    pub branch_g: f64,
    /// Fraction of decays e → g′.
    pub branch_gp: f64,
}

impl LambdaParams {
    /// Validated constructor with symmetric branching (0.5 / 0.5).
    pub fn new(omega_p: f64, omega_c: f64, delta_p: f64, delta_c: f64, gamma: f64) -> Result<Self> {
        Self::with_branching(omega_p, omega_c, delta_p, delta_c, gamma, 0.5, 0.5)
    }

    pub fn with_branching(
        omega_p: f64,
        omega_c: f64,
        delta_p: f64,
        delta_c: f64,
        gamma: f64,
        branch_g: f64,
        branch_gp: f64,
    ) -> Result<Self> {
        let p = Self {
            omega_p,
            omega_c,
            delta_p,
            delta_c,
            gamma,
            branch_g,
            branch_gp,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega_p,
            self.omega_c,
            self.delta_p,
            self.delta_c,
            self.gamma,
            self.branch_g,
            self.branch_gp,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(domain("Λ parameters must be finite"));
        }
        if self.omega_p < 0.0 || self.omega_c < 0.0 {
            return Err(domain("Rabi frequencies must be non-negative"));
        }
        if self.gamma <= 0.0 {
            return Err(domain(format!("decay rate must be positive, got {}", self.gamma)));
        }
        if self.branch_g < 0.0 || self.branch_gp < 0.0 || self.branch_g + self.branch_gp > 1.0 + 1e-12 {
            return Err(domain(format!(
                "branching fractions must be non-negative with sum <= 1 (got {} + {})",
                self.branch_g, self.branch_gp
            )));
        }
        Ok(())
    }

    /// Decay rate out of the Λ system.
    pub fn leak_rate(&self) -> f64 {
        ((1.0 - self.branch_g - self.branch_gp) * self.gamma).max(0.0)
    }

    pub fn with_delta_p(mut self, delta_p: f64) -> Self {
        self.delta_p = delta_p;
        self
    }

    pub fn with_delta_c(mut self, delta_c: f64) -> Self {
        self.delta_c = delta_c;
        self
    }

    pub fn with_rabi(mut self, omega_p: f64, omega_c: f64) -> Self {
        self.omega_p = omega_p;
        self.omega_c = omega_c;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    AnalyticRate,
    ObeRate,
    PhotonCounts,
}

impl SpectrumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumKind::AnalyticRate => "analytic_rate",
            SpectrumKind::ObeRate => "obe_rate",
            SpectrumKind::PhotonCounts => "photon_counts",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "analytic_rate" => Ok(SpectrumKind::AnalyticRate),
            "obe_rate" => Ok(SpectrumKind::ObeRate),
            "photon_counts" => Ok(SpectrumKind::PhotonCounts),
            other => Err(Error::Parse(format!("unknown spectrum kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub delta_p: f64,
    pub value: f64,
}

/// A sampled excitation spectrum over a strictly increasing probe-detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    points: Vec<SpectrumPoint>,
    kind: SpectrumKind,
}

impl Spectrum {
    pub fn new(points: Vec<SpectrumPoint>, kind: SpectrumKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("spectrum needs at least one point".into()));
        }
        if points.windows(2).any(|w| !(w[1].delta_p > w[0].delta_p)) {
            return Err(Error::InvalidArgument("spectrum detunings must be strictly increasing".into()));
        }
        if points.iter().any(|p| !p.value.is_finite() || p.value < 0.0) {
            return Err(Error::InvalidArgument("spectrum values must be finite and non-negative".into()));
        }
        Ok(Self { points, kind })
    }

    pub fn from_parts(grid: &[f64], values: &[f64], kind: SpectrumKind) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidArgument("grid and values differ in length".into()));
        }
        let points = grid
            .iter()
            .zip(values)
            .map(|(&delta_p, &value)| SpectrumPoint { delta_p, value })
            .collect();
        Self::new(points, kind)
    }

    pub fn points(&self) -> &[SpectrumPoint] {
        &self.points
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn detunings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_p).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// CSV with header `delta_p_mhz,value`; `header` lines are emitted first,
    /// each prefixed by `# `, followed by a `# kind:` line.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for line in header {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "# kind: {}", self.kind.as_str());
        out.push_str("delta_p_mhz,value\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{}", fmt_mhz(p.delta_p), fmt_f64(p.value));
        }
        out
    }

    /// Parses the CSV layout written by [`Spectrum::to_csv`]. A missing
    /// `# kind:` line falls back to `default_kind`.
    pub fn from_csv(text: &str, default_kind: SpectrumKind) -> Result<Self> {
        let mut kind = default_kind;
        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut saw_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(k) = comment.trim().strip_prefix("kind:") {
                    kind = SpectrumKind::parse(k)?;
                }
                continue;
            }
            if !saw_header {
                saw_header = true;
                if line.starts_with("delta_p_mhz") {
                    continue;
                }
            }
            let mut cols = line.split(',');
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1))),
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            grid.push(from_mhz(parse(a)?));
            values.push(parse(b)?);
        }
        Self::from_parts(&grid, &values, kind)
    }
}

/// Rabi frequency for saturation parameter `s = 2Ω²/Γ²`.
pub fn saturation_to_rabi(s: f64, gamma: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(domain(format!("saturation parameter must be >= 0, got {s}")));
    }
    if !(gamma > 0.0) {
        return Err(domain(format!("decay rate must be positive, got {gamma}")));
    }
    Ok(gamma * (s / 2.0).sqrt())
}

pub fn rabi_to_saturation(omega: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(domain(format!("decay rate must be positive, got {gamma}")));
    }
    Ok(2.0 * omega * omega / (gamma * gamma))
}

/// Ordinary frequency in MHz to angular frequency.
pub fn from_mhz(f_mhz: f64) -> f64 {
    TWO_PI * f_mhz * 1e6
}

pub fn to_mhz(omega: f64) -> f64 {
    omega / (TWO_PI * 1e6)
}

pub fn from_khz(f_khz: f64) -> f64 {
    TWO_PI * f_khz * 1e3
}

pub fn to_khz(omega: f64) -> f64 {
    omega / (TWO_PI * 1e3)
}

/// Shortest representation that round-trips through `str::parse`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Angular frequency as ordinary MHz with millihertz resolution, trailing
/// zeros trimmed.
pub fn fmt_mhz(omega: f64) -> String {
    fmt_fixed(to_mhz(omega), 9)
}

/// Fixed-point with `digits` decimals and trailing zeros trimmed.
pub fn fmt_fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GAMMA: f64 = TWO_PI * 6.07e6;

    #[test]
    fn saturation_examples() {
        assert_eq!(saturation_to_rabi(0.0, GAMMA).unwrap(), 0.0);
        assert!((saturation_to_rabi(2.0, GAMMA).unwrap() - GAMMA).abs() < 1e-6);
        let omega = saturation_to_rabi(1.42, GAMMA).unwrap();
        assert!((to_mhz(omega) - 5.11).abs() < 0.01, "{}", to_mhz(omega));
        assert!(saturation_to_rabi(-0.1, GAMMA).is_err());
    }

    #[test]
    fn rabi_examples() {
        assert_eq!(rabi_to_saturation(0.0, GAMMA).unwrap(), 0.0);
        assert!((rabi_to_saturation(GAMMA, GAMMA).unwrap() - 2.0).abs() < 1e-12);
        let s = rabi_to_saturation(from_mhz(5.06), GAMMA).unwrap();
        assert!((s - 1.39).abs() < 0.005, "{s}");
        assert!(rabi_to_saturation(1.0, 0.0).is_err());
        assert!(rabi_to_saturation(1.0, -GAMMA).is_err());
    }

    #[test]
    fn lambda_params_validation() {
        assert!(LambdaParams::new(1.0, 1.0, 0.0, 0.0, GAMMA).is_ok());
        assert!(LambdaParams::new(-1.0, 1.0, 0.0, 0.0, GAMMA).is_err());
        assert!(LambdaParams::new(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(LambdaParams::with_branching(1.0, 1.0, 0.0, 0.0, GAMMA, 0.7, 0.4).is_err());
        let p = LambdaParams::with_branching(1.0, 1.0, 0.0, 0.0, GAMMA, 0.25, 0.25).unwrap();
        assert!((p.leak_rate() - 0.5 * GAMMA).abs() < 1e-6);
    }

    #[test]
    fn constants_are_positive() {
        assert!(PhysicalConstants::CODATA.validate().is_ok());
        assert!(PhysicalConstants::new(1.0, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn spectrum_rejects_unordered_grid() {
        assert!(Spectrum::from_parts(&[0.0, 0.0], &[1.0, 1.0], SpectrumKind::AnalyticRate).is_err());
        assert!(Spectrum::from_parts(&[1.0, 0.0], &[1.0, 1.0], SpectrumKind::AnalyticRate).is_err());
        assert!(Spectrum::from_parts(&[0.0, 1.0], &[1.0, -1.0], SpectrumKind::AnalyticRate).is_err());
        assert!(Spectrum::from_parts(&[], &[], SpectrumKind::AnalyticRate).is_err());
    }

    #[test]
    fn spectrum_csv_layout() {
        let s = Spectrum::from_parts(&[from_mhz(-80.0), from_mhz(-79.5)], &[0.0, 1.25], SpectrumKind::ObeRate).unwrap();
        let csv = s.to_csv(&["tool: test".to_string()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# tool: test"));
        assert_eq!(lines.next(), Some("# kind: obe_rate"));
        assert_eq!(lines.next(), Some("delta_p_mhz,value"));
        assert_eq!(lines.next(), Some("-80,0.0"));
        assert_eq!(lines.next(), Some("-79.5,1.25"));
        let back = Spectrum::from_csv(&csv, SpectrumKind::AnalyticRate).unwrap();
        assert_eq!(back.kind(), SpectrumKind::ObeRate);
        assert_eq!(back.values(), s.values());
        assert!((back.detunings()[1] - s.detunings()[1]).abs() < 1e-6);
        assert_eq!(fmt_fixed(-0.0000000001, 9), "0");
    }

    proptest! {
        #[test]
        fn saturation_round_trip(s in 0.0f64..100.0) {
            let back = rabi_to_saturation(saturation_to_rabi(s, GAMMA).unwrap(), GAMMA).unwrap();
            prop_assert!((back - s).abs() <= 1e-12 * s.max(1e-300));
        }

        #[test]
        fn mhz_round_trip(f in -1e3f64..1e3) {
            prop_assert!((to_mhz(from_mhz(f)) - f).abs() <= 1e-12 * f.abs().max(1.0));
        }
    }
}

//! Gaussian-beam optical dipole trap.
//!
//! The beam propagates along z. Depth is parameterised by the radial trap
//! frequency, the quantity measured in the lab.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::types::{from_khz, to_khz, PhysicalConstants};

pub const DEFAULT_WAVELENGTH: f64 = 851e-9;
pub const DEFAULT_WAIST: f64 = 1.1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapGeometry {
    pub wavelength: f64,
    pub waist: f64,
    /// U₀ > 0 (J); the potential minimum is −U₀.
    pub depth: f64,
    pub mass: f64,
    pub rayleigh_range: f64,
    pub omega_radial: f64,
    pub omega_axial: f64,
}

impl TrapGeometry {
    pub fn new(wavelength: f64, waist: f64, depth: f64, mass: f64) -> Result<Self> {
        for (name, v) in [("wavelength", wavelength), ("waist", waist), ("depth", depth), ("mass", mass)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("trap {name} must be positive, got {v}")));
            }
        }
        let rayleigh_range = std::f64::consts::PI * waist * waist / wavelength;
        let (omega_radial, omega_axial) = harmonic_frequencies(depth, waist, rayleigh_range, mass);
        Ok(Self {
            wavelength,
            waist,
            depth,
            mass,
            rayleigh_range,
            omega_radial,
            omega_axial,
        })
    }

    pub fn from_radial_frequency(wavelength: f64, waist: f64, omega_r: f64, mass: f64) -> Result<Self> {
        Self::new(wavelength, waist, depth_from_radial_frequency(omega_r, waist, mass)?, mass)
    }

    /// 851 nm tweezer with a 1.1 µm waist, depth set by ω_r = 2π×73 kHz,
    /// holding Rb87.
    pub fn tweezer() -> Self {
        Self::from_radial_frequency(
            DEFAULT_WAVELENGTH,
            DEFAULT_WAIST,
            from_khz(73.0),
            PhysicalConstants::CODATA.mass_rb87,
        )
        .expect("default trap parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let fresh = Self::new(self.wavelength, self.waist, self.depth, self.mass)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        if !close(self.rayleigh_range, fresh.rayleigh_range)
            || !close(self.omega_radial, fresh.omega_radial)
            || !close(self.omega_axial, fresh.omega_axial)
        {
            return Err(domain("derived trap fields are inconsistent with wavelength, waist and depth"));
        }
        Ok(())
    }

    /// Beam radius w(z).
    pub fn beam_radius(&self, z: f64) -> f64 {
        self.waist * (1.0 + (z / self.rayleigh_range).powi(2)).sqrt()
    }
}

fn harmonic_frequencies(depth: f64, waist: f64, zr: f64, mass: f64) -> (f64, f64) {
    (
        (4.0 * depth / (mass * waist * waist)).sqrt(),
        (2.0 * depth / (mass * zr * zr)).sqrt(),
    )
}

/// `U₀ = m·w₀²·ω_r²/4`.
pub fn depth_from_radial_frequency(omega_r: f64, waist: f64, mass: f64) -> Result<f64> {
    if !(omega_r > 0.0) || !(waist > 0.0) || !(mass > 0.0) {
        return Err(domain(format!(
            "radial frequency, waist and mass must be positive (got {omega_r}, {waist}, {mass})"
        )));
    }
    Ok(mass * waist * waist * omega_r * omega_r / 4.0)
}

/// (ω_r, ω_z) of the harmonic expansion about the trap centre.
pub fn trap_frequencies(geometry: &TrapGeometry, mass: f64) -> Result<(f64, f64)> {
    if !(mass > 0.0) {
        return Err(domain(format!("mass must be positive, got {mass}")));
    }
    Ok(harmonic_frequencies(geometry.depth, geometry.waist, geometry.rayleigh_range, mass))
}

/// `U = −U₀·exp(−2r²/w(z)²)/(1 + (z/z_R)²)`.
pub fn potential(geometry: &TrapGeometry, position: &[f64; 3]) -> f64 {
    let [x, y, z] = *position;
    let s = 1.0 + (z / geometry.rayleigh_range).powi(2);
    let w2 = geometry.waist * geometry.waist * s;
    -geometry.depth * (-2.0 * (x * x + y * y) / w2).exp() / s
}

/// Trap description in laboratory units, as it appears in configuration
/// files. Exactly one of `depth_mk` and `radial_khz` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSpec {
    pub wavelength_nm: f64,
    pub waist_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_mk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial_khz: Option<f64>,
}

impl Default for TrapSpec {
    fn default() -> Self {
        Self {
            wavelength_nm: DEFAULT_WAVELENGTH * 1e9,
            waist_um: DEFAULT_WAIST * 1e6,
            depth_mk: None,
            radial_khz: Some(73.0),
        }
    }
}

impl TrapSpec {
    pub fn to_geometry(&self, mass: f64) -> Result<TrapGeometry> {
        let wavelength = self.wavelength_nm * 1e-9;
        let waist = self.waist_um * 1e-6;
        match (self.depth_mk, self.radial_khz) {
            (Some(mk), None) => TrapGeometry::new(wavelength, waist, mk * 1e-3 * PhysicalConstants::CODATA.kb, mass),
            (None, Some(khz)) => TrapGeometry::from_radial_frequency(wavelength, waist, from_khz(khz), mass),
            _ => Err(domain("trap needs exactly one of depth_mk or radial_khz")),
        }
    }

    /// Lab-unit description with the depth given explicitly.
    pub fn from_geometry(geometry: &TrapGeometry) -> Self {
        Self {
            wavelength_nm: geometry.wavelength * 1e9,
            waist_um: geometry.waist * 1e6,
            depth_mk: Some(geometry.depth / PhysicalConstants::CODATA.kb * 1e3),
            radial_khz: None,
        }
    }
}

/// Radial and axial frequencies in kHz, for reports.
pub fn frequencies_khz(geometry: &TrapGeometry) -> (f64, f64) {
    (to_khz(geometry.omega_radial), to_khz(geometry.omega_axial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const C: PhysicalConstants = PhysicalConstants::CODATA;

    #[test]
    fn depth_examples() {
        let u0 = depth_from_radial_frequency(from_khz(73.0), DEFAULT_WAIST, C.mass_rb87).unwrap();
        assert!((u0 / C.kb * 1e3 - 0.665).abs() < 0.001, "{}", u0 / C.kb * 1e3);
        let u1 = depth_from_radial_frequency(from_khz(146.0), DEFAULT_WAIST, C.mass_rb87).unwrap();
        assert!((u1 / u0 - 4.0).abs() < 1e-12);
        assert!(depth_from_radial_frequency(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn frequencies_examples() {
        let t = TrapGeometry::tweezer();
        let (wr, wz) = trap_frequencies(&t, C.mass_rb87).unwrap();
        assert!((wr / from_khz(73.0) - 1.0).abs() < 1e-12);
        assert!((to_khz(wz) - 12.7).abs() < 0.05, "{}", to_khz(wz));
        assert!((t.rayleigh_range * 1e6 - 4.467).abs() < 0.001);
        let shallow = TrapGeometry::new(DEFAULT_WAVELENGTH, DEFAULT_WAIST, 1e-40, C.mass_rb87).unwrap();
        assert!(shallow.omega_radial < 1.0 && shallow.omega_axial < 1.0);
        assert!((wr / wz - 2f64.sqrt() * t.rayleigh_range / t.waist).abs() < 1e-9);
        t.validate().unwrap();
    }

    #[test]
    fn potential_examples() {
        let t = TrapGeometry::tweezer();
        assert_eq!(potential(&t, &[0.0; 3]), -t.depth);
        assert!(potential(&t, &[1.0, 0.0, 0.0]).abs() < 1e-300);
        assert!(potential(&t, &[0.0, 0.0, 1e3]).abs() < 1e-15 * t.depth);
    }

    #[test]
    fn harmonic_expansion() {
        let t = TrapGeometry::tweezer();
        let m = C.mass_rb87;
        let d = 0.05 * t.waist;
        for pos in [[d, 0.0, 0.0], [0.0, d, 0.0], [0.0, 0.0, d], [0.6 * d, 0.0, 0.8 * d]] {
            let r2 = pos[0] * pos[0] + pos[1] * pos[1];
            let harmonic = 0.5 * m * t.omega_radial.powi(2) * r2 + 0.5 * m * t.omega_axial.powi(2) * pos[2] * pos[2];
            let exact = potential(&t, &pos) + t.depth;
            assert!((exact / harmonic - 1.0).abs() < 0.01, "{exact} vs {harmonic}");
        }
    }

    #[test]
    fn spec_round_trip() {
        let t = TrapGeometry::tweezer();
        let spec = TrapSpec::from_geometry(&t);
        let json = serde_json::to_string(&spec).unwrap();
        let back: TrapSpec = serde_json::from_str(&json).unwrap();
        let t2 = back.to_geometry(C.mass_rb87).unwrap();
        assert!((t2.omega_radial / t.omega_radial - 1.0).abs() < 1e-12);
        let d = TrapSpec::default().to_geometry(C.mass_rb87).unwrap();
        assert!((d.depth / t.depth - 1.0).abs() < 1e-12);
        let bad = TrapSpec {
            depth_mk: Some(1.0),
            ..TrapSpec::default()
        };
        assert!(bad.to_geometry(C.mass_rb87).is_err());
    }

    proptest! {
        #[test]
        fn potential_bounded_and_radially_monotone(
            r1 in 0.0f64..5e-6, dr in 0.0f64..5e-6, z in -2e-5f64..2e-5, phi in 0.0f64..6.3
        ) {
            let t = TrapGeometry::tweezer();
            let at = |r: f64| potential(&t, &[r * phi.cos(), r * phi.sin(), z]);
            prop_assert!(at(r1) <= 0.0);
            prop_assert!(at(r1 + dr) >= at(r1));
        }

        #[test]
        fn radial_frequency_round_trip(khz in 1.0f64..500.0, waist_um in 0.5f64..5.0) {
            let t = TrapGeometry::from_radial_frequency(DEFAULT_WAVELENGTH, waist_um * 1e-6, from_khz(khz), C.mass_rb87).unwrap();
            let (wr, _) = trap_frequencies(&t, C.mass_rb87).unwrap();
            prop_assert!((wr / from_khz(khz) - 1.0).abs() < 1e-12);
        }
    }
}

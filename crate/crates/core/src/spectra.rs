//! Dressed-state eigenvalues and Fano excitation spectra of a driven Λ system.
//!
//! Analytic light shift and linewidth of the narrow dressed resonance come in
//! two flavours: the large-detuning expansion in `1/Δc` and the probe-corrected
//! form valid near two-photon resonance. [`exact_eigenvalues`] diagonalises the
//! non-Hermitian effective Hamiltonian and serves as the numerical reference
//! for both.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::types::{LambdaParams, Spectrum, SpectrumKind, TWO_PI};

/// Light shift and widths of the two dressed resonances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedPair {
    pub delta_shift: f64,
    /// Width of the narrow (Fano) resonance.
    pub gamma_plus: f64,
    /// Width of the broad resonance.
    pub gamma_minus: f64,
}

/// Which analytic dressed-state formula feeds a Fano spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DressedModel {
    Perturbative,
    ProbeCorrected,
}

/// Rabi-frequency conventions evaluated by [`convention_audit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiConvention {
    /// Hamiltonian coupling Ω/2; the formulas evaluated as written.
    Standard,
    /// Hamiltonian coupling Ω, i.e. every Ω in the formulas replaced by 2Ω.
    DoubledRabi,
    /// Denominator Δc² + Γ² instead of 4Δc² + Γ².
    ReducedDenominator,
}

impl RabiConvention {
    pub const ALL: [RabiConvention; 3] = [
        RabiConvention::Standard,
        RabiConvention::DoubledRabi,
        RabiConvention::ReducedDenominator,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RabiConvention::Standard => "standard",
            RabiConvention::DoubledRabi => "doubled_rabi",
            RabiConvention::ReducedDenominator => "reduced_denominator",
        }
    }

    /// Coupling prefactor in the effective Hamiltonian, or `None` when the
    /// convention does not correspond to a Hamiltonian.
    pub fn hamiltonian_coupling(&self) -> Option<f64> {
        match self {
            RabiConvention::Standard => Some(0.5),
            RabiConvention::DoubledRabi => Some(1.0),
            RabiConvention::ReducedDenominator => None,
        }
    }
}

/// δ = Ωc²/(4Δc), Γ₊ = ΓΩc²/(4Δc²), Γ₋ = Γ − Γ₊.
pub fn dressed_perturbative(params: &LambdaParams) -> Result<DressedPair> {
    params.validate()?;
    let dc = params.delta_c;
    if dc == 0.0 {
        return Err(Error::Singular("coupling detuning is zero".into()));
    }
    let oc2 = params.omega_c * params.omega_c;
    let delta_shift = oc2 / (4.0 * dc);
    let gamma_plus = params.gamma * oc2 / (4.0 * dc * dc);
    Ok(DressedPair {
        delta_shift,
        gamma_plus,
        gamma_minus: params.gamma - gamma_plus,
    })
}

/// Probe-corrected light shift and width near Δp = Δc.
pub fn dressed_probe_corrected(params: &LambdaParams) -> Result<DressedPair> {
    dressed_probe_corrected_with(params, RabiConvention::Standard)
}

pub fn dressed_probe_corrected_with(params: &LambdaParams, convention: RabiConvention) -> Result<DressedPair> {
    params.validate()?;
    let (dc, g) = (params.delta_c, params.gamma);
    let (scale, denom) = match convention {
        RabiConvention::Standard => (1.0, 4.0 * dc * dc + g * g),
        RabiConvention::DoubledRabi => (4.0, 4.0 * dc * dc + g * g),
        RabiConvention::ReducedDenominator => (1.0, dc * dc + g * g),
    };
    let oc2 = scale * params.omega_c * params.omega_c;
    let op2 = scale * params.omega_p * params.omega_p;
    let gamma_plus = g * (oc2 + op2) / denom;
    Ok(DressedPair {
        delta_shift: dc * (oc2 - op2) / denom,
        gamma_plus,
        gamma_minus: g - gamma_plus,
    })
}

/// Eigenvalues of the effective Hamiltonian, sorted by ascending |Im|,
/// together with their dressed-state labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEigenvalues {
    pub lambdas: [Complex64; 3],
    g_index: usize,
    plus_index: usize,
    minus_index: usize,
}

impl ComplexEigenvalues {
    /// Eigenvalue continuously connected to the bare ground state |g⟩.
    pub fn lambda_g(&self) -> Complex64 {
        self.lambdas[self.g_index]
    }

    /// Narrow dressed resonance, `−δ − iΓ₊/2`.
    pub fn lambda_plus(&self) -> Complex64 {
        self.lambdas[self.plus_index]
    }

    /// Broad dressed resonance, `Δc + δ − iΓ₋/2`.
    pub fn lambda_minus(&self) -> Complex64 {
        self.lambdas[self.minus_index]
    }

    pub fn imag_sum(&self) -> f64 {
        self.lambdas.iter().map(|l| l.im).sum()
    }

    /// Light shift and widths read off the labelled eigenvalues.
    pub fn dressed(&self) -> DressedPair {
        DressedPair {
            delta_shift: -self.lambda_plus().re,
            gamma_plus: -2.0 * self.lambda_plus().im,
            gamma_minus: -2.0 * self.lambda_minus().im,
        }
    }
}

/// Effective non-Hermitian Hamiltonian in basis (g, e, g′), measured from
/// the g′ level so that the uncoupled |g⟩ sits at Δc − Δp.
pub fn effective_hamiltonian(params: &LambdaParams, coupling: f64) -> Matrix3<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let hp = coupling * params.omega_p;
    let hc = coupling * params.omega_c;
    Matrix3::new(
        c(params.delta_c - params.delta_p, 0.0),
        c(hp, 0.0),
        c(0.0, 0.0),
        c(hp, 0.0),
        c(params.delta_c, -params.gamma / 2.0),
        c(hc, 0.0),
        c(0.0, 0.0),
        c(hc, 0.0),
        c(0.0, 0.0),
    )
}

pub fn exact_eigenvalues(params: &LambdaParams) -> Result<ComplexEigenvalues> {
    exact_eigenvalues_with(params, RabiConvention::Standard)
}

pub fn exact_eigenvalues_with(params: &LambdaParams, convention: RabiConvention) -> Result<ComplexEigenvalues> {
    params.validate()?;
    let coupling = convention.hamiltonian_coupling().ok_or_else(|| {
        Error::InvalidArgument(format!("convention '{}' has no Hamiltonian form", convention.name()))
    })?;
    let h = effective_hamiltonian(params, coupling);
    let mut lambdas = eigenvalues3(&h)?;
    lambdas.sort_by(|a, b| a.im.abs().total_cmp(&b.im.abs()));

    // Weight of each bare state in each eigenvector.
    let weights: Vec<[f64; 3]> = lambdas
        .iter()
        .map(|&l| {
            let v = null_vector3(&h, l);
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            [v[0].norm_sqr() / n, v[1].norm_sqr() / n, v[2].norm_sqr() / n]
        })
        .collect();

    let minus_index = argmax(&[weights[0][1], weights[1][1], weights[2][1]]);
    let rest: Vec<usize> = (0..3).filter(|&i| i != minus_index).collect();
    let (a, b) = (rest[0], rest[1]);
    // The narrow resonance carries the g′ character; on a tie keep the
    // narrower one (already first after sorting).
    let plus_index = if weights[b][2] > weights[a][2] + 1e-9 { b } else { a };
    let g_index = if plus_index == a { b } else { a };
    Ok(ComplexEigenvalues {
        lambdas,
        g_index,
        plus_index,
        minus_index,
    })
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn eigenvalues3(h: &Matrix3<Complex64>) -> Result<[Complex64; 3]> {
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let scaled = h.unscale(scale);
    let schur = nalgebra::Schur::try_new(scaled, 1e-15, 10_000)
        .ok_or_else(|| Error::Domain("Schur decomposition did not converge".into()))?;
    let t = schur.unpack().1;
    Ok([t[(0, 0)] * scale, t[(1, 1)] * scale, t[(2, 2)] * scale])
}

/// Right null vector of `h − λ` from the best-conditioned cross product of
/// two of its rows.
fn null_vector3(h: &Matrix3<Complex64>, lambda: Complex64) -> Vector3<Complex64> {
    let a = h - Matrix3::from_diagonal_element(lambda);
    let row = |i: usize| Vector3::new(a[(i, 0)], a[(i, 1)], a[(i, 2)]);
    let cross = |u: Vector3<Complex64>, v: Vector3<Complex64>| {
        Vector3::new(
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        )
    };
    let candidates = [cross(row(0), row(1)), cross(row(0), row(2)), cross(row(1), row(2))];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .copied()
        .unwrap_or_else(Vector3::zeros);
    if best.norm() > 0.0 {
        return best;
    }
    // Rank ≤ 1: any vector orthogonal (bilinearly) to the nonzero row works.
    for i in 0..3 {
        let r = row(i);
        if r.norm() > 0.0 {
            let e = if r[0].norm() > 0.0 || r[1].norm() > 0.0 {
                Vector3::new(-r[1], r[0], Complex64::new(0.0, 0.0))
            } else {
                Vector3::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
            };
            return e;
        }
    }
    Vector3::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
}

/// Fano profile `(q + ε)²/(1 + ε²)` with `q = 2δ/Γ₊`,
/// `ε = 2(Δp − Δc − δ)/Γ₊`. Zero at Δp = Δc, tends to 1 far away.
pub fn fano_intensity(delta_p: f64, params: &LambdaParams, dressed: &DressedPair) -> Result<f64> {
    fano_profile(delta_p, params.delta_c, dressed.delta_shift, dressed.gamma_plus)
}

/// Fano profile parameterised directly by dip position, shift and width.
pub fn fano_profile(delta_p: f64, center: f64, delta_shift: f64, gamma_plus: f64) -> Result<f64> {
    if !(gamma_plus > 0.0) {
        return Err(domain(format!("Fano width must be positive, got {gamma_plus}")));
    }
    let detuning = delta_p - center;
    let eps = 2.0 * (detuning - delta_shift) / gamma_plus;
    // q + ε simplifies to 2(Δp − Δc)/Γ₊, which is exactly zero at the dip.
    let num = 2.0 * detuning / gamma_plus;
    Ok(num * num / (1.0 + eps * eps))
}

pub fn dressed_pair(params: &LambdaParams, model: DressedModel) -> Result<DressedPair> {
    match model {
        DressedModel::Perturbative => dressed_perturbative(params),
        DressedModel::ProbeCorrected => dressed_probe_corrected(params),
    }
}

pub fn fano_spectrum(scan: &[f64], params: &LambdaParams, model: DressedModel) -> Result<Spectrum> {
    let dressed = dressed_pair(params, model)?;
    let values = scan
        .iter()
        .map(|&dp| fano_intensity(dp, params, &dressed))
        .collect::<Result<Vec<_>>>()?;
    Spectrum::from_parts(scan, &values, SpectrumKind::AnalyticRate)
}

/// One Λ configuration inside a weighted superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaComponent {
    pub weight: f64,
    pub params: LambdaParams,
}

/// Incoherent weighted sum of Fano spectra, renormalised to unit asymptote.
pub fn multi_lambda_spectrum(components: &[LambdaComponent], scan: &[f64], model: DressedModel) -> Result<Spectrum> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("multi-Λ spectrum needs at least one component".into()));
    }
    if components.iter().any(|c| !(c.weight >= 0.0) || !c.weight.is_finite()) {
        return Err(Error::InvalidArgument("component weights must be finite and non-negative".into()));
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("component weights are all zero".into()));
    }
    let spectra = components
        .par_iter()
        .map(|c| fano_spectrum(scan, &c.params, model))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; scan.len()];
    for (c, s) in components.iter().zip(&spectra) {
        for (acc, p) in values.iter_mut().zip(s.points()) {
            *acc += c.weight * p.value;
        }
    }
    values.iter_mut().for_each(|v| *v /= total);
    Spectrum::from_parts(scan, &values, SpectrumKind::AnalyticRate)
}

/// Relative probe/coupling strengths of one Λ configuration, given as
/// squared Clebsch–Gordan factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaStrength {
    pub label: &'static str,
    pub weight: f64,
    pub probe_cg2: f64,
    pub coupling_cg2: f64,
}

/// The three σ⁺-probe / σ⁻-coupling Λ configurations inside Rb87
/// 5S₁/₂ F=2 → 5P₃/₂ F′=3.
///
/// External reference data: squared D2 F=2→F′=3 dipole matrix element
/// factors from the standard Rb87 D-line tables (σ⁺ from m_F = −2..2 is
/// 1/30, 1/10, 1/5, 1/3, 1/2; σ⁻ mirrors it). Equal population weights.
pub const RB87_F2_F3_SIGMA_LAMBDAS: [LambdaStrength; 3] = [
    LambdaStrength {
        label: "|2,-2> - |3,-1> - |2,0>",
        weight: 1.0 / 3.0,
        probe_cg2: 1.0 / 30.0,
        coupling_cg2: 1.0 / 5.0,
    },
    LambdaStrength {
        label: "|2,-1> - |3,0> - |2,1>",
        weight: 1.0 / 3.0,
        probe_cg2: 1.0 / 10.0,
        coupling_cg2: 1.0 / 10.0,
    },
    LambdaStrength {
        label: "|2,0> - |3,1> - |2,2>",
        weight: 1.0 / 3.0,
        probe_cg2: 1.0 / 5.0,
        coupling_cg2: 1.0 / 30.0,
    },
];

/// Squared dipole factor of the stretched |2,2⟩ → |3,3⟩ cycling transition
/// in the same normalisation as [`RB87_F2_F3_SIGMA_LAMBDAS`].
pub const RB87_CYCLING_CG2: f64 = 0.5;

/// Scales `reference` to each configuration of `strengths`. The reference
/// Rabi frequencies are those of a transition with squared dipole factor
/// `reference_cg2` (the cycling transition, as Rabi frequencies are
/// usually quoted).
pub fn multi_lambda_components(
    reference: &LambdaParams,
    strengths: &[LambdaStrength],
    reference_cg2: f64,
) -> Vec<LambdaComponent> {
    strengths
        .iter()
        .map(|s| {
            let probe = (s.probe_cg2 / reference_cg2).sqrt();
            let coupling = (s.coupling_cg2 / reference_cg2).sqrt();
            LambdaComponent {
                weight: s.weight,
                params: reference.with_rabi(reference.omega_p * probe, reference.omega_c * coupling),
            }
        })
        .collect()
}

/// Narrow-resonance widths quoted for the s = 1, 2, 4, 8 probe settings of
/// the spectroscopy run (Ωc = 1.4Γ, Δc = −2π×80 MHz), in kHz.
pub const QUOTED_GAMMA_PLUS_KHZ: [(f64, f64); 4] = [(1.0, 83.0), (2.0, 100.0), (4.0, 132.0), (8.0, 201.0)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionRow {
    pub saturation: f64,
    pub quoted_khz: f64,
    /// Γ₊/2π from the probe-corrected formula, one entry per convention.
    pub formula_khz: Vec<(RabiConvention, f64)>,
    /// Γ₊/2π of the narrow eigenvalue at Δp = Δc, for conventions with a
    /// Hamiltonian form.
    pub eigen_khz: Vec<(RabiConvention, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionAudit {
    pub rows: Vec<ConventionRow>,
    /// Worst relative deviation from the quoted widths, per convention.
    pub worst_deviation: Vec<(RabiConvention, f64)>,
    /// Hamiltonian-backed convention with the smallest worst deviation.
    pub selected: RabiConvention,
}

impl ConventionAudit {
    pub fn report(&self) -> String {
        let mut out = String::from("s   quoted[kHz]");
        for c in RabiConvention::ALL {
            out.push_str(&format!("  {:>20}", c.name()));
        }
        out.push_str("  eigen(standard)  eigen(doubled)\n");
        for row in &self.rows {
            out.push_str(&format!("{:<3} {:>11.1}", row.saturation, row.quoted_khz));
            for (_, v) in &row.formula_khz {
                out.push_str(&format!("  {v:>20.1}"));
            }
            for (_, v) in &row.eigen_khz {
                out.push_str(&format!("  {v:>15.1}"));
            }
            out.push('\n');
        }
        for (c, d) in &self.worst_deviation {
            out.push_str(&format!("worst deviation {:<20} {:>6.1}%\n", c.name(), 100.0 * d));
        }
        out.push_str(&format!("selected convention: {}\n", self.selected.name()));
        out
    }
}

/// Evaluates the narrow-resonance width for each probe saturation under
/// every convention, against the exact eigenvalues and the quoted widths.
pub fn convention_audit(omega_c: f64, delta_c: f64, gamma: f64) -> Result<ConventionAudit> {
    let mut rows = Vec::new();
    for &(s, quoted) in &QUOTED_GAMMA_PLUS_KHZ {
        let omega_p = crate::types::saturation_to_rabi(s, gamma)?;
        let params = LambdaParams::new(omega_p, omega_c, delta_c, delta_c, gamma)?;
        let formula_khz = RabiConvention::ALL
            .iter()
            .map(|&c| Ok((c, dressed_probe_corrected_with(&params, c)?.gamma_plus / (TWO_PI * 1e3))))
            .collect::<Result<Vec<_>>>()?;
        let eigen_khz = RabiConvention::ALL
            .iter()
            .filter(|c| c.hamiltonian_coupling().is_some())
            .map(|&c| Ok((c, bright_width(&params, c)? / (TWO_PI * 1e3))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(ConventionRow {
            saturation: s,
            quoted_khz: quoted,
            formula_khz,
            eigen_khz,
        });
    }
    let worst_deviation: Vec<(RabiConvention, f64)> = RabiConvention::ALL
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let worst = rows
                .iter()
                .map(|r| (r.formula_khz[i].1 / r.quoted_khz - 1.0).abs())
                .fold(0.0, f64::max);
            (c, worst)
        })
        .collect();
    let selected = worst_deviation
        .iter()
        .filter(|(c, _)| c.hamiltonian_coupling().is_some())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| *c)
        .unwrap_or(RabiConvention::Standard);
    Ok(ConventionAudit {
        rows,
        worst_deviation,
        selected,
    })
}

/// Width of the eigenvalue that carries the ground-state bright
/// superposition at two-photon resonance (the one whose width the
/// probe-corrected formula describes).
fn bright_width(params: &LambdaParams, convention: RabiConvention) -> Result<f64> {
    let ev = exact_eigenvalues_with(params, convention)?;
    // Ascending |Im|: the dark state is exactly zero, the bright state next.
    Ok(-2.0 * ev.lambdas[1].im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{from_khz, from_mhz, saturation_to_rabi, to_khz};
    use proptest::prelude::*;

    const GAMMA: f64 = TWO_PI * 6.07e6;

    fn params(op: f64, oc: f64, dp: f64, dc: f64) -> LambdaParams {
        LambdaParams::new(op, oc, dp, dc, GAMMA).unwrap()
    }

    #[test]
    fn perturbative_light_shift_anchor() {
        let p = params(0.0, from_mhz(5.06), 0.0, from_mhz(94.5));
        let d = dressed_perturbative(&p).unwrap();
        assert!((to_khz(d.delta_shift) - 67.7).abs() < 0.05, "{}", to_khz(d.delta_shift));
        assert!((d.gamma_plus + d.gamma_minus - GAMMA).abs() < 1e-6);
    }

    #[test]
    fn perturbative_zero_coupling() {
        let d = dressed_perturbative(&params(0.0, 0.0, 0.0, from_mhz(10.0))).unwrap();
        assert_eq!(d.delta_shift, 0.0);
        assert_eq!(d.gamma_plus, 0.0);
        assert_eq!(d.gamma_minus, GAMMA);
    }

    #[test]
    fn perturbative_width_at_spectroscopy_settings() {
        let d = dressed_perturbative(&params(0.0, 1.4 * GAMMA, 0.0, -from_mhz(80.0))).unwrap();
        assert!((to_khz(d.gamma_plus) - 17.1).abs() < 0.05, "{}", to_khz(d.gamma_plus));
        assert!(d.delta_shift < 0.0);
    }

    #[test]
    fn perturbative_singular_at_zero_detuning() {
        assert!(matches!(
            dressed_perturbative(&params(0.0, 1.0, 0.0, 0.0)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn probe_corrected_examples() {
        let op = saturation_to_rabi(1.0, GAMMA).unwrap();
        let d = dressed_probe_corrected(&params(op, 1.4 * GAMMA, 0.0, -from_mhz(80.0))).unwrap();
        assert!((to_khz(d.gamma_plus) - 21.5).abs() < 0.05, "{}", to_khz(d.gamma_plus));

        let eq = dressed_probe_corrected(&params(1e6, 1e6, 0.0, from_mhz(50.0))).unwrap();
        assert_eq!(eq.delta_shift, 0.0);

        let dc = from_mhz(80.0);
        let weak = params(0.0, 1.4 * GAMMA, 0.0, dc);
        let a = dressed_probe_corrected(&weak).unwrap();
        let b = dressed_perturbative(&weak).unwrap();
        let bound = GAMMA * GAMMA / (4.0 * dc * dc);
        assert!(((a.delta_shift - b.delta_shift) / b.delta_shift).abs() < bound);
        assert!(((a.gamma_plus - b.gamma_plus) / b.gamma_plus).abs() < bound);
    }

    #[test]
    fn eigenvalues_uncoupled() {
        let dp = from_mhz(3.0);
        let dc = from_mhz(10.0);
        let ev = exact_eigenvalues(&params(0.0, 0.0, dp, dc)).unwrap();
        let close = |a: Complex64, b: Complex64| (a - b).norm() < 1e-6 * dc;
        assert!(close(ev.lambda_g(), Complex64::new(dc - dp, 0.0)));
        assert!(close(ev.lambda_plus(), Complex64::new(0.0, 0.0)));
        assert!(close(ev.lambda_minus(), Complex64::new(dc, -GAMMA / 2.0)));
    }

    #[test]
    fn eigenvalues_converge_to_perturbative() {
        let p = params(1e-3 * GAMMA, 1.4 * GAMMA, from_mhz(-79.0), -from_mhz(80.0));
        let exact = exact_eigenvalues(&p).unwrap().dressed();
        let pert = dressed_perturbative(&p).unwrap();
        assert!(((exact.gamma_plus - pert.gamma_plus) / pert.gamma_plus).abs() < 0.02);
        assert!(((exact.delta_shift - pert.delta_shift) / pert.delta_shift).abs() < 0.02);
        assert!(((exact.gamma_minus - pert.gamma_minus) / pert.gamma_minus).abs() < 0.02);
    }

    #[test]
    fn fano_zero_and_asymptote() {
        let p = params(0.0, 1.4 * GAMMA, 0.0, -from_mhz(80.0));
        let d = dressed_probe_corrected(&p).unwrap();
        assert_eq!(fano_intensity(p.delta_c, &p, &d).unwrap(), 0.0);
        let far = fano_intensity(p.delta_c + 1e6 * d.gamma_plus, &p, &d).unwrap();
        assert!((far - 1.0).abs() < 1e-3);
        let far = fano_intensity(p.delta_c - 1e6 * d.gamma_plus, &p, &d).unwrap();
        assert!((far - 1.0).abs() < 1e-3);
        let zero_width = DressedPair {
            delta_shift: 1.0,
            gamma_plus: 0.0,
            gamma_minus: GAMMA,
        };
        assert!(fano_intensity(0.0, &p, &zero_width).is_err());
    }

    #[test]
    fn fano_maximum_by_grid_scan() {
        // Calculus says the maximum q²+1 sits at Δp = Δc + δ + Γ₊²/(4δ).
        let p = params(0.0, 0.0, 0.0, from_mhz(20.0));
        let d = DressedPair {
            delta_shift: from_khz(50.0),
            gamma_plus: from_khz(30.0),
            gamma_minus: GAMMA,
        };
        let q = 2.0 * d.delta_shift / d.gamma_plus;
        let expected_at = p.delta_c + d.delta_shift + d.gamma_plus * d.gamma_plus / (4.0 * d.delta_shift);
        let grid = crate::types::linspace(p.delta_c - from_khz(500.0), p.delta_c + from_khz(500.0), 200_001);
        let (best_x, best_v) = grid
            .iter()
            .map(|&x| (x, fano_intensity(x, &p, &d).unwrap()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((best_v - (q * q + 1.0)).abs() < 1e-6 * (q * q + 1.0));
        assert!((best_x - expected_at).abs() < from_khz(0.01));
    }

    #[test]
    fn spectrum_single_point_at_dip() {
        let p = params(GAMMA / 2.0, 1.4 * GAMMA, 0.0, -from_mhz(80.0));
        let s = fano_spectrum(&[p.delta_c], &p, DressedModel::ProbeCorrected).unwrap();
        assert_eq!(s.values(), vec![0.0]);
    }

    #[test]
    fn spectroscopy_profile_is_asymmetric_with_dip_at_coupling_detuning() {
        let op = saturation_to_rabi(1.0, GAMMA).unwrap();
        let p = params(op, 1.4 * GAMMA, 0.0, -from_mhz(80.0));
        let grid = crate::types::linspace(p.delta_c - from_mhz(6.0), p.delta_c + from_mhz(6.0), 1201);
        let s = fano_spectrum(&grid, &p, DressedModel::ProbeCorrected).unwrap();
        let values = s.values();
        let dip = argmin(&values);
        assert!((grid[dip] - p.delta_c).abs() < 1.0);
        assert_eq!(values[dip], 0.0);
        let peak = argmax(&values);
        // Δc < 0 puts the narrow peak on the red side of the dip.
        assert!(grid[peak] < p.delta_c);
        assert!(values.iter().all(|&v| v >= 0.0));
    }

    fn argmin(v: &[f64]) -> usize {
        v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    }

    #[test]
    fn multi_lambda_trivial_cases() {
        let p = params(GAMMA / 2.0, 1.4 * GAMMA, 0.0, -from_mhz(80.0));
        let grid = crate::types::linspace(p.delta_c - from_mhz(1.0), p.delta_c + from_mhz(1.0), 101);
        let single = fano_spectrum(&grid, &p, DressedModel::ProbeCorrected).unwrap();
        let one = multi_lambda_spectrum(&[LambdaComponent { weight: 1.0, params: p }], &grid, DressedModel::ProbeCorrected).unwrap();
        assert_eq!(one.values(), single.values());
        let two = multi_lambda_spectrum(
            &[
                LambdaComponent { weight: 0.5, params: p },
                LambdaComponent { weight: 0.5, params: p },
            ],
            &grid,
            DressedModel::ProbeCorrected,
        )
        .unwrap();
        for (a, b) in two.values().iter().zip(single.values()) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        assert!(multi_lambda_spectrum(&[], &grid, DressedModel::ProbeCorrected).is_err());
        assert!(multi_lambda_spectrum(&[LambdaComponent { weight: 0.0, params: p }], &grid, DressedModel::ProbeCorrected).is_err());
    }

    #[test]
    fn preset_components_scale_rabi_frequencies() {
        let p = params(1.0, 1.0, 0.0, -from_mhz(80.0));
        let comps = multi_lambda_components(&p, &RB87_F2_F3_SIGMA_LAMBDAS, RB87_CYCLING_CG2);
        assert_eq!(comps.len(), 3);
        assert!((comps[0].params.omega_p - (1.0f64 / 15.0).sqrt()).abs() < 1e-12);
        assert!((comps[1].params.omega_p - 0.2f64.sqrt()).abs() < 1e-12);
        assert!((comps[2].params.omega_c - (1.0f64 / 15.0).sqrt()).abs() < 1e-12);
        let same = multi_lambda_components(&p, &RB87_F2_F3_SIGMA_LAMBDAS[..1], 1.0 / 30.0);
        assert!((same[0].params.omega_p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn audit_selects_doubled_rabi() {
        let audit = convention_audit(1.4 * GAMMA, -from_mhz(80.0), GAMMA).unwrap();
        assert_eq!(audit.selected, RabiConvention::DoubledRabi);
        // Exact eigenvalues follow the probe-corrected formula in either
        // Hamiltonian convention.
        for row in &audit.rows {
            for (c, eig) in &row.eigen_khz {
                let formula = row.formula_khz.iter().find(|(k, _)| k == c).unwrap().1;
                assert!((eig / formula - 1.0).abs() < 0.1, "{c:?} {eig} {formula}");
            }
        }
    }

    proptest! {
        #[test]
        fn trace_conservation(
            op in 0.0f64..3.0, oc in 0.0f64..3.0, dp in -30.0f64..30.0, dc in -30.0f64..30.0
        ) {
            let p = params(op * GAMMA, oc * GAMMA, dp * GAMMA, dc * GAMMA);
            let ev = exact_eigenvalues(&p).unwrap();
            prop_assert!((ev.imag_sum() + GAMMA / 2.0).abs() <= 1e-10 * GAMMA);
        }

        #[test]
        fn fano_zero_everywhere(oc in 0.01f64..3.0, op in 0.0f64..3.0, dc in 1.0f64..30.0, sign in prop::bool::ANY) {
            let dc = if sign { dc } else { -dc } * GAMMA;
            let p = params(op * GAMMA, oc * GAMMA, 0.0, dc);
            for model in [DressedModel::Perturbative, DressedModel::ProbeCorrected] {
                let d = dressed_pair(&p, model).unwrap();
                prop_assert_eq!(fano_intensity(dc, &p, &d).unwrap(), 0.0);
            }
        }

        #[test]
        fn fano_asymptote(oc in 0.1f64..3.0, dc in 5.0f64..30.0, k in 201.0f64..2000.0, side in prop::bool::ANY) {
            // F − 1 = (8uδ + 4δ² − Γ₊²)/(Γ₊² + 4u²) falls off as 2δ/u, so the
            // 1% band starts near 200·max(Γ₊, |δ|).
            let p = params(0.0, oc * GAMMA, 0.0, dc * GAMMA);
            let d = dressed_perturbative(&p).unwrap();
            let scale = d.gamma_plus.max(d.delta_shift.abs());
            let offset = if side { k * scale } else { -k * scale };
            let v = fano_intensity(p.delta_c + d.delta_shift + offset, &p, &d).unwrap();
            prop_assert!((v - 1.0).abs() < 0.01, "{}", v);
        }

        #[test]
        fn fano_near_asymptote_bound(oc in 0.1f64..3.0, dc in 5.0f64..30.0, k in 20.0f64..200.0, side in prop::bool::ANY) {
            let p = params(0.0, oc * GAMMA, 0.0, dc * GAMMA);
            let d = dressed_perturbative(&p).unwrap();
            let scale = d.gamma_plus.max(d.delta_shift.abs());
            let offset = if side { k * scale } else { -k * scale };
            let v = fano_intensity(p.delta_c + d.delta_shift + offset, &p, &d).unwrap();
            prop_assert!((v - 1.0).abs() <= 2.2 / k, "{} at {}", v, k);
        }

        #[test]
        fn sign_symmetry(oc in 0.1f64..3.0, op in 0.0f64..1.0, dc in 5.0f64..30.0, x in -5.0f64..5.0) {
            let p = params(op * GAMMA, oc * GAMMA, 0.0, dc * GAMMA);
            let m = params(op * GAMMA, oc * GAMMA, 0.0, -dc * GAMMA);
            let dp_ = dressed_probe_corrected(&p).unwrap();
            let dm = dressed_probe_corrected(&m).unwrap();
            prop_assert!((dp_.delta_shift + dm.delta_shift).abs() <= 1e-12 * dp_.delta_shift.abs());
            // Reflection about the dip.
            let off = x * dp_.gamma_plus;
            let a = fano_intensity(p.delta_c + off, &p, &dp_).unwrap();
            let b = fano_intensity(m.delta_c - off, &m, &dm).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn perturbative_consistency(oc in 0.02f64..0.2, g in 0.01f64..0.1, dc_mhz in 50.0f64..500.0, sign in prop::bool::ANY) {
            let dc = if sign { from_mhz(dc_mhz) } else { -from_mhz(dc_mhz) };
            let gamma = g * dc.abs();
            let p = LambdaParams::new(0.0, oc * dc.abs(), dc + 3.0 * gamma, dc, gamma).unwrap();
            let ev = exact_eigenvalues(&p).unwrap();
            let pert = dressed_perturbative(&p).unwrap();
            let lp = ev.lambda_plus();
            prop_assert!(((lp.re + pert.delta_shift) / pert.delta_shift).abs() < 0.05);
            prop_assert!(((lp.im + pert.gamma_plus / 2.0) / (pert.gamma_plus / 2.0)).abs() < 0.05);
        }
    }
}

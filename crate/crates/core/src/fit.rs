//! Levenberg-Marquardt least squares and the Fano / exponential fitters.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bloch::edge_mean;
use crate::error::{domain, Error, Result};
use crate::rng::stream_rng;
use crate::spectra::fano_profile;
use crate::types::{Spectrum, SpectrumKind, SpectrumPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Stop when the relative χ² decrease of an accepted step falls below
    /// this value.
    pub rel_tol: f64,
    /// Relative central-difference step for the Jacobian.
    pub jacobian_step: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tol: 1e-10,
            jacobian_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqResult {
    pub params: Vec<f64>,
    /// `(JᵀJ)⁻¹` of the σ-weighted Jacobian at the optimum.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub iterations: usize,
}

impl LsqResult {
    pub fn errors(&self) -> Vec<f64> {
        (0..self.params.len()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }
}

fn chi2_of<F: Fn(f64, &[f64]) -> f64>(model: &F, x: &[f64], y: &[f64], sigma: &[f64], p: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(sigma)
        .map(|((&xi, &yi), &si)| ((yi - model(xi, p)) / si).powi(2))
        .sum()
}

fn weighted_jacobian<F: Fn(f64, &[f64]) -> f64>(
    model: &F,
    x: &[f64],
    sigma: &[f64],
    p: &[f64],
    rel_step: f64,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(x.len(), p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = if p[j] != 0.0 { rel_step * p[j].abs() } else { rel_step };
        q[j] = p[j] + h;
        let up: Vec<f64> = x.iter().map(|&xi| model(xi, &q)).collect();
        q[j] = p[j] - h;
        let down: Vec<f64> = x.iter().map(|&xi| model(xi, &q)).collect();
        q[j] = p[j];
        for i in 0..x.len() {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h * sigma[i]);
        }
    }
    jac
}

fn check_rank(jac: &DMatrix<f64>, stage: &str) -> Result<()> {
    let sv = jac.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || !(min > 1e-10 * max) {
        return Err(Error::DegenerateFit(format!(
            "Jacobian is rank deficient at the {stage} parameters (singular values {min:e} / {max:e}); \
             some parameter does not affect the model"
        )));
    }
    Ok(())
}

pub fn least_squares<F>(model: F, x: &[f64], y: &[f64], sigma: &[f64], init: &[f64]) -> Result<LsqResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    least_squares_with(model, x, y, sigma, init, &LsqOptions::default())
}

/// Minimises `Σ((y − f(x; p))/σ)²` from `init`.
pub fn least_squares_with<F>(
    model: F,
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    init: &[f64],
    opts: &LsqOptions,
) -> Result<LsqResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let (n, m) = (x.len(), init.len());
    if y.len() != n || sigma.len() != n {
        return Err(Error::InvalidArgument("x, y and sigma must have equal length".into()));
    }
    if m == 0 || n < m {
        return Err(Error::InvalidArgument(format!("need at least as many points ({n}) as parameters ({m})")));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(domain("all sigmas must be positive and finite"));
    }
    if x.iter().chain(y).chain(init).any(|v| !v.is_finite()) {
        return Err(domain("data and initial parameters must be finite"));
    }
    let scale: f64 = y.iter().zip(sigma).map(|(yi, si)| (yi / si).powi(2)).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut p = init.to_vec();
    let mut chi2 = chi2_of(&model, x, y, sigma, &p);
    if !chi2.is_finite() {
        return Err(domain("model is not finite at the initial parameters"));
    }
    let mut jac = weighted_jacobian(&model, x, sigma, &p, opts.jacobian_step);
    check_rank(&jac, "initial")?;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        if chi2 <= 1e-28 * scale {
            converged = true;
            break;
        }
        let residual = DVector::from_iterator(
            n,
            x.iter().zip(y).zip(sigma).map(|((&xi, &yi), &si)| (yi - model(xi, &p)) / si),
        );
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * residual;
        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_chi2 = chi2_of(&model, x, y, sigma, &trial);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let small_step = step
                    .iter()
                    .zip(&p)
                    .all(|(d, pi)| d.abs() <= 1e-15 * pi.abs().max(1e-300));
                let rel = (chi2 - trial_chi2) / chi2.max(f64::MIN_POSITIVE);
                p = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < opts.rel_tol || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: a minimum to working precision.
            converged = true;
        }
        jac = weighted_jacobian(&model, x, sigma, &p, opts.jacobian_step);
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::MaxIterations {
            iterations,
            chi2,
            last: p,
        });
    }
    check_rank(&jac, "final")?;
    let covariance = (jac.transpose() * &jac)
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFit("normal matrix is singular at the optimum".into()))?;
    Ok(LsqResult {
        params: p,
        covariance,
        chi2,
        iterations,
    })
}

/// One named fit parameter for JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParameter {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
    pub unit: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// σ = sqrt(max(counts, 1)); covariance taken as is.
    Poisson,
    /// σ = 1; covariance rescaled by χ²/dof.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanoFit {
    pub delta_c_center: f64,
    pub delta_shift: f64,
    pub gamma_plus: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Order: center, shift, width, amplitude, offset.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub weighting: Weighting,
}

impl FanoFit {
    pub fn sigma(&self, index: usize) -> f64 {
        self.covariance[(index, index)].max(0.0).sqrt()
    }

    pub fn evaluate(&self, delta_p: f64) -> f64 {
        self.offset
            + self.amplitude
                * fano_profile(delta_p, self.delta_c_center, self.delta_shift, self.gamma_plus).unwrap_or(f64::NAN)
    }

    pub fn parameters(&self) -> Vec<NamedParameter> {
        let to_mhz = 1.0 / (crate::types::TWO_PI * 1e6);
        let unit = if self.weighting == Weighting::Poisson { "counts" } else { "rate" };
        let named = |name: &str, value: f64, sigma: f64, unit: &str| NamedParameter {
            name: name.into(),
            value,
            sigma,
            unit: unit.into(),
        };
        vec![
            named("delta_c_center", self.delta_c_center * to_mhz, self.sigma(0) * to_mhz, "MHz"),
            named("delta_shift", self.delta_shift * to_mhz, self.sigma(1) * to_mhz, "MHz"),
            named("gamma_plus", self.gamma_plus * to_mhz, self.sigma(2) * to_mhz, "MHz"),
            named("amplitude", self.amplitude, self.sigma(3), unit),
            named("offset", self.offset, self.sigma(4), unit),
        ]
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "model": "offset + amplitude * fano(delta_p; delta_c_center, delta_shift, gamma_plus)",
            "parameters": self.parameters(),
            "chi2": self.chi2,
            "dof": self.dof,
            "weighting": self.weighting,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoInit {
    pub center: f64,
    pub delta_shift: f64,
    pub gamma_plus: f64,
    pub amplitude: f64,
    pub offset: f64,
}

/// Starting point read off the data.
///
/// Center at the minimum, offset from the minimum value, amplitude from the
/// mean of the outermost 5% of points. The normalised peak height gives
/// q² = peak − 1, and the dip-to-peak distance `sep = δ(1 + 1/q²)` then
/// fixes δ and Γ₊ = 2|δ|/|q|. For a weak peak (q² < 1) Γ₊ falls back to
/// twice the dip-to-peak distance.
pub fn fano_auto_init(x: &[f64], y: &[f64]) -> Result<FanoInit> {
    if x.len() < 3 || x.len() != y.len() {
        return Err(Error::InvalidArgument("need at least 3 matching points".into()));
    }
    let argmin = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    let argmax = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    let center = x[argmin];
    let offset = y[argmin].max(0.0);
    let amplitude = (edge_mean(y) - offset).max(f64::MIN_POSITIVE);
    let sep = x[argmax] - center;
    let q2 = (y[argmax] - offset) / amplitude - 1.0;
    let span = x[x.len() - 1] - x[0];
    let (delta_shift, gamma_plus) = if q2 >= 1.0 && sep != 0.0 {
        let d = sep * q2 / (q2 + 1.0);
        (d, 2.0 * d.abs() / q2.sqrt())
    } else if sep != 0.0 {
        (0.5 * sep, 2.0 * sep.abs())
    } else {
        (0.0, span / 10.0)
    };
    Ok(FanoInit {
        center,
        delta_shift,
        gamma_plus: gamma_plus.max(span * 1e-6),
        amplitude,
        offset,
    })
}

/// Fits `offset + amplitude·F(Δp; center, δ, Γ₊)`.
///
/// Photon-count spectra are weighted with σ = sqrt(max(counts, 1)); rate
/// spectra use σ = 1 with the covariance rescaled by χ²/dof.
pub fn fit_fano(data: &Spectrum, init_hint: Option<FanoInit>) -> Result<FanoFit> {
    if data.len() < 10 {
        return Err(Error::InvalidArgument(format!("Fano fit needs at least 10 points, got {}", data.len())));
    }
    let x = data.detunings();
    let y = data.values();
    let weighting = match data.kind() {
        SpectrumKind::PhotonCounts => Weighting::Poisson,
        _ => Weighting::Uniform,
    };
    let init = match init_hint {
        Some(h) => h,
        None => fano_auto_init(&x, &y)?,
    };
    // Work in units of the initial width and the data scale.
    let xs = init.gamma_plus.abs().max(f64::MIN_POSITIVE);
    let ys = y.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let xr: Vec<f64> = x.iter().map(|v| (v - init.center) / xs).collect();
    let yr: Vec<f64> = y.iter().map(|v| v / ys).collect();
    let sigma: Vec<f64> = match weighting {
        Weighting::Poisson => y.iter().map(|c| c.max(1.0).sqrt() / ys).collect(),
        Weighting::Uniform => vec![1.0; y.len()],
    };
    let model = |xi: f64, p: &[f64]| {
        let eps = 2.0 * (xi - p[0] - p[1]) / p[2];
        let num = 2.0 * (xi - p[0]) / p[2];
        p[4] + p[3] * num * num / (1.0 + eps * eps)
    };
    let p0 = [0.0, init.delta_shift / xs, init.gamma_plus / xs, init.amplitude / ys, init.offset / ys];
    let r = least_squares(model, &xr, &yr, &sigma, &p0)?;
    let dof = x.len() - 5;
    let scale = [xs, xs, xs, ys, ys];
    let cov_factor = match weighting {
        Weighting::Poisson => 1.0,
        Weighting::Uniform => r.chi2 / dof.max(1) as f64,
    };
    let mut covariance = r.covariance.clone();
    for i in 0..5 {
        for j in 0..5 {
            covariance[(i, j)] *= scale[i] * scale[j] * cov_factor;
        }
    }
    let chi2 = match weighting {
        Weighting::Poisson => r.chi2,
        Weighting::Uniform => r.chi2 * ys * ys,
    };
    Ok(FanoFit {
        delta_c_center: init.center + xs * r.params[0],
        delta_shift: xs * r.params[1],
        gamma_plus: xs * r.params[2].abs(),
        amplitude: ys * r.params[3],
        offset: ys * r.params[4],
        covariance,
        chi2,
        dof,
        weighting,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpFit {
    pub tau_cool: f64,
    pub t_final: f64,
    pub t_initial: f64,
    /// Order: t_initial, t_final, tau_cool.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
}

impl ExpFit {
    pub fn sigma(&self, index: usize) -> f64 {
        self.covariance[(index, index)].max(0.0).sqrt()
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.t_final + (self.t_initial - self.t_final) * (-t / self.tau_cool).exp()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let named = |name: &str, value: f64, sigma: f64, unit: &str| NamedParameter {
            name: name.into(),
            value,
            sigma,
            unit: unit.into(),
        };
        json!({
            "model": "t_final + (t_initial - t_final) * exp(-t / tau_cool)",
            "parameters": [
                named("t_initial", self.t_initial * 1e6, self.sigma(0) * 1e6, "uK"),
                named("t_final", self.t_final * 1e6, self.sigma(1) * 1e6, "uK"),
                named("tau_cool", self.tau_cool * 1e3, self.sigma(2) * 1e3, "ms"),
            ],
            "chi2": self.chi2,
            "dof": self.dof,
            "weighting": Weighting::Uniform,
        })
    }
}

/// Fits `T(t) = T_f + (T_0 − T_f)·exp(−t/τ)` with uniform weights; the
/// covariance is rescaled by χ²/dof.
pub fn fit_exponential(data: &[(f64, f64)]) -> Result<ExpFit> {
    if data.len() < 4 {
        return Err(Error::InvalidArgument(format!("exponential fit needs at least 4 points, got {}", data.len())));
    }
    if data.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(domain("times must be strictly increasing"));
    }
    let t0 = data[0].0;
    let ts = (data[data.len() - 1].0 - t0).max(f64::MIN_POSITIVE);
    let ys = data.iter().fold(0.0f64, |a, d| a.max(d.1.abs())).max(f64::MIN_POSITIVE);
    let x: Vec<f64> = data.iter().map(|d| d.0 / ts).collect();
    let y: Vec<f64> = data.iter().map(|d| d.1 / ys).collect();
    let sigma = vec![1.0; data.len()];
    let model = |t: f64, p: &[f64]| p[1] + (p[0] - p[1]) * (-t / p[2]).exp();
    let p0 = [y[0], y[y.len() - 1], 1.0 / 3.0];
    let r = least_squares(model, &x, &y, &sigma, &p0)?;
    if !(r.params[2] > 0.0) {
        return Err(Error::DegenerateFit(format!("fitted cooling time is not positive ({})", r.params[2] * ts)));
    }
    let dof = data.len() - 3;
    let scale = [ys, ys, ts];
    let factor = r.chi2 / dof.max(1) as f64;
    let mut covariance = r.covariance.clone();
    for i in 0..3 {
        for j in 0..3 {
            covariance[(i, j)] *= scale[i] * scale[j] * factor;
        }
    }
    Ok(ExpFit {
        tau_cool: r.params[2] * ts,
        t_final: r.params[1] * ys,
        t_initial: r.params[0] * ys,
        covariance,
        chi2: r.chi2 * ys * ys,
        dof,
    })
}

/// Poisson counts with mean `(rate_scale·value + background)·duration` per
/// point; point `i` draws from stream `i` of `seed`.
pub fn simulate_photon_counts(
    spectrum: &Spectrum,
    rate_scale: f64,
    duration_per_point: f64,
    background: f64,
    seed: u64,
) -> Result<Spectrum> {
    for (name, v) in [("rate_scale", rate_scale), ("duration", duration_per_point), ("background", background)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let points = spectrum
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mean = (rate_scale * p.value + background) * duration_per_point;
            let value = if mean > 0.0 {
                let dist = Poisson::new(mean).map_err(|e| domain(format!("Poisson mean {mean}: {e}")))?;
                dist.sample(&mut stream_rng(seed, i as u64))
            } else {
                0.0
            };
            Ok(SpectrumPoint {
                delta_p: p.delta_p,
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(points, SpectrumKind::PhotonCounts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{fano_spectrum, DressedModel};
    use crate::types::{from_khz, from_mhz, linspace, saturation_to_rabi, LambdaParams, TWO_PI};

    const GAMMA: f64 = TWO_PI * 6.07e6;

    #[test]
    fn linear_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let r = least_squares(|x, p| p[0] + p[1] * x, &x, &y, &[1.0; 4], &[0.0, 0.0]).unwrap();
        assert!((r.params[0] - 2.0).abs() < 1e-10 && (r.params[1] - 3.0).abs() < 1e-10);
        assert!(r.chi2 < 1e-20);
    }

    #[test]
    fn independent_parameter_is_degenerate() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        let r = least_squares(|x, p| p[0] + x, &x, &y, &[1.0; 4], &[0.5, 1.0]);
        assert!(matches!(r, Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn argument_checks() {
        assert!(least_squares(|x, p| p[0] * x, &[1.0], &[1.0, 2.0], &[1.0], &[1.0]).is_err());
        assert!(least_squares(|x, p| p[0] * x + p[1], &[1.0], &[1.0], &[1.0], &[1.0, 1.0]).is_err());
        assert!(least_squares(|x, p| p[0] * x, &[1.0, 2.0], &[1.0, 2.0], &[1.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let x = linspace(0.0, 10.0, 50);
        let y: Vec<f64> = x.iter().map(|v| (0.7 * v).sin() + 0.3 * v).collect();
        let opts = LsqOptions {
            max_iterations: 1,
            ..Default::default()
        };
        let r = least_squares_with(|x, p| (p[0] * x).sin() + p[1] * x, &x, &y, &[1.0; 50], &[0.5, 0.1], &opts);
        match r {
            Err(Error::MaxIterations { iterations, last, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last.len(), 2);
            }
            other => panic!("expected MaxIterations, got {other:?}"),
        }
    }

    fn spectroscopy_spectrum() -> (Spectrum, crate::spectra::DressedPair) {
        let op = saturation_to_rabi(1.0, GAMMA).unwrap();
        let p = LambdaParams::new(op, 1.4 * GAMMA, 0.0, -from_mhz(80.0), GAMMA).unwrap();
        let grid = linspace(p.delta_c - from_mhz(1.5), p.delta_c + from_mhz(1.5), 301);
        let d = crate::spectra::dressed_probe_corrected(&p).unwrap();
        (fano_spectrum(&grid, &p, DressedModel::ProbeCorrected).unwrap(), d)
    }

    #[test]
    fn noiseless_fano_closure() {
        let (s, d) = spectroscopy_spectrum();
        let fit = fit_fano(&s, None).unwrap();
        assert!((fit.delta_shift / d.delta_shift - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.gamma_plus / d.gamma_plus - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.delta_c_center - (-from_mhz(80.0))).abs() < 1e-6 * from_khz(1.0));
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
        assert!(fit.offset.abs() < 1e-6);
    }

    #[test]
    fn gradient_orthogonality_at_optimum() {
        let (s, _) = spectroscopy_spectrum();
        let counts = simulate_photon_counts(&s, 3000.0, 9.0, 300.0, 4).unwrap();
        let fit = fit_fano(&counts, None).unwrap();
        let x = counts.detunings();
        let y = counts.values();
        let chi2 = |p: &[f64; 5]| -> f64 {
            x.iter()
                .zip(&y)
                .map(|(&xi, &yi)| {
                    let f = p[4] + p[3] * fano_profile(xi, p[0], p[1], p[2]).unwrap();
                    (yi - f).powi(2) / yi.max(1.0)
                })
                .sum()
        };
        let p = [fit.delta_c_center, fit.delta_shift, fit.gamma_plus, fit.amplitude, fit.offset];
        // Gradient in units of each parameter's 1σ, where χ² curvature is O(1).
        let mut g2 = 0.0;
        for k in 0..5 {
            let h = 1e-3 * fit.sigma(k);
            let (mut up, mut dn) = (p, p);
            up[k] += h;
            dn[k] -= h;
            g2 += ((chi2(&up) - chi2(&dn)) / (2.0 * h) * fit.sigma(k)).powi(2);
        }
        assert!(g2.sqrt() < 1e-6 * fit.chi2, "{} vs {}", g2.sqrt(), fit.chi2);
    }

    #[test]
    fn exponential_noiseless_closure() {
        let truth = |t: f64| 5.9e-6 + (14.7e-6 - 5.9e-6) * (-t / 2.1e-3).exp();
        let data: Vec<(f64, f64)> = linspace(0.0, 10e-3, 12).into_iter().map(|t| (t, truth(t))).collect();
        let fit = fit_exponential(&data).unwrap();
        assert!((fit.tau_cool / 2.1e-3 - 1.0).abs() < 1e-8, "{fit:?}");
        assert!((fit.t_final / 5.9e-6 - 1.0).abs() < 1e-8);
        assert!((fit.t_initial / 14.7e-6 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exponential_constant_data_is_degenerate() {
        let data: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 1e-3, 6e-6)).collect();
        assert!(matches!(fit_exponential(&data), Err(Error::DegenerateFit(_))));
        assert!(fit_exponential(&data[..3]).is_err());
    }

    #[test]
    fn photon_count_examples() {
        let s = Spectrum::from_parts(&linspace(0.0, 1.0, 20), &[0.0; 20], SpectrumKind::AnalyticRate).unwrap();
        let zeros = simulate_photon_counts(&s, 1000.0, 3e-3, 0.0, 1).unwrap();
        assert!(zeros.values().iter().all(|&v| v == 0.0));
        assert_eq!(zeros.kind(), SpectrumKind::PhotonCounts);
        let total: f64 = (0..3000)
            .map(|seed| simulate_photon_counts(&s, 1000.0, 3e-3, 300.0, seed).unwrap().values().iter().sum::<f64>())
            .sum();
        let mean = total / (3000.0 * 20.0);
        assert!((mean / 0.9 - 1.0).abs() < 0.05, "{mean}");
        let a = simulate_photon_counts(&s, 1000.0, 3e-3, 300.0, 9).unwrap();
        let b = simulate_photon_counts(&s, 1000.0, 3e-3, 300.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_lists_named_parameters() {
        let (s, _) = spectroscopy_spectrum();
        let fit = fit_fano(&s, None).unwrap();
        let v = fit.to_json();
        assert_eq!(v["parameters"].as_array().unwrap().len(), 5);
        assert_eq!(v["parameters"][2]["name"], "gamma_plus");
        assert_eq!(v["weighting"], "uniform");
        assert_eq!(v["dof"], 296);
    }
}

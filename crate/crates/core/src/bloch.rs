//! Three-level optical Bloch equations in Lindblad form.
//!
//! The density matrix lives in the basis (g, e, g′) and is vectorised by
//! stacking columns: element (i, j) sits at index `i + 3j`. With that order
//! `vec(A·X·B) = (Bᵀ ⊗ A)·vec(X)`, and the generator reads
//!
//! ```text
//! L = −i(I ⊗ H_eff − conj(H_eff) ⊗ I) + Σ_k conj(C_k) ⊗ C_k
//! ```
//!
//! where `H_eff = H − (i/2)(Σ C_k†C_k + leak·|e⟩⟨e|)`.

use nalgebra::{Matrix3, SMatrix, SVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::types::{LambdaParams, Spectrum, SpectrumKind};

pub type Mat9 = SMatrix<Complex64, 9, 9>;
pub type Vec9 = SVector<Complex64, 9>;

const G: usize = 0;
const E: usize = 1;
const GP: usize = 2;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Column-major index of element (i, j).
pub fn vec_index(i: usize, j: usize) -> usize {
    i + 3 * j
}

pub fn vectorize(m: &Matrix3<Complex64>) -> Vec9 {
    Vec9::from_iterator(m.iter().copied())
}

pub fn unvectorize(v: &Vec9) -> Matrix3<Complex64> {
    Matrix3::from_iterator(v.iter().copied())
}

/// A 3×3 density matrix over (g, e, g′).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: Matrix3<Complex64>,
}

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-9;

    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: Matrix3<Complex64>) -> Result<Self> {
        let rho = Self { m };
        rho.check(true)?;
        Ok(rho)
    }

    /// Like [`DensityMatrix::new`] but without the unit-trace requirement
    /// (states of a leaky system).
    pub fn new_subnormalized(m: Matrix3<Complex64>) -> Result<Self> {
        let rho = Self { m };
        rho.check(false)?;
        Ok(rho)
    }

    pub fn pure(level: usize) -> Result<Self> {
        if level > 2 {
            return Err(Error::InvalidArgument(format!("level index {level} out of range 0..3")));
        }
        let mut m = Matrix3::zeros();
        m[(level, level)] = c(1.0);
        Ok(Self { m })
    }

    pub fn ground() -> Self {
        Self::pure(G).expect("index in range")
    }

    pub fn ground_prime() -> Self {
        Self::pure(GP).expect("index in range")
    }

    pub fn matrix(&self) -> &Matrix3<Complex64> {
        &self.m
    }

    pub fn to_vec9(&self) -> Vec9 {
        vectorize(&self.m)
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.m[(G, G)].re, self.m[(E, E)].re, self.m[(GP, GP)].re]
    }

    pub fn rho_ee(&self) -> f64 {
        self.m[(E, E)].re
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.m - self.m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.m + self.m.adjoint()) * c(0.5);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check(&self, unit_trace: bool) -> Result<()> {
        if self.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain("density matrix has non-finite entries"));
        }
        let herm = self.hermiticity_error();
        if herm > Self::HERMITICITY_TOL {
            return Err(domain(format!("density matrix not Hermitian (error {herm:e})")));
        }
        if unit_trace && (self.trace() - 1.0).abs() > Self::TRACE_TOL {
            return Err(domain(format!("density matrix trace {} != 1", self.trace())));
        }
        let min = self.min_eigenvalue();
        if min < -Self::POSITIVITY_TOL {
            return Err(domain(format!("density matrix not positive (eigenvalue {min:e})")));
        }
        Ok(())
    }

    /// ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let d = self.m - other.m;
        let herm = (d + d.adjoint()) * c(0.5);
        0.5 * herm.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
    }

    fn hermitized(m: Matrix3<Complex64>) -> Matrix3<Complex64> {
        (m + m.adjoint()) * c(0.5)
    }
}

/// Lindblad generator acting on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub matrix: Mat9,
}

impl Liouvillian {
    pub fn apply(&self, rho: &Matrix3<Complex64>) -> Matrix3<Complex64> {
        unvectorize(&(self.matrix * vectorize(rho)))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let scale = self.norm().max(f64::MIN_POSITIVE);
        let schur = nalgebra::Schur::try_new(self.matrix.unscale(scale), 1e-15, 100_000)
            .ok_or_else(|| domain("Liouvillian eigen-decomposition did not converge"))?;
        let t = schur.unpack().1;
        Ok((0..9).map(|i| t[(i, i)] * scale).collect())
    }
}

/// Rotating-frame Hamiltonian with ħ = 1, zero of energy at |g⟩.
pub fn hamiltonian(params: &LambdaParams) -> Matrix3<Complex64> {
    let (hp, hc) = (params.omega_p / 2.0, params.omega_c / 2.0);
    Matrix3::new(
        c(0.0),
        c(hp),
        c(0.0),
        c(hp),
        c(-params.delta_p),
        c(hc),
        c(0.0),
        c(hc),
        c(-(params.delta_p - params.delta_c)),
    )
}

fn kron(a: &Matrix3<Complex64>, b: &Matrix3<Complex64>) -> Mat9 {
    let mut out = Mat9::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let aij = a[(i, j)];
            if aij == c(0.0) {
                continue;
            }
            for k in 0..3 {
                for l in 0..3 {
                    out[(3 * i + k, 3 * j + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn build_liouvillian(params: &LambdaParams) -> Result<Liouvillian> {
    params.validate()?;
    let id = Matrix3::<Complex64>::identity();
    let mut jumps = Vec::with_capacity(2);
    for (target, branch) in [(G, params.branch_g), (GP, params.branch_gp)] {
        if branch > 0.0 {
            let mut op = Matrix3::zeros();
            op[(target, E)] = c((branch * params.gamma).sqrt());
            jumps.push(op);
        }
    }
    let mut loss = Matrix3::<Complex64>::zeros();
    for op in &jumps {
        loss += op.adjoint() * op;
    }
    loss[(E, E)] += c(params.leak_rate());
    let h_eff = hamiltonian(params) - loss * Complex64::new(0.0, 0.5);
    let i = Complex64::new(0.0, 1.0);
    let mut l = (kron(&id, &h_eff) - kron(&h_eff.conjugate(), &id)) * (-i);
    for op in &jumps {
        l += kron(&op.conjugate(), op);
    }
    Ok(Liouvillian { matrix: l })
}

/// Steady state together with the decay rate of its trace (zero unless the
/// excited state leaks out of the Λ system).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub leak_rate: f64,
}

/// Relative singular-value cutoff used to count null-space dimensions.
const NULL_TOL: f64 = 1e-12;

pub fn steady_state(params: &LambdaParams) -> Result<SteadyState> {
    let liou = build_liouvillian(params)?;
    let scaled = liou.matrix.unscale(params.gamma);
    if params.leak_rate() > 0.0 {
        return quasi_steady_state(&scaled, params.gamma);
    }
    let sv = scaled.singular_values();
    let smax = sv.max();
    let null_dim = sv.iter().filter(|&&s| s <= NULL_TOL * smax).count();
    if null_dim > 1 {
        return Err(Error::NonUniqueSteadyState(format!(
            "generator has a {null_dim}-dimensional null space (Ωp = {}, Ωc = {}): \
             the drives do not connect both ground states",
            params.omega_p, params.omega_c
        )));
    }
    let mut a = scaled;
    for j in 0..9 {
        a[(0, j)] = c(0.0);
    }
    for k in [vec_index(0, 0), vec_index(1, 1), vec_index(2, 2)] {
        a[(0, k)] = c(1.0);
    }
    let mut b = Vec9::zeros();
    b[0] = c(1.0);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NonUniqueSteadyState("trace-constrained generator is singular".into()))?;
    let rho = DensityMatrix::new(DensityMatrix::hermitized(unvectorize(&x)))?;
    Ok(SteadyState { rho, leak_rate: 0.0 })
}

/// Slowest-decaying eigenmode of a leaky generator, normalised to unit trace.
fn quasi_steady_state(scaled: &Mat9, gamma: f64) -> Result<SteadyState> {
    let liou = Liouvillian { matrix: *scaled };
    let lambda0 = liou
        .eigenvalues()?
        .into_iter()
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .ok_or_else(|| domain("empty spectrum"))?;
    let shift = lambda0 + Complex64::new(1e-10, 0.0) * (1.0 + lambda0.norm());
    let lu = (scaled - Mat9::from_diagonal_element(shift)).lu();
    let mut x = Vec9::from_element(c(1.0));
    for _ in 0..4 {
        x = lu
            .solve(&x)
            .ok_or_else(|| domain("inverse iteration hit a singular matrix"))?;
        x /= c(x.norm());
    }
    let m = unvectorize(&x);
    let tr = m.trace();
    if tr.norm() == 0.0 {
        return Err(domain("slowest mode has zero trace"));
    }
    let rho = DensityMatrix::new(DensityMatrix::hermitized(m / tr))?;
    Ok(SteadyState {
        rho,
        leak_rate: -lambda0.re * gamma,
    })
}

/// Photon scattering rate Γ·ρ_ee.
pub fn scattering_rate(rho: &DensityMatrix, params: &LambdaParams) -> f64 {
    (params.gamma * rho.rho_ee()).max(0.0)
}

/// Propagates dρ/dt = Lρ with fixed-step classical RK4.
///
/// The step is the largest `t/n` not exceeding `dt_max`, `0.05/Γ` and
/// `0.05/‖L‖`. For a linear autonomous system one RK4 step is the matrix
/// polynomial `P = Σ_{k≤4} (hL)^k/k!`, so `n` steps are applied as `Pⁿ`.
pub fn time_evolve(rho0: &DensityMatrix, params: &LambdaParams, t: f64, dt_max: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("evolution time must be finite and >= 0, got {t}")));
    }
    if !(dt_max > 0.0) {
        return Err(domain(format!("dt_max must be positive, got {dt_max}")));
    }
    if t == 0.0 {
        return Ok(*rho0);
    }
    let liou = build_liouvillian(params)?;
    let h_max = dt_max.min(0.05 / params.gamma).min(0.05 / liou.norm().max(f64::MIN_POSITIVE));
    let n = (t / h_max).ceil().max(1.0);
    if n > 1e15 {
        return Err(domain("too many integration steps; increase dt_max or shorten t"));
    }
    let h = t / n;
    let hl = liou.matrix * c(h);
    let mut step = Mat9::identity();
    let mut term = Mat9::identity();
    for k in 1..=4 {
        term = term * hl * c(1.0 / k as f64);
        step += term;
    }
    let mut v = rho0.to_vec9();
    let mut n = n as u64;
    let mut power = step;
    while n > 0 {
        if n & 1 == 1 {
            v = power * v;
        }
        n >>= 1;
        if n > 0 {
            power = power * power;
        }
        if power.iter().chain(v.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Instability { time: t });
        }
    }
    DensityMatrix::new_subnormalized(DensityMatrix::hermitized(unvectorize(&v)))
}

/// Asymptote estimate: mean of the outermost 5% of grid points (at least one
/// on each side).
pub fn edge_mean(values: &[f64]) -> f64 {
    let n = values.len();
    let per_side = ((0.025 * n as f64).ceil() as usize).max(1).min(n.div_ceil(2));
    let left = &values[..per_side];
    let right = &values[n - per_side..];
    (left.iter().sum::<f64>() + right.iter().sum::<f64>()) / (2 * per_side) as f64
}

/// Raw steady-state scattering rates over a probe-detuning grid.
pub fn scattering_rates(scan: &[f64], params: &LambdaParams) -> Result<Vec<f64>> {
    scan.par_iter()
        .map(|&dp| {
            let p = params.with_delta_p(dp);
            steady_state(&p).map(|ss| scattering_rate(&ss.rho, &p))
        })
        .collect()
}

/// Steady-state scattering spectrum normalised to its far-detuned asymptote.
pub fn excitation_spectrum_obe(scan: &[f64], params: &LambdaParams) -> Result<Spectrum> {
    if scan.is_empty() {
        return Err(Error::InvalidArgument("empty detuning grid".into()));
    }
    let raw = scattering_rates(scan, params)?;
    let asym = edge_mean(&raw);
    if !(asym > 0.0) {
        return Err(domain("spectrum asymptote is zero; grid does not reach the bright region"));
    }
    let values: Vec<f64> = raw.iter().map(|v| v / asym).collect();
    Spectrum::from_parts(scan, &values, SpectrumKind::ObeRate)
}

/// Force operator along a motional axis in units of the trap's ground-state
/// extent: `F = Σ_beams η_b·i(Ω_b/2)(|e⟩⟨g_b| − |g_b⟩⟨e|)`, with η_b the
/// signed projection of the beam wavevector on the axis times a₀.
pub fn force_operator(params: &LambdaParams, eta_p: f64, eta_c: f64) -> Matrix3<Complex64> {
    let mut f = Matrix3::zeros();
    let ap = Complex64::new(0.0, eta_p * params.omega_p / 2.0);
    let ac = Complex64::new(0.0, eta_c * params.omega_c / 2.0);
    f[(E, G)] = ap;
    f[(G, E)] = -ap;
    f[(E, GP)] = ac;
    f[(GP, E)] = -ac;
    f
}

/// Steady-state force-fluctuation spectrum
/// `S(ν) = 2 Re Tr[δF (−iν − L)⁻¹ (δF ρ_ss)]` by the quantum regression
/// theorem, evaluated at each frequency in `nus`.
///
/// `S(+ν)` is the rate at which the atom absorbs a motional quantum ν
/// (red sideband), `S(−ν)` the rate at which it emits one.
pub fn force_spectrum(params: &LambdaParams, eta_p: f64, eta_c: f64, nus: &[f64]) -> Result<Vec<f64>> {
    let ss = steady_state(params)?;
    let rho = *ss.rho.matrix();
    let f = force_operator(params, eta_p, eta_c);
    let mean = (f * rho).trace();
    let df = f - Matrix3::identity() * mean;
    let g = params.gamma;
    let l = build_liouvillian(params)?.matrix.unscale(g);
    let source = vectorize(&(df * rho)).unscale(g);
    nus.iter()
        .map(|&nu| {
            let a = Mat9::from_diagonal_element(Complex64::new(0.0, -nu / g)) - l;
            let x = a
                .lu()
                .solve(&source)
                .ok_or_else(|| Error::Singular(format!("resolvent singular at ν = {nu}")))?;
            let s = 2.0 * (df * unvectorize(&x)).trace().re;
            Ok(s)
        })
        .collect()
}

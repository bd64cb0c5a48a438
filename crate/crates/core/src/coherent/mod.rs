//! Spin-½ system read out with the help of a coherent field mode under the
//! resonant Jaynes–Cummings Hamiltonian
//!
//! ```text
//! H = ω a†a + (ω/2) σ_z + γ (σ₊a + σ₋a†).
//! ```
//!
//! After an interaction time t the commuting triplet (σ_x, a†a, a†a σ_x) is
//! measured. Its expectations are affine in the initial Bloch vector,
//! y = M x + b, and the initial spin state follows from inverting M whenever
//! Δ(t) = det M is far enough from zero.
//!
//! Everything here is evaluated in closed form. Per photon number n the
//! dynamics only couples |n−1⟩|+⟩ with |n⟩|−⟩, so each expectation is a
//! Poisson-weighted series over n of terms built from the dressed-state
//! quantities
//!
//! ```text
//! f±_n = e^{i(±γ√n − ω)t},   S_n = i sin(γ√(n+1) t)/√(n+1),
//! g±_n = cos(γ√(n+1) t) ± √n S_n.
//! ```
//!
//! The expectation of each observable is written as
//! `c₁ λ₁ + c₂ λ₂ + c₃ λ₂* + β` with λ₁ = (1+⟨σ_z(0)⟩)/2 and
//! λ₂ = ⟨σ₊(0)⟩ = (⟨σ_x(0)⟩ + i⟨σ_y(0)⟩)/2; [`SeriesTerm`] holds the
//! per-n coefficients.

pub mod printed;

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::JcOracle;
use crate::quantum::{BlochVector, FockSpace, ONE, ZERO};

/// Poisson mass allowed beyond the series truncation.
pub const POISSON_TAIL_TOL: f64 = 1e-8;
pub const DEFAULT_N_MAX: usize = 30;
const N_MAX_CEILING: usize = 5000;
/// Singular values below this count as zero in rank reports.
pub const RANK_TOL: f64 = 1e-8;

/// Model configuration: coupling γ, frequency ω, coherent amplitude α and the
/// photon-number truncation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JcParams {
    pub gamma: f64,
    pub omega: f64,
    pub alpha: C64,
    pub n_max: usize,
}

impl JcParams {
    /// Validates the parameters and raises `n_max` until the Poisson tail is
    /// below [`POISSON_TAIL_TOL`].
    pub fn new(gamma: f64, omega: f64, alpha: C64, n_max: usize) -> Result<Self> {
        validate_physics(gamma, omega, alpha)?;
        let mean = alpha.norm_sqr();
        let mut n = n_max.max(1);
        while poisson_tail(mean, n) >= POISSON_TAIL_TOL {
            n += 1;
            if n > N_MAX_CEILING {
                return Err(Error::Truncation {
                    n_max: n,
                    deficit: poisson_tail(mean, n),
                    limit: POISSON_TAIL_TOL,
                });
            }
        }
        Ok(Self {
            gamma,
            omega,
            alpha,
            n_max: n,
        })
    }

    /// Like [`JcParams::new`] but keeps `n_max` as given, failing if the
    /// Poisson tail is too heavy.
    pub fn with_fixed_truncation(gamma: f64, omega: f64, alpha: C64, n_max: usize) -> Result<Self> {
        validate_physics(gamma, omega, alpha)?;
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be positive".into()));
        }
        let tail = poisson_tail(alpha.norm_sqr(), n_max);
        if tail >= POISSON_TAIL_TOL {
            return Err(Error::Truncation {
                n_max,
                deficit: tail,
                limit: POISSON_TAIL_TOL,
            });
        }
        Ok(Self {
            gamma,
            omega,
            alpha,
            n_max,
        })
    }

    /// Real positive amplitude with |α|² = `mean_photons`.
    pub fn with_mean_photons(gamma: f64, omega: f64, mean_photons: f64) -> Result<Self> {
        Self::new(
            gamma,
            omega,
            C64::new(mean_photons.sqrt(), 0.0),
            DEFAULT_N_MAX,
        )
    }

    pub fn mean_photons(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn space(&self) -> FockSpace {
        FockSpace::new(self.n_max)
    }

    pub fn poisson_tail(&self) -> f64 {
        poisson_tail(self.mean_photons(), self.n_max)
    }

    /// e^{−|α|²}|α|^{2n}/n! for n = 0..=n_max.
    pub fn poisson_weights(&self) -> Vec<f64> {
        poisson_weights(self.mean_photons(), self.n_max)
    }

    pub fn with_n_max(&self, n_max: usize) -> Result<Self> {
        Self::with_fixed_truncation(self.gamma, self.omega, self.alpha, n_max)
    }
}

fn validate_physics(gamma: f64, omega: f64, alpha: C64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega must be non-negative, got {omega}"
        )));
    }
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::InvalidParameter("alpha must be finite".into()));
    }
    Ok(())
}

fn ln_poisson(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    -mean + n as f64 * mean.ln() - ln_fact
}

pub fn poisson_weights(mean: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| ln_poisson(mean, n).exp()).collect()
}

/// Σ_{n > n_max} e^{−m} mⁿ/n!, summed directly so small tails keep their
/// relative precision.
pub fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut n = n_max + 1;
    let mut term = ln_poisson(mean, n).exp();
    if n as f64 <= mean {
        // Past the mode the direct sum converges; before it, complement.
        let head: f64 = poisson_weights(mean, n_max).iter().sum();
        return (1.0 - head).max(0.0);
    }
    let mut total = 0.0;
    while term > 0.0 && term > total * 1e-17 {
        total += term;
        n += 1;
        term *= mean / n as f64;
    }
    total
}

/// Dressed-state quantities f±_n, S_n, g±_n at time t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DressedCoefficients {
    pub n: usize,
    pub f_plus: C64,
    pub f_minus: C64,
    pub s: C64,
    pub g_plus: C64,
    pub g_minus: C64,
}

impl DressedCoefficients {
    pub fn at(n: usize, t: f64, params: &JcParams) -> Self {
        let rn = (n as f64).sqrt();
        let rn1 = ((n + 1) as f64).sqrt();
        let g = params.gamma;
        let f_plus = C64::from_polar(1.0, (g * rn - params.omega) * t);
        let f_minus = C64::from_polar(1.0, (-g * rn - params.omega) * t);
        let s = C64::new(0.0, (g * rn1 * t).sin() / rn1);
        let c = C64::new((g * rn1 * t).cos(), 0.0);
        Self {
            n,
            f_plus,
            f_minus,
            s,
            g_plus: c + s * rn,
            g_minus: c - s * rn,
        }
    }
}

/// Which branch of the V̂ spectrum a dressed state belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// φ₀ = |0⟩|−⟩.
    Ground,
    Plus,
    Minus,
    /// |n_max⟩|+⟩, whose partner |n_max+1⟩|−⟩ lies outside the truncation.
    Unpaired,
}

#[derive(Clone, Debug)]
pub struct DressedState {
    pub n: usize,
    pub branch: Branch,
    pub vector: DVector<C64>,
}

/// Index of |spin⟩|k⟩ in the joint space; spin 0 is |+⟩.
pub fn joint_index(space: FockSpace, spin_up: bool, k: usize) -> usize {
    if spin_up {
        k
    } else {
        space.dim() + k
    }
}

/// Eigenvectors φₙ^± = (|n−1⟩|+⟩ ± |n⟩|−⟩)/√2 of V̂ (eigenvalues ±√n), the
/// ground state φ₀ and the unpaired top state, which together span the
/// truncated joint space.
pub fn dressed_basis(space: FockSpace) -> Vec<DressedState> {
    let dim = 2 * space.dim();
    let unit = |entries: &[(usize, C64)]| {
        let mut v = DVector::zeros(dim);
        for &(i, z) in entries {
            v[i] = z;
        }
        v
    };
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut out = vec![DressedState {
        n: 0,
        branch: Branch::Ground,
        vector: unit(&[(joint_index(space, false, 0), ONE)]),
    }];
    for n in 1..=space.n_max {
        let up = joint_index(space, true, n - 1);
        let down = joint_index(space, false, n);
        out.push(DressedState {
            n,
            branch: Branch::Plus,
            vector: unit(&[(up, h), (down, h)]),
        });
        out.push(DressedState {
            n,
            branch: Branch::Minus,
            vector: unit(&[(up, h), (down, -h)]),
        });
    }
    out.push(DressedState {
        n: space.n_max + 1,
        branch: Branch::Unpaired,
        vector: unit(&[(joint_index(space, true, space.n_max), ONE)]),
    });
    out
}

/// Rows of the measured triplet in λ-form.
pub const ROWS: [&str; 3] = ["sigma_plus", "photons", "photons_sigma_plus"];

/// Per-photon-number contribution to the three expectations
/// (⟨σ₊⟩, ⟨a†a⟩, ⟨a†aσ₊⟩): `coefficients[row]` multiplies (λ₁, λ₂, λ₂*),
/// `offset[row]` is the λ-independent part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesTerm {
    pub coefficients: [[C64; 3]; 3],
    pub offset: [C64; 3],
}

fn require_amplitude(params: &JcParams) -> Result<()> {
    if params.alpha.norm() == 0.0 {
        Err(Error::ZeroAmplitude)
    } else {
        Ok(())
    }
}

/// Series term n at time t. The row for a†aσ₊ is n times the σ₊ row.
pub fn series_term(n: usize, t: f64, params: &JcParams) -> Result<SeriesTerm> {
    require_amplitude(params)?;
    let d = DressedCoefficients::at(n, t, params);
    let a = params.alpha;
    let ac = a.conj();
    let rn = (n as f64).sqrt();
    let sum_f = (d.f_plus.conj() + d.f_minus.conj()) * 0.5;
    let diff_f = (d.f_plus.conj() - d.f_minus.conj()) * 0.5;
    let cos_k = (d.g_plus + d.g_minus) * 0.5;

    let row1 = [
        rn / a * cos_k * diff_f - ac * d.s * sum_f,
        cos_k * sum_f,
        ac / a * rn * d.s * diff_f,
    ];
    let beta1 = ac * d.s * sum_f;

    let sin2_k = d.s.norm_sqr() * (n + 1) as f64;
    let sin2_v = diff_f.norm_sqr();
    let a22 = a * d.s * cos_k;
    let row2 = [C64::new(sin2_k + sin2_v, 0.0), a22, a22.conj()];
    let beta2 = C64::new(n as f64 - sin2_v, 0.0);

    let nf = n as f64;
    let row3 = row1.map(|z| z * nf);
    Ok(SeriesTerm {
        coefficients: [row1, row2, row3],
        offset: [beta1, beta2, beta1 * nf],
    })
}

/// Weight applied when turning a λ-row into an observable: σ_x = 2Re σ₊,
/// a†a is already real.
const ROW_FACTORS: [f64; 3] = [2.0, 1.0, 2.0];

/// Maps a λ-row onto (⟨σ_x(0)⟩, ⟨σ_y(0)⟩, ⟨σ_z(0)⟩) coefficients plus offset.
fn real_row(c: &[C64; 3], beta: C64, factor: f64) -> ([f64; 3], f64) {
    let k = c[1] + c[2].conj();
    let half = 0.5 * factor;
    (
        [half * k.re, -half * k.im, half * c[0].re],
        half * c[0].re + factor * beta.re,
    )
}

impl SeriesTerm {
    /// Real 3×3 block M(n) and offset b(n).
    pub fn real_system(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let mut m = Matrix3::zeros();
        let mut b = Vector3::zeros();
        for row in 0..3 {
            let (coeffs, off) =
                real_row(&self.coefficients[row], self.offset[row], ROW_FACTORS[row]);
            for col in 0..3 {
                m[(row, col)] = coeffs[col];
            }
            b[row] = off;
        }
        (m, b)
    }
}

/// The coefficient matrix A(n) of (λ₁, λ₂, λ₂*), rows (σ₊, a†a, a†aσ₊).
pub fn analytic_a(n: usize, t: f64, params: &JcParams) -> Result<[[C64; 3]; 3]> {
    Ok(series_term(n, t, params)?.coefficients)
}

/// Expectations of the measured triplet at time t.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectationTriple {
    /// ⟨σ_x(t)⟩
    pub sigma_x: f64,
    /// ⟨a†a(t)⟩
    pub photons: f64,
    /// ⟨a†a σ_x(t)⟩
    pub photons_sigma_x: f64,
}

impl ExpectationTriple {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.sigma_x, self.photons, self.photons_sigma_x)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self {
            sigma_x: v[0],
            photons: v[1],
            photons_sigma_x: v[2],
        }
    }

    /// Largest of |a − b| / max(|b|, 1) over the three components.
    pub fn relative_deviation(&self, reference: &ExpectationTriple) -> f64 {
        let a = self.as_vector();
        let b = reference.as_vector();
        (0..3)
            .map(|k| (a[k] - b[k]).abs() / b[k].abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// The affine system y = M x + b at a fixed time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionSystem {
    pub matrix: Matrix3<f64>,
    pub offset: Vector3<f64>,
    pub t: f64,
    pub params: JcParams,
    pub determinant: f64,
}

impl ReconstructionSystem {
    pub fn predict(&self, rho0: &BlochVector) -> ExpectationTriple {
        ExpectationTriple::from_vector(&(self.matrix * rho0.as_vector() + self.offset))
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.matrix)
    }

    /// Solves M x = y − b.
    pub fn reconstruct(
        &self,
        triple: &ExpectationTriple,
        det_floor: f64,
    ) -> Result<CoherentEstimate> {
        if self.determinant.abs() <= det_floor {
            return Err(Error::IllConditioned {
                determinant: self.determinant,
                floor: det_floor,
            });
        }
        let rhs = triple.as_vector() - self.offset;
        let x = self.matrix.lu().solve(&rhs).ok_or(Error::IllConditioned {
            determinant: self.determinant,
            floor: det_floor,
        })?;
        Ok(CoherentEstimate {
            bloch: BlochVector::from(x),
            condition_number: self.condition_number(),
        })
    }
}

/// 2-norm condition number of a 3×3 matrix.
pub fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoherentEstimate {
    pub bloch: BlochVector,
    pub condition_number: f64,
}

fn weighted_terms(t: f64, params: &JcParams) -> Result<Vec<(f64, SeriesTerm)>> {
    params
        .poisson_weights()
        .into_iter()
        .enumerate()
        .map(|(n, w)| Ok((w, series_term(n, t, params)?)))
        .collect()
}

/// Poisson-summed M and b at time t; Δ(t) = det M.
pub fn analytic_system(t: f64, params: &JcParams) -> Result<ReconstructionSystem> {
    let mut matrix = Matrix3::zeros();
    let mut offset = Vector3::zeros();
    for (w, term) in weighted_terms(t, params)? {
        let (m, b) = term.real_system();
        matrix += m * w;
        offset += b * w;
    }
    Ok(ReconstructionSystem {
        matrix,
        offset,
        t,
        params: *params,
        determinant: matrix.determinant(),
    })
}

/// Δ(t) as the triple Poisson-weighted sum
/// Σ_{l,m,n} w_l w_m w_n ε_ijk M_1i(l) M_2j(m) M_3k(n).
pub fn triple_sum_determinant(t: f64, params: &JcParams) -> Result<f64> {
    let terms = weighted_terms(t, params)?;
    let blocks: Vec<(f64, Matrix3<f64>)> = terms
        .iter()
        .map(|(w, term)| (*w, term.real_system().0))
        .collect();
    let mut total = 0.0;
    for (wl, ml) in &blocks {
        let r1 = ml.row(0);
        for (wm, mm) in &blocks {
            let r2 = mm.row(1);
            let cross_w = wl * wm;
            for (wn, mn) in &blocks {
                let r3 = mn.row(2);
                let det = r1[0] * (r2[1] * r3[2] - r2[2] * r3[1])
                    - r1[1] * (r2[0] * r3[2] - r2[2] * r3[0])
                    + r1[2] * (r2[0] * r3[1] - r2[1] * r3[0]);
                total += cross_w * wn * det;
            }
        }
    }
    Ok(total)
}

/// Δ(t) on a grid of times, evaluated in parallel.
pub fn determinant_series(params: &JcParams, times: &[f64]) -> Result<Vec<f64>> {
    times
        .par_iter()
        .map(|&t| analytic_system(t, params).map(|s| s.determinant))
        .collect()
}

/// Evaluates the three expectations by summing the λ-form series directly.
pub fn expectations_analytic(
    t: f64,
    params: &JcParams,
    rho0: &BlochVector,
) -> Result<ExpectationTriple> {
    rho0.check_physical()?;
    let lambda1 = C64::new(0.5 * (1.0 + rho0.z), 0.0);
    let lambda2 = C64::new(0.5 * rho0.x, 0.5 * rho0.y);
    let mut rows = [ZERO; 3];
    for (w, term) in weighted_terms(t, params)? {
        for (row, acc) in rows.iter_mut().enumerate() {
            let c = term.coefficients[row];
            *acc +=
                (c[0] * lambda1 + c[1] * lambda2 + c[2] * lambda2.conj() + term.offset[row]) * w;
        }
    }
    Ok(ExpectationTriple {
        sigma_x: ROW_FACTORS[0] * rows[0].re,
        photons: ROW_FACTORS[1] * rows[1].re,
        photons_sigma_x: ROW_FACTORS[2] * rows[2].re,
    })
}

pub fn reconstruct_initial(
    triple: &ExpectationTriple,
    system: &ReconstructionSystem,
    det_floor: f64,
) -> Result<CoherentEstimate> {
    system.reconstruct(triple, det_floor)
}

/// Time on `grid` with the largest |Δ(t)|.
pub fn determinant_peak(params: &JcParams, grid: &[f64]) -> Result<(f64, f64)> {
    let dets = determinant_series(params, grid)?;
    let (k, d) = dets
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .ok_or_else(|| Error::InvalidParameter("empty time grid".into()))?;
    Ok((grid[k], *d))
}

/// Bisects a sign change of Δ(t) inside `[lo, hi]`.
pub fn determinant_zero(params: &JcParams, mut lo: f64, mut hi: f64) -> Result<f64> {
    let det = |t: f64| analytic_system(t, params).map(|s| s.determinant);
    let mut f_lo = det(lo)?;
    let f_hi = det(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidParameter(format!(
            "no sign change of the determinant in [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = det(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First sign change of Δ on a grid, refined by bisection.
pub fn first_determinant_zero(params: &JcParams, grid: &[f64]) -> Result<Option<f64>> {
    let dets = determinant_series(params, grid)?;
    for k in 1..grid.len() {
        if dets[k - 1] != 0.0 && dets[k - 1].signum() != dets[k].signum() {
            return determinant_zero(params, grid[k - 1], grid[k]).map(Some);
        }
    }
    Ok(None)
}

/// Commuting triplets (σ, a†a, σ a†a) with σ = σ_x or σ_z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Triplet {
    SigmaX,
    SigmaZ,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub triplet: Triplet,
    pub t: f64,
    pub singular_values: [f64; 3],
    pub rank: usize,
}

/// Numerical rank of ∂(triplet)/∂(⟨σ_x(0)⟩, ⟨σ_y(0)⟩, ⟨σ_z(0)⟩) from the
/// brute-force evolution.
pub fn singular_triplet_check(t: f64, params: &JcParams, triplet: Triplet) -> Result<RankReport> {
    let oracle = JcOracle::new(params)?;
    let sensitivity = oracle.sensitivity(t, triplet)?;
    let sv = sensitivity.singular_values();
    let mut singular_values = [sv[0], sv[1], sv[2]];
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let rank = singular_values.iter().filter(|&&s| s > RANK_TOL).count();
    Ok(RankReport {
        triplet,
        t,
        singular_values,
        rank,
    })
}

/// Uniform grid t_k = start + (end − start)·k/steps, k = 1..=steps.
pub fn time_grid(start: f64, end: f64, steps: usize) -> Vec<f64> {
    (1..=steps)
        .map(|k| start + (end - start) * k as f64 / steps as f64)
        .collect()
}

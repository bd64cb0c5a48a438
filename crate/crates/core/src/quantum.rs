//! Dense complex operators, spin-½ states and truncated Fock spaces.
//!
//! Conventions used throughout the crate:
//! - units with ħ = 1;
//! - the spin basis is ordered |+⟩, |−⟩ (σ_z = diag(1, −1));
//! - in a tensor product the first factor carries the slow index, so the
//!   measured system always comes before its assistant.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hermiticity tolerance accepted by [`hermitian_expm`] and [`HermitianEigen`].
pub const HERMITIAN_INPUT_TOL: f64 = 1e-10;
/// Hermiticity and trace tolerance of a [`DensityMatrix`].
pub const DENSITY_TOL: f64 = 1e-12;
/// Smallest eigenvalue tolerated in a [`DensityMatrix`].
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Largest discarded probability accepted when truncating a coherent state.
pub const COHERENT_DEFICIT_TOL: f64 = 1e-8;
/// Slack on |ρ⃗| ≤ 1.
pub const BLOCH_NORM_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Dense square complex matrix acting on a finite Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    data: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(data: DMatrix<C64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        Ok(Self { data })
    }

    /// Builds a `dim × dim` operator from row-major entries.
    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self {
            data: DMatrix::from_row_slice(dim, dim, entries),
        })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            data: DMatrix::from_fn(dim, dim, f),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO })
    }

    /// Projector |ψ⟩⟨ψ|.
    pub fn projector(psi: &DVector<C64>) -> Self {
        Self {
            data: psi * psi.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            data: &self.data * factor,
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Operator) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.data * v
    }

    /// Largest `|a_ij − conj(a_ji)|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entry of `|U†U − 1|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let product = self.data.adjoint() * &self.data;
        max_abs(&(product - DMatrix::identity(self.dim(), self.dim())))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs(&(&self.data - &other.data))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    /// `Tr[ρ O]`.
    pub fn expectation(&self, rho: &DensityMatrix) -> C64 {
        // Tr[ρO] = Σ_ij ρ_ij O_ji, avoiding the full product.
        let r = rho.operator().matrix();
        let n = self.dim();
        assert_eq!(n, rho.dim(), "operator and state dimensions differ");
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += r[(i, j)] * self.data[(j, i)];
            }
        }
        acc
    }

    /// Sorted eigenvalues of a Hermitian operator.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(HermitianEigen::new(self)?.values().to_vec())
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

impl Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            data: &self.data * &rhs.data,
        }
    }
}

impl Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            data: &self.data - &rhs.data,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// Pauli matrix in the |+⟩, |−⟩ basis.
pub fn pauli(axis: Axis) -> Operator {
    let entries = match axis {
        Axis::X => [ZERO, ONE, ONE, ZERO],
        Axis::Y => [ZERO, -I, I, ZERO],
        Axis::Z => [ONE, ZERO, ZERO, -ONE],
    };
    Operator {
        data: DMatrix::from_row_slice(2, 2, &entries),
    }
}

/// σ₊ = |+⟩⟨−|.
pub fn sigma_plus() -> Operator {
    Operator {
        data: DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]),
    }
}

/// σ₋ = |−⟩⟨+|.
pub fn sigma_minus() -> Operator {
    sigma_plus().adjoint()
}

/// Kronecker product `a ⊗ b`; `a` carries the slow index.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    Operator {
        data: a.data.kronecker(&b.data),
    }
}

/// Spectral decomposition `H = V diag(λ) V†` of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(h: &Operator) -> Result<Self> {
        let deviation = h.hermiticity_deviation();
        if deviation > HERMITIAN_INPUT_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let eig = h.data.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..h.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(h.dim(), h.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Self { values, vectors })
    }

    /// Eigenvalues in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvectors as columns, matching [`Self::values`].
    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    /// `f(H) = V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> Operator {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        Operator {
            data: scaled * self.vectors.adjoint(),
        }
    }

    /// `exp(−iHt)`.
    pub fn evolution(&self, t: f64) -> Operator {
        self.map(|lambda| C64::from_polar(1.0, -lambda * t))
    }
}

/// `exp(−iHt)` by eigendecomposition.
pub fn hermitian_expm(h: &Operator, t: f64) -> Result<Operator> {
    Ok(HermitianEigen::new(h)?.evolution(t))
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        let deviation = op.hermiticity_deviation();
        if deviation > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("asymmetry {deviation:.3e}")));
        }
        let trace = op.trace();
        if (trace - ONE).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("trace {trace}")));
        }
        let eig = HermitianEigen::new(&op)?;
        let lowest = eig.values()[0];
        if lowest < EIGENVALUE_FLOOR {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {lowest:.3e}"
            )));
        }
        Ok(Self { op })
    }

    /// Pure state |ψ⟩⟨ψ| of a normalized vector.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        Self::new(Operator::projector(psi))
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `U ρ U†`, re-validated.
    pub fn evolve(&self, u: &Operator) -> Result<Self> {
        Self::new(&(u * &self.op) * &u.adjoint())
    }

    /// Diagonal in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.op.get(k, k).re).collect()
    }
}

/// Polarization vector of a spin-½ state, ρ = ½(1 + ρ⃗·σ⃗).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Like [`BlochVector::new`], but rejects |ρ⃗| > 1.
    pub fn physical(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self::new(x, y, z);
        v.check_physical()?;
        Ok(v)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn is_physical(&self) -> bool {
        self.norm_squared() <= 1.0 + BLOCH_NORM_TOL
    }

    pub fn check_physical(&self) -> Result<()> {
        if self.is_physical() {
            Ok(())
        } else {
            Err(Error::UnphysicalBloch { norm: self.norm() })
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        (self.as_vector() - other.as_vector()).norm()
    }
}

impl From<Vector3<f64>> for BlochVector {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

pub fn bloch_to_density(v: &BlochVector) -> Result<DensityMatrix> {
    v.check_physical()?;
    let half = C64::new(0.5, 0.0);
    let op = Operator::from_row_slice(
        2,
        &[
            half * (1.0 + v.z),
            half * C64::new(v.x, -v.y),
            half * C64::new(v.x, v.y),
            half * (1.0 - v.z),
        ],
    )?;
    DensityMatrix::new(op)
}

/// ρ_i = Tr[ρ σ_i].
pub fn density_to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    let [x, y, z] = Axis::ALL.map(|axis| pauli(axis).expectation(rho).re);
    Ok(BlochVector::new(x, y, z))
}

/// Photon-number basis |0⟩ … |n_max⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    pub n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Self {
        Self { n_max }
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn ket(&self, n: usize) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim());
        v[n] = ONE;
        v
    }

    /// `a|n⟩ = √n |n−1⟩`; `a†` is not exact on |n_max⟩.
    pub fn annihilation(&self) -> Operator {
        Operator::from_fn(self.dim(), |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn creation(&self) -> Operator {
        self.annihilation().adjoint()
    }

    pub fn number(&self) -> Operator {
        let diag: Vec<f64> = (0..self.dim()).map(|n| n as f64).collect();
        Operator::from_real_diagonal(&diag)
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.dim())
    }
}

/// Coherent state |α⟩ truncated to a Fock space and renormalized.
#[derive(Clone, Debug)]
pub struct CoherentState {
    pub alpha: C64,
    pub space: FockSpace,
    amplitudes: DVector<C64>,
    norm_deficit: f64,
}

impl CoherentState {
    pub fn new(alpha: C64, space: FockSpace) -> Result<Self> {
        Self::with_tolerance(alpha, space, COHERENT_DEFICIT_TOL)
    }

    pub fn with_tolerance(alpha: C64, space: FockSpace, limit: f64) -> Result<Self> {
        // Amplitudes e^{-|α|²/2} αᵏ/√k! accumulated in log-magnitude form so
        // large |α| does not underflow e^{-|α|²/2} before the peak.
        let mean = alpha.norm_sqr();
        let mut amplitudes = DVector::zeros(space.dim());
        let phase = if alpha.norm() > 0.0 {
            alpha / alpha.norm()
        } else {
            ONE
        };
        let mut log_mag = -0.5 * mean;
        let mut unit_phase = ONE;
        for k in 0..space.dim() {
            if k > 0 {
                if mean == 0.0 {
                    break;
                }
                log_mag += alpha.norm().ln() - 0.5 * (k as f64).ln();
                unit_phase *= phase;
            }
            amplitudes[k] = unit_phase * log_mag.exp();
        }
        let kept: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        let norm_deficit = 1.0 - kept;
        if norm_deficit > limit {
            return Err(Error::Truncation {
                n_max: space.n_max,
                deficit: norm_deficit,
                limit,
            });
        }
        amplitudes /= C64::new(kept.sqrt(), 0.0);
        Ok(Self {
            alpha,
            space,
            amplitudes,
            norm_deficit,
        })
    }

    /// Normalized amplitudes ⟨k|α⟩.
    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// Probability discarded by the truncation, before renormalization.
    pub fn norm_deficit(&self) -> f64 {
        self.norm_deficit
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        DensityMatrix::pure(&self.amplitudes)
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(k, z)| k as f64 * z.norm_sqr())
            .sum()
    }
}

/// `|α⟩⟨α|` on a truncated Fock space.
pub fn coherent_state(alpha: C64, space: FockSpace) -> Result<DensityMatrix> {
    CoherentState::new(alpha, space)?.density()
}

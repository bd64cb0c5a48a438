//! Two-spin scheme: an unknown spin S and an assistant spin A in a known pure
//! state interact for a fixed time, after which σ_z of S and s_z of A are read
//! out together. The four joint probabilities are affine in the Bloch vector
//! of S,
//!
//! ```text
//! P_α = u_α + v⃗_α · ρ⃗,      α ∈ {++, +−, −+, −−}  (S outcome first)
//! ```
//!
//! and the map is invertible whenever the v⃗_α are not coplanar. The best
//! achievable |Δ| = 4|v⃗_{++}·(v⃗_{+−} × v⃗_{−+})| is 1/(12√3), reached when the
//! v⃗_α form a regular tetrahedron.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{
    bloch_to_density, hermitian_expm, pauli, tensor_product, Axis, BlochVector, DensityMatrix,
    Operator,
};

/// 1/(12√3), the largest |Δ| allowed by positivity and normalization.
pub const OPTIMAL_DETERMINANT: f64 = 0.048_112_522_432_468_816;

/// Default lower bound on |Δ| below which inversion is refused.
pub const DEFAULT_DET_FLOOR: f64 = 1e-6;

/// Tolerance for the positivity/normalization constraints on u_α, v⃗_α.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Joint outcome label: (S outcome, A outcome), each ±1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
}

impl Label {
    pub const ALL: [Label; 4] = [
        Label::PlusPlus,
        Label::PlusMinus,
        Label::MinusPlus,
        Label::MinusMinus,
    ];

    /// Index into the product basis |i⟩⊗|a⟩.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_signs(system: i8, assistant: i8) -> Option<Self> {
        match (system, assistant) {
            (1, 1) => Some(Label::PlusPlus),
            (1, -1) => Some(Label::PlusMinus),
            (-1, 1) => Some(Label::MinusPlus),
            (-1, -1) => Some(Label::MinusMinus),
            _ => None,
        }
    }

    pub fn system_sign(self) -> f64 {
        match self {
            Label::PlusPlus | Label::PlusMinus => 1.0,
            _ => -1.0,
        }
    }

    pub fn assistant_sign(self) -> f64 {
        match self {
            Label::PlusPlus | Label::MinusPlus => 1.0,
            _ => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::PlusPlus => "++",
            Label::PlusMinus => "+-",
            Label::MinusPlus => "-+",
            Label::MinusMinus => "--",
        }
    }
}

/// Angle φ of the optimal coupling; 2φ is the angle between v⃗_{++} and the
/// z-axis, which for the tetrahedron realized here means cos 2φ = −1/√3.
pub fn mixing_angle() -> f64 {
    0.5 * (-1.0 / 3f64.sqrt()).acos()
}

/// χ with cos χ = (cos φ)/2, so that H² = sin²χ for [`optimal_hamiltonian`].
pub fn chi() -> f64 {
    (0.5 * mixing_angle().cos()).acos()
}

/// Interaction time τ = χ / sin χ, for which exp(−iHτ) = cos χ − iH.
pub fn optimal_duration() -> f64 {
    let chi = chi();
    chi / chi.sin()
}

fn spin_op(system: &Operator, assistant: &Operator) -> Operator {
    tensor_product(system, assistant)
}

/// Coupling that realizes the tetrahedron:
/// H = (1/√2) σ_x (s_x cos φ + s_z sin φ) + ½[(s_y − s_x) sin φ + s_z cos φ].
pub fn optimal_hamiltonian() -> Operator {
    let phi = mixing_angle();
    let (s, c) = phi.sin_cos();
    let id = Operator::identity(2);
    let sx = pauli(Axis::X);
    let sy = pauli(Axis::Y);
    let sz = pauli(Axis::Z);

    let assistant_axis = &sx.scale_real(c) + &sz.scale_real(s);
    let coupling = spin_op(&sx, &assistant_axis).scale_real(std::f64::consts::FRAC_1_SQRT_2);
    let field = &(&sy - &sx).scale_real(s) + &sz.scale_real(c);
    &coupling + &spin_op(&id, &field.scale_real(0.5))
}

/// Closed form of the evolution at τ = χ/sin χ: U = cos χ − iH.
pub fn optimal_evolution_closed_form() -> Operator {
    let h = optimal_hamiltonian();
    &Operator::identity(4).scale_real(chi().cos()) - &h.scale(C64::new(0.0, 1.0))
}

/// Assistant spin |+⟩⟨+|.
pub fn assistant_up() -> DensityMatrix {
    bloch_to_density(&BlochVector::new(0.0, 0.0, 1.0)).expect("pure up state")
}

/// Ising-plus-transverse-field variant of the optimal coupling, expressed in
/// an assistant frame rotated about y by φ. It is only optimal when both the
/// readout axis and the initial assistant polarization use the rotated axis
/// s_x sin φ + s_z cos φ.
#[derive(Clone, Debug)]
pub struct RotatedIsingSetup {
    pub hamiltonian: Operator,
    /// Columns are the +1 and −1 eigenvectors of the rotated readout axis.
    pub assistant_basis: Operator,
    pub initial_assistant: DensityMatrix,
}

/// H = (1/√2) σ_x s_x + ½(s_y sin φ + s_z).
pub fn ising_hamiltonian() -> RotatedIsingSetup {
    let phi = mixing_angle();
    let id = Operator::identity(2);
    let sx = pauli(Axis::X);
    let sy = pauli(Axis::Y);
    let sz = pauli(Axis::Z);
    let coupling = spin_op(&sx, &sx).scale_real(std::f64::consts::FRAC_1_SQRT_2);
    let field = &sy.scale_real(phi.sin()) + &sz;
    let hamiltonian = &coupling + &spin_op(&id, &field.scale_real(0.5));

    let (s, c) = (0.5 * phi).sin_cos();
    let assistant_basis = Operator::from_row_slice(
        2,
        &[
            C64::new(c, 0.0),
            C64::new(-s, 0.0),
            C64::new(s, 0.0),
            C64::new(c, 0.0),
        ],
    )
    .expect("2x2");
    let rotated_up = BlochVector::new(phi.sin(), 0.0, phi.cos());
    RotatedIsingSetup {
        hamiltonian,
        assistant_basis,
        initial_assistant: bloch_to_density(&rotated_up).expect("pure rotated state"),
    }
}

/// Affine data {u_α, v⃗_α} of the map ρ⃗ → P_α.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MappingCoefficients {
    pub u: [f64; 4],
    pub v: [[f64; 3]; 4],
}

impl MappingCoefficients {
    /// The explicit regular tetrahedron v⃗_α = (±1, ±1, ±1)/(4√3), u_α = ¼.
    pub fn tetrahedron() -> Self {
        let k = 1.0 / (4.0 * 3f64.sqrt());
        Self {
            u: [0.25; 4],
            v: [[k, k, k], [-k, k, -k], [k, -k, -k], [-k, -k, k]],
        }
    }

    pub fn vector(&self, label: Label) -> Vector3<f64> {
        Vector3::from(self.v[label.index()])
    }

    /// Σu = 1, Σv⃗ = 0, u_α ≥ |v⃗_α|.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let sum_u: f64 = self.u.iter().sum();
        if (sum_u - 1.0).abs() > tol {
            return Err(Error::ConstraintViolation(format!("sum of u is {sum_u}")));
        }
        let sum_v: Vector3<f64> = Label::ALL.iter().map(|&l| self.vector(l)).sum();
        if sum_v.amax() > tol {
            return Err(Error::ConstraintViolation(format!("sum of v is {sum_v:?}")));
        }
        for label in Label::ALL {
            let (u, v) = (self.u[label.index()], self.vector(label).norm());
            if u < v - tol {
                return Err(Error::ConstraintViolation(format!(
                    "u{} = {u} < |v{}| = {v}",
                    label.as_str(),
                    label.as_str()
                )));
            }
        }
        Ok(())
    }

    /// 4 v⃗_a·(v⃗_b × v⃗_c).
    pub fn triple(&self, a: Label, b: Label, c: Label) -> f64 {
        4.0 * self.vector(a).dot(&self.vector(b).cross(&self.vector(c)))
    }

    /// Δ = 4 v⃗_{++}·(v⃗_{+−} × v⃗_{−+}).
    pub fn determinant(&self) -> f64 {
        self.triple(Label::PlusPlus, Label::PlusMinus, Label::MinusPlus)
    }

    /// Rows v⃗_{++}, v⃗_{+−}, v⃗_{−+}.
    pub fn reduced_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[
            self.vector(Label::PlusPlus).transpose(),
            self.vector(Label::PlusMinus).transpose(),
            self.vector(Label::MinusPlus).transpose(),
        ])
    }

    /// P_α = u_α + v⃗_α·ρ⃗.
    pub fn probabilities(&self, rho: &BlochVector) -> Result<[f64; 4]> {
        rho.check_physical()?;
        let r = rho.as_vector();
        Ok(Label::ALL.map(|l| self.u[l.index()] + self.vector(l).dot(&r)))
    }

    /// Inverts three of the four affine equations; the fourth is returned as
    /// a residual.
    pub fn reconstruct(&self, probabilities: &[f64; 4], det_floor: f64) -> Result<SpinEstimate> {
        self.check_floor(det_floor)?;
        let m = self.reduced_matrix();
        let rhs = Vector3::new(
            probabilities[0] - self.u[0],
            probabilities[1] - self.u[1],
            probabilities[2] - self.u[2],
        );
        let x = m.lu().solve(&rhs).ok_or(Error::IllConditioned {
            determinant: self.determinant(),
            floor: det_floor,
        })?;
        let predicted = self.u[3] + self.vector(Label::MinusMinus).dot(&x);
        Ok(SpinEstimate {
            bloch: BlochVector::from(x),
            residual: probabilities[3] - predicted,
        })
    }

    /// Matrix W and offset w₀ of (⟨σ_z⟩, ⟨s_z⟩, ⟨s_zσ_z⟩) = W ρ⃗ + w₀.
    pub fn correlation_map(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let mut w = Matrix3::zeros();
        let mut w0 = Vector3::zeros();
        for label in Label::ALL {
            let signs = correlation_signs(label);
            for (row, sign) in signs.iter().enumerate() {
                let v = self.vector(label);
                for col in 0..3 {
                    w[(row, col)] += sign * v[col];
                }
                w0[row] += sign * self.u[label.index()];
            }
        }
        (w, w0)
    }

    /// Inverts the correlation coordinates (⟨σ_z⟩, ⟨s_z⟩, ⟨s_zσ_z⟩).
    pub fn reconstruct_from_correlations(
        &self,
        correlations: &[f64; 3],
        det_floor: f64,
    ) -> Result<BlochVector> {
        self.check_floor(det_floor)?;
        let (w, w0) = self.correlation_map();
        let rhs = Vector3::from(*correlations) - w0;
        w.lu()
            .solve(&rhs)
            .map(BlochVector::from)
            .ok_or(Error::IllConditioned {
                determinant: self.determinant(),
                floor: det_floor,
            })
    }

    fn check_floor(&self, det_floor: f64) -> Result<()> {
        let det = self.determinant();
        if det.abs() <= det_floor {
            return Err(Error::IllConditioned {
                determinant: det,
                floor: det_floor,
            });
        }
        Ok(())
    }

    /// Norms of u, |v⃗_α| and pairwise cosines.
    pub fn diagnostics(&self) -> TetrahedronDiagnostics {
        let norms = Label::ALL.map(|l| self.vector(l).norm());
        let mut cosines = [[1.0; 4]; 4];
        for a in Label::ALL {
            for b in Label::ALL {
                let (i, j) = (a.index(), b.index());
                if i != j {
                    cosines[i][j] = self.vector(a).dot(&self.vector(b)) / (norms[i] * norms[j]);
                }
            }
        }
        TetrahedronDiagnostics {
            u: self.u,
            norms,
            cosines,
            determinant: self.determinant(),
        }
    }
}

fn correlation_signs(label: Label) -> [f64; 3] {
    let (i, a) = (label.system_sign(), label.assistant_sign());
    [i, a, i * a]
}

/// (⟨σ_z⟩, ⟨s_z⟩, ⟨s_zσ_z⟩) from joint probabilities.
pub fn correlations(probabilities: &[f64; 4]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for label in Label::ALL {
        for (k, s) in correlation_signs(label).iter().enumerate() {
            out[k] += s * probabilities[label.index()];
        }
    }
    out
}

/// Closed-form inverse for [`MappingCoefficients::tetrahedron`]:
/// ρ⃗ = √3 (⟨s_z⟩, ⟨σ_z⟩, ⟨s_zσ_z⟩).
pub fn tetrahedron_closed_form(correlations: &[f64; 3]) -> BlochVector {
    let r3 = 3f64.sqrt();
    BlochVector::new(
        r3 * correlations[1],
        r3 * correlations[0],
        r3 * correlations[2],
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinEstimate {
    pub bloch: BlochVector,
    /// Measured minus predicted P_{−−}.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TetrahedronDiagnostics {
    pub u: [f64; 4],
    pub norms: [f64; 4],
    pub cosines: [[f64; 4]; 4],
    pub determinant: f64,
}

impl TetrahedronDiagnostics {
    /// Largest deviation from u_α = |v⃗_α| = ¼ and cos = −1/3.
    pub fn tetrahedron_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            worst = worst
                .max((self.u[i] - 0.25).abs())
                .max((self.norms[i] - 0.25).abs());
            for j in 0..4 {
                if i != j {
                    worst = worst.max((self.cosines[i][j] + 1.0 / 3.0).abs());
                }
            }
        }
        worst
    }
}

/// A concrete two-spin setup together with its mapping coefficients.
#[derive(Clone, Debug)]
pub struct SpinScheme {
    pub hamiltonian: Operator,
    pub tau: f64,
    pub initial_assistant: DensityMatrix,
    /// Unitary whose columns are the assistant readout eigenvectors (+1, −1).
    pub assistant_basis: Operator,
    pub coefficients: MappingCoefficients,
    pub determinant: f64,
}

/// Runs the evolution and extracts u_α = ½[Û(1⊗R)Û†]_{αα},
/// v⃗_α = ½[Û(σ⃗⊗R)Û†]_{αα}.
pub fn build_scheme(h: &Operator, tau: f64, r: &DensityMatrix) -> Result<SpinScheme> {
    build_scheme_in_basis(h, tau, r, &Operator::identity(2))
}

/// As [`build_scheme`], reading the assistant out in the eigenbasis given by
/// the columns of `assistant_basis`.
pub fn build_scheme_in_basis(
    h: &Operator,
    tau: f64,
    r: &DensityMatrix,
    assistant_basis: &Operator,
) -> Result<SpinScheme> {
    if h.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: h.dim(),
        });
    }
    if r.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: r.dim(),
        });
    }
    if assistant_basis.dim() != 2 || assistant_basis.unitarity_deviation() > 1e-10 {
        return Err(Error::InvalidParameter(
            "assistant basis must be a 2x2 unitary".into(),
        ));
    }
    let u = hermitian_expm(h, tau)?;
    let readout = tensor_product(&Operator::identity(2), assistant_basis).adjoint();
    let u_read = &readout * &u;
    let u_read_dag = u_read.adjoint();

    let diag_half = |op: &Operator| -> [f64; 4] {
        let m = &(&u_read * op) * &u_read_dag;
        [0, 1, 2, 3].map(|k| 0.5 * m.get(k, k).re)
    };
    let r_op = r.operator();
    let u_coeff = diag_half(&tensor_product(&Operator::identity(2), r_op));
    let per_axis = Axis::ALL.map(|axis| diag_half(&tensor_product(&pauli(axis), r_op)));
    let v = [0, 1, 2, 3].map(|k| [per_axis[0][k], per_axis[1][k], per_axis[2][k]]);

    let coefficients = MappingCoefficients { u: u_coeff, v };
    coefficients.validate(CONSTRAINT_TOL)?;
    let determinant = coefficients.determinant();
    Ok(SpinScheme {
        hamiltonian: h.clone(),
        tau,
        initial_assistant: r.clone(),
        assistant_basis: assistant_basis.clone(),
        coefficients,
        determinant,
    })
}

impl SpinScheme {
    /// Optimal coupling, τ = χ/sin χ, assistant prepared in |+⟩.
    pub fn optimal() -> Self {
        build_scheme(&optimal_hamiltonian(), optimal_duration(), &assistant_up())
            .expect("optimal scheme satisfies its constraints")
    }

    /// Rotated Ising form of the optimal coupling.
    pub fn ising() -> Self {
        let setup = ising_hamiltonian();
        build_scheme_in_basis(
            &setup.hamiltonian,
            optimal_duration(),
            &setup.initial_assistant,
            &setup.assistant_basis,
        )
        .expect("rotated scheme satisfies its constraints")
    }

    pub fn forward_probabilities(&self, rho: &BlochVector) -> Result<[f64; 4]> {
        self.coefficients.probabilities(rho)
    }

    pub fn reconstruct(&self, probabilities: &[f64; 4], det_floor: f64) -> Result<SpinEstimate> {
        self.coefficients.reconstruct(probabilities, det_floor)
    }

    pub fn reconstruct_from_correlations(
        &self,
        correlations: &[f64; 3],
        det_floor: f64,
    ) -> Result<BlochVector> {
        self.coefficients
            .reconstruct_from_correlations(correlations, det_floor)
    }

    pub fn diagnostics(&self) -> TetrahedronDiagnostics {
        self.coefficients.diagnostics()
    }
}

/// Summary printed by the spin demo.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalSchemeReport {
    pub phi: f64,
    pub chi: f64,
    pub cos_chi: f64,
    pub tau: f64,
    pub hamiltonian_square_deviation: f64,
    pub closed_form_deviation: f64,
    pub diagnostics: TetrahedronDiagnostics,
    pub notes: Vec<&'static str>,
}

impl OptimalSchemeReport {
    pub fn compute() -> Result<Self> {
        let scheme = SpinScheme::optimal();
        let h = &scheme.hamiltonian;
        let chi = chi();
        let h2 = h * h;
        let target = Operator::identity(4).scale_real(chi.sin().powi(2));
        let u = hermitian_expm(h, scheme.tau)?;
        Ok(Self {
            phi: mixing_angle(),
            chi,
            cos_chi: chi.cos(),
            tau: scheme.tau,
            hamiltonian_square_deviation: h2.max_abs_diff(&target),
            closed_form_deviation: u.max_abs_diff(&optimal_evolution_closed_form()),
            diagnostics: scheme.diagnostics(),
            notes: vec![
                "determinant = 4 v++ . (v+- x v-+)",
                "mixing angle fixed by cos(2 phi) = -1/sqrt(3); cos(chi) = cos(phi)/2",
            ],
        })
    }
}

//! Brute-force reference: builds Hamiltonians on the truncated joint space,
//! evolves by exact matrix exponential and reads probabilities and
//! expectations off the evolved density matrix. Joint spaces are ordered
//! system ⊗ assistant, system index slow.

use nalgebra::{DVector, Matrix3};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::coherent::{ExpectationTriple, JcParams, Triplet};
use crate::error::{Error, Result};
use crate::quantum::{
    bloch_to_density, pauli, sigma_minus, sigma_plus, tensor_product, Axis, BlochVector,
    CoherentState, DensityMatrix, FockSpace, HermitianEigen, Operator,
};
use crate::spin::{Label, SpinScheme};

/// `op ⊗ 1` for a spin operator acting on the system of a spin–field space.
pub fn spin_operator(op: &Operator, space: FockSpace) -> Operator {
    tensor_product(op, &space.identity())
}

/// `1 ⊗ op` for a field operator.
pub fn field_operator(op: &Operator) -> Operator {
    tensor_product(&Operator::identity(2), op)
}

/// V̂ = σ₊a + σ₋a†.
pub fn interaction_operator(space: FockSpace) -> Operator {
    let a = space.annihilation();
    &tensor_product(&sigma_plus(), &a) + &tensor_product(&sigma_minus(), &a.adjoint())
}

/// N̂ = a†a + σ₊σ₋.
pub fn excitation_number(space: FockSpace) -> Operator {
    let up = &sigma_plus() * &sigma_minus();
    &field_operator(&space.number()) + &spin_operator(&up, space)
}

/// Ĥ = ω a†a + (ω/2) σ_z + γ V̂.
pub fn jc_hamiltonian(space: FockSpace, gamma: f64, omega: f64) -> Operator {
    let free = &field_operator(&space.number()).scale_real(omega)
        + &spin_operator(&pauli(Axis::Z), space).scale_real(0.5 * omega);
    &free + &interaction_operator(space).scale_real(gamma)
}

/// Density matrix on a product space.
#[derive(Clone, Debug)]
pub struct JointState {
    pub density: DensityMatrix,
}

impl JointState {
    pub fn product(system: &DensityMatrix, assistant: &DensityMatrix) -> Result<Self> {
        let joint = tensor_product(system.operator(), assistant.operator());
        Ok(Self {
            density: DensityMatrix::new(joint)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn trace(&self) -> f64 {
        self.density.operator().trace().re
    }

    pub fn expectation(&self, op: &Operator) -> C64 {
        op.expectation(&self.density)
    }

    pub fn evolve_with(&self, u: &Operator) -> Result<Self> {
        Ok(Self {
            density: self.density.evolve(u)?,
        })
    }
}

/// ρ(t) = U ρ U† with U = exp(−iHt).
pub fn evolve(state: &JointState, h: &Operator, t: f64) -> Result<JointState> {
    state.evolve_with(&HermitianEigen::new(h)?.evolution(t))
}

/// The four response amplitudes X_{ss'} = ⟨ψ_{s'}(t)|O|ψ_s(t)⟩ with
/// ψ_s(t) = U(|s⟩⊗|α⟩), packaged as the coefficients of
/// ⟨O(t)⟩ = λ₁·lambda1 + λ₂·lambda2 + λ₂*·lambda2_conj + constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Response {
    pub lambda1: C64,
    pub lambda2: C64,
    pub lambda2_conj: C64,
    pub constant: C64,
}

impl Response {
    pub fn evaluate(&self, rho0: &BlochVector) -> C64 {
        let l1 = C64::new(0.5 * (1.0 + rho0.z), 0.0);
        let l2 = C64::new(0.5 * rho0.x, 0.5 * rho0.y);
        self.lambda1 * l1 + self.lambda2 * l2 + self.lambda2_conj * l2.conj() + self.constant
    }
}

/// Extra Fock levels the reference carries beyond the series truncation, so
/// the unphysical top level of the truncated Hamiltonian stays out of reach.
pub const FOCK_PADDING: usize = 10;

/// Exact spin–field dynamics for one parameter set, with the spectrum of Ĥ
/// computed once. The Fock space is `params.n_max + FOCK_PADDING`.
#[derive(Clone, Debug)]
pub struct JcOracle {
    pub params: JcParams,
    pub space: FockSpace,
    hamiltonian: Operator,
    eigen: HermitianEigen,
    field: CoherentState,
}

impl JcOracle {
    pub fn new(params: &JcParams) -> Result<Self> {
        Self::with_space(params, FockSpace::new(params.n_max + FOCK_PADDING))
    }

    pub fn with_space(params: &JcParams, space: FockSpace) -> Result<Self> {
        let hamiltonian = jc_hamiltonian(space, params.gamma, params.omega);
        let eigen = HermitianEigen::new(&hamiltonian)?;
        let field = CoherentState::new(params.alpha, space)?;
        Ok(Self {
            params: *params,
            space,
            hamiltonian,
            eigen,
            field,
        })
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    /// Probability lost by truncating the coherent state.
    pub fn norm_deficit(&self) -> f64 {
        self.field.norm_deficit()
    }

    pub fn evolution(&self, t: f64) -> Operator {
        self.eigen.evolution(t)
    }

    pub fn initial_state(&self, rho0: &BlochVector) -> Result<JointState> {
        JointState::product(&bloch_to_density(rho0)?, &self.field.density()?)
    }

    pub fn state_at(&self, t: f64, rho0: &BlochVector) -> Result<JointState> {
        self.initial_state(rho0)?.evolve_with(&self.evolution(t))
    }

    pub fn observables(&self, triplet: Triplet) -> [Operator; 3] {
        let axis = match triplet {
            Triplet::SigmaX => Axis::X,
            Triplet::SigmaZ => Axis::Z,
        };
        let spin = spin_operator(&pauli(axis), self.space);
        let photons = field_operator(&self.space.number());
        let product = &spin * &photons;
        [spin, photons, product]
    }

    pub fn triplet_values(&self, t: f64, rho0: &BlochVector, triplet: Triplet) -> Result<[f64; 3]> {
        let state = self.state_at(t, rho0)?;
        Ok(self
            .observables(triplet)
            .map(|op| state.expectation(&op).re))
    }

    /// (⟨σ_x⟩, ⟨a†a⟩, ⟨a†aσ_x⟩) at time t.
    pub fn expectations(&self, t: f64, rho0: &BlochVector) -> Result<ExpectationTriple> {
        let [sigma_x, photons, photons_sigma_x] = self.triplet_values(t, rho0, Triplet::SigmaX)?;
        Ok(ExpectationTriple {
            sigma_x,
            photons,
            photons_sigma_x,
        })
    }

    /// Jacobian of the triplet with respect to the initial Bloch components.
    /// The map is affine, so differences of exact evaluations give it exactly.
    pub fn sensitivity(&self, t: f64, triplet: Triplet) -> Result<Matrix3<f64>> {
        let base = self.triplet_values(t, &BlochVector::default(), triplet)?;
        let mut m = Matrix3::zeros();
        for (col, unit) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .enumerate()
        {
            let v = self.triplet_values(t, &BlochVector::from(*unit), triplet)?;
            for row in 0..3 {
                m[(row, col)] = v[row] - base[row];
            }
        }
        Ok(m)
    }

    /// det of the σ_x-triplet sensitivity, the reference value of Δ(t).
    pub fn determinant(&self, t: f64) -> Result<f64> {
        Ok(self.sensitivity(t, Triplet::SigmaX)?.determinant())
    }

    /// P(i, n) = Tr[ρ(t) (π_i ⊗ |n⟩⟨n|)] with π_± the σ_x eigenprojectors,
    /// as rows (outcome i, photon number n, probability).
    pub fn joint_distribution(&self, t: f64, rho0: &BlochVector) -> Result<Vec<(i8, usize, f64)>> {
        let state = self.state_at(t, rho0)?;
        let rho = state.density.operator();
        let dim = self.space.dim();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = Vec::with_capacity(2 * dim);
        for (sign, vx) in [(1i8, [h, h]), (-1i8, [h, -h])] {
            for n in 0..dim {
                // ⟨x_i, n| ρ |x_i, n⟩ with |x_i⟩ = vx[0]|+⟩ + vx[1]|−⟩.
                let idx = [n, dim + n];
                let mut p = C64::new(0.0, 0.0);
                for a in 0..2 {
                    for b in 0..2 {
                        p += rho.get(idx[a], idx[b]) * (vx[a] * vx[b]);
                    }
                }
                out.push((sign, n, p.re));
            }
        }
        Ok(out)
    }

    /// λ-form coefficients of ⟨O(t)⟩ for an arbitrary joint operator.
    pub fn response(&self, t: f64, op: &Operator) -> Result<Response> {
        if op.dim() != 2 * self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.space.dim(),
                found: op.dim(),
            });
        }
        let u = self.evolution(t);
        let field = self.field.amplitudes();
        let lift = |spin_index: usize| {
            let mut v = DVector::zeros(op.dim());
            v.rows_mut(spin_index * self.space.dim(), self.space.dim())
                .copy_from(field);
            u.apply(&v)
        };
        let psi_plus = lift(0);
        let psi_minus = lift(1);
        let x = |s: &DVector<C64>, s_prime: &DVector<C64>| s_prime.dotc(&op.apply(s));
        let x_pp = x(&psi_plus, &psi_plus);
        let x_mm = x(&psi_minus, &psi_minus);
        Ok(Response {
            lambda1: x_pp - x_mm,
            lambda2: x(&psi_minus, &psi_plus),
            lambda2_conj: x(&psi_plus, &psi_minus),
            constant: x_mm,
        })
    }

    /// Responses of σ₊, a†a and a†aσ₊.
    pub fn lambda_responses(&self, t: f64) -> Result<[Response; 3]> {
        let sp = spin_operator(&sigma_plus(), self.space);
        let n = field_operator(&self.space.number());
        let nsp = &n * &sp;
        Ok([
            self.response(t, &sp)?,
            self.response(t, &n)?,
            self.response(t, &nsp)?,
        ])
    }

    /// Heisenberg-picture a(t) and σ₋(t) written as functions of V̂:
    ///
    /// ```text
    /// a(t)  = e^{i(γV̂−ω)t} [ (cos γK̂t − iV̂ sin γK̂t/K̂) a − i (sin γK̂t/K̂) σ₋ ]
    /// σ₋(t) = e^{i(γV̂−ω)t} [ (cos γK̂t + iV̂ sin γK̂t/K̂) σ₋ − i (sin γK̂t/K̂) a ]
    /// ```
    ///
    /// with K̂ = √(V̂² + 1).
    pub fn heisenberg_operators(&self, t: f64) -> Result<(Operator, Operator)> {
        let g = self.params.gamma;
        let w = self.params.omega;
        let v = HermitianEigen::new(&interaction_operator(self.space))?;
        let k = |x: f64| (x * x + 1.0).sqrt();
        let phase = v.map(|x| C64::from_polar(1.0, (g * x - w) * t));
        let cos_k = v.map(|x| C64::new((g * k(x) * t).cos(), 0.0));
        let sin_over_k = v.map(|x| C64::new((g * k(x) * t).sin() / k(x), 0.0));
        let v_sin = v.map(|x| C64::new(x * (g * k(x) * t).sin() / k(x), 0.0));
        let i = C64::new(0.0, 1.0);
        let a = field_operator(&self.space.annihilation());
        let sm = spin_operator(&sigma_minus(), self.space);
        let a_t = &phase * &(&(&(&cos_k - &v_sin.scale(i)) * &a) - &(&sin_over_k * &sm).scale(i));
        let sm_t = &phase * &(&(&(&cos_k + &v_sin.scale(i)) * &sm) - &(&sin_over_k * &a).scale(i));
        Ok((a_t, sm_t))
    }

    /// U† O U.
    pub fn heisenberg(&self, op: &Operator, t: f64) -> Operator {
        let u = self.evolution(t);
        &(&u.adjoint() * op) * &u
    }
}

pub fn oracle_expectations(
    t: f64,
    params: &JcParams,
    rho0: &BlochVector,
) -> Result<ExpectationTriple> {
    JcOracle::new(params)?.expectations(t, rho0)
}

pub fn joint_distribution(
    t: f64,
    params: &JcParams,
    rho0: &BlochVector,
) -> Result<Vec<(i8, usize, f64)>> {
    JcOracle::new(params)?.joint_distribution(t, rho0)
}

/// Joint readout probabilities of the two-spin scheme, in [`Label::ALL`]
/// order, from the full evolution of ρ ⊗ R followed by projection.
pub fn spin_joint_probabilities(scheme: &SpinScheme, rho: &BlochVector) -> Result<[f64; 4]> {
    let state = JointState::product(&bloch_to_density(rho)?, &scheme.initial_assistant)?;
    let evolved = evolve(&state, &scheme.hamiltonian, scheme.tau)?;
    let mut out = [0.0; 4];
    for label in Label::ALL {
        let system = if label.system_sign() > 0.0 { 0 } else { 1 };
        let assistant = if label.assistant_sign() > 0.0 { 0 } else { 1 };
        let mut ket = DVector::zeros(4);
        for k in 0..2 {
            ket[2 * system + k] = scheme.assistant_basis.get(k, assistant);
        }
        out[label.index()] = Operator::projector(&ket).expectation(&evolved.density).re;
    }
    Ok(out)
}

/// Normalized vector |s⟩ ⊗ |field⟩.
pub fn product_ket(spin_up: bool, field: &DVector<C64>) -> DVector<C64> {
    let dim = field.len();
    let mut v = DVector::zeros(2 * dim);
    let offset = if spin_up { 0 } else { dim };
    v.rows_mut(offset, dim).copy_from(field);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{DensityMatrix, ONE};

    fn params(alpha: f64, n_max: usize) -> JcParams {
        JcParams::new(0.1, 0.1, C64::new(alpha, 0.0), n_max).unwrap()
    }

    /// Drops rows and columns touching the top Fock level on either spin.
    fn interior_max(op: &Operator, space: FockSpace) -> f64 {
        let top = [space.n_max, space.dim() + space.n_max];
        let mut worst: f64 = 0.0;
        for r in 0..op.dim() {
            for c in 0..op.dim() {
                if !top.contains(&r) && !top.contains(&c) {
                    worst = worst.max(op.get(r, c).norm());
                }
            }
        }
        worst
    }

    #[test]
    fn constants_of_motion() {
        let space = FockSpace::new(12);
        let h = jc_hamiltonian(space, 0.3, 0.7);
        let v = interaction_operator(space);
        let n = excitation_number(space);
        assert!(h.hermiticity_deviation() < 1e-15);
        assert!(interior_max(&h.commutator(&v), space) < 1e-12);
        assert!(interior_max(&h.commutator(&n), space) < 1e-12);
        assert!(interior_max(&(&(&v * &v) - &n), space) < 1e-12);
    }

    #[test]
    fn hamiltonian_couples_only_ladder_pairs() {
        let space = FockSpace::new(6);
        let h = jc_hamiltonian(space, 0.4, 0.2);
        let excitation = |idx: usize| {
            if idx < space.dim() {
                idx + 1
            } else {
                idx - space.dim()
            }
        };
        for r in 0..h.dim() {
            for c in 0..h.dim() {
                if h.get(r, c).norm() > 0.0 {
                    assert_eq!(excitation(r), excitation(c), "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn evolution_at_zero_time_is_identity() {
        let p = params(1.0, 20);
        let o = JcOracle::new(&p).unwrap();
        let rho = BlochVector::new(0.2, -0.3, 0.5);
        let s0 = o.initial_state(&rho).unwrap();
        let s = o.state_at(0.0, &rho).unwrap();
        assert!(s.density.operator().max_abs_diff(s0.density.operator()) < 1e-13);
    }

    #[test]
    fn eigenstate_is_stationary() {
        let space = FockSpace::new(5);
        let h = jc_hamiltonian(space, 0.2, 0.1);
        let eig = HermitianEigen::new(&h).unwrap();
        let psi = eig.vectors().column(3).into_owned();
        let state = JointState {
            density: DensityMatrix::pure(&psi).unwrap(),
        };
        let later = evolve(&state, &h, 17.0).unwrap();
        let (p0, p1) = (state.density.populations(), later.density.populations());
        for (a, b) in p0.iter().zip(&p1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn evolution_preserves_trace_and_spectrum() {
        let p = params(1.5, 30);
        let o = JcOracle::new(&p).unwrap();
        let rho = BlochVector::new(0.6, 0.1, -0.4);
        let s0 = o.initial_state(&rho).unwrap();
        let ev0 = s0.density.operator().hermitian_eigenvalues().unwrap();
        for &t in &[0.5, 13.0, 120.0] {
            let s = o.state_at(t, &rho).unwrap();
            assert!((s.trace() - 1.0).abs() < 1e-12);
            let ev = s.density.operator().hermitian_eigenvalues().unwrap();
            for (a, b) in ev0.iter().zip(&ev) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn excitation_number_conserved() {
        let p = params(1.0, 25);
        let o = JcOracle::new(&p).unwrap();
        let n = excitation_number(o.space);
        let rho = BlochVector::new(0.1, 0.7, 0.3);
        let n0 = o.initial_state(&rho).unwrap().expectation(&n).re;
        for k in 0..20 {
            let t = 10.0 * k as f64;
            let nt = o.state_at(t, &rho).unwrap().expectation(&n).re;
            assert!((nt - n0).abs() < 1e-10);
        }
    }

    #[test]
    fn expectations_at_zero_time() {
        let e =
            oracle_expectations(0.0, &params(2.0, 30), &BlochVector::new(0.0, 0.0, 1.0)).unwrap();
        assert!(e.sigma_x.abs() < 1e-14);
        assert!((e.photons - 4.0).abs() < 1e-7);
        assert!(e.photons_sigma_x.abs() < 1e-14);
    }

    #[test]
    fn uncoupled_photon_number_is_constant() {
        let space = FockSpace::new(20);
        let h = jc_hamiltonian(space, 0.0, 0.1);
        let field = CoherentState::new(C64::new(1.2, 0.0), space).unwrap();
        let s0 = JointState::product(
            &bloch_to_density(&BlochVector::new(1.0, 0.0, 0.0)).unwrap(),
            &field.density().unwrap(),
        )
        .unwrap();
        let n = field_operator(&space.number());
        let n0 = s0.expectation(&n).re;
        for &t in &[1.0, 30.0, 190.0] {
            assert!((evolve(&s0, &h, t).unwrap().expectation(&n).re - n0).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_distribution_at_zero_time() {
        let dist =
            joint_distribution(0.0, &params(1.0, 30), &BlochVector::new(0.0, 0.0, 1.0)).unwrap();
        for (i, n, p) in dist {
            let expected = 0.5 * (-1.0f64).exp() / (1..=n).map(|k| k as f64).product::<f64>();
            assert!((p - expected).abs() < 1e-12, "{i} {n} {p} {expected}");
        }
    }

    #[test]
    fn joint_distribution_moments() {
        let p = params(1.3, 30);
        let o = JcOracle::new(&p).unwrap();
        let rho = BlochVector::new(0.3, -0.5, 0.2);
        for &t in &[3.0, 42.0] {
            let dist = o.joint_distribution(t, &rho).unwrap();
            let e = o.expectations(t, &rho).unwrap();
            let total: f64 = dist.iter().map(|d| d.2).sum();
            let sx: f64 = dist.iter().map(|&(i, _, p)| i as f64 * p).sum();
            let nn: f64 = dist.iter().map(|&(_, n, p)| n as f64 * p).sum();
            let nsx: f64 = dist.iter().map(|&(i, n, p)| i as f64 * n as f64 * p).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(dist.iter().all(|d| d.2 > -1e-14));
            assert!((sx - e.sigma_x).abs() < 1e-10);
            assert!((nn - e.photons).abs() < 1e-10);
            assert!((nsx - e.photons_sigma_x).abs() < 1e-10);
        }
    }

    #[test]
    fn pictures_agree() {
        let p = params(1.0, 25);
        let o = JcOracle::new(&p).unwrap();
        let rho = BlochVector::new(-0.4, 0.2, 0.6);
        let s0 = o.initial_state(&rho).unwrap();
        let [sx, n, nsx] = o.observables(Triplet::SigmaX);
        for &t in &[2.0, 77.0] {
            let st = o.state_at(t, &rho).unwrap();
            for op in [&sx, &n, &nsx] {
                let schrodinger = st.expectation(op);
                let heisenberg = s0.expectation(&o.heisenberg(op, t));
                assert!((schrodinger - heisenberg).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_heisenberg_operators() {
        let p = JcParams::new(0.1, 0.1, C64::new(1.0, 0.4), 30).unwrap();
        let o = JcOracle::new(&p).unwrap();
        let rho = BlochVector::new(0.2, -0.3, 0.4);
        let s0 = o.initial_state(&rho).unwrap();
        let a = field_operator(&o.space.annihilation());
        let sm = spin_operator(&sigma_minus(), o.space);
        for k in 1..=10 {
            let t = 20.0 * k as f64;
            let (a_t, sm_t) = o.heisenberg_operators(t).unwrap();
            let st = o.state_at(t, &rho).unwrap();
            assert!((s0.expectation(&a_t) - st.expectation(&a)).norm() < 1e-8);
            assert!((s0.expectation(&sm_t) - st.expectation(&sm)).norm() < 1e-8);
        }
    }

    #[test]
    fn responses_reproduce_expectations() {
        let p = JcParams::new(0.1, 0.1, C64::new(0.8, -0.5), 30).unwrap();
        let o = JcOracle::new(&p).unwrap();
        let rho = BlochVector::new(0.5, 0.4, -0.3);
        let t = 33.0;
        let [sp, n, nsp] = o.lambda_responses(t).unwrap();
        let e = o.expectations(t, &rho).unwrap();
        assert!((2.0 * sp.evaluate(&rho).re - e.sigma_x).abs() < 1e-12);
        assert!((n.evaluate(&rho).re - e.photons).abs() < 1e-12);
        assert!((2.0 * nsp.evaluate(&rho).re - e.photons_sigma_x).abs() < 1e-12);
    }

    #[test]
    fn spin_route_matches_mapping() {
        for scheme in [SpinScheme::optimal(), SpinScheme::ising()] {
            let rho = BlochVector::new(0.3, -0.2, 0.7);
            let brute = spin_joint_probabilities(&scheme, &rho).unwrap();
            let mapped = scheme.forward_probabilities(&rho).unwrap();
            for k in 0..4 {
                assert!((brute[k] - mapped[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_ket_layout() {
        let field = DVector::from_vec(vec![ONE, C64::new(0.0, 2.0)]);
        let up = product_ket(true, &field);
        let down = product_ket(false, &field);
        assert_eq!(up[1], field[1]);
        assert_eq!(down[3], field[1]);
        assert_eq!(down[0], C64::new(0.0, 0.0));
    }
}

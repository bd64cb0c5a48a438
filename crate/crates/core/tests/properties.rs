use assist_tomo::coherent::{
    analytic_system, expectations_analytic, reconstruct_initial, triple_sum_determinant,
    DressedCoefficients, JcParams,
};
use assist_tomo::quantum::{
    bloch_to_density, density_to_bloch, hermitian_expm, tensor_product, BlochVector, Operator,
};
use assist_tomo::spin::{assistant_up, build_scheme, SpinScheme, OPTIMAL_DETERMINANT};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn hermitian(dim: usize) -> impl Strategy<Value = Operator> {
    prop::collection::vec(complex(), dim * dim).prop_map(move |v| {
        let a = Operator::from_row_slice(dim, &v).unwrap();
        (&a + &a.adjoint()).scale_real(0.5)
    })
}

fn square(dim: usize) -> impl Strategy<Value = Operator> {
    prop::collection::vec(complex(), dim * dim)
        .prop_map(move |v| Operator::from_row_slice(dim, &v).unwrap())
}

fn bloch() -> impl Strategy<Value = BlochVector> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y, z, r)| {
        let n = (x * x + y * y + z * z).sqrt().max(1e-12);
        let scale = r.cbrt() / n;
        BlochVector::new(x * scale, y * scale, z * scale)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evolution_is_unitary_and_invertible(h in hermitian(4), t in -5.0..5.0f64) {
        let u = hermitian_expm(&h, t).unwrap();
        let back = hermitian_expm(&h, -t).unwrap();
        prop_assert!(u.unitarity_deviation() < 1e-12);
        prop_assert!((&u * &back).max_abs_diff(&Operator::identity(4)) < 1e-12);
    }

    #[test]
    fn tensor_product_is_associative(a in square(2), b in square(2), c in square(2)) {
        let left = tensor_product(&tensor_product(&a, &b), &c);
        let right = tensor_product(&a, &tensor_product(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn bloch_density_roundtrip(v in bloch()) {
        let back = density_to_bloch(&bloch_to_density(&v).unwrap()).unwrap();
        prop_assert!(back.distance(&v) < 1e-14);
    }

    #[test]
    fn spin_roundtrip(v in bloch()) {
        let scheme = SpinScheme::optimal();
        let p = scheme.forward_probabilities(&v).unwrap();
        prop_assert!(p.iter().all(|&x| x >= -1e-15));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let est = scheme.reconstruct(&p, 1e-6).unwrap();
        prop_assert!(est.bloch.distance(&v) < 1e-10);
        prop_assert!(est.residual.abs() < 1e-12);
    }

    #[test]
    fn determinant_never_exceeds_optimum(h in hermitian(4), tau in 1e-3..10.0f64) {
        let scheme = build_scheme(&h, tau, &assistant_up()).unwrap();
        prop_assert!(scheme.determinant.abs() <= OPTIMAL_DETERMINANT + 1e-9);
    }

    #[test]
    fn dressed_coefficients_invariants(n in 0usize..60, t in 0.0..200.0f64, gamma in 0.01..1.0f64, omega in 0.0..1.0f64) {
        let p = JcParams::new(gamma, omega, C64::new(1.0, 0.0), 30).unwrap();
        let d = DressedCoefficients::at(n, t, &p);
        prop_assert!((d.f_plus.norm() - 1.0).abs() < 1e-14);
        prop_assert!((d.f_minus.norm() - 1.0).abs() < 1e-14);
        prop_assert_eq!(d.s.re, 0.0);
        prop_assert!((d.s.conj() + d.s).norm() == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn triple_sum_matches_determinant(t in 0.0..200.0f64, re in 0.3..2.0f64, im in -1.0..1.0f64) {
        let p = JcParams::new(0.1, 0.1, C64::new(re, im), 20).unwrap();
        let direct = analytic_system(t, &p).unwrap().determinant;
        let triple = triple_sum_determinant(t, &p).unwrap();
        prop_assert!((direct - triple).abs() < 1e-9, "{} vs {}", direct, triple);
    }

    #[test]
    fn coherent_roundtrip(v in bloch(), t in 0.5..200.0f64, mean in 0.5..9.0f64) {
        let p = JcParams::with_mean_photons(0.1, 0.1, mean).unwrap();
        let system = analytic_system(t, &p).unwrap();
        prop_assume!(system.determinant.abs() > 1e-3);
        let y = expectations_analytic(t, &p, &v).unwrap();
        prop_assert!(y.sigma_x.abs() <= 1.0 + 1e-12);
        prop_assert!(y.photons >= 0.0);
        let est = reconstruct_initial(&y, &system, 1e-6).unwrap();
        prop_assert!(est.bloch.distance(&v) < 1e-8);
    }
}

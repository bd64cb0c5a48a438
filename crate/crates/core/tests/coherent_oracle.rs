use assist_tomo::coherent::printed::{verification_report, TermStatus};
use assist_tomo::coherent::{
    analytic_system, expectations_analytic, joint_index, reconstruct_initial, time_grid,
    triple_sum_determinant, DressedCoefficients, JcParams,
};
use assist_tomo::oracle::{joint_distribution, oracle_expectations, JcOracle};
use assist_tomo::quantum::{BlochVector, FockSpace};
use assist_tomo::Error;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(alpha: C64) -> JcParams {
    JcParams::new(0.1, 0.1, alpha, 30).unwrap()
}

#[test]
fn analytic_matches_oracle_on_grid() {
    let p = params(C64::new(1.0, 0.0));
    let oracle = JcOracle::new(&p).unwrap();
    let rho = BlochVector::new(0.4, -0.3, 0.6);
    let mut worst: f64 = 0.0;
    for t in time_grid(0.0, 200.0, 40) {
        let a = expectations_analytic(t, &p, &rho).unwrap();
        let o = oracle.expectations(t, &rho).unwrap();
        worst = worst.max(a.relative_deviation(&o));
    }
    assert!(worst < 1e-7, "{worst}");
}

#[test]
fn z_polarized_example_at_t10() {
    let p = params(C64::new(1.0, 0.0));
    let rho = BlochVector::new(0.0, 0.0, 1.0);
    let a = expectations_analytic(10.0, &p, &rho).unwrap();
    let o = oracle_expectations(10.0, &p, &rho).unwrap();
    assert!(a.relative_deviation(&o) < 1e-7);
}

#[test]
fn complex_amplitude_matches_oracle() {
    let p = params(C64::from_polar(1.5, 0.7));
    let oracle = JcOracle::new(&p).unwrap();
    let rho = BlochVector::new(-0.5, 0.5, 0.3);
    for t in [3.0, 17.5, 42.0, 120.0] {
        let a = expectations_analytic(t, &p, &rho).unwrap();
        let o = oracle.expectations(t, &rho).unwrap();
        assert!(a.relative_deviation(&o) < 1e-7, "t={t}");
        let det = analytic_system(t, &p).unwrap().determinant;
        let det_o = oracle.determinant(t).unwrap();
        assert!((det - det_o).abs() < 1e-7 * det_o.abs().max(1e-3), "t={t}");
    }
}

#[test]
fn determinant_matches_oracle() {
    for mean in [1.0, 4.0] {
        let p = JcParams::with_mean_photons(0.1, 0.1, mean).unwrap();
        let oracle = JcOracle::new(&p).unwrap();
        let times = time_grid(0.0, 200.0, 25);
        let a: Vec<f64> = times
            .iter()
            .map(|&t| analytic_system(t, &p).unwrap().determinant)
            .collect();
        let o: Vec<f64> = times
            .iter()
            .map(|&t| oracle.determinant(t).unwrap())
            .collect();
        let scale = o.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = a
            .iter()
            .zip(&o)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff / scale < 1e-7, "mean {mean}: {}", diff / scale);
    }
}

#[test]
fn cosine_and_sine_terms_match_block_exponential() {
    let p = params(C64::new(1.0, 0.0));
    let space = FockSpace::new(12);
    let oracle = JcOracle::with_space(&p, space).unwrap();
    for t in [0.0, 2.5, 31.0, 150.0] {
        let u = oracle.evolution(t);
        for n in 0..space.n_max {
            let d = DressedCoefficients::at(n, t, &p);
            let phase = C64::from_polar(1.0, -p.omega * (n as f64 + 0.5) * t);
            let up = joint_index(space, true, n);
            let down = joint_index(space, false, n + 1);
            let stay = u.get(up, up);
            let flip = u.get(down, up);
            assert!(
                (stay - phase * (d.g_plus + d.g_minus) * 0.5).norm() < 1e-12,
                "n={n} t={t}"
            );
            assert!(
                (flip + phase * d.s * ((n + 1) as f64).sqrt()).norm() < 1e-12,
                "n={n} t={t}"
            );
            assert!((d.g_plus - d.g_minus - d.s * 2.0 * (n as f64).sqrt()).norm() < 1e-14);
        }
    }
}

#[test]
fn joint_distribution_moments() {
    let p = params(C64::new(1.0, 0.0));
    let rho = BlochVector::new(0.1, 0.7, -0.2);
    let t = 33.0;
    let rows = joint_distribution(t, &p, &rho).unwrap();
    let o = oracle_expectations(t, &p, &rho).unwrap();
    assert!(rows.iter().all(|r| r.2 >= -1e-15));
    let m = |f: &dyn Fn(i8, usize) -> f64| rows.iter().map(|&(i, n, q)| f(i, n) * q).sum::<f64>();
    assert!((m(&|i, _| i as f64) - o.sigma_x).abs() < 1e-10);
    assert!((m(&|_, n| n as f64) - o.photons).abs() < 1e-10);
    assert!((m(&|i, n| i as f64 * n as f64) - o.photons_sigma_x).abs() < 1e-10);

    let z = joint_distribution(0.0, &p, &BlochVector::new(0.0, 0.0, 1.0)).unwrap();
    let mut factorial = 1.0;
    for &(_, n, q) in z.iter().filter(|r| r.0 == 1) {
        if n > 0 {
            factorial *= n as f64;
        }
        assert!((q - 0.5 * (-1.0f64).exp() / factorial).abs() < 1e-12);
    }
}

#[test]
fn random_determinant_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let gamma = rng.random_range(0.02..0.5);
        let omega = rng.random_range(0.0..0.5);
        let alpha = C64::from_polar(
            rng.random_range(0.5..2.5),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let t = rng.random_range(0.0..200.0);
        let p = JcParams::new(gamma, omega, alpha, 25).unwrap();
        let direct = analytic_system(t, &p).unwrap().determinant;
        let triple = triple_sum_determinant(t, &p).unwrap();
        assert!((direct - triple).abs() < 1e-9, "{direct} vs {triple}");
    }
}

#[test]
fn roundtrip_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = params(C64::new(1.0, 0.0));
    let mut checked = 0;
    while checked < 500 {
        let t = rng.random_range(0.0..200.0);
        let system = analytic_system(t, &p).unwrap();
        if system.determinant.abs() <= 1e-3 {
            continue;
        }
        let v = loop {
            let v = BlochVector::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() <= 1.0 {
                break v;
            }
        };
        let y = system.predict(&v);
        let est = reconstruct_initial(&y, &system, 1e-6).unwrap();
        assert!(est.bloch.distance(&v) < 1e-8);
        checked += 1;
    }
}

#[test]
fn ill_conditioned_time_is_rejected() {
    let p = params(C64::new(1.0, 0.0));
    let system = analytic_system(0.0, &p).unwrap();
    assert!(system.determinant.abs() < 1e-15);
    let y = system.predict(&BlochVector::new(0.0, 0.0, 1.0));
    assert!(matches!(
        reconstruct_initial(&y, &system, 1e-6),
        Err(Error::IllConditioned { .. })
    ));
}

#[test]
fn zero_amplitude_is_rejected() {
    let p = JcParams::new(0.1, 0.1, C64::new(0.0, 0.0), 10).unwrap();
    assert!(analytic_system(5.0, &p).is_err());
}

#[test]
fn printed_coefficients_report() {
    let p = params(C64::new(1.0, 0.0));
    let report = verification_report(&p, &time_grid(0.0, 100.0, 50)).unwrap();
    assert!(report.derived_deviation < 1e-10);
    let status = |name: &str| report.terms.iter().find(|c| c.term == name).unwrap().status;
    assert_eq!(status("A11"), TermStatus::Verified);
    assert_eq!(status("A21"), TermStatus::Verified);
    assert_eq!(status("A13"), TermStatus::Relabeled);
    assert_eq!(status("A12"), TermStatus::Corrected);
    assert_eq!(status("A22"), TermStatus::Corrected);
    assert!(report.formulas.iter().all(|f| !f.verified));
    assert!(!report.corrected_terms().is_empty());
}

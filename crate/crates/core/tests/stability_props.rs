mod common;

use common::{
    dim3_rate_experiment, log_log_slope, random_hamiltonian, random_hermitian, random_pure,
    right_eigenpairs, rng, spectrum_distance,
};
use nalgebra::DMatrix;
use nh_stab::{
    analyze, build_characteristic_matrix, c64, classify, entropy_rate, linearized_entropy,
    linearized_entropy_rate, linearized_nonpurity_rhs, linearized_variation_rhs,
    lyapunov_certificate, nonpurity_rhs, purity, purity_rate, tls_exponent, variation_rhs,
    Classification, ComplexSquareMatrix, DensityMatrix, PureReference, VariationMatrix, C64,
};
use proptest::prelude::*;
use rand::Rng;

fn random_variation(r: &mut impl Rng, dim: usize, scale: f64) -> VariationMatrix {
    let a = random_hermitian(r, dim, scale);
    let shift = ComplexSquareMatrix::identity(dim).scale_real(a.real_trace() / dim as f64);
    VariationMatrix::new(&*a - &shift).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pure_states_are_equilibria(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let h = random_hamiltonian(&mut r, dim, 1.0);
        let reference = PureReference::for_hamiltonian(random_pure(&mut r, dim), &h).unwrap();
        let zero = VariationMatrix::zeros(dim);
        prop_assert!(variation_rhs(&h, &reference, &zero).unwrap().max_abs() <= 1e-14);
        prop_assert!(nonpurity_rhs(&h, &reference, &zero).unwrap().max_abs() <= 1e-14);
        prop_assert!(entropy_rate(&h, &reference, &zero).unwrap().abs() <= 1e-14);
        prop_assert!(purity_rate(&h, reference.rho_p()).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn consistency_chain(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let h = random_hamiltonian(&mut r, dim, 1.0);
        let reference = PureReference::for_hamiltonian(random_pure(&mut r, dim), &h).unwrap();
        let delta = random_variation(&mut r, dim, 0.1);
        let rate = entropy_rate(&h, &reference, &delta).unwrap();
        let tr = nonpurity_rhs(&h, &reference, &delta).unwrap().real_trace();
        let rho = DensityMatrix::new(&**reference.rho_p() + &*delta).unwrap();
        let minus_r = -purity_rate(&h, &rho).unwrap();
        prop_assert!((rate - tr).abs() <= 1e-12);
        prop_assert!((rate - minus_r).abs() <= 1e-12);
    }

    #[test]
    fn linearized_entropy_is_minus_purity_change(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let rho_p = random_pure(&mut r, dim);
        let h = random_hamiltonian(&mut r, dim, 1.0);
        let reference = PureReference::for_hamiltonian(rho_p.clone(), &h).unwrap();
        let x = random_variation(&mut r, dim, 1.0);
        // Exact first-order purity change along x: d/dε tr(ρ_p + εx)² = 2 tr(ρ_p x).
        let eps = 1e-6;
        let plus = DensityMatrix::new(&*rho_p + &x.scale_real(eps)).unwrap();
        let minus = DensityMatrix::new(&*rho_p - &x.scale_real(eps)).unwrap();
        let dp = (purity(&plus) - purity(&minus)) / (2.0 * eps);
        prop_assert!((linearized_entropy(&reference, &x) + dp).abs() <= 1e-8);
        let exact = 2.0 * nh_stab::trace_of_product(&rho_p, &x).re;
        prop_assert!((linearized_entropy(&reference, &x) + exact).abs() <= 1e-12);
    }

    #[test]
    fn sign_law_for_qubits(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = random_hamiltonian(&mut r, 2, 1.0);
        let reference = PureReference::for_hamiltonian(random_pure(&mut r, 2), &h).unwrap();
        let x = random_variation(&mut r, 2, 1.0);
        let lambda = tls_exponent(&reference, h.gamma(), h.hbar()).unwrap();
        let predicted = lambda * linearized_entropy(&reference, &x);
        let rate = linearized_entropy_rate(&h, &reference, &x).unwrap();
        prop_assert!((rate - predicted).abs() <= 1e-12 * predicted.abs().max(1.0));
        if predicted.abs() > 1e-10 {
            prop_assert_eq!(rate.signum(), predicted.signum());
        }
    }

    #[test]
    fn variation_equation_preserves_trace_and_hermiticity(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let h = random_hamiltonian(&mut r, dim, 0.5);
        let reference = PureReference::for_hamiltonian(random_pure(&mut r, dim), &h).unwrap();
        let mut delta = random_variation(&mut r, dim, 0.01);
        let dt = 1e-2;
        let f = |d: &VariationMatrix| variation_rhs(&h, &reference, d).unwrap();
        for _ in 0..100 {
            let k1 = f(&delta);
            let k2 = f(&VariationMatrix::combine(1.0, &delta, 0.5 * dt, &k1));
            let k3 = f(&VariationMatrix::combine(1.0, &delta, 0.5 * dt, &k2));
            let k4 = f(&VariationMatrix::combine(1.0, &delta, dt, &k3));
            let k = VariationMatrix::combine(
                1.0,
                &VariationMatrix::combine(1.0, &k1, 2.0, &k2),
                1.0,
                &VariationMatrix::combine(2.0, &k3, 1.0, &k4),
            );
            delta = VariationMatrix::combine(1.0, &delta, dt / 6.0, &k);
            prop_assert!(delta.trace().norm() <= 1e-10);
            prop_assert!(delta.hermiticity_deviation() <= 1e-10);
        }
    }

    #[test]
    fn characteristic_spectrum_at_stationary_states(seed in any::<u64>(), dim in 2usize..=4) {
        // Around a right eigenvector ψ_k of H the coefficient of |ψ_j⟩⟨ψ_l|
        // (j, l ≠ k) evolves with rate −i(E_j − Ē_l) − 2 Im E_k.
        let mut r = rng(seed);
        let h = random_hamiltonian(&mut r, dim, 0.5);
        let pairs = right_eigenpairs(&h);
        let k = r.random_range(0..dim);
        let ek = pairs[k].0;
        let reference =
            PureReference::for_hamiltonian(DensityMatrix::pure(&pairs[k].1).unwrap(), &h).unwrap();
        let mut expected: Vec<C64> = Vec::new();
        for (j, (ej, _)) in pairs.iter().enumerate() {
            for (l, (el, _)) in pairs.iter().enumerate() {
                if j != k && l != k {
                    expected.push(c64(0.0, -1.0) * (ej - el.conj()) - c64(2.0 * ek.im, 0.0));
                }
            }
        }
        let lambda = build_characteristic_matrix(&h, &reference).unwrap();
        prop_assert_eq!(lambda.nrows(), (dim - 1) * (dim - 1));
        let report = classify(&lambda).unwrap();
        prop_assert!(spectrum_distance(&expected, &report.eigenvalues) <= 1e-8);
    }

    #[test]
    fn lyapunov_agrees_with_spectrum(seed in any::<u64>(), n in 1usize..=6, stable in any::<bool>()) {
        let mut r = rng(seed);
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let max_re = a.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let margin = r.random_range(0.05..1.0);
        let shift = if stable { max_re + margin } else { max_re - margin };
        let a = a - DMatrix::<f64>::identity(n, n) * shift;
        let report = classify(&a).unwrap();
        let cert = lyapunov_certificate(&a);
        if stable {
            prop_assert_eq!(report.classification, Classification::LocallyStable);
            let p = cert.unwrap().unwrap();
            prop_assert!(p.clone().cholesky().is_some());
            let q = a.transpose() * &p + &p * &a;
            let q = (&q + q.transpose()) * 0.5;
            prop_assert!(q.symmetric_eigenvalues().max() < 0.0);
            prop_assert_eq!(report.lyapunov_p, Some(p));
        } else {
            prop_assert_eq!(report.classification, Classification::LocallyUnstable);
            prop_assert!(!matches!(cert, Ok(Some(_))));
            prop_assert!(report.lyapunov_p.is_none());
        }
    }
}

fn max_diff(a: &ComplexSquareMatrix, b: &ComplexSquareMatrix) -> f64 {
    a.max_abs_diff(b)
}

#[test]
fn linearization_is_second_order() {
    let eps = [1e-2, 1e-3, 1e-4];
    let mut r = rng(5);
    for dim in 2..=4 {
        let h = random_hamiltonian(&mut r, dim, 1.0);
        let reference = PureReference::for_hamiltonian(random_pure(&mut r, dim), &h).unwrap();
        let x = random_variation(&mut r, dim, 1.0);
        let mut var_res = Vec::new();
        let mut m_res = Vec::new();
        for &e in &eps {
            let dx = x.scaled(e);
            let nl = variation_rhs(&h, &reference, &dx).unwrap();
            let lin = linearized_variation_rhs(&h, &reference, &x).unwrap().scaled(e);
            var_res.push(max_diff(&nl, &lin));
            let nl = nonpurity_rhs(&h, &reference, &dx).unwrap();
            let lin = linearized_nonpurity_rhs(&h, &reference, &x).unwrap().scaled(e);
            m_res.push(max_diff(&nl, &lin));
        }
        let o1 = log_log_slope(&eps, &var_res);
        let o2 = log_log_slope(&eps, &m_res);
        assert!(o1 >= 1.9, "dim {dim}: variation order {o1}");
        assert!(o2 >= 1.9, "dim {dim}: non-purity order {o2}");
    }
}

#[test]
fn stationary_reference_rate_matches_simulation() {
    let exp = (0..200u64)
        .find_map(dim3_rate_experiment)
        .expect("some seed gives a well separated real leading eigenvalue");
    let rel = (exp.observed - exp.predicted).abs() / exp.predicted.abs();
    assert!(
        rel < 5e-3,
        "predicted {}, observed {}, gap {}",
        exp.predicted,
        exp.observed,
        exp.gap
    );
}

#[test]
fn hermitian_models_are_marginal() {
    let mut r = rng(9);
    for dim in 2..=4 {
        let hp = random_hermitian(&mut r, dim, 1.0);
        let h = nh_stab::NHHamiltonian::new(hp, nh_stab::HermitianMatrix::zeros(dim), 1.0).unwrap();
        let reference = PureReference::for_hamiltonian(random_pure(&mut r, dim), &h).unwrap();
        let report = analyze(&h, &reference).unwrap();
        assert_eq!(report.classification, Classification::Marginal, "dim {dim}");
    }
}

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use polaron_kitaev::chain::{
    build_collective_x, build_kitaev, majorana_edge_modes, ChainParams, DensityMatrix,
};
use polaron_kitaev::fockspace::{
    anticommutator, heisenberg_reversed, max_norm, Eigensystem, FockSpace, Operator,
};
use polaron_kitaev::observables::theta;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `e^{-iHτ} X e^{iHτ}` through the matrix exponential.
fn reversed_by_expm(x: &Operator, h: &Operator, tau: f64) -> Operator {
    let u: DMatrix<Complex64> = (h * Complex64::new(0.0, -tau)).exp();
    &u * x * u.adjoint()
}

#[test]
fn reversed_evolution_matches_matrix_exponential() {
    let s = FockSpace::new(4).unwrap();
    let h = build_kitaev(&s, 1.0, 0.07, 0.0);
    let es = Eigensystem::new(&h).unwrap();
    let (xa, xb) = build_collective_x(&s, 1.0);
    for tau in [0.0, 0.013, 0.5, 3.7, 25.0] {
        for x in [&xa, &xb] {
            let got = heisenberg_reversed(x, &es, tau);
            let want = reversed_by_expm(x, &h, tau);
            assert!(max_norm(&(got - want)) < 1e-10, "tau {tau}");
        }
    }
}

#[test]
fn reversed_evolution_preserves_spectrum() {
    let s = FockSpace::new(4).unwrap();
    let es = Eigensystem::new(&build_kitaev(&s, 1.0, 0.3, 0.2)).unwrap();
    let (xa, _) = build_collective_x(&s, 1.0);
    let before = Eigensystem::new(&xa).unwrap().eigenvalues;
    let moved = heisenberg_reversed(&xa, &es, 1.234);
    let after = Eigensystem::new(&moved).unwrap().eigenvalues;
    for (a, b) in before.iter().zip(&after) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn anti_hermitian_collective_operator_evolves_consistently() {
    let s = FockSpace::new(3).unwrap();
    let h = build_kitaev(&s, 1.0, 0.5, 0.1);
    let es = Eigensystem::new(&h).unwrap();
    let (_, xb) = build_collective_x(&s, 1.0);
    let got = heisenberg_reversed(&xb, &es, 0.8);
    assert!(max_norm(&(&got + got.adjoint())) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn canonical_anticommutation(n in 2usize..=6) {
        let s = FockSpace::new(n).unwrap();
        let a = s.annihilation_ops();
        let id = s.identity();
        for i in 0..n {
            for j in 0..n {
                let cc = anticommutator(&a[i], &a[j]);
                prop_assert!(max_norm(&cc) < 1e-14);
                let cd = anticommutator(&a[i], &a[j].adjoint());
                let want = if i == j { id.clone() } else { s.zeros() };
                prop_assert!(max_norm(&(cd - want)) < 1e-14);
            }
        }
    }

    #[test]
    fn majoranas_square_to_identity(n in 2usize..=5) {
        let s = FockSpace::new(n).unwrap();
        let m = s.majorana_ops();
        for (k, a) in m.iter().enumerate() {
            prop_assert!(max_norm(&(a * a - s.identity())) < 1e-14);
            for b in &m[k + 1..] {
                prop_assert!(max_norm(&anticommutator(a, b)) < 1e-14);
            }
        }
    }

    #[test]
    fn reversed_evolution_matches_expm_for_random_chains(
        delta in 0.05f64..1.5,
        mu in -1.0f64..1.0,
        tau in 0.0f64..10.0,
    ) {
        let s = FockSpace::new(3).unwrap();
        let h = build_kitaev(&s, 1.0, delta, mu);
        let es = Eigensystem::new(&h).unwrap();
        let (xa, xb) = build_collective_x(&s, 1.0);
        for x in [&xa, &xb] {
            let err = max_norm(&(heisenberg_reversed(x, &es, tau) - reversed_by_expm(x, &h, tau)));
            prop_assert!(err < 1e-10);
        }
    }

    #[test]
    fn theta_is_linear_in_rho(w in 0.0f64..1.0, i in 0usize..16, j in 0usize..16) {
        let s = FockSpace::new(4).unwrap();
        let pair = majorana_edge_modes(&s, &ChainParams::default(), 1.0).unwrap();
        let r1 = DensityMatrix::pure(&s.basis_state(i)).unwrap();
        let plus = (s.basis_state(i) + s.basis_state(j)) / c(if i == j { 2.0 } else { 2f64.sqrt() });
        let r2 = DensityMatrix::pure(&plus).unwrap();
        let mix = r1.matrix() * c(w) + r2.matrix() * c(1.0 - w);
        let lhs = theta(&mix, &pair).unwrap();
        let rhs = w * theta(r1.matrix(), &pair).unwrap() + (1.0 - w) * theta(r2.matrix(), &pair).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-13);
        prop_assert!(lhs.abs() <= 1.0 + 1e-12);
    }
}

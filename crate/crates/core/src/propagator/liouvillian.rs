//! Right-hand sides `dρ/dt` for the four evolution variants.
//!
//! Inputs are plain operators, so RK4 stage points need not be valid
//! density matrices.

use num_complex::Complex64;

use crate::fockspace::{commutator, hermitian_part, Operator};

const MINUS_I: Complex64 = Complex64 { re: 0.0, im: -1.0 };

/// `-i[H, ρ]`, symmetrized.
pub fn liouvillian_unitary(rho: &Operator, h: &Operator) -> Operator {
    hermitian_part(&(commutator(h, rho) * MINUS_I))
}

/// `[X_a, K_a ρ] - [X_b, K_b ρ]`.
fn dissipator_core(
    rho: &Operator,
    x_a: &Operator,
    x_b: &Operator,
    k_a: &Operator,
    k_b: &Operator,
) -> Operator {
    let ka_rho = k_a * rho;
    let kb_rho = k_b * rho;
    commutator(x_a, &ka_rho) - commutator(x_b, &kb_rho)
}

fn with_dissipator(rho: &Operator, h: &Operator, core: Operator, b: f64) -> Operator {
    let mut out = commutator(h, rho) * MINUS_I;
    let dissipator = &core + core.adjoint();
    out -= dissipator * Complex64::new(b * b, 0.0);
    hermitian_part(&out)
}

/// Full-memory polaron master equation with operator kernels `K_a`, `K_b`.
pub fn liouvillian_full(
    rho: &Operator,
    h_sys: &Operator,
    x_a: &Operator,
    x_b: &Operator,
    k_a: &Operator,
    k_b: &Operator,
    b: f64,
) -> Operator {
    with_dissipator(rho, h_sys, dissipator_core(rho, x_a, x_b, k_a, k_b), b)
}

/// Markovian limit `X(-τ) ≈ X`, kernels reduce to `c_a X_a`, `c_b X_b`.
pub fn liouvillian_markovian(
    rho: &Operator,
    h_sys: &Operator,
    x_a: &Operator,
    x_b: &Operator,
    c_a: Complex64,
    c_b: Complex64,
    b: f64,
) -> Operator {
    let k_a = x_a * c_a;
    let k_b = x_b * c_b;
    with_dissipator(rho, h_sys, dissipator_core(rho, x_a, x_b, &k_a, &k_b), b)
}

/// Site dephasing `rate Σ_l (n_l ρ n_l - ½{n_l², ρ})`.
pub fn liouvillian_lindblad(
    rho: &Operator,
    h_sys: &Operator,
    rate: f64,
    number_ops: &[Operator],
) -> Operator {
    let mut out = commutator(h_sys, rho) * MINUS_I;
    if rate != 0.0 {
        let mut d = Operator::zeros(rho.nrows(), rho.ncols());
        for n in number_ops {
            let n2 = n * n;
            d += n * rho * n - (&n2 * rho + rho * &n2) * Complex64::new(0.5, 0.0);
        }
        out += d * Complex64::new(rate, 0.0);
    }
    hermitian_part(&out)
}

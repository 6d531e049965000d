//! Majorana edge correlation and density-matrix health metrics.

use num_complex::Complex64;
use thiserror::Error;

use crate::chain::MajoranaPair;
use crate::fockspace::{
    hermitian_part, hermiticity_defect, trace_product, Eigensystem, FockSpace, Operator,
};

/// Imaginary residue of θ above which a result is reported as suspect.
pub const THETA_IMAG_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("density matrix has dimension {got}, operators have {expected}")]
    Dimension { expected: usize, got: usize },
}

/// `Tr(ρ O)`.
pub fn expectation(rho: &Operator, op: &Operator) -> Complex64 {
    trace_product(rho, op)
}

/// `-i Tr(ρ γ_L γ_R)` before discarding the imaginary residue.
pub fn theta_complex(rho: &Operator, pair: &MajoranaPair) -> Result<Complex64, ObservableError> {
    let expected = pair.gamma_left.nrows();
    if rho.nrows() != expected || rho.ncols() != expected {
        return Err(ObservableError::Dimension {
            expected,
            got: rho.nrows(),
        });
    }
    Ok(expectation(rho, &pair.correlation_operator()))
}

/// Majorana edge correlation θ = Re[-i Tr(ρ γ_L γ_R)].
pub fn theta(rho: &Operator, pair: &MajoranaPair) -> Result<f64, ObservableError> {
    Ok(theta_complex(rho, pair)?.re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HealthReport {
    pub trace_error: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub purity: f64,
    pub parity: f64,
}

pub fn health(rho: &Operator, space: &FockSpace) -> HealthReport {
    health_with_parity(rho, &space.parity())
}

/// As [`health`] with a precomputed parity operator.
pub fn health_with_parity(rho: &Operator, parity: &Operator) -> HealthReport {
    let sym = hermitian_part(rho);
    let es = Eigensystem::from_hermitian(&sym);
    HealthReport {
        trace_error: (rho.trace() - Complex64::new(1.0, 0.0)).norm(),
        hermiticity_defect: hermiticity_defect(rho),
        min_eigenvalue: es.eigenvalues[0],
        purity: trace_product(&sym, &sym).re,
        parity: expectation(rho, parity).re,
    }
}

/// Infinite-time average of `Tr(ρ(t) O)` under unitary flow with `es`:
/// coherences between distinct energies dephase, blocks of levels closer
/// than `degeneracy_tol` keep their internal coherences.
pub fn dephased_average(
    rho: &Operator,
    es: &Eigensystem,
    op: &Operator,
    degeneracy_tol: f64,
) -> Result<Complex64, ObservableError> {
    let dim = es.dim();
    for m in [rho, op] {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(ObservableError::Dimension {
                expected: dim,
                got: m.nrows(),
            });
        }
    }
    let r = es.to_eigenbasis(rho);
    let o = es.to_eigenbasis(op);
    let mut block = vec![0usize; dim];
    for i in 1..dim {
        let gap = es.eigenvalues[i] - es.eigenvalues[i - 1];
        block[i] = block[i - 1] + usize::from(gap > degeneracy_tol);
    }
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            if block[i] == block[j] {
                total += r[(i, j)] * o[(j, i)];
            }
        }
    }
    Ok(total)
}

/// Site occupations ⟨n_l⟩, `l = 1..N`.
pub fn occupations(rho: &Operator, space: &FockSpace) -> Vec<f64> {
    (0..space.n_sites())
        .map(|l| {
            let bit = 1usize << l;
            (0..space.dim())
                .filter(|s| s & bit != 0)
                .map(|s| rho[(s, s)].re)
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{
        build_kitaev, initial_ground_state, majorana_edge_modes, ChainParams, DensityMatrix,
        DEFAULT_GROUND_GAP,
    };

    fn ideal_setup() -> (FockSpace, MajoranaPair, Operator) {
        let s = FockSpace::new(4).unwrap();
        let pair = majorana_edge_modes(&s, &ChainParams::default(), 1.0).unwrap();
        let h = build_kitaev(&s, 1.0, 1.0, 0.0);
        (s, pair, h)
    }

    #[test]
    fn theta_of_doublet_members() {
        let (s, pair, h) = ideal_setup();
        let rho = initial_ground_state(&h, &pair, DEFAULT_GROUND_GAP).unwrap();
        assert!((theta(rho.matrix(), &pair).unwrap() - 1.0).abs() < 1e-10);

        // γ_L maps one doublet member onto the other.
        let flipped = &pair.gamma_left * rho.matrix() * &pair.gamma_left;
        assert!((theta(&flipped, &pair).unwrap() + 1.0).abs() < 1e-10);

        let mixed = DensityMatrix::maximally_mixed(&s);
        assert!(theta(mixed.matrix(), &pair).unwrap().abs() < 1e-14);
    }

    #[test]
    fn theta_rejects_dimension_mismatch() {
        let (_, pair, _) = ideal_setup();
        let small = Operator::identity(4, 4);
        assert!(theta(&small, &pair).is_err());
    }

    #[test]
    fn health_of_pure_and_mixed_states() {
        let (s, pair, h) = ideal_setup();
        let rho = initial_ground_state(&h, &pair, DEFAULT_GROUND_GAP).unwrap();
        let r = health(rho.matrix(), &s);
        assert!((r.purity - 1.0).abs() < 1e-10);
        assert!(r.trace_error < 1e-10);
        assert!(r.min_eigenvalue.abs() < 1e-10);
        let mixed = DensityMatrix::maximally_mixed(&s);
        let r = health(mixed.matrix(), &s);
        assert!((r.purity - 1.0 / 16.0).abs() < 1e-14);
        assert!(r.parity.abs() < 1e-14);
    }

    #[test]
    fn occupation_values() {
        let (s, pair, h) = ideal_setup();
        let vac = DensityMatrix::pure(&s.basis_state(0)).unwrap();
        assert!(occupations(vac.matrix(), &s).iter().all(|&n| n == 0.0));
        let full = DensityMatrix::pure(&s.basis_state(s.dim() - 1)).unwrap();
        assert!(occupations(full.matrix(), &s)
            .iter()
            .all(|&n| (n - 1.0).abs() < 1e-15));
        let ground = initial_ground_state(&h, &pair, DEFAULT_GROUND_GAP).unwrap();
        for n in occupations(ground.matrix(), &s) {
            assert!((n - 0.5).abs() < 1e-10, "{n}");
        }
    }

    #[test]
    fn dephased_average_of_nondegenerate_spectrum() {
        let s = FockSpace::new(3).unwrap();
        let h = build_kitaev(&s, 1.0, 0.4, 0.3);
        let es = Eigensystem::new(&h).unwrap();
        let psi = s.basis_state(0b011);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let n1 = s.number(1).unwrap();
        let got = dephased_average(rho.matrix(), &es, &n1, 1e-9).unwrap();
        let mut want = 0.0;
        for n in 0..es.dim() {
            let v = es.eigenvectors.column(n);
            let overlap = v.dotc(&psi).norm_sqr();
            let diag = (v.adjoint() * &n1 * v)[(0, 0)].re;
            want += overlap * diag;
        }
        assert!((got.re - want).abs() < 1e-12);
        assert!(got.im.abs() < 1e-12);
    }

    #[test]
    fn dephased_average_keeps_degenerate_coherence() {
        // At the ideal point θ is conserved although the doublet is degenerate.
        let (_, pair, h) = ideal_setup();
        let rho = initial_ground_state(&h, &pair, DEFAULT_GROUND_GAP).unwrap();
        let es = Eigensystem::new(&h).unwrap();
        let avg = dephased_average(rho.matrix(), &es, &pair.correlation_operator(), 1e-9).unwrap();
        assert!((avg.re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn truncated_modes_track_localized_modes() {
        // Edge-truncated coefficient vectors give θ within the discarded weight.
        let s = FockSpace::new(4).unwrap();
        let params = ChainParams {
            mu: 0.3,
            ..ChainParams::default()
        };
        let pair = majorana_edge_modes(&s, &params, 1.0).unwrap();
        let truncated = pair.edge_truncated(&s).unwrap();
        let h = build_kitaev(&s, 1.0, 1.0, 0.3);
        let rho = initial_ground_state(&h, &pair, DEFAULT_GROUND_GAP).unwrap();
        let full = theta(rho.matrix(), &pair).unwrap();
        let trunc = theta(rho.matrix(), &truncated).unwrap();
        let w = pair.truncation_weight();
        assert!(w > 0.0);
        assert!((full - trunc).abs() <= 2.0 * w.sqrt(), "{full} {trunc} {w}");
    }
}

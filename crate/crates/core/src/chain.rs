//! Kitaev chain Hamiltonians, collective pair operators, Majorana edge modes
//! and the initial ground state.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use thiserror::Error;

use crate::fockspace::{
    hermiticity_defect, max_norm, trace_product, Eigensystem, FockError, FockSpace, Operator,
    StateVector,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("invalid chain parameter {name} = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(
        "no isolated Majorana pair: lowest single-particle energy {zero_mode:.3e}, \
         bulk gap {bulk_gap:.3e}"
    )]
    ModeFinding { zero_mode: f64, bulk_gap: f64 },
    #[error(
        "ground doublet not isolated: gap to third level {gap:.3e} <= threshold {threshold:.3e}"
    )]
    Degeneracy { gap: f64, threshold: f64 },
    #[error("density matrix invalid: {0}")]
    InvalidDensity(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// Tunneling amplitude; sets the energy unit of a run.
    pub j: f64,
    /// Bare pairing amplitude.
    pub delta: f64,
    pub mu: f64,
    /// Nearest-neighbour density-density interaction.
    pub u: f64,
    pub n_sites: usize,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            j: 1.0,
            delta: 1.0,
            mu: 0.0,
            u: 0.0,
            n_sites: 4,
        }
    }
}

impl ChainParams {
    pub fn validate(&self) -> Result<(), ChainError> {
        for (name, value) in [
            ("j", self.j),
            ("delta", self.delta),
            ("mu", self.mu),
            ("u", self.u),
        ] {
            if !value.is_finite() {
                return Err(ChainError::Parameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        if self.j <= 0.0 {
            return Err(ChainError::Parameter {
                name: "j",
                value: self.j,
                reason: "must be positive",
            });
        }
        FockSpace::new(self.n_sites)?;
        Ok(())
    }

    /// `|μ| < 2J` and `Δ ≠ 0`.
    pub fn is_topological(&self) -> bool {
        self.mu.abs() < 2.0 * self.j && self.delta != 0.0
    }

    pub fn space(&self) -> Result<FockSpace, ChainError> {
        Ok(FockSpace::new(self.n_sites)?)
    }
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `sum_l [(-J c_l† c_{l+1} + Δ c_{l+1}† c_l†) + H.c.] - μ sum_l n_l` with open
/// boundaries.
pub fn build_kitaev(space: &FockSpace, j: f64, delta_eff: f64, mu: f64) -> Operator {
    let c = space.annihilation_ops();
    let mut h = space.zeros();
    for l in 0..space.n_sites() - 1 {
        let hop = c[l].adjoint() * &c[l + 1] * re(-j);
        let pair = c[l + 1].adjoint() * c[l].adjoint() * re(delta_eff);
        let bond = hop + pair;
        h += &bond + bond.adjoint();
    }
    for n in space.number_ops() {
        h -= n * re(mu);
    }
    h
}

/// `U sum_l (n_l - 1/2)(n_{l+1} - 1/2)`; diagonal in the occupation basis.
pub fn build_interaction(space: &FockSpace, u: f64) -> Operator {
    let mut h = space.zeros();
    for state in 0..space.dim() {
        let occ = |l: usize| if state & (1 << l) != 0 { 0.5 } else { -0.5 };
        let e: f64 = (0..space.n_sites() - 1).map(|l| occ(l) * occ(l + 1)).sum();
        h[(state, state)] = re(u * e);
    }
    h
}

/// Collective operators of the polaron interaction:
/// `X_a = -J sum (c_l† c_{l+1}† + c_{l+1} c_l)` (Hermitian) and
/// `X_b =  J sum (c_l† c_{l+1}† - c_{l+1} c_l)` (anti-Hermitian).
pub fn build_collective_x(space: &FockSpace, j: f64) -> (Operator, Operator) {
    let c = space.annihilation_ops();
    let mut create = space.zeros();
    for l in 0..space.n_sites() - 1 {
        create += c[l].adjoint() * c[l + 1].adjoint();
    }
    let annihilate = create.adjoint();
    let x_a = (&create + &annihilate) * re(-j);
    let x_b = (&create - &annihilate) * re(j);
    (x_a, x_b)
}

/// Real antisymmetric single-particle matrix `A` of the quadratic Kitaev
/// Hamiltonian, `H = (i/4) sum_{jk} A_jk a_j a_k + const`, so that
/// `[H, a_k] = -i sum_l A_kl a_l`. Majorana index `2l-2` is `c_l + c_l†`
/// and `2l-1` is `-i(c_l - c_l†)` (0-based).
pub fn majorana_matrix(n_sites: usize, j: f64, delta_eff: f64, mu: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(2 * n_sites, 2 * n_sites);
    let mut set = |p: usize, q: usize, v: f64| {
        a[(p, q)] += v;
        a[(q, p)] -= v;
    };
    for l in 0..n_sites {
        set(2 * l, 2 * l + 1, -mu);
    }
    for l in 0..n_sites - 1 {
        let m = l + 1;
        set(2 * l, 2 * m + 1, delta_eff - j);
        set(2 * m, 2 * l + 1, -(j + delta_eff));
    }
    a
}

#[derive(Debug, Clone)]
pub struct MajoranaPair {
    pub f_left: Vec<f64>,
    pub f_right: Vec<f64>,
    pub gamma_left: Operator,
    pub gamma_right: Operator,
    /// Single-particle energy of the edge pair.
    pub zero_mode_energy: f64,
    /// Lowest bulk single-particle energy.
    pub bulk_gap: f64,
}

impl MajoranaPair {
    /// Builds `γ = sum_j f_j a_j` for both coefficient vectors.
    pub fn from_coefficients(
        space: &FockSpace,
        f_left: Vec<f64>,
        f_right: Vec<f64>,
    ) -> Result<Self, ChainError> {
        let n = 2 * space.n_sites();
        if f_left.len() != n || f_right.len() != n {
            return Err(ChainError::Fock(FockError::Dimension {
                expected: n,
                got: f_left.len().max(f_right.len()),
            }));
        }
        let a = space.majorana_ops();
        let combine = |f: &[f64]| {
            let mut g = space.zeros();
            for (fj, aj) in f.iter().zip(&a) {
                if *fj != 0.0 {
                    g += aj * re(*fj);
                }
            }
            g
        };
        Ok(Self {
            gamma_left: combine(&f_left),
            gamma_right: combine(&f_right),
            f_left,
            f_right,
            zero_mode_energy: 0.0,
            bulk_gap: f64::NAN,
        })
    }

    /// Hermitian operator `-i γ_L γ_R` whose expectation is the edge correlation θ.
    pub fn correlation_operator(&self) -> Operator {
        &self.gamma_left * &self.gamma_right * Complex64::new(0.0, -1.0)
    }

    /// Copy of the pair with coefficients truncated to the outermost sites
    /// (Majorana indices of sites 1 and N) and renormalized.
    pub fn edge_truncated(&self, space: &FockSpace) -> Result<Self, ChainError> {
        let n = self.f_left.len();
        let keep = |f: &[f64]| {
            let mut out = vec![0.0; n];
            for idx in [0, 1, n - 2, n - 1] {
                out[idx] = f[idx];
            }
            let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.iter_mut().for_each(|x| *x /= norm);
            }
            out
        };
        Self::from_coefficients(space, keep(&self.f_left), keep(&self.f_right))
    }

    /// Coefficient weight discarded by [`Self::edge_truncated`], max over L/R.
    pub fn truncation_weight(&self) -> f64 {
        let n = self.f_left.len();
        let inner = |f: &[f64]| -> f64 { f[2..n - 2].iter().map(|x| x * x).sum() };
        inner(&self.f_left).max(inner(&self.f_right))
    }
}

/// Largest ratio of edge-pair energy to bulk gap accepted as an isolated pair.
pub const MAX_ZERO_MODE_RATIO: f64 = 0.5;

/// Edge Majorana pair of the quadratic chain `(J, delta_eff, μ)`.
///
/// The two single-particle modes of smallest |ε| are rotated into the
/// combinations with maximal left/right half-chain weight. The sign of
/// `f_left` makes its largest entry positive; the sign of `f_right` makes
/// θ = +1 in the even-parity ground state.
pub fn majorana_edge_modes(
    space: &FockSpace,
    params: &ChainParams,
    delta_eff: f64,
) -> Result<MajoranaPair, ChainError> {
    let n = space.n_sites();
    let a = majorana_matrix(n, params.j, delta_eff, params.mu);
    let gram = a.transpose() * &a;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let energy = |k: usize| eig.eigenvalues[order[k]].max(0.0).sqrt();
    let zero_mode = energy(0).max(energy(1));
    let bulk_gap = energy(2);
    let topological = params.mu.abs() < 2.0 * params.j && delta_eff != 0.0;
    if !topological || zero_mode >= MAX_ZERO_MODE_RATIO * bulk_gap {
        return Err(ChainError::ModeFinding {
            zero_mode,
            bulk_gap,
        });
    }

    let u1 = eig.eigenvectors.column(order[0]).into_owned();
    let u2 = eig.eigenvectors.column(order[1]).into_owned();

    // Left-minus-right weight operator; the middle site of odd chains counts zero.
    let side = |idx: usize| -> f64 {
        let site2 = 2 * (idx / 2) + 1; // 2 * site (0-based) + 1
        if site2 < n {
            1.0
        } else if site2 > n {
            -1.0
        } else {
            0.0
        }
    };
    let weighted = |x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>| -> f64 {
        (0..2 * n).map(|k| side(k) * x[k] * y[k]).sum()
    };
    let m = Matrix2::new(
        weighted(&u1, &u1),
        weighted(&u1, &u2),
        weighted(&u2, &u1),
        weighted(&u2, &u2),
    );
    let rot = m.symmetric_eigen();
    let (hi, lo) = if rot.eigenvalues[0] >= rot.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let mix = |k: usize| -> Vec<f64> {
        let v = &u1 * rot.eigenvectors[(0, k)] + &u2 * rot.eigenvectors[(1, k)];
        let norm = v.norm();
        v.iter().map(|x| x / norm).collect()
    };
    let mut f_left = mix(hi);
    let mut f_right = mix(lo);
    let lead = f_left.iter().copied().fold(
        0.0f64,
        |best, x| if x.abs() > best.abs() { x } else { best },
    );
    if lead < 0.0 {
        f_left.iter_mut().for_each(|x| *x = -*x);
    }

    let mut pair = MajoranaPair::from_coefficients(space, f_left.clone(), f_right.clone())?;
    let h = build_kitaev(space, params.j, delta_eff, params.mu);
    let even_ground = sector_ground_state(space, &h, true);
    let theta_even = trace_product(
        &(&even_ground * even_ground.adjoint()),
        &pair.correlation_operator(),
    )
    .re;
    if theta_even < 0.0 {
        f_right.iter_mut().for_each(|x| *x = -*x);
        pair = MajoranaPair::from_coefficients(space, f_left, f_right)?;
    }
    pair.zero_mode_energy = zero_mode;
    pair.bulk_gap = bulk_gap;
    Ok(pair)
}

/// Lowest eigenvector of `h` restricted to one global-parity sector.
fn sector_ground_state(space: &FockSpace, h: &Operator, even: bool) -> StateVector {
    let states: Vec<usize> = (0..space.dim())
        .filter(|s| (s.count_ones() % 2 == 0) == even)
        .collect();
    let k = states.len();
    let mut block = Operator::zeros(k, k);
    for (r, &sr) in states.iter().enumerate() {
        for (c, &sc) in states.iter().enumerate() {
            block[(r, c)] = h[(sr, sc)];
        }
    }
    let es = Eigensystem::from_hermitian(&crate::fockspace::hermitian_part(&block));
    let mut psi = StateVector::zeros(space.dim());
    for (r, &sr) in states.iter().enumerate() {
        psi[sr] = es.eigenvectors[(r, 0)];
    }
    psi
}

/// Validated density matrix: Hermitian, unit trace, non-negative spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub const TOLERANCE: f64 = 1e-10;
    pub const MIN_EIGENVALUE: f64 = -1e-8;

    pub fn new(rho: Operator) -> Result<Self, ChainError> {
        if rho.nrows() != rho.ncols() {
            return Err(ChainError::InvalidDensity("not square".into()));
        }
        let defect = hermiticity_defect(&rho);
        if defect > Self::TOLERANCE {
            return Err(ChainError::InvalidDensity(format!(
                "Hermiticity defect {defect:.3e}"
            )));
        }
        let trace = rho.trace();
        if (trace - re(1.0)).norm() > Self::TOLERANCE {
            return Err(ChainError::InvalidDensity(format!("trace {trace}")));
        }
        let es = Eigensystem::from_hermitian(&crate::fockspace::hermitian_part(&rho));
        let min = es.eigenvalues[0];
        if min < Self::MIN_EIGENVALUE {
            return Err(ChainError::InvalidDensity(format!(
                "minimum eigenvalue {min:.3e}"
            )));
        }
        Ok(Self(rho))
    }

    pub fn pure(psi: &StateVector) -> Result<Self, ChainError> {
        let norm = psi.norm();
        let psi = psi / re(norm);
        Self::new(&psi * psi.adjoint())
    }

    pub fn maximally_mixed(space: &FockSpace) -> Self {
        Self(space.identity() / re(space.dim() as f64))
    }

    pub fn matrix(&self) -> &Operator {
        &self.0
    }

    pub fn into_matrix(self) -> Operator {
        self.0
    }
}

impl AsRef<Operator> for DensityMatrix {
    fn as_ref(&self) -> &Operator {
        &self.0
    }
}

/// Default doublet isolation threshold, in units of the eigenvalue scale of `H`.
pub const DEFAULT_GROUND_GAP: f64 = 1e-6;

/// Pure state of the ground doublet of `h_init` with maximal θ.
///
/// `-iγ_Lγ_R` is diagonalized inside the span of the two lowest eigenstates
/// and the eigenvector of its largest eigenvalue is returned.
pub fn initial_ground_state(
    h_init: &Operator,
    pair: &MajoranaPair,
    gap_threshold: f64,
) -> Result<DensityMatrix, ChainError> {
    let es = Eigensystem::new(h_init)?;
    if es.dim() < 3 {
        return Err(ChainError::Degeneracy {
            gap: 0.0,
            threshold: gap_threshold,
        });
    }
    let gap = es.eigenvalues[2] - es.eigenvalues[1];
    if gap <= gap_threshold {
        return Err(ChainError::Degeneracy {
            gap,
            threshold: gap_threshold,
        });
    }
    let ground = es.eigenvectors.columns(0, 2).into_owned();
    let o = pair.correlation_operator();
    let restricted = ground.adjoint() * &o * &ground;
    let local = Eigensystem::from_hermitian(&crate::fockspace::hermitian_part(&restricted));
    let coeffs = local.eigenvectors.column(1).into_owned();
    let psi = ground * coeffs;
    DensityMatrix::pure(&psi)
}

/// Max-norm of `[a, b]`.
pub fn commutator_norm(a: &Operator, b: &Operator) -> f64 {
    max_norm(&(a * b - b * a))
}

//! Many-body Fock space of `N` spinless fermionic sites.
//!
//! Basis states are occupation bitstrings in ascending integer order, with
//! bit `l - 1` holding the occupation of site `l`. Fermionic operators carry
//! a Jordan–Wigner sign string over all sites with a smaller index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex operator acting on a [`FockSpace`].
pub type Operator = DMatrix<Complex64>;

/// Dense complex state vector.
pub type StateVector = DVector<Complex64>;

pub const MIN_SITES: usize = 2;
/// Dense-matrix feasibility bound (dimension 4096).
pub const MAX_SITES: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("n_sites = {0} outside the supported range [{MIN_SITES}, {MAX_SITES}]")]
    SiteCount(usize),
    #[error("site index {site} out of range 1..={n_sites}")]
    SiteIndex { site: usize, n_sites: usize },
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("operator dimension {got} does not match space dimension {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpace {
    n_sites: usize,
}

impl FockSpace {
    pub fn new(n_sites: usize) -> Result<Self, FockError> {
        if !(MIN_SITES..=MAX_SITES).contains(&n_sites) {
            return Err(FockError::SiteCount(n_sites));
        }
        Ok(Self { n_sites })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.dim(), self.dim())
    }

    pub fn zeros(&self) -> Operator {
        Operator::zeros(self.dim(), self.dim())
    }

    /// Occupation-basis vector for the bitstring `occupation`.
    pub fn basis_state(&self, occupation: usize) -> StateVector {
        let mut v = StateVector::zeros(self.dim());
        v[occupation] = ONE;
        v
    }

    fn check_site(&self, site: usize) -> Result<usize, FockError> {
        if site == 0 || site > self.n_sites {
            return Err(FockError::SiteIndex {
                site,
                n_sites: self.n_sites,
            });
        }
        Ok(site - 1)
    }

    /// Annihilation operator `c_site` (1-based site index).
    pub fn annihilation(&self, site: usize) -> Result<Operator, FockError> {
        let bit = 1usize << self.check_site(site)?;
        let string_mask = bit - 1;
        let mut c = self.zeros();
        for state in 0..self.dim() {
            if state & bit != 0 {
                let sign = if (state & string_mask).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                c[(state ^ bit, state)] = Complex64::new(sign, 0.0);
            }
        }
        Ok(c)
    }

    pub fn creation(&self, site: usize) -> Result<Operator, FockError> {
        Ok(self.annihilation(site)?.adjoint())
    }

    /// Number operator `n_site = c†c`, diagonal in the occupation basis.
    pub fn number(&self, site: usize) -> Result<Operator, FockError> {
        let bit = 1usize << self.check_site(site)?;
        let mut n = self.zeros();
        for state in 0..self.dim() {
            if state & bit != 0 {
                n[(state, state)] = ONE;
            }
        }
        Ok(n)
    }

    /// All annihilation operators `c_1 .. c_N`.
    pub fn annihilation_ops(&self) -> Vec<Operator> {
        (1..=self.n_sites)
            .map(|l| self.annihilation(l).expect("site in range"))
            .collect()
    }

    pub fn number_ops(&self) -> Vec<Operator> {
        (1..=self.n_sites)
            .map(|l| self.number(l).expect("site in range"))
            .collect()
    }

    /// Global fermion parity `P = prod_l (1 - 2 n_l)`.
    pub fn parity(&self) -> Operator {
        let mut p = self.zeros();
        for state in 0..self.dim() {
            p[(state, state)] = if state.count_ones() % 2 == 0 {
                ONE
            } else {
                -ONE
            };
        }
        p
    }

    /// Majorana operators `a_1 .. a_2N` with `a_{2j-1} = c_j + c_j†` and
    /// `a_{2j} = -i (c_j - c_j†)`.
    pub fn majorana_ops(&self) -> Vec<Operator> {
        let i = Complex64::new(0.0, 1.0);
        let mut out = Vec::with_capacity(2 * self.n_sites);
        for c in self.annihilation_ops() {
            let cd = c.adjoint();
            out.push(&c + &cd);
            out.push((&c - &cd) * (-i));
        }
        out
    }

    pub fn check_operator(&self, op: &Operator) -> Result<(), FockError> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(FockError::Dimension {
                expected: self.dim(),
                got: op.nrows().max(op.ncols()),
            });
        }
        Ok(())
    }
}

/// Largest entry modulus.
pub fn max_norm(op: &Operator) -> f64 {
    op.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `max |A - A†|`.
pub fn hermiticity_defect(op: &Operator) -> f64 {
    let n = op.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((op[(r, c)] - op[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Operator {
    a * b + b * a
}

/// `(A + A†) / 2`.
pub fn hermitian_part(op: &Operator) -> Operator {
    (op + op.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &Operator, b: &Operator) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for r in 0..n {
        for c in 0..n {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

/// Spectral decomposition `H = V diag(λ) V†` of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub eigenvectors: Operator,
}

impl Eigensystem {
    pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

    pub fn new(h: &Operator) -> Result<Self, FockError> {
        if h.nrows() != h.ncols() {
            return Err(FockError::Dimension {
                expected: h.nrows(),
                got: h.ncols(),
            });
        }
        let defect = hermiticity_defect(h);
        if defect > Self::HERMITIAN_TOLERANCE * max_norm(h).max(1.0) {
            return Err(FockError::NotHermitian(defect));
        }
        Ok(Self::from_hermitian(&hermitian_part(h)))
    }

    /// Decomposes a matrix already known to be Hermitian.
    pub(crate) fn from_hermitian(h: &Operator) -> Self {
        let eig = h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..h.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut eigenvectors = Operator::zeros(h.nrows(), h.ncols());
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> Operator {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(lambda);
        }
        scaled * v.adjoint()
    }

    /// `V† X V`.
    pub fn to_eigenbasis(&self, x: &Operator) -> Operator {
        self.eigenvectors.adjoint() * x * &self.eigenvectors
    }

    /// `V X V†`.
    pub fn from_eigenbasis(&self, x: &Operator) -> Operator {
        &self.eigenvectors * x * self.eigenvectors.adjoint()
    }
}

/// Cached `V† X V` for repeated evaluation of `X(-τ) = e^{-iHτ} X e^{iHτ}`.
#[derive(Debug, Clone)]
pub struct ReversedEvolution<'a> {
    es: &'a Eigensystem,
    x_eig: Operator,
}

impl<'a> ReversedEvolution<'a> {
    pub fn new(x: &Operator, es: &'a Eigensystem) -> Self {
        Self {
            es,
            x_eig: es.to_eigenbasis(x),
        }
    }

    pub fn at(&self, tau: f64) -> Operator {
        let phases: Vec<Complex64> = self
            .es
            .eigenvalues
            .iter()
            .map(|&lambda| Complex64::from_polar(1.0, -lambda * tau))
            .collect();
        let n = self.x_eig.nrows();
        let mut rotated = self.x_eig.clone();
        for c in 0..n {
            for r in 0..n {
                rotated[(r, c)] *= phases[r] * phases[c].conj();
            }
        }
        self.es.from_eigenbasis(&rotated)
    }
}

/// Time-reversed Heisenberg evolution `V e^{-iΛτ} V† X V e^{iΛτ} V†`.
pub fn heisenberg_reversed(x: &Operator, es: &Eigensystem, tau: f64) -> Operator {
    ReversedEvolution::new(x, es).at(tau)
}

//! Assembly of everything a trajectory needs: renormalized Hamiltonian,
//! collective operators, edge modes and the initial state.

use thiserror::Error;

use crate::bath::{franck_condon_b, BathError, BathParams};
use crate::chain::{
    build_collective_x, build_interaction, build_kitaev, initial_ground_state, majorana_edge_modes,
    ChainError, ChainParams, DensityMatrix, MajoranaPair, DEFAULT_GROUND_GAP,
};
use crate::fockspace::{Eigensystem, FockSpace, Operator};
use crate::observables::expectation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Bath(#[from] BathError),
}

impl From<crate::fockspace::FockError> for ModelError {
    fn from(e: crate::fockspace::FockError) -> Self {
        ModelError::Chain(e.into())
    }
}

/// Pairing of the Hamiltonian whose ground state starts the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialPairing {
    /// `Δ_init = Δ`.
    #[default]
    Bare,
    /// `Δ_init = Δ ⟨B⟩` evaluated with the bath at zero temperature.
    DressedZeroTemperature,
}

/// Which Hamiltonian defines the γ_L, γ_R used for θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeBasis {
    /// Edge modes of the initial Hamiltonian (θ(0) = 1 anchor).
    #[default]
    Initial,
    /// Edge modes of the renormalized Hamiltonian `Δ → Δ⟨B⟩`.
    Renormalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub initial_pairing: InitialPairing,
    pub mode_basis: ModeBasis,
    /// Minimum gap between the ground doublet and the third level, in units of J.
    pub ground_gap: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            initial_pairing: InitialPairing::Bare,
            mode_basis: ModeBasis::Initial,
            ground_gap: DEFAULT_GROUND_GAP,
        }
    }
}

/// Phonon-dressed Kitaev chain after the temperature quench.
#[derive(Debug, Clone)]
pub struct PolaronChain {
    pub space: FockSpace,
    pub chain: ChainParams,
    pub bath: BathParams,
    pub options: ModelOptions,
    /// Franck–Condon factor ⟨B⟩ at the bath temperature.
    pub b: f64,
    pub h_init: Operator,
    /// `H_p,s` with pairing `Δ⟨B⟩`, plus the interaction when `U ≠ 0`.
    pub h_sys: Operator,
    pub x_a: Operator,
    pub x_b: Operator,
    /// Spectral decomposition of `h_sys`.
    pub eigensystem: Eigensystem,
    pub pair: MajoranaPair,
    pub rho0: DensityMatrix,
    pub parity: Operator,
    pub number_ops: Vec<Operator>,
}

impl PolaronChain {
    pub fn build(
        chain: ChainParams,
        bath: BathParams,
        options: ModelOptions,
    ) -> Result<Self, ModelError> {
        chain.validate()?;
        bath.validate()?;
        let space = chain.space()?;
        let b = franck_condon_b(&bath)?;
        let delta_init = match options.initial_pairing {
            InitialPairing::Bare => chain.delta,
            InitialPairing::DressedZeroTemperature => {
                let cold = BathParams {
                    temperature: 0.0,
                    ..bath
                };
                chain.delta * franck_condon_b(&cold)?
            }
        };
        let h_init = build_kitaev(&space, chain.j, delta_init, chain.mu);
        let initial_pair = majorana_edge_modes(&space, &chain, delta_init)?;
        let rho0 = initial_ground_state(&h_init, &initial_pair, options.ground_gap * chain.j)?;
        let pair = match options.mode_basis {
            ModeBasis::Initial => initial_pair,
            ModeBasis::Renormalized => majorana_edge_modes(&space, &chain, chain.delta * b)?,
        };

        let mut h_sys = build_kitaev(&space, chain.j, chain.delta * b, chain.mu);
        if chain.u != 0.0 {
            h_sys += build_interaction(&space, chain.u);
        }
        let eigensystem = Eigensystem::new(&h_sys)?;
        // The polaron interaction couples to the bare pairing amplitude.
        let (x_a, x_b) = build_collective_x(&space, chain.delta);
        Ok(Self {
            space,
            chain,
            bath,
            options,
            b,
            h_init,
            h_sys,
            x_a,
            x_b,
            eigensystem,
            pair,
            rho0,
            parity: space.parity(),
            number_ops: space.number_ops(),
        })
    }

    /// Largest |eigenvalue| of `h_sys`.
    pub fn spectral_radius(&self) -> f64 {
        self.eigensystem
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()))
    }

    /// Global parity ⟨P⟩ of the initial state.
    pub fn initial_parity(&self) -> f64 {
        expectation(self.rho0.matrix(), &self.parity).re
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

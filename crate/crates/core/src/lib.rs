//! Non-Markovian polaron master-equation simulator for a phonon-dressed
//! Kitaev chain.

pub mod bath;
pub mod chain;
pub mod fockspace;
pub mod harness;
pub mod model;
pub mod observables;
pub mod propagator;
pub mod quadrature;

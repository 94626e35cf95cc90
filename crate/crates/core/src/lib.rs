//! Simulation and estimation toolkit for phase-randomized two-mode squeezed
//! light: Fock-space state algebra, entanglement activation, homodyne data
//! simulation, pattern-function tomography and regularized P-function
//! sampling.

pub mod activation;
pub mod error;
pub mod filter;
pub mod fock;
pub mod gaussian;
pub mod quad;
pub mod quasiprob;
pub mod special;
pub mod tomography;

pub use activation::{FourModeDensityMatrix, Mode, WitnessReport};
pub use error::{Error, Result};
pub use fock::{
    CoherenceRule, PureTwoModeState, SingleModeDensityMatrix, Subsystem, TwoModeDensityMatrix,
};
pub use gaussian::{
    PhaseNoiseModel, PhaseSchedule, QuadratureDataset, Record, Source, SqueezingSpec,
    QUADRATURE_CONVENTION,
};

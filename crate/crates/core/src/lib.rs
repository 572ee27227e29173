//! Simulation and reconstruction toolkit for phase-randomized homodyne
//! tomography of a single-photon Fock state mixed with vacuum.
//!
//! The pipeline is: [`simulator::generate_run`] produces a vacuum reference
//! run and a Fock run in raw detector units; [`calibration::fit_vacuum`]
//! recovers the detector scale and origin from the vacuum run; the
//! [`reconstruction`] module fits the efficiency, reconstructs the
//! phase-averaged Wigner function through an inverse Abel transform and samples
//! density-matrix diagonals with pattern functions; [`budget::combine`]
//! predicts the efficiency from independent loss factors.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod calibration;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod quadrature;
pub mod reconstruction;
pub mod simulator;
pub mod states;

pub use error::{Error, Result};
pub use states::EfficiencyMixtureState;

// SPDX-License-Identifier: Apache-2.0

//! Driven chiral cavity coupled to pinned domain-wall oscillators.
//!
//! The pipeline runs mean-field roots ([`steadystate`]) through the linearized
//! fluctuation dynamics ([`linearized`]) to Gaussian entanglement measures
//! ([`entanglement`]). [`adiabatic`] eliminates the cavity, [`spectrum`]
//! computes output noise spectra and non-Hermitian eigenvalue branches, and
//! [`sweep`] runs the grids behind phase diagrams and thermal scans.

pub mod adiabatic;
pub mod cli;
pub mod entanglement;
pub mod error;
pub mod linearized;
pub mod material;
pub mod spectrum;
pub mod steadystate;
pub mod sweep;

pub use error::{Error, Result};
pub use steadystate::{ReducedCoords, SteadyStateRoot, SystemParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

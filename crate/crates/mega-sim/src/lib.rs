//! Numerical laboratory for constructing and validating minimal effective
//! Gibbs ensembles (MEGA) on small Fermi-Hubbard clusters.
//!
//! The pipeline is: enumerate particle-number sectors ([`fock`]), assemble
//! sparse Hamiltonians and observables ([`model`]), exactly diagonalize each
//! sector ([`eig`]), build Gibbs / microcanonical / pure-state ensembles and
//! make them stationary ([`ensemble`]), extract lesser and greater correlators
//! in the Lehmann (pole) representation or the time domain ([`corr`]), and fit
//! an effective inverse temperature and chemical potential from the
//! fluctuation-dissipation ratio ([`fit`]). Density-matrix diagnostics such as
//! partial traces and eigenstate-expectation scatter tables live in [`diag`].
//!
//! The `mega-sim` binary drives the same library from TOML experiment
//! configurations; see the crate README for the schema.

pub mod cache;
pub mod config;
pub mod corr;
pub mod diag;
pub mod eig;
pub mod ensemble;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod runner;

pub use error::{Error, Result};

//! Loewner chains, SLE variants and Gaussian free field couplings.
//!
//! The crate provides:
//! - Schwarz / Poisson / Green kernels in the half-plane, disc, strip and
//!   annulus under Dirichlet, Neumann and Riemann-Hilbert profiles
//!   ([`kernels`]);
//! - Loewner chain integration, trace extraction and the zipper algorithm
//!   ([`loewner`]);
//! - driving-process models for the SLE variants and Euler-Maruyama path
//!   sampling ([`sle`]);
//! - field means and covariances for the coupled free fields ([`fields`]);
//! - the verification harness: drift-identity residuals, Hadamard
//!   finite-difference checks, Monte Carlo martingale tests, the commutation
//!   functional and capacity checks ([`verify`]);
//! - discrete Gaussian free field sampling, level lines and coupling tests
//!   ([`dgff`]);
//! - a batch front-end with JSON configs ([`cli`]).
//!
//! See the crate examples for one runnable entry point per capability.

pub mod constants;
pub mod domain;
pub mod error;
pub mod kernels;
pub mod loewner;
pub mod sle;
pub mod fields;
pub mod verify;
pub mod dgff;
pub mod cli;

pub use domain::{BoundaryCondition, DomainKind, DomainSpec};
pub use error::{DgffError, FieldError, KernelError, LoewnerError, SleError, VerifyError};

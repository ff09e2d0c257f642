//! Thermofield-dynamics evolution of the damped Kerr medium.
//!
//! Density operators are vectors `|ρ⟩` in a doubled Fock space
//! ([`fock`]). The Kerr Liouvillian with symmetric two-photon damping is
//! written on the SU(2) generators `S0, S3, S±` of each mode ([`algebra`]),
//! each excitation sector is disentangled into normal-ordered Gauss factors
//! ([`disentangle`]), and the resulting matrix elements are summed in closed
//! form ([`propagator`]). [`oracle`] exponentiates the same generator
//! directly, sector by sector, and serves as the reference.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod algebra;
mod dd;
pub mod disentangle;
pub mod expm;
pub mod fock;
pub mod oracle;
pub mod propagator;

pub use num_complex::Complex64;

pub use algebra::{
    damped_oscillator_liouvillian, damped_su2_generator, damped_su2_generator_on, kerr_generator,
    ConfigError, Convention, SystemConfig, SystemParams, TildeOrdering,
};
pub use disentangle::{gauss_factorize, GaussFactors, Su2Coefficients};
pub use fock::{
    DoubledIndex, FockCutoff, FockError, LiouvilleState, Register, Space, SparseOperator,
};
pub use oracle::{evolve_exact, evolve_ode, BlockStrategy, OracleError, OracleOptions, Precision};
pub use propagator::{
    propagate_closed_form, propagate_closed_form_multimode, PropagateError, PropagationOptions,
};

//! Spin-s transverse-field Ising chains used as quantum sensors.
//!
//! The crate builds spin operators and chain Hamiltonians, evolves thermal
//! and pure states, evaluates quantum Fisher information and runs the
//! measure, evolve, encode and reverse sensing protocol.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod hamiltonian;
pub mod metrology;
pub mod output;
pub mod protocol;
pub mod randomstates;
pub mod spinops;
pub mod states;
pub mod validate;

pub use error::{Error, Result};
pub use num_complex::Complex64 as c64;

//! Verification and recovery tools for compressed sensing with overcomplete
//! dictionaries.
//!
//! The crate decides null space properties of a sensing matrix `A` relative
//! to a dictionary `D` (plain NSP, the dictionary NSP and its strong form),
//! computes spark, issues inadmissibility certificates, and runs ℓ¹-synthesis
//! recovery with and without noise. The [`experiments`] module turns each
//! structural claim into a seeded, reproducible sweep.

pub mod checkers;
pub mod dictionary;
pub mod experiments;
pub mod linalg;
pub mod lp;
pub mod matrix;
pub mod recovery;
pub mod rng;
pub mod serde_float;
pub mod support;

pub use matrix::DenseMatrix;
pub use support::SupportSet;

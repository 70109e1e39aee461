//! Carathéodory–Fejér type pointwise extremal problems for positive definite
//! functions.
//!
//! The extremal constants on `ℤ` and `ℤ_m` are computed by linear programming
//! over nonnegative Fourier data ([`solver_zm`], [`solver_z`]); problems on
//! finite products of `ℤ`, `ℝ`, `𝕋` and cyclic groups are reduced to those
//! discrete problems through the trace sets `{k : kz ∈ Ω}` ([`lca`]).

pub mod error;
pub mod factorize;
pub mod lca;
pub mod lp;
pub mod seq;
pub mod solver_z;
pub mod solver_zm;

pub use error::{Error, Result};

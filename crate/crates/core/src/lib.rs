// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Constant-modulus slow-time sequence design robust to target Doppler
//! mismatch, solved by alternating Riemannian trust-region steps on the
//! product-of-circles manifold.

pub mod error;
pub mod manifold;
pub mod objectives;
pub mod radar;
pub mod rcg;
pub mod rtr;
pub mod wrtr;

pub use error::{Error, Result};
pub use manifold::{TangentVector, UnitModulusSequence, C64};

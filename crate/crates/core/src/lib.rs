//! Elastic scattering by traction-free cavities and factorization-method
//! reconstruction from far-field data.

// negated comparisons are used deliberately so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod factorization;
pub mod farfield_data;
pub mod forward;
pub mod geometry;
pub mod kernels;
pub mod specfun;

pub use error::{Error, Result};

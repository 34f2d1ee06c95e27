//! Regularized inverse Born series for the two-parameter Helmholtz problem
//! with data at two frequencies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod app;
pub mod born;
pub mod diskquad;
pub mod error;
pub mod fourier;
pub mod grids;
pub mod inverse;
pub mod pswf;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};

//! Nonlocal (jump-kernel) operators: principal-value quadrature, Dirichlet
//! solves on balls, moving-plane diagnostics and order-two limits.

pub mod alpha_limit;
pub mod error;
pub mod experiment;
pub mod field;
pub mod kernels;
pub mod moving_planes;
pub mod nonlinearity;
pub mod pv_quadrature;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};

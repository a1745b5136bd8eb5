//! Numerical laboratory for compact inertial manifolds of the 1D
//! Chafee–Infante equation `u_t − u_xx + u³ − u = f` on (0, π) and of its
//! hyperbolic relaxation `εu_tt + u_t − u_xx + u³ − u = f`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod config;
pub mod csv;
pub mod error;
mod flow;
pub mod gap;
pub mod hyperbolic;
pub mod manifold;
pub mod parabolic;
pub mod robustness;
pub mod runner;
pub mod spectral;

pub use error::{CimError, Result};

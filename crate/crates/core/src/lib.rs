//! Renewal-like recursions and perturbed renewal Volterra equations, with
//! solvers and checks of their power-law asymptotics.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod config;
pub mod corpus;
pub mod discrete;
pub mod error;
pub mod laplace;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod volterra;

pub use error::{Error, Result};

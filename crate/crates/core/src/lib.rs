//! Shadowing and limit-shadowing experiments for linear semigroups
//! `T(t) = e^{tA}` on finite-dimensional complex spaces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod models;
pub mod pseudo_orbit;
pub mod recurrence;
pub mod report;
pub mod semigroup;
pub mod shadowing;
pub mod splitting;

pub use error::{Error, Result};
pub use semigroup::{MatrixSemigroup, Semigroup, Vector};

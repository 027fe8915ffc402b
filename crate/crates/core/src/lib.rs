//! Continued-fraction cost statistics.
//!
//! The crate covers three Euclidean division algorithms (ordinary, centered,
//! odd), additive digit costs, exact enumeration of rational ensembles,
//! transfer-operator spectral data, diophantine diagnostics on periodic
//! orbits, and empirical checks of the central and local limit laws for the
//! total cost.
//!
//! Each module is usable on its own. The `cli` module wires them into the
//! `cfcost` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cf_core;
pub mod cli;
pub mod costs;
pub mod diophantine;
pub mod ensemble;
pub mod error;
pub mod limit_lab;
pub mod numerics;
pub mod surd;
pub mod transfer_op;

pub use error::{Error, Result};
pub use num_complex::Complex64;

//! Exact renewal dynamic programming for the disordered copolymer with
//! adsorption, plus disorder-replica estimators of its localized-phase
//! quantities.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod disorder;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod logspace;
pub mod observables;
pub mod oracle;
pub mod partition;

pub use error::{Error, Result};

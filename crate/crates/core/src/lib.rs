// `!(x > 0.0)` is how validation rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod barriers;
pub mod certify;
pub mod cli;
pub mod config;
pub mod domain;
pub mod eigen;
pub mod error;
pub mod hull;
pub mod operator;
pub mod output;
pub mod solver;

pub use error::{Error, Result};

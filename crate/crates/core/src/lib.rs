//! Errors-in-variables regression by total least squares and its
//! constrained variants, with a synthetic model generator, brute-force
//! oracles and a Monte-Carlo consistency harness.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{Block, Matrix};

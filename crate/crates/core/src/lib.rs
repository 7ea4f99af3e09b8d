//! PAC-Bayesian risk certificates for weighted majority votes, with a
//! bagged decision-tree ensemble that keeps out-of-bag bookkeeping.

pub mod bounds;
pub mod data;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod losses;
pub mod optimize;
pub mod synth;

pub use error::{Error, Result};

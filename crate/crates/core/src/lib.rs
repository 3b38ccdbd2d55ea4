//! Gray-box performance modelling: an analytical model bootstraps the
//! training set of a regression learner, which is then refined with
//! measurements from the running system.

pub mod analytic;
pub mod bootstrap;
pub mod cases;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod learner;
pub mod oracle;
pub mod seed;
pub mod space;
pub mod update;

pub use error::{Error, Result};

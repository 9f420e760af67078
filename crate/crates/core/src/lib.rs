//! Estimation and prediction for autoregressive Banach-valued processes with
//! exogenous variables, using wavelet coordinates.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod pipeline;
pub mod grid;
pub mod mra;
pub mod procgen;
pub mod spaces;
pub mod spline;

pub use error::{Error, Result};

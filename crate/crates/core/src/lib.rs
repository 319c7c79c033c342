//! Smoothed-objective analysis of stochastic gradient descent on
//! one-dimensional objectives.

pub mod bounds;
pub mod certify;
pub mod cli;
pub mod dynamics;
pub mod config;
pub mod error;
pub mod harness;
pub mod noise;
pub mod numeric;
pub mod objectives;
pub mod output;
pub mod quadrature;
pub mod selftest;
pub mod smoothing;

pub use error::{Error, Result};

//! Monte Carlo solver and verification harness for backward doubly
//! stochastic Volterra integral equations.

pub mod calculus;
pub mod bdsde;
pub mod bdsvie;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod problem;
pub mod regression;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};

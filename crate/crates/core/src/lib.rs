//! Kac moment formulas for additive functionals of one-dimensional Markov
//! processes with explicit heat kernels, plus a Monte Carlo oracle.

pub mod cli;
pub mod digest;
pub mod error;
pub mod kernels;
pub mod measures;
pub mod moments;
pub mod montecarlo;
pub mod quadrature;
pub mod spatial;

pub use error::{KacError, Result};

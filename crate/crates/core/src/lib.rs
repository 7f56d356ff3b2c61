//! Matrix completion by nuclear norm minimization, with L1 regularization of
//! the unobserved entries for data whose missing entries are expected to be
//! near zero.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod oracle;
pub mod problem;
pub mod prox;
pub mod report;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, ObservationMask};
pub use problem::{CompletionProblem, Formulation, Solution, SolveResult, SolveStatus, SolverConfig};

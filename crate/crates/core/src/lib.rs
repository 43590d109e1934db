//! Exact finite-dimensional models of quasi-free CAR algebras for testing
//! non-commutative L^p inequalities, Grassmann Brownian motion and the
//! associated Ito and Girsanov calculus.

pub mod config;
pub mod error;
pub mod filtration;
pub mod formal;
pub mod fock;
pub mod gbm;
pub mod girsanov;
pub mod grassmann;
pub mod hyper;
pub mod ito;
pub mod kernel;
pub mod lp;
pub mod matching;
pub mod model;
pub mod phi4;
pub mod process;
pub mod report;
pub mod sde;
pub mod suites;
pub mod tables;

pub use error::{Error, Result};

//! Portfolio games with contagious jump risk: mean-field equilibrium,
//! n-player simulation under a nonlinear mutually exciting jump process, and
//! convergence experiments comparing the two.
//!
//! Parallel Monte Carlo is on by default (`parallel` feature); every result is
//! identical under [`mc::Execution::Sequential`].

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hawkes;
pub mod market;
pub mod mc;
pub mod meanfield;
pub mod model;
pub mod numeric;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
pub use mc::{Execution, MonteCarlo};
pub use model::{AgentType, Config, JumpRate, MeanFieldParams, PopulationSpec, TimeGrid};

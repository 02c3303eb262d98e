//! Multi-level local SGD on a two-level network of hubs and workers.
//!
//! Sub-networks run local SGD with probabilistically gated workers and
//! average at their hub every `tau` steps; every `q * tau` steps the hubs
//! average with their neighbours in the hub graph. The crate builds and
//! verifies the mixing matrices, simulates the algorithm as the recurrence
//! `X_{k+1} = (X_k - eta G_k) T_k`, and evaluates the convergence bound.

pub mod bounds;
pub mod cli;
pub mod engine;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod objectives;
pub mod spectral;
pub mod topology;

pub use error::{Error, Result};
pub use matrix::Matrix;

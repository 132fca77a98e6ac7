//! Measuring how far information travels in graph learning tasks and models.

pub mod cli;
pub mod distances;
pub mod error;
pub mod estimator;
pub mod graphs;
pub mod linalg;
pub mod models;
pub mod range;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};

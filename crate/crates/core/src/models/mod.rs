//! Differentiable graph models: the tape, the GCN family and training.

pub mod gcn;
pub mod tape;
pub mod train;

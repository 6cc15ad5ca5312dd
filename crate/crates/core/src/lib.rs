//! Pseudo-rehearsal with genetically evolved synthetic data.
//!
//! A trained classifier (the *solver*) doubles as the fitness function of a
//! genetic algorithm that evolves inputs it assigns to each class with high
//! softmax confidence. The evolved populations are grown and spread by a
//! two-step Gaussian enrichment and then interleaved with a new task's data so
//! the solver keeps its old decision boundary while it learns.
//!
//! Modules:
//! - [`nn`]: the solver network, losses, Adam, training, checkpoints
//! - [`genetic`]: populations, selection, crossover, mutation, evolution
//! - [`enrichment`]: Gaussian fitting/sampling and the two enrichment steps
//! - [`rehearsal`]: interleaved, serial and sweep rehearsal drivers
//! - [`metrics`]: accuracy, agreement score, boundary filtering
//! - [`data`]: IDX ingestion, toy datasets, dataset files, CSV output
//! - [`cli`]: experiment commands behind the `pseudo-rehearsal` binary

pub mod cli;
pub mod data;
pub mod enrichment;
mod error;
pub mod genetic;
pub mod metrics;
pub mod nn;
pub mod rehearsal;
pub mod rng;

pub use data::Dataset;
pub use error::{Error, Result};
pub use nn::SolverNetwork;

/// Row-major real matrix; one sample per row.
pub type Matrix = ndarray::Array2<f64>;

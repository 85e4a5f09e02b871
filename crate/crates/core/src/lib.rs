//! Learned binary hashing toolkit.
//!
//! Trains compact hash codes by alternating three coupled updates: a dual
//! semantic regression that pushes codes toward class structure from both
//! the membership and the absence side, a distance-similarity product loss
//! that pulls together the network embeddings of same-class samples over a
//! batch affinity graph, and a class structure quantization term that ties
//! each discrete code to every embedding of its class. Retrieval quality is
//! measured with Hamming ranking and radius-2 hash lookup.
//!
//! Modules mirror the pipeline: [`numerics`] (matrix kernel and seeded
//! randomness), [`dataio`] (datasets, labels, graphs, synthetic
//! benchmarks), [`encoder`] (feedforward network with manual
//! backpropagation), [`objective`] (loss terms and output-layer gradients),
//! [`trainer`] (the alternating optimization), and [`retrieval`]
//! (Hamming-space search and metrics).

// index loops mirror the matrix math throughout
#![allow(clippy::needless_range_loop)]

pub mod dataio;
pub mod encoder;
pub mod error;
pub mod numerics;
pub mod objective;
pub mod retrieval;
pub mod trainer;

pub use error::{Error, Result};

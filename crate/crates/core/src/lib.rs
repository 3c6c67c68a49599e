//! Parallel clustering for Majorize-Minimization (MM) algorithms.
//!
//! The crate provides:
//! - a parallel execution kernel with a locality-partitioned, priority
//!   work-stealing task scheduler and a fixed-order reduction that makes
//!   results bit-reproducible for a fixed thread count ([`engine`]),
//! - lossless distance-computation pruning: the minimal triangle-inequality
//!   scheme with `O(n + k^2)` auxiliary state, plus an instrumented full
//!   triangle-inequality baseline with per-centroid lower bounds ([`pruning`]),
//! - flat clustering algorithms: k-means, spherical k-means, multi-run
//!   k-means++, mini-batch k-means, fuzzy c-means, and CLARA k-medoids
//!   ([`algorithms`]),
//! - divisive hierarchical clustering (H-means, X-means, G-means) driven by
//!   an iterative split engine ([`hier`]),
//! - a semi-external-memory mode backed by an on-disk row store with a
//!   partitioned, lazily-updated row cache and request-vs-read I/O
//!   accounting ([`extmem`]).
//!
//! Every algorithm records per-iteration [`metrics::IterationMetrics`]
//! (distance computations, prune counts, I/O counters, auxiliary memory).

// Numeric kernels index parallel arrays by position throughout.
#![allow(clippy::needless_range_loop)]

pub mod algorithms;
pub mod dist;
pub mod engine;
pub mod error;
pub mod extmem;
pub mod hier;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod pruning;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{AssignmentVector, CentroidSet, DataMatrix, PartitionMap, UNASSIGNED};

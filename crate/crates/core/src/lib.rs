#![no_std]
// NaN-rejecting comparisons and index loops over parallel arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Pool-based active learning pipelines.
//!
//! This crate is the allocation-only core of the benchmark: deterministic
//! random streams, AL settings and data splits, the simulated oracle, native
//! probabilistic learners, the query strategies, the pipeline driver and the
//! statistics used to compare pipelines. Anything touching files, processes
//! or wall clocks lives in the `alp-bench` companion crate and is injected
//! through the [`clock::Clock`] and [`learners::Fitter`] traits.

extern crate alloc;

pub mod clock;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod learners;
pub mod matrix;
pub mod pipeline;
pub mod pool;
pub mod qs;
pub mod rng;
pub mod setting;
pub mod split;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::{derive_stream, RngStream};

/// Version string stamped into every run record.
pub const ARTIFACT_VERSION: &str = concat!("alp-core/", env!("CARGO_PKG_VERSION"));

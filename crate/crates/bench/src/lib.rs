//! Standard-library companion to `alp-core`: dataset acquisition and
//! preprocessing, the external-learner bridge, the run store, grid
//! execution and report rendering.

pub mod bridge;
pub mod config;
pub mod data;
pub mod error;
mod fsutil;
pub mod report;
pub mod runner;
pub mod store;

pub use error::{Error, Result};

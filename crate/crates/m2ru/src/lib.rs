//! File formats, configuration, checkpoints and experiment runners for the
//! `m2ru-core` simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiments;
pub mod features;
pub mod idx;
pub mod metrics;

pub use error::{Error, Result};

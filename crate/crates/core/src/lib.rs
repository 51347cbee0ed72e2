//! Simulation core for the M2RU accelerator: a Minion Recurrent Unit (MiRU)
//! network trained with direct feedback alignment and experience replay,
//! executed either in exact floating point or through a behavioral model of a
//! memristive crossbar datapath with weighted-bit streaming.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `m2ru` companion crate.
//!
//! Module map:
//!
//! * [`miru`]: float reference network and forward dynamics.
//! * [`dfa`]: feedback-alignment gradients, K-WTA sparsification, updates.
//! * [`replay`]: xorshift source, reservoir sampler, stochastic quantizer, buffer.
//! * [`crossbar`]: device arrays, weighted-bit streaming, integrator and ADC
//!   models, the piecewise-linear tanh, and the crossbar-backed network.
//! * [`trainer`]: backend-agnostic training step.
//! * [`reliability`]: write-count statistics and lifespan projection.
//! * [`harness`]: task streams, the continual-learning driver, latency model.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod crossbar;
pub mod dfa;
mod error;
pub mod harness;
pub mod math;
pub mod miru;
pub mod reliability;
pub mod replay;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};

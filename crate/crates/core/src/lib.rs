//! Online learning of channel decoders and codebooks over time-correlated
//! channels.
//!
//! The receiver side learns a linear decoding kernel from training symbols
//! with optimistic online mirror descent; the transmitter side picks a
//! codebook from a fixed family with a log-barrier bandit learner. The
//! [`harness`] module wires both into seeded experiments that emit CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod channels;
pub mod codebooks;
pub mod decoder;
pub mod error;
pub mod harness;
pub mod numerics;

pub use error::{Error, Result};

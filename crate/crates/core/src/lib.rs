//! Link-level simulator for single-carrier MIMO hybrid-ARQ over
//! frequency-selective channels with unknown co-channel interference.
//!
//! The receiver is a frequency-domain soft-MMSE turbo equalizer that combines
//! ARQ rounds either at the signal level, through a fixed-size recursive
//! state ([`combiner::CombinerState`]), or at the LLR level.

pub mod analysis;
pub mod arq;
pub mod channel;
pub mod combiner;
pub mod decoder;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod tx;

pub use error::{Error, Result};

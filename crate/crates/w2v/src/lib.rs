//! Skip-gram negative-sampling word embeddings.
//!
//! Two trainers over one shared model:
//!
//! * [`hogwild`] - the classic lock-free scalar update: every context word
//!   triggers its own dot products and row updates, racing freely against the
//!   other threads.
//! * [`hogbatch`] - the minibatched reformulation: the context words of a
//!   window share one set of negative samples, so the forward pass becomes a
//!   small dense matrix product and each touched row is written exactly once
//!   per batch instead of once per (context, sample) pair.
//!
//! [`distsim`] runs several isolated model replicas over corpus shards in one
//! process and periodically averages them, [`eval`] scores embeddings on
//! similarity and analogy benchmarks, and [`bench`] measures words/sec across
//! thread counts.
//!
//! Everything that consumes randomness goes through [`sampling::Rng`], a
//! fixed linear-congruential generator, so a run is reproducible from
//! `(seed, config)` whenever a single thread is used.

pub mod bench;
pub mod config;
pub mod corpus;
pub mod distsim;
pub mod error;
pub mod eval;
pub mod hogbatch;
pub mod hogwild;
pub mod model;
pub mod sampling;
pub mod scalar;
pub mod trainer;

pub use config::{SigmoidMode, TrainerKind, TrainingConfig};
pub use error::{Error, Result};

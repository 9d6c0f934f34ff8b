//! Integrated information ("phi") for groups whose members are observed as binary activity
//! over time: people talking or chatting, editors revising an article, hosts sending packets.
//!
//! The pipeline is: encode a log into a [`StateMatrix`] ([`ingest`]), optionally subsample the
//! nodes of a large communication graph ([`sampling`]), compute phi ([`phi`]) with the
//! empirical, auto-regressive or atomic estimator, then sweep parameters and summarise results
//! ([`sweep`], [`stats`]).
//!
//! ```
//! use groupphi::{phi, synth};
//!
//! // B repeats A one step later: one bit is integrated across the pair
//! let states = synth::copy_pair(20_000, 0.0, 7);
//! let (mib, result) = phi::minimum_information_bipartition(&states, 1).unwrap();
//! assert_eq!(mib.blocks().len(), 2);
//! assert!((result.value - 1.0).abs() < 0.05);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod info;
pub mod ingest;
pub mod phi;
pub mod sampling;
pub mod state;
pub mod stats;
pub mod svg;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use state::{make_state_matrix, Partition, PhiMethod, PhiResult, StateMatrix, SweepResult};

/// Crate version, embedded in emitted metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

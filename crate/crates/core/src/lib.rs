//! Super-resolution of dynamic vision sensor event streams.
//!
//! A low-resolution stream is super-resolved in two stages. The per-pixel
//! event-count map is upscaled by coupled-dictionary sparse coding
//! ([`sparse_sr`]); then every output pixel's events are drawn from a
//! nonhomogeneous Poisson process ([`poisson_sampler`]) whose rate is the
//! kernel-filtered PSTH of its low-resolution neighbourhood ([`rate_field`]).
//! [`pipeline`] ties the stages together; [`dvs_sim`] and [`corpus`] produce
//! synthetic recordings and [`metrics`] scores the results.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod count_map;
pub mod dvs_sim;
pub mod error;
pub mod event_stream;
pub mod metrics;
pub mod pipeline;
pub mod poisson_sampler;
pub mod rate_field;
pub mod rng;
pub mod sparse_sr;
pub mod stats;

pub use error::{Error, Result};
pub use event_stream::{Event, EventStream, Polarity, TimeWindow};
pub use pipeline::{super_resolve, SrConfig, TotalScale};
pub use sparse_sr::{DictionaryPair, SparseCodeConfig};

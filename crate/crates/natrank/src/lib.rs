//! Std companion of `natrank-core`: bug bundles on disk, the oracle wire
//! protocol and its transports, artifact formats and the pipeline stages
//! behind the `natrank` command.

pub mod bundle;
pub mod client;
pub mod formats;
pub mod pipeline;
pub mod protocol;

pub use natrank_core as core;

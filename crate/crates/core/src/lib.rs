//! Line-level source-code naturalness toolkit.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece of
//! the pipeline: Java lexing and line classification, mask-site extraction and
//! context windows, a deterministic stub fill-mask oracle, per-token scores,
//! line aggregation, a Kneser-Ney n-gram model, tie-aware line ranking and the
//! paired statistics used to compare ranking methods.
//!
//! File loading, oracle transports, artifact formats and the command line live
//! in the `natrank` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod aggregate;
pub mod corpus;
pub mod error;
pub mod lexing;
pub mod lines;
pub mod masking;
pub mod metrics;
pub mod ngram;
pub mod oracle;
pub mod ranking;
pub mod stats;

pub use error::{Error, Result};

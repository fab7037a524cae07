//! Recourse-aware group fairness.
//!
//! Per-person recourse costs from Growing Spheres or Wachter counterfactuals
//! are aggregated into group cost and social burden ([`metrics`]). Burdens
//! also drive a reweighted training loop that never sees group membership
//! ([`misob`]). A TPR-equalizing post-processing baseline ([`postpro`]) and an
//! experiment runner with per-split persistence ([`experiment`]) complete
//! the pipeline.
//!
//! ```
//! use socialburden::metrics::group_cost;
//!
//! // two of four members denied, at costs 4 and 2
//! let cost = group_cost(&[0.0, 4.0, 2.0, 0.0], &[1, 0, 0, 1], &[0, 1, 2, 3])?;
//! assert_eq!(cost, 1.5);
//! # Ok::<(), socialburden::Error>(())
//! ```
//!
//! The book under `book/` is the long-form guide; its code blocks are compiled
//! and run as doctests of this crate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod misob;
pub mod models;
pub mod postpro;
pub mod recourse;
mod rng;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/recourse.md")]
    mod recourse {}
    #[doc = include_str!("../../../book/src/misob.md")]
    mod misob {}
    #[doc = include_str!("../../../book/src/postpro.md")]
    mod postpro {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

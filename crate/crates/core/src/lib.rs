//! Drop-test campaign toolkit for breakaway parts.
//!
//! - [`mechanics`]: section stresses, Von Mises, voltage-to-force and the
//!   energy-balance impact estimate.
//! - [`trace`]: load-cell and motion-capture ingestion and trial analysis.
//! - [`campaign`]: the adaptive breaking-height search as a replayable state
//!   machine.
//! - [`advisor`]: slot depth / wall loop recommendations from a strength table.
//! - [`simrig`]: a seeded spring-damper drop rig that produces traces with
//!   known ground truth.
//! - [`fixtures`]: reference traces and ledgers reproducing published rig data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advisor;
pub mod campaign;
pub mod error;
pub mod fixtures;
pub mod mechanics;
pub mod simrig;
pub mod trace;

pub use error::{Error, Result};

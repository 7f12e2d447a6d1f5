//! Persistence, HTTP API and command line for running drop-test campaigns.
//!
//! - [`store`]: file-backed campaign logs, snapshots and trace blobs.
//! - [`api`]: the axum router.
//! - [`cli`]: the `droprig` command line.

pub mod api;
pub mod cli;
pub mod error;
pub mod ops;
pub mod store;

pub use error::{Result, ServiceError};

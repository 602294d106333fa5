//! IO, file formats, the toxicity-API client and its mock server, and the
//! command implementations behind the `fedshot` binary.
//!
//! All algorithmic work lives in `fedshot-core`; this crate only moves bytes
//! in and out of it.

pub mod checkpoint_io;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;
pub mod mock_api;
pub mod reports;
pub mod toxicity;

pub use error::CliError;

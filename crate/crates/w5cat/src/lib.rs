//! Command-line tool and HTTP service for a 5W1H+R metadata catalog.
//!
//! The catalog engine itself is `w5cat-core`; this crate adds the on-disk
//! store, CSV ingestion, the `w5cat` CLI and the HTTP API.

pub mod cli;
pub mod http;
pub mod ingest;
pub mod store;
pub mod view;

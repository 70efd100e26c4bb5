//! Persistence: fixed-precision JSON, CSV tables, run manifests and the
//! on-disk result cache.

pub mod cache;
pub mod csv;
pub mod json;
pub mod manifest;

pub use cache::{Cache, CACHE_ENV};
pub use csv::{Cell, CsvTable};
pub use json::{canonical_value, to_canonical_string, to_pretty_string};
pub use manifest::{OutputFile, RunManifest};

//! Command-line and HTTP front ends for `gmid-core`.

pub mod api;
pub mod server;

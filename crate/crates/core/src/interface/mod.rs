//! Machine-facing surfaces: export bundle, run registry, HTTP service, CLI.

pub mod export;
pub mod registry;
pub mod server;
pub mod cli;

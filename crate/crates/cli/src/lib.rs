//! Library side of the `satv2` command-line tool: image/CSV I/O, the run
//! manifest, and the command implementations, factored out so integration
//! tests can call them directly.

pub mod commands;
pub mod io;
pub mod manifest;

pub use commands::{dispatch, CliError};
pub use manifest::RunManifest;

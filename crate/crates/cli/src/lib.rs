//! Library surface of the `sgdlab` command-line tool.
//!
//! The binary is a thin wrapper over these modules; they are exposed as a
//! library so the integration and acceptance suites can drive experiments
//! through the same code paths the CLI uses.

pub mod commands;
pub mod config;
pub mod error;
pub mod outputs;
pub mod plot;
pub mod table;

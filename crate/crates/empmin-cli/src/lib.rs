//! Library surface of the batch tool; `main.rs` is a thin wrapper. Exposed
//! so the test suites can drive config parsing and command execution
//! directly.

pub mod checks;
pub mod config;
pub mod runner;

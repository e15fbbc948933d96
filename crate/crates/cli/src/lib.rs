//! Library surface of the experiment runner, used by the binary and by
//! the integration and acceptance test suites.

pub mod commands;
pub mod config;
pub mod output;

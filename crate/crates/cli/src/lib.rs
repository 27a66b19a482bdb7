//! Command implementations behind the `sim` binary.

pub mod commands;
pub mod serve;

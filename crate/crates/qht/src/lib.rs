//! Configuration, persistence and command implementations behind the `qht`
//! binary.

pub mod config;
pub mod harness;
pub mod io;

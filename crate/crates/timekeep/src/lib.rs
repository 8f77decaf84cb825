//! Operating-system side of timekeep: real clock backends, snapshot
//! export, periodic report sinks, the HTTP monitor, run configuration
//! files and the `timekeep` command line.

pub mod backends;
pub mod cli;
pub mod config;
pub mod emit;
pub mod export;
pub mod monitor;
pub mod output;
pub mod runner;

pub use timekeep_core as core;

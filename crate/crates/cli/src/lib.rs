//! Library surface of the command-line front end: configuration parsing,
//! file outputs and run orchestration. The binary in `main.rs` is a thin
//! dispatcher over these modules; the acceptance suite drives them
//! directly.

pub mod config;
pub mod outputs;
pub mod runner;

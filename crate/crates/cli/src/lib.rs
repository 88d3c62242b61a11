//! Command-line front end: experiment configuration, the simulate/geometry
//! subcommands, and the cross-module verification suite.

pub mod config;
pub mod error;
pub mod geometry;
pub mod simulate;
pub mod verify;

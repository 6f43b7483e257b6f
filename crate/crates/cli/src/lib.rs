//! Library side of the `noiserise` binary: configuration loading and the
//! `run`, `sweep` and `solve` commands.

pub mod commands;
pub mod config;

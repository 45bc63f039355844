//! Command-line pipeline around `spikedet-core`: file formats, append-only
//! artifact directories, the noise sweep and report rendering.

pub mod artifacts;
pub mod cli;
pub mod formats;
pub mod models;
pub mod report;
pub mod sweep;

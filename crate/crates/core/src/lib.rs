//! Event-based neural spike detection.
//!
//! This crate holds the allocation-only, IO-free part of the workbench:
//!
//! * [`synth`] generates labeled synthetic extracellular recordings.
//! * [`codec`] turns waveforms into delta-modulated pulse trains and signed
//!   pulse-count (PCM) sequences, calibrates thresholds and accounts for
//!   compression.
//! * [`snn`] is the leaky integrate-and-fire detector (no membrane reset) with
//!   its Non-Stream and Stream readouts.
//! * [`train`] builds balanced datasets and trains the spiking and the
//!   feedforward detectors with surrogate-gradient BPTT and Adam.
//! * [`baselines`] has the event-count detector and the 2x47-32-2 ANN.
//! * [`eval`] matches detections against ground truth, computes sensitivity,
//!   false detection rate and accuracy, and does the operation accounting.
//! * [`experiment`] wires everything into one noise-level experiment cell.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! sweep driver live in the `spikedet` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod codec;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod seed;
pub mod snn;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

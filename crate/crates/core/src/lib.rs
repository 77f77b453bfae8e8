// SPDX-License-Identifier: Apache-2.0

//! Minimal repetition-code benchmarks on simulated superconducting devices.
//!
//! The pipeline picks a five-qubit line per qubit ([`device`]), builds timed
//! bit-flip and phase-flip repetition circuits on it ([`circuit`]), samples
//! them under calibrated noise ([`sim`]), and turns correlations between
//! syndrome detectors into idle error rates ([`analysis`]). [`bench`] runs the
//! whole device; [`report`] and [`render`] write the results.

pub mod analysis;
pub mod bench;
pub mod circuit;
pub mod device;
pub mod noise;
pub mod par;
pub mod render;
pub mod report;
pub mod rng;
pub mod sim;

pub use analysis::{detection_events, extract_idle_rate, DetectionMatrix, RateEstimate};
pub use bench::{run_benchmark, BenchError, RunConfig};
pub use circuit::{build_repetition_circuit, insert_dynamical_decoupling, Circuit, DdScope, Encoding};
pub use device::{enumerate_lines, load_calibration, plan_device, select_line, BenchLine, DeviceCalibration};
pub use noise::{guide_values, NoiseModel, NoiseOptions};
pub use report::{aggregate_device, BenchmarkReport, RateKind};
pub use sim::{run_shots, ShotTable};

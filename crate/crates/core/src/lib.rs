//! Ferroelectric tunnel junction compact model and a transient simulator for
//! an FTJ-CMOS integrate-and-fire neuron.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! experiments and the command-line tool use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod config;
pub mod device;
pub mod error;
pub mod experiments;
pub mod scalar;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FtjParams = device::FtjParams<f64>;
pub type FtjModel = device::FtjModel<f64>;
pub type FtjState = device::FtjState<f64>;
pub type FtjDevice = device::FtjDevice<f64>;
pub type Pwl = waveform::Pwl<f64>;
pub type PulseSpec = waveform::PulseSpec<f64>;
pub type DriveSchedule = waveform::DriveSchedule<f64>;

pub type FtjParams32 = device::FtjParams<f32>;
pub type FtjModel32 = device::FtjModel<f32>;

pub type CircuitConfig = circuit::CircuitConfig<f64>;
pub type NeuronRun = circuit::NeuronRun<f64>;
pub type SweepResult = circuit::SweepResult<f64>;
pub type SimConfig = config::SimConfig<f64>;

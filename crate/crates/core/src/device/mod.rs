//! Preisach-type compact model of the ferroelectric tunnel junction.

mod model;
mod params;
mod trace;

pub use model::{delta_broadening, FtjCurrents, FtjDevice, FtjModel, FtjState, ModelOptions, SweepDirection, K_LOOP_MIN};
pub use params::{FtjParams, DEFAULT_EPS_R, EPSILON_0};
pub use trace::{read_device_trace, simulate_waveform, write_device_trace, DeviceTraceRow, DEVICE_TRACE_HEADER};

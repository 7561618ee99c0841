//! The device-level experiments: quasi-static hysteresis, PUND, accumulative
//! switching and parameter calibration against a measured trace.

mod accumulate;
mod calibrate;
mod hysteresis;
mod pund;

pub use accumulate::{accumulate, pulse_counts, read_accumulation, write_accumulation, AccumulatePoint, AccumulateSpec};
pub use calibrate::{calibrate, residual, simulate_current, CalibrationOptions, CalibrationReport, FreeParam, MeasuredTrace};
pub use hysteresis::{hysteresis, HysteresisLoop, HysteresisSpec};
pub use pund::{pund, PundResult, PundSpec};

use crate::device::{simulate_waveform, DeviceTraceRow, FtjDevice};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::waveform::Pwl;

/// Drives `device` through `wave` and returns the charge delivered by the
/// total terminal current.
fn segment_charge<T: Scalar>(device: &mut FtjDevice<T>, wave: &Pwl<T>, dt_max: T) -> Result<T> {
    let rows = simulate_waveform(device, wave, dt_max)?;
    Ok(integrate(&rows, |r| r.i_total))
}

/// Rectangle-rule integral of a per-step current (each row carries the
/// current of the step ending at its time).
fn integrate<T: Scalar>(rows: &[DeviceTraceRow<T>], f: impl Fn(&DeviceTraceRow<T>) -> T) -> T {
    rows.windows(2).fold(T::zero(), |acc, w| acc + f(&w[1]) * (w[1].t - w[0].t))
}

#[cfg(test)]
mod tests;

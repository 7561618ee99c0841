use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::FtjDevice;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::waveform::{time_grid, Pwl};

pub const DEVICE_TRACE_HEADER: &str = "t,v,e_eff,p_dyn,i_pol,i_leak,i_disp,i_total";

/// One accepted device step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DeviceTraceRow<T: Scalar> {
    pub t: T,
    pub v: T,
    pub e_eff: T,
    pub p_dyn: T,
    pub i_pol: T,
    pub i_leak: T,
    pub i_disp: T,
    pub i_total: T,
}

/// Drives `device` with `wave` from its start to its end, with steps no
/// longer than `dt_max` and landing on every breakpoint. The first row is the
/// initial state; currents there are zero.
pub fn simulate_waveform<T: Scalar>(device: &mut FtjDevice<T>, wave: &Pwl<T>, dt_max: T) -> Result<Vec<DeviceTraceRow<T>>> {
    let bps: Vec<T> = wave.points().iter().map(|p| p.0).collect();
    let grid = time_grid(wave.start(), wave.end(), dt_max, &bps);
    let mut rows = Vec::with_capacity(grid.len());
    let v0 = wave.eval(grid[0]);
    rows.push(DeviceTraceRow {
        t: grid[0],
        v: v0,
        e_eff: device.model().field(v0),
        p_dyn: device.polarization(),
        i_pol: T::zero(),
        i_leak: T::zero(),
        i_disp: T::zero(),
        i_total: T::zero(),
    });
    for w in grid.windows(2) {
        let v = wave.eval(w[1]);
        let i = device.step(v, w[1] - w[0])?;
        rows.push(DeviceTraceRow {
            t: w[1],
            v,
            e_eff: device.model().field(v),
            p_dyn: device.polarization(),
            i_pol: i.i_pol,
            i_leak: i.i_leak,
            i_disp: i.i_disp,
            i_total: i.i_total,
        });
    }
    Ok(rows)
}

pub fn write_device_trace<W: Write, T: Scalar>(w: W, rows: &[DeviceTraceRow<T>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    if rows.is_empty() {
        wtr.write_record(DEVICE_TRACE_HEADER.split(','))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_device_trace<R: Read, T: Scalar>(r: R) -> Result<Vec<DeviceTraceRow<T>>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

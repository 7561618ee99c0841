use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::device::{FtjDevice, FtjModel};
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};
use crate::waveform::{pulse_train, triangular_pulse, PulseSpec, Pwl};

use super::segment_charge;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccumulateSpec<T> {
    pub amplitude: T,
    pub width: T,
    /// Zero-field time after every pulse and readout.
    pub gap: T,
    pub slew_fraction: T,
    pub max_pulses: usize,
    /// Triangular back-switching readout.
    pub readout_amplitude: T,
    pub readout_width: T,
    pub dt_max: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AccumulatePoint<T: Scalar> {
    pub amplitude: T,
    pub width: T,
    pub n: usize,
    /// Back-switched charge minus the non-switching background (C).
    pub switched_charge: T,
    /// Switched charge over the full-switch charge.
    pub normalized: T,
}

/// Powers of two up to and including `max` (and `max` itself).
pub fn pulse_counts(max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2)).take_while(|&n| n <= max).collect();
    if out.last() != Some(&max) && max > 0 {
        out.push(max);
    }
    out
}

struct Readout<T: Scalar> {
    wave: Pwl<T>,
    gap: Option<Pwl<T>>,
    dt_max: T,
}

impl<T: Scalar> Readout<T> {
    fn rest(&self, dev: &mut FtjDevice<T>) -> Result<()> {
        if let Some(g) = &self.gap {
            segment_charge(dev, g, self.dt_max)?;
        }
        Ok(())
    }

    /// Switching charge of one back-switch: first readout minus a second,
    /// non-switching one.
    fn switched(&self, dev: &mut FtjDevice<T>) -> Result<T> {
        let q1 = segment_charge(dev, &self.wave, self.dt_max)?;
        self.rest(dev)?;
        let q2 = segment_charge(dev, &self.wave, self.dt_max)?;
        self.rest(dev)?;
        Ok(q1 - q2)
    }
}

/// Pulse trains of growing length, each read out by a triangular
/// back-switching pulse and normalized to a full switch.
///
/// The device is first saturated by one readout pulse. Each train length
/// continues from a copy of the state after the shorter train.
pub fn accumulate<T: Scalar>(model: &FtjModel<T>, spec: &AccumulateSpec<T>) -> Result<Vec<AccumulatePoint<T>>> {
    if spec.max_pulses == 0 {
        return Err(Error::InvalidArgument("max_pulses must be >= 1".into()));
    }
    if !(spec.dt_max > T::zero()) || !(spec.gap >= T::zero()) || !(spec.width > T::zero()) {
        return Err(Error::InvalidArgument("step and width must be > 0, gap >= 0".into()));
    }
    let readout = Readout {
        wave: triangular_pulse(spec.readout_amplitude, spec.readout_width)?,
        gap: (spec.gap > T::zero()).then(|| Pwl::new(vec![(T::zero(), T::zero()), (spec.gap, T::zero())])).transpose()?,
        dt_max: spec.dt_max,
    };
    let mut base = FtjDevice::new(*model);
    segment_charge(&mut base, &readout.wave, spec.dt_max)?;
    readout.rest(&mut base)?;

    let mut full = base.clone();
    let set_full = triangular_pulse(-spec.readout_amplitude, spec.readout_width)?;
    segment_charge(&mut full, &set_full, spec.dt_max)?;
    readout.rest(&mut full)?;
    let q_full = readout.switched(&mut full)?;
    if q_full == T::zero() || !q_full.is_finite() {
        return Err(Error::Numerical(format!("full-switch reference charge is {q_full}")));
    }

    let pulse = pulse_train(&PulseSpec::square_with_slew(spec.amplitude, spec.width, spec.slew_fraction), 1, T::zero())?;
    let h = spec.dt_max.min(spec.width / c(50.0));
    let counts = pulse_counts(spec.max_pulses);
    let mut out = Vec::with_capacity(counts.len());
    let mut dev = base;
    let mut applied = 0;
    for n in counts {
        while applied < n {
            segment_charge(&mut dev, &pulse, h)?;
            readout.rest(&mut dev)?;
            applied += 1;
        }
        let q = readout.switched(&mut dev.clone())?;
        out.push(AccumulatePoint { amplitude: spec.amplitude, width: spec.width, n, switched_charge: q, normalized: q / q_full });
    }
    Ok(out)
}

pub fn write_accumulation<W: Write, T: Scalar>(w: W, points: &[AccumulatePoint<T>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if points.is_empty() {
        wtr.write_record(["amplitude", "width", "n", "switched_charge", "normalized"])?;
    }
    for p in points {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_accumulation<R: Read, T: Scalar>(r: R) -> Result<Vec<AccumulatePoint<T>>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

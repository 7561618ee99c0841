use crate::device::{simulate_waveform, DeviceTraceRow, FtjDevice, FtjModel};
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};
use crate::waveform::Pwl;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisSpec<T> {
    /// Peak voltage of the symmetric triangle.
    pub amplitude: T,
    /// Time of one ramp between 0 V and the peak.
    pub ramp: T,
    /// Unrecorded cycles applied first.
    pub precondition: usize,
    pub dt_max: T,
}

/// One recorded cycle with its read-offs.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisLoop<T: Scalar> {
    /// Rows of the recorded cycle, time measured from its start.
    pub rows: Vec<DeviceTraceRow<T>>,
    /// Polarization where the descending sweep crosses 0 V.
    pub remanence_pos: Option<T>,
    /// Polarization where the ascending sweep crosses 0 V.
    pub remanence_neg: Option<T>,
    /// Voltage where polarization crosses zero upwards.
    pub coercive_pos: Option<T>,
    /// Voltage where polarization crosses zero downwards.
    pub coercive_neg: Option<T>,
    /// Magnitude of the enclosed P-V area (C/m² V).
    pub area: T,
}

fn cycle<T: Scalar>(amplitude: T, ramp: T) -> Result<Pwl<T>> {
    Pwl::new(vec![(T::zero(), T::zero()), (ramp, amplitude), (ramp * c(3.0), -amplitude), (ramp * c(4.0), T::zero())])
}

fn lerp<T: Scalar>(x0: T, x1: T, y0: T, y1: T, x: T) -> T {
    if x1 == x0 {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Slow triangular cycling 0 → +A → −A → 0 from the model's initial state.
pub fn hysteresis<T: Scalar>(model: &FtjModel<T>, spec: &HysteresisSpec<T>) -> Result<HysteresisLoop<T>> {
    if !(spec.ramp > T::zero()) || !(spec.dt_max > T::zero()) {
        return Err(Error::InvalidArgument("ramp time and step must be > 0".into()));
    }
    if !spec.amplitude.is_finite() {
        return Err(Error::InvalidArgument("amplitude must be finite".into()));
    }
    let wave = cycle(spec.amplitude.abs(), spec.ramp)?;
    let mut dev = FtjDevice::new(*model);
    for _ in 0..spec.precondition {
        simulate_waveform(&mut dev, &wave, spec.dt_max)?;
    }
    let rows = simulate_waveform(&mut dev, &wave, spec.dt_max)?;

    let mut out = HysteresisLoop {
        rows: Vec::new(),
        remanence_pos: None,
        remanence_neg: None,
        coercive_pos: None,
        coercive_neg: None,
        area: T::zero(),
    };
    let mut area = T::zero();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        area = area + (a.p_dyn + b.p_dyn) / c(2.0) * (b.v - a.v);
        if a.v > T::zero() && b.v <= T::zero() {
            out.remanence_pos.get_or_insert(lerp(a.v, b.v, a.p_dyn, b.p_dyn, T::zero()));
        }
        if a.v < T::zero() && b.v >= T::zero() {
            out.remanence_neg.get_or_insert(lerp(a.v, b.v, a.p_dyn, b.p_dyn, T::zero()));
        }
        if a.p_dyn < T::zero() && b.p_dyn >= T::zero() {
            out.coercive_pos.get_or_insert(lerp(a.p_dyn, b.p_dyn, a.v, b.v, T::zero()));
        }
        if a.p_dyn > T::zero() && b.p_dyn <= T::zero() {
            out.coercive_neg.get_or_insert(lerp(a.p_dyn, b.p_dyn, a.v, b.v, T::zero()));
        }
    }
    out.area = area.abs();
    out.rows = rows;
    Ok(out)
}

use crate::device::{simulate_waveform, DeviceTraceRow, FtjDevice, FtjModel};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::waveform::{pulse_train, pund_sequence, PulseSpec, PundPulse, Pwl};

use super::integrate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PundSpec<T> {
    pub amplitude: T,
    /// Total width of each trapezoid.
    pub width: T,
    pub rise_fraction: T,
    pub gap: T,
    /// Negative pulse of the same shape before P.
    pub prepole: bool,
    pub dt_max: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PundResult<T: Scalar> {
    pub rows: Vec<DeviceTraceRow<T>>,
    pub waveform: Pwl<T>,
    /// `(start, end)` of P, U, N and D in trace time.
    pub windows: [(T, T); 4],
    /// Capacitive charge `∫(i_pol + i_disp) dt` per pulse (C).
    pub charges: [T; 4],
    /// Largest polarization current during P (A).
    pub peak_switching_current: T,
    /// P minus U capacitive charge (C).
    pub switched_charge: T,
    /// `2 P_r A_tot` (C).
    pub expected_charge: T,
}

impl<T: Scalar> PundResult<T> {
    pub fn charge(&self, pulse: PundPulse) -> T {
        self.charges[pulse as usize]
    }
}

/// PUND train on a fresh device. Leakage is excluded from the per-pulse
/// charges because it differs between the switching and non-switching pulse.
pub fn pund<T: Scalar>(model: &FtjModel<T>, spec: &PundSpec<T>) -> Result<PundResult<T>> {
    let seq = pund_sequence(spec.amplitude, spec.width, spec.rise_fraction, spec.gap)?;
    let (waveform, offset) = if spec.prepole {
        let edge = spec.width * spec.rise_fraction;
        let pre = PulseSpec {
            amplitude: -spec.amplitude,
            width: spec.width - edge - edge,
            rise: edge,
            fall: edge,
            baseline: T::zero(),
            delay: T::zero(),
        };
        let mut wave = pulse_train(&pre, 1, T::zero())?;
        if spec.gap > T::zero() {
            wave = wave.concat(&Pwl::new(vec![(T::zero(), T::zero()), (spec.gap, T::zero())])?)?;
        }
        let offset = wave.end();
        (wave.concat(&seq.waveform)?, offset)
    } else {
        (seq.waveform.clone(), T::zero())
    };
    let windows = seq.windows.map(|(a, b)| (a + offset, b + offset));

    let mut dev = FtjDevice::new(*model);
    let rows = simulate_waveform(&mut dev, &waveform, spec.dt_max)?;

    let in_window = |(a, b): (T, T)| {
        let lo = rows.partition_point(|r| r.t <= a);
        let hi = rows.partition_point(|r| r.t <= b);
        // include the row at the window start so the first step is counted
        &rows[lo.saturating_sub(1)..hi]
    };
    let charges = windows.map(|w| integrate(in_window(w), |r| r.i_pol + r.i_disp));
    let peak = in_window(windows[0]).iter().skip(1).map(|r| r.i_pol.abs()).fold(T::zero(), T::max);
    let p = model.params();
    Ok(PundResult {
        charges,
        peak_switching_current: peak,
        switched_charge: charges[0] - charges[1],
        expected_charge: (p.p_r + p.p_r) * p.a_tot,
        rows,
        waveform,
        windows,
    })
}

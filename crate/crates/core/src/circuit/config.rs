use serde::{Deserialize, Serialize};

use super::inverter::Inverter;
use super::mosfet::MosfetParams;
use crate::device::FtjParams;
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};
use crate::waveform::PulseSpec;

/// Amplitude and width of a write pulse; edges take `slew_fraction * width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(deny_unknown_fields)]
pub struct WritePulse<T: Scalar> {
    pub amplitude: T,
    pub width: T,
}

/// How the FTJ is returned to its OFF state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetScheme {
    /// Strong negative pulse on the plate line, bit line at its write level.
    PlatePulse,
    /// Positive pulse of the same magnitude on the bit line, plate line at 0 V.
    BitLine,
}

/// Level-1 parameters of T1..T7.
///
/// T1/T2 form the access switch between BL and the cell node, T3 the pass
/// gate to the read transistor, T4/T5 the first inverter (T5 biased by
/// `v_p1`) and T6/T7 the second (T7 biased by `v_p2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(default, deny_unknown_fields)]
pub struct Transistors<T: Scalar> {
    pub t1: MosfetParams<T>,
    pub t2: MosfetParams<T>,
    pub t3: MosfetParams<T>,
    pub t4: MosfetParams<T>,
    pub t5: MosfetParams<T>,
    pub t6: MosfetParams<T>,
    pub t7: MosfetParams<T>,
}

impl<T: Scalar> Default for Transistors<T> {
    fn default() -> Self {
        let (n, p) = (MosfetParams::nmos(), MosfetParams::pmos());
        Transistors { t1: n, t2: p, t3: n, t4: n, t5: p, t6: n, t7: p }
    }
}

/// Everything the neuron simulation needs besides the FTJ parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig<T: Scalar> {
    pub v_dd: T,
    /// Pre-charge level of the bit line. When absent it is derived from the
    /// first inverter's threshold minus `v_bl_offset`.
    pub v_bl: Option<T>,
    pub v_bl_offset: T,
    /// Bit-line level held during write phases.
    pub v_bl_write: T,
    pub v_read: T,
    pub v_p1: T,
    pub v_p2: T,
    /// Total capacitance at the floating read node, including the FTJ's
    /// dielectric branch.
    pub c_n1: T,
    pub t_precharge: T,
    pub t_integrate: T,
    /// Minimum spacing between input events.
    pub t_event_min: T,
    /// Idle time after a reset before the first event.
    pub t_settle: T,
    pub set_pulse: WritePulse<T>,
    pub reset_pulse: WritePulse<T>,
    pub reset_scheme: ResetScheme,
    pub reset_after_fire: bool,
    /// Edge time of write pulses relative to their width.
    pub slew_fraction: T,
    /// Ramp time of the plate line to the read voltage.
    pub read_edge: T,
    pub transistors: Transistors<T>,
    /// Output level whose upward crossing counts as a spike; `v_dd / 2` when
    /// absent.
    pub fire_threshold: Option<T>,
    pub fire_hysteresis: T,
    /// Nominal step during pre-charge, integration and idle.
    pub dt: T,
    /// Smallest step before the node solver gives up.
    pub dt_min: T,
    /// Largest read-node change per accepted integration step.
    pub max_dv: T,
    /// Steps per write-pulse width (at least).
    pub write_steps: u32,
    pub inverter_tol: T,
}

impl<T: Scalar> Default for CircuitConfig<T> {
    fn default() -> Self {
        CircuitConfig {
            v_dd: c(1.8),
            v_bl: None,
            v_bl_offset: c(0.02745),
            v_bl_write: T::zero(),
            v_read: c(1.5),
            v_p1: c(0.67),
            v_p2: c(0.6),
            c_n1: c(50e-15),
            t_precharge: c(2e-6),
            t_integrate: c(100e-6),
            t_event_min: c(150e-6),
            t_settle: c(1e-6),
            set_pulse: WritePulse { amplitude: c(3.0), width: c(10e-6) },
            reset_pulse: WritePulse { amplitude: c(-5.0), width: c(10e-6) },
            reset_scheme: ResetScheme::PlatePulse,
            reset_after_fire: true,
            slew_fraction: c(0.01),
            read_edge: c(10e-9),
            transistors: Transistors::default(),
            fire_threshold: None,
            fire_hysteresis: c(0.010),
            dt: c(0.5e-6),
            dt_min: c(1e-15),
            max_dv: c(1e-3),
            write_steps: 100,
            inverter_tol: c(1e-5),
        }
    }
}

impl<T: Scalar> CircuitConfig<T> {
    pub fn validate(&self, ftj: &FtjParams<T>) -> Result<()> {
        let positive = [
            ("v_dd", self.v_dd),
            ("c_n1", self.c_n1),
            ("t_precharge", self.t_precharge),
            ("t_integrate", self.t_integrate),
            ("t_event_min", self.t_event_min),
            ("slew_fraction", self.slew_fraction),
            ("read_edge", self.read_edge),
            ("dt", self.dt),
            ("dt_min", self.dt_min),
            ("max_dv", self.max_dv),
            ("inverter_tol", self.inverter_tol),
        ];
        for (name, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.t_settle >= T::zero()) || !(self.fire_hysteresis >= T::zero()) {
            return Err(Error::param("t_settle", "t_settle and fire_hysteresis must be >= 0"));
        }
        if self.t_precharge + self.t_integrate > self.t_event_min {
            return Err(Error::param(
                "t_event_min",
                format!(
                    "pre-charge + integration ({}) exceeds the event spacing {}",
                    self.t_precharge + self.t_integrate,
                    self.t_event_min
                ),
            ));
        }
        if self.read_edge >= self.t_integrate {
            return Err(Error::param("read_edge", "must be shorter than the integration phase"));
        }
        // the read must stay well below the coercive voltage
        if self.v_read.abs() > c::<T>(0.5) * ftj.coercive_voltage() {
            return Err(Error::param(
                "v_read",
                format!("|v_read| = {} disturbs the polarization (coercive voltage {})", self.v_read.abs(), ftj.coercive_voltage()),
            ));
        }
        for (name, p) in [("set_pulse", self.set_pulse), ("reset_pulse", self.reset_pulse)] {
            if !(p.width > T::zero() && p.width.is_finite() && p.amplitude.is_finite()) {
                return Err(Error::param(name, "width must be > 0 and amplitude finite"));
            }
        }
        if self.write_steps == 0 {
            return Err(Error::param("write_steps", "must be >= 1"));
        }
        let t = &self.transistors;
        for (name, m) in [("t1", t.t1), ("t2", t.t2), ("t3", t.t3), ("t4", t.t4), ("t5", t.t5), ("t6", t.t6), ("t7", t.t7)] {
            m.validate(name)?;
        }
        if let Some(v) = self.v_bl {
            if !(v >= T::zero() && v <= self.v_dd) {
                return Err(Error::param("v_bl", format!("must lie in [0, v_dd], got {v}")));
            }
        }
        Ok(())
    }

    pub fn inverter1(&self) -> Inverter<T> {
        Inverter { nmos: self.transistors.t4, pmos: self.transistors.t5, v_dd: self.v_dd, v_p: self.v_p1, tol: self.inverter_tol }
    }

    pub fn inverter2(&self) -> Inverter<T> {
        Inverter { nmos: self.transistors.t6, pmos: self.transistors.t7, v_dd: self.v_dd, v_p: self.v_p2, tol: self.inverter_tol }
    }

    /// Pre-charge level actually used: explicit, or threshold minus offset.
    pub fn effective_v_bl(&self) -> T {
        self.v_bl.unwrap_or_else(|| self.inverter1().threshold() - self.v_bl_offset)
    }

    pub fn effective_fire_threshold(&self) -> T {
        self.fire_threshold.unwrap_or(self.v_dd / c(2.0))
    }

    pub fn write_spec(&self, pulse: WritePulse<T>) -> PulseSpec<T> {
        PulseSpec::square_with_slew(pulse.amplitude, pulse.width, self.slew_fraction)
    }
}

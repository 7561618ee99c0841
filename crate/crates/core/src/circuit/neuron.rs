//! Transient simulation of the FTJ integrate-and-fire neuron.
//!
//! Only the read node is dynamic. During writes the cell node is held at the
//! bit line and the read node keeps its charge; during pre-charge it is pulled
//! to the bit line through the T1/T2 access switch; during integration it
//! floats and charges through the FTJ. Inverters are evaluated as static
//! transfers at every step.

use super::config::{CircuitConfig, ResetScheme};
use super::inverter::Inverter;
use super::trace::{SimTrace, TraceRow};
use crate::device::{FtjModel, FtjState};
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};
use crate::waveform::{pulse_train, time_grid, DriveSchedule, PhaseTag, Pwl};

/// Gate drive of the switches in each phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchStates {
    /// T1/T2 between bit line and cell node.
    pub access: bool,
    /// T3 between cell node and the read transistor gate.
    pub pass: bool,
}

impl SwitchStates {
    pub fn for_phase(tag: PhaseTag) -> Self {
        match tag {
            PhaseTag::Reset | PhaseTag::Set => SwitchStates { access: true, pass: false },
            PhaseTag::Precharge => SwitchStates { access: true, pass: true },
            PhaseTag::Integrate => SwitchStates { access: false, pass: true },
            PhaseTag::Idle => SwitchStates { access: false, pass: false },
        }
    }
}

/// Drive of one phase in phase-local time `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDrive<T: Scalar> {
    pub tag: PhaseTag,
    pub duration: T,
    pub pl: Pwl<T>,
    pub bl: Pwl<T>,
}

/// Summary of one simulated phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOutcome<T> {
    pub tag: PhaseTag,
    pub start: T,
    pub fired: bool,
    pub fire_time: Option<T>,
    pub v_n1_start: T,
    pub v_n1_end: T,
    pub p_start: T,
    pub p_end: T,
    /// Charge delivered by the FTJ into the read node (C).
    pub ftj_charge: T,
    pub steps: usize,
}

/// Electrical state carried between phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState<T: Scalar> {
    pub t: T,
    pub ftj: FtjState<T>,
    pub v_n1: T,
}

/// Result of a read (pre-charge + integration) after one set pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadRecord<T> {
    pub pulse: usize,
    pub v_n1_start: T,
    pub v_n1_end: T,
    pub p_dyn: T,
    pub fired: bool,
}

#[derive(Debug, Clone)]
pub struct NeuronRun<T: Scalar> {
    /// Set pulses applied up to and including the one whose read fired.
    pub pulses_before_fire: Option<usize>,
    pub reads: Vec<ReadRecord<T>>,
    pub trace: SimTrace<T>,
    pub schedule: DriveSchedule<T>,
    pub v_bl: T,
    pub inverter1_threshold: T,
    pub final_state: NeuronState<T>,
}

/// Stateful simulator for one neuron instance.
#[derive(Debug, Clone)]
pub struct NeuronSim<T: Scalar> {
    cfg: CircuitConfig<T>,
    model: FtjModel<T>,
    inv1: Inverter<T>,
    inv2: Inverter<T>,
    v_bl: T,
    fire_threshold: T,
    state: NeuronState<T>,
    record: bool,
    trace: SimTrace<T>,
    schedule: DriveSchedule<T>,
    pl_global: Pwl<T>,
    bl_global: Pwl<T>,
}

impl<T: Scalar> NeuronSim<T> {
    /// New simulator with the FTJ in the model's initial state and the read
    /// node at 0 V. With `record` off no trace rows are stored.
    pub fn new(cfg: CircuitConfig<T>, model: FtjModel<T>, record: bool) -> Result<Self> {
        cfg.validate(model.params())?;
        let inv1 = cfg.inverter1();
        let inv2 = cfg.inverter2();
        let v_bl = cfg.effective_v_bl();
        if !(v_bl >= T::zero() && v_bl <= cfg.v_dd) {
            return Err(Error::param("v_bl", format!("derived pre-charge level {v_bl} outside [0, v_dd]")));
        }
        let state = NeuronState { t: T::zero(), ftj: model.initial_state(), v_n1: T::zero() };
        let mut sim = NeuronSim {
            cfg,
            model,
            inv1,
            inv2,
            v_bl,
            fire_threshold: cfg.effective_fire_threshold(),
            state,
            record,
            trace: SimTrace::default(),
            schedule: DriveSchedule::new(),
            pl_global: Pwl::constant(T::zero()),
            bl_global: Pwl::constant(cfg.v_bl_write),
        };
        if record {
            let row = sim.row(PhaseTag::Idle, T::zero(), cfg.v_bl_write, T::zero(), false);
            sim.trace.rows.push(row);
        }
        Ok(sim)
    }

    pub fn state(&self) -> &NeuronState<T> {
        &self.state
    }

    pub fn set_ftj_state(&mut self, ftj: FtjState<T>) {
        self.state.ftj = ftj;
    }

    pub fn v_bl(&self) -> T {
        self.v_bl
    }

    pub fn config(&self) -> &CircuitConfig<T> {
        &self.cfg
    }

    pub fn inverter1(&self) -> &Inverter<T> {
        &self.inv1
    }

    /// `(inverter-1 output, neuron output)` for a read-node voltage.
    pub fn output_chain(&self, v_n1: T) -> (T, T) {
        let v1 = self.inv1.output(v_n1.max(T::zero()).min(self.cfg.v_dd));
        (v1, self.inv2.output(v1))
    }

    fn row(&self, tag: PhaseTag, v_pl: T, v_bl: T, i_ftj: T, fire: bool) -> TraceRow<T> {
        let sw = SwitchStates::for_phase(tag);
        let (v_inv1, v_out) = self.output_chain(self.state.v_n1);
        TraceRow {
            t: self.state.t,
            phase: tag,
            v_pl,
            v_bl,
            v_wl: if sw.access { self.cfg.v_dd } else { T::zero() },
            v_n1: self.state.v_n1,
            v_inv1,
            v_out,
            p_dyn: self.state.ftj.p_dyn,
            i_ftj,
            fire,
        }
    }

    // ---- phase drives -------------------------------------------------

    fn flat(&self, duration: T, level: T) -> Result<Pwl<T>> {
        Pwl::new(vec![(T::zero(), level), (duration, level)])
    }

    /// Reset phase with the configured scheme.
    pub fn reset_drive(&self) -> Result<PhaseDrive<T>> {
        let spec = self.cfg.write_spec(self.cfg.reset_pulse);
        let d = spec.span();
        let (pl, bl) = match self.cfg.reset_scheme {
            ResetScheme::PlatePulse => (pulse_train(&spec, 1, T::zero())?, self.flat(d, self.cfg.v_bl_write)?),
            ResetScheme::BitLine => {
                let bl_spec = crate::waveform::PulseSpec { amplitude: -spec.amplitude, baseline: self.cfg.v_bl_write, ..spec };
                (self.flat(d, T::zero())?, pulse_train(&bl_spec, 1, T::zero())?)
            }
        };
        Ok(PhaseDrive { tag: PhaseTag::Reset, duration: d, pl, bl })
    }

    pub fn set_drive(&self) -> Result<PhaseDrive<T>> {
        let spec = self.cfg.write_spec(self.cfg.set_pulse);
        let d = spec.span();
        Ok(PhaseDrive { tag: PhaseTag::Set, duration: d, pl: pulse_train(&spec, 1, T::zero())?, bl: self.flat(d, self.cfg.v_bl_write)? })
    }

    pub fn precharge_drive(&self) -> Result<PhaseDrive<T>> {
        let d = self.cfg.t_precharge;
        let e = self.cfg.read_edge.min(d / c(4.0));
        let bl = if self.v_bl == self.cfg.v_bl_write {
            self.flat(d, self.v_bl)?
        } else {
            Pwl::new(vec![(T::zero(), self.cfg.v_bl_write), (e, self.v_bl), (d, self.v_bl)])?
        };
        Ok(PhaseDrive { tag: PhaseTag::Precharge, duration: d, pl: self.flat(d, T::zero())?, bl })
    }

    pub fn integrate_drive(&self) -> Result<PhaseDrive<T>> {
        let d = self.cfg.t_integrate;
        let e = self.cfg.read_edge;
        let r = self.cfg.v_read;
        let pl = Pwl::new(vec![(T::zero(), T::zero()), (e, r), (d - e, r), (d, T::zero())])?;
        let bl = if self.v_bl == self.cfg.v_bl_write {
            self.flat(d, self.v_bl)?
        } else {
            Pwl::new(vec![(T::zero(), self.v_bl), (d - e, self.v_bl), (d, self.cfg.v_bl_write)])?
        };
        Ok(PhaseDrive { tag: PhaseTag::Integrate, duration: d, pl, bl })
    }

    pub fn idle_drive(&self, duration: T) -> Result<PhaseDrive<T>> {
        Ok(PhaseDrive { tag: PhaseTag::Idle, duration, pl: self.flat(duration, T::zero())?, bl: self.flat(duration, self.cfg.v_bl_write)? })
    }

    // ---- stepping -------------------------------------------------------

    /// Current from the bit line into the read node through T1/T2.
    fn access_current(&self, v_bl: T, v_n1: T) -> T {
        let t = &self.cfg.transistors;
        let v_wl = self.cfg.v_dd;
        let n = t.t1.drain_current(v_wl - v_n1, v_bl - v_n1);
        let p = t.t2.drain_current(self.cfg.v_dd - v_wl - v_n1, v_bl - v_n1);
        n + p
    }

    fn access_conductance(&self, v_bl: T, v_n1: T) -> T {
        let h = c::<T>(1e-6);
        (self.access_current(v_bl, v_n1 - h) - self.access_current(v_bl, v_n1 + h)) / (h + h)
    }

    /// Backward-Euler solve of the read node over one step of length `h`.
    fn solve_node(&self, tag: PhaseTag, v_pl: T, v_bl: T, h: T) -> Result<(T, FtjState<T>, T)> {
        let sw = SwitchStates::for_phase(tag);
        let cap = self.cfg.c_n1;
        let v0 = self.state.v_n1;
        let ftj0 = self.state.ftj;
        let residual = |v: T| -> Result<(T, T, FtjState<T>, T)> {
            let (ftj, i) = self.model.step(&ftj0, v_pl - v, h)?;
            let i_ftj = i.i_pol + i.i_leak;
            let i_acc = if sw.access { self.access_current(v_bl, v) } else { T::zero() };
            let r = cap * (v - v0) / h - i_ftj - i_acc;
            let g = cap / h
                + self.model.leakage_conductance(v_pl - v, ftj.p_dyn)
                + if sw.access { self.access_conductance(v_bl, v) } else { T::zero() };
            Ok((r, g, ftj, i_ftj))
        };

        let mut x = v0;
        let (mut r, mut g, mut ftj, mut i_ftj) = residual(x)?;
        // bracket [lo, hi] with r(lo) <= 0 <= r(hi); r is increasing in v
        let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
        let tol = c::<T>(1e-12);
        for _ in 0..200 {
            if !r.is_finite() || !g.is_finite() {
                return Err(Error::Numerical(format!("non-finite node residual at v_n1 = {x}")));
            }
            if r == T::zero() {
                break;
            }
            if r < T::zero() {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
            let mut next = x - r / g;
            if !(next > lo && next < hi) || !(g > T::zero()) {
                next = if lo.is_finite() && hi.is_finite() {
                    (lo + hi) / c(2.0)
                } else if lo.is_finite() {
                    lo + (lo - v0).abs().max(c(0.1))
                } else {
                    hi - (hi - v0).abs().max(c(0.1))
                };
            }
            let done = (next - x).abs() <= tol || (hi - lo) <= tol;
            x = next;
            (r, g, ftj, i_ftj) = residual(x)?;
            if done {
                return Ok((x, ftj, i_ftj));
            }
        }
        if r == T::zero() {
            return Ok((x, ftj, i_ftj));
        }
        Err(Error::Numerical(format!("read-node solve did not converge (v_n1 = {x}, residual = {r})")))
    }

    /// Advances one grid interval, halving the step while the read node moves
    /// more than `max_dv` or the solver fails.
    fn advance(&mut self, drive: &PhaseDrive<T>, t_local: T, h: T, out: &mut PhaseOutcome<T>, fire: &mut FireDetector<T>) -> Result<()> {
        let sw = SwitchStates::for_phase(drive.tag);
        let t_end = t_local + h;
        let v_pl = drive.pl.eval(t_end);
        let v_bl = drive.bl.eval(t_end);
        let dynamic = sw.pass;
        let (v_new, ftj, i_ftj) = if dynamic {
            match self.solve_node(drive.tag, v_pl, v_bl, h) {
                Ok((v, ftj, i)) if drive.tag != PhaseTag::Integrate || (v - self.state.v_n1).abs() <= self.cfg.max_dv => (v, ftj, i),
                other => {
                    let half = h / c(2.0);
                    if half < self.cfg.dt_min {
                        let why = match other {
                            Err(e) => e.to_string(),
                            Ok((v, _, _)) => format!("node step {} V exceeds max_dv", (v - self.state.v_n1).abs()),
                        };
                        return Err(Error::Numerical(format!(
                            "{} phase at t = {}: step fell below dt_min ({why})",
                            drive.tag, self.state.t
                        )));
                    }
                    self.advance(drive, t_local, half, out, fire)?;
                    return self.advance(drive, t_local + half, half, out, fire);
                }
            }
        } else {
            // cell node tied to BL (writes) or everything isolated (idle)
            let v_cell = if sw.access { v_bl } else { v_pl };
            let (ftj, i) = self.model.step(&self.state.ftj, v_pl - v_cell, h)?;
            (self.state.v_n1, ftj, i.i_pol + i.i_leak)
        };
        self.state.v_n1 = v_new;
        self.state.ftj = ftj;
        self.state.t = self.state.t + h;
        out.steps += 1;
        if drive.tag == PhaseTag::Integrate {
            out.ftj_charge = out.ftj_charge + i_ftj * h;
        }
        let mut fired_now = false;
        if drive.tag == PhaseTag::Integrate {
            let (_, v_out) = self.output_chain(v_new);
            if fire.update(v_out) && !out.fired {
                out.fired = true;
                out.fire_time = Some(self.state.t);
                fired_now = true;
            }
        }
        if self.record {
            let row = self.row(drive.tag, v_pl, v_bl, i_ftj, fired_now);
            if fired_now {
                self.trace.fire_events.push(self.state.t);
            }
            self.trace.rows.push(row);
        }
        Ok(())
    }

    /// Simulates one phase from the current state.
    pub fn simulate_phase(&mut self, drive: &PhaseDrive<T>) -> Result<PhaseOutcome<T>> {
        let start = self.state.t;
        if self.record {
            self.schedule.push_phase(drive.tag, start, drive.duration)?;
            self.pl_global = self.pl_global.concat(&drive.pl)?;
            self.bl_global = self.bl_global.concat(&drive.bl)?;
        }
        let mut out = PhaseOutcome {
            tag: drive.tag,
            start,
            fired: false,
            fire_time: None,
            v_n1_start: self.state.v_n1,
            v_n1_end: self.state.v_n1,
            p_start: self.state.ftj.p_dyn,
            p_end: self.state.ftj.p_dyn,
            ftj_charge: T::zero(),
            steps: 0,
        };
        let h_max = match drive.tag {
            PhaseTag::Reset | PhaseTag::Set => {
                let w = if drive.tag == PhaseTag::Set { self.cfg.set_pulse.width } else { self.cfg.reset_pulse.width };
                self.cfg.dt.min(w / T::from_u32(self.cfg.write_steps).expect("step count"))
            }
            _ => self.cfg.dt,
        };
        let mut bps: Vec<T> = drive.pl.points().iter().chain(drive.bl.points()).map(|p| p.0).collect();
        bps.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        let grid = time_grid(T::zero(), drive.duration, h_max, &bps);
        let mut fire = FireDetector::new(self.fire_threshold, self.cfg.fire_hysteresis);
        for w in grid.windows(2) {
            self.advance(drive, w[0], w[1] - w[0], &mut out, &mut fire)?;
        }
        // land exactly on the phase end despite accumulated rounding
        self.state.t = start + drive.duration;
        if let Some(last) = self.trace.rows.last_mut() {
            if self.record {
                last.t = self.state.t;
            }
        }
        out.v_n1_end = self.state.v_n1;
        out.p_end = self.state.ftj.p_dyn;
        Ok(out)
    }

    /// Reset followed by the settle time.
    pub fn reset(&mut self) -> Result<()> {
        let d = self.reset_drive()?;
        self.simulate_phase(&d)?;
        if self.cfg.t_settle > T::zero() {
            let idle = self.idle_drive(self.cfg.t_settle)?;
            self.simulate_phase(&idle)?;
        }
        Ok(())
    }

    /// One input event: set pulse, pre-charge, integration, then idle until
    /// the event period has elapsed. Returns the read result.
    pub fn event(&mut self, pulse: usize) -> Result<ReadRecord<T>> {
        let set = self.set_drive()?;
        let pre = self.precharge_drive()?;
        let int = self.integrate_drive()?;
        let busy = set.duration + pre.duration + int.duration;
        let period = self.cfg.t_event_min.max(busy);
        self.simulate_phase(&set)?;
        self.simulate_phase(&pre)?;
        let v_start = self.state.v_n1;
        let read = self.simulate_phase(&int)?;
        if period > busy {
            let idle = self.idle_drive(period - busy)?;
            self.simulate_phase(&idle)?;
        }
        Ok(ReadRecord { pulse, v_n1_start: v_start, v_n1_end: read.v_n1_end, p_dyn: read.p_end, fired: read.fired })
    }

    /// Finishes the run and hands back the recorded artefacts.
    pub fn finish(mut self) -> (SimTrace<T>, DriveSchedule<T>, NeuronState<T>) {
        if self.record {
            self.schedule.set_terminal("pl", self.pl_global.clone());
            self.schedule.set_terminal("bl", self.bl_global.clone());
        }
        (self.trace, self.schedule, self.state)
    }
}

/// Upward threshold crossing with hysteresis. Armed at the start of every
/// read, so an output already above threshold fires on the first step.
#[derive(Debug, Clone, Copy)]
struct FireDetector<T> {
    on: T,
    off: T,
    armed: bool,
}

impl<T: Scalar> FireDetector<T> {
    fn new(threshold: T, hysteresis: T) -> Self {
        let half = hysteresis / c(2.0);
        FireDetector { on: threshold + half, off: threshold - half, armed: true }
    }

    fn update(&mut self, v: T) -> bool {
        if self.armed && v > self.on {
            self.armed = false;
            return true;
        }
        if !self.armed && v < self.off {
            self.armed = true;
        }
        false
    }
}

/// Reset, then repeat set pulse / pre-charge / integration until the neuron
/// fires or `n_max_pulses` events have been applied.
pub fn run_neuron<T: Scalar>(cfg: &CircuitConfig<T>, model: &FtjModel<T>, n_max_pulses: usize, record: bool) -> Result<NeuronRun<T>> {
    if n_max_pulses == 0 {
        return Err(Error::InvalidArgument("n_max_pulses must be >= 1".into()));
    }
    let mut sim = NeuronSim::new(*cfg, *model, record)?;
    sim.reset()?;
    let mut reads = Vec::new();
    let mut fired_at = None;
    for pulse in 1..=n_max_pulses {
        let read = sim.event(pulse)?;
        reads.push(read);
        if read.fired {
            fired_at = Some(pulse);
            break;
        }
    }
    if fired_at.is_some() && cfg.reset_after_fire {
        sim.reset()?;
    }
    let v_bl = sim.v_bl();
    let threshold = sim.inverter1().threshold();
    let (trace, schedule, final_state) = sim.finish();
    Ok(NeuronRun { pulses_before_fire: fired_at, reads, trace, schedule, v_bl, inverter1_threshold: threshold, final_state })
}

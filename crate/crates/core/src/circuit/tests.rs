use super::*;
use crate::device::{FtjModel, FtjParams};
use crate::waveform::PhaseTag;

fn model() -> FtjModel<f64> {
    FtjModel::new(FtjParams::default()).unwrap()
}

fn cfg_with_set(amplitude: f64, width: f64) -> CircuitConfig<f64> {
    CircuitConfig { set_pulse: WritePulse { amplitude, width }, ..CircuitConfig::default() }
}

#[test]
fn switch_table() {
    let on = |tag| SwitchStates::for_phase(tag);
    assert_eq!(on(PhaseTag::Reset), SwitchStates { access: true, pass: false });
    assert_eq!(on(PhaseTag::Set), SwitchStates { access: true, pass: false });
    assert_eq!(on(PhaseTag::Precharge), SwitchStates { access: true, pass: true });
    assert_eq!(on(PhaseTag::Integrate), SwitchStates { access: false, pass: true });
    assert_eq!(on(PhaseTag::Idle), SwitchStates { access: false, pass: false });
}

#[test]
fn phases_are_contiguous_and_exclusive() {
    let run = run_neuron(&CircuitConfig::default(), &model(), 3, true).unwrap();
    let phases = run.schedule.phases();
    assert!(phases.len() >= 3);
    for w in phases.windows(2) {
        assert!((w[1].start - w[0].end()).abs() < 1e-15, "gap between {:?} and {:?}", w[0], w[1]);
    }
    for r in &run.trace.rows[1..] {
        let p = run.schedule.phase_at(r.t - 1e-12).unwrap();
        assert_eq!(p.tag, r.phase, "row at {} labelled {}", r.t, r.phase);
        let sw = SwitchStates::for_phase(r.phase);
        assert_eq!(r.v_wl > 0.0, sw.access);
    }
}

#[test]
fn read_node_holds_outside_reads() {
    let run = run_neuron(&cfg_with_set(3.0, 10e-6), &model(), 3, true).unwrap();
    let rows = &run.trace.rows;
    for w in rows.windows(2) {
        if matches!(w[1].phase, PhaseTag::Set | PhaseTag::Reset | PhaseTag::Idle) {
            assert_eq!(w[1].v_n1, w[0].v_n1, "n1 moved during {} at {}", w[1].phase, w[1].t);
        }
    }
}

#[test]
fn precharge_reaches_bit_line_level() {
    let run = run_neuron(&CircuitConfig::default(), &model(), 4, false).unwrap();
    for r in &run.reads {
        assert!((r.v_n1_start - run.v_bl).abs() < 1e-6, "{} vs {}", r.v_n1_start, run.v_bl);
        assert!(r.v_n1_end > r.v_n1_start);
    }
}

#[test]
fn integration_charge_balance() {
    let cfg = CircuitConfig::default();
    let mut sim = NeuronSim::new(cfg, model(), false).unwrap();
    sim.reset().unwrap();
    for _ in 0..2 {
        let set = sim.set_drive().unwrap();
        sim.simulate_phase(&set).unwrap();
        let pre = sim.precharge_drive().unwrap();
        sim.simulate_phase(&pre).unwrap();
        let int = sim.integrate_drive().unwrap();
        let out = sim.simulate_phase(&int).unwrap();
        let stored = cfg.c_n1 * (out.v_n1_end - out.v_n1_start);
        assert!(((stored - out.ftj_charge) / stored).abs() < 0.01, "{stored} vs {}", out.ftj_charge);
    }
}

#[test]
fn read_does_not_disturb_polarization() {
    let cfg = CircuitConfig::default();
    let m = model();
    let p_sat = m.params().p_sat;
    for set_amp in [2.5, 5.0] {
        let mut sim =
            NeuronSim::new(CircuitConfig { set_pulse: WritePulse { amplitude: set_amp, width: 10e-6 }, ..cfg }, m, false).unwrap();
        sim.reset().unwrap();
        let set = sim.set_drive().unwrap();
        sim.simulate_phase(&set).unwrap();
        let pre = sim.precharge_drive().unwrap();
        sim.simulate_phase(&pre).unwrap();
        let int = sim.integrate_drive().unwrap();
        let out = sim.simulate_phase(&int).unwrap();
        assert!((out.p_end - out.p_start).abs() < 1e-3 * p_sat, "dp = {}", out.p_end - out.p_start);
    }
}

#[test]
fn reset_schemes_agree() {
    let m = model();
    let p_sat = m.params().p_sat;
    for prior in [0usize, 2, 5] {
        let finals: Vec<f64> = [ResetScheme::PlatePulse, ResetScheme::BitLine]
            .into_iter()
            .map(|scheme| {
                let cfg = CircuitConfig { reset_scheme: scheme, ..cfg_with_set(3.0, 10e-6) };
                let mut sim = NeuronSim::new(cfg, m, false).unwrap();
                for _ in 0..prior {
                    let set = sim.set_drive().unwrap();
                    sim.simulate_phase(&set).unwrap();
                }
                sim.reset().unwrap();
                sim.state().ftj.p_dyn
            })
            .collect();
        assert!((finals[0] - finals[1]).abs() < 0.01 * p_sat, "{finals:?}");
        assert!(finals[0] < -0.99 * p_sat);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = cfg_with_set(3.0, 10e-6);
    let csv = || {
        let run = run_neuron(&cfg, &model(), 10, true).unwrap();
        let mut buf = Vec::new();
        run.trace.write_csv(&mut buf).unwrap();
        buf
    };
    assert_eq!(csv(), csv());
}

#[test]
fn trace_round_trips() {
    let run = run_neuron(&cfg_with_set(4.0, 10e-6), &model(), 5, true).unwrap();
    assert_eq!(run.pulses_before_fire, Some(1));
    let mut buf = Vec::new();
    run.trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(CIRCUIT_TRACE_HEADER));
    let back = SimTrace::<f64>::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, run.trace);
    assert_eq!(back.fire_events.len(), 1);
}

#[test]
fn fires_once_then_resets() {
    let run = run_neuron(&cfg_with_set(5.0, 10e-6), &model(), 5, true).unwrap();
    assert_eq!(run.pulses_before_fire, Some(1));
    assert!(run.final_state.ftj.p_dyn < -0.99 * 0.2);
    assert_eq!(run.trace.rows.iter().filter(|r| r.fire).count(), 1);
    let fire = run.trace.rows.iter().find(|r| r.fire).unwrap();
    assert_eq!(fire.phase, PhaseTag::Integrate);
    assert!(fire.v_out > 0.9);
}

#[test]
fn no_fire_within_budget() {
    let run = run_neuron(&cfg_with_set(2.5, 1e-6), &model(), 5, false).unwrap();
    assert_eq!(run.pulses_before_fire, None);
    assert_eq!(run.reads.len(), 5);
}

#[test]
fn fire_count_falls_with_amplitude() {
    let counts: Vec<usize> = [2.5, 2.75, 3.0, 3.5, 4.0]
        .iter()
        .map(|&a| run_neuron(&cfg_with_set(a, 10e-6), &model(), 100, false).unwrap().pulses_before_fire.unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    assert!(counts[0] >= 10 * counts[4], "{counts:?}");
}

#[test]
fn higher_v_p1_fires_no_later() {
    let base = cfg_with_set(2.75, 10e-6);
    let v_bl = base.effective_v_bl();
    let count = |v_p1: f64| {
        let cfg = CircuitConfig { v_p1, v_bl: Some(v_bl), ..base };
        run_neuron(&cfg, &model(), 100, false).unwrap().pulses_before_fire.unwrap_or(101)
    };
    let (lo, hi) = (count(base.v_p1), count(base.v_p1 + 0.1));
    assert!(hi <= lo, "{lo} -> {hi}");
    assert!(base.inverter1().threshold() > CircuitConfig { v_p1: base.v_p1 + 0.1, ..base }.inverter1().threshold());
}

#[test]
fn zero_pulse_budget_rejected() {
    assert!(matches!(run_neuron(&CircuitConfig::default(), &model(), 0, false), Err(crate::Error::InvalidArgument(_))));
}

#[test]
fn sweep_matrix_round_trips_and_ignores_thread_count() {
    let cfg = CircuitConfig::default();
    let amps = [2.5, 3.0, 5.0];
    let widths = [1e-6, 10e-6];
    let a = sweep_pulses_to_fire(&cfg, &model(), &amps, &widths, 30, Some(1)).unwrap();
    let b = sweep_pulses_to_fire(&cfg, &model(), &amps, &widths, 30, Some(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells[0][0], SweepCell::NoFire);
    assert_eq!(a.count(0, 0), 31);
    assert_eq!(a.cells[2][1], SweepCell::Fired(1));
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("amplitude,0.000001,0.00001\n"), "{text}");
    let back = SweepResult::<f64>::read_csv(buf.as_slice(), 30).unwrap();
    assert_eq!(back, a);
}

use approx::assert_relative_eq;

use super::*;
use crate::device::{write_device_trace, FtjModel, FtjParams, ModelOptions};

fn model() -> FtjModel<f64> {
    FtjModel::new(FtjParams::default()).unwrap()
}

fn hyst(amplitude: f64) -> HysteresisLoop<f64> {
    hysteresis(&model(), &HysteresisSpec { amplitude, ramp: 500e-6, precondition: 2, dt_max: 0.5e-6 }).unwrap()
}

fn pund_spec(amplitude: f64) -> PundSpec<f64> {
    PundSpec { amplitude, width: 100e-6, rise_fraction: 0.3, gap: 100e-6, prepole: true, dt_max: 0.5e-6 }
}

fn acc_spec(amplitude: f64, max_pulses: usize) -> AccumulateSpec<f64> {
    AccumulateSpec {
        amplitude,
        width: 10e-6,
        gap: 20e-6,
        slew_fraction: 0.01,
        max_pulses,
        readout_amplitude: -5.0,
        readout_width: 500e-6,
        dt_max: 0.5e-6,
    }
}

#[test]
fn saturated_loop_read_offs() {
    let h = hyst(5.0);
    let p_r = FtjParams::<f64>::default().p_r;
    assert_relative_eq!(h.remanence_pos.unwrap(), p_r, max_relative = 0.01);
    assert_relative_eq!(h.remanence_neg.unwrap(), -p_r, max_relative = 0.01);
    // finite sweep rate pushes the crossing slightly past E_C t_fe
    let v_c = 3.3;
    assert!(h.coercive_pos.unwrap() > v_c && h.coercive_pos.unwrap() < 1.05 * v_c);
    assert!(h.coercive_neg.unwrap() < -v_c && h.coercive_neg.unwrap() > -1.05 * v_c);
    assert!(h.area > 0.0);
    let first = h.rows.first().unwrap();
    let last = h.rows.last().unwrap();
    assert_eq!(first.v, 0.0);
    assert_eq!(last.v, 0.0);
}

#[test]
fn recorded_loop_is_closed() {
    let h = hyst(5.0);
    let (first, last) = (h.rows.first().unwrap(), h.rows.last().unwrap());
    assert!((first.p_dyn - last.p_dyn).abs() < 1e-6 * 0.2);
}

#[test]
fn zero_amplitude_loop_is_flat() {
    let h = hyst(0.0);
    assert!(h.rows.iter().all(|r| r.v == 0.0 && r.p_dyn == h.rows[0].p_dyn));
    assert_eq!(h.area, 0.0);
    assert_eq!(h.coercive_pos, None);
    assert_eq!(h.remanence_pos, None);
}

#[test]
fn pund_switches_on_p_and_n_only() {
    let r = pund(&model(), &pund_spec(5.0)).unwrap();
    assert_relative_eq!(r.peak_switching_current, 2.1e-3, max_relative = 0.3);
    assert_relative_eq!(r.switched_charge, r.expected_charge, max_relative = 0.05);
    let q = |p| r.charge(p);
    use crate::waveform::PundPulse::*;
    assert!(q(U).abs() < 0.02 * q(P).abs());
    assert!(q(D).abs() < 0.02 * q(N).abs());
    assert!(q(N) < 0.0);
    assert_relative_eq!(q(N) - q(D), -r.expected_charge, max_relative = 0.05);
}

#[test]
fn pund_windows_follow_the_prepole() {
    let r = pund(&model(), &pund_spec(5.0)).unwrap();
    assert_relative_eq!(r.windows[0].0, 200e-6);
    assert_relative_eq!(r.windows[3].1, r.waveform.end());
    assert_eq!(r.waveform.eval(r.windows[1].0 + 50e-6), 5.0);
}

#[test]
fn zero_amplitude_pund_is_silent() {
    let r = pund(&model(), &pund_spec(0.0)).unwrap();
    assert!(r.waveform.points().iter().all(|p| p.1 == 0.0));
    assert!(r.rows.iter().all(|row| row.i_total == 0.0));
    assert_eq!(r.charges, [0.0; 4]);
}

#[test]
fn counts_are_powers_of_two() {
    assert_eq!(pulse_counts(512), vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512]);
    assert_eq!(pulse_counts(5), vec![1, 2, 4, 5]);
    assert_eq!(pulse_counts(1), vec![1]);
}

#[test]
fn accumulation_is_monotone_and_ordered_in_amplitude() {
    let lo = accumulate(&model(), &acc_spec(3.0, 64)).unwrap();
    let hi = accumulate(&model(), &acc_spec(4.0, 64)).unwrap();
    for pts in [&lo, &hi] {
        assert!(pts.windows(2).all(|w| w[1].normalized >= w[0].normalized - 1e-9), "{pts:?}");
    }
    for (a, b) in lo.iter().zip(&hi) {
        assert!(b.normalized >= a.normalized - 1e-9);
    }
    assert!(hi.last().unwrap().normalized >= 0.9);
    assert!(lo[0].normalized < 0.5);
}

#[test]
fn far_below_coercive_nothing_switches() {
    let pts = accumulate(&model(), &acc_spec(1.0, 16)).unwrap();
    assert!(pts.iter().all(|p| p.normalized.abs() < 0.01), "{pts:?}");
}

#[test]
fn accumulation_csv_round_trips() {
    let pts = accumulate(&model(), &acc_spec(3.5, 4)).unwrap();
    let mut buf = Vec::new();
    write_accumulation(&mut buf, &pts).unwrap();
    assert!(buf.starts_with(b"amplitude,width,n,switched_charge,normalized\n"));
    let back: Vec<AccumulatePoint<f64>> = read_accumulation(buf.as_slice()).unwrap();
    assert_eq!(back, pts);
}

fn synthetic_trace(params: FtjParams<f64>) -> MeasuredTrace<f64> {
    let m = FtjModel::new(params).unwrap();
    let r = pund(&m, &PundSpec { dt_max: 2e-6, ..pund_spec(5.0) }).unwrap();
    let mut buf = Vec::new();
    write_device_trace(&mut buf, &r.rows).unwrap();
    MeasuredTrace::read_csv(buf.as_slice()).unwrap()
}

#[test]
fn device_trace_is_its_own_simulation() {
    let params = FtjParams::default();
    let trace = synthetic_trace(params);
    assert_eq!(residual(&params, ModelOptions::default(), &trace).unwrap(), 0.0);
}

#[test]
fn empty_free_list_returns_start() {
    let trace = synthetic_trace(FtjParams::default());
    let start = FtjParams { r_a0: 200e-6, ..FtjParams::default() };
    let rep = calibrate(&start, ModelOptions::default(), &trace, &[], &CalibrationOptions::default()).unwrap();
    assert_eq!(rep.params, start);
    assert_eq!(rep.initial_residual, rep.final_residual);
    assert!(rep.final_residual > 0.0);
}

#[test]
fn prefactor_alone_is_recovered_exactly() {
    let truth = FtjParams { r_a0: 150e-6, ..FtjParams::default() };
    let trace = synthetic_trace(truth);
    let rep = calibrate(&FtjParams::default(), ModelOptions::default(), &trace, &[FreeParam::RA0], &CalibrationOptions::default()).unwrap();
    assert_relative_eq!(rep.params.r_a0, 150e-6, max_relative = 1e-8);
    assert!(rep.final_residual < 1e-12 * rep.initial_residual);
}

#[test]
fn calibration_is_deterministic() {
    let trace = synthetic_trace(FtjParams::default());
    let start = FtjParams { v_p0: 0.4, ..FtjParams::default() };
    let run = || calibrate(&start, ModelOptions::default(), &trace, &[FreeParam::VP0], &CalibrationOptions::default()).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn free_parameter_names() {
    for p in FreeParam::ALL {
        assert_eq!(FreeParam::parse(p.name()).unwrap(), p);
    }
    assert!(FreeParam::parse("k_init").is_err());
    let trace = synthetic_trace(FtjParams::default());
    let dup = calibrate(
        &FtjParams::default(),
        ModelOptions::default(),
        &trace,
        &[FreeParam::RA0, FreeParam::RA0],
        &CalibrationOptions::default(),
    );
    assert!(dup.is_err());
}

#[test]
fn trace_reader_rejects_bad_input() {
    assert!(MeasuredTrace::<f64>::read_csv("t,v\n0,0\n".as_bytes()).is_err());
    assert!(MeasuredTrace::<f64>::read_csv("t,v,i\n0,0,0\n".as_bytes()).is_err());
    assert!(MeasuredTrace::<f64>::read_csv("t,v,i\n0,0,0\n0,1,0\n".as_bytes()).is_err());
    let ok = MeasuredTrace::<f64>::read_csv("t,v,i\n0,0,0\n1e-6,0.5,1e-9\n".as_bytes()).unwrap();
    assert_eq!(ok.i, vec![0.0, 1e-9]);
}

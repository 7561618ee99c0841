use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ftjsim::circuit::{SimTrace, SweepResult, CIRCUIT_TRACE_HEADER};
use ftjsim::config::SimConfig;
use ftjsim::device::{read_device_trace, DeviceTraceRow};
use ftjsim::experiments::{read_accumulation, AccumulatePoint};
use ftjsim::waveform::Pwl;
use tempfile::TempDir;

fn ftjsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftjsim")).args(args).current_dir(dir).env_remove("FTJSIM_THREADS").output().unwrap()
}

fn workspace(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("cfg.toml"), config).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary_value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix(" = ")).unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn hysteresis_writes_a_trace_that_round_trips() {
    let dir = workspace("");
    let o = ftjsim(&["hysteresis", "--config", "cfg.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let p_r: f64 = summary_value(&text, "remanence_pos_uc_cm2").parse().unwrap();
    assert!((p_r - 19.9997).abs() < 0.2, "{p_r}");
    let bytes = fs::read(dir.path().join("out/hysteresis.csv")).unwrap();
    assert!(bytes.starts_with(b"t,v,e_eff,p_dyn,i_pol,i_leak,i_disp,i_total\n"));
    let rows: Vec<DeviceTraceRow<f64>> = read_device_trace(bytes.as_slice()).unwrap();
    assert!(rows.len() > 100);
}

#[test]
fn pund_writes_trace_and_waveform() {
    let dir = workspace("");
    let o = ftjsim(&["pund", "--config", "cfg.toml", "--width", "50e-6"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let ratio: f64 = summary_value(&stdout(&o), "switched_over_expected").parse().unwrap();
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    let wave = Pwl::<f64>::read_csv(fs::File::open(dir.path().join("pund_waveform.csv")).unwrap()).unwrap();
    let peak = wave.points().iter().map(|p| p.1).fold(f64::MIN, f64::max);
    assert_eq!(peak, 5.0);
    assert!(dir.path().join("pund.csv").exists());
}

#[test]
fn accumulate_honours_flag_overrides() {
    let dir = workspace("");
    let o = ftjsim(&["accumulate", "--config", "cfg.toml", "--amplitudes", "3.5,4", "--max-pulses", "8"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let pts: Vec<AccumulatePoint<f64>> = read_accumulation(fs::File::open(dir.path().join("accumulate.csv")).unwrap()).unwrap();
    assert_eq!(pts.iter().filter(|p| p.amplitude == 3.5).count(), 4);
    assert!(pts.iter().all(|p| p.n <= 8));
}

#[test]
fn neuron_trace_round_trips_and_reports_fire() {
    let dir = workspace("");
    let o = ftjsim(&["neuron", "--config", "cfg.toml", "--amplitude", "3", "--width", "10e-6", "--out", "n"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert_eq!(summary_value(&stdout(&o), "pulses_before_fire"), "2");
    let bytes = fs::read(dir.path().join("n/neuron_trace.csv")).unwrap();
    assert!(bytes.starts_with(CIRCUIT_TRACE_HEADER.as_bytes()));
    let trace = SimTrace::<f64>::read_csv(bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    trace.write_csv(&mut again).unwrap();
    assert_eq!(again, bytes);
    for name in ["neuron_pl.csv", "neuron_bl.csv"] {
        Pwl::<f64>::read_csv(fs::File::open(dir.path().join("n").join(name)).unwrap()).unwrap();
    }
}

#[test]
fn sweep_output_is_independent_of_thread_count() {
    let dir = workspace("");
    let args = ["sweep", "--config", "cfg.toml", "--amplitudes", "2.5,3,3.5", "--widths", "1e-6,10e-6", "--n-max", "60"];
    let run = |threads: &str, out: &str| {
        let mut a = args.to_vec();
        a.extend(["--out", out]);
        let o =
            Command::new(env!("CARGO_BIN_EXE_ftjsim")).args(&a).current_dir(dir.path()).env("FTJSIM_THREADS", threads).output().unwrap();
        assert!(o.status.success(), "{o:?}");
        fs::read(dir.path().join(out).join("sweep.csv")).unwrap()
    };
    let one = run("1", "a");
    let four = run("4", "b");
    assert_eq!(one, four);
    let text = String::from_utf8(one.clone()).unwrap();
    assert!(text.starts_with("amplitude,"));
    let r = SweepResult::<f64>::read_csv(one.as_slice(), 60).unwrap();
    assert_eq!(r.counts(), vec![vec![61, 43], vec![16, 2], vec![2, 1]]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = workspace("");
    for out in ["a", "b"] {
        let o = ftjsim(&["neuron", "--config", "cfg.toml", "--amplitude", "3", "--out", out], dir.path());
        assert!(o.status.success());
    }
    let a = fs::read(dir.path().join("a/neuron_trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/neuron_trace.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn calibrate_recovers_perturbed_parameters() {
    let dir = workspace("");
    assert!(ftjsim(&["pund", "--config", "cfg.toml", "--out", "data"], dir.path()).status.success());
    fs::write(
        dir.path().join("start.toml"),
        "[ftj]\nv_p0 = 0.432\ndv_p = 0.072\nr_a0 = 88e-6\n\n[experiment]\ncalibrate_data = \"data/pund.csv\"\n",
    )
    .unwrap();
    let o = ftjsim(&["calibrate", "--config", "start.toml", "--out", "fit"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let fitted = SimConfig::<f64>::load(dir.path().join("fit/calibrated.toml")).unwrap();
    assert!((fitted.ftj.v_p0 / 0.36 - 1.0).abs() < 0.02);
    assert!((fitted.ftj.dv_p / 0.06 - 1.0).abs() < 0.02);
    assert!((fitted.ftj.r_a0 / 110e-6 - 1.0).abs() < 0.02);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = workspace("[ftj]\ntau_p = -1.0\n");
    fs::write(dir.path().join("unknown.toml"), "[ftj]\nbogus = 1\n").unwrap();
    fs::write(dir.path().join("ok.toml"), "").unwrap();
    let cases: [&[&str]; 5] = [
        &["pund", "--config", "cfg.toml"],
        &["pund", "--config", "unknown.toml"],
        &["pund", "--config", "missing.toml"],
        &["calibrate", "--config", "ok.toml"],
        &["calibrate", "--config", "ok.toml", "--data", "nope.csv"],
    ];
    for args in cases {
        let o = ftjsim(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {o:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = Command::new(env!("CARGO_BIN_EXE_ftjsim"))
        .args(["sweep", "--config", "ok.toml", "--amplitudes", "3", "--widths", "1e-5"])
        .current_dir(dir.path())
        .env("FTJSIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(ftjsim(&["bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_3_and_leaves_no_partial_output() {
    let dir = workspace("[circuit]\nmax_dv = 1e-9\ndt_min = 1e-9\n");
    let o = ftjsim(&["neuron", "--config", "cfg.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    assert!(!dir.path().join("out/neuron_trace.csv").exists());
}

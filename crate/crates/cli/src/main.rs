use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ftjsim::circuit::{run_neuron, sweep_pulses_to_fire, WritePulse};
use ftjsim::config::SimConfig;
use ftjsim::device::write_device_trace;
use ftjsim::experiments::{
    accumulate, calibrate, hysteresis, pund, write_accumulation, AccumulateSpec, CalibrationOptions, FreeParam, HysteresisSpec,
    MeasuredTrace, PundSpec,
};
use ftjsim::{Error, Result};

/// Simulate ferroelectric tunnel junctions and the FTJ-CMOS neuron.
#[derive(Debug, Parser)]
#[command(name = "ftjsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Triangular P-V loop; writes hysteresis.csv.
    Hysteresis {
        #[command(flatten)]
        common: Common,
        /// Peak voltage (V).
        #[arg(long, allow_negative_numbers = true)]
        amplitude: Option<f64>,
    },
    /// Positive-up-negative-down sequence; writes pund.csv and pund_waveform.csv.
    Pund {
        #[command(flatten)]
        common: Common,
        /// Pulse amplitude (V).
        #[arg(long, allow_negative_numbers = true)]
        amplitude: Option<f64>,
        /// Pulse width (s).
        #[arg(long)]
        width: Option<f64>,
    },
    /// Switched polarization against pulse count; writes accumulate.csv.
    Accumulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated pulse amplitudes (V).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        amplitudes: Option<Vec<f64>>,
        /// Comma-separated pulse widths (s).
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<f64>>,
        /// Longest pulse train.
        #[arg(long)]
        max_pulses: Option<usize>,
    },
    /// One neuron run until fire; writes neuron_trace.csv, neuron_pl.csv and neuron_bl.csv.
    Neuron {
        #[command(flatten)]
        common: Common,
        /// Set pulse amplitude (V).
        #[arg(long, allow_negative_numbers = true)]
        amplitude: Option<f64>,
        /// Set pulse width (s).
        #[arg(long)]
        width: Option<f64>,
        /// Pulse budget.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Pulses-to-fire over an amplitude-width grid; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated pulse amplitudes (V).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        amplitudes: Option<Vec<f64>>,
        /// Comma-separated pulse widths (s).
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<f64>>,
        /// Pulse budget per cell.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Fit device parameters to a measured current trace; writes calibrated.toml.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// CSV with columns t, v and i (or i_total).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated free parameters.
        #[arg(long, value_delimiter = ',')]
        free: Option<Vec<String>>,
    },
}

// Appends a summary line; writing to a String cannot fail.
macro_rules! say {
    ($out:expr, $($arg:tt)*) => {{
        let _ = writeln!($out, $($arg)*);
    }};
}

/// Writes through a temporary file in `dir` and renames it into place.
fn write_atomic(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<&File>) -> Result<()>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    Ok(path)
}

fn load(common: &Common) -> Result<SimConfig<f64>> {
    SimConfig::load(&common.config)
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("FTJSIM_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("FTJSIM_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}

fn run(cmd: Command, out: &mut String) -> Result<()> {
    match cmd {
        Command::Hysteresis { common, amplitude } => {
            let mut cfg = load(&common)?;
            if let Some(a) = amplitude {
                cfg.experiment.hysteresis_amplitude = a;
            }
            cfg.validate()?;
            let e = &cfg.experiment;
            let spec = HysteresisSpec {
                amplitude: e.hysteresis_amplitude,
                ramp: e.hysteresis_ramp,
                precondition: e.hysteresis_precondition,
                dt_max: e.dt_max,
            };
            let h = hysteresis(&cfg.model()?, &spec)?;
            let path = write_atomic(&common.out, "hysteresis.csv", |w| write_device_trace(w, &h.rows))?;
            let show = |x: Option<f64>, scale: f64| x.map_or("none".to_string(), |v| format!("{:.6}", v * scale));
            say!(out, "amplitude_v = {}", spec.amplitude);
            say!(out, "remanence_pos_uc_cm2 = {}", show(h.remanence_pos, 100.0));
            say!(out, "remanence_neg_uc_cm2 = {}", show(h.remanence_neg, 100.0));
            say!(out, "coercive_pos_v = {}", show(h.coercive_pos, 1.0));
            say!(out, "coercive_neg_v = {}", show(h.coercive_neg, 1.0));
            say!(out, "rows = {}", h.rows.len());
            say!(out, "trace = {}", path.display());
        }
        Command::Pund { common, amplitude, width } => {
            let mut cfg = load(&common)?;
            if let Some(a) = amplitude {
                cfg.experiment.pund_amplitude = a;
            }
            if let Some(w) = width {
                cfg.experiment.pund_width = w;
            }
            cfg.validate()?;
            let e = &cfg.experiment;
            let spec = PundSpec {
                amplitude: e.pund_amplitude,
                width: e.pund_width,
                rise_fraction: e.pund_rise_fraction,
                gap: e.pund_gap.unwrap_or(e.pund_width),
                prepole: e.pund_prepole,
                dt_max: e.dt_max,
            };
            let r = pund(&cfg.model()?, &spec)?;
            let trace = write_atomic(&common.out, "pund.csv", |w| write_device_trace(w, &r.rows))?;
            let wave = write_atomic(&common.out, "pund_waveform.csv", |w| r.waveform.write_csv(w))?;
            for (label, q) in ["p", "u", "n", "d"].iter().zip(r.charges) {
                say!(out, "charge_{label}_c = {q:.6e}");
            }
            say!(out, "peak_switching_current_a = {:.6e}", r.peak_switching_current);
            say!(out, "switched_charge_c = {:.6e}", r.switched_charge);
            say!(out, "expected_charge_c = {:.6e}", r.expected_charge);
            say!(out, "switched_over_expected = {:.6}", r.switched_charge / r.expected_charge);
            say!(out, "trace = {}", trace.display());
            say!(out, "waveform = {}", wave.display());
        }
        Command::Accumulate { common, amplitudes, widths, max_pulses } => {
            let mut cfg = load(&common)?;
            if let Some(a) = amplitudes {
                cfg.experiment.accumulate_amplitudes = a;
            }
            if let Some(w) = widths {
                cfg.experiment.accumulate_widths = w;
            }
            if let Some(n) = max_pulses {
                cfg.experiment.accumulate_max_pulses = n;
            }
            cfg.validate()?;
            let model = cfg.model()?;
            let e = &cfg.experiment;
            let mut points = Vec::new();
            for &amplitude in &e.accumulate_amplitudes {
                for &width in &e.accumulate_widths {
                    let spec = AccumulateSpec {
                        amplitude,
                        width,
                        gap: e.accumulate_gap,
                        slew_fraction: e.accumulate_slew_fraction,
                        max_pulses: e.accumulate_max_pulses,
                        readout_amplitude: e.readout_amplitude,
                        readout_width: e.readout_width,
                        dt_max: e.dt_max,
                    };
                    let pts = accumulate(&model, &spec)?;
                    let first = pts.iter().find(|p| p.normalized >= 0.9).map_or("none".to_string(), |p| p.n.to_string());
                    let last = pts.last().map_or(0.0, |p| p.normalized);
                    say!(out, "amplitude_v = {amplitude}, width_s = {width:e}: n_at_0.9 = {first}, final_normalized = {last:.6}");
                    points.extend(pts);
                }
            }
            let path = write_atomic(&common.out, "accumulate.csv", |w| write_accumulation(w, &points))?;
            say!(out, "data = {}", path.display());
        }
        Command::Neuron { common, amplitude, width, n_max } => {
            let mut cfg = load(&common)?;
            let set = cfg.circuit.set_pulse;
            cfg.circuit.set_pulse = WritePulse { amplitude: amplitude.unwrap_or(set.amplitude), width: width.unwrap_or(set.width) };
            if let Some(n) = n_max {
                cfg.experiment.neuron_max_pulses = n;
            }
            cfg.validate()?;
            let run = run_neuron(&cfg.circuit, &cfg.model()?, cfg.experiment.neuron_max_pulses, true)?;
            let trace = write_atomic(&common.out, "neuron_trace.csv", |w| run.trace.write_csv(w))?;
            for name in ["pl", "bl"] {
                if let Some(wave) = run.schedule.terminal(name) {
                    let path = write_atomic(&common.out, &format!("neuron_{name}.csv"), |w| wave.write_csv(w))?;
                    say!(out, "waveform_{name} = {}", path.display());
                }
            }
            match run.pulses_before_fire {
                Some(n) => say!(out, "pulses_before_fire = {n}"),
                None => say!(out, "pulses_before_fire = none (budget {})", cfg.experiment.neuron_max_pulses),
            }
            say!(out, "v_bl_v = {:.6}", run.v_bl);
            say!(out, "inverter1_threshold_v = {:.6}", run.inverter1_threshold);
            if let (Some(first), Some(last)) = (run.reads.first(), run.reads.last()) {
                say!(out, "first_read_dv_mv = {:.4}", (first.v_n1_end - first.v_n1_start) * 1e3);
                say!(out, "last_read_dv_mv = {:.4}", (last.v_n1_end - last.v_n1_start) * 1e3);
            }
            say!(out, "trace = {}", trace.display());
        }
        Command::Sweep { common, amplitudes, widths, n_max } => {
            let mut cfg = load(&common)?;
            if let Some(a) = amplitudes {
                cfg.experiment.sweep_amplitudes = a;
            }
            if let Some(w) = widths {
                cfg.experiment.sweep_widths = w;
            }
            if let Some(n) = n_max {
                cfg.experiment.neuron_max_pulses = n;
            }
            cfg.validate()?;
            let threads = threads_from_env()?;
            let e = &cfg.experiment;
            let r = sweep_pulses_to_fire(&cfg.circuit, &cfg.model()?, &e.sweep_amplitudes, &e.sweep_widths, e.neuron_max_pulses, threads)?;
            let path = write_atomic(&common.out, "sweep.csv", |w| r.write_csv(w))?;
            let counts = r.counts();
            let cells = counts.iter().map(Vec::len).sum::<usize>();
            let no_fire = r.cells.iter().flatten().filter(|c| matches!(c, ftjsim::circuit::SweepCell::NoFire)).count();
            let failed: Vec<_> = r.failures().collect();
            say!(out, "cells = {cells}");
            say!(out, "no_fire = {no_fire}");
            say!(out, "failed = {}", failed.len());
            for (a, w, msg) in &failed {
                eprintln!("cell amplitude {a} V, width {w:e} s failed: {msg}");
            }
            if let Some(max) = counts.iter().flatten().filter(|&&n| n > 0).max() {
                say!(out, "max_pulses_to_fire = {max}");
            }
            if let Some(min) = counts.iter().flatten().filter(|&&n| n > 0).min() {
                say!(out, "min_pulses_to_fire = {min}");
            }
            say!(out, "data = {}", path.display());
            if !failed.is_empty() {
                return Err(Error::Numerical(format!("{} sweep cells failed", failed.len())));
            }
        }
        Command::Calibrate { common, data, free } => {
            let mut cfg = load(&common)?;
            let data = match data {
                Some(d) => d,
                None => {
                    let rel = cfg
                        .experiment
                        .calibrate_data
                        .clone()
                        .ok_or_else(|| Error::Config("no calibration data: pass --data or set experiment.calibrate_data".into()))?;
                    common.config.parent().unwrap_or(Path::new(".")).join(rel)
                }
            };
            if let Some(f) = free {
                cfg.experiment.calibrate_free = f;
            }
            cfg.validate()?;
            let free = cfg.experiment.calibrate_free.iter().map(|s| FreeParam::parse(s.trim())).collect::<Result<Vec<_>>>()?;
            let file = File::open(&data).map_err(|e| Error::Config(format!("{}: {e}", data.display())))?;
            let trace = MeasuredTrace::read_csv(file)?;
            let options = CalibrationOptions { max_sweeps: cfg.experiment.calibrate_max_sweeps, tol: cfg.experiment.calibrate_tol };
            let report = calibrate(&cfg.ftj, cfg.model, &trace, &free, &options)?;
            for f in &report.free {
                say!(out, "{} = {:.9e} (start {:.9e})", f.name(), f.get(&report.params), f.get(&cfg.ftj));
            }
            say!(out, "initial_residual = {:.6e}", report.initial_residual);
            say!(out, "final_residual = {:.6e}", report.final_residual);
            say!(out, "sweeps = {}", report.sweeps);
            say!(out, "evaluations = {}", report.evaluations);
            cfg.ftj = report.params;
            let text = cfg.to_toml_string()?;
            let path = write_atomic(&common.out, "calibrated.toml", |w| Ok(w.write_all(text.as_bytes())?))?;
            say!(out, "config = {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut summary = String::new();
    let result = run(cli.command, &mut summary);
    let _ = std::io::stdout().lock().write_all(summary.as_bytes());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

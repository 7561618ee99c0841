//! Flat key-value run configuration with `[ftj]`, `[model]`, `[circuit]` and
//! `[experiment]` sections. Every key is optional; SI units throughout.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitConfig;
use crate::device::{FtjModel, FtjParams, ModelOptions};
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig<T: Scalar> {
    /// Largest device step for the stand-alone device experiments.
    pub dt_max: T,

    pub hysteresis_amplitude: T,
    /// Time for one ramp from 0 V to the amplitude.
    pub hysteresis_ramp: T,
    /// Full cycles applied before the recorded one.
    pub hysteresis_precondition: usize,

    pub pund_amplitude: T,
    pub pund_width: T,
    pub pund_rise_fraction: T,
    /// Gap between pulses; the pulse width when absent.
    pub pund_gap: Option<T>,
    /// Apply a negative pulse of the same shape before P.
    pub pund_prepole: bool,

    pub accumulate_amplitudes: Vec<T>,
    pub accumulate_widths: Vec<T>,
    pub accumulate_gap: T,
    pub accumulate_slew_fraction: T,
    /// Largest pulse count; counts run over powers of two up to it.
    pub accumulate_max_pulses: usize,
    pub readout_amplitude: T,
    pub readout_width: T,

    pub neuron_max_pulses: usize,
    pub sweep_amplitudes: Vec<T>,
    pub sweep_widths: Vec<T>,

    /// Measured trace for `calibrate`, relative to the config file.
    pub calibrate_data: Option<String>,
    pub calibrate_free: Vec<String>,
    pub calibrate_max_sweeps: usize,
    pub calibrate_tol: T,
}

impl<T: Scalar> Default for ExperimentConfig<T> {
    fn default() -> Self {
        ExperimentConfig {
            dt_max: c(0.5e-6),
            hysteresis_amplitude: c(5.0),
            hysteresis_ramp: c(500e-6),
            hysteresis_precondition: 2,
            pund_amplitude: c(5.0),
            pund_width: c(100e-6),
            pund_rise_fraction: c(0.3),
            pund_gap: None,
            pund_prepole: true,
            accumulate_amplitudes: vec![c(3.0), c(3.5), c(4.0)],
            accumulate_widths: vec![c(10e-6)],
            accumulate_gap: c(20e-6),
            accumulate_slew_fraction: c(0.01),
            accumulate_max_pulses: 512,
            readout_amplitude: c(-5.0),
            readout_width: c(500e-6),
            neuron_max_pulses: 200,
            sweep_amplitudes: (0..11).map(|i| c(2.5 + 0.25 * f64::from(i))).collect(),
            sweep_widths: [1e-6, 3.3e-6, 10e-6, 33e-6, 100e-6, 330e-6, 1000e-6].into_iter().map(c).collect(),
            calibrate_data: None,
            calibrate_free: vec!["v_p0".into(), "dv_p".into(), "r_a0".into()],
            calibrate_max_sweeps: 200,
            calibrate_tol: c(1e-10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig<T: Scalar> {
    pub ftj: FtjParams<T>,
    pub model: ModelOptions,
    pub circuit: CircuitConfig<T>,
    pub experiment: ExperimentConfig<T>,
}

impl<T: Scalar> SimConfig<T> {
    /// Parses and validates a configuration text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<FtjModel<T>> {
        FtjModel::with_options(self.ftj, self.model)
    }

    pub fn validate(&self) -> Result<()> {
        self.ftj.validate()?;
        self.model()?;
        self.circuit.validate(&self.ftj)?;
        let e = &self.experiment;
        for (name, v) in [
            ("dt_max", e.dt_max),
            ("hysteresis_ramp", e.hysteresis_ramp),
            ("pund_width", e.pund_width),
            ("accumulate_slew_fraction", e.accumulate_slew_fraction),
            ("readout_width", e.readout_width),
            ("calibrate_tol", e.calibrate_tol),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        if !(e.accumulate_gap >= T::zero()) {
            return Err(Error::param("accumulate_gap", "must be >= 0"));
        }
        if !(e.pund_rise_fraction > T::zero() && e.pund_rise_fraction < c(0.5)) {
            return Err(Error::param("pund_rise_fraction", "must lie in (0, 0.5)"));
        }
        if e.pund_gap.is_some_and(|g| !(g >= T::zero())) {
            return Err(Error::param("pund_gap", "must be >= 0"));
        }
        if e.accumulate_max_pulses == 0 || e.neuron_max_pulses == 0 {
            return Err(Error::param("accumulate_max_pulses", "pulse budgets must be >= 1"));
        }
        if e.accumulate_amplitudes.is_empty() || e.accumulate_widths.is_empty() {
            return Err(Error::param("accumulate_amplitudes", "amplitude and width lists must be non-empty"));
        }
        if e.sweep_amplitudes.is_empty() || e.sweep_widths.is_empty() {
            return Err(Error::param("sweep_amplitudes", "amplitude and width lists must be non-empty"));
        }
        if e.accumulate_widths.iter().chain(&e.sweep_widths).any(|w| !(*w > T::zero())) {
            return Err(Error::param("accumulate_widths", "widths must be > 0"));
        }
        for name in &e.calibrate_free {
            crate::experiments::FreeParam::parse(name)?;
        }
        Ok(())
    }
}

//! Level-1 (square-law) MOSFET used for every transistor in the neuron.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    N,
    P,
}

/// Square-law transistor. For P devices `v_th` is negative and voltages are
/// taken with the usual sign flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(deny_unknown_fields)]
pub struct MosfetParams<T: Scalar> {
    pub polarity: Polarity,
    /// Threshold voltage (V).
    pub v_th: T,
    /// Transconductance factor (A/V²).
    pub beta: T,
    /// Channel-length modulation (1/V).
    pub lambda: T,
}

impl<T: Scalar> MosfetParams<T> {
    pub fn nmos() -> Self {
        MosfetParams { polarity: Polarity::N, v_th: c(0.45), beta: c(200e-6), lambda: c(0.05) }
    }

    pub fn pmos() -> Self {
        MosfetParams { polarity: Polarity::P, v_th: c(-0.45), beta: c(80e-6), lambda: c(0.05) }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(Error::param(name, format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::param(name, format!("lambda must be >= 0, got {}", self.lambda)));
        }
        let ok = match self.polarity {
            Polarity::N => self.v_th > T::zero(),
            Polarity::P => self.v_th < T::zero(),
        };
        if !ok || !self.v_th.is_finite() {
            return Err(Error::param(name, format!("v_th = {} has the wrong sign for {:?}", self.v_th, self.polarity)));
        }
        Ok(())
    }

    /// Drain current (A), positive when flowing from drain to source.
    ///
    /// Source and drain swap roles when `v_ds` is negative, so the device is
    /// symmetric.
    pub fn drain_current(&self, v_gs: T, v_ds: T) -> T {
        match self.polarity {
            Polarity::N => symmetric(v_gs, v_ds, self.v_th, self.beta, self.lambda),
            Polarity::P => -symmetric(-v_gs, -v_ds, -self.v_th, self.beta, self.lambda),
        }
    }
}

/// Free-function form of [`MosfetParams::drain_current`].
pub fn mosfet_current<T: Scalar>(params: &MosfetParams<T>, v_gs: T, v_ds: T) -> T {
    params.drain_current(v_gs, v_ds)
}

fn symmetric<T: Scalar>(v_gs: T, v_ds: T, v_th: T, beta: T, lambda: T) -> T {
    if v_ds < T::zero() {
        -forward(v_gs - v_ds, -v_ds, v_th, beta, lambda)
    } else {
        forward(v_gs, v_ds, v_th, beta, lambda)
    }
}

/// N-type forward current for `v_ds >= 0`. Both regions carry the
/// `(1 + lambda v_ds)` factor so the current is continuous at pinch-off.
fn forward<T: Scalar>(v_gs: T, v_ds: T, v_th: T, beta: T, lambda: T) -> T {
    let v_ov = v_gs - v_th;
    if v_ov <= T::zero() {
        return T::zero();
    }
    let clm = T::one() + lambda * v_ds;
    if v_ds < v_ov {
        beta * (v_ov * v_ds - v_ds * v_ds / c(2.0)) * clm
    } else {
        beta / c(2.0) * v_ov * v_ov * clm
    }
}

//! Branch, kinetics and current equations of the compact model.
//!
//! The quasi-static branch is a Miller-type `tanh` curve scaled by a loop
//! factor `k` and shifted by an offset `p_off`. Switching follows the branch
//! with a field-dependent relaxation time; the implicit update used here is the
//! backward-Euler step of `dP/dt = (P_branch - P) / tau`.

use serde::{Deserialize, Serialize};

use super::params::FtjParams;
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// Sense of the field sweep, selecting the sign of `E_C` in the branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepDirection {
    /// Increasing field; branch centred on `+E_C`, saturating at `+P_sat`.
    Ascending,
    /// Decreasing field; branch centred on `-E_C`, saturating at `-P_sat`.
    Descending,
}

impl SweepDirection {
    /// +1 for ascending, -1 for descending.
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            SweepDirection::Ascending => T::one(),
            SweepDirection::Descending => -T::one(),
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            SweepDirection::Ascending => SweepDirection::Descending,
            SweepDirection::Descending => SweepDirection::Ascending,
        }
    }
}

/// Smallest loop scaling factor produced by the turning-point rescale.
pub const K_LOOP_MIN: f64 = 1e-6;

/// `delta = E_C / ln((1 + P_r/P_sat) / (1 - P_r/P_sat))`.
pub fn delta_broadening<T: Scalar>(params: &FtjParams<T>) -> Result<T> {
    let ratio = params.p_r / params.p_sat;
    let num = T::one() + ratio;
    let den = T::one() - ratio;
    if !(den > T::zero() && num > T::zero()) {
        return Err(Error::Domain(format!("p_r/p_sat = {ratio} puts the broadening logarithm out of domain")));
    }
    let log = (num / den).ln();
    if !(log > T::zero()) || !log.is_finite() {
        return Err(Error::Domain(format!("non-positive broadening logarithm for p_r/p_sat = {ratio}")));
    }
    Ok(params.e_c / log)
}

/// Model options that are not calibration constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    /// Re-solve `(k, p_off)` at every sweep reversal. When off, the branch
    /// keeps `k = k_init, p_off = 0` for the whole run.
    pub minor_loops: bool,
    /// Field change (relative to `E_C`) against the running extreme needed to
    /// register a sweep reversal. Suppresses reversals caused by rounding noise
    /// in the drive.
    pub reversal_deadband: f64,
    /// Largest polarization change per internal sub-step, relative to `P_sat`.
    pub max_dp_fraction: f64,
    /// Maximum sub-step bisection depth per call to `step`.
    pub max_substep_depth: u32,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { minor_loops: true, reversal_deadband: 1e-6, max_dp_fraction: 0.01, max_substep_depth: 14 }
    }
}

/// Validated parameter set with derived constants cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtjModel<T: Scalar> {
    params: FtjParams<T>,
    options: ModelOptions,
    delta: T,
    ln10: T,
}

impl<T: Scalar> FtjModel<T> {
    pub fn new(params: FtjParams<T>) -> Result<Self> {
        Self::with_options(params, ModelOptions::default())
    }

    pub fn with_options(params: FtjParams<T>, options: ModelOptions) -> Result<Self> {
        params.validate()?;
        if !(options.max_dp_fraction > 0.0) {
            return Err(Error::param("max_dp_fraction", "must be > 0"));
        }
        if !(options.reversal_deadband >= 0.0) {
            return Err(Error::param("reversal_deadband", "must be >= 0"));
        }
        let delta = delta_broadening(&params)?;
        Ok(FtjModel { params, options, delta, ln10: T::LN_10() })
    }

    pub fn params(&self) -> &FtjParams<T> {
        &self.params
    }

    pub fn options(&self) -> &ModelOptions {
        &self.options
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// Field across the ferroelectric for a terminal voltage.
    #[inline]
    pub fn field(&self, v: T) -> T {
        v / self.params.t_fe
    }

    /// Branch value `k * P_sat * tanh((E -/+ E_C) / (2 delta)) + p_off`.
    #[inline]
    pub fn asymptotic_polarization(&self, e_eff: T, direction: SweepDirection, k_loop: T, p_off: T) -> T {
        k_loop * self.params.p_sat * self.branch_tanh(e_eff, direction) + p_off
    }

    #[inline]
    fn branch_tanh(&self, e_eff: T, direction: SweepDirection) -> T {
        // ascending: E - E_C, descending: E + E_C
        let shifted = e_eff - direction.sign::<T>() * self.params.e_c;
        (shifted / (c::<T>(2.0) * self.delta)).tanh()
    }

    /// Field-dependent switching time `tau_p * 10^((E_C - |E|) / (alpha_E (E_C/10 + |E|)))`.
    ///
    /// Overflows to `+inf` for fields far below `E_C` in `f32`; the update
    /// rule treats that as frozen polarization.
    #[inline]
    pub fn tau_pe(&self, e_eff: T) -> T {
        let p = &self.params;
        let mag = e_eff.abs();
        let exponent = (p.e_c - mag) / (p.alpha_e * (p.e_c / c(10.0) + mag));
        p.tau_p * (exponent * self.ln10).exp()
    }

    /// One implicit relaxation step towards the branch value `target`.
    ///
    /// Equivalent to `(P dt + P_old tau) / (tau + dt)`, written so that an
    /// infinite `tau` leaves the polarization unchanged.
    #[inline]
    pub fn relax(&self, p_old: T, target: T, tau: T, dt: T) -> T {
        p_old + (target - p_old) * (dt / (tau + dt))
    }

    /// Backward-Euler polarization update at field `e_eff` over `dt`, using
    /// the branch currently held in `state`. Does not touch the state.
    pub fn update_polarization(&self, state: &FtjState<T>, e_eff: T, dt: T) -> Result<T> {
        if !(dt >= T::zero()) {
            return Err(Error::InvalidArgument(format!("time step must be >= 0, got {dt}")));
        }
        let target = self.asymptotic_polarization(e_eff, state.direction, state.k_loop, state.p_off);
        let p = self.relax(state.p_dyn, target, self.tau_pe(e_eff), dt);
        Ok(p.max(-self.params.p_sat).min(self.params.p_sat))
    }

    /// Loop factor and offset of the branch that starts at the turning point
    /// `(e_turn, p_turn)` in `direction` and saturates at `sign * P_sat`.
    ///
    /// Solves `k P_sat t + p_off = p_turn` and `k P_sat s + p_off = s P_sat`,
    /// where `t` is the branch `tanh` at `e_turn` and `s` the branch sign.
    /// `k` is clamped to `[K_LOOP_MIN, 1]`; the offset always honours the
    /// saturation endpoint.
    pub fn reversal_rescale(&self, e_turn: T, p_turn: T, direction: SweepDirection) -> (T, T) {
        let p_sat = self.params.p_sat;
        let s = direction.sign::<T>();
        let t = self.branch_tanh(e_turn, direction);
        let den = p_sat * (t - s);
        let k_min = c::<T>(K_LOOP_MIN);
        let k = if den == T::zero() {
            k_min
        } else {
            let k = (p_turn - s * p_sat) / den;
            if k.is_finite() {
                k.max(k_min).min(T::one())
            } else {
                k_min
            }
        };
        let p_off = s * p_sat * (T::one() - k);
        (k, p_off)
    }

    /// `I_pol = (p_new - p_old) / dt * A_tot`.
    pub fn polarization_current(&self, p_new: T, p_old: T, dt: T) -> Result<T> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidArgument(format!("time step must be > 0, got {dt}")));
        }
        Ok((p_new - p_old) / dt * self.params.a_tot)
    }

    /// Polarization-dependent leakage voltage scale `V_P0 - dV_P * P / P_sat`.
    #[inline]
    pub fn v_pe(&self, p_dyn: T) -> T {
        self.params.v_p0 - self.params.dv_p * (p_dyn / self.params.p_sat)
    }

    /// `I_leak = R_A0 A_tot (exp(V / V_PE) - 1)`.
    pub fn leakage_current(&self, v: T, p_dyn: T) -> Result<T> {
        let v_pe = self.v_pe(p_dyn);
        if !(v_pe > T::zero()) {
            return Err(Error::Domain(format!("leakage voltage scale V_PE = {v_pe} is not positive")));
        }
        Ok(self.params.leakage_scale() * (v / v_pe).exp_m1())
    }

    /// d I_leak / dV at fixed polarization.
    pub fn leakage_conductance(&self, v: T, p_dyn: T) -> T {
        let v_pe = self.v_pe(p_dyn);
        self.params.leakage_scale() * (v / v_pe).exp() / v_pe
    }

    /// Advance `state` to terminal voltage `v` over `dt`, sub-stepping when the
    /// polarization would move too far in one step. Returns the new state and
    /// the terminal current components.
    pub fn step(&self, state: &FtjState<T>, v: T, dt: T) -> Result<(FtjState<T>, FtjCurrents<T>)> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be finite and > 0, got {dt}")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("terminal voltage must be finite, got {v}")));
        }
        let mut next = *state;
        let mut substeps = 0u32;
        self.advance(&mut next, state.v_last, v, dt, 0, &mut substeps);
        next.p_old = state.p_dyn;
        next.v_last = v;

        let i_pol = self.polarization_current(next.p_dyn, state.p_dyn, dt)?;
        let i_leak = self.leakage_current(v, next.p_dyn)?;
        let i_disp = self.params.c_de * (v - state.v_last) / dt;
        Ok((next, FtjCurrents { i_pol, i_leak, i_disp, i_total: i_pol + i_leak + i_disp, substeps }))
    }

    fn advance(&self, state: &mut FtjState<T>, v_from: T, v_to: T, dt: T, depth: u32, substeps: &mut u32) {
        let mut trial = *state;
        self.advance_once(&mut trial, v_to, dt);
        let limit = c::<T>(self.options.max_dp_fraction) * self.params.p_sat;
        if (trial.p_dyn - state.p_dyn).abs() > limit && depth < self.options.max_substep_depth {
            let half = dt / c(2.0);
            let v_mid = (v_from + v_to) / c(2.0);
            self.advance(state, v_from, v_mid, half, depth + 1, substeps);
            self.advance(state, v_mid, v_to, half, depth + 1, substeps);
        } else {
            *state = trial;
            *substeps += 1;
        }
    }

    /// Direction bookkeeping followed by a single relaxation step.
    fn advance_once(&self, state: &mut FtjState<T>, v: T, dt: T) {
        let e = self.field(v);
        self.track_direction(state, e);
        let target = self.asymptotic_polarization(e, state.direction, state.k_loop, state.p_off);
        let p = self.relax(state.p_dyn, target, self.tau_pe(e), dt);
        state.p_dyn = p.max(-self.params.p_sat).min(self.params.p_sat);
    }

    fn track_direction(&self, state: &mut FtjState<T>, e: T) {
        let band = c::<T>(self.options.reversal_deadband) * self.params.e_c;
        let reversed = match state.direction {
            SweepDirection::Ascending => e < state.e_peak - band,
            SweepDirection::Descending => e > state.e_peak + band,
        };
        if reversed {
            state.e_turn = state.e_peak;
            state.p_turn = state.p_dyn;
            state.direction = state.direction.reversed();
            if self.options.minor_loops {
                let (k, p_off) = self.reversal_rescale(state.e_turn, state.p_turn, state.direction);
                state.k_loop = k;
                state.p_off = p_off;
            }
            state.e_peak = e;
        } else {
            match state.direction {
                SweepDirection::Ascending if e > state.e_peak => state.e_peak = e,
                SweepDirection::Descending if e < state.e_peak => state.e_peak = e,
                _ => {}
            }
        }
    }

    /// Initial state: fully reset on the initial loop, `p_dyn = -k_init P_sat`,
    /// sitting on the ascending branch at zero field.
    pub fn initial_state(&self) -> FtjState<T> {
        let p = -self.params.k_init * self.params.p_sat;
        FtjState {
            p_dyn: p,
            p_old: p,
            k_loop: self.params.k_init,
            p_off: T::zero(),
            direction: SweepDirection::Ascending,
            e_turn: T::zero(),
            p_turn: p,
            e_peak: T::zero(),
            v_last: T::zero(),
        }
    }

    /// State with polarization `p` at zero field, on the branch of `direction`
    /// that passes through it (as after a reversal at zero field).
    pub fn state_at(&self, p: T, direction: SweepDirection) -> FtjState<T> {
        let p = p.max(-self.params.p_sat).min(self.params.p_sat);
        let (k_loop, p_off) =
            if self.options.minor_loops { self.reversal_rescale(T::zero(), p, direction) } else { (self.params.k_init, T::zero()) };
        FtjState { p_dyn: p, p_old: p, k_loop, p_off, direction, e_turn: T::zero(), p_turn: p, e_peak: T::zero(), v_last: T::zero() }
    }
}

/// Dynamic state of one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FtjState<T: Scalar> {
    /// Dynamic polarization (C/m²).
    pub p_dyn: T,
    /// Polarization at the previous accepted step (C/m²).
    pub p_old: T,
    pub k_loop: T,
    pub p_off: T,
    pub direction: SweepDirection,
    /// Field and polarization at the last reversal.
    pub e_turn: T,
    pub p_turn: T,
    /// Running field extreme in the current sweep direction.
    pub e_peak: T,
    /// Terminal voltage at the previous accepted step.
    pub v_last: T,
}

/// Terminal current split into its branches (A).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FtjCurrents<T> {
    pub i_pol: T,
    pub i_leak: T,
    pub i_disp: T,
    pub i_total: T,
    /// Internal sub-steps taken.
    pub substeps: u32,
}

/// A model together with its evolving state.
#[derive(Debug, Clone)]
pub struct FtjDevice<T: Scalar> {
    model: FtjModel<T>,
    state: FtjState<T>,
}

impl<T: Scalar> FtjDevice<T> {
    pub fn new(model: FtjModel<T>) -> Self {
        let state = model.initial_state();
        FtjDevice { model, state }
    }

    pub fn with_state(model: FtjModel<T>, state: FtjState<T>) -> Self {
        FtjDevice { model, state }
    }

    pub fn model(&self) -> &FtjModel<T> {
        &self.model
    }

    pub fn state(&self) -> &FtjState<T> {
        &self.state
    }

    pub fn set_state(&mut self, state: FtjState<T>) {
        self.state = state;
    }

    pub fn polarization(&self) -> T {
        self.state.p_dyn
    }

    pub fn step(&mut self, v: T, dt: T) -> Result<FtjCurrents<T>> {
        let (next, currents) = self.model.step(&self.state, v, dt)?;
        self.state = next;
        Ok(currents)
    }
}

//! Inverter with a biased PMOS load; the load gate voltage sets the
//! switching threshold.

use super::mosfet::MosfetParams;
use crate::scalar::{c, Scalar};

/// Static transfer of one inverter stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverter<T: Scalar> {
    pub nmos: MosfetParams<T>,
    pub pmos: MosfetParams<T>,
    pub v_dd: T,
    /// PMOS gate bias (V).
    pub v_p: T,
    /// Output bisection tolerance (V).
    pub tol: T,
}

impl<T: Scalar> Inverter<T> {
    /// Net current into the output node at `v_out`: PMOS pull-up minus NMOS
    /// pull-down. Non-increasing in `v_out`.
    fn node_current(&self, v_in: T, v_out: T) -> T {
        let pull_up = -self.pmos.drain_current(self.v_p - self.v_dd, v_out - self.v_dd);
        let pull_down = self.nmos.drain_current(v_in, v_out);
        pull_up - pull_down
    }

    /// DC output for input `v_in`, found by bisection on `[0, v_dd]`.
    /// Without a sign change the output sits at the rail the remaining
    /// device pulls towards.
    pub fn output(&self, v_in: T) -> T {
        let (mut lo, mut hi) = (T::zero(), self.v_dd);
        if self.node_current(v_in, lo) <= T::zero() {
            return lo;
        }
        if self.node_current(v_in, hi) >= T::zero() {
            return hi;
        }
        while hi - lo > self.tol {
            let mid = (lo + hi) / c(2.0);
            if self.node_current(v_in, mid) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / c(2.0)
    }

    /// Switching threshold: the input at which output equals input.
    pub fn threshold(&self) -> T {
        let (mut lo, mut hi) = (T::zero(), self.v_dd);
        let tol = self.tol / c(16.0);
        while hi - lo > tol {
            let mid = (lo + hi) / c(2.0);
            if self.output(mid) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / c(2.0)
    }
}

/// Free-function form of [`Inverter::output`].
pub fn inverter_output<T: Scalar>(v_in: T, v_p: T, n_params: &MosfetParams<T>, p_params: &MosfetParams<T>, v_dd: T) -> T {
    Inverter { nmos: *n_params, pmos: *p_params, v_dd, v_p, tol: c(1e-4) }.output(v_in)
}

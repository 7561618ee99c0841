use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Relative permittivity of the non-ferroelectric HZO phases used for the
/// default dielectric branch.
pub const DEFAULT_EPS_R: f64 = 25.0;

/// Calibration constants of the FTJ compact model, all in SI units.
///
/// The defaults are the calibrated device values; `t_fe` and `c_de` complete
/// the geometry that the calibration leaves implicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(default, deny_unknown_fields)]
pub struct FtjParams<T: Scalar> {
    /// Effective coercive field (V/m).
    pub e_c: T,
    /// Initial loop scaling factor, in (0, 1].
    pub k_init: T,
    /// Saturation polarization (C/m²).
    pub p_sat: T,
    /// Remanent polarization (C/m²).
    pub p_r: T,
    /// Kinetic time constant (s).
    pub tau_p: T,
    /// Kinetic field-broadening exponent.
    pub alpha_e: T,
    /// Device area (m²).
    pub a_tot: T,
    /// Leakage prefactor as a current density (A/m²); the leakage scale is
    /// `r_a0 * a_tot`.
    pub r_a0: T,
    /// Leakage voltage scale at zero polarization (V).
    pub v_p0: T,
    /// Polarization modulation of the leakage voltage scale (V).
    pub dv_p: T,
    /// Ferroelectric thickness (m), converts terminal voltage to field.
    pub t_fe: T,
    /// Parallel dielectric capacitance (F).
    pub c_de: T,
}

impl<T: Scalar> Default for FtjParams<T> {
    fn default() -> Self {
        let a_tot = 3.14e-8;
        let t_fe = 10e-9;
        FtjParams {
            e_c: c(3.3e8),
            k_init: c(0.5),
            p_sat: c(0.200_000),
            p_r: c(0.199_997),
            tau_p: c(10e-6),
            alpha_e: c(0.25),
            a_tot: c(a_tot),
            r_a0: c(110e-6),
            v_p0: c(0.36),
            dv_p: c(0.06),
            t_fe: c(t_fe),
            c_de: c(EPSILON_0 * DEFAULT_EPS_R * a_tot / t_fe),
        }
    }
}

impl<T: Scalar> FtjParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("e_c", self.e_c),
            ("p_sat", self.p_sat),
            ("p_r", self.p_r),
            ("tau_p", self.tau_p),
            ("alpha_e", self.alpha_e),
            ("a_tot", self.a_tot),
            ("r_a0", self.r_a0),
            ("v_p0", self.v_p0),
            ("t_fe", self.t_fe),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > T::zero()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.dv_p.is_finite() && self.dv_p >= T::zero()) {
            return Err(Error::param("dv_p", format!("must be finite and >= 0, got {}", self.dv_p)));
        }
        if !(self.c_de.is_finite() && self.c_de >= T::zero()) {
            return Err(Error::param("c_de", format!("must be finite and >= 0, got {}", self.c_de)));
        }
        if self.p_r >= self.p_sat {
            return Err(Error::param("p_r", format!("must be below p_sat ({} >= {})", self.p_r, self.p_sat)));
        }
        if !(self.k_init > T::zero() && self.k_init <= T::one()) {
            return Err(Error::param("k_init", format!("must lie in (0, 1], got {}", self.k_init)));
        }
        // V_PE stays positive over the whole polarization range.
        if self.dv_p >= self.v_p0 {
            return Err(Error::param("dv_p", format!("must be below v_p0 ({} >= {})", self.dv_p, self.v_p0)));
        }
        Ok(())
    }

    /// Leakage scale `r_a0 * a_tot` (A).
    pub fn leakage_scale(&self) -> T {
        self.r_a0 * self.a_tot
    }

    /// Coercive voltage across the ferroelectric layer (V).
    pub fn coercive_voltage(&self) -> T {
        self.e_c * self.t_fe
    }

    /// Dielectric capacitance for a given relative permittivity at the current
    /// geometry.
    pub fn dielectric_capacitance(&self, eps_r: T) -> T {
        c::<T>(EPSILON_0) * eps_r * self.a_tot / self.t_fe
    }

    pub fn cast<U: Scalar>(&self) -> FtjParams<U> {
        let f = |x: T| U::lit(x.as_f64());
        FtjParams {
            e_c: f(self.e_c),
            k_init: f(self.k_init),
            p_sat: f(self.p_sat),
            p_r: f(self.p_r),
            tau_p: f(self.tau_p),
            alpha_e: f(self.alpha_e),
            a_tot: f(self.a_tot),
            r_a0: f(self.r_a0),
            v_p0: f(self.v_p0),
            dv_p: f(self.dv_p),
            t_fe: f(self.t_fe),
            c_de: f(self.c_de),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_calibration_values_in_si() {
        let p = FtjParams::<f64>::default();
        // 3.3 MV/cm, 20 uC/cm^2, 19.9997 uC/cm^2, 3.14e-4 cm^2
        assert_eq!(p.e_c, 3.3e6 * 1e2);
        assert!((p.p_sat - 20e-6 * 1e4).abs() < 1e-15);
        assert!((p.p_r - 19.9997e-6 * 1e4).abs() < 1e-15);
        assert!((p.a_tot - 3.14e-4 * 1e-4).abs() < 1e-20);
        assert_eq!(p.tau_p, 10e-6);
        assert_eq!(p.alpha_e, 0.25);
        assert_eq!(p.k_init, 0.5);
        assert_eq!(p.v_p0, 0.36);
        assert_eq!(p.dv_p, 0.06);
        assert!((p.coercive_voltage() - 3.3).abs() < 1e-12);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_remanence_at_saturation() {
        let p = FtjParams::<f64> { p_r: 0.2, ..Default::default() };
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "p_r", .. })));
    }

    #[test]
    fn rejects_bad_k_and_nonpositive_constants() {
        let p = FtjParams::<f64> { k_init: 1.5, ..Default::default() };
        assert!(p.validate().is_err());
        let p = FtjParams::<f64> { tau_p: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = FtjParams::<f64> { dv_p: 0.4, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn dielectric_default_matches_eps_r_25() {
        let p = FtjParams::<f64>::default();
        let expect = p.dielectric_capacitance(25.0);
        assert!((p.c_de - expect).abs() / expect < 1e-12);
        assert!((p.c_de - 6.95e-10).abs() < 1e-12);
    }
}

use std::io::Read;

use nalgebra::{DMatrix, DVector};

use crate::device::{FtjModel, FtjParams, ModelOptions};
use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// Parameters the fitter may adjust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FreeParam {
    VP0,
    DvP,
    RA0,
    EC,
    TauP,
    AlphaE,
}

impl FreeParam {
    pub const ALL: [FreeParam; 6] = [FreeParam::VP0, FreeParam::DvP, FreeParam::RA0, FreeParam::EC, FreeParam::TauP, FreeParam::AlphaE];

    pub fn name(self) -> &'static str {
        match self {
            FreeParam::VP0 => "v_p0",
            FreeParam::DvP => "dv_p",
            FreeParam::RA0 => "r_a0",
            FreeParam::EC => "e_c",
            FreeParam::TauP => "tau_p",
            FreeParam::AlphaE => "alpha_e",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown free parameter {name:?} (expected one of v_p0, dv_p, r_a0, e_c, tau_p, alpha_e)"))
        })
    }

    pub fn get<T: Scalar>(self, p: &FtjParams<T>) -> T {
        match self {
            FreeParam::VP0 => p.v_p0,
            FreeParam::DvP => p.dv_p,
            FreeParam::RA0 => p.r_a0,
            FreeParam::EC => p.e_c,
            FreeParam::TauP => p.tau_p,
            FreeParam::AlphaE => p.alpha_e,
        }
    }

    pub fn set<T: Scalar>(self, p: &mut FtjParams<T>, v: T) {
        match self {
            FreeParam::VP0 => p.v_p0 = v,
            FreeParam::DvP => p.dv_p = v,
            FreeParam::RA0 => p.r_a0 = v,
            FreeParam::EC => p.e_c = v,
            FreeParam::TauP => p.tau_p = v,
            FreeParam::AlphaE => p.alpha_e = v,
        }
    }
}

impl std::fmt::Display for FreeParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Sampled terminal voltage and current of a measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredTrace<T> {
    pub t: Vec<T>,
    pub v: Vec<T>,
    pub i: Vec<T>,
}

impl<T: Scalar> MeasuredTrace<T> {
    pub fn new(t: Vec<T>, v: Vec<T>, i: Vec<T>) -> Result<Self> {
        if t.len() < 2 || t.len() != v.len() || t.len() != i.len() {
            return Err(Error::InvalidArgument(format!(
                "trace needs >= 2 samples of equal length (t {}, v {}, i {})",
                t.len(),
                v.len(),
                i.len()
            )));
        }
        if let Some(w) = t.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!("sample times must increase: {} then {}", w[0], w[1])));
        }
        if t.iter().chain(&v).chain(&i).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("trace contains non-finite samples".into()));
        }
        Ok(MeasuredTrace { t, v, i })
    }

    /// Reads a CSV with columns `t`, `v` and `i` (or `i_total`); other
    /// columns are ignored, so device traces load directly.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = |names: &[&str]| {
            names
                .iter()
                .find_map(|n| headers.iter().position(|h| h.trim() == *n))
                .ok_or_else(|| Error::InvalidArgument(format!("trace has no {} column", names.join("/"))))
        };
        let (ct, cv, ci) = (col(&["t"])?, col(&["v"])?, col(&["i", "i_total"])?);
        let (mut t, mut v, mut i) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<T> {
                let s = rec.get(k).unwrap_or("").trim();
                s.parse::<f64>().map(T::lit).map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")))
            };
            t.push(num(ct)?);
            v.push(num(cv)?);
            i.push(num(ci)?);
        }
        Self::new(t, v, i)
    }
}

/// Terminal current of a fresh device driven through the trace's voltage
/// samples. The first sample is the initial state and carries no current.
pub fn simulate_current<T: Scalar>(model: &FtjModel<T>, trace: &MeasuredTrace<T>) -> Result<Vec<T>> {
    let mut state = model.initial_state();
    let mut out = Vec::with_capacity(trace.t.len());
    out.push(T::zero());
    for k in 1..trace.t.len() {
        let (next, cur) = model.step(&state, trace.v[k], trace.t[k] - trace.t[k - 1])?;
        state = next;
        out.push(cur.i_total);
    }
    Ok(out)
}

/// Simulated minus measured current for every sample after the first.
fn errors<T: Scalar>(params: &FtjParams<T>, options: ModelOptions, trace: &MeasuredTrace<T>) -> Result<Vec<T>> {
    let model = FtjModel::with_options(*params, options)?;
    let sim = simulate_current(&model, trace)?;
    Ok(sim.iter().zip(&trace.i).skip(1).map(|(s, m)| *s - *m).collect())
}

/// Sum of squared current errors over all samples after the first.
pub fn residual<T: Scalar>(params: &FtjParams<T>, options: ModelOptions, trace: &MeasuredTrace<T>) -> Result<T> {
    Ok(errors(params, options, trace)?.into_iter().fold(T::zero(), |acc, e| acc + e * e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions<T> {
    pub max_sweeps: usize,
    /// Relative parameter change below which a sweep counts as converged.
    pub tol: T,
}

impl<T: Scalar> Default for CalibrationOptions<T> {
    fn default() -> Self {
        CalibrationOptions { max_sweeps: 200, tol: c(1e-10) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport<T: Scalar> {
    pub params: FtjParams<T>,
    pub free: Vec<FreeParam>,
    pub initial_residual: T,
    pub final_residual: T,
    pub sweeps: usize,
    pub evaluations: usize,
}

struct Objective<'a, T: Scalar> {
    base: FtjParams<T>,
    free: &'a [FreeParam],
    options: ModelOptions,
    trace: &'a MeasuredTrace<T>,
    evaluations: usize,
}

impl<T: Scalar> Objective<'_, T> {
    fn params_at(&self, x: &[T]) -> FtjParams<T> {
        let mut p = self.base;
        for (f, v) in self.free.iter().zip(x) {
            f.set(&mut p, *v);
        }
        p
    }

    /// Residual at `x`; parameter sets the model rejects score +inf.
    fn eval(&mut self, x: &[T]) -> Result<T> {
        self.evaluations += 1;
        match residual(&self.params_at(x), self.options, self.trace) {
            Ok(r) if r.is_nan() => Err(Error::Numerical(format!("residual is NaN at {}", describe(self.free, x)))),
            Ok(r) => Ok(r),
            Err(Error::InvalidParameter { .. } | Error::Domain(_)) => Ok(T::infinity()),
            Err(e) => Err(e),
        }
    }

    /// Golden-section minimum of `s -> f(x + s d)` over `[lo, hi]`.
    fn line(&mut self, x: &[T], d: &[T], lo: T, hi: T, tol: T) -> Result<(T, T)> {
        let at = |s: T| -> Vec<T> { x.iter().zip(d).map(|(xi, di)| *xi + s * *di).collect() };
        let g = c::<T>(0.618_033_988_749_894_8);
        let (mut a, mut b) = (lo, hi);
        let mut s1 = b - g * (b - a);
        let mut s2 = a + g * (b - a);
        let mut f1 = self.eval(&at(s1))?;
        let mut f2 = self.eval(&at(s2))?;
        while (b - a) > tol {
            if f1 <= f2 {
                b = s2;
                s2 = s1;
                f2 = f1;
                s1 = b - g * (b - a);
                f1 = self.eval(&at(s1))?;
            } else {
                a = s1;
                s1 = s2;
                f1 = f2;
                s2 = a + g * (b - a);
                f2 = self.eval(&at(s2))?;
            }
        }
        Ok(if f1 <= f2 { (s1, f1) } else { (s2, f2) })
    }
}

impl<T: Scalar> Objective<'_, T> {
    /// Jacobian of the current errors with respect to the log of each free
    /// parameter, together with the errors at `x`.
    fn jacobian(&mut self, x: &[T]) -> Result<Option<(DMatrix<f64>, DVector<f64>)>> {
        let r0 = errors(&self.params_at(x), self.options, self.trace)?;
        let h: f64 = 1e-6;
        let mut jac = DMatrix::<f64>::zeros(r0.len(), x.len());
        for j in 0..x.len() {
            let mut xj = x.to_vec();
            xj[j] = x[j] * c(h.exp());
            self.evaluations += 1;
            let rj = match errors(&self.params_at(&xj), self.options, self.trace) {
                Ok(r) => r,
                Err(Error::InvalidParameter { .. } | Error::Domain(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            for (k, (a, b)) in rj.iter().zip(&r0).enumerate() {
                jac[(k, j)] = (*a - *b).as_f64() / h;
            }
        }
        Ok(Some((jac, DVector::from_iterator(r0.len(), r0.iter().map(|v| v.as_f64())))))
    }

    /// Damped Gauss-Newton iterations in log-parameter space. Returns the
    /// improved point and residual when any step was accepted.
    fn levenberg_marquardt(&mut self, x: &[T], f0: T, iterations: usize) -> Result<Option<(Vec<T>, T)>> {
        let mut x = x.to_vec();
        let mut f = f0;
        let mut lambda = 1e-3;
        let mut improved = false;
        for _ in 0..iterations {
            let Some((jac, r)) = self.jacobian(&x)? else { break };
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * r;
            let mut accepted = false;
            for _ in 0..12 {
                let mut a = jtj.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
                }
                let Some(step) = a.lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<T> = x.iter().zip(step.iter()).map(|(xi, s)| *xi * c::<T>(*s).exp()).collect();
                let ft = self.eval(&trial)?;
                if ft < f {
                    x = trial;
                    f = ft;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    improved = true;
                    break;
                }
                lambda *= 4.0;
            }
            if !accepted {
                break;
            }
        }
        Ok(improved.then_some((x, f)))
    }
}

fn describe<T: Scalar>(free: &[FreeParam], x: &[T]) -> String {
    free.iter().zip(x).map(|(f, v)| format!("{f} = {v}")).collect::<Vec<_>>().join(", ")
}

/// Coordinate descent with a golden-section search along each free
/// parameter. Every sweep ends with a few Levenberg-Marquardt steps in
/// log-parameter space, which carry the fit along narrow valleys where the
/// parameters trade off against each other.
///
/// Deterministic: identical inputs give identical results.
pub fn calibrate<T: Scalar>(
    start: &FtjParams<T>,
    model_options: ModelOptions,
    trace: &MeasuredTrace<T>,
    free: &[FreeParam],
    options: &CalibrationOptions<T>,
) -> Result<CalibrationReport<T>> {
    start.validate()?;
    for (i, f) in free.iter().enumerate() {
        if free[..i].contains(f) {
            return Err(Error::InvalidArgument(format!("free parameter {f} listed twice")));
        }
    }
    let mut obj = Objective { base: *start, free, options: model_options, trace, evaluations: 0 };
    let mut x: Vec<T> = free.iter().map(|f| f.get(start)).collect();
    let initial = obj.eval(&x)?;
    if !initial.is_finite() {
        return Err(Error::Numerical(format!("initial residual is {initial}")));
    }
    let mut best = initial;
    let mut width: Vec<T> = x.iter().map(|v| v.abs() * c(0.5)).collect();
    let mut sweeps = 0;
    while sweeps < options.max_sweeps && !free.is_empty() && best > T::zero() {
        sweeps += 1;
        let x_prev = x.clone();
        for j in 0..free.len() {
            let mut d = vec![T::zero(); free.len()];
            d[j] = T::one();
            let floor = x[j].abs() * options.tol;
            for _ in 0..8 {
                let lo = (-width[j]).max(-x[j] * c(0.999));
                let (s, f) = obj.line(&x, &d, lo, width[j], floor.max(T::min_positive_value()))?;
                let at_edge = (width[j] - s) < width[j] * c(0.01) || (s - lo < width[j] * c(0.01) && lo > -x[j] * c(0.999));
                if f < best {
                    best = f;
                    x[j] = x[j] + s;
                }
                if !at_edge {
                    width[j] = (s.abs() * c(4.0)).max(x[j].abs() * options.tol * c(100.0));
                    break;
                }
                width[j] = width[j] * c(4.0);
            }
        }
        if let Some((xn, f)) = obj.levenberg_marquardt(&x, best, 4)? {
            best = f;
            x = xn;
        }
        let moved = x.iter().zip(&x_prev).map(|(a, b)| ((*a - *b) / *b).abs()).fold(T::zero(), T::max);
        if moved < options.tol {
            break;
        }
    }
    if !best.is_finite() {
        return Err(Error::Numerical(format!("residual became {best} at {}", describe(free, &x))));
    }
    let mut params = *start;
    for (f, v) in free.iter().zip(&x) {
        f.set(&mut params, *v);
    }
    Ok(CalibrationReport {
        params,
        free: free.to_vec(),
        initial_residual: initial,
        final_residual: best,
        sweeps,
        evaluations: obj.evaluations,
    })
}

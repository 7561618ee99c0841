//! Piecewise-linear drive waveforms and multi-terminal schedules.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// Default slew given to "square" pulses, as a fraction of the width.
pub const DEFAULT_MIN_SLEW_FRACTION: f64 = 0.01;

/// Piecewise-linear signal defined by strictly time-ordered breakpoints.
///
/// Outside its span the signal holds the first/last breakpoint value.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl<T: Scalar> {
    points: Vec<(T, T)>,
}

impl<T: Scalar> Pwl<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("waveform needs at least one breakpoint".into()));
        }
        for &(t, v) in &points {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite breakpoint ({t}, {v})")));
            }
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument(format!("breakpoints must be strictly increasing in time: {} then {}", w[0].0, w[1].0)));
        }
        Ok(Pwl { points })
    }

    pub fn constant(v: T) -> Self {
        Pwl { points: vec![(T::zero(), v)] }
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn start(&self) -> T {
        self.points[0].0
    }

    pub fn end(&self) -> T {
        self.points[self.points.len() - 1].0
    }

    pub fn duration(&self) -> T {
        self.end() - self.start()
    }

    pub fn first_value(&self) -> T {
        self.points[0].1
    }

    pub fn last_value(&self) -> T {
        self.points[self.points.len() - 1].1
    }

    pub fn eval(&self, t: T) -> T {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        // first index with time > t; t lies in [pts[i-1].0, pts[i].0)
        let i = pts.partition_point(|&(tp, _)| tp <= t);
        let (t0, v0) = pts[i - 1];
        let (t1, v1) = pts[i];
        if t == t0 {
            return v0;
        }
        v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
    }

    /// Breakpoint times strictly inside `(t0, t1)`.
    pub fn breakpoints_between(&self, t0: T, t1: T) -> impl Iterator<Item = T> + '_ {
        let lo = self.points.partition_point(|&(tp, _)| tp <= t0);
        self.points[lo..].iter().map(|p| p.0).take_while(move |&tp| tp < t1)
    }

    /// Same waveform delayed by `dt`.
    pub fn shifted(&self, dt: T) -> Self {
        Pwl { points: self.points.iter().map(|&(t, v)| (t + dt, v)).collect() }
    }

    /// Appends `other` so that its start coincides with this waveform's end.
    ///
    /// The junction must be continuous; the coinciding breakpoint is merged.
    pub fn concat(&self, other: &Pwl<T>) -> Result<Self> {
        let shift = self.end() - other.start();
        let mut points = self.points.clone();
        let mut rest = other.points.iter().map(|&(t, v)| (t + shift, v));
        let (t_join, v_join) = rest.next().expect("non-empty waveform");
        if v_join != self.last_value() {
            return Err(Error::InvalidArgument(format!("discontinuous concatenation at t = {t_join}: {} -> {v_join}", self.last_value())));
        }
        points.extend(rest);
        Pwl::new(points)
    }

    /// Total variation of the signal (integral of |dV/dt|).
    pub fn total_variation(&self) -> T {
        self.points.windows(2).fold(T::zero(), |acc, w| acc + (w[1].1 - w[0].1).abs())
    }

    pub fn peak_abs(&self) -> T {
        self.points.iter().fold(T::zero(), |m, p| m.max(p.1.abs()))
    }

    /// Writes the waveform as a two-column `t,v` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "v"])?;
        for &(t, v) in &self.points {
            wtr.serialize((t, v))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let points = rdr.deserialize::<(T, T)>().collect::<std::result::Result<Vec<_>, _>>()?;
        Pwl::new(points)
    }
}

/// Incrementally builds a [`Pwl`], merging repeated breakpoints.
#[derive(Debug, Clone)]
struct PwlBuilder<T: Scalar> {
    points: Vec<(T, T)>,
}

impl<T: Scalar> PwlBuilder<T> {
    fn new() -> Self {
        PwlBuilder { points: Vec::new() }
    }

    fn push(&mut self, t: T, v: T) -> Result<()> {
        if let Some(&(tl, vl)) = self.points.last() {
            if t == tl {
                if v == vl {
                    return Ok(());
                }
                return Err(Error::InvalidArgument(format!("vertical step at t = {t}: {vl} -> {v}")));
            }
        }
        self.points.push((t, v));
        Ok(())
    }

    fn build(self) -> Result<Pwl<T>> {
        Pwl::new(self.points)
    }
}

/// Shape of a single trapezoidal pulse.
///
/// The pulse sits at `baseline`, waits `delay`, ramps over `rise` to
/// `baseline + amplitude`, holds for `width` and ramps back over `fall`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PulseSpec<T: Scalar> {
    pub amplitude: T,
    pub width: T,
    pub rise: T,
    pub fall: T,
    pub baseline: T,
    pub delay: T,
}

impl<T: Scalar> PulseSpec<T> {
    /// Nominally square pulse with the default minimum slew.
    pub fn square(amplitude: T, width: T) -> Self {
        Self::square_with_slew(amplitude, width, c(DEFAULT_MIN_SLEW_FRACTION))
    }

    /// Nominally square pulse whose edges take `slew_fraction * width`.
    pub fn square_with_slew(amplitude: T, width: T, slew_fraction: T) -> Self {
        let edge = width * slew_fraction;
        PulseSpec { amplitude, width, rise: edge, fall: edge, baseline: T::zero(), delay: T::zero() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("width", self.width), ("rise", self.rise), ("fall", self.fall), ("delay", self.delay)] {
            if !(x >= T::zero() && x.is_finite()) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {x}")));
            }
        }
        if !self.amplitude.is_finite() || !self.baseline.is_finite() {
            return Err(Error::param("amplitude", "must be finite"));
        }
        if self.amplitude != T::zero() && (self.rise == T::zero() || self.fall == T::zero()) {
            return Err(Error::param("rise", "pulse edges need a non-zero slew"));
        }
        if self.width + self.rise + self.fall <= T::zero() {
            return Err(Error::param("width", "pulse has zero duration"));
        }
        Ok(())
    }

    /// Duration of the pulse itself, excluding `delay`.
    pub fn span(&self) -> T {
        self.rise + self.width + self.fall
    }

    /// Single pulse including its delay.
    pub fn to_pwl(&self) -> Result<Pwl<T>> {
        pulse_train(self, 1, T::zero())
    }

    fn push_into(&self, b: &mut PwlBuilder<T>, t0: T) -> Result<()> {
        let top = self.baseline + self.amplitude;
        b.push(t0, self.baseline)?;
        b.push(t0 + self.rise, top)?;
        b.push(t0 + self.rise + self.width, top)?;
        b.push(t0 + self.span(), self.baseline)
    }
}

/// `n` identical pulses separated by `gap` at baseline.
///
/// Duration: `delay + n * (rise + width + fall) + (n - 1) * gap`.
pub fn pulse_train<T: Scalar>(spec: &PulseSpec<T>, n: usize, gap: T) -> Result<Pwl<T>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("pulse train needs n >= 1".into()));
    }
    if !(gap >= T::zero()) {
        return Err(Error::InvalidArgument(format!("gap must be >= 0, got {gap}")));
    }
    let mut b = PwlBuilder::new();
    b.push(T::zero(), spec.baseline)?;
    let period = spec.span() + gap;
    for i in 0..n {
        let t0 = spec.delay + T::from_usize(i).expect("pulse index") * period;
        spec.push_into(&mut b, t0)?;
    }
    b.build()
}

/// Symmetric triangle from 0 to `amplitude` at `width / 2` and back to 0.
pub fn triangular_pulse<T: Scalar>(amplitude: T, width: T) -> Result<Pwl<T>> {
    if !(width > T::zero()) {
        return Err(Error::InvalidArgument(format!("triangle width must be > 0, got {width}")));
    }
    Pwl::new(vec![(T::zero(), T::zero()), (width / c(2.0), amplitude), (width, T::zero())])
}

/// Label of one pulse in a PUND train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PundPulse {
    P,
    U,
    N,
    D,
}

impl PundPulse {
    pub const ALL: [PundPulse; 4] = [PundPulse::P, PundPulse::U, PundPulse::N, PundPulse::D];
}

/// Positive-up-negative-down drive with the time window of each pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PundSequence<T: Scalar> {
    pub waveform: Pwl<T>,
    /// `(start, end)` of the P, U, N and D pulses.
    pub windows: [(T, T); 4],
}

impl<T: Scalar> PundSequence<T> {
    pub fn window(&self, pulse: PundPulse) -> (T, T) {
        self.windows[pulse as usize]
    }
}

/// Four equal trapezoids `+a, +a, -a, -a` of total width `width`, each edge
/// taking `rise_fraction * width`, separated by `gap` at 0 V.
pub fn pund_sequence<T: Scalar>(amplitude: T, width: T, rise_fraction: T, gap: T) -> Result<PundSequence<T>> {
    if !(rise_fraction > T::zero() && rise_fraction < c(0.5)) {
        return Err(Error::InvalidArgument(format!("rise fraction must lie in (0, 0.5), got {rise_fraction}")));
    }
    if !(width > T::zero()) || !(gap >= T::zero()) {
        return Err(Error::InvalidArgument("PUND width must be > 0 and gap >= 0".into()));
    }
    let edge = width * rise_fraction;
    let plateau = width - edge - edge;
    let mut b = PwlBuilder::new();
    let mut windows = [(T::zero(), T::zero()); 4];
    let signs = [T::one(), T::one(), -T::one(), -T::one()];
    for (i, s) in signs.into_iter().enumerate() {
        let t0 = T::from_usize(i).expect("index") * (width + gap);
        let spec = PulseSpec { amplitude: s * amplitude, width: plateau, rise: edge, fall: edge, baseline: T::zero(), delay: T::zero() };
        spec.push_into(&mut b, t0)?;
        windows[i] = (t0, t0 + width);
    }
    Ok(PundSequence { waveform: b.build()?, windows })
}

/// Operating phase of the neuron protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseTag {
    Reset,
    Set,
    Precharge,
    Integrate,
    Idle,
}

impl PhaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseTag::Reset => "reset",
            PhaseTag::Set => "set",
            PhaseTag::Precharge => "precharge",
            PhaseTag::Integrate => "integrate",
            PhaseTag::Idle => "idle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "reset" => PhaseTag::Reset,
            "set" => PhaseTag::Set,
            "precharge" => PhaseTag::Precharge,
            "integrate" => PhaseTag::Integrate,
            "idle" => PhaseTag::Idle,
            _ => return None,
        })
    }
}

impl std::fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase<T> {
    pub tag: PhaseTag,
    pub start: T,
    pub duration: T,
}

impl<T: Scalar> Phase<T> {
    pub fn end(&self) -> T {
        self.start + self.duration
    }
}

/// Per-terminal piecewise-linear drives plus an ordered list of phases.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriveSchedule<T: Scalar> {
    terminals: BTreeMap<String, Pwl<T>>,
    phases: Vec<Phase<T>>,
}

impl<T: Scalar> DriveSchedule<T> {
    pub fn new() -> Self {
        DriveSchedule { terminals: BTreeMap::new(), phases: Vec::new() }
    }

    pub fn with_terminal(mut self, name: impl Into<String>, wave: Pwl<T>) -> Self {
        self.terminals.insert(name.into(), wave);
        self
    }

    pub fn set_terminal(&mut self, name: impl Into<String>, wave: Pwl<T>) {
        self.terminals.insert(name.into(), wave);
    }

    pub fn terminal(&self, name: &str) -> Option<&Pwl<T>> {
        self.terminals.get(name)
    }

    pub fn terminals(&self) -> impl Iterator<Item = (&str, &Pwl<T>)> {
        self.terminals.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Value of a terminal at `t`; missing terminals read as 0 V.
    pub fn eval(&self, name: &str, t: T) -> T {
        self.terminals.get(name).map_or(T::zero(), |w| w.eval(t))
    }

    pub fn phases(&self) -> &[Phase<T>] {
        &self.phases
    }

    /// Appends a phase; it must start no earlier than the previous one ends.
    pub fn push_phase(&mut self, tag: PhaseTag, start: T, duration: T) -> Result<()> {
        if !(duration > T::zero()) {
            return Err(Error::InvalidArgument(format!("phase {tag} needs a positive duration")));
        }
        if let Some(last) = self.phases.last() {
            if start < last.end() {
                return Err(Error::InvalidArgument(format!("phase {tag} at {start} overlaps {} ending at {}", last.tag, last.end())));
            }
        }
        self.phases.push(Phase { tag, start, duration });
        Ok(())
    }

    pub fn phase_at(&self, t: T) -> Option<&Phase<T>> {
        let i = self.phases.partition_point(|p| p.start <= t);
        let p = self.phases.get(i.checked_sub(1)?)?;
        (t < p.end()).then_some(p)
    }

    /// Latest breakpoint or phase end over all terminals.
    pub fn end(&self) -> T {
        let w = self.terminals.values().map(|w| w.end()).fold(T::zero(), T::max);
        self.phases.last().map_or(w, |p| w.max(p.end()))
    }

    /// Sorted union of all breakpoint times strictly inside `(t0, t1)`.
    pub fn breakpoints_between(&self, t0: T, t1: T) -> Vec<T> {
        let mut out: Vec<T> = self.terminals.values().flat_map(|w| w.breakpoints_between(t0, t1)).collect();
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        out.dedup();
        out
    }
}

/// Sorted time grid over `[t0, t1]` with spacing at most `dt_max` that hits
/// every breakpoint in `extra` exactly.
pub fn time_grid<T: Scalar>(t0: T, t1: T, dt_max: T, extra: &[T]) -> Vec<T> {
    let mut grid = vec![t0];
    let mut anchors: Vec<T> = extra.iter().copied().filter(|&t| t > t0 && t < t1).collect();
    anchors.push(t1);
    let mut prev = t0;
    for a in anchors {
        if a <= prev {
            continue;
        }
        // slack keeps rounding in `a - prev` from adding a step
        let n = ((a - prev) / dt_max - c(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
        let h = (a - prev) / T::from_usize(n).expect("step count");
        for i in 1..n {
            grid.push(prev + h * T::from_usize(i).expect("step index"));
        }
        grid.push(a);
        prev = a;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pulse_train_is_one_pulse() {
        let spec = PulseSpec::<f64>::square(4.0, 10e-6);
        let w = pulse_train(&spec, 1, 5e-6).unwrap();
        assert_eq!(w.points().len(), 4);
        assert_eq!(w.eval(spec.rise + 5e-6), 4.0);
        assert!((w.duration() - spec.span()).abs() < 1e-18);
    }

    #[test]
    fn train_duration_and_baseline_between_pulses() {
        let spec = PulseSpec::<f64> { amplitude: 4.0, width: 10e-6, rise: 0.1e-6, fall: 0.2e-6, baseline: 0.25, delay: 3e-6 };
        let gap = 7e-6;
        for n in [1usize, 2, 4, 8, 16] {
            let w = pulse_train(&spec, n, gap).unwrap();
            let expect = spec.delay + n as f64 * spec.span() + (n as f64 - 1.0) * gap;
            assert!((w.end() - expect).abs() < 1e-15, "n={n}");
            for i in 0..n.saturating_sub(1) {
                let mid_gap = spec.delay + (i + 1) as f64 * spec.span() + i as f64 * gap + gap / 2.0;
                assert_eq!(w.eval(mid_gap), 0.25);
            }
        }
    }

    #[test]
    fn square_pulse_gets_minimum_slew() {
        let spec = PulseSpec::<f64>::square(1.0, 20e-6);
        assert!((spec.rise - 0.2e-6).abs() < 1e-18);
        assert!((spec.fall - 0.2e-6).abs() < 1e-18);
        let bad = PulseSpec { rise: 0.0, ..spec };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn triangle_peak_and_variation() {
        let w = triangular_pulse(-5.0, 500e-6).unwrap();
        assert_eq!(w.eval(250e-6), -5.0);
        assert_eq!(w.eval(0.0), 0.0);
        assert_eq!(w.eval(500e-6), 0.0);
        assert_eq!(w.total_variation(), 10.0);
        assert!(triangular_pulse(1.0, 0.0).is_err());
    }

    #[test]
    fn pund_windows_and_polarities() {
        let s = pund_sequence::<f64>(5.0, 100e-6, 0.3, 100e-6).unwrap();
        let signs = [1.0, 1.0, -1.0, -1.0];
        for (p, sign) in PundPulse::ALL.into_iter().zip(signs) {
            let (a, b) = s.window(p);
            assert!((b - a - 100e-6).abs() < 1e-15);
            assert_eq!(s.waveform.eval(0.5 * (a + b)), 5.0 * sign);
            assert_eq!(s.waveform.eval(a), 0.0);
            assert_eq!(s.waveform.eval(b), 0.0);
        }
        assert!(pund_sequence(5.0, 100e-6, 0.5, 0.0).is_err());
    }

    #[test]
    fn zero_amplitude_pund_is_flat() {
        let s = pund_sequence(0.0, 100e-6, 0.3, 100e-6).unwrap();
        assert!(s.waveform.points().iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn eval_outside_span_holds_end_values() {
        let w = Pwl::new(vec![(1.0, 2.0), (2.0, 3.0)]).unwrap();
        assert_eq!(w.eval(0.0), 2.0);
        assert_eq!(w.eval(5.0), 3.0);
        assert!(Pwl::new(vec![(1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn phases_must_not_overlap() {
        let mut s = DriveSchedule::<f64>::new();
        s.push_phase(PhaseTag::Reset, 0.0, 1.0).unwrap();
        assert!(s.push_phase(PhaseTag::Set, 0.5, 1.0).is_err());
        s.push_phase(PhaseTag::Set, 1.0, 1.0).unwrap();
        assert_eq!(s.phase_at(1.5).unwrap().tag, PhaseTag::Set);
        assert_eq!(s.phase_at(0.0).unwrap().tag, PhaseTag::Reset);
        assert!(s.phase_at(2.5).is_none());
    }

    #[test]
    fn grid_hits_breakpoints() {
        let g = time_grid(0.0, 1.0, 0.3, &[0.5, 0.55]);
        assert!(g.contains(&0.5) && g.contains(&0.55));
        assert!(g.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.3 + 1e-15));
        assert_eq!(*g.last().unwrap(), 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let w = pulse_train(&PulseSpec::square(3.3, 1e-6), 3, 2e-6).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert!(std::str::from_utf8(&buf).unwrap().starts_with("t,v\n"));
        let back = Pwl::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, w);
    }

    fn arb_pwl() -> impl Strategy<Value = Pwl<f64>> {
        prop::collection::vec((1e-7f64..1e-3, -5.0f64..5.0), 1..8).prop_map(|steps| {
            let mut t = 0.0;
            let mut pts = vec![(0.0, 0.0)];
            for (dt, v) in steps {
                t += dt;
                pts.push((t, v));
            }
            // end at 0 V so that any two waveforms concatenate continuously
            pts.push((t + 1e-6, 0.0));
            Pwl::new(pts).unwrap()
        })
    }

    proptest! {
        #[test]
        fn breakpoints_evaluate_exactly(w in arb_pwl()) {
            for &(t, v) in w.points() {
                prop_assert_eq!(w.eval(t), v);
            }
        }

        #[test]
        fn concat_is_associative_and_additive(a in arb_pwl(), b in arb_pwl(), cc in arb_pwl()) {
            let left = a.concat(&b).unwrap().concat(&cc).unwrap();
            let right = a.concat(&b.concat(&cc).unwrap()).unwrap();
            prop_assert_eq!(left.points().len(), right.points().len());
            for (p, q) in left.points().iter().zip(right.points()) {
                prop_assert!((p.0 - q.0).abs() <= 1e-12 * p.0.abs().max(1e-12));
                prop_assert_eq!(p.1, q.1);
            }
            let total = a.duration() + b.duration() + cc.duration();
            prop_assert!((left.duration() - total).abs() <= 1e-12 * total);
        }
    }
}

use std::io::{Read, Write};

use rayon::prelude::*;

use super::config::{CircuitConfig, WritePulse};
use super::neuron::run_neuron;
use crate::device::FtjModel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome of one (amplitude, width) cell.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepCell {
    Fired(usize),
    /// No fire within `n_max` pulses.
    NoFire,
    /// Simulation failed; the message is kept for reporting.
    Failed(String),
}

/// Pulses-to-fire matrix, rows by amplitude and columns by width.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub amplitudes: Vec<T>,
    pub widths: Vec<T>,
    pub n_max: usize,
    pub cells: Vec<Vec<SweepCell>>,
}

impl<T: Scalar> SweepResult<T> {
    /// Count used in the matrix: `n_max + 1` for no fire, `-1` for failures.
    pub fn count(&self, i: usize, j: usize) -> i64 {
        match &self.cells[i][j] {
            SweepCell::Fired(n) => *n as i64,
            SweepCell::NoFire => self.n_max as i64 + 1,
            SweepCell::Failed(_) => -1,
        }
    }

    pub fn counts(&self) -> Vec<Vec<i64>> {
        (0..self.amplitudes.len()).map(|i| (0..self.widths.len()).map(|j| self.count(i, j)).collect()).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = (T, T, &str)> + '_ {
        self.cells.iter().enumerate().flat_map(move |(i, row)| {
            row.iter().enumerate().filter_map(move |(j, c)| match c {
                SweepCell::Failed(m) => Some((self.amplitudes[i], self.widths[j], m.as_str())),
                _ => None,
            })
        })
    }

    /// Header `amplitude,<widths...>`, then one row per amplitude.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["amplitude".to_string()];
        header.extend(self.widths.iter().map(|w| w.to_string()));
        wtr.write_record(&header)?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let mut rec = vec![a.to_string()];
            rec.extend((0..self.widths.len()).map(|j| self.count(i, j).to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a matrix written by [`SweepResult::write_csv`]. `n_max` is needed
    /// to tell no-fire cells apart from fire counts.
    pub fn read_csv<R: Read>(r: R, n_max: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        let mut records = rdr.records();
        let header = records.next().ok_or_else(|| Error::InvalidArgument("empty sweep file".into()))??;
        let parse = |s: &str| -> Result<T> {
            s.trim().parse::<f64>().map(T::lit).map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")))
        };
        let widths = header.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        let mut amplitudes = Vec::new();
        let mut cells = Vec::new();
        for rec in records {
            let rec = rec?;
            if rec.len() != widths.len() + 1 {
                return Err(Error::InvalidArgument(format!("sweep row has {} cells, expected {}", rec.len(), widths.len() + 1)));
            }
            amplitudes.push(parse(&rec[0])?);
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    let n: i64 = s.trim().parse().map_err(|e| Error::InvalidArgument(format!("bad count {s:?}: {e}")))?;
                    Ok(match n {
                        -1 => SweepCell::Failed(String::new()),
                        n if n == n_max as i64 + 1 => SweepCell::NoFire,
                        n if n >= 1 && n <= n_max as i64 => SweepCell::Fired(n as usize),
                        n => return Err(Error::InvalidArgument(format!("count {n} outside 1..={}", n_max + 1))),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(row);
        }
        Ok(SweepResult { amplitudes, widths, n_max, cells })
    }
}

/// Runs the neuron for every (amplitude, width) pair in parallel.
///
/// `threads` caps the worker count; results do not depend on it.
pub fn sweep_pulses_to_fire<T: Scalar>(
    cfg: &CircuitConfig<T>,
    model: &FtjModel<T>,
    amplitudes: &[T],
    widths: &[T],
    n_max: usize,
    threads: Option<usize>,
) -> Result<SweepResult<T>> {
    if amplitudes.is_empty() || widths.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one amplitude and one width".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    cfg.validate(model.params())?;
    let jobs: Vec<(usize, usize)> = (0..amplitudes.len()).flat_map(|i| (0..widths.len()).map(move |j| (i, j))).collect();
    let run = |&(i, j): &(usize, usize)| -> SweepCell {
        let mut c = *cfg;
        c.set_pulse = WritePulse { amplitude: amplitudes[i], width: widths[j] };
        match run_neuron(&c, model, n_max, false) {
            Ok(r) => r.pulses_before_fire.map_or(SweepCell::NoFire, SweepCell::Fired),
            Err(e) => SweepCell::Failed(e.to_string()),
        }
    };
    let flat: Vec<SweepCell> = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| jobs.par_iter().map(run).collect())
        }
        None => jobs.par_iter().map(run).collect(),
    };
    let cells = flat.chunks(widths.len()).map(<[SweepCell]>::to_vec).collect();
    Ok(SweepResult { amplitudes: amplitudes.to_vec(), widths: widths.to_vec(), n_max, cells })
}

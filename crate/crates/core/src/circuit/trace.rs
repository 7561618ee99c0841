use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::waveform::PhaseTag;

pub const CIRCUIT_TRACE_HEADER: &str = "t,phase,v_pl,v_bl,v_wl,v_n1,v_inv1,v_out,p_dyn,i_ftj,fire";

/// One accepted circuit step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TraceRow<T: Scalar> {
    pub t: T,
    pub phase: PhaseTag,
    pub v_pl: T,
    pub v_bl: T,
    pub v_wl: T,
    pub v_n1: T,
    pub v_inv1: T,
    pub v_out: T,
    pub p_dyn: T,
    pub i_ftj: T,
    #[serde(serialize_with = "flag_out", deserialize_with = "flag_in")]
    pub fire: bool,
}

fn flag_out<S: Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

fn flag_in<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    match u8::deserialize(d)? {
        0 => Ok(false),
        1 => Ok(true),
        n => Err(serde::de::Error::custom(format!("fire flag must be 0 or 1, got {n}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace<T: Scalar> {
    pub rows: Vec<TraceRow<T>>,
    pub fire_events: Vec<T>,
}

impl<T: Scalar> SimTrace<T> {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        if self.rows.is_empty() {
            wtr.write_record(CIRCUIT_TRACE_HEADER.split(','))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a trace back; fire events are recovered from the flag column.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows: Vec<TraceRow<T>> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        let fire_events = rows.iter().filter(|r| r.fire).map(|r| r.t).collect();
        Ok(SimTrace { rows, fire_events })
    }

    /// Rows belonging to one phase kind.
    pub fn phase_rows(&self, tag: PhaseTag) -> impl Iterator<Item = &TraceRow<T>> {
        self.rows.iter().filter(move |r| r.phase == tag)
    }
}

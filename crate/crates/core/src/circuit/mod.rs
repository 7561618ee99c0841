//! Seven-transistor FTJ neuron: level-1 transistors, static inverters and a
//! phase-driven transient of the floating read node.

mod config;
mod inverter;
mod mosfet;
mod neuron;
mod sweep;
mod trace;

pub use config::{CircuitConfig, ResetScheme, Transistors, WritePulse};
pub use inverter::{inverter_output, Inverter};
pub use mosfet::{mosfet_current, MosfetParams, Polarity};
pub use neuron::{run_neuron, NeuronRun, NeuronSim, NeuronState, PhaseDrive, PhaseOutcome, ReadRecord, SwitchStates};
pub use sweep::{sweep_pulses_to_fire, SweepCell, SweepResult};
pub use trace::{SimTrace, TraceRow, CIRCUIT_TRACE_HEADER};

#[cfg(test)]
mod tests;

//! Register file simulation: the packed-operand datapath at bit level and a
//! cycle-level model of the operand collector around it.

pub mod datapath;
mod engine;
mod trace;

pub use datapath::{bit_mask, commit, fetch, value_extract, value_truncate, PackedMachine, SliceWrite};
pub use engine::{simulate, Latencies, Mode, RegisterMap, SimConfig, SimError, SimResult, Stalls, UnitCounts};
pub use trace::{build_trace, OpClass, Trace, TraceError, TraceEvent};

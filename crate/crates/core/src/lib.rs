//! Register packing for GPU kernels: range analysis, precision tuning,
//! sub-register slice allocation and a cycle-level operand-collector model.

pub mod ir;
pub mod range;
pub mod minifloat;
pub mod tuner;
pub mod alloc;
pub mod sim;
pub mod report;

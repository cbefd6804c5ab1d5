//! Occupancy calculator.

use std::fmt;

use serde::Serialize;

/// Per-SM resources that bound how many blocks can be resident.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SmResources {
    pub thread_registers: u32,
    pub max_warps: u32,
    pub shared_memory: u32,
    pub warp_size: u32,
}

impl Default for SmResources {
    fn default() -> Self {
        SmResources { thread_registers: 32768, max_warps: 48, shared_memory: 49152, warp_size: 32 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OccupancyInput {
    pub registers_per_thread: u32,
    pub warps_per_block: u32,
    pub shared_mem_per_block: u32,
    pub machine: SmResources,
}

impl OccupancyInput {
    pub fn new(registers_per_thread: u32, warps_per_block: u32, shared_mem_per_block: u32) -> Self {
        OccupancyInput { registers_per_thread, warps_per_block, shared_mem_per_block, machine: SmResources::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Limiter {
    Registers,
    SharedMem,
    MaxWarps,
}

impl fmt::Display for Limiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limiter::Registers => "registers",
            Limiter::SharedMem => "shared-mem",
            Limiter::MaxWarps => "max-warps",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Occupancy {
    pub blocks: u32,
    pub active_warps: u32,
    pub max_warps: u32,
    /// `active_warps / max_warps` in percent, unrounded.
    pub percent: f64,
    pub limiter: Limiter,
}

impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} block(s), {} warps, occupancy {:.1}% ({}/{}, {:.0}% rounded), limited by {}",
            self.blocks, self.active_warps, self.percent, self.active_warps, self.max_warps, self.percent, self.limiter
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OccupancyError {
    #[error("{0} must be positive")]
    Zero(&'static str),
    #[error("{warps} warps per block exceed the SM limit of {max}")]
    BlockTooLarge { warps: u32, max: u32 },
}

/// Resident blocks and warps per SM. A block that does not fit at all
/// gives zero blocks rather than an error.
pub fn occupancy(input: &OccupancyInput) -> Result<Occupancy, OccupancyError> {
    let m = input.machine;
    for (value, name) in [
        (input.registers_per_thread, "registers per thread"),
        (input.warps_per_block, "warps per block"),
        (m.thread_registers, "register file size"),
        (m.max_warps, "max warps"),
        (m.warp_size, "warp size"),
    ] {
        if value == 0 {
            return Err(OccupancyError::Zero(name));
        }
    }
    if input.warps_per_block > m.max_warps {
        return Err(OccupancyError::BlockTooLarge { warps: input.warps_per_block, max: m.max_warps });
    }
    let regs_per_block = input.registers_per_thread as u64 * m.warp_size as u64 * input.warps_per_block as u64;
    let by_regs = m.thread_registers as u64 / regs_per_block;
    let by_shmem = (m.shared_memory as u64).checked_div(input.shared_mem_per_block as u64).unwrap_or(u64::MAX);
    let by_warps = (m.max_warps / input.warps_per_block) as u64;
    let (blocks, limiter) = [(by_regs, Limiter::Registers), (by_shmem, Limiter::SharedMem), (by_warps, Limiter::MaxWarps)]
        .into_iter()
        .min_by_key(|(b, _)| *b)
        .expect("three candidates");
    let blocks = blocks as u32;
    let active_warps = blocks * input.warps_per_block;
    Ok(Occupancy {
        blocks,
        active_warps,
        max_warps: m.max_warps,
        percent: 100.0 * active_warps as f64 / m.max_warps as f64,
        limiter,
    })
}

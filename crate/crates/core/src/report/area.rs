//! Transistor-count estimate of the added register-file structures.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

/// Transistors per 6T cell (SRAM bit, AOI cell, OR-gate bit).
const CELL: u64 = 6;
/// AOI cells per bit of a 9:1 slice multiplexer.
const AOI_PER_MUX_BIT: u64 = 8;
const THREADS_PER_WARP: u64 = 32;
const REGISTER_BITS: u64 = 32;
/// Thread-level converter size, from a gate-level estimate.
const CONVERTER_PER_THREAD: u64 = 1300;
/// Thread-level extractor size as counted inside a truncator.
const TRUNCATOR_EXTRACTOR: u64 = 2048;
const TABLE_ROWS: u64 = 256;
const TABLES: u64 = 2;
const CU_OR_BITS: u64 = 1024;
const CU_EXTRA_BITS: u64 = 35;
/// Transistors per extra collector-unit storage bit.
const CU_BIT_COST: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Fermi,
    Volta,
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fermi" => Ok(Arch::Fermi),
            "volta" => Ok(Arch::Volta),
            _ => Err(format!("unknown architecture `{s}` (expected fermi or volta)")),
        }
    }
}

impl Arch {
    pub fn default_sms(self) -> u64 {
        match self {
            Arch::Fermi => 15,
            Arch::Volta => 84,
        }
    }
}

/// Per-structure counts for one register file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Breakdown {
    pub extractors: u64,
    pub converters: u64,
    pub tables: u64,
    pub truncators: u64,
    pub cu_extensions: u64,
}

impl Breakdown {
    pub fn total(&self) -> u64 {
        self.extractors + self.converters + self.tables + self.truncators + self.cu_extensions
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AreaModel {
    pub arch: Arch,
    /// Thread-level extractor: 32 bits of 9:1 mux plus a 4-bit 2:1 mux.
    pub extractor_per_thread: u64,
    /// Warp-level extractor before rounding.
    pub extractor_per_warp: u64,
    /// Warp-level extractor rounded to the nearest thousand, as used in the totals.
    pub extractor_per_warp_rounded: u64,
    pub breakdown: Breakdown,
    pub register_files_per_sm: u64,
    /// Sum of the breakdown: one register file.
    pub per_register_file: u64,
    pub per_sm: u64,
    pub sms: u64,
    pub chip: u64,
    /// Register-file total rounded to 0.1M, then scaled up. Matches the
    /// published back-of-envelope chain.
    pub per_sm_rounded: u64,
    pub chip_rounded: u64,
}

fn round_to(x: u64, unit: u64) -> u64 {
    (x + unit / 2) / unit * unit
}

/// Estimate for `arch` with `sms` streaming multiprocessors (the product
/// count when `None`).
pub fn area_estimate(arch: Arch, sms: Option<u64>) -> AreaModel {
    let mux_bit = AOI_PER_MUX_BIT * CELL;
    let extractor_per_thread = REGISTER_BITS * mux_bit + 4 * CELL;
    let extractor_per_warp = THREADS_PER_WARP * extractor_per_thread;
    let extractor_per_warp_rounded = round_to(extractor_per_warp, 1000);
    let fermi_extractors = 16 * extractor_per_warp_rounded;
    let breakdown = Breakdown {
        extractors: match arch {
            Arch::Fermi => fermi_extractors,
            Arch::Volta => fermi_extractors / 2,
        },
        converters: 6 * THREADS_PER_WARP * CONVERTER_PER_THREAD,
        tables: TABLES * TABLE_ROWS * REGISTER_BITS * CELL,
        truncators: 3 * THREADS_PER_WARP * (CONVERTER_PER_THREAD + 2 * TRUNCATOR_EXTRACTOR),
        cu_extensions: 16 * (CU_OR_BITS * CELL + CU_EXTRA_BITS * CU_BIT_COST * CELL),
    };
    let register_files_per_sm = match arch {
        Arch::Fermi => 1,
        Arch::Volta => 4,
    };
    let per_register_file = breakdown.total();
    let per_sm = per_register_file * register_files_per_sm;
    let sms = sms.unwrap_or(arch.default_sms());
    let per_sm_rounded = round_to(per_register_file, 100_000) * register_files_per_sm;
    AreaModel {
        arch,
        extractor_per_thread,
        extractor_per_warp,
        extractor_per_warp_rounded,
        breakdown,
        register_files_per_sm,
        per_register_file,
        per_sm,
        sms,
        chip: per_sm * sms,
        per_sm_rounded,
        chip_rounded: per_sm_rounded * sms,
    }
}

fn millions(x: u64) -> String {
    format!("{:.1}M", x as f64 / 1e6)
}

impl fmt::Display for AreaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.breakdown;
        writeln!(f, "architecture        {:?}", self.arch)?;
        writeln!(
            f,
            "extractor           {} per thread, {} per warp (~{} used)",
            self.extractor_per_thread, self.extractor_per_warp, self.extractor_per_warp_rounded
        )?;
        writeln!(f, "value extractors    {:>12}", b.extractors)?;
        writeln!(f, "value converters    {:>12}", b.converters)?;
        writeln!(f, "indirection tables  {:>12}", b.tables)?;
        writeln!(f, "value truncators    {:>12}", b.truncators)?;
        writeln!(f, "CU extensions       {:>12}", b.cu_extensions)?;
        writeln!(f, "per register file   {:>12} (~{})", self.per_register_file, millions(self.per_register_file))?;
        writeln!(f, "per SM              {:>12} (~{} rounded chain)", self.per_sm, millions(self.per_sm_rounded))?;
        write!(f, "chip ({} SMs)       {:>12} (~{} rounded chain)", self.sms, self.chip, millions(self.chip_rounded))
    }
}

//! The whole flow for one kernel: range analysis, precision tuning, slice
//! allocation, simulation of both register files, and the report.

use std::fmt::{self, Write as _};

use serde::Serialize;

use super::area::{area_estimate, AreaModel, Arch};
use super::occupancy::{occupancy, Occupancy, OccupancyInput};
use crate::alloc::{allocate, baseline_layouts, packed_layouts, Allocation};
use crate::ir::{compute_live_ranges, parse, Kernel};
use crate::range::{RangeAnalysis, WidthEntry};
use crate::sim::{build_trace, simulate, Mode, PackedMachine, RegisterMap, SimConfig, SimResult};
use crate::tuner::{
    interpret, run, tune, FormatEntry, InputBinding, InterpConfig, Metric, PrecisionAssignment, Threshold,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Parse,
    Samples,
    Analyze,
    Tune,
    Allocate,
    Verify,
    Trace,
    Simulate,
    Occupancy,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("stage is a string"))
    }
}

/// Input problems are the caller's to fix; internal errors mean a broken invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub class: ErrorClass,
    pub message: String,
}

fn input_error(stage: Stage, e: impl fmt::Display) -> PipelineError {
    PipelineError { stage, class: ErrorClass::Input, message: e.to_string() }
}

fn internal_error(stage: Stage, e: impl fmt::Display) -> PipelineError {
    PipelineError { stage, class: ErrorClass::Internal, message: e.to_string() }
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineConfig {
    pub metric: Metric,
    pub threshold: Threshold,
    pub sim: SimConfig,
    pub warps_per_block: u32,
    pub shared_mem_per_block: u32,
    /// Warps in the simulated trace.
    pub trace_warps: usize,
    /// Longest execution accepted when extracting a trace.
    pub step_limit: u64,
    pub arch: Arch,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            metric: Metric::DeviationPercent,
            threshold: Threshold::Percent(10.0),
            sim: SimConfig::default(),
            warps_per_block: 10,
            shared_mem_per_block: 0,
            trace_warps: 48,
            step_limit: 100_000,
            arch: Arch::Fermi,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TuningSummary {
    pub metric: Metric,
    pub threshold: String,
    pub samples: usize,
    pub worst_score: f64,
    pub sweeps: usize,
    pub probes: usize,
    pub formats: Vec<FormatEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Pressure {
    pub max_live: usize,
    pub baseline: usize,
    pub packed: usize,
    pub baseline_registers: usize,
    pub packed_registers: usize,
    pub used_baseline_fallback: bool,
    pub max_wasted_slices: usize,
    pub mean_wasted_slices: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValueRow {
    pub name: String,
    pub bits: u32,
    pub signed: bool,
    pub format: Option<String>,
    pub arch: u8,
    pub entry: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub arch: usize,
    pub word: String,
    pub entry: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Simulation {
    pub trace_warps: usize,
    pub trace_events: usize,
    pub baseline: Option<SimResult>,
    pub packed: Option<SimResult>,
    pub writeback_delay: u64,
    /// Packed IPC over baseline IPC.
    pub speedup: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub kernel: String,
    pub instructions: usize,
    pub warnings: Vec<String>,
    pub widths: Vec<WidthEntry>,
    pub tuning: TuningSummary,
    pub pressure: Pressure,
    pub values: Vec<ValueRow>,
    pub table: Vec<TableRow>,
    pub occupancy_before: Occupancy,
    pub occupancy_after: Occupancy,
    /// Packed register file and reference interpreter agree on every sample.
    pub packed_matches_interpreter: bool,
    /// Packed outputs equal full single-precision outputs on every sample.
    pub packed_matches_full_precision: bool,
    pub simulation: Simulation,
    pub area: AreaModel,
}

/// Everything produced along the way, for callers that need more than the report.
#[derive(Debug)]
pub struct PipelineRun {
    pub kernel: Kernel,
    pub ranges: RangeAnalysis,
    pub assignment: PrecisionAssignment,
    pub baseline: Allocation,
    pub packed: Allocation,
    pub report: Report,
}

/// Runs every stage on kernel source text. Kernels with parameters need at
/// least one sample.
pub fn run_pipeline(source: &str, samples: &[InputBinding], cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let k = parse(source).map_err(|e| input_error(Stage::Parse, e))?;
    let samples: Vec<InputBinding> = if samples.is_empty() {
        if !k.params.is_empty() {
            return Err(input_error(Stage::Samples, "the kernel has parameters; sample inputs are required"));
        }
        vec![InputBinding::default()]
    } else {
        samples.to_vec()
    };

    let ranges = RangeAnalysis::run(&k);
    let live = compute_live_ranges(&k);

    let tuned = tune(&k, &samples, cfg.metric, cfg.threshold).map_err(|e| input_error(Stage::Tune, e))?;
    let mut warnings = Vec::new();
    let assignment = tuned.assignment;

    let baseline = allocate(&k, &baseline_layouts(&k, &live), &live).map_err(|e| input_error(Stage::Allocate, e))?;
    let packed = allocate(&k, &packed_layouts(&k, &ranges, Some(&assignment), &live), &live)
        .map_err(|e| input_error(Stage::Allocate, e))?;
    baseline.verify(&live).map_err(|e| internal_error(Stage::Verify, e))?;
    packed.verify(&live).map_err(|e| internal_error(Stage::Verify, e))?;
    if packed.register_pressure > baseline.register_pressure {
        return Err(internal_error(Stage::Verify, "packed pressure exceeds the baseline"));
    }
    if packed.used_baseline_fallback {
        warnings.push("packing did not beat one register per value; using the baseline layout".into());
    }

    let mut matches_interpreter = true;
    let mut matches_full = true;
    for (i, s) in samples.iter().enumerate() {
        let reference = interpret(&k, s, &assignment).map_err(|e| input_error(Stage::Verify, e))?;
        let full = interpret(&k, s, &PrecisionAssignment::full(&k)).map_err(|e| input_error(Stage::Verify, e))?;
        let mut machine = PackedMachine::new(&packed.entries, &packed.layouts, packed.registers_used);
        let out = run(&k, s, &mut machine, InterpConfig::default()).map_err(|e| input_error(Stage::Verify, e))?;
        if out.outputs != reference.outputs {
            matches_interpreter = false;
            warnings.push(format!("sample {i}: packed register file disagrees with the interpreter"));
        }
        matches_full &= out.outputs == full.outputs;
    }
    if !matches_interpreter {
        return Err(internal_error(Stage::Verify, warnings.last().cloned().unwrap_or_default()));
    }

    let occ = |regs: usize| {
        let input = OccupancyInput::new(regs.max(1) as u32, cfg.warps_per_block, cfg.shared_mem_per_block);
        occupancy(&input).map_err(|e| input_error(Stage::Occupancy, e))
    };
    let occupancy_before = occ(baseline.registers_used)?;
    let occupancy_after = occ(packed.registers_used)?;

    let trace_of = |a: &Allocation| {
        build_trace(&k, a, &samples[0], cfg.trace_warps, cfg.step_limit).map_err(|e| input_error(Stage::Trace, e))
    };
    let base_trace = trace_of(&baseline)?;
    let packed_trace = trace_of(&packed)?;
    let sim = |trace, a: &Allocation, warps: u32, mode| -> Result<Option<SimResult>, PipelineError> {
        let warps = (warps as usize).min(cfg.trace_warps);
        if warps == 0 {
            return Ok(None);
        }
        simulate(trace, &RegisterMap::from_allocation(a), warps, &cfg.sim, mode)
            .map(Some)
            .map_err(|e| input_error(Stage::Simulate, e))
    };
    let base_sim = sim(&base_trace, &baseline, occupancy_before.active_warps, Mode::Baseline)?;
    let packed_sim = sim(&packed_trace, &packed, occupancy_after.active_warps, Mode::Packed)?;
    if occupancy_before.active_warps == 0 {
        warnings.push("the baseline kernel does not fit on an SM".into());
    }
    let speedup = match (&base_sim, &packed_sim) {
        (Some(b), Some(p)) if b.ipc > 0.0 => Some(p.ipc / b.ipc),
        _ => None,
    };

    let values = k
        .value_ids()
        .filter_map(|v| {
            let e = packed.entry(v)?;
            let l = packed.layout(v)?;
            Some(ValueRow {
                name: k.name_of(v).to_string(),
                bits: l.bits,
                signed: l.signed,
                format: l.float.map(|f| format!("({},{},{})", f.total, f.exp, f.man)),
                arch: packed.arch[v.index()]?,
                entry: e.to_string(),
            })
        })
        .collect();
    let table = packed
        .table
        .iter()
        .enumerate()
        .map(|(i, e)| TableRow { arch: i, word: format!("{:08x}", e.encode()), entry: e.to_string() })
        .collect();

    let report = Report {
        kernel: k.name.clone(),
        instructions: k.instruction_count(),
        warnings,
        widths: ranges.width_map(),
        tuning: TuningSummary {
            metric: cfg.metric,
            threshold: cfg.threshold.to_string(),
            samples: samples.len(),
            worst_score: tuned.worst_score,
            sweeps: tuned.sweeps,
            probes: tuned.probes,
            formats: assignment.export(&k),
        },
        pressure: Pressure {
            max_live: live.max_live(),
            baseline: baseline.register_pressure,
            packed: packed.register_pressure,
            baseline_registers: baseline.registers_used,
            packed_registers: packed.registers_used,
            used_baseline_fallback: packed.used_baseline_fallback,
            max_wasted_slices: packed.max_wasted_slices,
            mean_wasted_slices: packed.mean_wasted_slices,
        },
        values,
        table,
        occupancy_before,
        occupancy_after,
        packed_matches_interpreter: matches_interpreter,
        packed_matches_full_precision: matches_full,
        simulation: Simulation {
            trace_warps: cfg.trace_warps,
            trace_events: packed_trace.len(),
            baseline: base_sim,
            packed: packed_sim,
            writeback_delay: cfg.sim.writeback_delay,
            speedup,
        },
        area: area_estimate(cfg.arch, None),
    };
    Ok(PipelineRun { kernel: k, ranges, assignment, baseline, packed, report })
}

fn sim_line(out: &mut String, label: &str, r: &Option<SimResult>) {
    match r {
        Some(r) => {
            let _ = writeln!(
                out,
                "  {label:<9} {:>9} cycles  {:>9} retired  IPC {:.3}  stalls: bank {} ind {} conv {} sb {} cu {} wb {}",
                r.cycles,
                r.retired,
                r.ipc,
                r.stalls.bank_conflict,
                r.stalls.indirection_conflict,
                r.stalls.conversion,
                r.stalls.scoreboard,
                r.stalls.cu_full,
                r.stalls.writeback
            );
        }
        None => {
            let _ = writeln!(out, "  {label:<9} not simulated (kernel does not fit)");
        }
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-value rows as CSV for external plotting.
    pub fn values_csv(&self) -> String {
        let mut out = String::from("name,bits,signed,format,arch,entry\n");
        for v in &self.values {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                v.name,
                v.bits,
                v.signed,
                v.format.as_deref().unwrap_or(""),
                v.arch,
                v.entry
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kernel {} ({} instructions)", self.kernel, self.instructions);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out, "\ninteger widths");
        for w in &self.widths {
            let _ = writeln!(out, "  {:<12} [{}, {}]  {} bits{}", w.name, w.lo, w.hi, w.bits, if w.signed { " signed" } else { "" });
        }
        let t = &self.tuning;
        let _ = writeln!(
            out,
            "\nfloat formats (metric {:?}, threshold {}, {} samples, worst {:.4})",
            t.metric, t.threshold, t.samples, t.worst_score
        );
        for f in &t.formats {
            let _ = writeln!(out, "  {:<12} {} bits", f.name, f.bits);
        }
        let p = &self.pressure;
        let _ = writeln!(
            out,
            "\nregister pressure {} -> {} (max live {}, registers {} -> {}, wasted slices max {} mean {:.2})",
            p.baseline, p.packed, p.max_live, p.baseline_registers, p.packed_registers, p.max_wasted_slices, p.mean_wasted_slices
        );
        let _ = writeln!(out, "\nvalue placement");
        for v in &self.values {
            let _ = writeln!(out, "  {:<12} {:>2} bits  a{:<3} {}", v.name, v.bits, v.arch, v.entry);
        }
        let _ = writeln!(out, "\nindirection table ({} rows used)", self.table.len());
        for r in &self.table {
            let _ = writeln!(out, "  {:>3}: {}  {}", r.arch, r.word, r.entry);
        }
        let _ = writeln!(out, "\noccupancy before: {}", self.occupancy_before);
        let _ = writeln!(out, "occupancy after:  {}", self.occupancy_after);
        let _ = writeln!(
            out,
            "\npacked outputs match interpreter: {}; match full precision: {}",
            self.packed_matches_interpreter, self.packed_matches_full_precision
        );
        let s = &self.simulation;
        let _ = writeln!(
            out,
            "\nsimulation ({} warps, {} events, writeback delay {})",
            s.trace_warps, s.trace_events, s.writeback_delay
        );
        sim_line(&mut out, "baseline", &s.baseline);
        sim_line(&mut out, "packed", &s.packed);
        if let Some(x) = s.speedup {
            let _ = writeln!(out, "  IPC ratio {x:.3}");
        }
        let _ = writeln!(out, "\narea\n{}", self.area);
        out
    }
}

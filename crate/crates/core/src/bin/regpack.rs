use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use regpack::alloc::{allocate, baseline_layouts, dump_binary, dump_text, packed_layouts};
use regpack::ir::{compute_live_ranges, parse, Kernel};
use regpack::range::RangeAnalysis;
use regpack::report::{area_estimate, occupancy, run_pipeline, Arch, ErrorClass, OccupancyInput, PipelineConfig};
use regpack::sim::{build_trace, simulate, Mode, RegisterMap, SimConfig, Trace};
use regpack::tuner::{parse_samples, tune, InputBinding, Metric, PrecisionAssignment, Threshold};

/// Register packing toolkit for GPU kernels.
#[derive(Parser)]
#[command(name = "regpack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value ranges and integer bit widths.
    Analyze {
        kernel: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Narrowest float formats that keep outputs within a quality threshold.
    Tune {
        kernel: PathBuf,
        #[command(flatten)]
        quality: Quality,
        #[command(flatten)]
        out: Output,
    },
    /// Slice allocation and the indirection table.
    Allocate {
        kernel: PathBuf,
        #[command(flatten)]
        quality: Quality,
        /// Write the 256-row table here (text, or binary with --binary).
        #[arg(long)]
        table_out: Option<PathBuf>,
        #[arg(long)]
        binary: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Cycle-level simulation of a trace file or of a kernel run.
    Simulate {
        /// Trace file with `warp=.. op=.. src=.. dst=..` lines.
        #[arg(long, conflicts_with = "kernel")]
        trace: Option<PathBuf>,
        /// Kernel to trace instead of a trace file.
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[command(flatten)]
        quality: Quality,
        #[arg(long, default_value = "packed")]
        mode: Mode,
        #[arg(long, default_value_t = 3)]
        writeback_delay: u64,
        /// Resident warps; defaults to every warp in the trace.
        #[arg(long)]
        occupancy: Option<usize>,
        /// Warps to replicate a kernel trace over.
        #[arg(long, default_value_t = 48)]
        warps: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Resident blocks and warps per SM.
    Occupancy {
        #[arg(long)]
        regs: u32,
        #[arg(long, default_value_t = 10)]
        warps_per_block: u32,
        #[arg(long, default_value_t = 0)]
        shmem: u32,
        #[command(flatten)]
        out: Output,
    },
    /// Transistor estimate of the added hardware.
    Area {
        #[arg(long, default_value = "fermi")]
        arch: Arch,
        /// Override the SM count.
        #[arg(long)]
        sms: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
    /// Every stage end to end, with a full report.
    Pipeline {
        kernel: PathBuf,
        #[command(flatten)]
        quality: Quality,
        #[arg(long, default_value_t = 3)]
        writeback_delay: u64,
        #[arg(long, default_value_t = 10)]
        warps_per_block: u32,
        #[arg(long, default_value_t = 0)]
        shmem: u32,
        #[arg(long, default_value = "fermi")]
        arch: Arch,
        /// Write per-value rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Quality {
    /// Sample inputs; defaults to `<kernel>.samples` when present.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value = "deviation")]
    metric: Metric,
    /// Maximum deviation in percent, or `exact`.
    #[arg(long, default_value = "10")]
    threshold: Threshold,
}

#[derive(Args)]
struct Output {
    /// Write the machine-readable report (JSON) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Internal(String),
}

type CliResult<T = ()> = Result<T, Failure>;

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_kernel(path: &Path) -> CliResult<(String, Kernel)> {
    let src = read(path)?;
    let k = parse(&src).map_err(|e| input(format!("{}:{e}", path.display())))?;
    Ok((src, k))
}

fn load_samples(kernel: &Path, explicit: &Option<PathBuf>) -> CliResult<Vec<InputBinding>> {
    let path = match explicit {
        Some(p) => p.clone(),
        None => {
            let sibling = kernel.with_extension("samples");
            if !sibling.exists() {
                return Ok(Vec::new());
            }
            sibling
        }
    };
    parse_samples(&read(&path)?).map_err(|e| input(format!("{}:{e}", path.display())))
}

fn samples_or_empty(k: &Kernel, samples: Vec<InputBinding>) -> CliResult<Vec<InputBinding>> {
    if !samples.is_empty() {
        Ok(samples)
    } else if k.params.is_empty() {
        Ok(vec![InputBinding::default()])
    } else {
        Err(input("the kernel has parameters; pass --samples"))
    }
}

fn emit<T: Serialize>(out: &Output, value: &T, text: String) -> CliResult {
    print!("{text}");
    if let Some(path) = &out.report {
        let json = serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn tuned(k: &Kernel, kernel_path: &Path, q: &Quality) -> CliResult<(Vec<InputBinding>, PrecisionAssignment)> {
    let samples = samples_or_empty(k, load_samples(kernel_path, &q.samples)?)?;
    let r = tune(k, &samples, q.metric, q.threshold).map_err(input)?;
    Ok((samples, r.assignment))
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Analyze { kernel, out } => {
            let (_, k) = load_kernel(&kernel)?;
            let ra = RangeAnalysis::run(&k);
            let mut text = format!("kernel {}\n\ne-SSA intervals\n", k.name);
            for v in ra.essa.kernel.value_ids() {
                if let Some(iv) = ra.ranges[v.index()] {
                    text += &format!("  {:<12} {iv}\n", ra.essa.kernel.name_of(v));
                }
            }
            text += "\nwidths\n";
            let widths = ra.width_map();
            for w in &widths {
                text += &format!("  {:<12} [{}, {}]  {} bits{}\n", w.name, w.lo, w.hi, w.bits, if w.signed { " signed" } else { "" });
            }
            emit(&out, &widths, text)
        }
        Command::Tune { kernel, quality, out } => {
            let (_, k) = load_kernel(&kernel)?;
            let (_, pa) = tuned(&k, &kernel, &quality)?;
            let formats = pa.export(&k);
            let mut text = format!("kernel {} (threshold {})\n", k.name, quality.threshold);
            for f in &formats {
                text += &format!("  {:<12} {} bits\n", f.name, f.bits);
            }
            emit(&out, &formats, text)
        }
        Command::Allocate { kernel, quality, table_out, binary, out } => {
            let (_, k) = load_kernel(&kernel)?;
            let (_, pa) = tuned(&k, &kernel, &quality)?;
            let live = compute_live_ranges(&k);
            let ra = RangeAnalysis::run(&k);
            let base = allocate(&k, &baseline_layouts(&k, &live), &live).map_err(input)?;
            let a = allocate(&k, &packed_layouts(&k, &ra, Some(&pa), &live), &live).map_err(input)?;
            a.verify(&live).map_err(Failure::Internal)?;
            let mut text = format!(
                "kernel {}: pressure {} -> {}, {} table rows\n",
                k.name,
                base.register_pressure,
                a.register_pressure,
                a.table.len()
            );
            for v in k.value_ids() {
                if let (Some(e), Some(l)) = (a.entry(v), a.layout(v)) {
                    text += &format!("  {:<12} {:>2} bits  {e}\n", k.name_of(v), l.bits);
                }
            }
            if let Some(path) = table_out {
                let written = if binary { fs::write(&path, dump_binary(&a.table)) } else { fs::write(&path, dump_text(&a.table)) };
                written.map_err(|e| input(format!("{}: {e}", path.display())))?;
            }
            emit(&out, &a, text)
        }
        Command::Simulate { trace, kernel, quality, mode, writeback_delay, occupancy, warps, out } => {
            let (trace, map) = match (trace, kernel) {
                (Some(path), None) => {
                    let t: Trace = read(&path)?.parse().map_err(input)?;
                    let regs = t.warps.iter().flatten().flat_map(|e| e.src.iter().chain(&e.dst)).max().map_or(0, |r| *r as usize + 1);
                    (t, RegisterMap::identity(regs))
                }
                (None, Some(path)) => {
                    let (_, k) = load_kernel(&path)?;
                    let live = compute_live_ranges(&k);
                    let a = match mode {
                        Mode::Baseline => allocate(&k, &baseline_layouts(&k, &live), &live).map_err(input)?,
                        Mode::Packed => {
                            let (_, pa) = tuned(&k, &path, &quality)?;
                            let ra = RangeAnalysis::run(&k);
                            allocate(&k, &packed_layouts(&k, &ra, Some(&pa), &live), &live).map_err(input)?
                        }
                    };
                    let samples = samples_or_empty(&k, load_samples(&path, &quality.samples)?)?;
                    let t = build_trace(&k, &a, &samples[0], warps, 100_000).map_err(input)?;
                    (t, RegisterMap::from_allocation(&a))
                }
                _ => return Err(input("pass exactly one of --trace or --kernel")),
            };
            let cfg = SimConfig { writeback_delay, ..SimConfig::default() };
            let resident = occupancy.unwrap_or(trace.warps.len().clamp(1, cfg.max_warps));
            let r = simulate(&trace, &map, resident, &cfg, mode).map_err(input)?;
            if r.retired as usize != trace.len() {
                return Err(Failure::Internal(format!("{} of {} instructions retired", r.retired, trace.len())));
            }
            let text = format!(
                "{mode}: {} cycles, {} retired, IPC {:.3}\nstalls: bank {} indirection {} conversion {} scoreboard {} cu-full {} writeback {}\n",
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
            emit(&out, &r, text)
        }
        Command::Occupancy { regs, warps_per_block, shmem, out } => {
            let o = occupancy(&OccupancyInput::new(regs, warps_per_block, shmem)).map_err(input)?;
            emit(&out, &o, format!("{o}\n"))
        }
        Command::Area { arch, sms, out } => {
            let a = area_estimate(arch, sms);
            emit(&out, &a, format!("{a}\n"))
        }
        Command::Pipeline { kernel, quality, writeback_delay, warps_per_block, shmem, arch, csv, out } => {
            let src = read(&kernel)?;
            let samples = load_samples(&kernel, &quality.samples)?;
            let cfg = PipelineConfig {
                metric: quality.metric,
                threshold: quality.threshold,
                sim: SimConfig { writeback_delay, ..SimConfig::default() },
                warps_per_block,
                shared_mem_per_block: shmem,
                arch,
                ..PipelineConfig::default()
            };
            let run = run_pipeline(&src, &samples, &cfg).map_err(|e| match e.class {
                ErrorClass::Input => input(format!("{}: {e}", kernel.display())),
                ErrorClass::Internal => Failure::Internal(e.to_string()),
            })?;
            if let Some(path) = csv {
                fs::write(&path, run.report.values_csv()).map_err(|e| input(format!("{}: {e}", path.display())))?;
            }
            emit(&out, &run.report, run.report.to_text())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(2)
        }
    }
}

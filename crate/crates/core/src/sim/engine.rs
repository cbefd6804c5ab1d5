//! Cycle-level operand collector model for one SM.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::trace::{OpClass, Trace, TraceEvent};
use crate::alloc::{Allocation, IndirectionEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Latencies {
    pub spu: u64,
    pub sfu: u64,
    pub ldst: u64,
}

impl Latencies {
    pub fn of(&self, op: OpClass) -> u64 {
        match op {
            OpClass::Spu => self.spu,
            OpClass::Sfu => self.sfu,
            OpClass::Ldst => self.ldst,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct UnitCounts {
    pub spu: usize,
    pub sfu: usize,
    pub ldst: usize,
}

impl UnitCounts {
    fn of(&self, op: OpClass) -> usize {
        match op {
            OpClass::Spu => self.spu,
            OpClass::Sfu => self.sfu,
            OpClass::Ldst => self.ldst,
        }
    }
}

/// Machine parameters. Defaults describe a Fermi-class SM.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub banks: usize,
    pub entries_per_bank: usize,
    pub bank_width_bits: usize,
    pub collector_units: usize,
    pub warp_schedulers: usize,
    pub max_warps: usize,
    pub thread_registers: usize,
    pub warp_size: usize,
    pub indirection_banks: usize,
    /// Narrow-float operand conversions per cycle.
    pub conversion_throughput: usize,
    /// Operands written back per cycle.
    pub writeback_width: usize,
    /// Cycles from writeback grant until dependents may issue, packed mode.
    pub writeback_delay: u64,
    pub latency: Latencies,
    pub units: UnitCounts,
    pub shared_memory_bytes: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            banks: 16,
            entries_per_bank: 64,
            bank_width_bits: 1024,
            collector_units: 16,
            warp_schedulers: 2,
            max_warps: 48,
            thread_registers: 32768,
            warp_size: 32,
            indirection_banks: 16,
            conversion_throughput: 6,
            writeback_width: 3,
            writeback_delay: 3,
            latency: Latencies { spu: 4, sfu: 8, ldst: 100 },
            units: UnitCounts { spu: 2, sfu: 1, ldst: 1 },
            shared_memory_bytes: 49152,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let sizes = [
            self.banks,
            self.entries_per_bank,
            self.bank_width_bits,
            self.collector_units,
            self.warp_schedulers,
            self.max_warps,
            self.thread_registers,
            self.warp_size,
            self.indirection_banks,
            self.conversion_throughput,
            self.writeback_width,
            self.units.spu,
            self.units.sfu,
            self.units.ldst,
        ];
        if sizes.contains(&0) {
            return Err(SimError::Config("every size must be positive".into()));
        }
        if self.banks * self.entries_per_bank * self.bank_width_bits != self.thread_registers * 32 {
            return Err(SimError::Config(
                "banks x entries x bank width must equal the register file size in bits".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Baseline,
    Packed,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "packed" => Ok(Mode::Packed),
            _ => Err(format!("unknown mode `{s}` (expected baseline or packed)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Packed => "packed",
        })
    }
}

/// What the simulator knows about each architectural register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterMap {
    pub entries: Vec<IndirectionEntry>,
    /// Reads need the value converter.
    pub narrow_float: Vec<bool>,
}

impl RegisterMap {
    /// Architectural register `i` in the whole of physical register `i`.
    pub fn identity(registers: usize) -> Self {
        RegisterMap {
            entries: (0..registers).map(|r| IndirectionEntry::full(r as u8)).collect(),
            narrow_float: vec![false; registers],
        }
    }

    pub fn from_allocation(a: &Allocation) -> Self {
        let mut narrow_float = vec![false; a.table.len()];
        for (arch, layout) in a.arch.iter().zip(&a.layouts) {
            if let (Some(r), Some(l)) = (arch, layout) {
                if l.float.is_some_and(|f| f.total < 32) {
                    narrow_float[*r as usize] = true;
                }
            }
        }
        RegisterMap { entries: a.table.clone(), narrow_float }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stalls {
    /// Collector-unit cycles with a pending read and no free bank.
    pub bank_conflict: u64,
    /// Warp cycles spent waiting on a busy indirection bank.
    pub indirection_conflict: u64,
    /// Operand cycles waiting for a conversion slot.
    pub conversion: u64,
    /// Scheduler cycles where every candidate waited on the scoreboard.
    pub scoreboard: u64,
    /// Scheduler cycles where a ready warp found no free collector unit.
    pub cu_full: u64,
    /// Instruction cycles waiting for a writeback port.
    pub writeback: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub cycles: u64,
    pub retired: u64,
    pub ipc: f64,
    pub stalls: Stalls,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("occupancy of {requested} warps is outside 1..={max}")]
    Occupancy { requested: usize, max: usize },
    #[error("warp {warp} instruction {index} uses register {reg}, which has no allocation")]
    Unallocated { warp: usize, index: usize, reg: u8 },
    #[error("no progress after {0} cycles")]
    NoProgress(u64),
}

#[derive(Default)]
struct WarpState {
    pc: usize,
    retired: usize,
    active: bool,
    /// Indirection rows still to read for the instruction at `pc`.
    lookup_left: Vec<u8>,
    lookup_ready: bool,
    lookup_since: u64,
    pending: BTreeMap<u8, u32>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum OperandState {
    Fetching(u8),
    Converting,
    Ready,
}

struct Collector {
    age: u64,
    warp: usize,
    op: OpClass,
    dst: Option<u8>,
    /// `(operand index, register file row)` reads still to perform.
    reads: Vec<(usize, usize)>,
    operands: Vec<(OperandState, bool)>,
}

struct InFlight {
    done: u64,
    age: u64,
    warp: usize,
    dst: Option<u8>,
}

struct Machine<'a> {
    trace: &'a Trace,
    map: &'a RegisterMap,
    cfg: SimConfig,
    mode: Mode,
    warps: Vec<WarpState>,
    waiting: VecDeque<usize>,
    cus: Vec<Option<Collector>>,
    inflight: Vec<InFlight>,
    releases: Vec<(u64, usize, u8)>,
    rr: Vec<usize>,
    /// Registers per warp; warp `w` owns rows `w * stride..`.
    stride: usize,
    next_age: u64,
    retired: u64,
    stalls: Stalls,
}

impl Machine<'_> {
    fn event(&self, w: usize) -> Option<&TraceEvent> {
        self.trace.warps[w].get(self.warps[w].pc)
    }

    fn request_lookup(&mut self, w: usize, now: u64) {
        let rows = self.event(w).map(|e| e.src.clone()).unwrap_or_default();
        let st = &mut self.warps[w];
        st.lookup_left = rows;
        st.lookup_ready = false;
        st.lookup_since = now;
    }

    fn activate(&mut self, w: usize, now: u64) {
        self.warps[w].active = true;
        if self.mode == Mode::Packed {
            self.request_lookup(w, now);
        } else {
            self.warps[w].lookup_ready = true;
        }
    }

    fn writeback(&mut self, now: u64) {
        let mut done: Vec<usize> = (0..self.inflight.len()).filter(|&i| self.inflight[i].done <= now).collect();
        done.sort_by_key(|&i| (self.inflight[i].done, self.inflight[i].age));
        let mut ports = self.cfg.writeback_width;
        let mut finished = Vec::new();
        for i in done {
            let f = &self.inflight[i];
            if let Some(d) = f.dst {
                if ports == 0 {
                    self.stalls.writeback += 1;
                    continue;
                }
                ports -= 1;
                let delay = match self.mode {
                    Mode::Baseline => 1,
                    Mode::Packed => self.cfg.writeback_delay,
                };
                self.releases.push((now + delay, f.warp, d));
            }
            finished.push(i);
        }
        finished.sort_unstable_by(|a, b| b.cmp(a));
        for i in finished {
            let f = self.inflight.swap_remove(i);
            self.warps[f.warp].retired += 1;
            self.retired += 1;
        }
        let warps = &mut self.warps;
        self.releases.retain(|&(at, w, r)| {
            if at > now {
                return true;
            }
            let count = warps[w].pending.get_mut(&r).expect("released register is pending");
            *count -= 1;
            if *count == 0 {
                warps[w].pending.remove(&r);
            }
            false
        });
        for w in 0..self.warps.len() {
            let st = &self.warps[w];
            if st.active && st.retired == self.trace.warps[w].len() && st.pending.is_empty() {
                self.warps[w].active = false;
                if let Some(next) = self.waiting.pop_front() {
                    self.activate(next, now);
                }
            }
        }
    }

    fn oldest_first(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.cus.len()).filter(|&i| self.cus[i].is_some()).collect();
        order.sort_by_key(|&i| self.cus[i].as_ref().map(|c| (c.age, c.warp)));
        order
    }

    fn dispatch(&mut self, now: u64) {
        let mut used = [0usize; 3];
        for i in self.oldest_first() {
            let cu = self.cus[i].as_ref().expect("occupied");
            if !cu.operands.iter().all(|(s, _)| *s == OperandState::Ready) {
                continue;
            }
            let slot = cu.op as usize;
            if used[slot] >= self.cfg.units.of(cu.op) {
                continue;
            }
            used[slot] += 1;
            let cu = self.cus[i].take().expect("occupied");
            self.inflight.push(InFlight { done: now + self.cfg.latency.of(cu.op), age: cu.age, warp: cu.warp, dst: cu.dst });
        }
    }

    fn convert(&mut self) {
        let mut slots = self.cfg.conversion_throughput;
        for i in self.oldest_first() {
            let cu = self.cus[i].as_mut().expect("occupied");
            for (state, _) in cu.operands.iter_mut().filter(|(s, _)| *s == OperandState::Converting) {
                if slots == 0 {
                    self.stalls.conversion += 1;
                } else {
                    slots -= 1;
                    *state = OperandState::Ready;
                }
            }
        }
    }

    fn collect(&mut self) {
        let mut bank_busy = vec![false; self.cfg.banks];
        for i in self.oldest_first() {
            let banks = self.cfg.banks;
            let cu = self.cus[i].as_mut().expect("occupied");
            if cu.reads.is_empty() {
                continue;
            }
            let Some(pos) = cu.reads.iter().position(|(_, r)| !bank_busy[*r % banks]) else {
                self.stalls.bank_conflict += 1;
                continue;
            };
            let (operand, reg) = cu.reads.remove(pos);
            bank_busy[reg % banks] = true;
            let (state, narrow) = &mut cu.operands[operand];
            if let OperandState::Fetching(n) = state {
                *state = match (*n - 1, *narrow) {
                    (0, true) => OperandState::Converting,
                    (0, false) => OperandState::Ready,
                    (left, _) => OperandState::Fetching(left),
                };
            }
        }
    }

    fn issue(&mut self, now: u64) {
        let n = self.warps.len();
        let schedulers = self.cfg.warp_schedulers;
        for s in 0..schedulers {
            let (mut blocked_sb, mut blocked_cu) = (false, false);
            let mut issued = None;
            for step in 0..n {
                let w = (self.rr[s] + step) % n;
                if w % schedulers != s || !self.warps[w].active || !self.warps[w].lookup_ready {
                    continue;
                }
                let Some(e) = self.event(w) else { continue };
                let st = &self.warps[w];
                if e.src.iter().chain(&e.dst).any(|r| st.pending.contains_key(r)) {
                    blocked_sb = true;
                    continue;
                }
                if self.cus.iter().all(Option::is_some) {
                    blocked_cu = true;
                    continue;
                }
                issued = Some(w);
                break;
            }
            let Some(w) = issued else {
                if blocked_cu {
                    self.stalls.cu_full += 1;
                } else if blocked_sb {
                    self.stalls.scoreboard += 1;
                }
                continue;
            };
            let e = self.event(w).expect("issued warp has an instruction").clone();
            let mut reads = Vec::new();
            let mut operands = Vec::new();
            for (j, &r) in e.src.iter().enumerate() {
                match self.mode {
                    Mode::Baseline => {
                        reads.push((j, w * self.stride + r as usize));
                        operands.push((OperandState::Fetching(1), false));
                    }
                    Mode::Packed => {
                        let entry = self.map.entries[r as usize];
                        let parts: Vec<u8> = entry.registers().collect();
                        reads.extend(parts.iter().map(|&p| (j, w * self.stride + p as usize)));
                        operands.push((OperandState::Fetching(parts.len() as u8), self.map.narrow_float[r as usize]));
                    }
                }
            }
            if let Some(d) = e.dst {
                *self.warps[w].pending.entry(d).or_default() += 1;
            }
            let slot = self.cus.iter().position(Option::is_none).expect("a collector unit is free");
            self.cus[slot] = Some(Collector { age: self.next_age, warp: w, op: e.op, dst: e.dst, reads, operands });
            self.next_age += 1;
            self.warps[w].pc += 1;
            self.rr[s] = (w + 1) % n;
            if self.mode == Mode::Packed {
                self.request_lookup(w, now);
            }
        }
    }

    fn lookup(&mut self) {
        let mut order: Vec<usize> =
            (0..self.warps.len()).filter(|&w| self.warps[w].active && !self.warps[w].lookup_ready).collect();
        order.sort_by_key(|&w| (self.warps[w].lookup_since, w));
        let banks = self.cfg.indirection_banks;
        let mut granted: Vec<Option<u8>> = vec![None; banks];
        for w in order {
            let st = &mut self.warps[w];
            let before = st.lookup_left.len();
            st.lookup_left.retain(|&row| match granted[row as usize % banks] {
                None => {
                    granted[row as usize % banks] = Some(row);
                    false
                }
                Some(g) => g != row,
            });
            if st.lookup_left.is_empty() {
                st.lookup_ready = true;
            } else if before > 0 {
                self.stalls.indirection_conflict += 1;
            }
        }
    }

    fn finished(&self) -> bool {
        self.retired as usize == self.trace.len()
    }
}

/// Runs `trace` to completion with at most `occupancy` warps resident at a
/// time. Warps beyond that start as resident warps finish.
pub fn simulate(
    trace: &Trace,
    map: &RegisterMap,
    occupancy: usize,
    cfg: &SimConfig,
    mode: Mode,
) -> Result<SimResult, SimError> {
    cfg.validate()?;
    if occupancy == 0 || occupancy > cfg.max_warps {
        return Err(SimError::Occupancy { requested: occupancy, max: cfg.max_warps });
    }
    for (w, stream) in trace.warps.iter().enumerate() {
        for (index, e) in stream.iter().enumerate() {
            if let Some(&reg) = e.src.iter().chain(&e.dst).find(|r| **r as usize >= map.entries.len()) {
                return Err(SimError::Unallocated { warp: w, index, reg });
            }
        }
    }
    let mut m = Machine {
        trace,
        map,
        cfg: *cfg,
        mode,
        warps: (0..trace.warps.len()).map(|_| WarpState::default()).collect(),
        waiting: (0..trace.warps.len()).collect(),
        cus: (0..cfg.collector_units).map(|_| None).collect(),
        inflight: Vec::new(),
        releases: Vec::new(),
        rr: vec![0; cfg.warp_schedulers],
        stride: match mode {
            Mode::Baseline => map.entries.len(),
            Mode::Packed => map.entries.iter().flat_map(|e| e.registers()).map(|r| r as usize + 1).max().unwrap_or(0),
        },
        next_age: 0,
        retired: 0,
        stalls: Stalls::default(),
    };
    for _ in 0..occupancy {
        if let Some(w) = m.waiting.pop_front() {
            m.activate(w, 0);
        }
    }
    if m.finished() {
        return Ok(SimResult { cycles: 0, retired: 0, ipc: 0.0, stalls: m.stalls });
    }
    let limit = 1_000_000 + trace.len() as u64 * (cfg.latency.ldst + cfg.writeback_delay + 64);
    let mut now = 0;
    loop {
        m.writeback(now);
        if m.finished() {
            break;
        }
        m.dispatch(now);
        m.convert();
        m.collect();
        m.issue(now);
        if mode == Mode::Packed {
            m.lookup();
        }
        now += 1;
        if now > limit {
            return Err(SimError::NoProgress(now));
        }
    }
    let cycles = now + 1;
    Ok(SimResult { cycles, retired: m.retired, ipc: m.retired as f64 / cycles as f64, stalls: m.stalls })
}

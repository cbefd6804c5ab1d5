//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regpack::alloc::{IndirectionEntry, ValueLayout};
use regpack::ir::{LiveRanges, ValueId};
use regpack::minifloat::FloatFormat;
use regpack::sim::{OpClass, Trace, TraceEvent};
use regpack::tuner::{parse_samples, InputBinding};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- kernels

pub const BUNDLED: [&str; 5] = ["fig4", "saxpy", "shade", "smooth", "wide"];
pub const FLOAT_KERNELS: [&str; 4] = ["saxpy", "shade", "smooth", "wide"];

pub fn kernel_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("kernels").join(format!("{name}.ir"))
}

pub fn kernel_source(name: &str) -> String {
    std::fs::read_to_string(kernel_path(name)).expect("bundled kernel")
}

/// Tuning samples of a bundled kernel; one empty binding when it has none.
pub fn kernel_samples(name: &str) -> Vec<InputBinding> {
    let path = kernel_path(name).with_extension("samples");
    match std::fs::read_to_string(path) {
        Ok(text) => parse_samples(&text).expect("bundled samples"),
        Err(_) => vec![InputBinding::default()],
    }
}

/// Integer parameter of a generated kernel with its inclusive input range.
#[derive(Clone, Debug)]
pub struct GenParam {
    pub name: String,
    pub ty: &'static str,
    pub lo: i64,
    pub hi: i64,
    pub declared: bool,
}

#[derive(Clone, Debug)]
pub struct GenKernel {
    pub source: String,
    pub params: Vec<GenParam>,
}

impl GenKernel {
    pub fn random_input(&self, rng: &mut impl Rng) -> InputBinding {
        let mut b = InputBinding::default();
        for p in &self.params {
            b = b.scalar(&p.name, rng.gen_range(p.lo..=p.hi) as f64);
        }
        b
    }
}

/// Random structured integer kernel: counted loops nested up to two deep,
/// if/else diamonds, wrapping arithmetic, and branch conditions that the
/// range analysis can turn into constraints.
pub fn random_loop_kernel(rng: &mut impl Rng) -> GenKernel {
    let mut g = LoopGen { rng, lines: Vec::new(), next: 0, scope: Vec::new() };
    let mut params = vec![
        GenParam { name: "p0".into(), ty: "i32", lo: -8, hi: 12, declared: true },
        GenParam { name: "p1".into(), ty: "i32", lo: 0, hi: 10, declared: true },
        GenParam { name: "p2".into(), ty: "u32", lo: 0, hi: 40, declared: true },
    ];
    if g.rng.gen_bool(0.5) {
        params.push(GenParam { name: "p3".into(), ty: "i32", lo: i32::MIN as i64, hi: i32::MAX as i64, declared: false });
    }
    let sig: Vec<String> = params
        .iter()
        .map(|p| match p.declared {
            true => format!("{}: {} in [{}, {}]", p.name, p.ty, p.lo, p.hi),
            false => format!("{}: {}", p.name, p.ty),
        })
        .collect();
    for p in &params {
        g.scope.push((p.name.clone(), p.ty, Bound::Param(p.lo, p.hi, p.declared)));
    }
    g.lines.push(format!("kernel gen({}) {{", sig.join(", ")));
    g.lines.push("block entry:".into());
    let c = g.fresh("c");
    let k = g.rng.gen_range(-4..=6);
    g.lines.push(format!("  {c} = const i32 {k}"));
    g.scope.push((c, "i32", Bound::Const(k)));
    let u = g.fresh("c");
    let k = g.rng.gen_range(0..=9);
    g.lines.push(format!("  {u} = const u32 {k}"));
    g.scope.push((u, "u32", Bound::Const(k)));
    g.region(0, 0, "entry".into());
    g.lines.push("  ret".into());
    g.lines.push("}".into());
    GenKernel { source: g.lines.join("\n") + "\n", params }
}

#[derive(Clone, Copy, Debug)]
enum Bound {
    Const(i64),
    Param(i64, i64, bool),
    Counter,
    Other,
}

struct LoopGen<'a, R: Rng> {
    rng: &'a mut R,
    lines: Vec<String>,
    next: usize,
    scope: Vec<(String, &'static str, Bound)>,
}

impl<R: Rng> LoopGen<'_, R> {
    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn pick(&mut self, ty: &str) -> String {
        let pool: Vec<&String> = self.scope.iter().filter(|s| s.1 == ty).map(|s| &s.0).collect();
        pool.choose(self.rng).map(|s| (*s).clone()).expect("typed value in scope")
    }

    fn operand(&mut self, ty: &str) -> String {
        if self.rng.gen_bool(0.25) {
            match ty {
                "u32" => self.rng.gen_range(0..=20).to_string(),
                _ => self.rng.gen_range(-10..=20).to_string(),
            }
        } else {
            self.pick(ty)
        }
    }

    fn ty(&mut self) -> &'static str {
        if self.rng.gen_bool(0.75) {
            "i32"
        } else {
            "u32"
        }
    }

    /// Emits straight-line code and nested structures into block `label`;
    /// returns the label of the block that is current at the end.
    fn region(&mut self, loops: usize, ifs: usize, mut label: String) -> String {
        let n = self.rng.gen_range(2..=4);
        for _ in 0..n {
            let roll = self.rng.gen_range(0..10);
            if roll < 3 && loops < 2 {
                label = self.counted_loop(loops, ifs, label);
            } else if roll < 5 && ifs < 2 {
                label = self.diamond(loops, ifs, label);
            } else {
                self.straight(3);
            }
        }
        label
    }

    fn straight(&mut self, max: usize) {
        let n = self.rng.gen_range(1..=max);
        for _ in 0..n {
            let ty = self.ty();
            let d = self.fresh("v");
            let line = match self.rng.gen_range(0..14) {
                0 => format!("  {d} = add {ty} {}, {}", self.pick(ty), self.operand(ty)),
                1 => format!("  {d} = sub {ty} {}, {}", self.pick(ty), self.operand(ty)),
                2 => format!("  {d} = mul {ty} {}, {}", self.pick(ty), self.operand(ty)),
                3 => format!("  {d} = div {ty} {}, {}", self.pick(ty), self.operand(ty)),
                4 => format!("  {d} = min {ty} {}, {}", self.pick(ty), self.operand(ty)),
                5 => format!("  {d} = max {ty} {}, {}", self.pick(ty), self.operand(ty)),
                6 => format!("  {d} = and {ty} {}, {}", self.pick(ty), self.operand(ty)),
                7 => format!("  {d} = or {ty} {}, {}", self.pick(ty), self.operand(ty)),
                8 => format!("  {d} = xor {ty} {}, {}", self.pick(ty), self.operand(ty)),
                9 => format!("  {d} = shl {ty} {}, {}", self.pick(ty), self.rng.gen_range(0..6)),
                10 => format!("  {d} = shr {ty} {}, {}", self.pick(ty), self.operand(ty)),
                11 => {
                    let from = if ty == "i32" { "u32" } else { "i32" };
                    format!("  {d} = cvt {ty} {}", self.pick(from))
                }
                12 => {
                    let c = self.fresh("q");
                    let cty = self.ty();
                    let op = ["lt", "le", "gt", "ge", "eq", "ne"].choose(self.rng).unwrap();
                    let line = format!("  {c} = cmp.{op} {cty} {}, {}", self.pick(cty), self.operand(cty));
                    self.lines.push(line);
                    self.scope.push((c.clone(), "u32", Bound::Other));
                    format!("  {d} = select {ty} {c}, {}, {}", self.pick(ty), self.operand(ty))
                }
                _ => format!("  {d} = mov {ty} {}", self.pick(ty)),
            };
            self.lines.push(line);
            self.scope.push((d.clone(), ty, Bound::Other));
            if self.rng.gen_bool(0.15) {
                self.lines.push(format!("  emit {ty} {d}"));
            }
        }
    }

    fn diamond(&mut self, loops: usize, ifs: usize, _from: String) -> String {
        let ty = self.ty();
        let op = ["lt", "le", "gt", "ge", "eq", "ne"].choose(self.rng).unwrap();
        let c = self.fresh("q");
        let line = format!("  {c} = cmp.{op} {ty} {}, {}", self.pick(ty), self.operand(ty));
        self.lines.push(line);
        let (t, e, j) = (self.fresh("t"), self.fresh("e"), self.fresh("j"));
        self.lines.push(format!("  br {c}, {t}, {e}"));
        let outer = self.scope.len();
        let rty = self.ty();
        let mut ends = Vec::new();
        for side in [&t, &e] {
            self.lines.push(format!("block {side}:"));
            let end = self.region(loops, ifs + 1, side.clone());
            let v = self.operand(rty);
            ends.push((end, v));
            self.scope.truncate(outer);
            self.lines.push(format!("  jmp {j}"));
        }
        self.lines.push(format!("block {j}:"));
        let d = self.fresh("m");
        self.lines.push(format!("  {d} = phi {rty} [{}, {}], [{}, {}]", ends[0].1, ends[0].0, ends[1].1, ends[1].0));
        self.scope.push((d, rty, Bound::Other));
        j
    }

    /// A bound that keeps the trip count small: a constant, a declared
    /// parameter with a small range, or an enclosing counter.
    fn loop_bound(&mut self) -> String {
        let small: Vec<String> = self
            .scope
            .iter()
            .filter(|s| s.1 == "i32")
            .filter(|s| match s.2 {
                Bound::Const(k) => k.abs() <= 12,
                Bound::Param(lo, hi, true) => lo >= -12 && hi <= 12,
                Bound::Counter => true,
                _ => false,
            })
            .map(|s| s.0.clone())
            .collect();
        if self.rng.gen_bool(0.5) || small.is_empty() {
            self.rng.gen_range(-2..=10).to_string()
        } else {
            small.choose(self.rng).unwrap().clone()
        }
    }

    fn counted_loop(&mut self, loops: usize, ifs: usize, from: String) -> String {
        let (h, b, x) = (self.fresh("h"), self.fresh("b"), self.fresh("x"));
        let up = self.rng.gen_bool(0.7);
        let init = self.rng.gen_range(-3..=3);
        let step = self.rng.gen_range(1..=3);
        let bound = self.loop_bound();
        let (i, inext, acc, anext, c) =
            (self.fresh("i"), self.fresh("i"), self.fresh("a"), self.fresh("a"), self.fresh("q"));
        let aty = self.ty();
        let a0 = self.operand(aty);
        self.lines.push(format!("  jmp {h}"));
        self.lines.push(format!("block {h}:"));
        let phi_at = self.lines.len();
        self.lines.push(String::new());
        self.lines.push(String::new());
        let cmp = match (up, self.rng.gen_bool(0.5)) {
            (true, true) => "lt",
            (true, false) => "le",
            (false, true) => "gt",
            (false, false) => "ge",
        };
        let (lhs, rhs) = match self.rng.gen_bool(0.8) || bound.parse::<i64>().is_ok() {
            true => (i.clone(), bound.clone()),
            false => (bound.clone(), i.clone()),
        };
        let cmp = if lhs == i { cmp.to_string() } else { swap(cmp).to_string() };
        self.lines.push(format!("  {c} = cmp.{cmp} i32 {lhs}, {rhs}"));
        self.lines.push(format!("  br {c}, {b}, {x}"));
        let outer = self.scope.len();
        self.scope.push((i.clone(), "i32", Bound::Counter));
        self.scope.push((acc.clone(), aty, Bound::Other));
        self.lines.push(format!("block {b}:"));
        let latch = self.region(loops + 1, ifs, b.clone());
        let delta = if up { step } else { -step };
        self.lines.push(format!("  {inext} = add i32 {i}, {delta}"));
        let op = ["add", "sub", "mul", "xor", "max", "min"].choose(self.rng).unwrap();
        let rhs = self.operand(aty);
        self.lines.push(format!("  {anext} = {op} {aty} {acc}, {rhs}"));
        self.lines.push(format!("  jmp {h}"));
        self.lines[phi_at] = format!("  {i} = phi i32 [{init}, {from}], [{inext}, {latch}]");
        self.lines[phi_at + 1] = format!("  {acc} = phi {aty} [{a0}, {from}], [{anext}, {latch}]");
        self.scope.truncate(outer);
        self.scope.push((i, "i32", Bound::Counter));
        self.scope.push((acc.clone(), aty, Bound::Other));
        self.lines.push(format!("block {x}:"));
        if self.rng.gen_bool(0.5) {
            self.lines.push(format!("  emit {aty} {acc}"));
        }
        x
    }
}

fn swap(op: &str) -> &'static str {
    match op {
        "lt" => "gt",
        "le" => "ge",
        "gt" => "lt",
        _ => "le",
    }
}

/// Random straight-line kernel for packing experiments. Operands come from
/// the last `max_live` values, which keeps pressure low but not bounded;
/// callers filter on the measured maximum.
pub fn random_straight_kernel(rng: &mut impl Rng, max_live: usize) -> String {
    let n = rng.gen_range(5..=11);
    let mut names = vec!["p0".to_string(), "p1".to_string()];
    let mut lines = vec!["kernel pack(p0: i32, p1: i32) {".to_string(), "block entry:".to_string()];
    for i in 0..n {
        let window = names.len().min(max_live);
        let a = &names[names.len() - 1 - rng.gen_range(0..window)];
        let b = &names[names.len() - 1 - rng.gen_range(0..window)];
        let op = ["add", "sub", "mul", "xor", "and", "or"].choose(rng).unwrap();
        lines.push(format!("  v{i} = {op} i32 {a}, {b}"));
        names.push(format!("v{i}"));
    }
    let keep = rng.gen_range(1..=2.min(names.len()));
    for name in names.iter().rev().skip(1).take(keep - 1) {
        lines.push(format!("  emit i32 {name}"));
    }
    lines.push(format!("  ret {}", names.last().unwrap()));
    lines.push("}".into());
    lines.join("\n") + "\n"
}

/// Random integer layouts for every live value, biased towards narrow widths.
pub fn random_layouts(rng: &mut impl Rng, values: usize, live: &LiveRanges) -> Vec<Option<ValueLayout>> {
    (0..values)
        .map(|v| {
            (!live.is_dead(ValueId(v as u32))).then(|| {
                let slices = if rng.gen_bool(0.7) { rng.gen_range(1..=4) } else { rng.gen_range(1..=8) };
                let bits = (slices - 1) * 4 + rng.gen_range(1..=4);
                ValueLayout { bits, signed: false, float: None }
            })
        })
        .collect()
}

// ------------------------------------------------------- packing oracle

/// Minimum register pressure over every placement of `values` (slice
/// count and live-point list each) into 8-slice registers, each value in at
/// most two registers. Points must form intervals, which makes a
/// per-register load of at most 8 slices at every point sufficient for a
/// conflict-free slice assignment. Returns `upper` when nothing below it fits.
pub fn optimum_pressure(values: &[(u32, Vec<usize>)], points: usize, upper: usize) -> usize {
    for (_, pts) in values {
        assert!(pts.windows(2).all(|w| w[1] == w[0] + 1), "live points must be contiguous");
    }
    let mut lower = 0;
    for p in 0..points {
        let load: u32 = values.iter().filter(|v| v.1.contains(&p)).map(|v| v.0).sum();
        lower = lower.max(load.div_ceil(8) as usize);
    }
    let mut s = Search { values, loads: Vec::new(), count: vec![0; points], best: upper, lower };
    if upper > lower {
        s.place(0);
    }
    s.best
}

struct Search<'a> {
    values: &'a [(u32, Vec<usize>)],
    loads: Vec<Vec<u32>>,
    count: Vec<usize>,
    best: usize,
    lower: usize,
}

impl Search<'_> {
    fn fits(&self, r: usize, n: u32, pts: &[usize]) -> bool {
        r >= self.loads.len() || pts.iter().all(|&p| self.loads[r][p] + n <= 8)
    }

    fn add(&mut self, r: usize, n: u32, pts: &[usize], sign: i64) {
        if r == self.loads.len() {
            self.loads.push(vec![0; self.count.len()]);
        }
        for &p in pts {
            let before = self.loads[r][p];
            let after = (before as i64 + sign * n as i64) as u32;
            self.loads[r][p] = after;
            if before == 0 && after > 0 {
                self.count[p] += 1;
            } else if before > 0 && after == 0 {
                self.count[p] -= 1;
            }
        }
        if sign < 0 && r + 1 == self.loads.len() && self.loads[r].iter().all(|&l| l == 0) {
            self.loads.pop();
        }
    }

    fn pressure_ok(&self, pts: &[usize]) -> bool {
        pts.iter().all(|&p| self.count[p] < self.best)
    }

    fn place(&mut self, i: usize) {
        if self.best <= self.lower {
            return;
        }
        if i == self.values.len() {
            self.best = self.best.min(self.count.iter().copied().max().unwrap_or(0));
            return;
        }
        let (n, pts) = (self.values[i].0, self.values[i].1.clone());
        let regs = self.loads.len();
        for r in 0..=regs {
            if self.fits(r, n, &pts) {
                self.add(r, n, &pts, 1);
                if self.pressure_ok(&pts) {
                    self.place(i + 1);
                }
                self.add(r, n, &pts, -1);
            }
        }
        for a in 1..n {
            for r0 in 0..=regs {
                for r1 in r0 + 1..=regs + 1 {
                    if r1 == regs + 1 && r0 != regs {
                        continue;
                    }
                    if !self.fits(r0, a, &pts) {
                        continue;
                    }
                    self.add(r0, a, &pts, 1);
                    if self.fits(r1, n - a, &pts) {
                        self.add(r1, n - a, &pts, 1);
                        if self.pressure_ok(&pts) {
                            self.place(i + 1);
                        }
                        self.add(r1, n - a, &pts, -1);
                    }
                    self.add(r0, a, &pts, -1);
                }
            }
        }
    }
}

// ----------------------------------------------------- minifloat oracles

fn field_max(fmt: FloatFormat) -> u32 {
    (1 << fmt.exp) - 1
}

fn bias(fmt: FloatFormat) -> i32 {
    (1 << (fmt.exp - 1)) - 1
}

/// Value of exponent field `e` and mantissa `m` read as a normal number.
pub fn decode_normal(fmt: FloatFormat, e: u32, m: u32) -> f64 {
    (1.0 + m as f64 / (1u64 << fmt.man) as f64) * 2f64.powi(e as i32 - bias(fmt))
}

/// Sorted table of every non-negative normal-precision grid point of a
/// format: exponent field 0 read as if normal (those flush to zero), every
/// normal, and the first value past the largest finite (infinity).
pub struct EncodingTable {
    fmt: FloatFormat,
    values: Vec<f64>,
    codes: Vec<u32>,
    even: Vec<bool>,
}

impl EncodingTable {
    pub fn new(fmt: FloatFormat) -> Self {
        let mut t = EncodingTable { fmt, values: Vec::new(), codes: Vec::new(), even: Vec::new() };
        for e in 0..field_max(fmt) {
            for m in 0..1u32 << fmt.man {
                t.values.push(decode_normal(fmt, e, m));
                t.codes.push(if e == 0 { 0 } else { e << fmt.man | m });
                t.even.push(m % 2 == 0);
            }
        }
        t.values.push(2f64.powi(field_max(fmt) as i32 - bias(fmt)));
        t.codes.push(field_max(fmt) << fmt.man);
        t.even.push(true);
        t
    }

    /// Encoding nearest to `x`, ties to an even mantissa.
    pub fn nearest(&self, x: f32) -> u32 {
        let fmt = self.fmt;
        if x.is_nan() {
            return fmt.canonical_nan();
        }
        let sign = (x.is_sign_negative() as u32) << (fmt.total - 1);
        if x.is_infinite() || x.to_bits() & 0x7f80_0000 == 0 {
            return sign | if x.is_infinite() { field_max(fmt) << fmt.man } else { 0 };
        }
        let a = (x as f64).abs();
        let i = self.values.partition_point(|&v| v <= a);
        if i == 0 {
            return sign;
        }
        let lo = i - 1;
        let pick = if self.values[lo] == a || lo + 1 == self.values.len() {
            lo
        } else {
            let (dl, dh) = (a - self.values[lo], self.values[lo + 1] - a);
            match dl.partial_cmp(&dh).unwrap() {
                std::cmp::Ordering::Less => lo,
                std::cmp::Ordering::Greater => lo + 1,
                std::cmp::Ordering::Equal => {
                    if self.even[lo] {
                        lo
                    } else {
                        lo + 1
                    }
                }
            }
        };
        sign | self.codes[pick]
    }
}

/// Nearest representable value of `x` by bracketing it between adjacent
/// grid points in double precision. Overflow gives infinity; results
/// below the smallest normal give a signed zero.
pub fn nearest_value(x: f32, fmt: FloatFormat) -> f64 {
    if x.is_nan() || x.is_infinite() {
        return x as f64;
    }
    let neg = x.is_sign_negative();
    let signed = |v: f64| if neg { -v } else { v };
    if x.to_bits() & 0x7f80_0000 == 0 {
        return signed(0.0);
    }
    let a = (x as f64).abs();
    let e = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
    let ulp = 2f64.powi(e - fmt.man as i32);
    let q = a / ulp;
    let fl = q.floor();
    let r = q - fl;
    let n = if r > 0.5 || (r == 0.5 && fl % 2.0 == 1.0) { fl + 1.0 } else { fl };
    let v = n * ulp;
    if v >= 2f64.powi(field_max(fmt) as i32 - bias(fmt)) {
        signed(f64::INFINITY)
    } else if v < 2f64.powi(1 - bias(fmt)) {
        signed(0.0)
    } else {
        signed(v)
    }
}

/// Random single-precision input: raw bit patterns, values near the
/// format's exponent range, denormals, and exact ties.
pub fn random_f32(rng: &mut impl Rng, fmt: FloatFormat) -> f32 {
    let sign = (rng.gen::<bool>() as u32) << 31;
    match rng.gen_range(0..8) {
        0 | 1 => f32::from_bits(rng.gen()),
        2 => f32::from_bits(sign | rng.gen_range(0..0x80_0000)),
        3 => {
            let e = rng.gen_range(-bias(fmt) - 3..=bias(fmt) + 2).clamp(-126, 127);
            let shift = 23 - fmt.man;
            let m = rng.gen_range(0..1u32 << fmt.man) << shift;
            let tie = if shift > 0 { 1 << (shift - 1) } else { 0 };
            f32::from_bits(sign | ((e + 127) as u32) << 23 | m | tie)
        }
        _ => {
            let e = rng.gen_range(-bias(fmt) - 3..=bias(fmt) + 2).clamp(-126, 127);
            f32::from_bits(sign | ((e + 127) as u32) << 23 | rng.gen_range(0..0x80_0000))
        }
    }
}

// ----------------------------------------------------- datapath oracles

/// Random slice subset of size `n`.
pub fn random_mask(rng: &mut impl Rng, n: u32) -> u8 {
    let mut slots: Vec<u8> = (0..8).collect();
    slots.shuffle(rng);
    slots[..n as usize].iter().fold(0, |m, s| m | 1 << s)
}

/// Random entry holding `slices` slices, split across two registers about
/// half the time.
pub fn random_entry(rng: &mut impl Rng, slices: u32, registers: u8) -> IndirectionEntry {
    let r0 = rng.gen_range(0..registers);
    if slices >= 2 && rng.gen_bool(0.5) {
        let a = rng.gen_range(1..slices);
        let mut r1 = rng.gen_range(0..registers - 1);
        if r1 >= r0 {
            r1 += 1;
        }
        IndirectionEntry { r0, m0: random_mask(rng, a), r1, m1: random_mask(rng, slices - a) }
    } else {
        IndirectionEntry { r0, m0: random_mask(rng, slices), r1: 0, m1: 0 }
    }
}

/// Gathers an operand one bit at a time: data bits are the selected
/// slices of `r0` then of `r1`, each in ascending slice order. The result
/// keeps `width` bits and, when `signed`, copies bit `width - 1` upwards.
pub fn gather_bits(regs: &[u32], e: IndirectionEntry, signed: bool, width: u32) -> u32 {
    let mut bits = Vec::new();
    for (r, m) in [(e.r0, e.m0), (e.r1, e.m1)] {
        for s in 0..8 {
            if m >> s & 1 == 1 {
                for b in 0..4 {
                    bits.push(regs[r as usize] >> (4 * s + b) & 1);
                }
            }
        }
    }
    let mut out = 0u32;
    for (i, b) in bits.iter().enumerate().take(width as usize) {
        out |= b << i;
    }
    if signed && width < 32 && out >> (width - 1) & 1 == 1 {
        for i in width..32 {
            out |= 1 << i;
        }
    }
    out
}

// --------------------------------------------------------------- traces

fn event(op: OpClass, src: &[u8], dst: Option<u8>) -> TraceEvent {
    TraceEvent { op, src: src.to_vec(), dst }
}

/// Each warp alternates a load with a dependent ALU op, so throughput is
/// bounded by memory latency unless other warps fill the gaps.
pub fn latency_bound_trace(warps: usize, len: usize) -> Trace {
    let stream = (0..len)
        .map(|i| match i % 2 {
            0 => event(OpClass::Ldst, &[1], Some(0)),
            _ => event(OpClass::Spu, &[0], Some(1)),
        })
        .collect();
    Trace::replicate(stream, warps)
}

/// Every instruction reads the previous result.
pub fn dependency_chain_trace(warps: usize, len: usize) -> Trace {
    let stream = (0..len)
        .map(|i| {
            let (s, d) = ((i % 2) as u8, ((i + 1) % 2) as u8);
            let op = if i % 5 == 4 { OpClass::Sfu } else { OpClass::Spu };
            event(op, &[s, 2], Some(d))
        })
        .collect();
    Trace::replicate(stream, warps)
}

/// No instruction reads a register written in the trace.
pub fn independent_trace(warps: usize, len: usize) -> Trace {
    let stream = (0..len).map(|i| event(OpClass::Spu, &[0, 1], Some(2 + (i % 4) as u8))).collect();
    Trace::replicate(stream, warps)
}

pub fn random_trace(rng: &mut impl Rng, warps: usize, len: usize, registers: u8) -> Trace {
    let warps = (0..warps)
        .map(|_| {
            (0..len)
                .map(|_| {
                    let op = match rng.gen_range(0..10) {
                        0 => OpClass::Sfu,
                        1 => OpClass::Ldst,
                        _ => OpClass::Spu,
                    };
                    let mut src: Vec<u8> = (0..rng.gen_range(0..=3)).map(|_| rng.gen_range(0..registers)).collect();
                    src.sort_unstable();
                    src.dedup();
                    let dst = rng.gen_bool(0.9).then(|| rng.gen_range(0..registers));
                    TraceEvent { op, src, dst }
                })
                .collect()
        })
        .collect();
    Trace { warps }
}

/// Checks one conversion against both oracles (the table only for formats
/// narrow enough to enumerate). Returns a description of any mismatch.
pub fn minifloat_mismatch(fmt: FloatFormat, table: Option<&EncodingTable>, x: f32) -> Option<String> {
    use regpack::minifloat::{convert_down, convert_up};
    let got = convert_down(x, fmt);
    if got.format != fmt {
        return Some(format!("{x:e}: wrong format tag"));
    }
    if let Some(t) = table {
        let want = t.nearest(x);
        if got.bits != want {
            return Some(format!("{fmt} {x:e} ({:#010x}): got {:#x}, table oracle {want:#x}", x.to_bits(), got.bits));
        }
    }
    let back = convert_up(got) as f64;
    let want = nearest_value(x, fmt);
    let same = if want.is_nan() {
        back.is_nan() && got.bits == fmt.canonical_nan()
    } else {
        back == want && back.is_sign_negative() == want.is_sign_negative()
    };
    (!same).then(|| format!("{fmt} {x:e} ({:#010x}): got {back:e}, bracket oracle {want:e}", x.to_bits()))
}

/// One kernel with a single float value, used to drive the interpreter's
/// storage rounding.
pub fn storage_kernel() -> regpack::ir::Kernel {
    regpack::ir::parse("kernel s(x: f32) {\nblock b:\n  ret x\n}\n").unwrap()
}

/// One random datapath round trip: truncate an operand into garbage-filled
/// registers through a random entry, read it back, and compare with the
/// interpreter's stored value and a bit-by-bit gather. Returns a
/// description of any mismatch.
pub fn datapath_case(rng: &mut impl Rng, k: &regpack::ir::Kernel) -> Option<String> {
    use regpack::alloc::round_width_to_slices;
    use regpack::ir::ScalarType;
    use regpack::sim::{commit, fetch, value_extract, value_truncate};
    use regpack::tuner::{PrecisionAssignment, RoundingStore, ValueStore};

    let (layout, x) = if rng.gen_bool(0.5) {
        let fmt = *FloatFormat::ALL.choose(rng).unwrap();
        let layout = ValueLayout { bits: fmt.total, signed: false, float: Some(fmt) };
        (layout, random_f32(rng, fmt).to_bits())
    } else {
        let bits = rng.gen_range(1..=32u32);
        let signed = rng.gen_bool(0.5);
        let x = match (signed, bits) {
            (_, 32) => rng.gen::<u32>(),
            (true, b) => rng.gen_range(-(1i64 << (b - 1))..(1i64 << (b - 1))) as u32,
            (false, b) => rng.gen_range(0..1u64 << b) as u32,
        };
        (ValueLayout { bits, signed, float: None }, x)
    };
    let entry = random_entry(rng, round_width_to_slices(layout.bits).unwrap(), 4);
    let mut regs: Vec<u32> = (0..4).map(|_| rng.gen()).collect();
    let before = regs.clone();

    let want = match layout.float {
        Some(fmt) => {
            let mut pa = PrecisionAssignment::full(k);
            pa.set(ValueId(0), fmt);
            let mut store = RoundingStore::new(k, Some(&pa));
            store.write(ValueId(0), ScalarType::F32, x);
            store.read(ValueId(0), ScalarType::F32)
        }
        None => x,
    };
    commit(&mut regs, &value_truncate(x, entry, layout));
    let got = fetch(&regs, entry, layout);
    let same = got == want || (f32::from_bits(want).is_nan() && f32::from_bits(got).is_nan() && layout.float.is_some());
    if !same {
        return Some(format!("{layout:?} {entry:?} x={x:#010x}: read {got:#010x}, interpreter {want:#010x}"));
    }
    let mut owned = [0u32; 4];
    for (r, m) in [(entry.r0, entry.m0), (entry.r1, entry.m1)] {
        owned[r as usize] |= slice_bits(m);
    }
    for r in 0..4 {
        if (regs[r] ^ before[r]) & !owned[r] != 0 {
            return Some(format!("{entry:?}: write touched bits outside its slices in r{r}"));
        }
    }
    let signed = layout.signed && layout.float.is_none();
    let width = layout.float.map_or(layout.bits, |f| f.total);
    let parts = value_extract(regs[entry.r0 as usize], entry, 0, signed, width)
        | if entry.m1 != 0 { value_extract(regs[entry.r1 as usize], entry, 1, signed, width) } else { 0 };
    let gathered = gather_bits(&regs, entry, signed, width);
    (parts != gathered).then(|| format!("{entry:?} width {width}: extract {parts:#010x}, gather {gathered:#010x}"))
}

/// Bitline mask of a slice mask, spelled out one slice at a time.
pub fn slice_bits(mask: u8) -> u32 {
    let mut out = 0;
    for s in 0..8 {
        if mask >> s & 1 == 1 {
            out |= 0xf << (4 * s);
        }
    }
    out
}

/// Outcome of packing one random instance.
#[derive(Clone, Debug)]
pub struct PackingTrial {
    pub source: String,
    pub packed: usize,
    pub optimum: usize,
    pub baseline: usize,
    pub verified: Result<(), String>,
}

/// Draws straight-line kernels until one has at most `max_live` values
/// live at once, packs it with random widths, and solves it exactly.
pub fn packing_trial(rng: &mut impl Rng, max_live: usize) -> PackingTrial {
    use regpack::alloc::{allocate, baseline_layouts};
    use regpack::ir::{compute_live_ranges, parse};
    loop {
        let source = random_straight_kernel(rng, max_live);
        let k = parse(&source).unwrap();
        let live = compute_live_ranges(&k);
        if live.max_live() > max_live {
            continue;
        }
        let layouts = random_layouts(rng, k.values.len(), &live);
        let packed = allocate(&k, &layouts, &live).unwrap();
        let baseline = allocate(&k, &baseline_layouts(&k, &live), &live).unwrap();
        let values: Vec<(u32, Vec<usize>)> = k
            .value_ids()
            .filter_map(|v| layouts[v.index()].map(|l| (l.slices(), live.points_of(v).to_vec())))
            .collect();
        let optimum = optimum_pressure(&values, live.points().len(), values.len() + 1);
        return PackingTrial {
            source,
            packed: packed.register_pressure,
            optimum,
            baseline: baseline.register_pressure,
            verified: packed.verify(&live),
        };
    }
}

/// Registers a trace names, as an identity map.
pub fn identity_map(trace: &Trace) -> regpack::sim::RegisterMap {
    let top = trace
        .warps
        .iter()
        .flatten()
        .flat_map(|e| e.src.iter().copied().chain(e.dst))
        .max()
        .map_or(1, |r| r as usize + 1);
    regpack::sim::RegisterMap::identity(top)
}

/// Baseline and packed cycles for `trace` with every register full width
/// and a one-cycle writeback delay.
pub fn stage_delta(trace: &Trace) -> (u64, u64) {
    use regpack::sim::{simulate, Mode, SimConfig};
    let cfg = SimConfig { writeback_delay: 1, ..SimConfig::default() };
    let map = identity_map(trace);
    let occupancy = trace.warps.len().clamp(1, cfg.max_warps);
    let base = simulate(trace, &map, occupancy, &cfg, Mode::Baseline).unwrap();
    let packed = simulate(trace, &map, occupancy, &cfg, Mode::Packed).unwrap();
    (base.cycles, packed.cycles)
}

/// IPC of `trace` in packed mode for each writeback delay.
pub fn ipc_by_delay(trace: &Trace, delays: &[u64]) -> Vec<f64> {
    use regpack::sim::{simulate, Mode, SimConfig};
    let map = identity_map(trace);
    delays
        .iter()
        .map(|&d| {
            let cfg = SimConfig { writeback_delay: d, ..SimConfig::default() };
            simulate(trace, &map, trace.warps.len().min(cfg.max_warps), &cfg, Mode::Packed).unwrap().ipc
        })
        .collect()
}

/// Traces of the bundled kernels under their full-width allocation.
pub fn bundled_traces(warps: usize) -> Vec<(String, Trace)> {
    use regpack::alloc::{allocate, baseline_layouts};
    use regpack::ir::{compute_live_ranges, parse};
    use regpack::sim::build_trace;
    BUNDLED
        .iter()
        .map(|name| {
            let k = parse(&kernel_source(name)).unwrap();
            let live = compute_live_ranges(&k);
            let a = allocate(&k, &baseline_layouts(&k, &live), &live).unwrap();
            let t = build_trace(&k, &a, &kernel_samples(name)[0], warps, 100_000).unwrap();
            (name.to_string(), t)
        })
        .collect()
}

/// Runs the command-line tool; returns exit code, stdout and stderr.
pub fn regpack(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_regpack")).args(args).output().expect("run regpack");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Fresh scratch directory under the system temp dir.
pub fn scratch_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("regpack-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

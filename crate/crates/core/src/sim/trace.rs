//! Per-warp instruction streams and their text form.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::alloc::Allocation;
use crate::ir::{InstKind, Kernel, ValueId};
use crate::tuner::{run, InputBinding, InterpConfig, InterpError, RoundingStore};

/// Execution unit an instruction needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpClass {
    Spu,
    Sfu,
    Ldst,
}

impl OpClass {
    pub fn name(self) -> &'static str {
        match self {
            OpClass::Spu => "spu",
            OpClass::Sfu => "sfu",
            OpClass::Ldst => "ldst",
        }
    }
}

impl FromStr for OpClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "spu" => Ok(OpClass::Spu),
            "sfu" => Ok(OpClass::Sfu),
            "ldst" => Ok(OpClass::Ldst),
            _ => Err(format!("unknown op class `{s}`")),
        }
    }
}

/// One warp instruction over architectural registers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub op: OpClass,
    pub src: Vec<u8>,
    pub dst: Option<u8>,
}

/// Instruction stream of every warp, in program order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub warps: Vec<Vec<TraceEvent>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.warps.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same stream replicated over `warps` warps.
    pub fn replicate(stream: Vec<TraceEvent>, warps: usize) -> Self {
        Trace { warps: vec![stream; warps] }
    }
}

impl fmt::Display for Trace {
    /// Events interleaved round-robin over warps, one per line:
    /// `warp=<id> op=<class> src=<r,...> dst=<r|->`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let longest = self.warps.iter().map(Vec::len).max().unwrap_or(0);
        for i in 0..longest {
            for (w, stream) in self.warps.iter().enumerate() {
                let Some(e) = stream.get(i) else { continue };
                let src: Vec<String> = e.src.iter().map(u8::to_string).collect();
                let dst = e.dst.map_or("-".to_string(), |d| d.to_string());
                writeln!(f, "warp={w} op={} src={} dst={dst}", e.op.name(), src.join(","))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("execution did not finish within {0} steps; supply a larger bound")]
    Unbounded(u64),
    #[error("trace extraction failed: {0}")]
    Interp(InterpError),
}

impl FromStr for Trace {
    type Err = TraceError;

    fn from_str(text: &str) -> Result<Self, TraceError> {
        let mut warps: Vec<Vec<TraceEvent>> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| TraceError::Syntax { line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (mut warp, mut op, mut src, mut dst) = (None, None, None, None);
            for field in body.split_whitespace() {
                let (key, value) = field.split_once('=').ok_or_else(|| err(format!("bad field `{field}`")))?;
                let reg = |s: &str| s.parse::<u8>().map_err(|_| err(format!("bad register `{s}`")));
                match key {
                    "warp" => warp = Some(value.parse::<usize>().map_err(|_| err(format!("bad warp `{value}`")))?),
                    "op" => op = Some(value.parse::<OpClass>().map_err(err)?),
                    "src" if value.is_empty() => src = Some(Vec::new()),
                    "src" => src = Some(value.split(',').map(reg).collect::<Result<Vec<_>, _>>()?),
                    "dst" if value == "-" => dst = Some(None),
                    "dst" => dst = Some(Some(reg(value)?)),
                    _ => return Err(err(format!("unknown field `{key}`"))),
                }
            }
            let (Some(warp), Some(op)) = (warp, op) else {
                return Err(err("missing warp or op".into()));
            };
            let src = src.unwrap_or_default();
            if src.len() > 3 {
                return Err(err("at most three sources".into()));
            }
            if warps.len() <= warp {
                warps.resize(warp + 1, Vec::new());
            }
            warps[warp].push(TraceEvent { op, src, dst: dst.flatten() });
        }
        Ok(Trace { warps })
    }
}

fn class_of(kind: &InstKind) -> OpClass {
    match kind {
        InstKind::Special(_) => OpClass::Sfu,
        InstKind::Ld(_) | InstKind::Emit => OpClass::Ldst,
        _ => OpClass::Spu,
    }
}

/// Runs the kernel once on `input` and replays its dynamic instruction
/// sequence (phis and terminators included) for each of `warps` warps,
/// naming operands by their architectural registers. Execution longer
/// than `step_limit` instructions is an error.
pub fn build_trace(
    k: &Kernel,
    alloc: &Allocation,
    input: &InputBinding,
    warps: usize,
    step_limit: u64,
) -> Result<Trace, TraceError> {
    let mut store = RoundingStore::new(k, None);
    let exec = match run(k, input, &mut store, InterpConfig { step_limit, record_path: true }) {
        Ok(e) => e,
        Err(InterpError::StepLimit(n)) => return Err(TraceError::Unbounded(n)),
        Err(e) => return Err(TraceError::Interp(e)),
    };
    let sources = |values: &mut dyn Iterator<Item = ValueId>| {
        let mut src: Vec<u8> = Vec::with_capacity(3);
        for r in values.filter_map(|v| alloc.arch[v.index()]) {
            if !src.contains(&r) && src.len() < 3 {
                src.push(r);
            }
        }
        src
    };
    let stream: Vec<TraceEvent> = exec
        .path
        .iter()
        .map(|&(b, i)| {
            let block = k.block(b);
            match block.insts.get(i) {
                Some(inst) => TraceEvent {
                    op: class_of(&inst.kind),
                    src: sources(&mut inst.uses()),
                    dst: inst.dest.and_then(|d| alloc.arch[d.index()]),
                },
                None => TraceEvent { op: OpClass::Spu, src: sources(&mut block.term.uses().into_iter()), dst: None },
            }
        })
        .collect();
    Ok(Trace::replicate(stream, warps))
}

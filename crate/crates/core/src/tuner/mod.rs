//! Floating-point precision tuning: a reference interpreter with
//! reduced-precision storage, quality metrics, and a greedy search for the
//! narrowest format of every float value.

pub mod interp;
pub mod quality;
pub mod samples;

pub use interp::{
    interpret, interpret_plain, run, Execution, InputBinding, InputValue, InterpConfig, InterpError, OutputValue,
    RoundingStore, ValueStore,
};
pub use quality::{quality, Metric, Score, ShapeMismatch, Threshold, EPSILON};
pub use samples::{parse_samples, SampleError};

use serde::Serialize;

use crate::ir::{Kernel, ValueId};
use crate::minifloat::FloatFormat;

/// Sweeps over all float values before giving up on a fixed point.
pub const MAX_SWEEPS: usize = 3;

/// Storage format of every float value; integer values have none.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecisionAssignment {
    formats: Vec<Option<FloatFormat>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FormatEntry {
    pub id: u32,
    pub name: String,
    pub bits: u32,
}

impl PrecisionAssignment {
    /// Every float value at full single precision.
    pub fn full(k: &Kernel) -> Self {
        let formats = k.values.iter().map(|v| v.ty.is_float().then_some(FloatFormat::F32)).collect();
        PrecisionAssignment { formats }
    }

    pub fn get(&self, v: ValueId) -> Option<FloatFormat> {
        self.formats.get(v.index()).copied().flatten()
    }

    /// Sets the format of a float value; ignored for integer values.
    pub fn set(&mut self, v: ValueId, fmt: FloatFormat) {
        if let Some(slot @ Some(_)) = self.formats.get_mut(v.index()) {
            *slot = Some(fmt);
        }
    }

    pub fn float_values(&self) -> impl Iterator<Item = (ValueId, FloatFormat)> + '_ {
        self.formats.iter().enumerate().filter_map(|(i, f)| f.map(|f| (ValueId(i as u32), f)))
    }

    pub fn is_empty(&self) -> bool {
        self.formats.iter().all(Option::is_none)
    }

    /// Exported `{value → total bits}` map in value order.
    pub fn export(&self, k: &Kernel) -> Vec<FormatEntry> {
        self.float_values()
            .map(|(v, f)| FormatEntry { id: v.0, name: k.name_of(v).to_string(), bits: f.total })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TuneError {
    #[error("tuning needs at least one sample input")]
    NoSamples,
    #[error("reference run on sample {sample} failed: {source}")]
    Reference { sample: usize, source: InterpError },
}

#[derive(Clone, Debug)]
pub struct TuneResult {
    pub assignment: PrecisionAssignment,
    /// Worst score over the samples under the returned assignment.
    pub worst_score: f64,
    pub sweeps: usize,
    /// Number of (value, format) probes that were evaluated.
    pub probes: usize,
}

struct Evaluator<'a> {
    k: &'a Kernel,
    samples: &'a [InputBinding],
    reference: Vec<Vec<OutputValue>>,
    metric: Metric,
    threshold: Threshold,
}

impl Evaluator<'_> {
    /// Worst score over all samples, stopping at the first violation.
    fn check(&self, pa: &PrecisionAssignment) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for (input, reference) in self.samples.iter().zip(&self.reference) {
            let out = interpret(self.k, input, pa).ok()?;
            let score = quality(reference, &out.outputs, self.metric).ok()?;
            if !score.passes(self.threshold) {
                return None;
            }
            worst = worst.max(score.value);
        }
        Some(worst)
    }
}

/// Greedy sweep: visit float values in definition order and give each the
/// narrowest format that keeps every sample within the threshold, holding
/// the others at their current formats. Repeats until nothing changes or
/// [`MAX_SWEEPS`] sweeps have run.
pub fn tune(
    k: &Kernel,
    samples: &[InputBinding],
    metric: Metric,
    threshold: Threshold,
) -> Result<TuneResult, TuneError> {
    if samples.is_empty() {
        return Err(TuneError::NoSamples);
    }
    let reference = samples
        .iter()
        .enumerate()
        .map(|(i, s)| interpret_plain(k, s).map(|e| e.outputs).map_err(|source| TuneError::Reference { sample: i, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let ev = Evaluator { k, samples, reference, metric, threshold };

    let mut pa = PrecisionAssignment::full(k);
    let order: Vec<ValueId> = k.definition_order().into_iter().filter(|v| k.ty(*v).is_float()).collect();
    let mut probes = 0;
    let mut sweeps = 0;
    for _ in 0..MAX_SWEEPS {
        sweeps += 1;
        let mut changed = false;
        for &v in &order {
            let current = pa.get(v).expect("float value has a format");
            for fmt in FloatFormat::ALL.into_iter().rev() {
                if fmt == current {
                    break;
                }
                let mut trial = pa.clone();
                trial.set(v, fmt);
                probes += 1;
                if ev.check(&trial).is_some() {
                    pa = trial;
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let worst_score = ev.check(&pa).expect("every accepted assignment passes its threshold");
    Ok(TuneResult { assignment: pa, worst_score, sweeps, probes })
}

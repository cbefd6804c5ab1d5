//! Integer range analysis: e-SSA conversion, interval solving, per-variable
//! merging and bitwidth annotation.

mod essa;
mod interval;
mod solve;
mod width;

pub use essa::{to_essa, EssaKernel};
pub use interval::{type_limits, Bound, Interval};
pub use solve::{solve_ranges, MAX_NARROWING_PASSES, WIDEN_AFTER};
pub use width::{
    annotate, bitwidth, merge_ranges, variable_groups, WidthAnnotation, WidthError, FULL_WIDTH_CUTOFF,
};

use serde::Serialize;

use crate::ir::{Kernel, ValueId};

/// Everything the range analysis produces for one kernel.
#[derive(Clone, Debug)]
pub struct RangeAnalysis {
    pub essa: EssaKernel,
    /// Solved interval of every e-SSA value (`None` for floats).
    pub ranges: Vec<Option<Interval>>,
    /// Width of every original value (`None` for floats and dead values).
    pub widths: Vec<Option<WidthAnnotation>>,
}

/// One row of the exported width map.
#[derive(Clone, Debug, Serialize)]
pub struct WidthEntry {
    pub id: u32,
    pub name: String,
    pub lo: Bound,
    pub hi: Bound,
    pub bits: u32,
    pub signed: bool,
}

impl RangeAnalysis {
    pub fn run(k: &Kernel) -> RangeAnalysis {
        let essa = to_essa(k);
        let ranges = solve_ranges(&essa.kernel);
        let widths = annotate(&essa, &ranges);
        RangeAnalysis { essa, ranges, widths }
    }

    /// Interval of a value by name, looked up in the e-SSA kernel.
    pub fn interval_of(&self, name: &str) -> Option<Interval> {
        let v = self.essa.kernel.find_value(name)?;
        self.ranges[v.index()]
    }

    /// Merged interval of the variable an original value belongs to.
    pub fn merged_of(&self, v: ValueId) -> Option<Interval> {
        self.widths.get(v.index()).copied().flatten().map(|w| w.interval())
    }

    /// Machine-readable width map in value order.
    pub fn width_map(&self) -> Vec<WidthEntry> {
        self.widths
            .iter()
            .enumerate()
            .filter_map(|(i, w)| {
                w.map(|w| WidthEntry {
                    id: i as u32,
                    name: self.essa.kernel.values[i].name.clone(),
                    lo: w.lo,
                    hi: w.hi,
                    bits: w.bits,
                    signed: w.signed,
                })
            })
            .collect()
    }
}

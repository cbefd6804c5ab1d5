mod common;

use regpack::ir::eval::int_value;
use regpack::ir::{parse, validate, ScalarType, ValueId};
use regpack::range::{Interval, RangeAnalysis};
use regpack::tuner::{run, InterpConfig, ValueStore};

/// Records every integer write that falls outside its solved interval.
struct Checker<'a> {
    ranges: &'a [Option<Interval>],
    values: Vec<u32>,
    violations: Vec<(ValueId, i64)>,
}

impl ValueStore for Checker<'_> {
    fn write(&mut self, v: ValueId, ty: ScalarType, bits: u32) {
        if ty.is_int() {
            let n = int_value(ty, bits);
            if !self.ranges[v.index()].is_some_and(|iv| iv.contains(n)) {
                self.violations.push((v, n));
            }
        }
        self.values[v.index()] = bits;
    }

    fn read(&self, v: ValueId, _ty: ScalarType) -> u32 {
        self.values[v.index()]
    }
}

#[test]
fn generated_kernels_are_valid() {
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let g = common::random_loop_kernel(&mut rng);
        let k = parse(&g.source).unwrap_or_else(|e| panic!("{e}\n{}", g.source));
        assert!(validate(&k).is_empty(), "{}", g.source);
        let again = parse(&k.to_string()).expect("printed kernel parses");
        assert_eq!(again.to_string(), k.to_string());
    }
}

#[test]
fn concrete_values_stay_in_solved_intervals() {
    let mut rng = common::rng(12);
    for _ in 0..150 {
        let g = common::random_loop_kernel(&mut rng);
        let k = parse(&g.source).unwrap();
        let ra = RangeAnalysis::run(&k);
        for _ in 0..20 {
            let input = g.random_input(&mut rng);
            let mut c = Checker { ranges: &ra.ranges, values: vec![0; ra.essa.kernel.values.len()], violations: vec![] };
            run(&ra.essa.kernel, &input, &mut c, InterpConfig::default()).unwrap();
            assert!(c.violations.is_empty(), "{:?}\n{}", c.violations, ra.essa.kernel);
        }
    }
}

#[test]
fn merged_width_covers_every_renaming() {
    let mut rng = common::rng(13);
    for _ in 0..100 {
        let k = parse(&common::random_loop_kernel(&mut rng).source).unwrap();
        let ra = RangeAnalysis::run(&k);
        for v in ra.essa.kernel.value_ids() {
            let root = ra.essa.root(v);
            if let (Some(iv), Some(merged)) = (ra.ranges[v.index()], ra.merged_of(root)) {
                assert!(iv.is_subset_of(merged), "{} {iv:?} not in {merged:?}", ra.essa.kernel.name_of(v));
            }
        }
    }
}

#[test]
fn stripping_sigmas_restores_the_kernel() {
    let mut rng = common::rng(14);
    for _ in 0..100 {
        let k = parse(&common::random_loop_kernel(&mut rng).source).unwrap();
        let ra = RangeAnalysis::run(&k);
        assert_eq!(ra.essa.strip().to_string(), k.to_string());
    }
}

#[test]
fn analysis_is_deterministic() {
    let k = parse(&common::kernel_source("fig4")).unwrap();
    let a = RangeAnalysis::run(&k);
    let b = RangeAnalysis::run(&k);
    assert_eq!(a.ranges, b.ranges);
    assert_eq!(a.widths, b.widths);
}

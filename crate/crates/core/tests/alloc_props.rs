mod common;

use regpack::alloc::{allocate, baseline_layouts, packed_layouts, register_pressure};
use regpack::ir::{compute_live_ranges, parse};
use regpack::range::RangeAnalysis;
use regpack::tuner::PrecisionAssignment;

#[test]
fn packing_is_near_the_exact_optimum() {
    let mut rng = common::rng(41);
    let mut exact = 0;
    let n = 150;
    for _ in 0..n {
        let t = common::packing_trial(&mut rng, 6);
        assert_eq!(t.verified, Ok(()), "{}", t.source);
        assert!(t.packed <= t.optimum + 1, "{t:?}");
        assert!(t.packed <= t.baseline, "{t:?}");
        assert!(t.optimum <= t.packed);
        exact += (t.packed == t.optimum) as usize;
    }
    assert!(exact * 10 >= n * 9, "{exact}/{n} optimal");
}

#[test]
fn optimum_of_known_instances() {
    // Four 4-slice values live together fit two registers.
    let v = |n: u32| (n, vec![0, 1, 2]);
    assert_eq!(common::optimum_pressure(&[v(4), v(4), v(4), v(4)], 3, 9), 2);
    // Three 5-slice values need a split to fit two registers.
    assert_eq!(common::optimum_pressure(&[v(5), v(5), v(5)], 3, 9), 2);
    // Disjoint lifetimes share everything.
    let w = [(8, vec![0]), (8, vec![1]), (8, vec![2])];
    assert_eq!(common::optimum_pressure(&w, 3, 9), 1);
}

#[test]
fn random_loop_kernels_allocate_consistently() {
    let mut rng = common::rng(42);
    for _ in 0..100 {
        let k = parse(&common::random_loop_kernel(&mut rng).source).unwrap();
        let live = compute_live_ranges(&k);
        let ra = RangeAnalysis::run(&k);
        let pa = PrecisionAssignment::full(&k);
        let packed = allocate(&k, &packed_layouts(&k, &ra, Some(&pa), &live), &live).unwrap();
        let baseline = allocate(&k, &baseline_layouts(&k, &live), &live).unwrap();
        assert_eq!(packed.verify(&live), Ok(()));
        assert_eq!(baseline.verify(&live), Ok(()));
        assert_eq!(baseline.register_pressure, live.max_live());
        assert!(packed.register_pressure <= baseline.register_pressure);
        assert_eq!(register_pressure(&packed.entries, &live), packed.register_pressure);
    }
}

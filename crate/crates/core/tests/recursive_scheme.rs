//! End-to-end behavior of the iterated-log acyclicity verifier:
//! completeness on trees, resource measurements, soundness on cycles and
//! corrupted stacks, and the level-induction property.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pls_core::acyclic::BlockPos;
use pls_core::bits::iter_log2;
use pls_core::graph::{generate, GraphConfig, GraphKind};
use pls_core::recursive::{
    check_stacks_central, default_budget, level_lengths, prove_recursive, rverify,
    rverify_with_budget, RecursiveLabelStack, RootChoice,
};

fn prove(g: &GraphConfig, t1: u64) -> Vec<RecursiveLabelStack> {
    prove_recursive(g, t1, RootChoice::FirstVertex).unwrap()
}

#[test]
fn completeness_and_resources_across_sizes() {
    let mut worst_state = 0.0f64;
    // The level-1 capacity 2^t1 must exceed the tree depth, so deep paths
    // need the larger block lengths.
    for &(n, t1) in &[
        (64usize, 6u64),
        (256, 16),
        (1024, 16),
        (4096, 16),
        (65536, 16),
        (4096, 36),
    ] {
        for kind in [GraphKind::Path, GraphKind::RandomTree] {
            let g = generate(kind, n, 42).unwrap();
            let stacks = prove(&g, t1);
            let (verdict, metrics) = rverify(&g, &stacks).unwrap();
            assert!(verdict.accepted, "{kind:?} n={n} t1={t1}");
            // Honest runs finish in a bounded multiple of t1, independent
            // of n.
            assert!(
                metrics.rounds <= 8 * t1 + 16,
                "{kind:?} n={n} t1={t1}: rounds {}",
                metrics.rounds
            );
            // Constant per-edge message size.
            assert!(metrics.max_msg_bits <= 40, "{}", metrics.max_msg_bits);
            // Persistent state stays within C * log*(n) bits.
            let ratio = metrics.max_state_bits as f64 / iter_log2(n as u64).max(1) as f64;
            worst_state = worst_state.max(ratio);
        }
    }
    assert!(
        worst_state <= 32.0,
        "state/log* ratio too large: {worst_state}"
    );
}

#[test]
fn rejects_every_fuzzed_cycle_quickly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [6usize, 12, 24, 36] {
        let g = generate(GraphKind::Cycle, n, 0).unwrap();
        for trial in 0..200 {
            let stacks = fuzz_stacks(&mut rng, n, 6);
            let budget = default_budget(n);
            let (verdict, metrics) = rverify_with_budget(&g, &stacks, budget).unwrap();
            assert!(!verdict.accepted, "cycle n={n} trial={trial}");
            assert!(metrics.rounds <= budget);
        }
    }
}

#[test]
fn rejects_structured_cycle_labelings() {
    // Consistent orientation and block structure around a cycle whose
    // length the blocks divide: only the distance chain can catch it.
    for (n, t1) in [(36usize, 6u64), (48, 16)] {
        let g = generate(GraphKind::Cycle, n, 0).unwrap();
        let lengths = level_lengths(t1);
        for shift in 0..4u64 {
            let stacks: Vec<RecursiveLabelStack> = (0..n)
                .map(|v| {
                    let d = v as u64;
                    let levels = lengths
                        .iter()
                        .map(|&t| {
                            let o = d % t;
                            let pos = if o == 0 {
                                BlockPos::Head
                            } else if o == t - 1 {
                                BlockPos::Tail
                            } else {
                                BlockPos::Mid
                            };
                            (pos, (d / t) % 2 == 1)
                        })
                        .collect();
                    RecursiveLabelStack {
                        orientation: (d % 3) as u8,
                        distance_bit: (d - d % t1 + shift) >> (d % t1) & 1 == 1,
                        levels,
                    }
                })
                .collect();
            assert!(!check_stacks_central(&g, &stacks, t1));
            let (verdict, _) = rverify(&g, &stacks).unwrap();
            assert!(!verdict.accepted, "cycle n={n} t1={t1} shift={shift}");
        }
    }
}

#[test]
fn level_induction_rejects_single_level_corruption() {
    // With every other level left intact, corrupting one level makes the
    // verifier reject: the executable form of the per-level induction.
    let g = generate(GraphKind::Path, 200, 0).unwrap();
    let t1 = 36; // levels (36, 6, 3)
    let stacks = prove(&g, t1);
    let k = stacks[0].k();
    assert_eq!(k, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for level in 0..k {
        for _ in 0..40 {
            let mut bad = stacks.clone();
            // Corrupt inside a complete block, away from the leaf edge.
            let v = rng.gen_range(t1 as usize..150);
            let (pos, color) = bad[v].levels[level];
            match rng.gen_range(0..2) {
                0 => {
                    bad[v].levels[level].0 = match pos {
                        BlockPos::Head => BlockPos::Mid,
                        BlockPos::Mid => BlockPos::Tail,
                        BlockPos::Tail => BlockPos::Head,
                    }
                }
                _ => bad[v].levels[level].1 = !color,
            }
            if check_stacks_central(&g, &bad, t1) {
                continue; // corruption happened to stay legal
            }
            let (verdict, _) = rverify(&g, &bad).unwrap();
            assert!(!verdict.accepted, "level {level} corruption at {v}");
        }
    }
    // Distance-bit corruption is caught through the add-and-compare chain.
    for _ in 0..40 {
        let mut bad = stacks.clone();
        let v = rng.gen_range(t1 as usize..150);
        bad[v].distance_bit = !bad[v].distance_bit;
        assert!(!check_stacks_central(&g, &bad, t1));
        let (verdict, _) = rverify(&g, &bad).unwrap();
        assert!(!verdict.accepted, "distance corruption at {v}");
    }
}

#[test]
fn unicyclic_fuzz_rejects() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..8 {
        let n = 24;
        let g = generate(GraphKind::Unicyclic, n, seed).unwrap();
        for _ in 0..250 {
            let stacks = fuzz_stacks(&mut rng, n, 6);
            let (verdict, metrics) = rverify(&g, &stacks).unwrap();
            assert!(!verdict.accepted, "unicyclic seed={seed}");
            assert!(metrics.rounds <= default_budget(n));
        }
    }
}

/// Random stacks of plausible shape: valid field ranges, random contents.
fn fuzz_stacks(rng: &mut ChaCha8Rng, n: usize, t1: u64) -> Vec<RecursiveLabelStack> {
    let k = level_lengths(t1).len();
    (0..n)
        .map(|_| RecursiveLabelStack {
            orientation: rng.gen_range(0..3),
            distance_bit: rng.gen(),
            levels: (0..k)
                .map(|_| {
                    let pos = match rng.gen_range(0..3) {
                        0 => BlockPos::Head,
                        1 => BlockPos::Mid,
                        _ => BlockPos::Tail,
                    };
                    (pos, rng.gen())
                })
                .collect(),
        })
        .collect()
}

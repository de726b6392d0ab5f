//! Acyclicity verification in iterated-log space with no prior knowledge
//! of the round count.
//!
//! Labels carry the usual orientation plus a stack of block labels: level
//! 1 blocks have a chosen length t1 and hold one distance bit per vertex;
//! level i+1 blocks have length ceil(log2 t_i) and subdivide the level-i
//! blocks. Verification runs level by level from the deepest (which is
//! short enough to check inside a constant-radius window) up to level 1:
//! each level's block length is counted by bouncing a token through the
//! block while the sub-blocks below tally the elapsed time in shares,
//! then neighboring sub-blocks stream their tallies to each other and
//! compare. At level 1 the same streaming transfers the distance counter
//! so child blocks can check they sit exactly one block length deeper.
//!
//! Every vertex keeps O(1) working bits besides its stack, every message
//! fits a constant frame, and an honest labeling finishes in O(t1)
//! rounds; the engine budget caps adversarial runs at O(n).

mod frame;
pub mod harness;
mod verifier;

use thiserror::Error;

use crate::acyclic::{self, AcyclicityLabel, BlockPos};
use crate::bits::{ceil_log2, Bits};
use crate::engine::{self, RunMetrics, Verdict};
use crate::graph::GraphConfig;

pub use verifier::RecursiveVerifier;

#[derive(Debug, Error)]
pub enum RecursiveError {
    #[error("prover requires a connected acyclic configuration")]
    NotAcyclic,
    #[error("t1 must be at least 2 (got {0})")]
    BadT1(u64),
    #[error("tree depth {depth} needs more than the 2^{t1} distance capacity; choose a larger t1")]
    CapacityExceeded { depth: usize, t1: u64 },
    #[error("labels cover {got} vertices, graph has {want}")]
    LabelMismatch { got: usize, want: usize },
    #[error("engine: {0}")]
    Engine(#[from] engine::EngineError),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Per-vertex label stack: orientation and one distance bit for level 1,
/// a block position and color for every level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursiveLabelStack {
    pub orientation: u8,
    pub distance_bit: bool,
    /// (block position, color) for levels 1..=k.
    pub levels: Vec<(BlockPos, bool)>,
}

impl RecursiveLabelStack {
    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn encode(&self) -> Bits {
        let mut b = Bits::new();
        b.push_u64(self.orientation as u64, 2);
        b.push(self.distance_bit);
        for &(pos, color) in &self.levels {
            b.push_u64(pos.encode_u64(), 2);
            b.push(color);
        }
        b
    }

    pub fn decode(bits: &Bits) -> Option<Self> {
        if bits.len() < 6 || (bits.len() - 3) % 3 != 0 {
            return None;
        }
        let orientation = bits.read_u64(0, 2) as u8;
        if orientation > 2 {
            return None;
        }
        let k = (bits.len() - 3) / 3;
        let mut levels = Vec::with_capacity(k);
        for i in 0..k {
            let pos = BlockPos::decode_u64(bits.read_u64(3 + 3 * i, 2))?;
            levels.push((pos, bits.get(5 + 3 * i)));
        }
        Some(RecursiveLabelStack {
            orientation,
            distance_bit: bits.get(2),
            levels,
        })
    }
}

/// Block lengths per level: t1, then ceil(log2) repeatedly until the
/// length is at most 4 (the base level, checked inside a fixed window).
pub fn level_lengths(t1: u64) -> Vec<u64> {
    let mut lengths = vec![t1];
    while *lengths.last().unwrap() > 4 {
        lengths.push(ceil_log2(*lengths.last().unwrap()) as u64);
    }
    lengths
}

/// A block length is usable when every deeper level divides the one above
/// it: the count of a level-i block must land in (2^(m-1), 2^m] for the
/// m-bit sub-block counters, which pins m = ceil(log2 t_i), and sub-blocks
/// must tile their parent exactly.
pub fn is_admissible(t1: u64) -> bool {
    if t1 < 2 {
        return false;
    }
    if t1 <= 4 {
        return true;
    }
    let m = ceil_log2(t1) as u64;
    t1 % m == 0 && is_admissible(m)
}

/// The largest admissible length not exceeding the request.
pub fn admissible_t1(request: u64) -> Result<u64, RecursiveError> {
    if request < 2 {
        return Err(RecursiveError::BadT1(request));
    }
    let mut t = request;
    while !is_admissible(t) {
        t -= 1;
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy)]
pub enum RootChoice {
    FirstVertex,
    Seeded(u64),
}

/// Labels a connected acyclic configuration with a recursive stack. The
/// requested t1 is rounded down to the nearest admissible length; the
/// level-1 capacity 2^t1 must exceed the tree depth.
pub fn prove_recursive(
    g: &GraphConfig,
    t1: u64,
    root: RootChoice,
) -> Result<Vec<RecursiveLabelStack>, RecursiveError> {
    let t1 = admissible_t1(t1)?;
    if !g.is_connected() || g.has_cycle() {
        return Err(RecursiveError::NotAcyclic);
    }
    let root = match root {
        RootChoice::FirstVertex => 0,
        RootChoice::Seeded(seed) => {
            use rand::{Rng, SeedableRng};
            rand_chacha::ChaCha8Rng::seed_from_u64(seed).gen_range(0..g.n())
        }
    };
    let depth = g.bfs_distances(root);
    let max_depth = depth.iter().copied().max().unwrap_or(0);
    if t1 < 64 && max_depth as u64 >= 1 << t1 {
        return Err(RecursiveError::CapacityExceeded {
            depth: max_depth,
            t1,
        });
    }
    let lengths = level_lengths(t1);
    Ok((0..g.n())
        .map(|v| {
            let d = depth[v] as u64;
            let levels = lengths
                .iter()
                .map(|&t| {
                    let offset = d % t;
                    let pos = if offset == 0 {
                        BlockPos::Head
                    } else if offset == t - 1 {
                        BlockPos::Tail
                    } else {
                        BlockPos::Mid
                    };
                    (pos, (d / t) % 2 == 1)
                })
                .collect();
            RecursiveLabelStack {
                orientation: (d % 3) as u8,
                distance_bit: (d - d % t1) >> (d % t1) & 1 == 1,
                levels,
            }
        })
        .collect())
}

/// Centralized oracle: the stack is correct for block lengths derived
/// from t1 when level 1 (with its one-bit distance shares) and every
/// deeper level's block structure pass the per-level correctness rules,
/// heads and tails align across levels, and the length cascade holds.
pub fn check_stacks_central(g: &GraphConfig, stacks: &[RecursiveLabelStack], t1: u64) -> bool {
    if stacks.len() != g.n() || g.n() == 0 {
        return false;
    }
    if !is_admissible(t1) {
        return false;
    }
    let lengths = level_lengths(t1);
    let k = lengths.len();
    if stacks.iter().any(|s| s.k() != k) {
        return false;
    }
    for (i, &t) in lengths.iter().enumerate() {
        let labels: Vec<AcyclicityLabel> = stacks
            .iter()
            .map(|s| AcyclicityLabel {
                orientation: s.orientation,
                block: s.levels[i].0,
                color: s.levels[i].1,
                share: if i == 0 {
                    std::iter::once(s.distance_bit).collect()
                } else {
                    Bits::new()
                },
            })
            .collect();
        if !acyclic::check_labels_central(g, &labels, t) {
            return false;
        }
    }
    // Alignment: a head (tail) at level i is a head (tail) at every
    // deeper level, since deeper blocks tile shallower ones.
    for s in stacks {
        for i in 0..k.saturating_sub(1) {
            let (pos, _) = s.levels[i];
            let (deeper, _) = s.levels[i + 1];
            if pos == BlockPos::Head && deeper != BlockPos::Head {
                return false;
            }
            if pos == BlockPos::Tail && deeper != BlockPos::Tail {
                return false;
            }
        }
    }
    true
}

/// Runs the distributed verifier over all levels, deepest first. No
/// round oracle is used; the budget caps adversarial label stacks.
pub fn rverify(
    g: &GraphConfig,
    stacks: &[RecursiveLabelStack],
) -> Result<(Verdict, RunMetrics), RecursiveError> {
    rverify_with_budget(g, stacks, default_budget(g.n()))
}

/// Worst-case round budget: adversarial stacks are rejected within O(n).
pub fn default_budget(n: usize) -> u64 {
    12 * n as u64 + 64
}

pub fn rverify_with_budget(
    g: &GraphConfig,
    stacks: &[RecursiveLabelStack],
    budget: u64,
) -> Result<(Verdict, RunMetrics), RecursiveError> {
    if stacks.len() != g.n() {
        return Err(RecursiveError::LabelMismatch {
            got: stacks.len(),
            want: g.n(),
        });
    }
    let encoded: Vec<Bits> = stacks.iter().map(RecursiveLabelStack::encode).collect();
    Ok(engine::run(
        g,
        &encoded,
        &RecursiveVerifier,
        engine::RoundOracle::None,
        budget,
    )?)
}

/// Stack label file: one record per vertex, "v a d b1 c1 | b2 c2 | ...".
pub fn write_labels(stacks: &[RecursiveLabelStack]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (v, s) in stacks.iter().enumerate() {
        write!(out, "{v} {} {}", s.orientation, s.distance_bit as u8).unwrap();
        for (i, &(pos, color)) in s.levels.iter().enumerate() {
            let sep = if i == 0 { " " } else { " | " };
            write!(out, "{sep}{pos} {}", color as u8).unwrap();
        }
        writeln!(out).unwrap();
    }
    out
}

pub fn read_labels(text: &str) -> Result<Vec<RecursiveLabelStack>, RecursiveError> {
    let mut stacks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| RecursiveError::Parse {
            line: lineno + 1,
            reason,
        };
        let parts: Vec<&str> = line.split_whitespace().filter(|p| *p != "|").collect();
        if parts.len() < 5 || (parts.len() - 3) % 2 != 0 {
            return Err(err("expected \"v a d b1 c1 | b2 c2 | ...\"".into()));
        }
        let v: usize = parts[0].parse().map_err(|_| err("bad vertex".into()))?;
        if v != stacks.len() {
            return Err(err(format!("expected vertex {}, got {v}", stacks.len())));
        }
        let orientation: u8 = parts[1].parse().map_err(|_| err("bad orientation".into()))?;
        let distance_bit = match parts[2] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("bad distance bit {other:?}"))),
        };
        let mut levels = Vec::new();
        for pair in parts[3..].chunks(2) {
            let pos = match pair[0] {
                "HEAD" => BlockPos::Head,
                "MID" => BlockPos::Mid,
                "TAIL" => BlockPos::Tail,
                other => return Err(err(format!("bad block position {other:?}"))),
            };
            let color = match pair[1] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("bad color {other:?}"))),
            };
            levels.push((pos, color));
        }
        stacks.push(RecursiveLabelStack {
            orientation,
            distance_bit,
            levels,
        });
    }
    Ok(stacks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    #[test]
    fn admissible_lengths() {
        // Powers-of-two towers and any value whose ceil-log divides it.
        for t in [2, 3, 4, 6, 12, 16, 36, 65536_u64] {
            assert!(is_admissible(t), "{t}");
        }
        for t in [5, 7, 8, 9, 10, 11, 13, 14, 15, 17] {
            assert!(!is_admissible(t), "{t}");
        }
        assert_eq!(admissible_t1(8).unwrap(), 6);
        assert_eq!(admissible_t1(16).unwrap(), 16);
        assert_eq!(admissible_t1(2).unwrap(), 2);
        assert!(admissible_t1(1).is_err());
        assert_eq!(level_lengths(16), vec![16, 4]);
        assert_eq!(level_lengths(6), vec![6, 3]);
        assert_eq!(level_lengths(36), vec![36, 6, 3]);
        assert_eq!(level_lengths(4), vec![4]);
    }

    #[test]
    fn prover_output_is_correct() {
        let g = generate(GraphKind::Path, 64, 0).unwrap();
        let stacks = prove_recursive(&g, 8, RootChoice::FirstVertex).unwrap();
        // t1 = 8 is rounded down to 6, giving levels (6, 3).
        assert_eq!(stacks[0].k(), 2);
        assert!(check_stacks_central(&g, &stacks, 6));
        // Level-1 distance shares spell each block head's depth.
        for (v, s) in stacks.iter().enumerate() {
            let d = v as u64;
            let head_depth = d - d % 6;
            assert_eq!(s.distance_bit, (head_depth >> (d % 6)) & 1 == 1, "v={v}");
        }
    }

    #[test]
    fn single_vertex_stack() {
        let g = generate(GraphKind::Path, 1, 0).unwrap();
        let stacks = prove_recursive(&g, 4, RootChoice::FirstVertex).unwrap();
        assert_eq!(stacks.len(), 1);
        assert_eq!(stacks[0].levels[0].0, BlockPos::Head);
        assert!(check_stacks_central(&g, &stacks, 4));
    }

    #[test]
    fn prover_refuses_cycles_and_overflow() {
        let g = generate(GraphKind::Cycle, 6, 0).unwrap();
        assert!(matches!(
            prove_recursive(&g, 4, RootChoice::FirstVertex),
            Err(RecursiveError::NotAcyclic)
        ));
        let deep = generate(GraphKind::Path, 40, 0).unwrap();
        assert!(matches!(
            prove_recursive(&deep, 4, RootChoice::FirstVertex),
            Err(RecursiveError::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn central_checker_rejects_corruption() {
        let g = generate(GraphKind::Path, 64, 0).unwrap();
        let stacks = prove_recursive(&g, 16, RootChoice::FirstVertex).unwrap();
        assert!(check_stacks_central(&g, &stacks, 16));
        let mut bad = stacks.clone();
        bad[20].levels[1].0 = BlockPos::Mid;
        assert!(!check_stacks_central(&g, &bad, 16));
        let mut bad = stacks.clone();
        bad[33].distance_bit = !bad[33].distance_bit;
        assert!(!check_stacks_central(&g, &bad, 16));
    }

    #[test]
    fn label_file_round_trip() {
        let g = generate(GraphKind::Path, 30, 0).unwrap();
        let stacks = prove_recursive(&g, 6, RootChoice::FirstVertex).unwrap();
        let text = write_labels(&stacks);
        assert_eq!(read_labels(&text).unwrap(), stacks);
    }

    #[test]
    fn verifier_accepts_single_level_stacks() {
        // t1 <= 4: everything resolves inside the prologue window.
        for n in [1usize, 2, 3, 7, 12] {
            let g = generate(GraphKind::Path, n, 0).unwrap();
            let stacks = prove_recursive(&g, 4, RootChoice::FirstVertex).unwrap();
            let (verdict, metrics) = rverify(&g, &stacks).unwrap();
            assert!(verdict.accepted, "path n={n}: {verdict:?}");
            assert_eq!(metrics.rounds, 10);
        }
    }

    #[test]
    fn verifier_accepts_two_level_stacks_on_path() {
        let g = generate(GraphKind::Path, 40, 0).unwrap();
        let stacks = prove_recursive(&g, 6, RootChoice::FirstVertex).unwrap();
        let (verdict, metrics) = rverify(&g, &stacks).unwrap();
        assert!(verdict.accepted, "{verdict:?}");
        assert!(!metrics.timed_out);
    }
}

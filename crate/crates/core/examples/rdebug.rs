use pls_core::engine::{self, RoundOracle};
use pls_core::graph::{generate, GraphKind};
use pls_core::recursive::{self, RootChoice};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(40);
    let t1: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(6);
    let kind = match args.get(3).map(String::as_str) {
        Some("tree") => GraphKind::RandomTree,
        Some("star") => GraphKind::StarOfPaths,
        _ => GraphKind::Path,
    };
    let seed: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0);
    let g = generate(kind, n, seed).unwrap();
    let stacks = recursive::prove_recursive(&g, t1, RootChoice::FirstVertex).unwrap();
    let encoded: Vec<_> = stacks.iter().map(|s| s.encode()).collect();
    let (verdict, metrics, traces) = engine::run_traced(
        &g,
        &encoded,
        &recursive::RecursiveVerifier,
        RoundOracle::None,
        args.get(5).map(|s| s.parse().unwrap()).unwrap_or(recursive::default_budget(n)),
    )
    .unwrap();
    println!("accepted={} rounds={} timed_out={}", verdict.accepted, metrics.rounds, metrics.timed_out);
    // First decision round per vertex + first rejections.
    let mut reported = 0;
    for tr in &traces {
        for (v, d) in tr.decisions.iter().enumerate() {
            if *d == Some(false) {
                let prev = traces.iter().find(|t| t.round + 1 == tr.round).map(|t| t.decisions[v]).unwrap_or(None);
                if prev.is_none() && reported < 12 {
                    println!("vertex {v} REJECTED in round {}", tr.round);
                    reported += 1;
                }
            }
        }
    }
    if metrics.timed_out {
        let last = traces.last().unwrap();
        let undecided: Vec<usize> = last.decisions.iter().enumerate().filter(|(_, d)| d.is_none()).map(|(v, _)| v).take(20).collect();
        println!("undecided at budget: {undecided:?}");
    }
    // Decision timeline summary
    let mut acc_rounds: Vec<(u64, usize)> = Vec::new();
    for tr in &traces {
        let count = tr.decisions.iter().filter(|d| **d == Some(true)).count();
        if acc_rounds.last().map(|&(_, c)| c) != Some(count) {
            acc_rounds.push((tr.round, count));
        }
    }
    println!("accept progression: {acc_rounds:?}");
}

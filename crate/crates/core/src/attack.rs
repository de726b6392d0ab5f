//! Executable lower-bound machinery.
//!
//! The collision attack: take a configuration with many directed edges
//! whose t-neighborhoods are pairwise disjoint and isomorphic, concatenate
//! each neighborhood's labels into a signature, and find two equal
//! signatures. Crossing those two edges then produces a configuration in
//! which no vertex can tell the difference within t rounds, so a verifier
//! that accepted the original accepts every component of the crossed graph
//! including a cycle. When q * label_bits < log2(r) the pigeonhole
//! principle forces such a collision.
//!
//! Also here: the demonstration that an anonymous algorithm that runs
//! longer than any constant on cycles can be fooled by copying a
//! neighborhood, so truthful round information is genuinely required.

use std::collections::HashMap;

use thiserror::Error;

use crate::bits::Bits;
use crate::engine::{
    self, RoundOracle, RunMetrics, Verdict, VertexProgram,
};
use crate::graph::{cross_edges, k_neighborhood, DirectedEdge, GraphConfig, GraphError};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("n={n} too small for t={t}: need n >= 2*(2t+2)")]
    ScenarioTooSmall { n: usize, t: u64 },
    #[error("labels cover {got} vertices, graph has {want}")]
    LabelMismatch { got: usize, want: usize },
    #[error("neighborhoods of edges {i} and {j} are not disjoint")]
    NotDisjoint { i: usize, j: usize },
    #[error("neighborhood of edge {i} is not isomorphic to the reference")]
    NotIsomorphic { i: usize },
    #[error("neighborhood of edge {i} does not preserve states")]
    StatesNotPreserved { i: usize },
    #[error("program requires a round oracle; the demonstration covers oracle-free algorithms")]
    OracleRequired,
    #[error("no configuration with run time >= {k} found for n up to {limit}")]
    NoSlowInput { k: u64, limit: usize },
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("engine: {0}")]
    Engine(#[from] engine::EngineError),
}

/// A scenario for the collision attack: a legal configuration, r directed
/// edges with pairwise disjoint, isomorphic t-neighborhoods, and the
/// isomorphisms given as aligned vertex orderings (position p of every
/// neighborhood corresponds to position p of the reference).
#[derive(Debug, Clone)]
pub struct AttackScenario {
    pub graph: GraphConfig,
    pub t: u64,
    pub edges: Vec<DirectedEdge>,
    /// neighborhoods[i][p] is the vertex of `graph` at canonical position p
    /// of the i-th neighborhood.
    pub neighborhoods: Vec<Vec<usize>>,
}

/// The label concatenation over one edge neighborhood, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeighborhoodSignature {
    pub edge_index: usize,
    pub concatenated_labels: Bits,
}

#[derive(Debug)]
pub struct AttackResult {
    pub found: bool,
    /// Indices into the scenario's edge list with equal signatures.
    pub collision: Option<(usize, usize)>,
    pub crossed: Option<GraphConfig>,
    /// Verdict and metrics per connected component of the crossed graph,
    /// with the component's vertex lists (in original vertex numbers).
    pub components: Vec<(Vec<usize>, Verdict, RunMetrics)>,
    /// Whether every component was accepted by the verifier.
    pub all_components_accepted: bool,
}

/// The n-vertex path with empty states and the r = floor(n/(2t+2)) - 1
/// directed edges (v_{q i}, v_{q i + 1}), i = 1..r, q = 2t+2. Every edge's
/// t-neighborhood holds exactly q vertices, consecutive along the path, so
/// the isomorphisms are translations.
pub fn theorem3_scenario(n: usize, t: u64) -> Result<AttackScenario, AttackError> {
    let q = 2 * t as usize + 2;
    if n < 2 * q {
        return Err(AttackError::ScenarioTooSmall { n, t });
    }
    let r = n / q - 1;
    let graph = crate::graph::generate(crate::graph::GraphKind::Path, n, 0)?;
    let mut edges = Vec::with_capacity(r);
    let mut neighborhoods = Vec::with_capacity(r);
    for i in 1..=r {
        let tail = q * i;
        edges.push(DirectedEdge::new(tail, tail + 1));
        // N_t of (v_tail, v_tail+1) on the path: tail - t ..= tail + 1 + t.
        let lo = tail - t as usize;
        let hi = tail + 1 + t as usize;
        neighborhoods.push((lo..=hi).collect());
    }
    Ok(AttackScenario {
        graph,
        t,
        edges,
        neighborhoods,
    })
}

fn validate_scenario(s: &AttackScenario) -> Result<(), AttackError> {
    let q = s.neighborhoods.first().map_or(0, Vec::len);
    let mut owner = vec![usize::MAX; s.graph.n()];
    for (i, nb) in s.neighborhoods.iter().enumerate() {
        // Must agree with the graph's own t-neighborhood computation.
        let (_, expected) = k_neighborhood(&s.graph, s.edges[i], s.t as usize)?;
        let mut sorted = nb.clone();
        sorted.sort_unstable();
        if sorted != expected {
            return Err(AttackError::NotIsomorphic { i });
        }
        for &v in nb {
            if owner[v] != usize::MAX {
                return Err(AttackError::NotDisjoint { i, j: owner[v] });
            }
            owner[v] = i;
        }
        if nb.len() != q {
            return Err(AttackError::NotIsomorphic { i });
        }
        // Structure must match the reference position-wise: adjacency among
        // neighborhood members, the edge endpoints, and states.
        let reference = &s.neighborhoods[0];
        let pos_ref: HashMap<usize, usize> =
            reference.iter().enumerate().map(|(p, &v)| (v, p)).collect();
        let pos_i: HashMap<usize, usize> =
            nb.iter().enumerate().map(|(p, &v)| (v, p)).collect();
        for p in 0..q {
            let vr = reference[p];
            let vi = nb[p];
            if s.graph.state(vr) != s.graph.state(vi) {
                return Err(AttackError::StatesNotPreserved { i });
            }
            let adj_r: Vec<usize> = s.graph.neighbors(vr).iter()
                .filter_map(|w| pos_ref.get(w).copied())
                .collect();
            let adj_i: Vec<usize> = s.graph.neighbors(vi).iter()
                .filter_map(|w| pos_i.get(w).copied())
                .collect();
            let (mut a, mut b) = (adj_r, adj_i);
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err(AttackError::NotIsomorphic { i });
            }
        }
        let maps_endpoint = |e: DirectedEdge, r: DirectedEdge| {
            pos_ref.get(&r.tail) == pos_i.get(&e.tail)
                && pos_ref.get(&r.head) == pos_i.get(&e.head)
        };
        if !maps_endpoint(s.edges[i], s.edges[0]) {
            return Err(AttackError::NotIsomorphic { i });
        }
    }
    Ok(())
}

/// Concatenates each neighborhood's labels in canonical order.
pub fn signatures(s: &AttackScenario, labels: &[Bits]) -> Vec<NeighborhoodSignature> {
    s.neighborhoods
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mut bits = Bits::new();
            for &v in nb {
                // Length-prefix framing keeps distinct label tuples from
                // aliasing when label lengths vary.
                crate::bits::gamma_encode(labels[v].len() as u64, &mut bits);
                bits.extend(&labels[v]);
            }
            NeighborhoodSignature {
                edge_index: i,
                concatenated_labels: bits,
            }
        })
        .collect()
}

/// Runs the collision attack. `verify` re-runs the scheme's verifier on a
/// component of the crossed configuration with the labels carried over.
pub fn pigeonhole_attack<F>(
    s: &AttackScenario,
    labels: &[Bits],
    mut verify: F,
) -> Result<AttackResult, AttackError>
where
    F: FnMut(&GraphConfig, &[Bits]) -> Result<(Verdict, RunMetrics), engine::EngineError>,
{
    if labels.len() != s.graph.n() {
        return Err(AttackError::LabelMismatch {
            got: labels.len(),
            want: s.graph.n(),
        });
    }
    validate_scenario(s)?;
    let sigs = signatures(s, labels);
    let mut seen: HashMap<&Bits, usize> = HashMap::new();
    let mut collision = None;
    for sig in &sigs {
        if let Some(&i) = seen.get(&sig.concatenated_labels) {
            collision = Some((i, sig.edge_index));
            break;
        }
        seen.insert(&sig.concatenated_labels, sig.edge_index);
    }
    let Some((i, j)) = collision else {
        return Ok(AttackResult {
            found: false,
            collision: None,
            crossed: None,
            components: Vec::new(),
            all_components_accepted: false,
        });
    };
    let (components, crossed) = cross_and_verify(s, labels, i, j, &mut verify)?;
    let all = components.iter().all(|(_, v, _)| v.accepted);
    Ok(AttackResult {
        found: true,
        collision: Some((i, j)),
        crossed: Some(crossed),
        components,
        all_components_accepted: all,
    })
}

/// Crosses edges i and j of the scenario and verifies every connected
/// component with the original labels carried over.
pub fn cross_and_verify<F>(
    s: &AttackScenario,
    labels: &[Bits],
    i: usize,
    j: usize,
    verify: &mut F,
) -> Result<(Vec<(Vec<usize>, Verdict, RunMetrics)>, GraphConfig), AttackError>
where
    F: FnMut(&GraphConfig, &[Bits]) -> Result<(Verdict, RunMetrics), engine::EngineError>,
{
    let crossed = cross_edges(&s.graph, s.edges[i], s.edges[j])?;
    let mut components = Vec::new();
    for comp in crossed.connected_components() {
        let (sub, mapping) = crossed.induced(&comp);
        let sub_labels: Vec<Bits> = mapping.iter().map(|&v| labels[v].clone()).collect();
        let (verdict, metrics) = verify(&sub, &sub_labels)?;
        components.push((comp, verdict, metrics));
    }
    Ok((components, crossed))
}

/// Structural check that crossing preserved every vertex's t-neighborhood
/// (graph, states, and labels). Implemented for configurations of maximum
/// degree 2, which covers the path scenarios; each neighborhood is
/// canonicalized as the label/state sequence along the walk.
pub fn neighborhoods_preserved(
    original: &GraphConfig,
    crossed: &GraphConfig,
    labels: &[Bits],
    t: usize,
) -> bool {
    assert!(
        (0..original.n()).all(|v| original.degree(v) <= 2),
        "neighborhood preservation check covers max degree 2"
    );
    let canon = |g: &GraphConfig, v: usize| -> Vec<Vec<(usize, Bits, Bits)>> {
        // Walks of length <= t in each direction; each entry is
        // (distance, state, label).
        let mut arms: Vec<Vec<(usize, Bits, Bits)>> = g
            .neighbors(v)
            .iter()
            .map(|&first| {
                let mut arm = Vec::new();
                let mut prev = v;
                let mut cur = first;
                for d in 1..=t {
                    arm.push((d, g.state(cur).clone(), labels[cur].clone()));
                    let next = g
                        .neighbors(cur)
                        .iter()
                        .copied()
                        .find(|&w| w != prev);
                    match next {
                        Some(w) => {
                            prev = cur;
                            cur = w;
                        }
                        None => break,
                    }
                }
                arm
            })
            .collect();
        arms.sort();
        arms
    };
    (0..original.n()).all(|v| {
        original.state(v) == crossed.state(v) && canon(original, v) == canon(crossed, v)
    })
}

/// Report from the neighborhood-copy demonstration: an anonymous,
/// oracle-free program that has not halted somewhere after k-1 rounds can
/// be replayed on the 2k-cycle so that the corresponding vertex makes the
/// same decisions through round k-1.
#[derive(Debug)]
pub struct DemoReport {
    pub k: u64,
    /// Smallest cycle size whose run time reached k, if any.
    pub n_k: Option<usize>,
    /// Per-round decision status of the slow vertex and its copy.
    pub original_trace: Vec<Option<bool>>,
    pub copied_trace: Vec<Option<bool>>,
    pub traces_match: bool,
}

/// Searches cycles C_n, n in 3..=search_limit, for the smallest n on which
/// `program` (anonymous, no oracle) leaves some vertex undecided after k-1
/// rounds under states drawn by `states_for`; then copies that vertex's
/// (k-1)-neighborhood onto C_{2k} and compares decision traces.
pub fn indistinguishability_demo<P, S>(
    program: &P,
    k: u64,
    search_limit: usize,
    mut states_for: S,
) -> Result<DemoReport, AttackError>
where
    P: VertexProgram,
    S: FnMut(usize) -> Vec<Bits>,
{
    if program.needs_oracle() {
        return Err(AttackError::OracleRequired);
    }
    assert!(k >= 2, "k must be at least 2");
    let mut slow: Option<(usize, Vec<Bits>, usize, Vec<Option<bool>>)> = None;
    for n in 3..=search_limit {
        let mut g = crate::graph::generate(crate::graph::GraphKind::Cycle, n, 0)?;
        g.clear_ids();
        let states = states_for(n);
        assert_eq!(states.len(), n);
        g.set_states(states.clone());
        let labels = vec![Bits::new(); n];
        let (_, _, trace) =
            engine::run_traced(&g, &labels, program, RoundOracle::None, k)?;
        // Run time >= k: some vertex undecided at the end of round k-1.
        let at = trace.iter().find(|t| t.round == k - 1);
        let undecided = at.and_then(|t| {
            t.decisions.iter().position(Option::is_none)
        });
        if let Some(v) = undecided {
            let per_round = trace
                .iter()
                .filter(|t| t.round <= k - 1)
                .map(|t| t.decisions[v])
                .collect();
            slow = Some((n, states, v, per_round));
            break;
        }
    }
    let Some((n_k, states, v, original_trace)) = slow else {
        return Err(AttackError::NoSlowInput {
            k,
            limit: search_limit,
        });
    };

    // Copy v's (k-1)-neighborhood states onto C_{2k} around vertex w = k-1:
    // position w + i of the big cycle gets the state of v + i, i in
    // [-(k-1), k-1]. The one leftover vertex keeps an empty state.
    let big_n = 2 * k as usize;
    let mut big = crate::graph::generate(crate::graph::GraphKind::Cycle, big_n, 0)?;
    big.clear_ids();
    let w = k as usize - 1;
    let mut big_states = vec![Bits::new(); big_n];
    for i in -(k as i64 - 1)..=(k as i64 - 1) {
        let src = (v as i64 + i).rem_euclid(n_k as i64) as usize;
        let dst = (w as i64 + i).rem_euclid(big_n as i64) as usize;
        big_states[dst] = states[src].clone();
    }
    big.set_states(big_states);
    let labels = vec![Bits::new(); big_n];
    let (_, _, trace) = engine::run_traced(&big, &labels, program, RoundOracle::None, k)?;
    let copied_trace: Vec<Option<bool>> = trace
        .iter()
        .filter(|t| t.round <= k - 1)
        .map(|t| t.decisions[w])
        .collect();
    let traces_match = copied_trace == original_trace;
    Ok(DemoReport {
        k,
        n_k: Some(n_k),
        original_trace,
        copied_trace,
        traces_match,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Decision, InitCtx, OracleTick, Outbox, StateBits};

    #[test]
    fn scenario_arithmetic() {
        let s = theorem3_scenario(40, 3).unwrap();
        assert_eq!(s.edges.len(), 4);
        assert_eq!(s.neighborhoods[0].len(), 8);
        let tails: Vec<usize> = s.edges.iter().map(|e| e.tail).collect();
        assert_eq!(tails, vec![8, 16, 24, 32]);
        validate_scenario(&s).unwrap();

        let s = theorem3_scenario(4096, 4).unwrap();
        assert_eq!(s.edges.len(), 408);
        assert_eq!(s.neighborhoods[0].len(), 10);
        validate_scenario(&s).unwrap();

        assert!(theorem3_scenario(15, 3).is_err());
    }

    #[test]
    fn zero_bit_labels_always_collide() {
        // Two signatures of zero bits each: pigeonhole with one hole.
        let s = theorem3_scenario(32, 3).unwrap();
        assert!(s.edges.len() >= 2);
        let labels = vec![Bits::new(); 32];
        let sigs = signatures(&s, &labels);
        assert_eq!(sigs[0].concatenated_labels, sigs[1].concatenated_labels);
    }

    /// Halts immediately: constant run time on every cycle.
    struct HaltNow;
    struct Unit;
    impl StateBits for Unit {
        fn state_bits(&self) -> usize {
            0
        }
    }
    impl VertexProgram for HaltNow {
        type LocalState = Unit;
        fn init(&self, _: &InitCtx) -> Unit {
            Unit
        }
        fn step(
            &self,
            _: &mut Unit,
            _: &[Option<Bits>],
            _: OracleTick,
            _: &mut Outbox,
        ) -> Decision {
            Decision::Accept
        }
    }

    #[test]
    fn constant_time_program_has_no_slow_input() {
        let err = indistinguishability_demo(&HaltNow, 4, 64, |n| vec![Bits::new(); n]);
        assert!(matches!(err, Err(AttackError::NoSlowInput { .. })));
    }

    #[test]
    fn oracle_program_is_refused() {
        let program = crate::acyclic::AcyclicVerifier;
        let err = indistinguishability_demo(&program, 4, 16, |n| vec![Bits::new(); n]);
        assert!(matches!(err, Err(AttackError::OracleRequired)));
    }
}

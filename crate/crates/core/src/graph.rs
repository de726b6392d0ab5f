//! Graph configurations and the structural constructions used by the
//! schemes and the attacks: edge crossing, edge k-neighborhoods, and
//! cyclic-labeling analysis.
//!
//! A configuration is an undirected simple graph plus a per-vertex state
//! bit string and optional unique ids. Adjacency lists are ordered: a
//! vertex addresses its neighbors by port index, never by id, so every
//! scheme can run on anonymous networks.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bits::Bits;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid vertex count {n} for {kind}: {reason}")]
    InvalidSize {
        kind: String,
        n: usize,
        reason: String,
    },
    #[error("edge ({u},{v}) is invalid: {reason}")]
    BadEdge { u: usize, v: usize, reason: String },
    #[error("directed edge ({tail},{head}) does not exist")]
    MissingEdge { tail: usize, head: usize },
    #[error("crossing rejected: {0}")]
    CrossingRejected(String),
    #[error("ids are required but absent")]
    MissingIds,
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// An undirected graph with ordered ports, per-vertex states, optional ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphConfig {
    adjacency: Vec<Vec<usize>>,
    states: Vec<Bits>,
    ids: Option<Vec<u64>>,
}

/// A directed view of an existing undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectedEdge {
    pub tail: usize,
    pub head: usize,
}

impl DirectedEdge {
    pub fn new(tail: usize, head: usize) -> Self {
        DirectedEdge { tail, head }
    }
}

impl GraphConfig {
    /// Builds a configuration from an edge list. Ports are assigned in
    /// order of appearance, which keeps file round-trips bit-exact.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::BadEdge {
                    u,
                    v,
                    reason: format!("vertex out of range (n={n})"),
                });
            }
            if u == v {
                return Err(GraphError::BadEdge {
                    u,
                    v,
                    reason: "self-loop".into(),
                });
            }
            if adjacency[u].contains(&v) {
                return Err(GraphError::BadEdge {
                    u,
                    v,
                    reason: "parallel edge".into(),
                });
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        Ok(GraphConfig {
            adjacency,
            states: vec![Bits::new(); n],
            ids: None,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Port index of `u` in `v`'s adjacency list, if adjacent.
    pub fn port_of(&self, v: usize, u: usize) -> Option<usize> {
        self.adjacency[v].iter().position(|&w| w == u)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    /// Edges as (u, v) with u < v, in port order of the lower endpoint.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n() {
            for &v in &self.adjacency[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].contains(&v)
    }

    pub fn state(&self, v: usize) -> &Bits {
        &self.states[v]
    }

    pub fn states(&self) -> &[Bits] {
        &self.states
    }

    pub fn set_state(&mut self, v: usize, s: Bits) {
        self.states[v] = s;
    }

    pub fn set_states(&mut self, states: Vec<Bits>) {
        assert_eq!(states.len(), self.n());
        self.states = states;
    }

    pub fn ids(&self) -> Option<&[u64]> {
        self.ids.as_deref()
    }

    pub fn set_ids(&mut self, ids: Vec<u64>) {
        assert_eq!(ids.len(), self.n());
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), ids.len(), "ids must be distinct");
        self.ids = Some(ids);
    }

    pub fn clear_ids(&mut self) {
        self.ids = None;
    }

    pub fn is_connected(&self) -> bool {
        if self.n() == 0 {
            return true;
        }
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n()
    }

    /// DFS cycle check on the undirected graph.
    pub fn has_cycle(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            // (vertex, parent)
            let mut stack = vec![(start, usize::MAX)];
            seen[start] = true;
            while let Some((v, parent)) = stack.pop() {
                let mut parent_skipped = false;
                for &w in &self.adjacency[v] {
                    if w == parent && !parent_skipped {
                        parent_skipped = true;
                        continue;
                    }
                    if seen[w] {
                        return true;
                    }
                    seen[w] = true;
                    stack.push((w, v));
                }
            }
        }
        false
    }

    /// BFS distances from `source`; unreachable vertices get usize::MAX.
    pub fn bfs_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Longest shortest path; usize::MAX when disconnected.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        for v in 0..self.n() {
            let d = self.bfs_distances(v);
            for &x in &d {
                if x == usize::MAX {
                    return usize::MAX;
                }
                best = best.max(x);
            }
        }
        best
    }

    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n()];
        let mut comps = Vec::new();
        for start in 0..self.n() {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Induced subgraph on `vertices` (ascending order expected); returns the
    /// subgraph plus the map from new indices to old ones. Port order of kept
    /// neighbors is preserved. States and ids travel with their vertices.
    pub fn induced(&self, vertices: &[usize]) -> (GraphConfig, Vec<usize>) {
        let mut new_index = vec![usize::MAX; self.n()];
        for (i, &v) in vertices.iter().enumerate() {
            new_index[v] = i;
        }
        let adjacency = vertices
            .iter()
            .map(|&v| {
                self.adjacency[v]
                    .iter()
                    .filter(|&&w| new_index[w] != usize::MAX)
                    .map(|&w| new_index[w])
                    .collect()
            })
            .collect();
        let states = vertices.iter().map(|&v| self.states[v].clone()).collect();
        let ids = self
            .ids
            .as_ref()
            .map(|ids| vertices.iter().map(|&v| ids[v]).collect());
        (
            GraphConfig {
                adjacency,
                states,
                ids,
            },
            vertices.to_vec(),
        )
    }
}

/// Graph families the generators produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Path,
    Cycle,
    RandomTree,
    Unicyclic,
    StarOfPaths,
}

impl std::str::FromStr for GraphKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "path" => Ok(GraphKind::Path),
            "cycle" => Ok(GraphKind::Cycle),
            "random-tree" => Ok(GraphKind::RandomTree),
            "unicyclic" => Ok(GraphKind::Unicyclic),
            "star-of-paths" => Ok(GraphKind::StarOfPaths),
            other => Err(format!("unknown graph kind {other:?}")),
        }
    }
}

/// Deterministic generator: same (kind, n, seed) gives the same config.
/// States default to empty strings, ids to 0..n-1 in generation order.
pub fn generate(kind: GraphKind, n: usize, seed: u64) -> Result<GraphConfig, GraphError> {
    let too_small = |kind: &str, min: usize| GraphError::InvalidSize {
        kind: kind.into(),
        n,
        reason: format!("need n >= {min}"),
    };
    let mut g = match kind {
        GraphKind::Path => {
            if n < 1 {
                return Err(too_small("path", 1));
            }
            let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
            GraphConfig::from_edges(n, &edges)?
        }
        GraphKind::Cycle => {
            if n < 3 {
                return Err(too_small("cycle", 3));
            }
            let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            GraphConfig::from_edges(n, &edges)?
        }
        GraphKind::RandomTree => {
            if n < 1 {
                return Err(too_small("random-tree", 1));
            }
            random_tree(n, seed)?
        }
        GraphKind::Unicyclic => {
            if n < 3 {
                return Err(too_small("unicyclic", 3));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
            let tree = random_tree(n, seed)?;
            let mut edges = tree.edges();
            // One extra edge closes exactly one cycle.
            loop {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v && !tree.has_edge(u, v) {
                    edges.push((u.min(v), u.max(v)));
                    break;
                }
            }
            GraphConfig::from_edges(n, &edges)?
        }
        GraphKind::StarOfPaths => {
            if n < 1 {
                return Err(too_small("star-of-paths", 1));
            }
            let legs = (2 + (seed % 3) as usize).min(n.saturating_sub(1)).max(1);
            let mut edges = Vec::new();
            let mut next = 1;
            let mut leg_tip = vec![0usize; legs];
            let mut leg = 0;
            while next < n {
                edges.push((leg_tip[leg], next));
                leg_tip[leg] = next;
                next += 1;
                leg = (leg + 1) % legs;
            }
            GraphConfig::from_edges(n, &edges)?
        }
    };
    g.set_ids((0..n as u64).collect());
    Ok(g)
}

fn random_tree(n: usize, seed: u64) -> Result<GraphConfig, GraphError> {
    if n <= 2 {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        return GraphConfig::from_edges(n, &edges);
    }
    // Uniform labeled tree from a random Pruefer sequence.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pruefer: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &v in &pruefer {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut leaf_heap: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&v| degree[v] == 1)
        .map(std::cmp::Reverse)
        .collect();
    for &v in &pruefer {
        let std::cmp::Reverse(leaf) = leaf_heap.pop().unwrap();
        edges.push((leaf.min(v), leaf.max(v)));
        degree[leaf] -= 1;
        degree[v] -= 1;
        if degree[v] == 1 {
            leaf_heap.push(std::cmp::Reverse(v));
        }
    }
    let std::cmp::Reverse(a) = leaf_heap.pop().unwrap();
    let std::cmp::Reverse(b) = leaf_heap.pop().unwrap();
    edges.push((a.min(b), a.max(b)));
    GraphConfig::from_edges(n, &edges)
}

fn check_directed_edge(g: &GraphConfig, e: DirectedEdge) -> Result<(), GraphError> {
    if e.tail >= g.n() || e.head >= g.n() || !g.has_edge(e.tail, e.head) {
        return Err(GraphError::MissingEdge {
            tail: e.tail,
            head: e.head,
        });
    }
    Ok(())
}

/// Replaces edges e1, e2 by (T(e1),H(e2)) and (T(e2),H(e1)).
///
/// Crossings that would create a self-loop or a parallel edge are rejected;
/// callers only cross edges with disjoint neighborhoods, where this cannot
/// happen. Ports are rewritten in place so every degree is preserved.
/// The result may be disconnected.
pub fn cross_edges(
    g: &GraphConfig,
    e1: DirectedEdge,
    e2: DirectedEdge,
) -> Result<GraphConfig, GraphError> {
    check_directed_edge(g, e1)?;
    check_directed_edge(g, e2)?;
    if e1 == e2 {
        return Err(GraphError::CrossingRejected(
            "the two directed edges must be distinct".into(),
        ));
    }
    let same_undirected =
        (e1.tail == e2.tail && e1.head == e2.head) || (e1.tail == e2.head && e1.head == e2.tail);
    if same_undirected {
        return Err(GraphError::CrossingRejected(
            "both directed edges lie on the same undirected edge".into(),
        ));
    }
    // New edges: (T1, H2) and (T2, H1).
    for (a, b) in [(e1.tail, e2.head), (e2.tail, e1.head)] {
        if a == b {
            return Err(GraphError::CrossingRejected(format!(
                "crossing would create a self-loop at {a}"
            )));
        }
    }
    let mut out = g.clone();
    let rewire = |out: &mut GraphConfig, from: usize, old: usize, new: usize| {
        let port = out.adjacency[from]
            .iter()
            .position(|&w| w == old)
            .expect("edge checked above");
        out.adjacency[from][port] = new;
    };
    // T1: H1 -> H2, T2: H2 -> H1, H1: T1 -> T2, H2: T2 -> T1.
    rewire(&mut out, e1.tail, e1.head, e2.head);
    rewire(&mut out, e2.tail, e2.head, e1.head);
    rewire(&mut out, e1.head, e1.tail, e2.tail);
    rewire(&mut out, e2.head, e2.tail, e1.tail);
    // Reject multigraph outcomes.
    for v in [e1.tail, e1.head, e2.tail, e2.head] {
        let mut seen = out.adjacency[v].clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != out.adjacency[v].len() {
            return Err(GraphError::CrossingRejected(format!(
                "crossing would create a parallel edge at {v}"
            )));
        }
    }
    Ok(out)
}

/// The k-neighborhood of a directed edge: all vertices within distance k of
/// either endpoint, with induced edges. Returns the subgraph and the map
/// from its vertex indices back to `g`.
pub fn k_neighborhood(
    g: &GraphConfig,
    e: DirectedEdge,
    k: usize,
) -> Result<(GraphConfig, Vec<usize>), GraphError> {
    check_directed_edge(g, e)?;
    let du = g.bfs_distances(e.tail);
    let dv = g.bfs_distances(e.head);
    let vertices: Vec<usize> = (0..g.n())
        .filter(|&w| du[w].min(dv[w]) <= k)
        .collect();
    Ok(g.induced(&vertices))
}

/// A labeling of vertices by integers mod s, s >= 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicLabeling {
    pub modulus: u64,
    pub labels: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicAnalysis {
    pub valid: bool,
    /// Parent of each vertex under the induced orientation; None for roots.
    /// Meaningful only when valid.
    pub parents: Vec<Option<usize>>,
    /// The unique oriented cycle, if the labeling is valid and one exists.
    pub cycle: Option<Vec<usize>>,
}

/// Checks the parent condition: every vertex has at most one neighbor
/// one step behind it mod s, and all its other neighbors are one step
/// ahead. On a valid labeling of a connected graph at most one cycle can
/// exist, its length divisible by s; if present it is returned.
pub fn analyze_cyclic_labeling(g: &GraphConfig, labeling: &CyclicLabeling) -> CyclicAnalysis {
    let invalid = CyclicAnalysis {
        valid: false,
        parents: Vec::new(),
        cycle: None,
    };
    let s = labeling.modulus;
    if s < 3 || labeling.labels.len() != g.n() || labeling.labels.iter().any(|&l| l >= s) {
        return invalid;
    }
    let l = &labeling.labels;
    let mut parents = vec![None; g.n()];
    for v in 0..g.n() {
        for &w in g.neighbors(v) {
            if l[w] == (l[v] + s - 1) % s {
                if parents[v].is_some() {
                    return invalid; // two parents
                }
                parents[v] = Some(w);
            } else if l[w] != (l[v] + 1) % s {
                return invalid; // neither parent nor child
            }
        }
    }
    // Follow parent pointers to find the unique cycle, if any.
    let mut color = vec![0u8; g.n()]; // 0 unvisited, 1 in progress, 2 done
    let mut cycle = None;
    for start in 0..g.n() {
        if color[start] != 0 {
            continue;
        }
        let mut chain = Vec::new();
        let mut v = start;
        loop {
            if color[v] == 1 {
                // Found the entry point of a cycle along this chain.
                let pos = chain.iter().position(|&x| x == v).unwrap();
                cycle = Some(chain[pos..].to_vec());
                break;
            }
            if color[v] == 2 {
                break;
            }
            color[v] = 1;
            chain.push(v);
            match parents[v] {
                Some(p) => v = p,
                None => break,
            }
        }
        for &x in &chain {
            color[x] = 2;
        }
        if cycle.is_some() {
            break;
        }
    }
    CyclicAnalysis {
        valid: true,
        parents,
        cycle,
    }
}

/// Text format: line 1 "n m", then m lines "u v" (0-based), then optional
/// n lines "state:<hex>:<bitlen>", then optional n lines "id:<int>".
/// Port order equals order of appearance, so a read/write round trip is
/// bit-exact.
pub fn write_graph(g: &GraphConfig) -> String {
    let mut out = String::new();
    let edges = ordered_edges(g);
    writeln!(out, "{} {}", g.n(), edges.len()).unwrap();
    for (u, v) in edges {
        writeln!(out, "{u} {v}").unwrap();
    }
    if g.states().iter().any(|s| !s.is_empty()) {
        for v in 0..g.n() {
            let s = g.state(v);
            writeln!(out, "state:{}:{}", s.to_hex(), s.len()).unwrap();
        }
    }
    if let Some(ids) = g.ids() {
        for &id in ids {
            writeln!(out, "id:{id}").unwrap();
        }
    }
    out
}

/// Edges in an order that reconstructs the port lists: an edge is emitted
/// only once it is the next unseen port at both endpoints. Graphs built
/// from an edge list always admit such an order; if a rewired graph does
/// not, the smallest blocked edge is emitted as a deterministic fallback.
fn ordered_edges(g: &GraphConfig) -> Vec<(usize, usize)> {
    let mut next_port = vec![0usize; g.n()];
    let mut remaining: Vec<(usize, usize, usize, usize)> = Vec::new();
    for u in 0..g.n() {
        for (pu, &v) in g.neighbors(u).iter().enumerate() {
            if u < v {
                let pv = g.port_of(v, u).unwrap();
                remaining.push((u, v, pu, pv));
            }
        }
    }
    let mut out = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let ready = remaining
            .iter()
            .position(|&(u, v, pu, pv)| next_port[u] == pu && next_port[v] == pv)
            .unwrap_or(0);
        let (u, v, _, _) = remaining.remove(ready);
        next_port[u] += 1;
        next_port[v] += 1;
        out.push((u, v));
    }
    out
}

pub fn read_graph(text: &str) -> Result<GraphConfig, GraphError> {
    let mut lines = text.lines().enumerate();
    let (lineno, header) = lines
        .next()
        .ok_or(GraphError::Parse {
            line: 0,
            reason: "empty file".into(),
        })?;
    let parse_err = |line: usize, reason: String| GraphError::Parse { line, reason };
    let mut head_parts = header.split_whitespace();
    let n: usize = head_parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(lineno + 1, "expected \"n m\"".into()))?;
    let m: usize = head_parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(lineno + 1, "expected \"n m\"".into()))?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (lineno, line) = lines_next(&mut lines, m)?;
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(lineno + 1, "expected \"u v\"".into()))?;
        let v: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(lineno + 1, "expected \"u v\"".into()))?;
        edges.push((u, v));
    }
    let mut g = GraphConfig::from_edges(n, &edges)?;
    let rest: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
    let mut idx = 0;
    if rest.get(idx).is_some_and(|(_, l)| l.starts_with("state:")) {
        let mut states = Vec::with_capacity(n);
        for _ in 0..n {
            let &(lineno, line) = rest.get(idx).ok_or_else(|| {
                parse_err(0, format!("expected {n} state lines"))
            })?;
            let body = line.strip_prefix("state:").ok_or_else(|| {
                parse_err(lineno + 1, "expected state:<hex>:<bitlen>".into())
            })?;
            let (hex, len) = body.rsplit_once(':').ok_or_else(|| {
                parse_err(lineno + 1, "expected state:<hex>:<bitlen>".into())
            })?;
            let bit_len: usize = len
                .parse()
                .map_err(|_| parse_err(lineno + 1, "bad bit length".into()))?;
            states.push(
                Bits::from_hex(hex, bit_len)
                    .map_err(|e| parse_err(lineno + 1, e))?,
            );
            idx += 1;
        }
        g.set_states(states);
    }
    if rest.get(idx).is_some_and(|(_, l)| l.starts_with("id:")) {
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let &(lineno, line) = rest
                .get(idx)
                .ok_or_else(|| parse_err(0, format!("expected {n} id lines")))?;
            let id: u64 = line
                .strip_prefix("id:")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(lineno + 1, "expected id:<int>".into()))?;
            ids.push(id);
            idx += 1;
        }
        g.set_ids(ids);
    }
    Ok(g)
}

fn lines_err(m: usize) -> GraphError {
    GraphError::Parse {
        line: 0,
        reason: format!("expected {m} edge lines"),
    }
}

fn lines_next<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    m: usize,
) -> Result<(usize, &'a str), GraphError> {
    lines.next().ok_or_else(|| lines_err(m))
}

/// Shuffles the id assignment with a seeded permutation; the graph,
/// ports, and states are untouched.
pub fn permute_ids(g: &GraphConfig, seed: u64) -> Result<GraphConfig, GraphError> {
    let ids = g.ids().ok_or(GraphError::MissingIds)?;
    let mut perm: Vec<usize> = (0..ids.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let new_ids = perm.iter().map(|&i| ids[i]).collect();
    let mut out = g.clone();
    out.set_ids(new_ids);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_path_and_cycle() {
        let p = generate(GraphKind::Path, 4, 0).unwrap();
        assert_eq!(p.edges(), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(p.edge_count(), 3);
        let c = generate(GraphKind::Cycle, 3, 0).unwrap();
        assert_eq!(c.edge_count(), 3);
        assert!(c.has_cycle());
        assert!(generate(GraphKind::Cycle, 2, 0).is_err());
        assert!(generate(GraphKind::Path, 0, 0).is_err());
    }

    #[test]
    fn random_tree_is_tree() {
        let g = generate(GraphKind::RandomTree, 100, 7).unwrap();
        assert_eq!(g.edge_count(), 99);
        assert!(g.is_connected());
        assert!(!g.has_cycle());
        // Determinism.
        let g2 = generate(GraphKind::RandomTree, 100, 7).unwrap();
        assert_eq!(g, g2);
        let g3 = generate(GraphKind::RandomTree, 100, 8).unwrap();
        assert_ne!(g, g3);
    }

    #[test]
    fn unicyclic_has_one_cycle() {
        for seed in 0..10 {
            let g = generate(GraphKind::Unicyclic, 20, seed).unwrap();
            assert_eq!(g.edge_count(), 20);
            assert!(g.is_connected());
            assert!(g.has_cycle());
        }
    }

    #[test]
    fn star_of_paths_connected() {
        for seed in 0..3 {
            for n in 1..12 {
                let g = generate(GraphKind::StarOfPaths, n, seed).unwrap();
                assert!(g.is_connected());
                assert_eq!(g.edge_count(), n - 1);
            }
        }
    }

    #[test]
    fn cross_path_gives_cycle_plus_path() {
        let g = generate(GraphKind::Path, 10, 0).unwrap();
        let crossed = cross_edges(
            &g,
            DirectedEdge::new(2, 3),
            DirectedEdge::new(6, 7),
        )
        .unwrap();
        assert_eq!(crossed.edge_count(), g.edge_count());
        let comps = crossed.connected_components();
        assert_eq!(comps.len(), 2);
        // 4-cycle 3-4-5-6 and path 0-1-2-7-8-9.
        let cycle: Vec<usize> = vec![3, 4, 5, 6];
        let path: Vec<usize> = vec![0, 1, 2, 7, 8, 9];
        assert!(comps.contains(&cycle));
        assert!(comps.contains(&path));
        let (cyc, _) = crossed.induced(&cycle);
        assert!(cyc.has_cycle());
        let (pth, _) = crossed.induced(&path);
        assert!(!pth.has_cycle());
    }

    #[test]
    fn cross_rejects_same_edge_and_degenerate() {
        let g = generate(GraphKind::Path, 10, 0).unwrap();
        let e = DirectedEdge::new(2, 3);
        assert!(cross_edges(&g, e, e).is_err());
        // T(e2) = H(e1) would turn into a self-loop.
        assert!(cross_edges(&g, DirectedEdge::new(2, 3), DirectedEdge::new(3, 4)).is_err());
        // Crossing the two directions of one undirected edge is rejected.
        assert!(cross_edges(&g, DirectedEdge::new(2, 3), DirectedEdge::new(3, 2)).is_err());
    }

    #[test]
    fn neighborhood_on_path() {
        let g = generate(GraphKind::Path, 10, 0).unwrap();
        let (sub, map) = k_neighborhood(&g, DirectedEdge::new(4, 5), 1).unwrap();
        assert_eq!(map, vec![3, 4, 5, 6]);
        assert_eq!(sub.edge_count(), 3);
        let (sub0, map0) = k_neighborhood(&g, DirectedEdge::new(4, 5), 0).unwrap();
        assert_eq!(map0, vec![4, 5]);
        assert_eq!(sub0.edge_count(), 1);
    }

    #[test]
    fn cyclic_labeling_cases() {
        // C6 labeled 0,1,2,0,1,2 mod 3: valid with one cycle of length 6.
        let c6 = generate(GraphKind::Cycle, 6, 0).unwrap();
        let lab = CyclicLabeling {
            modulus: 3,
            labels: vec![0, 1, 2, 0, 1, 2],
        };
        let analysis = analyze_cyclic_labeling(&c6, &lab);
        assert!(analysis.valid);
        let cyc = analysis.cycle.unwrap();
        assert_eq!(cyc.len(), 6);
        assert_eq!(cyc.len() % 3, 0);

        // Path labeled 0,1,2,0: valid, acyclic.
        let p4 = generate(GraphKind::Path, 4, 0).unwrap();
        let lab = CyclicLabeling {
            modulus: 3,
            labels: vec![0, 1, 2, 0],
        };
        let analysis = analyze_cyclic_labeling(&p4, &lab);
        assert!(analysis.valid);
        assert!(analysis.cycle.is_none());

        // Star center 0 with two leaves both labeled 2: the center would
        // need two parents.
        let star = GraphConfig::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let lab = CyclicLabeling {
            modulus: 3,
            labels: vec![0, 2, 2],
        };
        assert!(!analyze_cyclic_labeling(&star, &lab).valid);
    }

    #[test]
    fn graph_file_round_trip() {
        let mut g = generate(GraphKind::Unicyclic, 12, 5).unwrap();
        g.set_state(3, Bits::from_u64(0b101, 3));
        g.set_state(7, Bits::from_u64(1, 1));
        let text = write_graph(&g);
        let back = read_graph(&text).unwrap();
        assert_eq!(g, back);
        assert_eq!(write_graph(&back), text);
    }

    #[test]
    fn permute_ids_preserves_structure() {
        let g = generate(GraphKind::Path, 4, 0).unwrap();
        let p = permute_ids(&g, 1).unwrap();
        assert_eq!(p.edges(), g.edges());
        let mut ids = p.ids().unwrap().to_vec();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }
}

//! The universal t-round scheme: verify any decidable predicate by giving
//! every vertex one share of the full configuration representation.
//!
//! The canonical representation lists all vertex states in id order and
//! then the graph, either as an upper-triangular adjacency matrix or as a
//! BFS spanning tree (one parent pointer per non-root vertex) followed by
//! the non-tree edges. On trees the latter costs exactly m*ceil(log2 n)
//! bits. The representation is cut into t/4 shares. For the first half of
//! the run, shares are pipelined in both directions along the distance
//! classes of a distinguished vertex; every vertex reconstructs the whole
//! representation from the away-flowing stream between two consecutive
//! share-0 markers. In the second half each vertex streams its
//! reconstruction to its neighbors in t/2 slices and verifies bitwise
//! equality, checks the representation against its own local view, and
//! finally evaluates the predicate on it.

use thiserror::Error;

use crate::bits::{ceil_log2, gamma_decode, gamma_encode, Bits};
use crate::engine::{
    self, Decision, InitCtx, OracleTick, Outbox, RoundOracle, RunMetrics, StateBits, Verdict,
    VertexProgram,
};
use crate::graph::GraphConfig;

#[derive(Debug, Error)]
pub enum UniversalError {
    #[error("t must be a multiple of 4 and at least 8 (got {0})")]
    BadT(u64),
    #[error("t/4 = {quarter} exceeds the eccentricity {ecc} of the distinguished vertex")]
    TooFewDistanceClasses { quarter: u64, ecc: usize },
    #[error("configuration needs distinct ids in 0..n")]
    BadIds,
    #[error("configuration must be connected")]
    Disconnected,
    #[error("vertex states must share one width (family parameter s)")]
    RaggedStates,
    #[error("labels cover {got} vertices, graph has {want}")]
    LabelMismatch { got: usize, want: usize },
    #[error("unknown predicate {0:?}")]
    UnknownPredicate(String),
    #[error("engine: {0}")]
    Engine(#[from] engine::EngineError),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

// ---------------------------------------------------------------------------
// Canonical representation
// ---------------------------------------------------------------------------

/// Nominal representation size n*s + min(n^2, m*ceil(log2 n)); the bounds
/// in the acceptance suite are stated against this quantity.
pub fn nominal_representation_bits(n: usize, m: usize, s: usize) -> usize {
    n * s + (n * n).min(m * ceil_log2(n as u64))
}

/// The canonical bit-string form of a configuration, in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Representation {
    pub bits: Bits,
}

fn id_permutation(g: &GraphConfig) -> Result<Vec<usize>, UniversalError> {
    let ids = g.ids().ok_or(UniversalError::BadIds)?;
    let n = g.n();
    let mut vertex_of_id = vec![usize::MAX; n];
    for (v, &id) in ids.iter().enumerate() {
        if id >= n as u64 || vertex_of_id[id as usize] != usize::MAX {
            return Err(UniversalError::BadIds);
        }
        vertex_of_id[id as usize] = v;
    }
    Ok(vertex_of_id)
}

fn uniform_state_width(g: &GraphConfig) -> Result<usize, UniversalError> {
    let s = g.state(0).len();
    if g.states().iter().any(|st| st.len() != s) {
        return Err(UniversalError::RaggedStates);
    }
    Ok(s)
}

/// Whether the adjacency-matrix branch is used for n-vertex graphs. The
/// rule depends only on n so the decoder needs no extra information.
fn matrix_branch(n: usize) -> bool {
    n * (n - 1) / 2 < n.saturating_sub(1) * ceil_log2(n as u64)
}

/// Encodes states in id order, then the graph: either the upper triangle
/// of the adjacency matrix or a BFS spanning tree (parent id per non-root
/// id) followed by the remaining edges as id pairs.
pub fn encode_representation(g: &GraphConfig) -> Result<Representation, UniversalError> {
    let n = g.n();
    let vertex_of_id = id_permutation(g)?;
    uniform_state_width(g)?;
    if !g.is_connected() {
        return Err(UniversalError::Disconnected);
    }
    let ids = g.ids().unwrap();
    let mut bits = Bits::new();
    for &v in &vertex_of_id {
        bits.extend(g.state(v));
    }
    let c = ceil_log2(n as u64);
    // Adjacency in id space, neighbor lists sorted for canonicality.
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|id| {
            let mut nb: Vec<usize> = g
                .neighbors(vertex_of_id[id])
                .iter()
                .map(|&w| ids[w] as usize)
                .collect();
            nb.sort_unstable();
            nb
        })
        .collect();
    if matrix_branch(n) {
        for i in 0..n {
            for j in i + 1..n {
                bits.push(adj[i].binary_search(&j).is_ok());
            }
        }
        return Ok(Representation { bits });
    }
    // BFS tree from id 0, exploring in id order.
    let mut parent = vec![usize::MAX; n];
    let mut order = std::collections::VecDeque::from([0usize]);
    let mut seen = vec![false; n];
    seen[0] = true;
    while let Some(i) = order.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                parent[j] = i;
                order.push_back(j);
            }
        }
    }
    for &p in parent.iter().skip(1) {
        debug_assert_ne!(p, usize::MAX);
        bits.push_u64(p as u64, c);
    }
    let mut extras: Vec<(usize, usize)> = Vec::new();
    for (i, nb) in adj.iter().enumerate() {
        for &j in nb {
            if i < j && parent[j] != i && parent[i] != j {
                extras.push((i, j));
            }
        }
    }
    extras.sort_unstable();
    for (i, j) in extras {
        bits.push_u64(i as u64, c);
        bits.push_u64(j as u64, c);
    }
    Ok(Representation { bits })
}

/// Decodes a purported representation for the (n, s) family. Trailing
/// padding is tolerated: extra-edge records stop at an all-zero record or
/// when less than a full record remains. Returns None when the string
/// cannot describe a configuration.
pub fn decode_representation(bits: &Bits, n: usize, s: usize) -> Option<GraphConfig> {
    if n == 0 || bits.len() < n * s {
        return None;
    }
    let states: Vec<Bits> = (0..n).map(|i| bits.slice(i * s, (i + 1) * s)).collect();
    let c = ceil_log2(n as u64);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut at = n * s;
    if matrix_branch(n) {
        if bits.len() < at + n * (n - 1) / 2 {
            return None;
        }
        for i in 0..n {
            for j in i + 1..n {
                if bits.get(at) {
                    edges.push((i, j));
                }
                at += 1;
            }
        }
    } else {
        if bits.len() < at + (n - 1) * c {
            return None;
        }
        for j in 1..n {
            let p = bits.read_u64(at, c) as usize;
            at += c;
            if p >= n || p == j {
                return None;
            }
            edges.push((p.min(j), p.max(j)));
        }
        while c > 0 && bits.len() >= at + 2 * c {
            let i = bits.read_u64(at, c) as usize;
            let j = bits.read_u64(at + c, c) as usize;
            if i == 0 && j == 0 {
                break; // padding
            }
            at += 2 * c;
            if i >= j || j >= n {
                return None;
            }
            edges.push((i, j));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let mut g = GraphConfig::from_edges(n, &edges).ok()?;
    g.set_states(states);
    g.set_ids((0..n as u64).collect());
    Some(g)
}

/// Compares two configurations as labeled-by-id structures: same vertex
/// count, same edge set over ids, same state per id.
pub fn same_configuration(a: &GraphConfig, b: &GraphConfig) -> bool {
    if a.n() != b.n() {
        return false;
    }
    let (Some(ids_a), Some(ids_b)) = (a.ids(), b.ids()) else {
        return false;
    };
    let edge_set = |g: &GraphConfig, ids: &[u64]| {
        let mut es: Vec<(u64, u64)> = g
            .edges()
            .into_iter()
            .map(|(u, v)| {
                let (x, y) = (ids[u], ids[v]);
                (x.min(y), x.max(y))
            })
            .collect();
        es.sort_unstable();
        es
    };
    if edge_set(a, ids_a) != edge_set(b, ids_b) {
        return false;
    }
    let states_by_id = |g: &GraphConfig, ids: &[u64]| {
        let mut st: Vec<(u64, Bits)> = ids
            .iter()
            .zip(g.states())
            .map(|(&i, s)| (i, s.clone()))
            .collect();
        st.sort_by_key(|&(i, _)| i);
        st.into_iter().map(|(_, s)| s).collect::<Vec<_>>()
    };
    states_by_id(a, ids_a) == states_by_id(b, ids_b)
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

/// A boolean property of configurations, evaluated on the reconstructed
/// representation. The local-view check is predicate independent.
pub trait Predicate {
    fn name(&self) -> &'static str;
    fn evaluate(&self, g: &GraphConfig) -> bool;

    /// True when the representation agrees with what a vertex can see
    /// directly: its own id and state, and its neighbors' ids and states.
    fn local_view_consistent(
        &self,
        g: &GraphConfig,
        my_id: u64,
        my_state: &Bits,
        neighbors: &[(u64, Bits)],
    ) -> bool {
        let n = g.n();
        if my_id >= n as u64 {
            return false;
        }
        let me = my_id as usize;
        if g.state(me) != my_state {
            return false;
        }
        let mut expect: Vec<u64> = g.neighbors(me).iter().map(|&w| w as u64).collect();
        expect.sort_unstable();
        let mut got: Vec<u64> = neighbors.iter().map(|&(id, _)| id).collect();
        got.sort_unstable();
        if expect != got {
            return false;
        }
        neighbors
            .iter()
            .all(|(id, st)| (*id as usize) < n && g.state(*id as usize) == st)
    }
}

/// The underlying graph is cycle free.
pub struct AcyclicPredicate;
impl Predicate for AcyclicPredicate {
    fn name(&self) -> &'static str {
        "acyclic"
    }
    fn evaluate(&self, g: &GraphConfig) -> bool {
        !g.has_cycle()
    }
}

/// States are single bits forming a proper 2-coloring.
pub struct TwoColoringPredicate;
impl Predicate for TwoColoringPredicate {
    fn name(&self) -> &'static str {
        "two-coloring"
    }
    fn evaluate(&self, g: &GraphConfig) -> bool {
        g.states().iter().all(|s| s.len() == 1)
            && g.edges()
                .iter()
                .all(|&(u, v)| g.state(u).get(0) != g.state(v).get(0))
    }
}

/// The vertex count is even.
pub struct EvenNPredicate;
impl Predicate for EvenNPredicate {
    fn name(&self) -> &'static str {
        "even-n"
    }
    fn evaluate(&self, g: &GraphConfig) -> bool {
        g.n() % 2 == 0
    }
}

pub fn predicate_by_name(name: &str) -> Result<Box<dyn Predicate>, UniversalError> {
    match name {
        "acyclic" => Ok(Box::new(AcyclicPredicate)),
        "two-coloring" => Ok(Box::new(TwoColoringPredicate)),
        "even-n" => Ok(Box::new(EvenNPredicate)),
        other => Err(UniversalError::UnknownPredicate(other.into())),
    }
}

// ---------------------------------------------------------------------------
// Prover
// ---------------------------------------------------------------------------

/// Per-vertex label: the hub indication, the first-in-block marker, the
/// orientation mod 3, and one share of the representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniversalLabel {
    pub v_indication: bool,
    pub first_in_block: bool,
    pub orientation: u8,
    pub share: Bits,
}

impl UniversalLabel {
    pub fn encode(&self) -> Bits {
        let mut b = Bits::new();
        b.push(self.v_indication);
        b.push(self.first_in_block);
        b.push_u64(self.orientation as u64, 2);
        b.extend(&self.share);
        b
    }

    pub fn decode(bits: &Bits) -> Option<Self> {
        if bits.len() < 4 {
            return None;
        }
        let orientation = bits.read_u64(2, 2) as u8;
        if orientation > 2 {
            return None;
        }
        Some(UniversalLabel {
            v_indication: bits.get(0),
            first_in_block: bits.get(1),
            orientation,
            share: bits.slice(4, bits.len()),
        })
    }
}

/// Width of one representation share: the representation cut in t/4 parts.
pub fn universal_share_width(representation_bits: usize, t: u64) -> usize {
    representation_bits.div_ceil((t / 4) as usize).max(1)
}

/// Labels `g` for t-round verification. The distinguished vertex defaults
/// to the one with id 0. Requires t a multiple of 4, at least 8, and t/4
/// within the distinguished vertex's eccentricity so that every share
/// index actually occurs on some vertex.
pub fn prove_universal(
    g: &GraphConfig,
    t: u64,
    v_star: Option<usize>,
) -> Result<Vec<UniversalLabel>, UniversalError> {
    if t < 8 || t % 4 != 0 {
        return Err(UniversalError::BadT(t));
    }
    let vertex_of_id = id_permutation(g)?;
    let rep = encode_representation(g)?;
    let v_star = v_star.unwrap_or(vertex_of_id[0]);
    let dist = g.bfs_distances(v_star);
    let ecc = dist.iter().copied().max().unwrap_or(0);
    let quarter = t / 4;
    if quarter as usize > ecc {
        return Err(UniversalError::TooFewDistanceClasses { quarter, ecc });
    }
    let w = universal_share_width(rep.bits.len(), t);
    let share = |j: usize| -> Bits {
        let lo = j * w;
        (lo..lo + w)
            .map(|i| i < rep.bits.len() && rep.bits.get(i))
            .collect()
    };
    Ok((0..g.n())
        .map(|u| {
            let d = dist[u] as u64;
            let j = (d % quarter) as usize;
            UniversalLabel {
                v_indication: u == v_star,
                first_in_block: j == 0,
                orientation: (d % 3) as u8,
                share: share(j),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Verifier
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PortClass {
    /// Orientation one behind ours: closer to the hub.
    Inward,
    /// Orientation one ahead: farther from the hub.
    Outward,
    /// Same orientation: excluded from pipelining.
    Same,
}

/// One pipelined share with its marker flags. Markers are length-framed:
/// a plain unit is the bare share, a marked unit carries two extra bits.
#[derive(Debug, Clone, PartialEq, Eq)]
struct AwayUnit {
    share: Bits,
    first_in_block: bool,
    v_indication: bool,
}

impl AwayUnit {
    fn encode(&self) -> Bits {
        let mut b = self.share.clone();
        if self.first_in_block {
            b.push(true);
            b.push(self.v_indication);
        }
        b
    }

    fn decode(bits: &Bits, w: usize) -> Option<Self> {
        if bits.len() == w {
            Some(AwayUnit {
                share: bits.clone(),
                first_in_block: false,
                v_indication: false,
            })
        } else if bits.len() == w + 2 && bits.get(w) {
            Some(AwayUnit {
                share: bits.slice(0, w),
                first_in_block: true,
                v_indication: bits.get(w + 1),
            })
        } else {
            None
        }
    }
}

/// The verifier program. The family parameters (n, s) and the round count
/// t are fixed per run; everything else travels in labels and messages.
pub struct UniversalVerifier<'a> {
    pub t: u64,
    pub n: usize,
    pub s: usize,
    pub predicate: &'a dyn Predicate,
}

pub struct UniversalState {
    label: UniversalLabel,
    my_id: u64,
    my_state: Bits,
    classes: Vec<PortClass>,
    neighbors: Vec<(u64, Bits)>,
    /// Units collected from the away stream starting at the first marker;
    /// for the hub, the toward arrivals in order instead.
    collected: Vec<AwayUnit>,
    have_second_marker: bool,
    relay_away: Option<AwayUnit>,
    relay_toward: Option<Bits>,
    reconstruction: Option<Bits>,
    failed: bool,
}

impl StateBits for UniversalState {
    fn state_bits(&self) -> usize {
        let units: usize = self.collected.iter().map(|u| u.share.len() + 2).sum();
        let hello: usize = self
            .neighbors
            .iter()
            .map(|(id, st)| 2 * ceil_log2(id + 2) + 1 + st.len())
            .sum();
        let relays = self.relay_away.as_ref().map_or(0, |u| u.share.len() + 2)
            + self.relay_toward.as_ref().map_or(0, Bits::len);
        self.label.share.len()
            + 4
            + self.my_state.len()
            + 2 * self.classes.len()
            + hello
            + units
            + relays
            + self.reconstruction.as_ref().map_or(0, Bits::len)
            + 8
    }
}

impl UniversalState {
    fn fail(&mut self) -> Decision {
        self.failed = true;
        Decision::Reject
    }
}

impl UniversalVerifier<'_> {
    fn quarter(&self) -> u64 {
        self.t / 4
    }

    /// Last round in which pipeline units are emitted.
    fn pipeline_end(&self) -> u64 {
        self.t / 2 + 1
    }

    /// Round of reconstruction, local-view check, and the first equality
    /// slice emission.
    fn reconstruct_round(&self) -> u64 {
        self.t / 2 + 2
    }

    fn decide_round(&self) -> u64 {
        self.t + 2
    }

    fn eq_slice_width(&self, total: usize) -> usize {
        total.div_ceil((self.t / 2) as usize).max(1)
    }

    fn reconstruct(&self, st: &UniversalState) -> Option<Bits> {
        let quarter = self.quarter() as usize;
        if st.label.v_indication {
            // Own share 0, then the first quarter-1 toward arrivals.
            if st.collected.len() < quarter - 1 {
                return None;
            }
            let mut bits = st.label.share.clone();
            for u in &st.collected[..quarter - 1] {
                bits.extend(&u.share);
            }
            return Some(bits);
        }
        if !st.have_second_marker || st.collected.len() != quarter + 1 {
            return None;
        }
        let first = &st.collected[0];
        let mut bits = Bits::new();
        if first.v_indication {
            // Stream ran share 0 upward: keep order, drop the last unit
            // (the second marker repeats share 0).
            for u in &st.collected[..quarter] {
                bits.extend(&u.share);
            }
        } else {
            // Stream ran downward from a later marker: reverse, drop it.
            for u in st.collected[1..].iter().rev() {
                bits.extend(&u.share);
            }
        }
        Some(bits)
    }
}

impl VertexProgram for UniversalVerifier<'_> {
    type LocalState = UniversalState;

    fn needs_oracle(&self) -> bool {
        true
    }

    fn init(&self, ctx: &InitCtx) -> UniversalState {
        // In an id-based configuration the id is part of the vertex state:
        // here it is framed as a gamma code before the family state.
        let parsed = gamma_decode(ctx.state, 0).and_then(|(id, next)| {
            let st = ctx.state.slice(next, ctx.state.len());
            (st.len() == self.s).then_some((id, st))
        });
        let label = UniversalLabel::decode(ctx.label);
        let poisoned = parsed.is_none() || label.is_none();
        let (my_id, my_state) = parsed.unwrap_or((u64::MAX, Bits::new()));
        UniversalState {
            label: label.unwrap_or(UniversalLabel {
                v_indication: false,
                first_in_block: false,
                orientation: 3,
                share: Bits::new(),
            }),
            my_id: if poisoned { u64::MAX } else { my_id },
            my_state,
            classes: Vec::new(),
            neighbors: Vec::new(),
            collected: Vec::new(),
            have_second_marker: false,
            relay_away: None,
            relay_toward: None,
            reconstruction: None,
            failed: false,
        }
    }

    fn step(
        &self,
        st: &mut UniversalState,
        inbox: &[Option<Bits>],
        tick: OracleTick,
        out: &mut Outbox,
    ) -> Decision {
        if st.failed {
            return Decision::Reject;
        }
        if st.label.orientation > 2 || st.my_id == u64::MAX {
            return st.fail();
        }
        let w = st.label.share.len();
        let round = tick.round;

        if round == 1 {
            // Hello: orientation, then id and state for the neighbors'
            // local-view checks.
            let mut hello = Bits::new();
            hello.push_u64(st.label.orientation as u64, 2);
            gamma_encode(st.my_id, &mut hello);
            hello.extend(&st.my_state);
            out.broadcast(&hello);
            return Decision::Continue;
        }

        if round == 2 {
            for slot in inbox.iter() {
                let Some(msg) = slot else { return st.fail() };
                if msg.len() < 3 {
                    return st.fail();
                }
                let a = msg.read_u64(0, 2) as u8;
                if a > 2 {
                    return st.fail();
                }
                let Some((id, next)) = gamma_decode(msg, 2) else {
                    return st.fail();
                };
                let state = msg.slice(next, msg.len());
                if state.len() != self.s {
                    return st.fail();
                }
                let class = if a == (st.label.orientation + 2) % 3 {
                    PortClass::Inward
                } else if a == (st.label.orientation + 1) % 3 {
                    PortClass::Outward
                } else {
                    PortClass::Same
                };
                st.classes.push(class);
                st.neighbors.push((id, state));
            }
            if st.label.v_indication {
                // The hub carries the share-0 marker and orientation 0,
                // and no neighbor may claim to be closer to it.
                if !st.label.first_in_block || st.label.orientation != 0 {
                    return st.fail();
                }
                if st.classes.contains(&PortClass::Inward) {
                    return st.fail();
                }
            }
            // First pipeline emission: the vertex's own share both ways.
            let own = AwayUnit {
                share: st.label.share.clone(),
                first_in_block: st.label.first_in_block,
                v_indication: st.label.v_indication,
            };
            for (port, class) in st.classes.iter().enumerate() {
                match class {
                    PortClass::Outward => out.send(port, own.encode()),
                    PortClass::Inward => out.send(port, st.label.share.clone()),
                    PortClass::Same => {}
                }
            }
            return Decision::Continue;
        }

        // Pipeline arrivals land in rounds 3 ..= pipeline_end + 1.
        if round <= self.pipeline_end() + 1 {
            let mut away_in: Option<AwayUnit> = None;
            let mut toward_in: Option<Bits> = None;
            for (port, slot) in inbox.iter().enumerate() {
                let Some(msg) = slot else { continue };
                match st.classes.get(port) {
                    Some(PortClass::Inward) => {
                        // The away stream arrives from hub-side neighbors;
                        // all non-empty units must agree.
                        let Some(unit) = AwayUnit::decode(msg, w) else {
                            return st.fail();
                        };
                        match &away_in {
                            None => away_in = Some(unit),
                            Some(prev) if *prev == unit => {}
                            Some(_) => return st.fail(),
                        }
                    }
                    Some(PortClass::Outward) => {
                        if msg.len() != w {
                            return st.fail();
                        }
                        match &toward_in {
                            None => toward_in = Some(msg.clone()),
                            Some(prev) if prev == msg => {}
                            Some(_) => return st.fail(),
                        }
                    }
                    _ => return st.fail(),
                }
            }

            if st.label.v_indication {
                // Reflect the toward stream outward; the unit arriving in
                // round i carries the share of distance class i - 2, so
                // markers are synthesized from the round number.
                if let Some(share) = &toward_in {
                    let class = round - 2;
                    st.relay_away = Some(AwayUnit {
                        share: share.clone(),
                        first_in_block: class % self.quarter() == 0,
                        v_indication: false,
                    });
                    if (st.collected.len() as u64) < self.quarter() - 1 {
                        st.collected.push(AwayUnit {
                            share: share.clone(),
                            first_in_block: false,
                            v_indication: false,
                        });
                    }
                }
            } else {
                if let Some(unit) = &away_in {
                    if !st.have_second_marker {
                        if unit.first_in_block && !st.collected.is_empty() {
                            st.have_second_marker = true;
                            st.collected.push(unit.clone());
                        } else if unit.first_in_block || !st.collected.is_empty() {
                            st.collected.push(unit.clone());
                        }
                    }
                    if st.collected.len() as u64 > self.quarter() + 1 {
                        return st.fail();
                    }
                }
                st.relay_away = away_in;
                st.relay_toward = toward_in;
            }

            if round <= self.pipeline_end() {
                if let Some(unit) = st.relay_away.take() {
                    let frame = unit.encode();
                    for (port, class) in st.classes.iter().enumerate() {
                        if *class == PortClass::Outward {
                            out.send(port, frame.clone());
                        }
                    }
                }
                // The toward stream only matters until the hub has seen
                // every class it reflects (up to one full block); relaying
                // it longer wastes communication.
                if round <= self.quarter() + 1 {
                    if let Some(share) = st.relay_toward.take() {
                        for (port, class) in st.classes.iter().enumerate() {
                            if *class == PortClass::Inward {
                                out.send(port, share.clone());
                            }
                        }
                    }
                } else {
                    st.relay_toward = None;
                }
            }

            if round < self.reconstruct_round() {
                return Decision::Continue;
            }
        }

        if round == self.reconstruct_round() {
            let Some(bits) = self.reconstruct(st) else {
                return st.fail();
            };
            let Some(decoded) = decode_representation(&bits, self.n, self.s) else {
                return st.fail();
            };
            if !self.predicate.local_view_consistent(
                &decoded,
                st.my_id,
                &st.my_state,
                &st.neighbors,
            ) {
                return st.fail();
            }
            st.reconstruction = Some(bits);
            st.collected.clear();
            st.collected.shrink_to_fit();
        }

        // Equality phase: slice k goes out in round reconstruct_round+k-1
        // and is checked against our own slice on arrival.
        let Some(recon) = st.reconstruction.clone() else {
            return st.fail();
        };
        let we = self.eq_slice_width(recon.len());
        let slice = |k: u64| -> Bits {
            let lo = (k as usize - 1) * we;
            (lo..lo + we)
                .map(|i| i < recon.len() && recon.get(i))
                .collect()
        };
        if round > self.reconstruct_round() {
            let expect = slice(round - self.reconstruct_round());
            for slot in inbox.iter() {
                match slot {
                    Some(msg) if *msg == expect => {}
                    _ => return st.fail(),
                }
            }
        }
        let k_out = round - self.reconstruct_round() + 1;
        if k_out <= self.t / 2 {
            let frame = slice(k_out);
            for port in 0..out.degree() {
                out.send(port, frame.clone());
            }
        }
        if round >= self.decide_round() {
            let decoded = decode_representation(&recon, self.n, self.s)
                .expect("checked at reconstruction");
            if self.predicate.evaluate(&decoded) {
                Decision::Accept
            } else {
                Decision::Reject
            }
        } else {
            Decision::Continue
        }
    }
}

/// Runs the t-round universal verifier with the given predicate. The
/// oracle mode is exact-t.
pub fn verify_universal(
    g: &GraphConfig,
    labels: &[UniversalLabel],
    t: u64,
    predicate: &dyn Predicate,
) -> Result<(Verdict, RunMetrics), UniversalError> {
    if t < 8 || t % 4 != 0 {
        return Err(UniversalError::BadT(t));
    }
    if labels.len() != g.n() {
        return Err(UniversalError::LabelMismatch {
            got: labels.len(),
            want: g.n(),
        });
    }
    let s = uniform_state_width(g)?;
    let ids = g.ids().ok_or(UniversalError::BadIds)?;
    // The vertex id is local information: it rides in the engine state in
    // front of the family state.
    let mut staged = g.clone();
    for v in 0..g.n() {
        let mut bits = Bits::new();
        gamma_encode(ids[v], &mut bits);
        bits.extend(g.state(v));
        staged.set_state(v, bits);
    }
    let encoded: Vec<Bits> = labels.iter().map(UniversalLabel::encode).collect();
    let program = UniversalVerifier {
        t,
        n: g.n(),
        s,
        predicate,
    };
    Ok(engine::run(
        &staged,
        &encoded,
        &program,
        RoundOracle::ExactT(t),
        t + 4,
    )?)
}

/// Label file: one record per vertex, "v d0 f a r_hex:width".
pub fn write_labels(labels: &[UniversalLabel]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (v, l) in labels.iter().enumerate() {
        writeln!(
            out,
            "{v} {} {} {} {}:{}",
            l.v_indication as u8,
            l.first_in_block as u8,
            l.orientation,
            l.share.to_hex(),
            l.share.len()
        )
        .unwrap();
    }
    out
}

pub fn read_labels(text: &str) -> Result<Vec<UniversalLabel>, UniversalError> {
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| UniversalError::Parse {
            line: lineno + 1,
            reason,
        };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(err("expected \"v d0 f a r_hex:width\"".into()));
        }
        let v: usize = parts[0].parse().map_err(|_| err("bad vertex".into()))?;
        if v != labels.len() {
            return Err(err(format!("expected vertex {}, got {v}", labels.len())));
        }
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(err(format!("bad flag {other:?}"))),
        };
        let v_indication = flag(parts[1])?;
        let first_in_block = flag(parts[2])?;
        let orientation: u8 = parts[3].parse().map_err(|_| err("bad orientation".into()))?;
        let (hex, lenstr) = parts[4]
            .rsplit_once(':')
            .ok_or_else(|| err("expected r_hex:width".into()))?;
        let width: usize = lenstr.parse().map_err(|_| err("bad width".into()))?;
        let share = Bits::from_hex(hex, width).map_err(err)?;
        labels.push(UniversalLabel {
            v_indication,
            first_in_block,
            orientation,
            share,
        });
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    #[test]
    fn representation_round_trip_tree() {
        for seed in 0..5 {
            let g = generate(GraphKind::RandomTree, 24, seed).unwrap();
            let rep = encode_representation(&g).unwrap();
            // Trees meet the nominal bound exactly: n*s + m*ceil(log2 n).
            assert_eq!(
                rep.bits.len(),
                nominal_representation_bits(24, g.edge_count(), 0)
            );
            let back = decode_representation(&rep.bits, 24, 0).unwrap();
            assert!(same_configuration(&g, &back));
        }
    }

    #[test]
    fn representation_round_trip_unicyclic_and_permuted() {
        let g = generate(GraphKind::Unicyclic, 17, 3).unwrap();
        let rep = encode_representation(&g).unwrap();
        let back = decode_representation(&rep.bits, 17, 0).unwrap();
        assert!(same_configuration(&g, &back));
        // Permuting ids changes the configuration; its encoding must still
        // round-trip to the permuted form.
        let p = crate::graph::permute_ids(&g, 9).unwrap();
        let rep2 = encode_representation(&p).unwrap();
        let back2 = decode_representation(&rep2.bits, 17, 0).unwrap();
        assert!(same_configuration(&p, &back2));
        assert!(!same_configuration(&g, &p));
    }

    #[test]
    fn representation_with_states_and_padding() {
        let mut g = generate(GraphKind::Path, 9, 0).unwrap();
        for v in 0..9 {
            g.set_state(v, Bits::from_u64(v as u64 % 2, 1));
        }
        let rep = encode_representation(&g).unwrap();
        let mut padded = rep.bits.clone();
        for _ in 0..13 {
            padded.push(false);
        }
        let back = decode_representation(&padded, 9, 1).unwrap();
        assert!(same_configuration(&g, &back));
    }

    #[test]
    fn label_formulas() {
        // Vertex at distance 4 from the hub with t = 16: share index
        // 4 mod 4 = 0 so the marker is set, orientation 4 mod 3 = 1.
        let g = generate(GraphKind::Path, 32, 0).unwrap();
        let labels = prove_universal(&g, 16, None).unwrap();
        assert!(labels[4].first_in_block);
        assert_eq!(labels[4].orientation, 1);
        assert!(!labels[4].v_indication);
        // The hub itself.
        assert!(labels[0].v_indication);
        assert!(labels[0].first_in_block);
        assert_eq!(labels[0].orientation, 0);
        // Share widths: R bits split into t/4 parts of ceil(4R/t) each.
        let rep = encode_representation(&g).unwrap();
        let w = universal_share_width(rep.bits.len(), 16);
        assert!(labels.iter().all(|l| l.share.len() == w));
        assert_eq!(w, rep.bits.len().div_ceil(4));
    }

    #[test]
    fn prover_preconditions() {
        let g = generate(GraphKind::Path, 32, 0).unwrap();
        assert!(matches!(prove_universal(&g, 6, None), Err(UniversalError::BadT(6))));
        assert!(matches!(
            prove_universal(&g, 10, None),
            Err(UniversalError::BadT(10))
        ));
        let small = generate(GraphKind::Path, 4, 0).unwrap();
        assert!(matches!(
            prove_universal(&small, 16, None),
            Err(UniversalError::TooFewDistanceClasses { .. })
        ));
    }

    #[test]
    fn path_accepts_and_flip_rejects() {
        let mut g = generate(GraphKind::Path, 16, 0).unwrap();
        for v in 0..16 {
            g.set_state(v, Bits::from_u64(v as u64 % 2, 1));
        }
        let t = 12;
        let labels = prove_universal(&g, t, None).unwrap();
        let (verdict, metrics) =
            verify_universal(&g, &labels, t, &TwoColoringPredicate).unwrap();
        assert!(verdict.accepted, "honest two-coloring must verify");
        assert!(metrics.rounds <= t + 2);

        // Flip one state after proving: the local view no longer matches.
        let mut bad = g.clone();
        bad.set_state(7, Bits::from_u64(0, 1));
        let (verdict, _) = verify_universal(&bad, &labels, t, &TwoColoringPredicate).unwrap();
        assert!(!verdict.accepted);
    }

    #[test]
    fn predicate_failure_rejects() {
        // A path with odd n: even-n is false on a legal labeling, so every
        // vertex evaluates the predicate to false.
        let g = generate(GraphKind::Path, 17, 0).unwrap();
        let labels = prove_universal(&g, 8, None).unwrap();
        let (verdict, _) = verify_universal(&g, &labels, 8, &EvenNPredicate).unwrap();
        assert!(!verdict.accepted);
        let (verdict, _) = verify_universal(&g, &labels, 8, &AcyclicPredicate).unwrap();
        assert!(verdict.accepted);
    }

    #[test]
    fn label_file_round_trip() {
        let g = generate(GraphKind::Path, 16, 0).unwrap();
        let labels = prove_universal(&g, 8, None).unwrap();
        let text = write_labels(&labels);
        assert_eq!(read_labels(&text).unwrap(), labels);
    }
}

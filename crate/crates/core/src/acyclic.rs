//! The O(t)-round acyclicity scheme with O((log n)/t)-bit labels.
//!
//! The classical one-round scheme labels every vertex with its distance to
//! a root. Here that distance is split into shares: vertices are grouped
//! into oriented blocks of t consecutive depths, and each vertex stores a
//! w-bit share of its block head's depth, w = ceil(ceil(log2 n)/t). The
//! verifier relays labels down the orientation for t rounds so every
//! vertex meets its counterpart one block up, then the blocks add t to the
//! received value with distributed carries and compare against their own
//! shares.
//!
//! Verification needs truthful round information (an exact t or an alarm
//! at multiples of t); the verifier below is written purely against alarm
//! events, so both oracle modes run the identical program.

use thiserror::Error;

use crate::bits::{ceil_log2, Bits};
use crate::engine::{
    self, Decision, InitCtx, OracleTick, Outbox, RoundOracle, RunMetrics, StateBits, Verdict,
    VertexProgram,
};
use crate::graph::GraphConfig;

#[derive(Debug, Error)]
pub enum AcyclicError {
    #[error("prover requires a connected acyclic configuration")]
    NotAcyclic,
    #[error("t must satisfy 1 <= t <= n (got t={t}, n={n})")]
    BadT { t: u64, n: usize },
    #[error("labels cover {got} vertices, graph has {want}")]
    LabelMismatch { got: usize, want: usize },
    #[error("oracle must disclose t exactly or alarm every t rounds")]
    BadOracle,
    #[error("engine: {0}")]
    Engine(#[from] engine::EngineError),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Position of a vertex within its block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockPos {
    Head,
    Mid,
    Tail,
}

impl BlockPos {
    pub fn encode_u64(self) -> u64 {
        match self {
            BlockPos::Head => 0,
            BlockPos::Mid => 1,
            BlockPos::Tail => 2,
        }
    }

    pub fn decode_u64(v: u64) -> Option<Self> {
        match v {
            0 => Some(BlockPos::Head),
            1 => Some(BlockPos::Mid),
            2 => Some(BlockPos::Tail),
            _ => None,
        }
    }
}

impl std::fmt::Display for BlockPos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlockPos::Head => "HEAD",
            BlockPos::Mid => "MID",
            BlockPos::Tail => "TAIL",
        })
    }
}

/// One vertex's label: orientation mod 3, block position, block color, and
/// a share of the block head's depth. Encodable in 5 + w bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcyclicityLabel {
    pub orientation: u8,
    pub block: BlockPos,
    pub color: bool,
    pub share: Bits,
}

impl AcyclicityLabel {
    pub fn encode(&self) -> Bits {
        let mut b = Bits::new();
        b.push_u64(self.orientation as u64, 2);
        b.push_u64(self.block.encode_u64(), 2);
        b.push(self.color);
        b.extend(&self.share);
        b
    }

    pub fn decode(bits: &Bits) -> Option<Self> {
        if bits.len() < 5 {
            return None;
        }
        let orientation = bits.read_u64(0, 2) as u8;
        if orientation > 2 {
            return None;
        }
        let block = BlockPos::decode_u64(bits.read_u64(2, 2))?;
        Some(AcyclicityLabel {
            orientation,
            block,
            color: bits.get(4),
            share: bits.slice(5, bits.len()),
        })
    }

    pub fn bit_len(&self) -> usize {
        5 + self.share.len()
    }
}

/// Share width for an n-vertex configuration verified in t rounds.
pub fn share_width(n: usize, t: u64) -> usize {
    (ceil_log2(n as u64) as u64).div_ceil(t) as usize
}

#[derive(Debug, Clone, Copy)]
pub enum RootChoice {
    FirstVertex,
    Seeded(u64),
}

/// Labels a connected acyclic configuration.
///
/// The root gets depth 0; every vertex at depth d receives orientation
/// d mod 3, block position by d mod t, color by floor(d/t) mod 2, and the
/// (d mod t)-th w-bit share of its block head's depth t*floor(d/t).
pub fn prove_acyclic(
    g: &GraphConfig,
    t: u64,
    root: RootChoice,
) -> Result<Vec<AcyclicityLabel>, AcyclicError> {
    let n = g.n();
    if t < 1 || t > n as u64 {
        return Err(AcyclicError::BadT { t, n });
    }
    if !g.is_connected() || g.has_cycle() {
        return Err(AcyclicError::NotAcyclic);
    }
    let root = match root {
        RootChoice::FirstVertex => 0,
        RootChoice::Seeded(seed) => {
            use rand::{Rng, SeedableRng};
            rand_chacha::ChaCha8Rng::seed_from_u64(seed).gen_range(0..n)
        }
    };
    let depth = g.bfs_distances(root);
    let w = share_width(n, t);
    let labels = (0..n)
        .map(|v| {
            let d = depth[v] as u64;
            let offset = d % t;
            let head_depth = d - offset;
            let block = if t == 1 {
                BlockPos::Head
            } else if offset == 0 {
                BlockPos::Head
            } else if offset == t - 1 {
                BlockPos::Tail
            } else {
                BlockPos::Mid
            };
            let share: Bits = (0..w)
                .map(|i| (head_depth >> (offset as usize * w + i)) & 1 == 1)
                .collect();
            AcyclicityLabel {
                orientation: (d % 3) as u8,
                block,
                color: (d / t) % 2 == 1,
                share,
            }
        })
        .collect();
    Ok(labels)
}

/// Drops all but the first `keep` bits of every distance share. Used by the
/// lower-bound attack to build undersized label assignments.
pub fn truncate_shares(labels: &[AcyclicityLabel], keep: usize) -> Vec<AcyclicityLabel> {
    labels
        .iter()
        .map(|l| AcyclicityLabel {
            share: l.share.slice(0, keep.min(l.share.len())),
            ..l.clone()
        })
        .collect()
}

/// Adds `val` into a block of shares (share 0 least significant), carrying
/// between shares. Returns the new shares and whether the addition carried
/// out of the final share.
pub fn increment_block(shares: &[Bits], val: u64) -> (Vec<Bits>, bool) {
    let mut carry = val;
    let mut out = Vec::with_capacity(shares.len());
    for share in shares {
        let w = share.len();
        let sum = share.to_u64() as u128 + carry as u128;
        out.push(Bits::from_u64(sum as u64, w));
        carry = (sum >> w) as u64;
    }
    (out, carry != 0)
}

fn block_value(shares: &[&Bits]) -> u64 {
    let mut v = 0u64;
    let mut at = 0;
    for s in shares {
        v |= s.to_u64() << at;
        at += s.len();
    }
    v
}

/// Centralized oracle for label-family correctness: orientation labels,
/// block labels, block coloring, and distance labels must all be correct.
/// This is the reference the distributed verifier is tested against.
pub fn check_labels_central(g: &GraphConfig, labels: &[AcyclicityLabel], t: u64) -> bool {
    let n = g.n();
    if labels.len() != n || t < 1 {
        return false;
    }
    let w = labels[0].share.len();
    if labels.iter().any(|l| l.share.len() != w) {
        return false;
    }

    // Orientation: at most one neighbor a step behind, every other
    // neighbor a step ahead.
    let mut parent = vec![None; n];
    for v in 0..n {
        for &u in g.neighbors(v) {
            let av = labels[v].orientation as i32;
            let au = labels[u].orientation as i32;
            if au == (av + 2) % 3 {
                if parent[v].is_some() {
                    return false;
                }
                parent[v] = Some(u);
            } else if au != (av + 1) % 3 {
                return false;
            }
        }
    }

    let anc = |v: usize, k: u64| -> Option<usize> {
        let mut x = v;
        for _ in 0..k {
            x = parent[x]?;
        }
        Some(x)
    };

    for v in 0..n {
        let l = &labels[v];
        let p = parent[v];
        if t == 1 {
            if l.block != BlockPos::Head {
                return false;
            }
        } else {
            // Head iff the parent is absent or a tail.
            let head_pred = match p {
                None => true,
                Some(p) => labels[p].block == BlockPos::Tail,
            };
            if (l.block == BlockPos::Head) != head_pred {
                return false;
            }
            // Tail iff the (t-1)-th ancestor exists and is a head.
            let tail_pred = anc(v, t - 1)
                .is_some_and(|a| labels[a].block == BlockPos::Head);
            if (l.block == BlockPos::Tail) != tail_pred {
                return false;
            }
        }
        // Color is constant within a block and flips across a tail edge.
        // With t = 1 every vertex is its own block, so every edge flips.
        if let Some(p) = p {
            let parent_tail = t == 1 || labels[p].block == BlockPos::Tail;
            if (l.color == labels[p].color) != !parent_tail {
                return false;
            }
        }
        // Some head within distance t - 1 above (or at) every vertex.
        let head_near = (0..t).any(|k| {
            anc(v, k).is_some_and(|a| labels[a].block == BlockPos::Head)
        });
        if !head_near {
            return false;
        }
        // The counterpart one block up must match in position and differ
        // in color.
        if let Some(a) = anc(v, t) {
            if t > 1 && labels[a].block != l.block {
                return false;
            }
            if labels[a].color == l.color {
                return false;
            }
        }
    }

    if w == 0 {
        return true;
    }

    // Distance labels. Vertices whose ancestor chain ends within t steps
    // sit above (or in) the root block: their shares must be zero.
    for v in 0..n {
        if anc(v, t).is_none() && !labels[v].share.is_zero() {
            return false;
        }
    }
    // For every maximal head-started run, the value one block up plus t
    // must reproduce the run's own value, share-aligned, with carries
    // dropped past a leaf but rejected past a tail; and a non-root run's
    // value must be nonzero (observed by its tail).
    for head in 0..n {
        if labels[head].block != BlockPos::Head {
            continue;
        }
        // Collect every maximal downward chain out of this head. Explicit
        // stack of (vertex, chain-so-far index) over the child orientation.
        let mut chains: Vec<Vec<usize>> = Vec::new();
        let mut stack = vec![vec![head]];
        while let Some(chain) = stack.pop() {
            let v = *chain.last().unwrap();
            let children: Vec<usize> = g
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&u| parent[u] == Some(v))
                .collect();
            let stop = labels[v].block == BlockPos::Tail
                || children.is_empty()
                || chain.len() as u64 == t;
            if stop {
                chains.push(chain);
                continue;
            }
            for c in children {
                let mut next = chain.clone();
                next.push(c);
                stack.push(next);
            }
        }
        for run in chains {
            // Members with an ancestor t steps up compare against the
            // incremented window.
            let windows: Vec<Option<usize>> =
                run.iter().map(|&v| anc(v, t)).collect();
            if windows.iter().all(Option::is_none) {
                continue;
            }
            if windows.iter().any(Option::is_none) {
                // A window that exists for a deeper member but not for a
                // shallower one is impossible along one chain.
                return false;
            }
            let window: Vec<&Bits> = windows
                .iter()
                .map(|a| &labels[a.unwrap()].share)
                .collect();
            let value = block_value(&window);
            let capacity = (run.len() * w) as u32;
            let incremented = value as u128 + t as u128;
            let complete = labels[*run.last().unwrap()].block == BlockPos::Tail;
            if complete && incremented >> capacity != 0 {
                return false; // tail rejects the carry out of the block
            }
            let kept = (incremented & ((1u128 << capacity) - 1)) as u64;
            let own: Vec<&Bits> = run.iter().map(|&v| &labels[v].share).collect();
            if block_value(&own) != kept {
                return false;
            }
            if complete && block_value(&own) == 0 {
                return false; // non-root block with value zero
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Distributed verifier
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Exchange,
    Relay,
    Final,
    Increment,
    Drain,
    Decide,
}

pub struct AcyclicVerifier;

pub struct AcyclicState {
    label: AcyclicityLabel,
    phase: Phase,
    parent_port: Option<usize>,
    head_seen: bool,
    is_zero: bool,
    /// Copy of the counterpart share one block up, incremented in place.
    register: Option<Bits>,
    t_is_one: bool,
    failed: bool,
}

impl StateBits for AcyclicState {
    fn state_bits(&self) -> usize {
        let label_bits = self.label.bit_len();
        let register_bits = self.register.as_ref().map_or(0, Bits::len) + 1;
        let port_bits = self.parent_port.map_or(1, |p| 1 + ceil_log2(p as u64 + 2));
        // phase(3) + flags(4) + the fields above
        label_bits + register_bits + port_bits + 3 + 4
    }
}

impl AcyclicState {
    fn fail(&mut self) -> Decision {
        self.failed = true;
        Decision::Reject
    }
}

fn parse_relay(msg: &Bits, w: usize) -> Option<(BlockPos, bool, Bits)> {
    if msg.len() != 3 + w {
        return None;
    }
    let block = BlockPos::decode_u64(msg.read_u64(0, 2))?;
    Some((block, msg.get(2), msg.slice(3, msg.len())))
}

fn relay_frame(block: BlockPos, color: bool, share: &Bits) -> Bits {
    let mut b = Bits::new();
    b.push_u64(block.encode_u64(), 2);
    b.push(color);
    b.extend(share);
    b
}

impl AcyclicVerifier {
    /// Adds `val` to the register; returns the outgoing carry.
    fn bump(register: &mut Bits, val: u64) -> u64 {
        let w = register.len();
        let sum = register.to_u64() + val;
        *register = Bits::from_u64(sum, w);
        sum >> w
    }
}

impl VertexProgram for AcyclicVerifier {
    type LocalState = AcyclicState;

    fn needs_oracle(&self) -> bool {
        true
    }

    fn init(&self, ctx: &InitCtx) -> AcyclicState {
        let label = AcyclicityLabel::decode(ctx.label).unwrap_or(AcyclicityLabel {
            orientation: 3, // poisoned: fails on first step
            block: BlockPos::Head,
            color: false,
            share: Bits::new(),
        });
        AcyclicState {
            label,
            phase: Phase::Exchange,
            parent_port: None,
            head_seen: false,
            is_zero: true,
            register: None,
            t_is_one: false,
            failed: false,
        }
    }

    fn step(
        &self,
        st: &mut AcyclicState,
        inbox: &[Option<Bits>],
        tick: OracleTick,
        out: &mut Outbox,
    ) -> Decision {
        if st.failed {
            return Decision::Reject;
        }
        if st.label.orientation > 2 {
            return st.fail();
        }
        let w = st.label.share.len();

        if tick.round == 1 {
            out.broadcast(&st.label.encode());
            st.t_is_one = tick.alarm;
            st.phase = Phase::Relay;
            return Decision::Continue;
        }

        if tick.round == 2 {
            // Everyone's label is in the inbox: classify neighbors and run
            // the one-round checks.
            let mut relay: Option<Bits> = None;
            let my = st.label.clone();
            st.head_seen = my.block == BlockPos::Head;
            st.is_zero = my.share.is_zero();
            let mut parent_label: Option<AcyclicityLabel> = None;
            for (port, slot) in inbox.iter().enumerate() {
                let Some(msg) = slot else { return st.fail() };
                if msg.len() != my.bit_len() {
                    return st.fail();
                }
                let Some(l) = AcyclicityLabel::decode(msg) else {
                    return st.fail();
                };
                if l.orientation == (my.orientation + 2) % 3 {
                    if st.parent_port.is_some() {
                        return st.fail(); // two parents
                    }
                    st.parent_port = Some(port);
                    parent_label = Some(l);
                } else if l.orientation != (my.orientation + 1) % 3 {
                    return st.fail();
                }
            }
            // Block-position and color rules against the parent.
            let head_pred = match &parent_label {
                None => true,
                Some(p) => st.t_is_one || p.block == BlockPos::Tail,
            };
            if st.t_is_one {
                if my.block != BlockPos::Head {
                    return st.fail();
                }
            } else if (my.block == BlockPos::Head) != head_pred {
                return st.fail();
            }
            if let Some(p) = &parent_label {
                let parent_tail = st.t_is_one || p.block == BlockPos::Tail;
                if (my.color == p.color) != !parent_tail {
                    return st.fail();
                }
                st.head_seen |= p.block == BlockPos::Head;
                st.is_zero &= p.share.is_zero();
                relay = Some(relay_frame(p.block, p.color, &p.share));
            }

            if st.t_is_one {
                // The counterpart one block up is the parent itself; the
                // whole distance check is local.
                return match parent_label {
                    None => {
                        if w > 0 && !my.share.is_zero() {
                            st.fail()
                        } else {
                            Decision::Accept
                        }
                    }
                    Some(p) => {
                        if w == 0 {
                            return Decision::Accept;
                        }
                        let mut register = p.share.clone();
                        let carry = Self::bump(&mut register, 1);
                        if carry != 0 {
                            return st.fail(); // every vertex is a tail
                        }
                        if register != my.share {
                            return st.fail();
                        }
                        if my.share.is_zero() {
                            return st.fail(); // non-root block of value 0
                        }
                        Decision::Accept
                    }
                };
            }

            // With t = 2 this round doubles as the final relay round: the
            // ancestor t-1 steps up is the parent itself, and a vertex is
            // a tail exactly when that ancestor is a head.
            if tick.alarm {
                let anc_is_head =
                    parent_label.map(|l| l.block) == Some(BlockPos::Head);
                if (st.label.block == BlockPos::Tail) != anc_is_head {
                    return st.fail();
                }
                st.phase = Phase::Final;
            }
            // Relay the parent's frame to every child; leaves relay to
            // nobody and roots have nothing to relay.
            if let Some(frame) = relay {
                let pp = st.parent_port.expect("relay implies a parent");
                for port in 0..out.degree() {
                    if port != pp {
                        out.send(port, frame.clone());
                    }
                }
            }
            return Decision::Continue;
        }

        // Messages may only arrive on the parent port from here on, except
        // carries which also arrive on the parent port. Anything else is a
        // protocol violation.
        let mut parent_msg: Option<&Bits> = None;
        for (port, slot) in inbox.iter().enumerate() {
            if let Some(msg) = slot {
                if Some(port) != st.parent_port {
                    return st.fail();
                }
                parent_msg = Some(msg);
            }
        }

        match st.phase {
            Phase::Exchange => st.fail(),
            Phase::Relay => {
                if let Some(msg) = parent_msg {
                    let Some((b, c, d)) = parse_relay(msg, w) else {
                        return st.fail();
                    };
                    st.head_seen |= b == BlockPos::Head;
                    st.is_zero &= d.is_zero();
                    if tick.alarm {
                        // This relay is the ancestor t-1 steps up: a vertex
                        // is a tail exactly when that ancestor is a head.
                        if (st.label.block == BlockPos::Tail) != (b == BlockPos::Head) {
                            return st.fail();
                        }
                    }
                    if let Some(pp) = st.parent_port {
                        let frame = relay_frame(b, c, &d);
                        for port in 0..out.degree() {
                            if port != pp {
                                out.send(port, frame.clone());
                            }
                        }
                    }
                } else if tick.alarm && st.label.block == BlockPos::Tail {
                    // No ancestor at distance t-1 at all.
                    return st.fail();
                }
                if tick.alarm {
                    st.phase = Phase::Final;
                }
                Decision::Continue
            }
            Phase::Final => {
                // The inbox holds the counterpart one block up, or nothing
                // if the chain above is shorter than t.
                if !st.head_seen {
                    return st.fail();
                }
                match parent_msg {
                    None => {
                        if w > 0 && !st.label.share.is_zero() {
                            return st.fail();
                        }
                        // Root-side vertices are done.
                        Decision::Accept
                    }
                    Some(msg) => {
                        let Some((b, c, d)) = parse_relay(msg, w) else {
                            return st.fail();
                        };
                        if b != st.label.block || c == st.label.color {
                            return st.fail();
                        }
                        if st.label.block == BlockPos::Tail && st.is_zero {
                            return st.fail();
                        }
                        if w == 0 {
                            return Decision::Accept;
                        }
                        st.register = Some(d);
                        st.phase = Phase::Increment;
                        // Heads start injecting immediately.
                        if st.label.block == BlockPos::Head {
                            let carry =
                                Self::bump(st.register.as_mut().unwrap(), 1);
                            if carry != 0 {
                                if let Some(d) = self.emit_carry(st, out) {
                                    return d;
                                }
                            }
                        }
                        Decision::Continue
                    }
                }
            }
            Phase::Increment | Phase::Drain => {
                let Some(register) = st.register.as_mut() else {
                    return st.fail();
                };
                let mut carry_out = 0;
                if let Some(msg) = parent_msg {
                    if msg.len() != 1 || !msg.get(0) {
                        return st.fail();
                    }
                    carry_out += Self::bump(register, 1);
                }
                if st.phase == Phase::Increment && st.label.block == BlockPos::Head {
                    carry_out += Self::bump(register, 1);
                }
                if carry_out != 0 {
                    if let Some(d) = self.emit_carry(st, out) {
                        return d;
                    }
                }
                if tick.alarm {
                    st.phase = match st.phase {
                        Phase::Increment => Phase::Drain,
                        _ => Phase::Decide,
                    };
                }
                Decision::Continue
            }
            Phase::Decide => {
                let Some(register) = st.register.as_mut() else {
                    return st.fail();
                };
                if let Some(msg) = parent_msg {
                    // A final carry can arrive exactly at the decision
                    // step on adversarial chains.
                    if msg.len() != 1 || !msg.get(0) {
                        return st.fail();
                    }
                    let carry = Self::bump(register, 1);
                    if carry != 0 && self.emit_carry(st, out).is_some() {
                        return Decision::Reject;
                    }
                }
                if st.register.as_ref() != Some(&st.label.share) {
                    return st.fail();
                }
                Decision::Accept
            }
        }
    }
}

impl AcyclicVerifier {
    /// Sends a unit carry to every child; tails reject instead (the value
    /// would exceed the block's capacity).
    fn emit_carry(&self, st: &mut AcyclicState, out: &mut Outbox) -> Option<Decision> {
        if st.label.block == BlockPos::Tail {
            st.failed = true;
            return Some(Decision::Reject);
        }
        let frame = Bits::from_u64(1, 1);
        for port in 0..out.degree() {
            if Some(port) != st.parent_port {
                out.send(port, frame.clone());
            }
        }
        None
    }
}

/// Runs the distributed verifier on labeled `g`. The oracle must disclose
/// t exactly or alarm at multiples of t.
pub fn verify_acyclic(
    g: &GraphConfig,
    labels: &[AcyclicityLabel],
    oracle: RoundOracle,
) -> Result<(Verdict, RunMetrics), AcyclicError> {
    let t = match oracle {
        RoundOracle::ExactT(t) | RoundOracle::AlarmEveryT(t) if t >= 1 => t,
        _ => return Err(AcyclicError::BadOracle),
    };
    if labels.len() != g.n() {
        return Err(AcyclicError::LabelMismatch {
            got: labels.len(),
            want: g.n(),
        });
    }
    let encoded: Vec<Bits> = labels.iter().map(AcyclicityLabel::encode).collect();
    let budget = 3 * t + 8;
    Ok(engine::run(g, &encoded, &AcyclicVerifier, oracle, budget)?)
}

/// Label file: one record per vertex, "v a b c d_hex:width".
pub fn write_labels(labels: &[AcyclicityLabel]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (v, l) in labels.iter().enumerate() {
        writeln!(
            out,
            "{v} {} {} {} {}:{}",
            l.orientation,
            l.block,
            l.color as u8,
            l.share.to_hex(),
            l.share.len()
        )
        .unwrap();
    }
    out
}

pub fn read_labels(text: &str) -> Result<Vec<AcyclicityLabel>, AcyclicError> {
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| AcyclicError::Parse {
            line: lineno + 1,
            reason,
        };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(err("expected \"v a b c d_hex:width\"".into()));
        }
        let v: usize = parts[0].parse().map_err(|_| err("bad vertex".into()))?;
        if v != labels.len() {
            return Err(err(format!("expected vertex {}, got {v}", labels.len())));
        }
        let orientation: u8 = parts[1].parse().map_err(|_| err("bad orientation".into()))?;
        let block = match parts[2] {
            "HEAD" => BlockPos::Head,
            "MID" => BlockPos::Mid,
            "TAIL" => BlockPos::Tail,
            other => return Err(err(format!("bad block position {other:?}"))),
        };
        let color = match parts[3] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("bad color {other:?}"))),
        };
        let (hex, lenstr) = parts[4]
            .rsplit_once(':')
            .ok_or_else(|| err("expected d_hex:width".into()))?;
        let width: usize = lenstr.parse().map_err(|_| err("bad width".into()))?;
        let share = Bits::from_hex(hex, width).map_err(|e| err(e))?;
        labels.push(AcyclicityLabel {
            orientation,
            block,
            color,
            share,
        });
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    fn path(n: usize) -> GraphConfig {
        generate(GraphKind::Path, n, 0).unwrap()
    }

    #[test]
    fn golden_block_values_on_left_rooted_path() {
        // 48-vertex path rooted at vertex 0, t = 3: vertices 45..47 form
        // the 15th block from the root; its color is 1 and its shares
        // concatenate (tail first) to 101101 = 45.
        let g = path(48);
        let labels = prove_acyclic(&g, 3, RootChoice::FirstVertex).unwrap();
        assert_eq!(labels[45].block, BlockPos::Head);
        assert_eq!(labels[46].block, BlockPos::Mid);
        assert_eq!(labels[47].block, BlockPos::Tail);
        for v in 45..=47 {
            assert!(labels[v].color, "block 15 is odd so its color is 1");
        }
        let concat_msb_first: String = [47, 46, 45]
            .iter()
            .map(|&v| {
                let s = &labels[v].share;
                (0..s.len())
                    .rev()
                    .map(|i| if s.get(i) { '1' } else { '0' })
                    .collect::<String>()
            })
            .collect();
        assert_eq!(concat_msb_first, "101101");
        let shares: Vec<&Bits> = (45..=47).map(|v| &labels[v].share).collect();
        assert_eq!(block_value(&shares), 45);
        // Root block has value 0, block 1 (vertices 3..5) has value 3.
        let shares0: Vec<&Bits> = (0..=2).map(|v| &labels[v].share).collect();
        assert_eq!(block_value(&shares0), 0);
        let shares1: Vec<&Bits> = (3..=5).map(|v| &labels[v].share).collect();
        assert_eq!(block_value(&shares1), 3);
    }

    #[test]
    fn single_vertex_t1() {
        let g = path(1);
        let labels = prove_acyclic(&g, 1, RootChoice::FirstVertex).unwrap();
        assert_eq!(labels[0].block, BlockPos::Head);
        assert!(labels[0].share.is_empty());
        assert!(check_labels_central(&g, &labels, 1));
        let (verdict, metrics) =
            verify_acyclic(&g, &labels, RoundOracle::ExactT(1)).unwrap();
        assert!(verdict.accepted);
        assert!(metrics.rounds <= 5);
    }

    #[test]
    fn prover_refuses_cycles() {
        let g = generate(GraphKind::Cycle, 5, 0).unwrap();
        assert!(matches!(
            prove_acyclic(&g, 2, RootChoice::FirstVertex),
            Err(AcyclicError::NotAcyclic)
        ));
    }

    #[test]
    fn prover_blocks_match_bfs_depths() {
        let g = generate(GraphKind::RandomTree, 100, 11).unwrap();
        let t = 4;
        let labels = prove_acyclic(&g, t, RootChoice::FirstVertex).unwrap();
        let depth = g.bfs_distances(0);
        let w = share_width(100, t);
        for v in 0..g.n() {
            let d = depth[v] as u64;
            let head_depth = d - d % t;
            let expect: Bits = (0..w)
                .map(|i| (head_depth >> ((d % t) as usize * w + i)) & 1 == 1)
                .collect();
            assert_eq!(labels[v].share, expect);
        }
        assert!(check_labels_central(&g, &labels, t));
    }

    #[test]
    fn central_checker_rejects_mutations() {
        let g = path(20);
        let t = 3;
        let mut labels = prove_acyclic(&g, t, RootChoice::FirstVertex).unwrap();
        assert!(check_labels_central(&g, &labels, t));
        labels[7].color = !labels[7].color;
        assert!(!check_labels_central(&g, &labels, t));
    }

    #[test]
    fn central_checker_rejects_cycles() {
        // Any labeling of a cycle is incorrect; spot-check a few arranged
        // ones (the exhaustive check lives in the soundness suite).
        let g = generate(GraphKind::Cycle, 6, 0).unwrap();
        let w = share_width(6, 2);
        for a0 in 0..3u8 {
            let labels: Vec<AcyclicityLabel> = (0..6)
                .map(|v| AcyclicityLabel {
                    orientation: ((a0 as usize + v) % 3) as u8,
                    block: if v % 2 == 0 { BlockPos::Head } else { BlockPos::Tail },
                    color: (v / 2) % 2 == 1,
                    share: Bits::from_u64((v / 2) as u64 * 2, w),
                })
                .collect();
            assert!(!check_labels_central(&g, &labels, 2));
        }
    }

    #[test]
    fn verifier_accepts_prover_output() {
        for (n, t) in [(48, 3), (16, 1), (16, 2), (33, 5), (8, 8)] {
            let g = path(n);
            let labels = prove_acyclic(&g, t, RootChoice::FirstVertex).unwrap();
            let (verdict, metrics) =
                verify_acyclic(&g, &labels, RoundOracle::ExactT(t)).unwrap();
            assert!(verdict.accepted, "path n={n} t={t}");
            assert!(metrics.rounds <= 3 * t + 2, "n={n} t={t}: {}", metrics.rounds);
            assert_eq!(metrics.max_label_bits, 5 + share_width(n, t));
            // Alarm-only oracle must behave identically.
            let (v2, m2) =
                verify_acyclic(&g, &labels, RoundOracle::AlarmEveryT(t)).unwrap();
            assert!(v2.accepted);
            assert_eq!(m2, metrics);
        }
    }

    #[test]
    fn verifier_rejects_flipped_share_bit() {
        let g = path(30);
        let t = 3;
        let mut labels = prove_acyclic(&g, t, RootChoice::FirstVertex).unwrap();
        // Flip a share bit in a non-root block.
        let victim = 14;
        let old = labels[victim].share.get(0);
        labels[victim].share.set(0, !old);
        assert!(!check_labels_central(&g, &labels, t));
        let (verdict, _) = verify_acyclic(&g, &labels, RoundOracle::ExactT(t)).unwrap();
        assert!(!verdict.accepted);
    }

    #[test]
    fn increment_block_examples() {
        // All-ones 3-bit counter overflows on +1.
        let shares = vec![Bits::from_u64(1, 1), Bits::from_u64(1, 1), Bits::from_u64(1, 1)];
        let (_, overflow) = increment_block(&shares, 1);
        assert!(overflow);
        // 3 + 1 = 4 without overflow.
        let shares = vec![Bits::from_u64(3, 3)];
        let (out, overflow) = increment_block(&shares, 1);
        assert!(!overflow);
        assert_eq!(out[0].to_u64(), 4);
        // Three increments of a 3-share 2-bit block holding 45 give 48.
        let mut shares = vec![
            Bits::from_u64(45 & 3, 2),
            Bits::from_u64((45 >> 2) & 3, 2),
            Bits::from_u64((45 >> 4) & 3, 2),
        ];
        for _ in 0..3 {
            let (next, overflow) = increment_block(&shares, 1);
            assert!(!overflow);
            shares = next;
        }
        let got: Vec<&Bits> = shares.iter().collect();
        assert_eq!(block_value(&got), 48);
    }

    #[test]
    fn label_file_round_trip() {
        let g = path(10);
        let labels = prove_acyclic(&g, 2, RootChoice::FirstVertex).unwrap();
        let text = write_labels(&labels);
        let back = read_labels(&text).unwrap();
        assert_eq!(labels, back);
    }
}

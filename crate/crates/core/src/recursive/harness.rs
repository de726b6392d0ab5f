//! Standalone probes for the verifier's distributed subroutines, built on
//! the same message frame. Each probe runs one mechanism in isolation on
//! a pre-labeled configuration so tests can pin its timing and failure
//! modes directly.

use crate::acyclic::BlockPos;
use crate::bits::Bits;
use crate::engine::{Decision, InitCtx, OracleTick, Outbox, StateBits, VertexProgram};

use super::frame::Frame;
use super::RecursiveLabelStack;

/// Adds two share vectors (share 0 least significant, one bit per share),
/// carrying head to tail. Returns the sum shares and the carry out of the
/// final share.
pub fn add_shares(a: &[bool], b: &[bool], carry_in: bool) -> (Vec<bool>, bool) {
    assert_eq!(a.len(), b.len());
    let mut carry = carry_in;
    let out = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let sum = x as u8 + y as u8 + carry as u8;
            carry = sum >> 1 == 1;
            sum & 1 == 1
        })
        .collect();
    (out, carry)
}

/// Common scaffolding: decode an orientation-classified block layout.
pub struct ProbeState {
    pub stack: Option<RecursiveLabelStack>,
    pub parent_port: Option<usize>,
    pub seen_return: bool,
    pub got_token: bool,
    pub sending_leaf: bool,
    pub failed: bool,
    /// Round at which the head saw the bounce return (exposed via traces).
    pub done_round: Option<u64>,
}

impl StateBits for ProbeState {
    fn state_bits(&self) -> usize {
        16
    }
}

impl ProbeState {
    fn fail(&mut self) -> Decision {
        self.failed = true;
        Decision::Reject
    }

    fn pos(&self) -> BlockPos {
        self.stack.as_ref().unwrap().levels[0].0
    }
}

fn classify(st: &mut ProbeState, inbox_len: usize) {
    // Probe configurations index the parent as the lowest port of a
    // smaller-numbered neighbor; the harness graphs are built so that
    // port 0 of every non-head vertex points at its parent.
    st.parent_port = if st.stack.as_ref().unwrap().levels[0].0 == BlockPos::Head || inbox_len == 0
    {
        None
    } else {
        Some(0)
    };
}

/// Bounce probe: the head emits the token in round 1; every vertex runs
/// the bounce rules (tails reflect, leaves answer with a leaf beacon, a
/// vertex fails when non-leaf children return in different rounds). The
/// head accepts the round it gets the token back; others accept when the
/// token or beacon has passed through them.
pub struct BounceProbe;

impl VertexProgram for BounceProbe {
    type LocalState = ProbeState;

    fn init(&self, ctx: &InitCtx) -> ProbeState {
        ProbeState {
            stack: RecursiveLabelStack::decode(ctx.label),
            parent_port: None,
            seen_return: false,
            got_token: false,
            sending_leaf: false,
            failed: false,
            done_round: None,
        }
    }

    fn step(
        &self,
        st: &mut ProbeState,
        inbox: &[Option<Bits>],
        tick: OracleTick,
        out: &mut Outbox,
    ) -> Decision {
        if st.failed {
            return Decision::Reject;
        }
        if st.stack.is_none() {
            return st.fail();
        }
        let mut emit_down = Frame::default();
        let mut emit_up = Frame::default();
        if tick.round == 1 {
            classify(st, inbox.len());
            if st.pos() == BlockPos::Head {
                st.got_token = true;
                emit_down.tok_down = true;
            }
        }
        let mut frames: Vec<Frame> = Vec::with_capacity(inbox.len());
        for slot in inbox {
            match slot {
                None => frames.push(Frame::default()),
                Some(bits) => match Frame::decode(bits) {
                    Some(f) => frames.push(f),
                    None => return st.fail(),
                },
            }
        }
        let parent = st.parent_port.map(|p| frames[p]).unwrap_or_default();
        if parent.tok_down {
            if st.got_token {
                return st.fail();
            }
            st.got_token = true;
            let children = inbox.len() - usize::from(st.parent_port.is_some());
            match st.pos() {
                BlockPos::Tail => emit_up.tok_up = true,
                _ if children == 0 => st.sending_leaf = true,
                _ => emit_down.tok_down = true,
            }
        }
        let mut tok_up_any = false;
        let mut all_up_or_leaf = true;
        let mut all_leaf = !frames.is_empty();
        for (port, f) in frames.iter().enumerate() {
            if Some(port) == st.parent_port {
                continue;
            }
            tok_up_any |= f.tok_up;
            all_up_or_leaf &= f.tok_up || f.leaf_beacon;
            all_leaf &= f.leaf_beacon;
        }
        if tok_up_any {
            if st.seen_return || !all_up_or_leaf || !st.got_token {
                return st.fail();
            }
            st.seen_return = true;
            if st.pos() == BlockPos::Head {
                st.done_round = Some(tick.round);
            } else {
                emit_up.tok_up = true;
            }
        }
        if st.sending_leaf {
            emit_up.leaf_beacon = true;
        }
        for port in 0..out.degree() {
            if Some(port) == st.parent_port {
                if !emit_up.is_empty() {
                    out.send(port, emit_up.encode());
                }
            } else if !emit_down.is_empty() {
                out.send(port, emit_down.encode());
            }
        }
        // Everyone settles once the head has seen the return; the probe
        // just runs to a fixed horizon and reports per-vertex success.
        if st.seen_return || st.sending_leaf || st.pos() == BlockPos::Tail && st.got_token {
            Decision::Accept
        } else if all_leaf && st.got_token {
            if st.pos() == BlockPos::Head {
                st.done_round = Some(tick.round);
                Decision::Accept
            } else {
                st.sending_leaf = true;
                Decision::Continue
            }
        } else {
            Decision::Continue
        }
    }
}

/// Echo probe: a token travels head to tail only. Receiving it from a
/// child is a failure; a head receiving it from its parent is a failure.
pub struct EchoProbe;

impl VertexProgram for EchoProbe {
    type LocalState = ProbeState;

    fn init(&self, ctx: &InitCtx) -> ProbeState {
        ProbeState {
            stack: RecursiveLabelStack::decode(ctx.label),
            parent_port: None,
            seen_return: false,
            got_token: false,
            sending_leaf: false,
            failed: false,
            done_round: None,
        }
    }

    fn step(
        &self,
        st: &mut ProbeState,
        inbox: &[Option<Bits>],
        tick: OracleTick,
        out: &mut Outbox,
    ) -> Decision {
        if st.failed {
            return Decision::Reject;
        }
        if st.stack.is_none() {
            return st.fail();
        }
        if tick.round == 1 {
            classify(st, inbox.len());
            if st.pos() == BlockPos::Head {
                let mut f = Frame::default();
                f.tok_down = true;
                for port in 0..out.degree() {
                    out.send(port, f.encode());
                }
            }
            return Decision::Continue;
        }
        for (port, slot) in inbox.iter().enumerate() {
            let Some(bits) = slot else { continue };
            let Some(f) = Frame::decode(bits) else {
                return st.fail();
            };
            if !f.tok_down {
                return st.fail();
            }
            if Some(port) != st.parent_port {
                return st.fail(); // token from a child
            }
            if st.pos() == BlockPos::Head {
                return st.fail(); // head hears it from its parent
            }
            st.got_token = true;
            if st.pos() == BlockPos::Mid {
                let mut f = Frame::default();
                f.tok_down = true;
                for p in 0..out.degree() {
                    if Some(p) != st.parent_port {
                        out.send(p, f.encode());
                    }
                }
            } else {
                st.done_round = Some(tick.round);
            }
        }
        if st.got_token && st.pos() == BlockPos::Tail {
            Decision::Accept
        } else {
            Decision::Continue
        }
    }
}

/// Labels a configuration as a single oriented block: vertex depths come
/// from a BFS at `root`, the block has length `len`, deeper vertices are
/// mids unless they sit at exactly len-1.
pub fn single_block_stack(
    g: &crate::graph::GraphConfig,
    root: usize,
    len: u64,
) -> Vec<Bits> {
    let depth = g.bfs_distances(root);
    (0..g.n())
        .map(|v| {
            let d = depth[v] as u64;
            let pos = if d == 0 {
                BlockPos::Head
            } else if d == len - 1 {
                BlockPos::Tail
            } else {
                BlockPos::Mid
            };
            RecursiveLabelStack {
                orientation: (d % 3) as u8,
                distance_bit: false,
                levels: vec![(pos, false)],
            }
            .encode()
        })
        .collect()
}

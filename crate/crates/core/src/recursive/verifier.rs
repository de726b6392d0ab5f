//! The distributed verifier for recursive label stacks.
//!
//! Everything is event driven: no vertex ever stores a round number or a
//! block length. The run begins with a fixed ten-round prologue (label
//! exchange plus a constant ancestor window that settles the deepest
//! level), then works through the levels from deepest to level 1. Per
//! level:
//!
//!  - block heads bounce a token to their tails and back; sub-block heads
//!    tally rounds at full rate until the token passes them downward and
//!    at half rate until it passes back up, which lands every sub-block
//!    counter on length-1 exactly;
//!  - the head floods a stop signal; sub-tails assert their counter's top
//!    bit and start streaming the counter shares to the next sub-block,
//!    members pulled in by a rising start token;
//!  - receivers claim the stream record whose sub-block color differs
//!    from theirs, timed by claim beacons rising from the tail, and
//!    compare it with their own share;
//!  - at level 1 the blocks then add their verified length (plus one)
//!    into the received distance shares with a rippling carry chain and
//!    stream the result one block down for the distance comparison;
//!  - completion beacons rise to the head, which floods the level exit.
//!
//! Leaf-truncated regions resolve vacuously: leaves answer the bounce
//! with a persistent leaf beacon and claims degrade to vacuous beacons,
//! so nothing below a missing tail is ever asserted. The root block's
//! head covers its own first sub-block (which has no stream source) with
//! a dummy-stream token, and marks its distance-add chain so the root
//! block checks its distance shares are zero.

use crate::acyclic::BlockPos;
use crate::bits::ceil_log2;
use crate::engine::{Decision, InitCtx, OracleTick, Outbox, StateBits, VertexProgram};

use super::frame::{Frame, LevelLabel};
use super::RecursiveLabelStack;

pub struct RecursiveVerifier;

// Debug-only bookkeeping: init runs once per vertex in index order, so a
// counter at init time recovers vertex identities for trace output within
// a single run.
thread_local! {
    static DEBUG_INIT: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rate {
    Off,
    Full,
    Half { parity: bool },
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct WindowEntry {
    pos: BlockPos,
    color: bool,
    dist: bool,
}

const WINDOW: usize = 8;

pub struct RecState {
    debug_id: usize,
    stack: Option<RecursiveLabelStack>,
    parent_port: Option<usize>,
    children: usize,
    /// Base-window ancestors (deepest level), anc_1 .. anc_WINDOW.
    window: [Option<WindowEntry>; WINDOW],
    chain_ended: bool,
    /// Active level, counting down to 1; 0 while in the prologue.
    level: usize,
    got_lx: bool,
    got_tok_down: bool,
    got_tok_up: bool,
    got_stop: bool,
    rate: Rate,
    cnt_bit: bool,
    injected: bool,
    claimed: bool,
    vacuous: bool,
    np_covered: bool,
    /// Partial block: run every claim on schedule but compare nothing.
    no_compare: bool,
    sending_leaf: bool,
    // Level-1 distance machinery.
    d_ready: bool,
    dcount_bit: bool,
    d_injected: bool,
    d_claimed: bool,
    d_vacuous: bool,
    d_np: bool,
    done: bool,
    failed: bool,
}

impl StateBits for RecState {
    fn state_bits(&self) -> usize {
        let stack = self.stack.as_ref().map_or(1, |s| 3 + 3 * s.k());
        let port = self.parent_port.map_or(1, |p| 1 + ceil_log2(p as u64 + 2));
        let window = 2 + WINDOW * 5;
        let level = 3;
        let flags = 18;
        stack + port + window + level + flags
    }
}

impl RecState {
    fn fail(&mut self) -> Decision {
        self.failed = true;
        Decision::Reject
    }

    fn stack_ref(&self) -> &RecursiveLabelStack {
        self.stack.as_ref().expect("checked before use")
    }

    /// Block position at the active level.
    fn pos(&self) -> BlockPos {
        self.stack_ref().levels[self.level - 1].0
    }

    fn color(&self) -> bool {
        self.stack_ref().levels[self.level - 1].1
    }

    /// Position and color one level deeper (the sub-block structure).
    fn sub_pos(&self) -> BlockPos {
        self.stack_ref().levels[self.level].0
    }

    fn sub_color(&self) -> bool {
        self.stack_ref().levels[self.level].1
    }

    fn is_root(&self) -> bool {
        self.parent_port.is_none()
    }

    fn xfer_resolved(&self) -> bool {
        self.claimed || self.vacuous || self.np_covered
    }

    fn d_resolved(&self) -> bool {
        self.d_claimed || self.d_vacuous || self.d_np
    }
}

/// Transient view of one round's child messages.
#[derive(Default)]
struct ChildView {
    any: bool,
    tok_up_count: usize,
    /// Every child shows a token or a leaf beacon this round.
    tok_up_or_leaf_all: bool,
    leaf_all: bool,
    t_start: bool,
    d_start: bool,
    claimed_any: bool,
    claim_or_vac_all: bool,
    vac_all: bool,
    d_claimed_any: bool,
    d_claim_or_vac_all: bool,
    d_vac_all: bool,
    done_all: bool,
}

struct Emit {
    down: Frame,
    up: Frame,
}

impl Emit {
    fn new() -> Self {
        Emit {
            down: Frame::default(),
            up: Frame::default(),
        }
    }

    fn send(self, st: &RecState, out: &mut Outbox) {
        for port in 0..out.degree() {
            if Some(port) == st.parent_port {
                if !self.up.is_empty() {
                    out.send(port, self.up.encode());
                }
            } else if !self.down.is_empty() {
                out.send(port, self.down.encode());
            }
        }
    }
}

impl RecursiveVerifier {
    fn enter_level(&self, st: &mut RecState, emit: &mut Emit, level: usize) -> Result<(), &'static str> {
        st.level = level;
        st.got_lx = false;
        st.got_tok_down = false;
        st.got_tok_up = false;
        st.got_stop = false;
        st.rate = Rate::Off;
        st.cnt_bit = false;
        st.injected = false;
        st.claimed = false;
        st.vacuous = false;
        st.np_covered = false;
        st.no_compare = false;
        st.sending_leaf = false;
        st.d_ready = false;
        st.dcount_bit = false;
        st.d_injected = false;
        st.d_claimed = false;
        st.d_vacuous = false;
        st.d_np = false;
        st.done = false;

        let pos = st.pos();
        // Heads and tails persist downward: deeper blocks tile this one.
        if pos == BlockPos::Head && st.sub_pos() != BlockPos::Head {
            return Err("align-head");
        }
        if pos == BlockPos::Tail && st.sub_pos() != BlockPos::Tail {
            return Err("align-tail");
        }
        if st.is_root() && pos != BlockPos::Head {
            return Err("root-not-head");
        }
        let stack = st.stack_ref();
        emit.down.lx = Some(LevelLabel {
            pos_bits: pos.encode_u64(),
            color: stack.levels[level - 1].1,
            dist: level == 1 && stack.distance_bit,
        });
        if st.sub_pos() == BlockPos::Head {
            st.rate = Rate::Full;
        }
        if pos == BlockPos::Head {
            st.got_tok_down = true;
            st.rate = Rate::Half { parity: false };
            emit.down.tok_down = true;
            if st.children == 0 {
                // A block of one vertex dangling at a leaf: the bounce is
                // vacuously complete.
                self.count_done(st, emit, true);
            }
        }
        Ok(())
    }

    /// The head learned its bounce is over: freeze and flood the stop.
    /// A partial bounce (ended in leaves rather than the tail) leaves the
    /// counters meaningless, so the whole block resolves vacuously.
    fn count_done(&self, st: &mut RecState, emit: &mut Emit, partial: bool) {
        st.got_tok_up = true;
        st.got_stop = true;
        st.rate = Rate::Frozen;
        emit.down.stop_flood = Some(partial);
        if partial {
            st.no_compare = true;
        }
        if st.is_root() {
            st.np_covered = true;
            emit.down.np = true;
        }
    }

    /// Advance the counter bit by one, emitting a carry downward. A carry
    /// out of a sub-tail means the tally exceeded the sub-block capacity;
    /// on a dead branch (no block tail below) the tally is meaningless and
    /// the carry is dropped instead.
    fn bump_counter(&self, st: &mut RecState, emit: &mut Emit) -> Result<(), &'static str> {
        if st.cnt_bit {
            st.cnt_bit = false;
            if st.sub_pos() == BlockPos::Tail {
                if !st.sending_leaf {
                    return Err("counter-overflow");
                }
            } else {
                emit.down.carry = true;
            }
        } else {
            st.cnt_bit = true;
        }
        Ok(())
    }

    /// Start the counter-share stream into the next sub-block.
    fn start_stream(&self, st: &mut RecState, emit: &mut Emit) {
        st.injected = true;
        emit.down.rec.set(st.sub_color(), st.cnt_bit);
        emit.up.t_start = true;
    }

    /// Begin the distance-add chain at a level-1 head: fold the verified
    /// block length (counter + 1) into the received distance value.
    fn start_dadd(&self, st: &mut RecState, emit: &mut Emit) -> Result<(), &'static str> {
        let sum = st.stack_ref().distance_bit as u8 + st.cnt_bit as u8 + 1;
        st.dcount_bit = sum & 1 == 1;
        st.d_ready = true;
        let carry = sum >> 1 == 1;
        let window = st.sub_pos() != BlockPos::Tail;
        let root = st.is_root();
        emit.down.dadd = Some((carry, window, root));
        if root {
            st.d_np = true;
            if st.stack_ref().distance_bit {
                return Err("dadd-root-nonzero"); // the root block holds zero
            }
        }
        Ok(())
    }

    fn start_d_stream(&self, st: &mut RecState, emit: &mut Emit) {
        st.d_injected = true;
        emit.down.d_rec.set(st.color(), st.dcount_bit);
        emit.up.d_start = true;
    }
}

impl VertexProgram for RecursiveVerifier {
    type LocalState = RecState;

    fn init(&self, ctx: &InitCtx) -> RecState {
        let debug_id = DEBUG_INIT.with(|c| {
            let v = c.get();
            c.set(v + 1);
            v
        });
        RecState {
            debug_id,
            stack: RecursiveLabelStack::decode(ctx.label),
            parent_port: None,
            children: ctx.degree,
            window: [None; WINDOW],
            chain_ended: false,
            level: 0,
            got_lx: false,
            got_tok_down: false,
            got_tok_up: false,
            got_stop: false,
            rate: Rate::Off,
            cnt_bit: false,
            injected: false,
            claimed: false,
            vacuous: false,
            np_covered: false,
            no_compare: false,
            sending_leaf: false,
            d_ready: false,
            dcount_bit: false,
            d_injected: false,
            d_claimed: false,
            d_vacuous: false,
            d_np: false,
            done: false,
            failed: false,
        }
    }

    fn step(
        &self,
        st: &mut RecState,
        inbox: &[Option<crate::bits::Bits>],
        tick: OracleTick,
        out: &mut Outbox,
    ) -> Decision {
        if st.failed {
            return Decision::Reject;
        }
        let Some(stack) = st.stack.clone() else {
            return st.fail();
        };
        let k = stack.k();
        let base = stack.levels[k - 1];
        let mut emit = Emit::new();

        // Round 1: hello with orientation, stack height, base label.
        if tick.round == 1 {
            let mut hello = Frame::default();
            hello.hello = Some((
                stack.orientation,
                k as u8,
                LevelLabel {
                    pos_bits: base.0.encode_u64(),
                    color: base.1,
                    dist: stack.distance_bit,
                },
            ));
            out.broadcast(&hello.encode());
            return Decision::Continue;
        }

        // Decode this round's frames.
        let mut frames: Vec<Option<Frame>> = Vec::with_capacity(inbox.len());
        for slot in inbox {
            match slot {
                None => frames.push(None),
                Some(bits) => match Frame::decode(bits) {
                    Some(f) => frames.push(Some(f)),
                    None => return st.fail(),
                },
            }
        }

        // Round 2: classify neighbors, base-level local rules.
        if tick.round == 2 {
            let mut parent_hello: Option<LevelLabel> = None;
            for (port, f) in frames.iter().enumerate() {
                let Some(f) = f else { return st.fail() };
                let Some((a, their_k, lab)) = f.hello else {
                    return st.fail();
                };
                if a > 2 || their_k as usize != k || lab.pos().is_none() {
                    return st.fail();
                }
                if a == (stack.orientation + 2) % 3 {
                    if st.parent_port.is_some() {
                        return st.fail();
                    }
                    st.parent_port = Some(port);
                    parent_hello = Some(lab);
                } else if a != (stack.orientation + 1) % 3 {
                    return st.fail();
                }
            }
            st.children = inbox.len() - usize::from(st.parent_port.is_some());
            // Base-level local rules against the parent.
            let head_pred = match &parent_hello {
                None => true,
                Some(p) => p.pos() == Some(BlockPos::Tail),
            };
            if (base.0 == BlockPos::Head) != head_pred {
                return st.fail();
            }
            if let Some(p) = &parent_hello {
                let parent_tail = p.pos() == Some(BlockPos::Tail);
                if (base.1 == p.color) != !parent_tail {
                    return st.fail();
                }
                st.window[0] = Some(WindowEntry {
                    pos: p.pos().unwrap(),
                    color: p.color,
                    dist: p.dist,
                });
                emit.down.base_relay = Some(*p);
            } else {
                st.chain_ended = true;
            }
            emit.send(st, out);
            return Decision::Continue;
        }

        // Rounds 3..=WINDOW+1: relay the ancestor chain of base labels.
        if (tick.round as usize) <= WINDOW + 1 {
            let idx = tick.round as usize - 2;
            let parent_frame = st.parent_port.and_then(|p| frames[p].as_ref());
            match parent_frame.and_then(|f| f.base_relay) {
                Some(lab) => {
                    if st.chain_ended || lab.pos().is_none() {
                        return st.fail();
                    }
                    st.window[idx] = Some(WindowEntry {
                        pos: lab.pos().unwrap(),
                        color: lab.color,
                        dist: lab.dist,
                    });
                    emit.down.base_relay = Some(lab);
                }
                None => st.chain_ended = true,
            }
            // No other traffic is legal during the window.
            for (port, f) in frames.iter().enumerate() {
                if let Some(f) = f {
                    let mut allowed = Frame::default();
                    allowed.base_relay = f.base_relay;
                    if *f != allowed || (Some(port) != st.parent_port && !f.is_empty()) {
                        return st.fail();
                    }
                }
            }
            emit.send(st, out);
            return Decision::Continue;
        }

        // Round WINDOW+2: the base checks; then enter the first working
        // level or finish outright.
        if tick.round as usize == WINDOW + 2 {
            if !self.base_checks(st, &stack) {
                return st.fail();
            }
            if k == 1 {
                return Decision::Accept;
            }
            if self.enter_level(st, &mut emit, k - 1).is_err() {
                return st.fail();
            }
            emit.send(st, out);
            return Decision::Continue;
        }

        // General per-level machine.
        let decision = self.level_round(st, &frames, &mut emit, tick.round);
        emit.send(st, out);
        match decision {
            Ok(d) => d,
            Err(site) => {
                if std::env::var_os("PLS_RVERIFY_TRACE").is_some() {
                    eprintln!(
                        "round {} v{} level {}: reject at {site}",
                        tick.round,
                        st.debug_id,
                        st.level,
                    );
                }
                st.failed = true;
                Decision::Reject
            }
        }
    }
}

impl RecursiveVerifier {
    /// Window checks for the deepest level: some head within four steps,
    /// uniform lengths against the parent block, offsets inside the
    /// parent length, and (single-level stacks) the distance arithmetic.
    fn base_checks(&self, st: &mut RecState, stack: &RecursiveLabelStack) -> bool {
        let k = stack.k();
        let base = stack.levels[k - 1];
        // Cross-level alignment within the stack.
        for i in 0..k - 1 {
            let (pos, _) = stack.levels[i];
            let (deeper, _) = stack.levels[i + 1];
            if pos == BlockPos::Head && deeper != BlockPos::Head {
                return false;
            }
            if pos == BlockPos::Tail && deeper != BlockPos::Tail {
                return false;
            }
        }
        let chain_len = st.window.iter().take_while(|w| w.is_some()).count();
        let at = |j: usize| -> Option<&WindowEntry> {
            if j == 0 {
                None // callers use `base` for self
            } else {
                st.window.get(j - 1).and_then(Option::as_ref)
            }
        };
        let pos_at = |j: usize| -> Option<BlockPos> {
            if j == 0 {
                Some(base.0)
            } else {
                at(j).map(|w| w.pos)
            }
        };
        // Own offset: distance to the nearest head at or above, <= 3.
        let Some(offset) = (0..=3.min(chain_len)).find(|&j| pos_at(j) == Some(BlockPos::Head))
        else {
            return false;
        };
        // The parent block, if any: from the head's parent (a tail) up to
        // the next head. Its length bounds everything.
        let parent_len = if chain_len > offset {
            let Some(j2) = (offset + 1..=(offset + 4).min(chain_len))
                .find(|&j| pos_at(j) == Some(BlockPos::Head))
            else {
                return false;
            };
            Some(j2 - offset)
        } else {
            None
        };
        if let Some(lp) = parent_len {
            if offset >= lp {
                return false;
            }
            if (base.0 == BlockPos::Tail) != (offset == lp - 1) {
                return false;
            }
        }
        if k > 1 {
            return true;
        }
        // Single-level stack: the whole distance check fits the window.
        let dist_at = |j: usize| -> bool {
            if j == 0 {
                stack.distance_bit
            } else {
                at(j).map(|w| w.dist).unwrap_or(false)
            }
        };
        if chain_len == offset && stack.distance_bit {
            return false; // the root block holds value zero
        }
        if let Some(lp) = parent_len {
            let j2 = offset + lp;
            let mut parent_value = 0u64;
            for q in 0..lp {
                parent_value |= (dist_at(j2 - q) as u64) << q;
            }
            let incremented = parent_value + lp as u64;
            if incremented >> lp != 0 {
                return false; // overflow past the block capacity
            }
            if dist_at(0) != ((incremented >> offset) & 1 == 1) {
                return false;
            }
            if base.0 == BlockPos::Tail {
                let mut own = 0u64;
                for j in 0..=offset {
                    own |= (dist_at(j) as u64) << (offset - j);
                }
                if own == 0 {
                    return false; // non-root block with value zero
                }
            }
        }
        true
    }

    /// One round of the per-level machine (rounds after the prologue).
    fn level_round(
        &self,
        st: &mut RecState,
        frames: &[Option<Frame>],
        emit: &mut Emit,
        debug_round: u64,
    ) -> Result<Decision, &'static str> {
        let _ = debug_round;
        // Scheduled counter work first: this round's increment happens
        // before any token that might change the rate.
        match st.rate {
            Rate::Full => self.bump_counter(st, emit)?,
            Rate::Half { parity } => {
                let parity = !parity;
                st.rate = Rate::Half { parity };
                if !parity {
                    self.bump_counter(st, emit)?;
                }
            }
            Rate::Off | Rate::Frozen => {}
        }

        let mut parent_frame = st
            .parent_port
            .and_then(|p| frames[p].as_ref())
            .cloned()
            .unwrap_or_default();
        // Direction validation: no upward-only field may come from the
        // parent, and vice versa.
        if parent_frame.tok_up
            || parent_frame.leaf_beacon
            || parent_frame.t_start
            || parent_frame.d_start
            || parent_frame.claimed_beacon
            || parent_frame.vacuous_beacon
            || parent_frame.done_beacon
            || parent_frame.d_claimed_beacon
            || parent_frame.d_vacuous_beacon
            || parent_frame.hello.is_some()
            || parent_frame.base_relay.is_some()
        {
            return Err("parent-sent-up-fields");
        }
        let mut child = ChildView {
            tok_up_or_leaf_all: true,
            leaf_all: true,
            claim_or_vac_all: true,
            vac_all: true,
            d_claim_or_vac_all: true,
            d_vac_all: true,
            done_all: true,
            ..ChildView::default()
        };
        let mut any_children = false;
        for (port, f) in frames.iter().enumerate() {
            if Some(port) == st.parent_port {
                continue;
            }
            any_children = true;
            let f = f.clone().unwrap_or_default();
            if f.lx.is_some()
                || f.tok_down
                || f.stop_flood.is_some()
                || f.np
                || f.carry
                || !f.rec.is_empty()
                || f.exit_flood
                || f.dadd.is_some()
                || !f.d_rec.is_empty()
                || f.hello.is_some()
                || f.base_relay.is_some()
            {
                return Err("child-sent-down-fields");
            }
            child.any = true;
            child.tok_up_count += usize::from(f.tok_up);
            child.tok_up_or_leaf_all &= f.tok_up || f.leaf_beacon;
            child.leaf_all &= f.leaf_beacon;
            child.t_start |= f.t_start;
            child.d_start |= f.d_start;
            child.claimed_any |= f.claimed_beacon;
            child.claim_or_vac_all &= f.claimed_beacon || f.vacuous_beacon;
            child.vac_all &= f.vacuous_beacon;
            child.d_claimed_any |= f.d_claimed_beacon;
            child.d_claim_or_vac_all &= f.d_claimed_beacon || f.d_vacuous_beacon;
            child.d_vac_all &= f.d_vacuous_beacon;
            child.done_all &= f.done_beacon;
        }
        if !any_children {
            child.tok_up_or_leaf_all = false;
            child.leaf_all = false;
            child.claim_or_vac_all = false;
            child.vac_all = false;
            child.d_claim_or_vac_all = false;
            child.d_vac_all = false;
            child.done_all = true; // nothing to wait for below
        }

        // Exit flood: the previous level's head declared the block done.
        // The same frame may already carry next-level traffic (the parent
        // is one round ahead), so processing continues below on the new
        // level after the switch.
        if parent_frame.exit_flood {
            if !st.done {
                return Err("exit-before-done");
            }
            if st.pos() != BlockPos::Tail {
                emit.down.exit_flood = true;
            }
            // Stream records can ride the same frame as the exit wave
            // (the root block's distance stream trails its early start,
            // since that block resolves without any claims); they belong
            // to the finished level and are relayed onward untouched.
            emit.down.rec = std::mem::take(&mut parent_frame.rec);
            emit.down.d_rec = std::mem::take(&mut parent_frame.d_rec);
            if st.level == 1 {
                return Ok(Decision::Accept);
            }
            let level = st.level - 1;
            self.enter_level(st, emit, level)?;
        }

        // Stream traffic that arrives before this level's count token is
        // a leftover of the previous level crossing a block boundary out
        // of sync (a leaf-truncated block exits on its own schedule); it
        // concerns nobody here. Counter carries are exempt: a sub-head's
        // full-rate tally legitimately sends them ahead of the token.
        if !st.got_tok_down {
            parent_frame.stop_flood = None;
            parent_frame.np = false;
            parent_frame.rec = Default::default();
            parent_frame.dadd = None;
            parent_frame.d_rec = Default::default();
        }

        // Label exchange from the parent.
        if let Some(lx) = parent_frame.lx {
            if st.got_lx || st.level == 0 {
                return Err("double-lx");
            }
            st.got_lx = true;
            let Some(ppos) = lx.pos() else { return Err("lx-bad-pos2") };
            let head_pred = ppos == BlockPos::Tail;
            if (st.pos() == BlockPos::Head) != head_pred {
                return Err("lx-bad-pos");
            }
            if (st.color() == lx.color) != !head_pred {
                return Err("lx-head-rule");
            }
        }

        // Count token moving down.
        if parent_frame.tok_down {
            if st.got_tok_down {
                return Err("lx-color-rule");
            }
            st.got_tok_down = true;
            if let Rate::Full = st.rate {
                st.rate = Rate::Half { parity: false };
            }
            match st.pos() {
                BlockPos::Tail => emit.up.tok_up = true,
                _ if st.children == 0 => st.sending_leaf = true,
                _ => emit.down.tok_down = true,
            }
        }

        // Count token coming back up.
        if child.tok_up_count > 0 {
            if !st.got_tok_down || st.got_tok_up || !child.tok_up_or_leaf_all {
                return Err("tok-up-bad");
            }
            st.got_tok_up = true;
            if let Rate::Half { .. } = st.rate {
                st.rate = Rate::Frozen;
            }
            if st.pos() == BlockPos::Head {
                self.count_done(st, emit, false);
            } else {
                emit.up.tok_up = true;
            }
        }

        // Leaf-only subtrees propagate leafness; their counters can
        // never be measured against a returning token, so they freeze.
        if child.leaf_all && st.got_tok_down && !st.got_tok_up {
            match st.pos() {
                BlockPos::Head => self.count_done(st, emit, true),
                BlockPos::Tail => return Err("leaf-under-tail"),
                BlockPos::Mid => {
                    st.sending_leaf = true;
                    st.rate = Rate::Frozen;
                }
            }
        }
        if st.sending_leaf {
            st.rate = Rate::Frozen;
        }

        // Counter carry from above.
        if parent_frame.carry {
            self.bump_counter(st, emit)?;
        }

        // Count-done flood.
        if let Some(partial) = parent_frame.stop_flood {
            if st.got_stop || !st.got_tok_down {
                return Err("stop-bad");
            }
            st.got_stop = true;
            st.rate = Rate::Frozen;
            if partial {
                // Counter asserts and stream compares in this block are
                // void (the bounce never measured the full length), but
                // claims still run on schedule so the block's exit stays
                // aligned with its complete peers.
                st.no_compare = true;
            } else if st.sub_pos() == BlockPos::Tail && !st.sending_leaf {
                // The tally of a complete sub-block lands in the top half
                // of its range: the tail's bit is the top bit.
                if !st.cnt_bit {
                    return Err("subtail-count-low");
                }
                self.start_stream(st, emit);
            }
            if st.pos() != BlockPos::Tail {
                emit.down.stop_flood = Some(partial);
            }
        }

        // Dummy stream covering the root block's first sub-block. A
        // vertex already covered (a partial block) absorbs it silently.
        if parent_frame.np && !st.np_covered {
            st.np_covered = true;
            if st.sub_pos() != BlockPos::Tail {
                emit.down.np = true;
            }
        }

        // Stream pull: inject our counter share into the downward stream.
        if child.t_start {
            if !st.got_stop || st.injected {
                return Err("tstart-bad");
            }
            self.start_stream(st, emit);
            if st.sub_pos() == BlockPos::Head {
                emit.up.t_start = false; // the pull stops at the sub head
            }
        }

        // Stream records from above: claim ours from the lane of the
        // other color, relay everything else.
        if !parent_frame.rec.is_empty() && !st.got_stop {
            return Err("rec-before-stop");
        }
        let my_rec = parent_frame.rec.get(!st.sub_color());
        if let Some(bit) = parent_frame.rec.get(st.sub_color()) {
            emit.down.rec.set(st.sub_color(), bit);
        }
        // Sub-tails claim on first sight; everyone else is timed by the
        // claim beacons rising from below. A sub-tail's children belong to
        // the next sub-block's stream, so their beacons mean nothing here.
        let is_sub_tail = st.sub_pos() == BlockPos::Tail;
        let trigger =
            !is_sub_tail && child.any && child.claim_or_vac_all && child.claimed_any;
        let skip_claims = st.np_covered || st.sending_leaf;
        if let Some(bit) = my_rec {
            if !st.claimed && !skip_claims && (is_sub_tail || trigger) {
                if !st.no_compare && bit != st.cnt_bit {
                    return Err("claim-mismatch");
                }
                st.claimed = true;
            } else {
                emit.down.rec.set(!st.sub_color(), bit);
            }
        } else if !st.claimed
            && !skip_claims
            && !st.no_compare
            && !st.vacuous
            && st.got_stop
            && trigger
        {
            // The trigger round must carry our record.
            return Err("trigger-without-record");
        }

        // Vacuous resolution: leaves, dead branches, covered subtrees.
        if st.got_stop && !st.claimed && !st.np_covered && !st.vacuous {
            let leaf_vac = st.children == 0 && st.sub_pos() != BlockPos::Tail;
            let covered = child.any && child.vac_all;
            if leaf_vac || covered || st.sending_leaf {
                st.vacuous = true;
            }
        }

        // Level-1 distance machinery.
        if st.level == 1 {
            if st.pos() == BlockPos::Head && st.xfer_resolved() && !st.d_ready {
                self.start_dadd(st, emit)?;
            }
            if let Some((carry_in, window, root)) = parent_frame.dadd {
                if st.d_ready || st.pos() == BlockPos::Head {
                    return Err("dadd-at-head-or-twice");
                }
                let own = st.stack_ref().distance_bit;
                let addend = window && st.cnt_bit;
                let sum = own as u8 + addend as u8 + carry_in as u8;
                st.dcount_bit = sum & 1 == 1;
                st.d_ready = true;
                let carry_out = sum >> 1 == 1;
                if st.pos() == BlockPos::Tail {
                    // Overflow past the block capacity can never match any
                    // deeper block's value; with no children the sum is
                    // simply never consumed.
                    if carry_out && st.children > 0 {
                        return Err("d-overflow");
                    }
                    self.start_d_stream(st, emit);
                } else {
                    emit.down.dadd =
                        Some((carry_out, window && st.sub_pos() != BlockPos::Tail, root));
                }
                if root {
                    st.d_np = true;
                    if own {
                        return Err("d-root-nonzero"); // the root block holds zero
                    }
                }
            }
            if child.d_start {
                if !st.d_ready || st.d_injected {
                    return Err("dstart-bad");
                }
                self.start_d_stream(st, emit);
                if st.pos() == BlockPos::Head {
                    emit.up.d_start = false;
                }
            }
            let my_d_rec = parent_frame.d_rec.get(!st.color());
            if let Some(bit) = parent_frame.d_rec.get(st.color()) {
                emit.down.d_rec.set(st.color(), bit);
            }
            let is_tail = st.pos() == BlockPos::Tail;
            let d_trigger =
                !is_tail && child.any && child.d_claim_or_vac_all && child.d_claimed_any;
            let skip_d = st.d_np || st.sending_leaf;
            if let Some(bit) = my_d_rec {
                let own_bit = st.stack_ref().distance_bit;
                if !st.d_claimed && !skip_d && (is_tail || d_trigger) {
                    if !st.no_compare && bit != own_bit {
                        return Err("d-claim-mismatch");
                    }
                    st.d_claimed = true;
                } else {
                    emit.down.d_rec.set(!st.color(), bit);
                }
            } else if !st.d_claimed && !skip_d && !st.no_compare && !st.d_vacuous && d_trigger
            {
                return Err("d-trigger-without-record");
            }
            // Vacuous distance resolution cannot wait for the add chain:
            // a dead branch's beacon must be up before its live sibling's
            // claim beacon or the parent would mistime its own claim.
            if st.got_stop && !st.d_claimed && !st.d_np && !st.d_vacuous {
                let leaf_vac = st.children == 0 && st.pos() != BlockPos::Tail;
                let covered = child.any && child.d_vac_all;
                if leaf_vac || covered || st.sending_leaf {
                    st.d_vacuous = true;
                }
            }
        }

        // Completion: counting closed, own claims resolved, and the
        // subtree within the block reports done. Tails border the next
        // blocks' heads, which run on their own schedule, so tails wait
        // for nobody below.
        let below_ok = st.pos() == BlockPos::Tail || child.done_all;
        let d_ok = st.level > 1 || (st.d_ready && st.d_resolved());
        if !st.done && st.got_stop && st.xfer_resolved() && d_ok && below_ok {
            st.done = true;
        }
        // Beacons persist while the level is active.
        if st.sending_leaf {
            emit.up.leaf_beacon = true;
        }
        if st.done {
            emit.up.done_beacon = true;
        }
        if st.claimed {
            emit.up.claimed_beacon = true;
        }
        if st.vacuous || st.np_covered {
            emit.up.vacuous_beacon = true;
        }
        if st.d_claimed {
            emit.up.d_claimed_beacon = true;
        }
        if st.d_vacuous || st.d_np {
            emit.up.d_vacuous_beacon = true;
        }

        // Heads close out their block once everything below reports done.
        if st.done && st.pos() == BlockPos::Head {
            emit.up = Frame::default();
            emit.down.exit_flood = true;
            if st.level == 1 {
                return Ok(Decision::Accept);
            }
            let level = st.level - 1;
            self.enter_level(st, emit, level)?;
        }
        Ok(Decision::Continue)
    }
}

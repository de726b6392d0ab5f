//! Per-round message frame of the recursive verifier.
//!
//! One fixed layout covers every phase: presence flags followed by the
//! payload bits of the fields that are present. A frame is only sent when
//! at least one field is set, so idle edges cost nothing and busy edges
//! cost a constant number of bits per round.

use crate::acyclic::BlockPos;
use crate::bits::Bits;

/// Label exchange for the active level: (position, color) and, at level 1,
/// the distance bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LevelLabel {
    pub pos_bits: u64,
    pub color: bool,
    pub dist: bool,
}

impl LevelLabel {
    pub fn pos(&self) -> Option<BlockPos> {
        BlockPos::decode_u64(self.pos_bits)
    }
}

/// Stream records in flight on one edge. Two streams can overlap on an
/// edge (a block's incoming and outgoing transfers), and adjacent blocks
/// alternate colors, so one lane per color suffices: lane[c] holds the
/// bit of a record whose sending block has color c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Lanes {
    pub lane: [Option<bool>; 2],
}

impl Lanes {
    pub fn is_empty(&self) -> bool {
        self.lane.iter().all(Option::is_none)
    }

    pub fn get(&self, color: bool) -> Option<bool> {
        self.lane[color as usize]
    }

    pub fn set(&mut self, color: bool, bit: bool) {
        self.lane[color as usize] = Some(bit);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Frame {
    /// Hello (round 1 only): orientation, stack height, base-level label.
    pub hello: Option<(u8, u8, LevelLabel)>,
    /// Base-window relay of an ancestor's base-level label.
    pub base_relay: Option<LevelLabel>,
    /// Active-level label exchange, parent to children.
    pub lx: Option<LevelLabel>,
    /// Count token moving down / back up.
    pub tok_down: bool,
    pub tok_up: bool,
    /// Persistent beacon: no block tail anywhere below this edge.
    pub leaf_beacon: bool,
    /// Count-finished flood from the block head. The payload marks a
    /// partial block (the bounce ended in leaves, not the tail), whose
    /// counters are meaningless and whose stream compares are skipped.
    pub stop_flood: Option<bool>,
    /// Dummy-stream trigger covering the root block's first sub-block.
    pub np: bool,
    /// Counter carry.
    pub carry: bool,
    /// Pull token: ancestors inject their stream records on receipt.
    pub t_start: bool,
    /// Counter-share stream records, one lane per sub-block color.
    pub rec: Lanes,
    /// Claim beacons: a real claim happened below / only vacuous ones.
    pub claimed_beacon: bool,
    pub vacuous_beacon: bool,
    /// Subtree finished the current level.
    pub done_beacon: bool,
    /// Level exit flood from the block head.
    pub exit_flood: bool,
    /// Distance addition chain: carry bit plus the addend-window flag,
    /// with the root marker for the zero check.
    pub dadd: Option<(bool, bool, bool)>,
    /// Pull token of the distance stream.
    pub d_start: bool,
    /// Distance stream records, one lane per block color.
    pub d_rec: Lanes,
    pub d_claimed_beacon: bool,
    pub d_vacuous_beacon: bool,
}

impl Frame {
    pub fn is_empty(&self) -> bool {
        *self == Frame::default()
    }

    pub fn encode(&self) -> Bits {
        let mut b = Bits::new();
        let mut flag = |cond: bool| b.push(cond);
        flag(self.hello.is_some());
        flag(self.base_relay.is_some());
        flag(self.lx.is_some());
        flag(self.tok_down);
        flag(self.tok_up);
        flag(self.leaf_beacon);
        flag(self.stop_flood.is_some());
        flag(self.np);
        flag(self.carry);
        flag(self.t_start);
        flag(self.rec.lane[0].is_some());
        flag(self.rec.lane[1].is_some());
        flag(self.claimed_beacon);
        flag(self.vacuous_beacon);
        flag(self.done_beacon);
        flag(self.exit_flood);
        flag(self.dadd.is_some());
        flag(self.d_start);
        flag(self.d_rec.lane[0].is_some());
        flag(self.d_rec.lane[1].is_some());
        flag(self.d_claimed_beacon);
        flag(self.d_vacuous_beacon);
        if let Some((a, k, l)) = self.hello {
            b.push_u64(a as u64, 2);
            b.push_u64(k as u64, 4);
            push_level(&mut b, l);
        }
        if let Some(l) = self.base_relay {
            push_level(&mut b, l);
        }
        if let Some(l) = self.lx {
            push_level(&mut b, l);
        }
        if let Some(partial) = self.stop_flood {
            b.push(partial);
        }
        for lane in self.rec.lane.iter().chain(self.d_rec.lane.iter()) {
            if let Some(bit) = lane {
                b.push(*bit);
            }
        }
        if let Some((carry, window, root)) = self.dadd {
            b.push(carry);
            b.push(window);
            b.push(root);
        }
        b
    }

    pub fn decode(bits: &Bits) -> Option<Frame> {
        const FLAGS: usize = 22;
        if bits.len() < FLAGS {
            return None;
        }
        let mut f = Frame::default();
        let mut at = FLAGS;
        let mut payload = |width: usize| -> Option<u64> {
            if at + width > bits.len() {
                return None;
            }
            let v = bits.read_u64(at, width);
            at += width;
            Some(v)
        };
        if bits.get(0) {
            let a = payload(2)? as u8;
            let k = payload(4)? as u8;
            let l = payload(4)?;
            f.hello = Some((a, k, unpack_level(l)));
        }
        if bits.get(1) {
            f.base_relay = Some(unpack_level(payload(4)?));
        }
        if bits.get(2) {
            f.lx = Some(unpack_level(payload(4)?));
        }
        f.tok_down = bits.get(3);
        f.tok_up = bits.get(4);
        f.leaf_beacon = bits.get(5);
        if bits.get(6) {
            f.stop_flood = Some(payload(1)? == 1);
        }
        f.np = bits.get(7);
        f.carry = bits.get(8);
        f.t_start = bits.get(9);
        for (i, lane) in [10usize, 11].into_iter().enumerate() {
            if bits.get(lane) {
                f.rec.lane[i] = Some(payload(1)? == 1);
            }
        }
        f.claimed_beacon = bits.get(12);
        f.vacuous_beacon = bits.get(13);
        f.done_beacon = bits.get(14);
        f.exit_flood = bits.get(15);
        let has_dadd = bits.get(16);
        f.d_start = bits.get(17);
        for (i, lane) in [18usize, 19].into_iter().enumerate() {
            if bits.get(lane) {
                f.d_rec.lane[i] = Some(payload(1)? == 1);
            }
        }
        if has_dadd {
            let v = payload(3)?;
            f.dadd = Some((v & 1 == 1, v >> 1 & 1 == 1, v >> 2 & 1 == 1));
        }
        f.d_claimed_beacon = bits.get(20);
        f.d_vacuous_beacon = bits.get(21);
        if at != bits.len() {
            return None;
        }
        Some(f)
    }
}

fn push_level(b: &mut Bits, l: LevelLabel) {
    b.push_u64(l.pos_bits, 2);
    b.push(l.color);
    b.push(l.dist);
}

fn unpack_level(v: u64) -> LevelLabel {
    LevelLabel {
        pos_bits: v & 3,
        color: v >> 2 & 1 == 1,
        dist: v >> 3 & 1 == 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let mut f = Frame::default();
        f.tok_down = true;
        f.rec.set(true, false);
        f.rec.set(false, true);
        f.stop_flood = Some(true);
        f.dadd = Some((true, false, true));
        f.d_rec.set(false, true);
        let bits = f.encode();
        assert_eq!(Frame::decode(&bits), Some(f));
        // Constant size: flags plus small payloads.
        assert!(bits.len() <= 40);

        let empty = Frame::default();
        assert!(empty.is_empty());
        assert_eq!(Frame::decode(&empty.encode()), Some(empty));
    }
}

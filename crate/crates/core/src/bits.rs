//! Bit strings.
//!
//! States, labels and messages are all raw bit strings. Index 0 is the first
//! bit; numeric conversions place the least significant bit at index 0.

use std::fmt;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Bits {
    raw: Vec<bool>,
}

impl Bits {
    pub fn new() -> Self {
        Bits { raw: Vec::new() }
    }

    pub fn zeros(len: usize) -> Self {
        Bits {
            raw: vec![false; len],
        }
    }

    /// Encodes `value` in `width` bits, least significant bit first.
    /// Bits of `value` beyond `width` are dropped.
    pub fn from_u64(value: u64, width: usize) -> Self {
        let raw = (0..width).map(|i| (value >> i) & 1 == 1).collect();
        Bits { raw }
    }

    /// Reads the string back as an integer, bit 0 least significant.
    /// Saturates on widths above 64 (callers never exceed that).
    pub fn to_u64(&self) -> u64 {
        let mut v = 0u64;
        for (i, &b) in self.raw.iter().enumerate().take(64) {
            if b {
                v |= 1 << i;
            }
        }
        v
    }

    pub fn from_bools(raw: Vec<bool>) -> Self {
        Bits { raw }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.raw[i]
    }

    pub fn set(&mut self, i: usize, b: bool) {
        self.raw[i] = b;
    }

    pub fn push(&mut self, b: bool) {
        self.raw.push(b);
    }

    pub fn extend(&mut self, other: &Bits) {
        self.raw.extend_from_slice(&other.raw);
    }

    pub fn slice(&self, start: usize, end: usize) -> Bits {
        Bits {
            raw: self.raw[start..end].to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.raw.iter().copied()
    }

    /// True iff every bit is zero (vacuously true when empty).
    pub fn is_zero(&self) -> bool {
        self.raw.iter().all(|&b| !b)
    }

    /// Pushes `width` bits of `value` onto the end, LSB first.
    pub fn push_u64(&mut self, value: u64, width: usize) {
        for i in 0..width {
            self.raw.push((value >> i) & 1 == 1);
        }
    }

    /// Reads `width` bits starting at `at` as an integer (LSB at `at`).
    pub fn read_u64(&self, at: usize, width: usize) -> u64 {
        let mut v = 0u64;
        for i in 0..width {
            if self.raw[at + i] {
                v |= 1 << i;
            }
        }
        v
    }

    /// Hex encoding of the bit string, low nibble first. The bit length is
    /// not recoverable from hex alone, so file formats carry it separately.
    pub fn to_hex(&self) -> String {
        if self.raw.is_empty() {
            return String::new();
        }
        let mut s = String::new();
        for chunk in self.raw.chunks(4) {
            let mut nib = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                if b {
                    nib |= 1 << i;
                }
            }
            s.push(char::from_digit(nib as u32, 16).unwrap());
        }
        s
    }

    pub fn from_hex(hex: &str, bit_len: usize) -> Result<Self, String> {
        let mut raw = Vec::with_capacity(bit_len);
        for ch in hex.chars() {
            let nib = ch
                .to_digit(16)
                .ok_or_else(|| format!("invalid hex digit {ch:?}"))?;
            for i in 0..4 {
                raw.push((nib >> i) & 1 == 1);
            }
        }
        if raw.len() < bit_len {
            return Err(format!(
                "hex {hex:?} holds {} bits, need {bit_len}",
                raw.len()
            ));
        }
        raw.truncate(bit_len);
        Ok(Bits { raw })
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.raw {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        Bits {
            raw: iter.into_iter().collect(),
        }
    }
}

/// ceil(log2(n)) for n >= 1; 0 for n <= 1.
pub fn ceil_log2(n: u64) -> usize {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros() as usize
    }
}

/// Number of times log2 must be applied to reach a value <= 1.
pub fn iter_log2(n: u64) -> usize {
    let mut x = n;
    let mut count = 0;
    while x > 1 {
        x = ceil_log2(x) as u64;
        count += 1;
    }
    count
}

/// Elias gamma code for x >= 0 (encodes x + 1): self-delimiting, about
/// 2*log2(x) + 1 bits. Used where variable-size integers ride in messages.
pub fn gamma_encode(x: u64, out: &mut Bits) {
    let v = x + 1;
    let n = 63 - v.leading_zeros() as usize;
    for _ in 0..n {
        out.push(false);
    }
    for i in (0..=n).rev() {
        out.push((v >> i) & 1 == 1);
    }
}

/// Decodes a gamma code starting at `at`; returns (value, next position).
pub fn gamma_decode(bits: &Bits, at: usize) -> Option<(u64, usize)> {
    let mut n = 0;
    let mut pos = at;
    while pos < bits.len() && !bits.get(pos) {
        n += 1;
        pos += 1;
    }
    if pos + n >= bits.len() + 1 || pos >= bits.len() {
        return None;
    }
    let mut v = 0u64;
    for _ in 0..=n {
        if pos >= bits.len() {
            return None;
        }
        v = (v << 1) | bits.get(pos) as u64;
        pos += 1;
    }
    Some((v - 1, pos))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u64_round_trip() {
        let b = Bits::from_u64(45, 6);
        assert_eq!(format!("{b:?}"), "101101".chars().rev().collect::<String>());
        assert_eq!(b.to_u64(), 45);
    }

    #[test]
    fn hex_round_trip() {
        for len in 0..20 {
            let b = Bits::from_u64(0xA5F3, len);
            let h = b.to_hex();
            assert_eq!(Bits::from_hex(&h, len).unwrap(), b);
        }
    }

    #[test]
    fn log_helpers() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(48), 6);
        assert_eq!(ceil_log2(64), 6);
        assert_eq!(ceil_log2(65), 7);
        assert_eq!(iter_log2(65536), 4);
        assert_eq!(iter_log2(16), 3);
        assert_eq!(iter_log2(2), 1);
        assert_eq!(iter_log2(1), 0);
    }

    #[test]
    fn gamma_round_trip() {
        let mut b = Bits::new();
        let values = [0u64, 1, 2, 5, 63, 64, 1000, u32::MAX as u64];
        for &v in &values {
            gamma_encode(v, &mut b);
        }
        let mut pos = 0;
        for &v in &values {
            let (got, next) = gamma_decode(&b, pos).unwrap();
            assert_eq!(got, v);
            pos = next;
        }
        assert_eq!(pos, b.len());
    }
}

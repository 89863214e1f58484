//! Word-level MIPS semantics at a configurable width.
//!
//! Production paths always use 32 bits. Narrower widths exist so that the
//! whole pipeline can be checked exhaustively; at width `w` immediates are
//! truncated to `w` bits and shifts by `w` or more saturate.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WordWidth(u8);

impl WordWidth {
    pub const W32: WordWidth = WordWidth(32);

    pub fn new(bits: u8) -> Option<WordWidth> {
        (1..=32).contains(&bits).then_some(WordWidth(bits))
    }

    pub fn bits(self) -> u32 {
        self.0 as u32
    }

    pub fn mask(self) -> u32 {
        if self.0 == 32 {
            u32::MAX
        } else {
            (1u32 << self.0) - 1
        }
    }

    pub fn truncate(self, v: u32) -> u32 {
        v & self.mask()
    }

    /// Signed reading of a `w`-bit pattern.
    pub fn signed(self, v: u32) -> i64 {
        let v = self.truncate(v) as i64;
        if v >> (self.0 - 1) & 1 == 1 {
            v - (1i64 << self.0)
        } else {
            v
        }
    }

    pub fn add(self, a: u32, b: u32) -> u32 {
        self.truncate(a.wrapping_add(b))
    }

    pub fn sub(self, a: u32, b: u32) -> u32 {
        self.truncate(a.wrapping_sub(b))
    }

    pub fn sll(self, v: u32, s: u32) -> u32 {
        if s >= self.bits() {
            0
        } else {
            self.truncate(v << s)
        }
    }

    pub fn srl(self, v: u32, s: u32) -> u32 {
        if s >= self.bits() {
            0
        } else {
            self.truncate(v) >> s
        }
    }

    pub fn sra(self, v: u32, s: u32) -> u32 {
        let s = s.min(self.bits() - 1);
        let shifted = self.signed(v) >> s;
        self.truncate(shifted as u32)
    }
}

impl Default for WordWidth {
    fn default() -> Self {
        WordWidth::W32
    }
}

impl fmt::Display for WordWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narrow_arithmetic() {
        let w = WordWidth::new(8).unwrap();
        assert_eq!(w.add(200, 100), 44);
        assert_eq!(w.sub(0, 1), 255);
        assert_eq!(w.signed(0x80), -128);
        assert_eq!(w.sra(0x80, 3), 0xF0);
        assert_eq!(w.sra(0x80, 20), 0xFF);
        assert_eq!(w.sll(0xFF, 9), 0);
        assert_eq!(w.srl(0xFF, 8), 0);
    }

    #[test]
    fn full_width_matches_host() {
        let w = WordWidth::W32;
        assert_eq!(w.sra(0x8000_0000, 31), u32::MAX);
        assert_eq!(w.sra(0x8000_0000, 3), 0xF000_0000);
        assert_eq!(w.sll(1, 31), 0x8000_0000);
        assert_eq!(w.add(u32::MAX, 1), 0);
        assert_eq!(WordWidth::new(0), None);
        assert_eq!(WordWidth::new(33), None);
    }
}

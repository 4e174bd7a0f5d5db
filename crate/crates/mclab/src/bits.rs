//! Bit strings of length at most 32, stored most-significant-bit first.
//!
//! These are the currency of the whole crate: machine outputs, distribution
//! support points, sampler seeds, and prefixes all use [`BitStr`]. Indexing
//! is 1-based (`bit(1)` is the leftmost bit) because every chain-rule
//! computation in the crate walks positions 1..=n.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Maximum supported length in bits.
pub const MAX_LEN: u32 = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitStrError {
    #[error("bit string longer than {MAX_LEN} bits: {0}")]
    TooLong(usize),
    #[error("invalid character {0:?} in bit string (expected '0' or '1')")]
    BadChar(char),
    #[error("value 0b{value:b} does not fit in {len} bits")]
    ValueOverflow { value: u32, len: u32 },
}

/// An immutable bit string, at most [`MAX_LEN`] bits, MSB first.
///
/// Ordering is shortlex: shorter strings sort first, equal lengths compare
/// numerically (which for fixed length is lexicographic on the bits).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BitStr {
    len: u8,
    value: u32,
}

impl BitStr {
    /// The empty string.
    pub fn empty() -> Self {
        BitStr { len: 0, value: 0 }
    }

    /// Builds a string of `len` bits whose MSB-first reading is `value`.
    pub fn new(value: u32, len: u32) -> Self {
        Self::try_new(value, len).expect("BitStr::new: value out of range")
    }

    pub fn try_new(value: u32, len: u32) -> Result<Self, BitStrError> {
        if len > MAX_LEN {
            return Err(BitStrError::TooLong(len as usize));
        }
        if len < 32 && (value >> len) != 0 {
            return Err(BitStrError::ValueOverflow { value, len });
        }
        Ok(BitStr { len: len as u8, value })
    }

    pub fn len(&self) -> u32 {
        u32::from(self.len)
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Numeric value of the MSB-first reading.
    pub fn value(&self) -> u32 {
        self.value
    }

    /// The i-th bit, 1-based; `bit(1)` is the leftmost.
    pub fn bit(&self, i: u32) -> u8 {
        assert!(i >= 1 && i <= self.len(), "bit index {i} out of 1..={}", self.len());
        ((self.value >> (self.len() - i)) & 1) as u8
    }

    /// First `k` bits.
    pub fn prefix(&self, k: u32) -> BitStr {
        assert!(k <= self.len(), "prefix {k} longer than string {}", self.len());
        if k == 0 {
            BitStr::empty()
        } else {
            BitStr { len: k as u8, value: self.value >> (self.len() - k) }
        }
    }

    /// Appends one bit.
    pub fn push(&self, b: u8) -> BitStr {
        assert!(b <= 1, "bit must be 0 or 1");
        assert!(self.len() < MAX_LEN, "push overflows {MAX_LEN} bits");
        BitStr { len: self.len + 1, value: (self.value << 1) | u32::from(b) }
    }

    /// Concatenation `self ‖ other`.
    pub fn concat(&self, other: &BitStr) -> BitStr {
        assert!(
            self.len() + other.len() <= MAX_LEN,
            "concat overflows {MAX_LEN} bits"
        );
        BitStr {
            len: self.len + other.len,
            value: (self.value << other.len()) | other.value,
        }
    }

    /// `copies` copies of `self`, concatenated.
    pub fn repeat(&self, copies: u32) -> BitStr {
        let mut out = BitStr::empty();
        for _ in 0..copies {
            out = out.concat(self);
        }
        out
    }

    /// Bits as a vector of 0/1 values, MSB first.
    pub fn bits(&self) -> Vec<u8> {
        (1..=self.len()).map(|i| self.bit(i)).collect()
    }

    pub fn from_bits(bits: &[u8]) -> BitStr {
        let mut out = BitStr::empty();
        for &b in bits {
            out = out.push(b);
        }
        out
    }

    /// All strings of length `len`, numerically ascending (lexicographic).
    pub fn all(len: u32) -> impl Iterator<Item = BitStr> {
        assert!(len <= 24, "full enumeration beyond 24 bits is never desk-scale");
        (0u64..(1u64 << len)).map(move |v| BitStr { len: len as u8, value: v as u32 })
    }
}

impl Ord for BitStr {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.len, self.value).cmp(&(other.len, other.value))
    }
}

impl PartialOrd for BitStr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 1..=self.len() {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitStr(\"{self}\")")
    }
}

impl FromStr for BitStr {
    type Err = BitStrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > MAX_LEN as usize {
            return Err(BitStrError::TooLong(s.len()));
        }
        let mut out = BitStr::empty();
        for c in s.chars() {
            match c {
                '0' => out = out.push(0),
                '1' => out = out.push(1),
                other => return Err(BitStrError::BadChar(other)),
            }
        }
        Ok(out)
    }
}

impl Serialize for BitStr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitStr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_indexing() {
        let x: BitStr = "01101".parse().unwrap();
        assert_eq!(x.len(), 5);
        assert_eq!(x.value(), 0b01101);
        assert_eq!(x.bit(1), 0);
        assert_eq!(x.bit(2), 1);
        assert_eq!(x.bit(5), 1);
        assert_eq!(x.to_string(), "01101");
        assert_eq!(x.prefix(3).to_string(), "011");
        assert_eq!(x.prefix(0), BitStr::empty());
        assert_eq!(x.push(1).to_string(), "011011");
    }

    #[test]
    fn shortlex_order() {
        let a: BitStr = "1".parse().unwrap();
        let b: BitStr = "01".parse().unwrap();
        let c: BitStr = "10".parse().unwrap();
        assert!(a < b, "shorter sorts first");
        assert!(b < c, "same length compares numerically");
    }

    #[test]
    fn concat_repeat() {
        let s: BitStr = "011".parse().unwrap();
        assert_eq!(s.repeat(4).to_string(), "011011011011");
        assert_eq!(s.concat(&"10".parse().unwrap()).to_string(), "01110");
        assert_eq!(BitStr::empty().repeat(5), BitStr::empty());
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let all: Vec<String> = BitStr::all(2).map(|x| x.to_string()).collect();
        assert_eq!(all, vec!["00", "01", "10", "11"]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!("0a1".parse::<BitStr>(), Err(BitStrError::BadChar('a'))));
        assert!(BitStr::try_new(0b100, 2).is_err());
    }
}

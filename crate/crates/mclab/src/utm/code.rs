//! Program encoding: 3-bit opcodes, Elias-gamma operands, MSB-first.

use std::fmt;

/// The eight opcodes. Values are the 3-bit encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    /// Stop; any trailing bits are ignored.
    Halt = 0b000,
    /// γ(m): append m zero bits.
    Zeros = 0b001,
    /// γ(m): append m one bits.
    Ones = 0b010,
    /// γ(m): append m alternating bits, continuing against the last output
    /// bit (an empty output starts with 0).
    Alt = 0b011,
    /// γ(L) then L payload bits: append the payload.
    Literal = 0b100,
    /// Append all remaining program bits and halt. This is the designated
    /// literal-emission form: K(x) ≤ |x| + 3 for every x.
    EmitRest = 0b101,
    /// 2-bit operand e; append the remaining bits, then append (e+1) copies
    /// of the whole current output and halt. Net effect: rest^(e+2).
    RepeatRest = 0b110,
    /// γ(qid) γ(n) γ(s) γ(Δ) γ(i): append the i-th (1-based, ascending)
    /// string of the registered query qid's high-probability set at
    /// threshold (99/100)·2^(Δ/2 − s), then continue.
    IndexHigh = 0b111,
}

impl Opcode {
    pub fn from_bits(v: u8) -> Opcode {
        match v & 0b111 {
            0b000 => Opcode::Halt,
            0b001 => Opcode::Zeros,
            0b010 => Opcode::Ones,
            0b011 => Opcode::Alt,
            0b100 => Opcode::Literal,
            0b101 => Opcode::EmitRest,
            0b110 => Opcode::RepeatRest,
            _ => Opcode::IndexHigh,
        }
    }
}

/// Elias-gamma code of m ≥ 1: ⌊log2 m⌋ zeros, then m in binary.
pub fn gamma_encode(m: u32) -> Vec<u8> {
    assert!(m >= 1, "gamma codes positive integers");
    let width = 32 - m.leading_zeros();
    let mut out = vec![0u8; (width - 1) as usize];
    for i in (0..width).rev() {
        out.push(((m >> i) & 1) as u8);
    }
    out
}

/// Length in bits of γ(m): 2⌊log2 m⌋ + 1.
pub fn gamma_len(m: u32) -> u32 {
    assert!(m >= 1);
    2 * (32 - m.leading_zeros()) - 1
}

/// A program: a bit vector executed front to back.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Program {
    bits: Vec<u8>,
}

impl Program {
    pub fn new(bits: Vec<u8>) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "program bits must be 0/1");
        Program { bits }
    }

    /// The `len`-bit program whose MSB-first reading is `value`; the
    /// enumeration driver for oracle builds.
    pub fn from_value(value: u64, len: u32) -> Self {
        assert!(len <= 63);
        let bits = (0..len).map(|i| ((value >> (len - 1 - i)) & 1) as u8).collect();
        Program { bits }
    }

    pub fn empty() -> Self {
        Program { bits: Vec::new() }
    }

    pub fn len(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn push_op(&mut self, op: Opcode) {
        let v = op as u8;
        self.bits.extend([(v >> 2) & 1, (v >> 1) & 1, v & 1]);
    }

    pub fn push_gamma(&mut self, m: u32) {
        self.bits.extend(gamma_encode(m));
    }

    pub fn push_bit(&mut self, b: u8) {
        assert!(b <= 1);
        self.bits.push(b);
    }

    pub fn push_bits(&mut self, bits: impl IntoIterator<Item = u8>) {
        for b in bits {
            self.push_bit(b);
        }
    }

    /// Numeric value of the MSB-first reading (programs ≤ 63 bits).
    pub fn value(&self) -> u64 {
        assert!(self.len() <= 63);
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Program(\"{self}\")")
    }
}

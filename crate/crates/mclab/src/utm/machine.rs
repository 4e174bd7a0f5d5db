//! Machine configuration and the interpreter.

use super::code::{Opcode, Program};
use super::UtmError;
use crate::bits::BitStr;
use crate::dist::{dist_to_json, BitStringDist, Mode};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Hard ceiling on a single program's length; `max_program_len` only guards
/// enumeration, and witness programs built from high-set indices legitimately
/// exceed it.
pub const RUN_HARD_CAP_BITS: u32 = 4096;

/// Named exact distributions the IndexHigh opcode may reference, 1-based.
/// The registered code is part of the machine definition, so it participates
/// in the config fingerprint.
#[derive(Clone, Debug, Default)]
pub struct QueryRegistry {
    entries: Vec<(String, BitStringDist)>,
}

impl QueryRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, dist: BitStringDist) -> Result<u32, UtmError> {
        if dist.mode() != Mode::Exact {
            return Err(UtmError::QueryNotExact(name.to_string()));
        }
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(UtmError::InvalidConfig(format!("duplicate query name {name:?}")));
        }
        self.entries.push((name.to_string(), dist));
        Ok(self.entries.len() as u32)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based lookup, matching the γ(qid) operand.
    pub fn by_qid(&self, qid: u32) -> Option<&BitStringDist> {
        (qid >= 1)
            .then(|| self.entries.get(qid as usize - 1).map(|(_, d)| d))
            .flatten()
    }

    pub fn qid_of(&self, name: &str) -> Option<u32> {
        self.entries
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| i as u32 + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BitStringDist)> {
        self.entries.iter().map(|(n, d)| (n.as_str(), d))
    }
}

/// Everything that pins down the machine and its oracle build.
#[derive(Clone, Debug)]
pub struct UtmConfig {
    /// Execution step cap per program run.
    pub step_cap: u64,
    /// Longest program the oracle build enumerates (L_max).
    pub max_program_len: u32,
    /// Longest output the machine may produce.
    pub max_output_len: u32,
    /// Total program executions an oracle build may spend.
    pub execution_budget: u64,
    /// Distributions addressable by the IndexHigh opcode.
    pub registry: QueryRegistry,
}

impl UtmConfig {
    /// The reference configuration: L_max = 14, step cap 10^4, outputs to 24
    /// bits, empty registry.
    pub fn reference() -> Self {
        UtmConfig {
            step_cap: 10_000,
            max_program_len: 14,
            max_output_len: 24,
            execution_budget: super::DEFAULT_EXECUTION_BUDGET,
            registry: QueryRegistry::empty(),
        }
    }

    pub fn validate(&self) -> Result<(), UtmError> {
        if self.step_cap == 0 {
            return Err(UtmError::InvalidConfig("step_cap must be positive".into()));
        }
        if self.max_program_len == 0 || self.max_program_len > 24 {
            return Err(UtmError::InvalidConfig(format!(
                "max_program_len {} outside 1..=24",
                self.max_program_len
            )));
        }
        if self.max_output_len == 0 || self.max_output_len > crate::bits::MAX_LEN {
            return Err(UtmError::InvalidConfig(format!(
                "max_output_len {} outside 1..={}",
                self.max_output_len,
                crate::bits::MAX_LEN
            )));
        }
        if self.execution_budget == 0 {
            return Err(UtmError::InvalidConfig("execution_budget must be positive".into()));
        }
        Ok(())
    }

    /// Stable digest of the full machine definition, including registered
    /// query code. Serialized tables carry it so mismatched configs are
    /// detected on load.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(format!(
            "step_cap={};l_max={};out_max={};",
            self.step_cap, self.max_program_len, self.max_output_len
        ));
        for (name, dist) in self.registry.iter() {
            hasher.update(format!("query={name};{};", dist_to_json(dist)));
        }
        let digest = hasher.finalize();
        u64::from_be_bytes(digest[..8].try_into().expect("eight bytes"))
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum InvalidKind {
    #[error("program ends inside an opcode")]
    TruncatedOpcode,
    #[error("program ends inside an operand")]
    TruncatedOperand,
    #[error("malformed gamma code")]
    MalformedGamma,
    #[error("output would exceed the configured maximum")]
    OutputOverflow,
    #[error("no query registered under that qid")]
    UnknownQuery,
    #[error("query width differs from the requested n")]
    WidthMismatch,
    #[error("high-set index out of range")]
    IndexOutOfRange,
    #[error("program exceeds the hard length cap")]
    ProgramTooLong,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RunError {
    #[error("step cap exhausted")]
    Timeout,
    #[error("invalid program: {0}")]
    Invalid(InvalidKind),
}

struct Cursor<'a> {
    bits: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.remaining() < n {
            return None;
        }
        let s = &self.bits[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    fn read_gamma(&mut self) -> Result<u32, RunError> {
        let mut zeros = 0u32;
        loop {
            let Some(b) = self.take(1) else {
                return Err(RunError::Invalid(InvalidKind::MalformedGamma));
            };
            if b[0] == 1 {
                break;
            }
            zeros += 1;
            if zeros > 24 {
                return Err(RunError::Invalid(InvalidKind::MalformedGamma));
            }
        }
        let mut value = 1u32;
        for _ in 0..zeros {
            let Some(b) = self.take(1) else {
                return Err(RunError::Invalid(InvalidKind::MalformedGamma));
            };
            value = (value << 1) | u32::from(b[0]);
        }
        Ok(value)
    }
}

struct Output {
    buf: BitStr,
    cap: u32,
}

impl Output {
    fn push(&mut self, b: u8) -> Result<(), RunError> {
        if self.buf.len() >= self.cap {
            return Err(RunError::Invalid(InvalidKind::OutputOverflow));
        }
        self.buf = self.buf.push(b);
        Ok(())
    }

    fn last(&self) -> Option<u8> {
        (self.buf.len() > 0).then(|| self.buf.bit(self.buf.len()))
    }
}

/// Runs one program to completion under the config's step cap.
///
/// Step accounting: 1 per decoded instruction, 1 per emitted bit, plus 2^n
/// for each high-set computation. A program halts cleanly when the cursor
/// reaches the exact end of the bit string or a terminal opcode fires.
pub fn run_program(cfg: &UtmConfig, prog: &Program) -> Result<BitStr, RunError> {
    if prog.len() > RUN_HARD_CAP_BITS {
        return Err(RunError::Invalid(InvalidKind::ProgramTooLong));
    }
    let mut cur = Cursor { bits: prog.bits(), pos: 0 };
    let mut out = Output { buf: BitStr::empty(), cap: cfg.max_output_len };
    let mut steps: u64 = 0;
    let charge = |steps: &mut u64, amount: u64| -> Result<(), RunError> {
        *steps += amount;
        if *steps > cfg.step_cap {
            Err(RunError::Timeout)
        } else {
            Ok(())
        }
    };

    loop {
        if cur.remaining() == 0 {
            return Ok(out.buf);
        }
        let Some(op_bits) = cur.take(3) else {
            return Err(RunError::Invalid(InvalidKind::TruncatedOpcode));
        };
        charge(&mut steps, 1)?;
        let op = Opcode::from_bits((op_bits[0] << 2) | (op_bits[1] << 1) | op_bits[2]);
        match op {
            Opcode::Halt => return Ok(out.buf),
            Opcode::Zeros | Opcode::Ones => {
                let m = cur.read_gamma()?;
                let bit = if op == Opcode::Zeros { 0 } else { 1 };
                for _ in 0..m {
                    charge(&mut steps, 1)?;
                    out.push(bit)?;
                }
            }
            Opcode::Alt => {
                let m = cur.read_gamma()?;
                for _ in 0..m {
                    charge(&mut steps, 1)?;
                    let next = 1 - out.last().unwrap_or(1);
                    out.push(next)?;
                }
            }
            Opcode::Literal => {
                let l = cur.read_gamma()?;
                let Some(payload) = cur.take(l as usize) else {
                    return Err(RunError::Invalid(InvalidKind::TruncatedOperand));
                };
                for &b in payload {
                    charge(&mut steps, 1)?;
                    out.push(b)?;
                }
            }
            Opcode::EmitRest => {
                let rest = cur.take(cur.remaining()).expect("taking what remains");
                for &b in rest {
                    charge(&mut steps, 1)?;
                    out.push(b)?;
                }
                return Ok(out.buf);
            }
            Opcode::RepeatRest => {
                let Some(e_bits) = cur.take(2) else {
                    return Err(RunError::Invalid(InvalidKind::TruncatedOperand));
                };
                let copies = u32::from((e_bits[0] << 1) | e_bits[1]) + 1;
                let rest = cur.take(cur.remaining()).expect("taking what remains");
                for &b in rest {
                    charge(&mut steps, 1)?;
                    out.push(b)?;
                }
                let base = out.buf;
                for _ in 0..copies {
                    for i in 1..=base.len() {
                        charge(&mut steps, 1)?;
                        out.push(base.bit(i))?;
                    }
                }
                return Ok(out.buf);
            }
            Opcode::IndexHigh => {
                let qid = cur.read_gamma()?;
                let n = cur.read_gamma()?;
                let s = cur.read_gamma()?;
                let delta = cur.read_gamma()?;
                let i = cur.read_gamma()?;
                let Some(dist) = cfg.registry.by_qid(qid) else {
                    return Err(RunError::Invalid(InvalidKind::UnknownQuery));
                };
                if dist.n() != n {
                    return Err(RunError::Invalid(InvalidKind::WidthMismatch));
                }
                if n > 24 {
                    return Err(RunError::Invalid(InvalidKind::WidthMismatch));
                }
                charge(&mut steps, 1u64 << n)?;
                let thr = super::HighThreshold { s, delta };
                let high = super::high_set(dist, &thr);
                let Some(member) = (i >= 1)
                    .then(|| high.get(i as usize - 1))
                    .flatten()
                else {
                    return Err(RunError::Invalid(InvalidKind::IndexOutOfRange));
                };
                for j in 1..=member.len() {
                    charge(&mut steps, 1)?;
                    out.push(member.bit(j))?;
                }
            }
        }
    }
}

//! High-probability sets and constructive index witnesses.
//!
//! The high set of a distribution Q at (s, Δ) is
//! `{ y : Pr[Q = y] ≥ (99/100) · 2^(Δ/2 − s) }`, compared exactly by
//! squaring so the half-integer power of two never leaves the rationals.
//! Counting gives |High| ≤ (100/99) · 2^(s − Δ/2), so a member is pinned by
//! a short index: the machine's IndexHigh opcode makes that a program, and
//! `index_description` builds it.

use super::code::{Opcode, Program};
#[cfg(test)]
use super::code::gamma_len;
use super::machine::UtmConfig;
use super::UtmError;
use crate::bits::BitStr;
use crate::dist::BitStringDist;
use crate::ratio::ge_scaled_sqrt_pow2;
use num_rational::BigRational;

/// The threshold (99/100)·2^(Δ/2 − s), carried symbolically as (s, Δ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HighThreshold {
    pub s: u32,
    pub delta: u32,
}

impl HighThreshold {
    /// Exponent such that threshold² = (99/100)² · 2^(exponent).
    fn squared_exponent(&self) -> i64 {
        i64::from(self.delta) - 2 * i64::from(self.s)
    }
}

/// Exact membership test: p ≥ (99/100)·2^(Δ/2 − s).
pub fn high_set_member(p: &BigRational, thr: &HighThreshold) -> bool {
    ge_scaled_sqrt_pow2(p, 99, 100, thr.squared_exponent())
}

/// The high set, ascending lexicographically. Support-only scan: anything
/// off support has probability 0 and can never meet a positive threshold.
pub fn high_set(dist: &BitStringDist, thr: &HighThreshold) -> Vec<BitStr> {
    dist.support()
        .filter(|(_, p)| high_set_member(p, thr))
        .map(|(y, _)| *y)
        .collect()
}

/// A verified index witness: the program, how its bits divide into header
/// and index, and the high set size it indexes into.
#[derive(Debug, Clone)]
pub struct IndexWitness {
    pub program: Program,
    /// The string the program emits.
    pub emits: BitStr,
    /// Opcode plus γ(qid), γ(n), γ(s), γ(Δ).
    pub header_bits: u32,
    /// γ(i).
    pub index_bits: u32,
    pub high_size: u64,
}

impl IndexWitness {
    pub fn len(&self) -> u32 {
        self.program.len()
    }
}

/// Builds the program `[IndexHigh] γ(qid) γ(n) γ(s) γ(Δ) γ(i)` for the i-th
/// (1-based, ascending) member of the named query's high set, and verifies
/// by running it.
pub fn index_description(
    cfg: &UtmConfig,
    query: &str,
    n: u32,
    thr: HighThreshold,
    i: u64,
) -> Result<IndexWitness, UtmError> {
    let Some(qid) = cfg.registry.qid_of(query) else {
        return Err(UtmError::UnknownQuery(query.to_string()));
    };
    let dist = cfg.registry.by_qid(qid).expect("qid_of returned a live id");
    if dist.n() != n {
        return Err(UtmError::WidthMismatch { dist: dist.n(), requested: n });
    }
    let high = high_set(dist, &thr);
    if i < 1 || i > high.len() as u64 {
        return Err(UtmError::IndexOutOfRange { i, high_size: high.len() as u64 });
    }
    let expected = high[i as usize - 1];

    let mut program = Program::empty();
    program.push_op(Opcode::IndexHigh);
    program.push_gamma(qid);
    program.push_gamma(n);
    program.push_gamma(thr.s);
    program.push_gamma(thr.delta);
    let header_bits = program.len();
    program.push_gamma(i as u32);
    let index_bits = program.len() - header_bits;

    // Witness soundness: the program must actually emit the member. A
    // generous cap covers the 2^n set computation.
    let mut run_cfg = cfg.clone();
    run_cfg.step_cap = run_cfg.step_cap.max((1u64 << n) + u64::from(n) + 8);
    let emitted = super::run_program(&run_cfg, &program)
        .map_err(|e| UtmError::InvalidConfig(format!("index witness failed to run: {e}")))?;
    assert_eq!(emitted, expected, "index witness emitted the wrong member");

    Ok(IndexWitness {
        program,
        emits: expected,
        header_bits,
        index_bits,
        high_size: high.len() as u64,
    })
}

/// Exact counting bound check: |High|² · 99² · 2^Δ ≤ 100² · 2^(2s), i.e.
/// |High| ≤ (100/99) · 2^(s − Δ/2). Total high-set mass ≥ |High|·threshold
/// would otherwise exceed 1.
pub fn high_size_within_counting_bound(high_size: u64, thr: &HighThreshold) -> bool {
    use num_bigint::BigInt;
    let lhs = BigInt::from(high_size).pow(2) * 99 * 99 * BigInt::from(2).pow(thr.delta);
    let rhs = BigInt::from(100 * 100) * BigInt::from(2).pow(2 * thr.s);
    lhs <= rhs
}

/// γ(i) is self-delimiting, so the index field costs 2⌊log2 i⌋ + 1 bits,
/// within one bit of twice the fixed-width ⌈log2 |High|⌉ budget.
pub fn index_bits_bound(high_size: u64) -> u32 {
    assert!(high_size >= 1);
    let ceil_log2 = if high_size == 1 {
        0
    } else {
        64 - (high_size - 1).leading_zeros()
    };
    2 * ceil_log2 + 1
}

//! Deterministic randomness.
//!
//! One named counter-based generator (ChaCha8) is used everywhere. Seeds are
//! explicit `u64`s; independent substreams for table cells or per-string
//! estimates come from `set_stream`, and child seeds from a splitmix64
//! finalizer. Exact rational sampling never touches floating point: a
//! Bernoulli(p) draw for p = a/b is a uniform integer below b compared
//! against a.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
#[cfg(test)]
use num_traits::ToPrimitive;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The one generator used by every sampled path in the crate.
pub type LabRng = ChaCha8Rng;

/// Fresh generator on stream 0.
pub fn lab_rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fresh generator on a named substream; streams never overlap.
pub fn lab_rng_stream(seed: u64, stream: u64) -> LabRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// splitmix64 finalizer: derives a well-mixed child seed from (seed, salt).
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw from [0, bound), exact, by rejection on fixed-width chunks.
/// Expected < 2 iterations. Panics on bound = 0.
pub fn sample_below(rng: &mut LabRng, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "sample_below needs a positive bound");
    if bound.is_one() {
        return BigUint::zero();
    }
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let top_bits = bits - 32 * (words as u64 - 1);
    let top_mask: u32 = if top_bits == 32 { u32::MAX } else { (1u32 << top_bits) - 1 };
    loop {
        let mut digits = Vec::with_capacity(words);
        for w in 0..words {
            let mut d = rng.next_u32();
            if w == words - 1 {
                d &= top_mask;
            }
            digits.push(d);
        }
        let candidate = BigUint::new(digits);
        if &candidate < bound {
            return candidate;
        }
    }
}

/// Exact Bernoulli(numer/denom) on machine words: the fast path for hot
/// estimation loops whose conditionals have small denominators.
pub fn bernoulli_u64(rng: &mut LabRng, numer: u64, denom: u64) -> bool {
    assert!(denom > 0 && numer <= denom, "need 0 <= numer <= denom, denom > 0");
    let mask = if denom.is_power_of_two() {
        denom - 1
    } else {
        denom.next_power_of_two() - 1
    };
    loop {
        let draw = rng.next_u64() & mask;
        if draw < denom {
            return draw < numer;
        }
    }
}

/// Exact Bernoulli(p) for rational p in [0, 1].
pub fn bernoulli_exact(rng: &mut LabRng, p: &BigRational) -> bool {
    assert!(!p.is_negative() && p <= &BigRational::one(), "p must lie in [0,1]");
    let denom = p.denom().magnitude();
    if denom.is_one() {
        return p.is_one();
    }
    let numer = p.numer().magnitude();
    &sample_below(rng, denom) < numer
}

//! Exact rational helpers shared across the crate: powers of two, fraction
//! string formatting ("p/q"), threshold comparisons that avoid irrational
//! intermediates, and a careful log2 for reporting.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FracParseError {
    #[error("empty fraction string")]
    Empty,
    #[error("invalid fraction string {0:?} (expected \"p/q\" or integer)")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// `n/d` as an exact rational.
pub fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `2^exp` as an exact rational; `exp` may be negative.
pub fn pow2(exp: i64) -> BigRational {
    let mag = BigInt::from(2u32).pow(exp.unsigned_abs() as u32);
    if exp >= 0 {
        BigRational::from_integer(mag)
    } else {
        BigRational::new(BigInt::one(), mag)
    }
}

/// Reduced "p/q" form; integers render as "p/1" so the format stays uniform.
pub fn frac_str(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses "p/q" (or a bare integer "p").
pub fn parse_frac(s: &str) -> Result<BigRational, FracParseError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(FracParseError::Empty);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| FracParseError::Malformed(s.to_string()))?;
    let d: BigInt = den.parse().map_err(|_| FracParseError::Malformed(s.to_string()))?;
    if d.is_zero() {
        return Err(FracParseError::ZeroDenominator(s.to_string()));
    }
    Ok(BigRational::new(n, d))
}

/// Exact check `r^k <= 2^e`. Used for bounds like err <= 2^(-delta/3)
/// (equivalently err^3 <= 2^(-delta)) without irrational roots.
pub fn pow_le_pow2(r: &BigRational, k: u32, e: i64) -> bool {
    assert!(!r.is_negative(), "pow_le_pow2 expects a nonnegative rational");
    num_traits::pow::pow(r.clone(), k as usize) <= pow2(e)
}

/// Exact check `p >= (num/den) * 2^(e/2)` for nonnegative `p`, by squaring.
/// Handles half-integer exponents of two without leaving the rationals.
pub fn ge_scaled_sqrt_pow2(p: &BigRational, num: i64, den: i64, e: i64) -> bool {
    assert!(!p.is_negative());
    let rhs_sq = frac(num * num, den * den) * pow2(e);
    p * p >= rhs_sq
}

/// Exact check `p < (num/den) * 2^(e/2)` for nonnegative `p`.
pub fn lt_scaled_sqrt_pow2(p: &BigRational, num: i64, den: i64, e: i64) -> bool {
    !ge_scaled_sqrt_pow2(p, num, den, e)
}

/// Orders a rational `target` against exp(-x) for rational x >= 0, exactly.
///
/// exp(x) is sandwiched between Taylor partial sums S_k and S_k plus a
/// geometric tail bound; inverting gives a shrinking rational interval
/// around exp(-x). exp(-x) is irrational for rational x != 0, so the loop
/// always separates; x = 0 is the one exactly-equal case and is handled
/// up front.
pub fn cmp_exp_neg(x: &BigRational, target: &BigRational) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    assert!(!x.is_negative(), "cmp_exp_neg expects x >= 0");
    if x.is_zero() {
        return target.cmp(&BigRational::one());
    }
    if !target.is_positive() {
        return Ordering::Less;
    }
    if target >= &BigRational::one() {
        return Ordering::Greater;
    }
    let mut sum = BigRational::one(); // S_0
    let mut term = BigRational::one(); // x^k / k!
    for k in 1..=512u32 {
        term *= x / BigRational::from_integer(BigInt::from(k));
        sum += &term;
        // Tail bound needs the series to have started shrinking: x < k + 1.
        let next_index = BigRational::from_integer(BigInt::from(k + 1));
        if x >= &next_index {
            continue;
        }
        // exp(x) in [sum, sum + term * x/(k+1) * 1/(1 - x/(k+2))], so
        // exp(-x) in [1/upper, 1/sum].
        let ratio_bound = x / &next_index;
        let tail = &term * &ratio_bound
            / (BigRational::one() - x / BigRational::from_integer(BigInt::from(k + 2)));
        let upper = &sum + tail;
        if target * upper < BigRational::one() {
            return Ordering::Less;
        }
        if target * &sum > BigRational::one() {
            return Ordering::Greater;
        }
    }
    unreachable!("exp(-x) sandwich failed to separate after 512 terms");
}

/// log2 of a positive rational, computed from the top 64 bits of numerator
/// and denominator. Good to ~1e-12 relative error regardless of magnitude;
/// used only for human-readable report fields, never for verdicts.
pub fn approx_log2(r: &BigRational) -> f64 {
    assert!(r.is_positive(), "approx_log2 needs a positive rational");
    let lg = |x: &BigUint| -> f64 {
        let bits = x.bits();
        if bits <= 53 {
            (x.to_u64().expect("fits") as f64).log2()
        } else {
            let shift = bits - 53;
            let top: BigUint = x >> shift;
            (top.to_u64().expect("53 bits fit") as f64).log2() + shift as f64
        }
    };
    let n = r.numer().magnitude();
    let d = r.denom().magnitude();
    lg(n) - lg(d)
}

/// f64 value of a rational, via log2 so that huge numerators and
/// denominators cannot overflow on the way through.
pub fn to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    sign * approx_log2(&r.abs()).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_both_signs() {
        assert_eq!(pow2(3), frac(8, 1));
        assert_eq!(pow2(-4), frac(1, 16));
        assert_eq!(pow2(0), frac(1, 1));
    }

    #[test]
    fn frac_string_roundtrip() {
        let r = frac(-6, 8);
        assert_eq!(frac_str(&r), "-3/4");
        assert_eq!(parse_frac("-3/4").unwrap(), r);
        assert_eq!(parse_frac("7").unwrap(), frac(7, 1));
        assert!(parse_frac("1/0").is_err());
        assert!(parse_frac("x/2").is_err());
    }

    #[test]
    fn cube_threshold_check() {
        // 1/8 <= 2^(-9/3) exactly; anything above 1/8 is not.
        assert!(pow_le_pow2(&frac(1, 8), 3, -9));
        assert!(!pow_le_pow2(&frac(1001, 8000), 3, -9));
    }

    #[test]
    fn sqrt_threshold_check() {
        // Exact boundary: p^2 == (99/100)^2 * 2^-2  =>  p = (99/100)/2 counts as >=.
        let p = frac(99, 200);
        assert!(ge_scaled_sqrt_pow2(&p, 99, 100, -2));
        assert!(!ge_scaled_sqrt_pow2(&(p - frac(1, 1_000_000)), 99, 100, -2));
        // 0.99 * 2^(-1/2) is about 0.70004: 1/2 sits below, 71/100 above.
        assert!(lt_scaled_sqrt_pow2(&frac(1, 2), 99, 100, -1));
        assert!(!lt_scaled_sqrt_pow2(&frac(71, 100), 99, 100, -1));
    }

    #[test]
    fn exp_comparison_separates_tight_targets() {
        use std::cmp::Ordering::{Equal, Greater, Less};
        // e^-1 = 0.367879...
        assert_eq!(cmp_exp_neg(&frac(1, 1), &frac(367, 1000)), Less);
        assert_eq!(cmp_exp_neg(&frac(1, 1), &frac(368, 1000)), Greater);
        // e^-2.5 = 0.082084...
        assert_eq!(cmp_exp_neg(&frac(5, 2), &frac(82, 1000)), Less);
        assert_eq!(cmp_exp_neg(&frac(5, 2), &frac(83, 1000)), Greater);
        // Large exponent exercises the pre-shrink continue branch:
        // log2(e^-40) = -57.7.
        assert_eq!(cmp_exp_neg(&frac(40, 1), &pow2(-57)), Greater);
        assert_eq!(cmp_exp_neg(&frac(40, 1), &pow2(-58)), Less);
        // Edge cases: x = 0 compares against 1; nonpositive targets are below.
        assert_eq!(cmp_exp_neg(&frac(0, 1), &frac(1, 1)), Equal);
        assert_eq!(cmp_exp_neg(&frac(3, 1), &frac(0, 1)), Less);
        assert_eq!(cmp_exp_neg(&frac(3, 1), &frac(5, 4)), Greater);
    }

    #[test]
    fn log2_accuracy() {
        let r = frac(3, 4);
        assert!((approx_log2(&r) - (0.75f64).log2()).abs() < 1e-12);
        let big = pow2(200) * frac(3, 1);
        assert!((approx_log2(&big) - (200.0 + 3f64.log2())).abs() < 1e-9);
        assert!((to_f64(&frac(1, 3)) - 1.0 / 3.0).abs() < 1e-12);
    }
}

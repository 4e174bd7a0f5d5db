//! Bounded-complexity promise problems: label instances by the enumeration
//! oracle's K values, decide them by thresholding a probability estimate,
//! and account for both error masses exactly.
//!
//! An instance of the problem with thresholds (s1, s2) is an n-bit string x;
//! yes-instances have K(x) ≤ s1, no-instances K(x) ≥ s2, and everything
//! strictly between violates the promise. The decider accepts when its
//! probability estimate reaches 2^(−(s1+s2)/2), halfway (in exponent)
//! between the two thresholds. All comparisons against that possibly
//! irrational cutoff are done by squaring, so the accounting is exact.

use crate::bits::BitStr;
use crate::dist::BitStringDist;
use crate::ratio::{frac_str, ge_scaled_sqrt_pow2, lt_scaled_sqrt_pow2, pow_le_pow2};
use crate::utm::{high_set, high_size_within_counting_bound, HighThreshold, KBound, OracleTable};
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GapkError {
    #[error("instance width {width} disagrees with params width {expected}")]
    WidthMismatch { width: u32, expected: u32 },
    #[error(
        "oracle with L_max {l_max} cannot certify no-instances at s2 = {s2}: \
         an absent string only witnesses K > {l_max}"
    )]
    OracleMiss { l_max: u32, s2: u32 },
    #[error("oracle output cap {cap} is below the instance width {n}")]
    OracleTooNarrow { cap: u32, n: u32 },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("distribution error: {0}")]
    Dist(#[from] crate::dist::DistError),
}

/// The minimum admissible gap s2 − s1 as a function of n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapSchedule {
    /// ⌈(log₂ n)²⌉, the default super-logarithmic schedule. At desk-scale n
    /// this usually exceeds every usable threshold pair, which is why
    /// explicit gaps exist.
    SquaredLog,
    Explicit(u32),
}

impl GapSchedule {
    pub fn min_gap(&self, n: u32) -> u32 {
        match *self {
            GapSchedule::SquaredLog => {
                assert!(n >= 2);
                let l = f64::from(n).log2();
                (l * l).ceil() as u32
            }
            GapSchedule::Explicit(d) => d,
        }
    }
}

/// Validated (n, s1, s2) threshold triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapKParams {
    pub n: u32,
    pub s1: u32,
    pub s2: u32,
}

impl GapKParams {
    pub fn new(n: u32, s1: u32, s2: u32, schedule: GapSchedule) -> Result<Self, GapkError> {
        if s2 <= s1 {
            return Err(GapkError::BadParams(format!("need s1 < s2, got {s1} >= {s2}")));
        }
        let min = schedule.min_gap(n);
        if s2 - s1 < min {
            return Err(GapkError::BadParams(format!(
                "gap {} below the schedule minimum {min}",
                s2 - s1
            )));
        }
        Ok(GapKParams { n, s1, s2 })
    }

    pub fn delta(&self) -> u32 {
        self.s2 - self.s1
    }

    /// 2·log₂ of the decision threshold 2^(−(s1+s2)/2).
    fn threshold_exponent(&self) -> i64 {
        -i64::from(self.s1 + self.s2)
    }

    /// Does an estimate reach the decision threshold? Exact via squaring.
    pub fn accepts(&self, estimate: &BigRational) -> bool {
        ge_scaled_sqrt_pow2(estimate, 1, 1, self.threshold_exponent())
    }

    /// p < (100/99) · threshold: membership in the under-threshold slab
    /// where a correct estimate may still be pushed below the cutoff.
    pub fn below_stretched_threshold(&self, p: &BigRational) -> bool {
        lt_scaled_sqrt_pow2(p, 100, 99, self.threshold_exponent())
    }

    /// The matching high-probability cutoff (99/100) · threshold.
    pub fn high_threshold(&self) -> HighThreshold {
        HighThreshold { s: self.s2, delta: self.delta() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Yes,
    No,
    PromiseViolating,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Yes => "yes",
            Label::No => "no",
            Label::PromiseViolating => "promise_violating",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapKInstance {
    pub x: BitStr,
    pub k: KBound,
    pub label: Label,
}

/// Labels one string from the oracle. An absent string certifies K > L_max,
/// which decides the label only when s2 ≤ L_max + 1; otherwise the truth is
/// out of the table's reach and the call fails rather than guesses.
pub fn label_instance(
    x: &BitStr,
    params: &GapKParams,
    oracle: &OracleTable,
) -> Result<GapKInstance, GapkError> {
    if x.len() != params.n {
        return Err(GapkError::WidthMismatch { width: x.len(), expected: params.n });
    }
    if params.n > oracle.max_output_len() {
        return Err(GapkError::OracleTooNarrow { cap: oracle.max_output_len(), n: params.n });
    }
    let k = oracle.k(x);
    let label = match k {
        KBound::Finite(v) => {
            if v <= params.s1 {
                Label::Yes
            } else if v >= params.s2 {
                Label::No
            } else {
                Label::PromiseViolating
            }
        }
        KBound::ExceedsLmax => {
            if params.s2 <= oracle.l_max() + 1 {
                Label::No
            } else {
                return Err(GapkError::OracleMiss { l_max: oracle.l_max(), s2: params.s2 });
            }
        }
    };
    Ok(GapKInstance { x: *x, k, label })
}

/// Labels every support string of an instance distribution and totals the
/// mass per label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelCensus {
    pub rows: Vec<(GapKInstance, BigRational)>,
    pub yes_mass: BigRational,
    pub no_mass: BigRational,
    pub promise_violating_mass: BigRational,
}

pub fn label_census(
    q: &BitStringDist,
    params: &GapKParams,
    oracle: &OracleTable,
) -> Result<LabelCensus, GapkError> {
    let mut rows = Vec::new();
    let mut yes_mass = BigRational::zero();
    let mut no_mass = BigRational::zero();
    let mut promise_violating_mass = BigRational::zero();
    for (x, p) in q.support() {
        let inst = label_instance(x, params, oracle)?;
        match inst.label {
            Label::Yes => yes_mass += p,
            Label::No => no_mass += p,
            Label::PromiseViolating => promise_violating_mass += p,
        }
        rows.push((inst, p.clone()));
    }
    Ok(LabelCensus { rows, yes_mass, no_mass, promise_violating_mass })
}

/// One JSON line per labeled instance: {x, k, label, s1, s2}.
pub fn instances_jsonl(census: &LabelCensus, params: &GapKParams) -> String {
    use serde_json::json;
    census
        .rows
        .iter()
        .map(|(inst, _)| {
            let k = match inst.k {
                KBound::Finite(v) => json!(v),
                KBound::ExceedsLmax => json!("exceeds_l_max"),
            };
            serde_json::to_string(&json!({
                "x": inst.x.to_string(),
                "k": k,
                "label": inst.label.to_string(),
                "s1": params.s1,
                "s2": params.s2,
            }))
            .expect("instance row serialization never fails")
                + "\n"
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Deciders.
// ---------------------------------------------------------------------------

/// Anything that accepts each string with a computable probability. A
/// deterministic decider returns 0 or 1.
pub trait Decider {
    fn p_yes(&self, x: &BitStr) -> BigRational;
}

/// Accept exactly when `estimator(x)` reaches the (s1, s2) threshold.
pub struct ThresholdDecider<'a> {
    params: GapKParams,
    estimator: Box<dyn Fn(&BitStr) -> BigRational + 'a>,
}

impl<'a> ThresholdDecider<'a> {
    pub fn new(
        params: GapKParams,
        estimator: impl Fn(&BitStr) -> BigRational + 'a,
    ) -> Self {
        ThresholdDecider { params, estimator: Box::new(estimator) }
    }

    /// The decider driven by the true instance probabilities: the exact
    /// stand-in for a perfectly accurate estimator.
    pub fn exact_probability(params: GapKParams, q: &'a BitStringDist) -> Self {
        ThresholdDecider::new(params, |x| q.prob(x))
    }
}

impl Decider for ThresholdDecider<'_> {
    fn p_yes(&self, x: &BitStr) -> BigRational {
        if self.params.accepts(&(self.estimator)(x)) {
            BigRational::one()
        } else {
            BigRational::zero()
        }
    }
}

/// Accepts every string with fixed probability p.
pub struct CoinDecider(pub BigRational);

impl Decider for CoinDecider {
    fn p_yes(&self, _x: &BitStr) -> BigRational {
        self.0.clone()
    }
}

/// The information-theoretic ideal: reads the label from the oracle and
/// accepts exactly the yes-instances.
pub struct LabelDecider<'a> {
    pub params: GapKParams,
    pub oracle: &'a OracleTable,
}

impl Decider for LabelDecider<'_> {
    fn p_yes(&self, x: &BitStr) -> BigRational {
        match label_instance(x, &self.params, self.oracle) {
            Ok(inst) if inst.label == Label::Yes => BigRational::one(),
            _ => BigRational::zero(),
        }
    }
}

/// Free-function form of the threshold rule: yes iff the estimate reaches
/// 2^(−(s1+s2)/2).
pub fn threshold_decider(
    x: &BitStr,
    estimator: impl Fn(&BitStr) -> BigRational,
    params: &GapKParams,
) -> Label {
    if params.accepts(&estimator(x)) {
        Label::Yes
    } else {
        Label::No
    }
}

// ---------------------------------------------------------------------------
// Exact error accounting.
// ---------------------------------------------------------------------------

/// The two promise-side error masses of a decider against an instance
/// distribution; promise-violating strings never count.
#[derive(Debug, Clone, PartialEq)]
pub struct DeciderErrorReport {
    /// Pr[decider says no ∧ instance is yes].
    pub yes_error_mass: BigRational,
    /// Pr[decider says yes ∧ instance is no].
    pub no_error_mass: BigRational,
    pub total: BigRational,
    pub delta: u32,
    /// yes_error ≤ 2^(−Δ/3), checked exactly by cubing.
    pub yes_bound_holds: bool,
}

pub fn exact_error_account(
    decider: &dyn Decider,
    q: &BitStringDist,
    params: &GapKParams,
    oracle: &OracleTable,
) -> Result<DeciderErrorReport, GapkError> {
    let mut yes_error_mass = BigRational::zero();
    let mut no_error_mass = BigRational::zero();
    for (x, p) in q.support() {
        let inst = label_instance(x, params, oracle)?;
        let acc = decider.p_yes(x);
        match inst.label {
            Label::Yes => yes_error_mass += p * (BigRational::one() - acc),
            Label::No => no_error_mass += p * acc,
            Label::PromiseViolating => {}
        }
    }
    let total = &yes_error_mass + &no_error_mass;
    let yes_bound_holds = pow_le_pow2(&yes_error_mass, 3, -i64::from(params.delta()));
    Ok(DeciderErrorReport {
        yes_error_mass,
        no_error_mass,
        total,
        delta: params.delta(),
        yes_bound_holds,
    })
}

/// The same masses compared against the strong-hardness schema 1/2 − n^(−k):
/// a decider breaks strong hardness when its total error stays below that.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorReport {
    pub errors: DeciderErrorReport,
    /// 1/2 − n^(−k).
    pub schema_floor: BigRational,
    /// total < schema floor: the decider does strictly better than the
    /// strong-hardness schema tolerates.
    pub beats_schema: bool,
}

pub fn strong_error_account(
    decider: &dyn Decider,
    q: &BitStringDist,
    params: &GapKParams,
    oracle: &OracleTable,
    k: u32,
) -> Result<StrongErrorReport, GapkError> {
    let errors = exact_error_account(decider, q, params, oracle)?;
    let nk = BigRational::new(1.into(), num_bigint::BigInt::from(params.n).pow(k));
    let schema_floor = crate::ratio::frac(1, 2) - nk;
    let beats_schema = errors.total < schema_floor;
    Ok(StrongErrorReport { errors, schema_floor, beats_schema })
}

// ---------------------------------------------------------------------------
// Where the exact-estimator decider is allowed to err.
// ---------------------------------------------------------------------------

/// The census of the two exception sets for the exact-probability decider:
/// every error must fall in the under-threshold yes slab (low) or the
/// over-threshold no slab (high ∩ no). `violations` lists support strings
/// erring anywhere else; the theorem says it is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub violations: Vec<BitStr>,
    /// Yes-instances under the stretched threshold (100/99)·2^(−(s1+s2)/2).
    pub low_size: u64,
    pub low_mass: BigRational,
    /// Strings at or above (99/100)·2^(−(s1+s2)/2).
    pub high_size: u64,
    /// |high|² · 99² · 2^Δ ≤ 100² · 2^(2·s2), exactly.
    pub high_counting_bound_ok: bool,
    /// No-instances inside the high set: the strings that produce no-side
    /// error. Empty whenever heavy strings are machine-compressible below s2.
    pub high_no_size: u64,
}

pub fn band_report(
    q: &BitStringDist,
    params: &GapKParams,
    oracle: &OracleTable,
) -> Result<BandReport, GapkError> {
    let decider = ThresholdDecider::exact_probability(*params, q);
    let thr = params.high_threshold();
    let high = high_set(q, &thr);
    let mut violations = Vec::new();
    let mut low_size = 0u64;
    let mut low_mass = BigRational::zero();
    let mut high_no_size = 0u64;
    for (x, p) in q.support() {
        let inst = label_instance(x, params, oracle)?;
        let in_low = inst.label == Label::Yes && params.below_stretched_threshold(p);
        if in_low {
            low_size += 1;
            low_mass += p;
        }
        let in_high = high.binary_search(x).is_ok();
        if in_high && inst.label == Label::No {
            high_no_size += 1;
        }
        let accepted = decider.p_yes(x).is_one();
        let errs = (inst.label == Label::Yes && !accepted)
            || (inst.label == Label::No && accepted);
        if errs && !(in_low || (in_high && inst.label == Label::No)) {
            violations.push(*x);
        }
    }
    Ok(BandReport {
        violations,
        low_size,
        low_mass,
        high_size: high.len() as u64,
        high_counting_bound_ok: high_size_within_counting_bound(high.len() as u64, &thr),
        high_no_size,
    })
}

/// Human-readable audit line for an error report.
pub fn report_line(r: &DeciderErrorReport) -> String {
    format!(
        "yes_error={} no_error={} total={} delta={} yes_bound_2^(-delta/3)={}",
        frac_str(&r.yes_error_mass),
        frac_str(&r.no_error_mass),
        frac_str(&r.total),
        r.delta,
        if r.yes_bound_holds { "holds" } else { "VIOLATED" },
    )
}

//! Extrapolators (next-bit conditional samplers) and the chain-rule
//! probability estimator built on them.
//!
//! An extrapolator answers "given the first i−1 bits of a sample, draw bit
//! i". The estimator turns that next-bit access into a probability estimate
//! for a whole string by estimating each conditional empirically and
//! multiplying. Everything downstream of the drawn counts is exact rational
//! arithmetic, so the audit trail can be replayed bit for bit.

use crate::bits::BitStr;
use crate::dist::{chain_factorize, BitStringDist, ChainFactorization, Conditional};
use crate::ratio::frac;
use crate::rng::{bernoulli_exact, bernoulli_u64, lab_rng, mix, LabRng};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cell::RefCell;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtrapolateError {
    #[error("extrapolator exposes no conditional table")]
    NotTabular,
    #[error("bad estimate configuration: {0}")]
    BadConfig(String),
    #[error("distribution error: {0}")]
    Dist(#[from] crate::dist::DistError),
}

/// Next-bit access to a distribution over {0,1}^n.
///
/// `next_bit` must be a pure function of (i, prefix, rng stream). Tabular
/// extrapolators also expose the conditional they sample from, which is what
/// the exact deviation accounting consumes; sample-only implementations
/// return `None` there.
pub trait Extrapolator {
    fn n(&self) -> u32;

    /// Advertised per-index additive slack against the true conditionals.
    fn slack(&self) -> BigRational;

    /// P[bit i = 1 | prefix] as this extrapolator actually samples it.
    fn conditional(&self, i: u32, prefix: &BitStr) -> Option<Conditional>;

    /// Draw bit i given the first i−1 bits.
    fn next_bit(&self, i: u32, prefix: &BitStr, rng: &mut LabRng) -> u8;
}

// ---------------------------------------------------------------------------
// Shared draw plumbing: resolve a conditional once per prefix, then draw
// from cached machine words when the denominator is small.
// ---------------------------------------------------------------------------

enum DrawPlan {
    Small { numer: u64, denom: u64 },
    Big(BigRational),
}

impl DrawPlan {
    fn of(p: &BigRational) -> DrawPlan {
        match (p.numer().to_u64(), p.denom().to_u64()) {
            (Some(numer), Some(denom)) => DrawPlan::Small { numer, denom },
            _ => DrawPlan::Big(p.clone()),
        }
    }

    fn draw(&self, rng: &mut LabRng) -> u8 {
        let hit = match self {
            DrawPlan::Small { numer, denom } => bernoulli_u64(rng, *numer, *denom),
            DrawPlan::Big(p) => bernoulli_exact(rng, p),
        };
        u8::from(hit)
    }
}

/// One-slot cache keyed by prefix: estimation hammers a single prefix with
/// `reps` draws, so the conditional is resolved once, not per draw.
struct DrawMemo(RefCell<Option<(BitStr, DrawPlan)>>);

impl DrawMemo {
    fn new() -> Self {
        DrawMemo(RefCell::new(None))
    }

    fn draw(
        &self,
        prefix: &BitStr,
        resolve: impl FnOnce() -> BigRational,
        rng: &mut LabRng,
    ) -> u8 {
        let mut slot = self.0.borrow_mut();
        let stale = slot.as_ref().map_or(true, |(p, _)| p != prefix);
        if stale {
            *slot = Some((*prefix, DrawPlan::of(&resolve())));
        }
        slot.as_ref().unwrap().1.draw(rng)
    }
}

// ---------------------------------------------------------------------------
// Exact extrapolator: zero slack, true conditionals.
// ---------------------------------------------------------------------------

/// Samples the true next-bit conditionals of a fixed distribution.
pub struct ExactExtrapolator {
    chain: ChainFactorization,
    memo: DrawMemo,
}

/// Builds the zero-slack extrapolator for an exact distribution.
pub fn exact_extrapolator(d: &BitStringDist) -> Result<ExactExtrapolator, ExtrapolateError> {
    Ok(ExactExtrapolator { chain: chain_factorize(d)?, memo: DrawMemo::new() })
}

impl Extrapolator for ExactExtrapolator {
    fn n(&self) -> u32 {
        self.chain.n()
    }

    fn slack(&self) -> BigRational {
        BigRational::zero()
    }

    fn conditional(&self, i: u32, prefix: &BitStr) -> Option<Conditional> {
        debug_assert_eq!(prefix.len(), i - 1);
        Some(self.chain.conditional(prefix))
    }

    fn next_bit(&self, i: u32, prefix: &BitStr, rng: &mut LabRng) -> u8 {
        debug_assert_eq!(prefix.len(), i - 1);
        self.memo
            .draw(prefix, || self.chain.conditional(prefix).p_one, rng)
    }
}

// ---------------------------------------------------------------------------
// Noisy extrapolator: conditionals shifted by a configurable sign pattern.
// ---------------------------------------------------------------------------

/// Where the additive error points. The slack contract only bounds the size
/// of the perturbation, not its direction, so worst cases are configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Toward0,
    Toward1,
    /// Direction chosen per prefix from a fixed hash; deterministic.
    Random(u64),
}

/// True conditionals shifted by ±ε (clamped to [0,1]), with optional
/// per-prefix overrides for adversarially concentrated error.
pub struct NoisyExtrapolator {
    chain: ChainFactorization,
    epsilon: BigRational,
    mode: SignMode,
    overrides: BTreeMap<BitStr, BigRational>,
    memo: DrawMemo,
}

pub fn noisy_extrapolator(
    d: &BitStringDist,
    epsilon: BigRational,
    mode: SignMode,
) -> Result<NoisyExtrapolator, ExtrapolateError> {
    if epsilon.is_negative() || epsilon > frac(1, 2) {
        return Err(ExtrapolateError::BadConfig(format!(
            "slack {} outside [0, 1/2]",
            crate::ratio::frac_str(&epsilon)
        )));
    }
    Ok(NoisyExtrapolator {
        chain: chain_factorize(d)?,
        epsilon,
        mode,
        overrides: BTreeMap::new(),
        memo: DrawMemo::new(),
    })
}

impl NoisyExtrapolator {
    /// Pin the sampled conditional at one prefix, replacing the ±ε rule
    /// there. Declared slack is unchanged: overrides are how tests model an
    /// extrapolator whose error budget is spent in one place.
    pub fn with_override(mut self, prefix: BitStr, p_one: BigRational) -> Self {
        assert!(!p_one.is_negative() && p_one <= BigRational::one());
        self.overrides.insert(prefix, p_one);
        self.memo = DrawMemo::new();
        self
    }

    fn perturbed(&self, prefix: &BitStr) -> Conditional {
        if let Some(p) = self.overrides.get(prefix) {
            return Conditional { p_one: p.clone(), off_support: false };
        }
        let base = self.chain.conditional(prefix);
        let toward_one = match self.mode {
            SignMode::Toward1 => true,
            SignMode::Toward0 => false,
            SignMode::Random(seed) => {
                let key = (u64::from(prefix.len()) << 32) | u64::from(prefix.value());
                mix(seed, key) & 1 == 1
            }
        };
        let shifted = if toward_one {
            (base.p_one + &self.epsilon).min(BigRational::one())
        } else {
            (base.p_one - &self.epsilon).max(BigRational::zero())
        };
        Conditional { p_one: shifted, off_support: base.off_support }
    }
}

impl Extrapolator for NoisyExtrapolator {
    fn n(&self) -> u32 {
        self.chain.n()
    }

    fn slack(&self) -> BigRational {
        self.epsilon.clone()
    }

    fn conditional(&self, i: u32, prefix: &BitStr) -> Option<Conditional> {
        debug_assert_eq!(prefix.len(), i - 1);
        Some(self.perturbed(prefix))
    }

    fn next_bit(&self, i: u32, prefix: &BitStr, rng: &mut LabRng) -> u8 {
        debug_assert_eq!(prefix.len(), i - 1);
        self.memo.draw(prefix, || self.perturbed(prefix).p_one, rng)
    }
}

// ---------------------------------------------------------------------------
// The estimator.
// ---------------------------------------------------------------------------

/// Estimation knobs. `reps` replaces the proof's astronomically large
/// repetition count; `a`, `b`, `d` are the analysis parameters the error
/// accounting quotes, and `c` the target multiplicative accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub reps: u64,
    pub c: BigRational,
    pub q: u32,
    pub a: u64,
    pub b: u64,
    pub d: u64,
}

impl EstimateConfig {
    /// The analysis instantiation a = n^{q+2}, b = d = n^{q+4}.
    pub fn paper_defaults(n: u32, q: u32, reps: u64, c: BigRational) -> Self {
        let a = u64::from(n).pow(q + 2);
        let b = u64::from(n).pow(q + 4);
        EstimateConfig { reps, c, q, a, b, d: b }
    }

    pub fn validate(&self) -> Result<(), ExtrapolateError> {
        if self.reps == 0 {
            return Err(ExtrapolateError::BadConfig("reps must be positive".into()));
        }
        if self.c <= BigRational::one() {
            return Err(ExtrapolateError::BadConfig(
                "multiplicative target c must exceed 1".into(),
            ));
        }
        if self.a == 0 || self.b == 0 || self.d == 0 {
            return Err(ExtrapolateError::BadConfig("a, b, d must be positive".into()));
        }
        Ok(())
    }
}

/// The audit row for one index: everything needed to replay the count.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEstimate {
    pub i: u32,
    pub target_bit: u8,
    pub count: u64,
    pub reps: u64,
    /// count / reps.
    pub p_tilde: BigRational,
    /// The queried prefix had zero mass under the extrapolator's reference
    /// distribution, so the sampled conditional was the 1/2 convention.
    pub off_support: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub y: BitStr,
    pub per_index: Vec<IndexEstimate>,
    /// Π p̃[y_i], exact.
    pub product: BigRational,
    pub off_support: bool,
}

/// The chain-rule estimator: for each index, draw `reps` next bits at y's
/// prefix, take the empirical frequency of y_i, and multiply the
/// frequencies. A fresh generator is seeded per call so every estimate is
/// independently replayable from (y, seed).
pub fn estimate(
    y: &BitStr,
    ext: &dyn Extrapolator,
    cfg: &EstimateConfig,
    seed: u64,
) -> EstimateResult {
    cfg.validate().expect("estimate called with an invalid config");
    let n = ext.n();
    assert_eq!(y.len(), n, "estimate target has wrong length");
    let mut rng = lab_rng(seed);
    let mut per_index = Vec::with_capacity(n as usize);
    let mut product = BigRational::one();
    let mut off_support = false;
    for i in 1..=n {
        let prefix = y.prefix(i - 1);
        let target_bit = y.bit(i);
        let mut count = 0u64;
        for _ in 0..cfg.reps {
            if ext.next_bit(i, &prefix, &mut rng) == target_bit {
                count += 1;
            }
        }
        let p_tilde = BigRational::new(count.into(), cfg.reps.into());
        let off = ext
            .conditional(i, &prefix)
            .map_or(false, |c| c.off_support);
        off_support |= off;
        product *= &p_tilde;
        per_index.push(IndexEstimate {
            i,
            target_bit,
            count,
            reps: cfg.reps,
            p_tilde,
            off_support: off,
        });
    }
    EstimateResult { y: *y, per_index, product, off_support }
}

/// The estimator with the empirical frequencies replaced by the exact
/// conditionals: the chain-rule identity makes this Pr[y] for tabular
/// zero-slack extrapolators, on support and off.
pub fn substituted_product(
    y: &BitStr,
    ext: &dyn Extrapolator,
) -> Result<BigRational, ExtrapolateError> {
    let n = ext.n();
    assert_eq!(y.len(), n);
    let mut acc = BigRational::one();
    for i in 1..=n {
        let c = ext
            .conditional(i, &y.prefix(i - 1))
            .ok_or(ExtrapolateError::NotTabular)?;
        let p = if y.bit(i) == 1 {
            c.p_one
        } else {
            BigRational::one() - c.p_one
        };
        if p.is_zero() {
            return Ok(BigRational::zero());
        }
        acc *= p;
    }
    Ok(acc)
}

/// Is estimate within the multiplicative band [truth/c, truth·c]?
pub fn within_factor(est: &BigRational, truth: &BigRational, c: &BigRational) -> bool {
    // truth/c <= est  <=>  truth <= est·c, and est <= truth·c.
    truth <= &(est * c) && est <= &(truth * c)
}

// ---------------------------------------------------------------------------
// Exact deviation accounting for tabular extrapolators.
// ---------------------------------------------------------------------------

/// Exact census of how far an extrapolator's conditionals sit from a
/// reference distribution's true conditionals, measured over the reference
/// support.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    /// Mass of y whose prefix walk hits a deviation exceeding b·slack.
    pub violating_mass: BigRational,
    /// Largest single-index deviation seen anywhere on support.
    pub max_deviation: BigRational,
    /// E_{y←D}[deviation at index i], one entry per index: the quantity the
    /// slack contract bounds on average.
    pub per_index_average: Vec<BigRational>,
    /// The cutoff b·slack that defines a violation.
    pub threshold: BigRational,
    /// n/b: what the union-plus-averaging argument promises whenever every
    /// per-index average is at most the slack.
    pub markov_bound: BigRational,
}

/// Measures the mass of strings with an index whose sampled conditional
/// deviates from the true conditional by more than b·slack. With per-index
/// average deviation ≤ slack, that mass is at most n/b.
pub fn conditional_deviation_census(
    d: &BitStringDist,
    ext: &dyn Extrapolator,
    b: u64,
) -> Result<DeviationReport, ExtrapolateError> {
    assert!(b > 0);
    let chain = chain_factorize(d)?;
    let n = d.n();
    assert_eq!(ext.n(), n, "extrapolator width disagrees with distribution");
    let threshold = ext.slack() * BigRational::from_integer(b.into());
    let mut violating_mass = BigRational::zero();
    let mut max_deviation = BigRational::zero();
    let mut per_index_average = vec![BigRational::zero(); n as usize];
    for (y, p) in d.support() {
        let mut worst = BigRational::zero();
        for i in 1..=n {
            let prefix = y.prefix(i - 1);
            let true_c = chain.conditional(&prefix).p_one;
            let ext_c = ext
                .conditional(i, &prefix)
                .ok_or(ExtrapolateError::NotTabular)?
                .p_one;
            let dev = (true_c - ext_c).abs();
            per_index_average[(i - 1) as usize] += &dev * p;
            if dev > worst {
                worst = dev;
            }
        }
        if worst > threshold {
            violating_mass += p;
        }
        if worst > max_deviation {
            max_deviation = worst;
        }
    }
    Ok(DeviationReport {
        violating_mass,
        max_deviation,
        per_index_average,
        threshold,
        markov_bound: BigRational::new(n.into(), b.into()),
    })
}

/// 2n·exp(−2·reps/d²): the chance any index's empirical frequency misses
/// its target conditional by more than 1/d. Printed with every estimate
/// report; at desk-scale reps this is often vacuously ≥ 1, and that fact is
/// part of the record.
pub fn hoeffding_failure_bound(cfg: &EstimateConfig, n: u32) -> f64 {
    let d = cfg.d as f64;
    2.0 * f64::from(n) * (-2.0 * cfg.reps as f64 / (d * d)).exp()
}

// ---------------------------------------------------------------------------
// Whole-distribution accuracy sweep (the shape of experiment E1).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub y: BitStr,
    pub truth: BigRational,
    pub estimate: BigRational,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracySweep {
    pub rows: Vec<AccuracyRow>,
    /// Σ D(y) over passing y: the weighted success mass.
    pub weighted_pass_mass: BigRational,
    pub hoeffding_bound: f64,
}

/// Runs the estimator at every support string of `d`, seeding each string's
/// run from (seed, y) so the sweep is order-independent and replayable.
pub fn estimate_accuracy_sweep(
    d: &BitStringDist,
    ext: &dyn Extrapolator,
    cfg: &EstimateConfig,
    seed: u64,
) -> Result<AccuracySweep, ExtrapolateError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut weighted_pass_mass = BigRational::zero();
    for (y, truth) in d.support() {
        let key = (u64::from(y.len()) << 32) | u64::from(y.value());
        let res = estimate(y, ext, cfg, mix(seed, key));
        let pass = within_factor(&res.product, truth, &cfg.c);
        if pass {
            weighted_pass_mass += truth;
        }
        rows.push(AccuracyRow {
            y: *y,
            truth: truth.clone(),
            estimate: res.product,
            pass,
        });
    }
    Ok(AccuracySweep {
        rows,
        weighted_pass_mass,
        hoeffding_bound: hoeffding_failure_bound(cfg, d.n()),
    })
}

/// One JSON line per (y, index): the replayable audit record of a single
/// estimate call.
pub fn audit_jsonl(res: &EstimateResult) -> String {
    use serde_json::json;
    res.per_index
        .iter()
        .map(|ie| {
            serde_json::to_string(&json!({
                "y": res.y.to_string(),
                "i": ie.i,
                "target_bit": ie.target_bit,
                "count": ie.count,
                "reps": ie.reps,
                "p_tilde": crate::ratio::frac_str(&ie.p_tilde),
                "off_support": ie.off_support,
            }))
            .expect("audit row serialization never fails")
                + "\n"
        })
        .collect()
}

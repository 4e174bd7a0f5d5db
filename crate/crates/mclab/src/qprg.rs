//! Generator-side constructions: statistically-far generators and their
//! parallel amplification, the half-uniform mixture instance distribution,
//! the two counting claims behind its hardness (uniform strings are complex,
//! generator strings are simple), and the exact decider-to-distinguisher
//! algebra.
//!
//! Everything here is enumerable: generators are carried as exact output
//! distributions (built from samplers when needed), and every inequality the
//! analysis displays is either decided in exact rational arithmetic or
//! reported with its measured slack.

use crate::bits::BitStr;
use crate::dist::{
    mixture, parallel_repeat_sd, statistical_distance, truncated_repeat_dist, BitStringDist,
    DistError,
};
use crate::gapk::{exact_error_account, label_instance, Decider, GapKParams, GapkError, Label};
use crate::ratio::{cmp_exp_neg, frac, parse_frac, pow2};
use crate::sampler::{Sampler, SamplerError};
use crate::utm::{OracleTable, UtmError};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QprgError {
    #[error("generator outputs {got} bits where {expected} were required")]
    LengthMismatch { got: u32, expected: u32 },
    #[error("claimed distance {claimed} exceeds the exact distance {actual}")]
    ClaimedSdTooHigh { claimed: String, actual: String },
    #[error("distance hypothesis unmet: need SD >= {required}, generator has {actual}")]
    PreconditionUnmet { required: String, actual: String },
    #[error("verification needs {needed} product bits, cap is {cap}")]
    BudgetExceeded { needed: u32, cap: u32 },
    #[error("bad spec file: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Gapk(#[from] GapkError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Utm(#[from] UtmError),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for QprgError {
    fn from(e: std::io::Error) -> Self {
        QprgError::Io(e.to_string())
    }
}

/// Widest product distribution amplification will materialize for exact
/// verification.
pub const AMPLIFY_WIDTH_CAP: u32 = 24;

/// A generator carried as its exact output distribution together with the
/// distance from uniform it claims. Construction verifies the claim, so a
/// live value is always honest.
#[derive(Debug, Clone, PartialEq)]
pub struct QprgSpec {
    pub dist: BitStringDist,
    pub claimed_sd: BigRational,
}

impl QprgSpec {
    pub fn new(dist: BitStringDist, claimed_sd: BigRational) -> Result<Self, QprgError> {
        let actual = statistical_distance(&dist, &BitStringDist::uniform(dist.n()))?.exact();
        if actual < claimed_sd {
            return Err(QprgError::ClaimedSdTooHigh {
                claimed: crate::ratio::frac_str(&claimed_sd),
                actual: crate::ratio::frac_str(&actual),
            });
        }
        Ok(QprgSpec { dist, claimed_sd })
    }

    pub fn from_sampler(s: &dyn Sampler, claimed_sd: BigRational) -> Result<Self, QprgError> {
        Self::new(s.exact_dist()?, claimed_sd)
    }

    pub fn n(&self) -> u32 {
        self.dist.n()
    }

    /// Exact SD(gen, uniform).
    pub fn sd_from_uniform(&self) -> BigRational {
        statistical_distance(&self.dist, &BitStringDist::uniform(self.n()))
            .expect("widths match by construction")
            .exact()
    }
}

/// An advice-indexed family of generators with one designated good advice.
#[derive(Debug, Clone, PartialEq)]
pub struct NuQprgSpec {
    pub branches: Vec<BitStringDist>,
    pub mu_star: usize,
    pub claimed_sd: BigRational,
}

impl NuQprgSpec {
    pub fn new(
        branches: Vec<BitStringDist>,
        mu_star: usize,
        claimed_sd: BigRational,
    ) -> Result<Self, QprgError> {
        let Some(first) = branches.first() else {
            return Err(QprgError::BadSpec("advice family is empty".into()));
        };
        let n = first.n();
        for b in &branches {
            if b.n() != n {
                return Err(QprgError::LengthMismatch { got: b.n(), expected: n });
            }
        }
        if mu_star >= branches.len() {
            return Err(QprgError::BadSpec(format!(
                "good advice {mu_star} outside family of {}",
                branches.len()
            )));
        }
        let star_sd =
            statistical_distance(&branches[mu_star], &BitStringDist::uniform(n))?.exact();
        if star_sd < claimed_sd {
            return Err(QprgError::ClaimedSdTooHigh {
                claimed: crate::ratio::frac_str(&claimed_sd),
                actual: crate::ratio::frac_str(&star_sd),
            });
        }
        Ok(NuQprgSpec { branches, mu_star, claimed_sd })
    }

    pub fn n(&self) -> u32 {
        self.branches[0].n()
    }
}

/// ⌈n^(num/den)⌉ in exact integer arithmetic: the least a with a^den >= n^num.
pub fn ceil_pow_frac(n: u32, num: u32, den: u32) -> u32 {
    assert!(n >= 1 && den >= 1);
    let target = BigUint::from(n).pow(num);
    let mut a = 1u32;
    while BigUint::from(a).pow(den) < target {
        a += 1;
    }
    a
}

/// Integer stand-in for n^tau at desk scale: t = ⌈n^(num/den)⌉. Every
/// inequality in the analysis survives the substitution because the
/// hypotheses are stated with the same t.
pub fn far_exponent(n: u32, tau_num: u32, tau_den: u32) -> u32 {
    ceil_pow_frac(n, tau_num, tau_den)
}

/// B-fold parallel repetition of a short generator, truncated to n bits.
#[derive(Debug, Clone)]
pub struct AmplifiedQprg {
    pub base: QprgSpec,
    /// Base output length A = ⌈n^((1-tau)/2)⌉.
    pub a_len: u32,
    /// Copies B = ⌈n^((1+tau)/2)⌉.
    pub copies: u32,
    pub n: u32,
    pub tau: (u32, u32),
    /// The first n bits of the B-fold product.
    pub output: BitStringDist,
    pub base_sd: BigRational,
    /// Exact SD of the untruncated product from uniform.
    pub product_sd: BigRational,
    /// Exact SD of the truncated output from uniform: the truncation cost
    /// measured rather than assumed away.
    pub truncated_sd: BigRational,
    /// product_sd >= 1 - exp(-B * base_sd), decided exactly. True with
    /// equality-room for support-dominant bases, false in general.
    pub exp_bound_holds: bool,
}

impl AmplifiedQprg {
    /// A base already indistinguishable from uniform amplifies to nothing;
    /// the bound is vacuously true and should be flagged, not celebrated.
    pub fn is_degenerate(&self) -> bool {
        self.base_sd.is_zero()
    }
}

/// Runs B = ⌈n^((1+tau)/2)⌉ copies of the base generator (whose length must
/// be A = ⌈n^((1-tau)/2)⌉) and keeps the first n bits. All three distances
/// are computed exactly; the exponential lower bound is decided exactly.
pub fn amplify(base: &QprgSpec, n: u32, tau: (u32, u32)) -> Result<AmplifiedQprg, QprgError> {
    let (num, den) = tau;
    assert!(num < den, "tau must be strictly below 1");
    let a_len = ceil_pow_frac(n, den - num, 2 * den);
    let copies = ceil_pow_frac(n, den + num, 2 * den);
    if base.n() != a_len {
        return Err(QprgError::LengthMismatch { got: base.n(), expected: a_len });
    }
    let width = a_len * copies;
    if width > AMPLIFY_WIDTH_CAP {
        return Err(QprgError::BudgetExceeded { needed: width, cap: AMPLIFY_WIDTH_CAP });
    }
    debug_assert!(width >= n, "ceilings keep the product at least n bits");
    let base_sd = base.sd_from_uniform();
    let product_sd = parallel_repeat_sd(&base.dist, copies)?;
    let output = truncated_repeat_dist(&base.dist, copies, n)?;
    let truncated_sd =
        statistical_distance(&output, &BitStringDist::uniform(n))?.exact();
    // product_sd >= 1 - exp(-B*s)  <=>  1 - product_sd <= exp(-B*s).
    let exponent = BigRational::from_integer(copies.into()) * &base_sd;
    let residual_mass = BigRational::one() - &product_sd;
    let exp_bound_holds =
        cmp_exp_neg(&exponent, &residual_mass) != std::cmp::Ordering::Greater;
    Ok(AmplifiedQprg {
        base: base.clone(),
        a_len,
        copies,
        n,
        tau,
        output,
        base_sd,
        product_sd,
        truncated_sd,
        exp_bound_holds,
    })
}

/// The instance distribution: a fair mix of the generator and uniform.
pub fn mixture_instance(gen: &BitStringDist) -> Result<BitStringDist, QprgError> {
    let u = BitStringDist::uniform(gen.n());
    Ok(mixture(&[(frac(1, 2), gen), (frac(1, 2), &u)])?)
}

/// The advice-averaged instance distribution: advice is drawn uniformly,
/// then the chosen branch is mixed half-and-half with uniform. The good
/// branch ends up with weight 1/(2m), which is exactly why only weak
/// hardness survives the averaging.
pub fn nu_mixture_instance(spec: &NuQprgSpec) -> Result<BitStringDist, QprgError> {
    let n = spec.n();
    let u = BitStringDist::uniform(n);
    let m = spec.branches.len() as i64;
    let mut parts: Vec<(BigRational, &BitStringDist)> =
        spec.branches.iter().map(|b| (frac(1, 2 * m), b)).collect();
    parts.push((frac(1, 2), &u));
    Ok(mixture(&parts)?)
}

// ---------------------------------------------------------------------------
// The two counting claims.
// ---------------------------------------------------------------------------

/// Exact uniform mass of compressible strings at depth n - delta, against
/// the counting bound 2^(-delta+1).
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimHighReport {
    pub n: u32,
    pub delta: u32,
    /// |{x in {0,1}^n : K(x) <= n - delta}|, by direct scan.
    pub low_count: u64,
    pub low_mass: BigRational,
    /// 2^(-delta+1).
    pub bound: BigRational,
    pub holds: bool,
    /// delta > n: no depth to query, mass is 0 by fiat.
    pub vacuous: bool,
}

/// Uniform strings are hard to compress: mass of {K <= n - delta} is at most
/// 2^(-delta+1). The count is taken by scanning all 2^n strings through the
/// oracle; `count_low_complexity` is the independent second path tests
/// compare against.
pub fn verify_claim_high(
    oracle: &OracleTable,
    n: u32,
    delta: u32,
) -> Result<ClaimHighReport, QprgError> {
    if n > oracle.max_output_len() {
        return Err(QprgError::Gapk(GapkError::OracleTooNarrow {
            cap: oracle.max_output_len(),
            n,
        }));
    }
    let bound = pow2(1 - i64::from(delta));
    if delta > n {
        return Ok(ClaimHighReport {
            n,
            delta,
            low_count: 0,
            low_mass: BigRational::zero(),
            bound,
            holds: true,
            vacuous: true,
        });
    }
    let s = n - delta;
    if s > oracle.l_max() {
        return Err(QprgError::Utm(UtmError::QueryTooDeep { s, l_max: oracle.l_max() }));
    }
    let mut low_count = 0u64;
    for x in BitStr::all(n) {
        match oracle.k(&x) {
            crate::utm::KBound::Finite(k) if k <= s => low_count += 1,
            _ => {}
        }
    }
    let low_mass = BigRational::new(
        low_count.into(),
        num_bigint::BigInt::from(2).pow(n),
    );
    let holds = low_mass <= bound;
    Ok(ClaimHighReport { n, delta, low_count, low_mass, bound, holds, vacuous: false })
}

/// The probability partition from the generator-strings-are-simple claim:
/// A below uniform, B between uniform and the cutoff G * 2^(-n+t), C at or
/// above the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionReport {
    pub n: u32,
    /// Integer stand-in for n^tau; recorded so the rounding is visible.
    pub t_exp: u32,
    pub g: BigRational,
    pub cutoff: BigRational,
    pub a_size: u64,
    pub a_mass: BigRational,
    pub b_size: u64,
    pub b_mass: BigRational,
    pub c_size: u64,
    pub c_mass: BigRational,
    /// |B| + |C| <= 2^(n-t), exactly.
    pub bc_count_bound: BigRational,
    pub bc_within_bound: bool,
    /// mass(C) >= 1 - G - 2^(-t), exactly.
    pub c_mass_floor: BigRational,
    pub c_mass_ok: bool,
    pub sd_from_uniform: BigRational,
    /// Largest table complexity over C; None when some member exceeds L_max.
    pub max_c_complexity: Option<u32>,
    pub c_beyond_table: u64,
    /// n - t + log2(1/G): the nominal description-length target, reported
    /// for comparison with the measured complexities, never asserted.
    pub nominal_k_threshold: f64,
}

/// Verifies the partition argument for a generator that is (1 - 2^-t)-far
/// from uniform: few strings can sit above the uniform level, and almost
/// all generator mass sits above the cutoff, where strings are indexable
/// and therefore simple.
pub fn verify_claim_low(
    gen: &BitStringDist,
    g: &BigRational,
    t_exp: u32,
    oracle: &OracleTable,
) -> Result<PartitionReport, QprgError> {
    assert!(g.is_positive(), "the cutoff scale G must be positive");
    let n = gen.n();
    let required = BigRational::one() - pow2(-i64::from(t_exp));
    let sd = statistical_distance(gen, &BitStringDist::uniform(n))?.exact();
    if sd < required {
        return Err(QprgError::PreconditionUnmet {
            required: crate::ratio::frac_str(&required),
            actual: crate::ratio::frac_str(&sd),
        });
    }
    let uniform_level = pow2(-i64::from(n));
    let cutoff = g * pow2(i64::from(t_exp) - i64::from(n));
    let mut a_size = 0u64;
    let mut a_mass = BigRational::zero();
    let mut b_size = 0u64;
    let mut b_mass = BigRational::zero();
    let mut c_size = 0u64;
    let mut c_mass = BigRational::zero();
    let mut max_c_complexity: Option<u32> = Some(0);
    let mut c_beyond_table = 0u64;
    for x in BitStr::all(n) {
        let p = gen.prob(&x);
        if p < uniform_level {
            a_size += 1;
            a_mass += p;
        } else if p < cutoff {
            b_size += 1;
            b_mass += p;
        } else {
            c_size += 1;
            c_mass += p;
            match oracle.k(&x) {
                crate::utm::KBound::Finite(k) => {
                    max_c_complexity = max_c_complexity.map(|m| m.max(k));
                }
                crate::utm::KBound::ExceedsLmax => {
                    c_beyond_table += 1;
                    max_c_complexity = None;
                }
            }
        }
    }
    let bc_count_bound = pow2(i64::from(n) - i64::from(t_exp));
    let bc_within_bound =
        BigRational::from_integer((b_size + c_size).into()) <= bc_count_bound;
    let c_mass_floor = BigRational::one() - g - pow2(-i64::from(t_exp));
    let c_mass_ok = c_mass >= c_mass_floor;
    let nominal_k_threshold =
        f64::from(n) - f64::from(t_exp) + crate::ratio::approx_log2(&(BigRational::one() / g));
    Ok(PartitionReport {
        n,
        t_exp,
        g: g.clone(),
        cutoff,
        a_size,
        a_mass,
        b_size,
        b_mass,
        c_size,
        c_mass,
        bc_count_bound,
        bc_within_bound,
        c_mass_floor,
        c_mass_ok,
        sd_from_uniform: sd,
        max_c_complexity,
        c_beyond_table,
        nominal_k_threshold,
    })
}

// ---------------------------------------------------------------------------
// Decider-to-distinguisher algebra.
// ---------------------------------------------------------------------------

/// Pr[decider accepts] under d: the output-1 probability of the induced
/// distinguisher.
pub fn acceptance_mass(decider: &dyn Decider, d: &BitStringDist) -> BigRational {
    d.support().map(|(x, p)| p * decider.p_yes(x)).sum()
}

/// Every term of the exact accounting identity tying a decider's error on
/// the half-uniform mixture to its distinguishing advantage:
///
///   2*err = 1 - (P_gen[yes] - P_uni[yes]) - offYes_gen - offNo_uni
///           + slack_gen + slack_uni
///
/// where offYes_gen is the generator mass on non-yes instances (what the
/// generator-simplicity claim bounds), offNo_uni the uniform mass on non-no
/// instances (what the uniform-complexity claim bounds), and the slacks are
/// the decider's "lucky" acceptances/rejections outside the promise sides.
/// `residual` is the identity's defect and must be exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageIdentity {
    pub p_yes_gen: BigRational,
    pub p_yes_uniform: BigRational,
    pub advantage_signed: BigRational,
    pub advantage: BigRational,
    pub mixture_error_total: BigRational,
    pub gen_off_yes_mass: BigRational,
    pub uniform_off_no_mass: BigRational,
    pub slack_gen: BigRational,
    pub slack_uniform: BigRational,
    pub residual: BigRational,
    /// 2^(-(n-s2)+1): what the uniform-complexity claim allows for
    /// uniform_off_no_mass (vacuous when s2 >= n).
    pub claim_high_allowance: BigRational,
    pub off_no_within_allowance: bool,
}

pub fn advantage_identity(
    decider: &dyn Decider,
    gen: &BitStringDist,
    params: &GapKParams,
    oracle: &OracleTable,
) -> Result<AdvantageIdentity, QprgError> {
    let n = gen.n();
    if n != params.n {
        return Err(QprgError::LengthMismatch { got: n, expected: params.n });
    }
    let uniform = BitStringDist::uniform(n);
    let mix = mixture_instance(gen)?;
    let errors = exact_error_account(decider, &mix, params, oracle)?;
    let p_yes_gen = acceptance_mass(decider, gen);
    let p_yes_uniform = acceptance_mass(decider, &uniform);
    let mut gen_off_yes_mass = BigRational::zero();
    let mut uniform_off_no_mass = BigRational::zero();
    let mut slack_gen = BigRational::zero();
    let mut slack_uniform = BigRational::zero();
    for x in BitStr::all(n) {
        let label = label_instance(&x, params, oracle)?.label;
        let p_acc = decider.p_yes(&x);
        let pg = gen.prob(&x);
        let pu = uniform.prob(&x);
        match label {
            Label::Yes => {
                slack_uniform += &pu * frac(2, 1) * (BigRational::one() - &p_acc);
            }
            Label::No => {
                gen_off_yes_mass += &pg;
                slack_gen += &pg * frac(2, 1) * &p_acc;
            }
            Label::PromiseViolating => {
                gen_off_yes_mass += &pg;
                uniform_off_no_mass += &pu;
                slack_gen += &pg * &p_acc;
                slack_uniform += &pu * (BigRational::one() - &p_acc);
            }
        }
        if label != Label::No && label != Label::PromiseViolating {
            // Yes instances are also "not no".
            uniform_off_no_mass += &pu;
        }
    }
    let advantage_signed = &p_yes_gen - &p_yes_uniform;
    let advantage = advantage_signed.abs();
    let rhs = BigRational::one() - &advantage_signed - &gen_off_yes_mass
        - &uniform_off_no_mass
        + &slack_gen
        + &slack_uniform;
    let residual = frac(2, 1) * &errors.total - rhs;
    let claim_high_allowance = pow2(1 - (i64::from(n) - i64::from(params.s2)));
    let off_no_within_allowance = uniform_off_no_mass <= claim_high_allowance;
    Ok(AdvantageIdentity {
        p_yes_gen,
        p_yes_uniform,
        advantage_signed,
        advantage,
        mixture_error_total: errors.total,
        gen_off_yes_mass,
        uniform_off_no_mass,
        slack_gen,
        slack_uniform,
        residual,
        claim_high_allowance,
        off_no_within_allowance,
    })
}

// ---------------------------------------------------------------------------
// Spec files: JSON referencing a sampler file.
// ---------------------------------------------------------------------------

/// Loads `{"sampler": "<path>", "claimed_sd": "p/q"}`; the sampler path is
/// resolved relative to the spec file and may hold either a circuit or a
/// seeded-map sampler (detected by its keys).
pub fn load_qprg_spec(path: &Path) -> Result<QprgSpec, QprgError> {
    let text = std::fs::read_to_string(path)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| QprgError::BadSpec(e.to_string()))?;
    let sampler_rel = v
        .get("sampler")
        .and_then(|s| s.as_str())
        .ok_or_else(|| QprgError::BadSpec("missing \"sampler\" path".into()))?;
    let claimed = v
        .get("claimed_sd")
        .and_then(|s| s.as_str())
        .ok_or_else(|| QprgError::BadSpec("missing \"claimed_sd\"".into()))?;
    let claimed_sd =
        parse_frac(claimed).map_err(|e| QprgError::BadSpec(e.to_string()))?;
    let sampler_path = path.parent().unwrap_or(Path::new(".")).join(sampler_rel);
    let sampler_text = std::fs::read_to_string(&sampler_path)?;
    let sv: serde_json::Value = serde_json::from_str(&sampler_text)
        .map_err(|e| QprgError::BadSpec(e.to_string()))?;
    let dist = if sv.get("qubits").is_some() {
        crate::sampler::circuit_from_json(&sampler_text)?.exact_dist()?
    } else if sv.get("seed_len").is_some() {
        crate::sampler::seeded_from_json(&sampler_text)?.exact_dist()?
    } else {
        return Err(QprgError::BadSpec(
            "sampler file is neither a circuit nor a seeded map".into(),
        ));
    };
    QprgSpec::new(dist, claimed_sd)
}

//! The seed-inversion side: a prefix-exposure function family over a seeded
//! sampler, a brute-force inverter with exactly the true preimage posterior,
//! a next-bit extrapolator built from inversion, and exact verification of
//! the statistical-distance chain that carries inverter quality over to
//! extrapolation quality.
//!
//! Everything is enumerable (seed lengths at or below twenty bits), so every
//! distance in the chain is computed exactly and every displayed inequality
//! is asserted rather than trusted.

use crate::bits::BitStr;
use crate::dist::{
    chain_factorize, mixture, statistical_distance, BitStringDist, Conditional, DistError,
};
use crate::extrapolate::Extrapolator;
use crate::ratio::frac_str;
use crate::rng::LabRng;
use crate::sampler::{Sampler, SamplerError, SeededSampler, TableSampler};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("bad function family: {0}")]
    BadFamily(String),
    #[error("seed enumeration needs {t} bits, cap is {cap}")]
    BudgetExceeded { t: u32, cap: u32 },
    #[error("image {0} has no preimage")]
    NoPreimage(String),
    #[error("bad family file: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for ClassicalError {
    fn from(e: std::io::Error) -> Self {
        ClassicalError::Io(e.to_string())
    }
}

/// Largest seed length the brute-force inverter will enumerate.
pub const MAX_INVERTER_SEED_LEN: u32 = 20;

/// What the prefix-exposure function outputs: an index together with that
/// many leading output bits, or the designated one-bit sentinel that every
/// out-of-range index code maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Image {
    InRange { i: u32, prefix: BitStr },
    Sentinel,
}

impl Image {
    /// Canonical bit encoding: the fixed-width index code followed by the
    /// prefix bits; the sentinel is the single bit 0. Lengths differ across
    /// indices, so no two distinct images collide.
    pub fn encode(&self, code_width: u32) -> BitStr {
        match self {
            Image::InRange { i, prefix } => {
                BitStr::new(i - 1, code_width).concat(prefix)
            }
            Image::Sentinel => BitStr::new(0, 1),
        }
    }
}

impl std::fmt::Display for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Image::InRange { i, prefix } => write!(f, "({i}, {prefix})"),
            Image::Sentinel => write!(f, "(sentinel)"),
        }
    }
}

/// The function family: on input a t-bit seed and a fixed-width index code,
/// run the seeded sampler and reveal the indexed number of leading output
/// bits (together with the index). Index codes are w = ceil(log2(n-1)) bits;
/// code value v names index v + 1, and codes naming an index above n - 1
/// take the sentinel branch.
#[derive(Debug, Clone)]
pub struct FnFamily {
    sampler: SeededSampler,
    n: u32,
    t: u32,
    code_width: u32,
}

impl FnFamily {
    pub fn new(sampler: SeededSampler) -> Result<Self, ClassicalError> {
        let n = sampler.n();
        if n < 2 {
            return Err(ClassicalError::BadFamily(
                "need at least two output bits to expose a proper prefix".into(),
            ));
        }
        let t = sampler.seed_len();
        let mut code_width = 0u32;
        while (1u32 << code_width) < n - 1 {
            code_width += 1;
        }
        Ok(FnFamily { sampler, n, t, code_width })
    }

    pub fn sampler(&self) -> &SeededSampler {
        &self.sampler
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn code_width(&self) -> u32 {
        self.code_width
    }

    /// Total input length: seed bits plus index-code bits.
    pub fn input_len(&self) -> u32 {
        self.t + self.code_width
    }

    /// The code naming index i (1-based, within 1..=n-1).
    pub fn code_for(&self, i: u32) -> BitStr {
        assert!((1..self.n).contains(&i), "index {i} outside 1..={}", self.n - 1);
        BitStr::new(i - 1, self.code_width)
    }

    /// The index a code names, or None on the sentinel branch.
    pub fn decode_index(&self, code: &BitStr) -> Option<u32> {
        assert_eq!(code.len(), self.code_width, "code has wrong width");
        let i = code.value() + 1;
        (i <= self.n - 1).then_some(i)
    }

    /// Number of index codes on the sentinel branch: 2^w - (n - 1).
    pub fn sentinel_codes(&self) -> u32 {
        (1u32 << self.code_width) - (self.n - 1)
    }

    /// Uniform-input mass of the sentinel image.
    pub fn sentinel_mass(&self) -> BigRational {
        BigRational::new(
            self.sentinel_codes().into(),
            num_bigint::BigInt::from(1u64 << self.code_width),
        )
    }

    /// The function itself, total on seed x code.
    pub fn eval(&self, r: &BitStr, code: &BitStr) -> Image {
        match self.decode_index(code) {
            Some(i) => Image::InRange { i, prefix: self.sampler.eval(r).prefix(i) },
            None => Image::Sentinel,
        }
    }

    /// Splits a domain point r || code back into its parts.
    pub fn split_input(&self, input: &BitStr) -> (BitStr, BitStr) {
        assert_eq!(input.len(), self.input_len(), "input has wrong width");
        let r = input.prefix(self.t);
        let code = BitStr::new(input.value() & ((1u32 << self.code_width) - 1), self.code_width);
        (r, code)
    }
}

/// A distributional inverter: on an image it returns a preimage, and its
/// exact conditional output distribution is available for verification. The
/// advertised slack bounds, per image, the distance between that conditional
/// and the true posterior.
pub trait Inverter {
    /// Exact distribution over domain points r || code this inverter returns
    /// on `image`.
    fn posterior(&self, image: &Image) -> Result<BitStringDist, ClassicalError>;

    /// Advertised per-image distributional slack.
    fn delta(&self) -> BigRational;

    /// Draw one preimage (seed, code) from the posterior.
    fn invert(&self, image: &Image, rng: &mut LabRng) -> Result<(BitStr, BitStr), ClassicalError>;
}

/// Inverts by enumerating every seed once at build time; posteriors are the
/// true conditionals of the uniform input distribution given the image, so
/// the advertised slack is zero, exactly.
#[derive(Debug)]
pub struct BruteForceInverter {
    family: FnFamily,
    /// S(r) for every seed, indexed by seed value.
    outputs: Vec<BitStr>,
}

pub fn brute_force_inverter(family: &FnFamily) -> Result<BruteForceInverter, ClassicalError> {
    if family.t() > MAX_INVERTER_SEED_LEN {
        return Err(ClassicalError::BudgetExceeded {
            t: family.t(),
            cap: MAX_INVERTER_SEED_LEN,
        });
    }
    let outputs = BitStr::all(family.t()).map(|r| family.sampler.eval(&r)).collect();
    Ok(BruteForceInverter { family: family.clone(), outputs })
}

impl BruteForceInverter {
    pub fn family(&self) -> &FnFamily {
        &self.family
    }

    /// Seeds consistent with an in-range image.
    fn matching_seeds(&self, i: u32, prefix: &BitStr) -> Vec<BitStr> {
        BitStr::all(self.family.t())
            .filter(|r| self.outputs[r.value() as usize].prefix(i) == *prefix)
            .collect()
    }
}

impl Inverter for BruteForceInverter {
    fn posterior(&self, image: &Image) -> Result<BitStringDist, ClassicalError> {
        let f = &self.family;
        let m = f.input_len();
        match image {
            Image::InRange { i, prefix } => {
                assert_eq!(prefix.len(), *i, "image prefix has wrong length");
                let code = f.code_for(*i);
                let seeds = self.matching_seeds(*i, prefix);
                if seeds.is_empty() {
                    return Err(ClassicalError::NoPreimage(image.to_string()));
                }
                let p = BigRational::new(1.into(), (seeds.len() as u64).into());
                Ok(BitStringDist::from_exact(
                    m,
                    seeds.into_iter().map(|r| (r.concat(&code), p.clone())),
                )?)
            }
            Image::Sentinel => {
                let codes: Vec<BitStr> = BitStr::all(f.code_width())
                    .filter(|c| f.decode_index(c).is_none())
                    .collect();
                if codes.is_empty() {
                    return Err(ClassicalError::NoPreimage(image.to_string()));
                }
                let count = (1u64 << f.t()) * codes.len() as u64;
                let p = BigRational::new(1.into(), count.into());
                let mut entries = Vec::with_capacity(count as usize);
                for r in BitStr::all(f.t()) {
                    for c in &codes {
                        entries.push((r.concat(c), p.clone()));
                    }
                }
                Ok(BitStringDist::from_exact(m, entries)?)
            }
        }
    }

    fn delta(&self) -> BigRational {
        BigRational::zero()
    }

    fn invert(&self, image: &Image, rng: &mut LabRng) -> Result<(BitStr, BitStr), ClassicalError> {
        let drawn = TableSampler::new(self.posterior(image)?).sample(rng);
        Ok(self.family.split_input(&drawn))
    }
}

/// Wraps the brute-force inverter and, with probability delta, returns a
/// fixed junk preimage (the all-zero seed with the image's own index code)
/// instead of a posterior draw. Its conditional is therefore within delta of
/// the true posterior at every image, which is exactly the advertised slack.
pub struct PlantedErrorInverter {
    inner: BruteForceInverter,
    delta: BigRational,
}

pub fn planted_error_inverter(
    family: &FnFamily,
    delta: BigRational,
) -> Result<PlantedErrorInverter, ClassicalError> {
    if delta.is_negative() || delta > BigRational::one() {
        return Err(ClassicalError::BadFamily(format!(
            "planted error {} outside [0, 1]",
            frac_str(&delta)
        )));
    }
    Ok(PlantedErrorInverter { inner: brute_force_inverter(family)?, delta })
}

impl PlantedErrorInverter {
    fn junk_preimage(&self, image: &Image) -> BitStr {
        let f = self.inner.family();
        let zero_seed = BitStr::new(0, f.t());
        let code = match image {
            Image::InRange { i, .. } => f.code_for(*i),
            // Sentinel preimages need an out-of-range code; the all-ones
            // code is out of range whenever the sentinel is reachable.
            Image::Sentinel => BitStr::new((1u32 << f.code_width()) - 1, f.code_width()),
        };
        zero_seed.concat(&code)
    }
}

impl Inverter for PlantedErrorInverter {
    fn posterior(&self, image: &Image) -> Result<BitStringDist, ClassicalError> {
        let truth = self.inner.posterior(image)?;
        if self.delta.is_zero() {
            return Ok(truth);
        }
        let junk = BitStringDist::point_mass(self.junk_preimage(image));
        Ok(mixture(&[
            (BigRational::one() - &self.delta, &truth),
            (self.delta.clone(), &junk),
        ])?)
    }

    fn delta(&self) -> BigRational {
        self.delta.clone()
    }

    fn invert(&self, image: &Image, rng: &mut LabRng) -> Result<(BitStr, BitStr), ClassicalError> {
        let drawn = TableSampler::new(self.posterior(image)?).sample(rng);
        Ok(self.inner.family().split_input(&drawn))
    }
}

// ---------------------------------------------------------------------------
// The extrapolator built from inversion.
// ---------------------------------------------------------------------------

/// Next-bit extrapolation by inversion: to predict bit j+1 from a j-bit
/// prefix, invert the image (j, prefix) to a seed, rerun the sampler on that
/// seed, and read off bit j+1. The first bit needs no inversion: no prefix
/// has been revealed, so the seed is drawn fresh (the posterior given no
/// information is the uniform seed distribution).
pub struct ClassicalExt<'a> {
    family: &'a FnFamily,
    inverter: &'a dyn Inverter,
}

pub fn classical_ext<'a>(
    family: &'a FnFamily,
    inverter: &'a dyn Inverter,
) -> ClassicalExt<'a> {
    ClassicalExt { family, inverter }
}

impl ClassicalExt<'_> {
    /// Exact Pr[emitted bit = 1 | prefix]; the prefix length names the
    /// position being extrapolated (a j-bit prefix predicts bit j+1).
    pub fn conditional_one(&self, prefix: &BitStr) -> Result<BigRational, ClassicalError> {
        let f = self.family;
        let j = prefix.len();
        assert!(j < f.n(), "prefix must leave at least one bit to predict");
        if j == 0 {
            let ones = BitStr::all(f.t())
                .filter(|r| f.sampler.eval(r).bit(1) == 1)
                .count() as u64;
            return Ok(BigRational::new(ones.into(), (1u64 << f.t()).into()));
        }
        let post = self.inverter.posterior(&Image::InRange { i: j, prefix: *prefix })?;
        let mut p_one = BigRational::zero();
        for (input, q) in post.support() {
            let (r, _) = f.split_input(input);
            if f.sampler.eval(&r).bit(j + 1) == 1 {
                p_one += q;
            }
        }
        Ok(p_one)
    }

    /// The sampled three-step procedure: invert, rerun, read the next bit.
    pub fn next_bit_sampled(
        &self,
        prefix: &BitStr,
        rng: &mut LabRng,
    ) -> Result<u8, ClassicalError> {
        let f = self.family;
        let j = prefix.len();
        assert!(j < f.n(), "prefix must leave at least one bit to predict");
        if j == 0 {
            let r = TableSampler::new(BitStringDist::uniform(f.t())).sample(rng);
            return Ok(f.sampler.eval(&r).bit(1));
        }
        let (r, _) = self.inverter.invert(&Image::InRange { i: j, prefix: *prefix }, rng)?;
        Ok(f.sampler.eval(&r).bit(j + 1))
    }

    /// Every conditional over the sampler's own support prefixes, keyed by
    /// prefix, for exact comparison with a chain factorization.
    pub fn conditional_table(&self) -> Result<BTreeMap<BitStr, BigRational>, ClassicalError> {
        let dist = self.family.sampler.seeded_exact_dist()?;
        let chain = chain_factorize(&dist)?;
        let mut table = BTreeMap::new();
        for j in 0..self.family.n() {
            for prefix in BitStr::all(j) {
                if chain.prefix_mass(&prefix).is_zero() {
                    continue;
                }
                table.insert(prefix, self.conditional_one(&prefix)?);
            }
        }
        Ok(table)
    }
}

impl Extrapolator for ClassicalExt<'_> {
    fn n(&self) -> u32 {
        self.family.n()
    }

    fn slack(&self) -> BigRational {
        self.inverter.delta()
    }

    fn conditional(&self, i: u32, prefix: &BitStr) -> Option<Conditional> {
        debug_assert_eq!(prefix.len(), i - 1);
        self.conditional_one(prefix)
            .ok()
            .map(|p_one| Conditional { p_one, off_support: false })
    }

    /// Panics on prefixes outside the sampler's support (no preimage to
    /// invert); estimation only ever queries prefixes of strings it was
    /// handed from the support.
    fn next_bit(&self, i: u32, prefix: &BitStr, rng: &mut LabRng) -> u8 {
        debug_assert_eq!(prefix.len(), i - 1);
        self.next_bit_sampled(prefix, rng)
            .expect("next-bit extrapolation queried off the sampler's support")
    }
}

// ---------------------------------------------------------------------------
// The exact distance chain.
// ---------------------------------------------------------------------------

/// One triangle-inequality row: how far the extrapolated pair distribution
/// sits from the target sampler's own pair distribution at one index, and
/// the three-term bound that controls it.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleStep {
    pub i: u32,
    /// SD(target pair, target prefix + extrapolated bit).
    pub target_sd: BigRational,
    /// SD(target (i+1)-bit marginal, sampler (i+1)-bit marginal).
    pub term_marginal: BigRational,
    /// SD(sampler pair, sampler prefix + extrapolated bit): the chain term.
    pub term_chain: BigRational,
    /// SD(sampler prefix + extrapolated bit, target prefix + extrapolated
    /// bit): the pushforward term.
    pub term_pushforward: BigRational,
    /// term sum minus target, nonnegative by the triangle inequality.
    pub residual: BigRational,
    /// Pushforward never beats its source: term_pushforward <=
    /// SD(target i-bit marginal, sampler i-bit marginal).
    pub pushforward_within_marginal: bool,
}

/// Every exact distance in the chain from the inverter-level joint down to
/// the per-index extrapolation distances, with each displayed inequality
/// asserted as a boolean field rather than silently assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub n: u32,
    pub t: u32,
    pub k: u32,
    pub delta_r: BigRational,
    /// Joint SD({(input, image)}, {(inverted input, image)}) with the index
    /// drawn uniformly from 1..=n-1 (the distribution the chain displays).
    pub inverter_sd: BigRational,
    /// The same joint with the index code drawn uniformly over all fixed-
    /// width codes, sentinel branch included.
    pub inverter_sd_full_domain: BigRational,
    pub sentinel_mass: BigRational,
    /// After appending, on both sides, the next output bit of the carried
    /// seed.
    pub appended_sd: BigRational,
    /// After dropping the carried input, keeping (image, appended bit).
    pub projected_sd: BigRational,
    /// SD at each index i: sampler (i+1)-bit marginal vs sampler prefix +
    /// extrapolated bit.
    pub per_index_sd: Vec<BigRational>,
    pub averaged_sd: BigRational,
    /// inverter_sd >= appended_sd >= projected_sd.
    pub data_processing_ok: bool,
    /// projected_sd >= averaged_sd.
    pub averaging_ok: bool,
    /// The averaging step loses nothing here: the index is visible in the
    /// projected tuple, so projected_sd equals the average exactly.
    pub averaging_tight: bool,
    /// inverter_sd <= advertised slack.
    pub within_advertised_slack: bool,
    /// SD(target, sampler distribution) for context on the triangle rows.
    pub target_sampler_sd: BigRational,
    pub triangle: Vec<TriangleStep>,
    pub triangle_ok: bool,
}

type JointKey = (BitStr, BitStr);

fn sd_of_maps<K: Ord>(
    a: &BTreeMap<K, BigRational>,
    b: &BTreeMap<K, BigRational>,
) -> BigRational {
    let mut total = BigRational::zero();
    for (key, pa) in a {
        match b.get(key) {
            Some(pb) => total += (pa - pb).abs(),
            None => total += pa.abs(),
        }
    }
    for (key, pb) in b {
        if !a.contains_key(key) {
            total += pb.abs();
        }
    }
    total / BigRational::from_integer(2.into())
}

fn add_mass<K: Ord>(map: &mut BTreeMap<K, BigRational>, key: K, mass: BigRational) {
    *map.entry(key).or_insert_with(BigRational::zero) += mass;
}

/// The prefix + extrapolated-bit distribution at index i, with prefixes
/// drawn from `source`. Errors with NoPreimage if `source` puts mass on a
/// prefix the sampler never emits.
fn extrapolated_pair(
    ext: &ClassicalExt<'_>,
    source: &BitStringDist,
    i: u32,
) -> Result<BitStringDist, ClassicalError> {
    let prefixes = source.marginal(i)?;
    let mut entries: Vec<(BitStr, BigRational)> = Vec::new();
    for (prefix, mass) in prefixes.support() {
        let p_one = ext.conditional_one(prefix)?;
        entries.push((prefix.push(1), mass * &p_one));
        entries.push((prefix.push(0), mass * (BigRational::one() - &p_one)));
    }
    Ok(BitStringDist::from_exact(i + 1, entries)?)
}

/// Computes every distance in the chain exactly and checks each displayed
/// inequality: the two data-processing steps, the averaging step, and the
/// per-index triangle step against a target distribution (which must share
/// the sampler's output width, and whose prefixes must lie inside the
/// sampler's support).
pub fn verify_sd_chain(
    family: &FnFamily,
    inverter: &dyn Inverter,
    k: u32,
    target: &BitStringDist,
) -> Result<ChainReport, ClassicalError> {
    let n = family.n();
    let t = family.t();
    assert_eq!(target.n(), n, "target width must match the sampler output");
    let s_dist = family.sampler.seeded_exact_dist()?;
    let ext = classical_ext(family, inverter);

    // Inverter-level joints, index uniform over 1..=n-1. The left side has
    // one row per (seed, index); the right side factors as
    // Pr[image] * posterior(image), so it is walked per distinct image.
    let seed_count = 1u64 << t;
    let picks = u64::from(n - 1);
    let atom = BigRational::new(1.into(), (seed_count * picks).into());
    let mut left0: BTreeMap<JointKey, BigRational> = BTreeMap::new();
    let mut right0: BTreeMap<JointKey, BigRational> = BTreeMap::new();
    let mut left1: BTreeMap<(BitStr, BitStr, u8), BigRational> = BTreeMap::new();
    let mut right1: BTreeMap<(BitStr, BitStr, u8), BigRational> = BTreeMap::new();
    let mut left2: BTreeMap<(BitStr, u8), BigRational> = BTreeMap::new();
    let mut right2: BTreeMap<(BitStr, u8), BigRational> = BTreeMap::new();
    let mut image_counts: BTreeMap<Image, u64> = BTreeMap::new();
    for i in 1..n {
        let code = family.code_for(i);
        for r in BitStr::all(t) {
            let x = family.sampler.eval(&r);
            let image = Image::InRange { i, prefix: x.prefix(i) };
            let y = image.encode(family.code_width());
            let next = x.bit(i + 1);
            add_mass(&mut left0, (r.concat(&code), y), atom.clone());
            add_mass(&mut left1, (r.concat(&code), y, next), atom.clone());
            add_mass(&mut left2, (y, next), atom.clone());
            *image_counts.entry(image).or_insert(0) += 1;
        }
    }
    let mut posteriors: BTreeMap<Image, BitStringDist> = BTreeMap::new();
    for (image, count) in &image_counts {
        let Image::InRange { i, .. } = image else { unreachable!() };
        let y = image.encode(family.code_width());
        let y_mass = &atom * BigRational::from_integer((*count).into());
        let post = inverter.posterior(image)?;
        for (pre, q) in post.support() {
            let (r2, _) = family.split_input(pre);
            let appended = family.sampler.eval(&r2).bit(i + 1);
            let mass = &y_mass * q;
            add_mass(&mut right0, (*pre, y), mass.clone());
            add_mass(&mut right1, (*pre, y, appended), mass.clone());
            add_mass(&mut right2, (y, appended), mass);
        }
        posteriors.insert(*image, post);
    }
    let inverter_sd = sd_of_maps(&left0, &right0);
    let appended_sd = sd_of_maps(&left1, &right1);
    let projected_sd = sd_of_maps(&left2, &right2);

    // The same joint when the code is drawn uniformly, sentinel included.
    // In-range image masses rescale by (n-1)/2^w; the sentinel, never seen
    // above, carries the remaining code mass.
    let w = family.code_width();
    let atom_full = BigRational::new(1.into(), (seed_count << w).into());
    let mut left_full: BTreeMap<JointKey, BigRational> = BTreeMap::new();
    let mut right_full: BTreeMap<JointKey, BigRational> = BTreeMap::new();
    for code in BitStr::all(w) {
        for r in BitStr::all(t) {
            let y = family.eval(&r, &code).encode(w);
            add_mass(&mut left_full, (r.concat(&code), y), atom_full.clone());
        }
    }
    let mut full_images = image_counts;
    if family.sentinel_codes() > 0 {
        *full_images.entry(Image::Sentinel).or_insert(0) +=
            seed_count * u64::from(family.sentinel_codes());
    }
    for (image, count) in &full_images {
        // In-range counts came from one code per index; sentinel counts all
        // of its codes already.
        let y = image.encode(w);
        let y_mass = &atom_full * BigRational::from_integer((*count).into());
        let post = match posteriors.get(image) {
            Some(p) => p.clone(),
            None => inverter.posterior(image)?,
        };
        for (pre, q) in post.support() {
            add_mass(&mut right_full, (*pre, y), &y_mass * q);
        }
    }
    let inverter_sd_full_domain = sd_of_maps(&left_full, &right_full);

    // Per-index extrapolation distances and the averaging step.
    let mut per_index_sd = Vec::with_capacity((n - 1) as usize);
    for i in 1..n {
        let truth = s_dist.marginal(i + 1)?;
        let extrapolated = extrapolated_pair(&ext, &s_dist, i)?;
        per_index_sd.push(statistical_distance(&truth, &extrapolated)?.exact());
    }
    let averaged_sd = per_index_sd.iter().sum::<BigRational>()
        / BigRational::from_integer(i64::from(n - 1).into());

    // Triangle rows against the target.
    let target_sampler_sd = statistical_distance(target, &s_dist)?.exact();
    let mut triangle = Vec::with_capacity((n - 1) as usize);
    for i in 1..n {
        let target_pair = target.marginal(i + 1)?;
        let sampler_pair = s_dist.marginal(i + 1)?;
        let sampler_ext = extrapolated_pair(&ext, &s_dist, i)?;
        let target_ext = extrapolated_pair(&ext, target, i)?;
        let target_sd = statistical_distance(&target_pair, &target_ext)?.exact();
        let term_marginal = statistical_distance(&target_pair, &sampler_pair)?.exact();
        let term_chain = per_index_sd[(i - 1) as usize].clone();
        let term_pushforward = statistical_distance(&sampler_ext, &target_ext)?.exact();
        let residual = &term_marginal + &term_chain + &term_pushforward - &target_sd;
        let source_marginal_sd =
            statistical_distance(&target.marginal(i)?, &s_dist.marginal(i)?)?.exact();
        triangle.push(TriangleStep {
            i,
            target_sd,
            pushforward_within_marginal: term_pushforward <= source_marginal_sd,
            term_marginal,
            term_chain,
            term_pushforward,
            residual,
        });
    }
    let triangle_ok = triangle
        .iter()
        .all(|s| !s.residual.is_negative() && s.pushforward_within_marginal);

    let delta_r = inverter.delta();
    Ok(ChainReport {
        n,
        t,
        k,
        within_advertised_slack: inverter_sd <= delta_r,
        delta_r,
        data_processing_ok: inverter_sd >= appended_sd && appended_sd >= projected_sd,
        averaging_ok: projected_sd >= averaged_sd,
        averaging_tight: projected_sd == averaged_sd,
        inverter_sd,
        inverter_sd_full_domain,
        sentinel_mass: family.sentinel_mass(),
        appended_sd,
        projected_sd,
        per_index_sd,
        averaged_sd,
        target_sampler_sd,
        triangle,
        triangle_ok,
    })
}

// ---------------------------------------------------------------------------
// Files: family specs and chain reports.
// ---------------------------------------------------------------------------

/// Loads `{"sampler": "<path>", "n": <bits>}`; the sampler path resolves
/// relative to the spec file and must be a seeded-map sampler whose output
/// width matches the declared n.
pub fn load_family(path: &Path) -> Result<FnFamily, ClassicalError> {
    let text = std::fs::read_to_string(path)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ClassicalError::BadSpec(e.to_string()))?;
    let sampler_rel = v
        .get("sampler")
        .and_then(|s| s.as_str())
        .ok_or_else(|| ClassicalError::BadSpec("missing \"sampler\" path".into()))?;
    let n = v
        .get("n")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ClassicalError::BadSpec("missing \"n\"".into()))?;
    let sampler_path = path.parent().unwrap_or(Path::new(".")).join(sampler_rel);
    let sampler_text = std::fs::read_to_string(&sampler_path)?;
    let sampler = crate::sampler::seeded_from_json(&sampler_text)?;
    if u64::from(sampler.n()) != n {
        return Err(ClassicalError::BadSpec(format!(
            "declared n = {n} but the sampler outputs {} bits",
            sampler.n()
        )));
    }
    FnFamily::new(sampler)
}

/// Chain report as JSON with every distance an exact "p/q" string.
pub fn chain_report_json(report: &ChainReport) -> String {
    let triangle: Vec<serde_json::Value> = report
        .triangle
        .iter()
        .map(|s| {
            serde_json::json!({
                "i": s.i,
                "target_sd": frac_str(&s.target_sd),
                "term_marginal": frac_str(&s.term_marginal),
                "term_chain": frac_str(&s.term_chain),
                "term_pushforward": frac_str(&s.term_pushforward),
                "residual": frac_str(&s.residual),
                "pushforward_within_marginal": s.pushforward_within_marginal,
            })
        })
        .collect();
    let v = serde_json::json!({
        "n": report.n,
        "t": report.t,
        "k": report.k,
        "delta_r": frac_str(&report.delta_r),
        "inverter_sd": frac_str(&report.inverter_sd),
        "inverter_sd_full_domain": frac_str(&report.inverter_sd_full_domain),
        "sentinel_mass": frac_str(&report.sentinel_mass),
        "appended_sd": frac_str(&report.appended_sd),
        "projected_sd": frac_str(&report.projected_sd),
        "per_index_sd": report.per_index_sd.iter().map(|s| frac_str(s)).collect::<Vec<_>>(),
        "averaged_sd": frac_str(&report.averaged_sd),
        "data_processing_ok": report.data_processing_ok,
        "averaging_ok": report.averaging_ok,
        "averaging_tight": report.averaging_tight,
        "within_advertised_slack": report.within_advertised_slack,
        "target_sampler_sd": frac_str(&report.target_sampler_sd),
        "triangle": triangle,
        "triangle_ok": report.triangle_ok,
    });
    serde_json::to_string_pretty(&v).expect("report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;
    use crate::rng::lab_rng;
    use crate::sampler::SeedMap;

    fn and_pairs_family() -> FnFamily {
        FnFamily::new(SeededSampler::new(12, 6, SeedMap::AndPairs).unwrap()).unwrap()
    }

    fn repeat_family() -> FnFamily {
        FnFamily::new(SeededSampler::new(6, 9, SeedMap::RepeatTruncate).unwrap()).unwrap()
    }

    #[test]
    fn family_codes_and_sentinel_accounting() {
        let f = and_pairs_family();
        assert_eq!((f.n(), f.t(), f.code_width(), f.input_len()), (6, 12, 3, 15));
        assert_eq!(f.sentinel_codes(), 3, "codes 5, 6, 7 name indices past 5");
        assert_eq!(f.sentinel_mass(), frac(3, 8));
        assert_eq!(f.decode_index(&"100".parse().unwrap()), Some(5));
        assert_eq!(f.decode_index(&"101".parse().unwrap()), None);
        assert_eq!(f.eval(&BitStr::new(0, 12), &"101".parse().unwrap()), Image::Sentinel);
        let r: BitStr = "110111011101".parse().unwrap();
        assert_eq!(
            f.eval(&r, &f.code_for(3)),
            Image::InRange { i: 3, prefix: "101".parse().unwrap() }
        );

        let g = repeat_family();
        assert_eq!((g.code_width(), g.sentinel_codes()), (3, 0), "8 indices, 8 codes");
        assert!(g.sentinel_mass().is_zero());

        let (r2, c2) = f.split_input(&r.concat(&"011".parse().unwrap()));
        assert_eq!((r2, c2), (r, "011".parse().unwrap()));
    }

    #[test]
    fn injective_family_posterior_is_a_point_mass() {
        // Two seeds with distinct first output bits: every revealed prefix
        // pins the seed.
        let s = SeededSampler::new(1, 4, SeedMap::TruthTable(vec![0b0101, 0b1010])).unwrap();
        let f = FnFamily::new(s).unwrap();
        let inv = brute_force_inverter(&f).unwrap();
        let mut rng = lab_rng(7);
        for i in 1..4u32 {
            for (seed_value, x) in [(0u32, 0b0101u32), (1, 0b1010)] {
                let image = Image::InRange { i, prefix: BitStr::new(x, 4).prefix(i) };
                let post = inv.posterior(&image).unwrap();
                let expected = BitStr::new(seed_value, 1).concat(&f.code_for(i));
                assert_eq!(post, BitStringDist::point_mass(expected));
                let (r, code) = inv.invert(&image, &mut rng).unwrap();
                assert_eq!((r, code), (BitStr::new(seed_value, 1), f.code_for(i)));
            }
        }
    }

    #[test]
    fn constant_family_posterior_is_uniform_and_off_support_errors() {
        let s = SeededSampler::new(
            4,
            4,
            SeedMap::Constant("1100".parse().unwrap()),
        )
        .unwrap();
        let f = FnFamily::new(s).unwrap();
        let inv = brute_force_inverter(&f).unwrap();
        let image = Image::InRange { i: 2, prefix: "11".parse().unwrap() };
        let post = inv.posterior(&image).unwrap();
        for (input, q) in post.support() {
            assert_eq!(q, &frac(1, 16));
            let (_, code) = f.split_input(input);
            assert_eq!(code, f.code_for(2));
        }
        assert_eq!(post.support().count(), 16);
        match inv.posterior(&Image::InRange { i: 2, prefix: "00".parse().unwrap() }) {
            Err(ClassicalError::NoPreimage(_)) => {}
            other => panic!("expected no preimage, got {other:?}"),
        }
    }

    #[test]
    fn sentinel_posterior_is_uniform_over_out_of_range_codes() {
        let f = FnFamily::new(SeededSampler::new(4, 6, SeedMap::RepeatTruncate).unwrap())
            .unwrap();
        assert_eq!(f.sentinel_codes(), 3);
        let inv = brute_force_inverter(&f).unwrap();
        let post = inv.posterior(&Image::Sentinel).unwrap();
        assert_eq!(post.support().count(), 16 * 3);
        for (input, q) in post.support() {
            assert_eq!(q, &frac(1, 48));
            let (_, code) = f.split_input(input);
            assert!(f.decode_index(&code).is_none());
        }
        // A family with no out-of-range codes has no sentinel preimage.
        let g = repeat_family();
        let ginv = brute_force_inverter(&g).unwrap();
        assert!(matches!(
            ginv.posterior(&Image::Sentinel),
            Err(ClassicalError::NoPreimage(_))
        ));
    }

    #[test]
    fn seed_budget_is_enforced() {
        let f = FnFamily::new(SeededSampler::new(24, 6, SeedMap::RepeatTruncate).unwrap())
            .unwrap();
        match brute_force_inverter(&f) {
            Err(ClassicalError::BudgetExceeded { t: 24, cap: 20 }) => {}
            other => panic!("expected budget refusal, got {other:?}"),
        }
    }

    #[test]
    fn ext_conditionals_equal_the_chain_factorization_exactly() {
        let f = and_pairs_family();
        let inv = brute_force_inverter(&f).unwrap();
        let ext = classical_ext(&f, &inv);
        let dist = f.sampler().seeded_exact_dist().unwrap();
        let chain = chain_factorize(&dist).unwrap();
        let table = ext.conditional_table().unwrap();
        assert!(!table.is_empty());
        for (prefix, p_one) in &table {
            assert_eq!(
                p_one,
                &chain.conditional(prefix).p_one,
                "conditional at {prefix} diverges"
            );
        }
        // The trait view agrees and advertises zero slack.
        assert!(ext.slack().is_zero());
        let c = ext.conditional(1, &BitStr::empty()).unwrap();
        assert_eq!(c.p_one, chain.conditional(&BitStr::empty()).p_one);
    }

    #[test]
    fn identity_ext_is_a_fair_coin_and_constant_ext_is_deterministic() {
        let f = FnFamily::new(SeededSampler::new(4, 4, SeedMap::Identity).unwrap()).unwrap();
        let inv = brute_force_inverter(&f).unwrap();
        let ext = classical_ext(&f, &inv);
        assert_eq!(ext.conditional_one(&BitStr::empty()).unwrap(), frac(1, 2));
        assert_eq!(ext.conditional_one(&"101".parse().unwrap()).unwrap(), frac(1, 2));

        let c = FnFamily::new(
            SeededSampler::new(3, 4, SeedMap::Constant("1011".parse().unwrap())).unwrap(),
        )
        .unwrap();
        let cinv = brute_force_inverter(&c).unwrap();
        let cext = classical_ext(&c, &cinv);
        assert_eq!(cext.conditional_one(&BitStr::empty()).unwrap(), frac(1, 1));
        assert_eq!(cext.conditional_one(&"1".parse().unwrap()).unwrap(), frac(0, 1));
        assert_eq!(cext.conditional_one(&"101".parse().unwrap()).unwrap(), frac(1, 1));
        let mut rng = lab_rng(3);
        assert_eq!(cext.next_bit_sampled(&"10".parse().unwrap(), &mut rng).unwrap(), 1);
    }

    #[test]
    fn brute_force_chain_is_exactly_zero_everywhere() {
        let f = repeat_family();
        let inv = brute_force_inverter(&f).unwrap();
        let target = f.sampler().seeded_exact_dist().unwrap();
        let rep = verify_sd_chain(&f, &inv, 3, &target).unwrap();
        assert!(rep.inverter_sd.is_zero());
        assert!(rep.inverter_sd_full_domain.is_zero());
        assert!(rep.appended_sd.is_zero());
        assert!(rep.projected_sd.is_zero());
        assert!(rep.per_index_sd.iter().all(BigRational::is_zero));
        assert!(rep.averaged_sd.is_zero());
        assert!(rep.data_processing_ok && rep.averaging_ok && rep.averaging_tight);
        assert!(rep.within_advertised_slack);
        assert!(rep.triangle_ok);
        assert!(rep.triangle.iter().all(|s| s.target_sd.is_zero()));
        assert_eq!(rep.per_index_sd.len(), 8);
    }

    #[test]
    fn planted_error_stays_within_delta_through_the_chain() {
        let f = and_pairs_family();
        let delta = frac(1, 8);
        let inv = planted_error_inverter(&f, delta.clone()).unwrap();
        let target = f.sampler().seeded_exact_dist().unwrap();
        let rep = verify_sd_chain(&f, &inv, 3, &target).unwrap();
        assert!(rep.inverter_sd.is_positive(), "the plant must actually move mass");
        assert!(rep.within_advertised_slack, "inverter joint SD is at most delta");
        assert!(rep.data_processing_ok && rep.averaging_ok && rep.averaging_tight);
        // The averaging step, read as a sum: per-index distances total at
        // most (n - 1) * delta.
        let sum: BigRational = rep.per_index_sd.iter().sum();
        assert!(sum <= BigRational::from_integer(5.into()) * &delta);
        assert!(rep.averaged_sd <= rep.inverter_sd);
        assert!(rep.triangle_ok);
        // Planting rejects nonsense rates.
        assert!(planted_error_inverter(&f, frac(9, 8)).is_err());
    }

    #[test]
    fn triangle_terms_bound_a_tilted_target() {
        let f = and_pairs_family();
        let inv = brute_force_inverter(&f).unwrap();
        let s_dist = f.sampler().seeded_exact_dist().unwrap();
        // Tilt toward the all-zero string, which the sampler supports, so
        // every target prefix stays invertible.
        let spike = BitStringDist::point_mass(BitStr::new(0, 6));
        let target = mixture(&[(frac(3, 4), &s_dist), (frac(1, 4), &spike)]).unwrap();
        let rep = verify_sd_chain(&f, &inv, 3, &target).unwrap();
        assert!(rep.target_sampler_sd.is_positive());
        assert!(rep.inverter_sd.is_zero(), "brute force stays exact");
        assert!(rep.triangle_ok);
        assert!(rep.triangle.iter().any(|s| s.target_sd.is_positive()));
        for step in &rep.triangle {
            assert!(step.term_chain.is_zero());
            assert!(
                step.target_sd <= &step.term_marginal + &step.term_chain + &step.term_pushforward
            );
        }
    }

    #[test]
    fn family_files_and_chain_reports_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sampler = SeededSampler::new(6, 9, SeedMap::RepeatTruncate).unwrap();
        std::fs::write(
            dir.path().join("s.json"),
            crate::sampler::seeded_to_json(&sampler),
        )
        .unwrap();
        std::fs::write(
            dir.path().join("family.json"),
            r#"{"sampler": "s.json", "n": 9}"#,
        )
        .unwrap();
        let f = load_family(&dir.path().join("family.json")).unwrap();
        assert_eq!((f.n(), f.t()), (9, 6));
        std::fs::write(
            dir.path().join("wrong.json"),
            r#"{"sampler": "s.json", "n": 8}"#,
        )
        .unwrap();
        assert!(matches!(
            load_family(&dir.path().join("wrong.json")),
            Err(ClassicalError::BadSpec(_))
        ));

        let inv = brute_force_inverter(&f).unwrap();
        let target = f.sampler().seeded_exact_dist().unwrap();
        let rep = verify_sd_chain(&f, &inv, 3, &target).unwrap();
        let json = chain_report_json(&rep);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["inverter_sd"], "0/1");
        assert_eq!(v["n"], 9);
        assert_eq!(v["per_index_sd"].as_array().unwrap().len(), 8);
        assert_eq!(v["triangle"][0]["residual"], "0/1");
    }
}

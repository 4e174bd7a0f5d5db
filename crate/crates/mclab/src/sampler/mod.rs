//! Sampler backends: anything that emits n-bit strings and can state its
//! exact output distribution. Three families live here: table-backed
//! samplers, a small statevector circuit simulator, and seeded
//! (deterministic-map) samplers.

use crate::bits::BitStr;
use crate::dist::BitStringDist;
use crate::rng::{sample_below, LabRng};
use num_bigint::BigUint;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("circuit has {0} qubits; the statevector cap is {MAX_QUBITS}")]
    TooManyQubits(u32),
    #[error("bad wiring: {0}")]
    BadWiring(String),
    #[error("seed enumeration needs 2^{0} evaluations; cap is 2^{MAX_SEED_LEN}")]
    BudgetExceeded(u32),
    #[error("distribution error: {0}")]
    Dist(#[from] crate::dist::DistError),
    #[error("unparseable sampler file: {0}")]
    Parse(String),
}

/// An n-bit-string source with a computable exact output distribution.
///
/// Samples must be a pure function of the rng stream, so that a recorded
/// seed replays the identical transcript.
pub trait Sampler {
    fn n(&self) -> u32;
    fn sample(&self, rng: &mut LabRng) -> BitStr;
    fn exact_dist(&self) -> Result<BitStringDist, SamplerError>;
}

// ---------------------------------------------------------------------------
// Table-backed sampler with precomputed cumulative tickets.
// ---------------------------------------------------------------------------

enum Cumulative {
    /// Common denominator and ascending (cumulative numerator, outcome).
    Exact(BigUint, Vec<(BigUint, BitStr)>),
    /// Dense cumulative probabilities and the outcome width.
    Float(Vec<f64>),
}

/// Samples a fixed [`BitStringDist`]. Exact tables draw an integer ticket
/// below the common denominator, so sampling introduces no rounding at all.
pub struct TableSampler {
    dist: BitStringDist,
    cum: Cumulative,
}

impl TableSampler {
    pub fn new(dist: BitStringDist) -> Self {
        let cum = if dist.mode() == crate::dist::Mode::Exact {
            let common: BigUint = dist
                .support()
                .fold(BigUint::one(), |acc, (_, p)| acc.lcm(p.denom().magnitude()));
            let mut acc = BigUint::zero();
            let ticks = dist
                .support()
                .map(|(x, p)| {
                    acc += p.numer().magnitude() * (&common / p.denom().magnitude());
                    (acc.clone(), x.clone())
                })
                .collect();
            Cumulative::Exact(common, ticks)
        } else {
            let mut acc = 0.0;
            let cum = (0..1usize << dist.n())
                .map(|v| {
                    acc += dist.prob_f64(&BitStr::new(v as u32, dist.n()));
                    acc
                })
                .collect();
            Cumulative::Float(cum)
        };
        TableSampler { dist, cum }
    }
}

impl Sampler for TableSampler {
    fn n(&self) -> u32 {
        self.dist.n()
    }

    fn sample(&self, rng: &mut LabRng) -> BitStr {
        match &self.cum {
            Cumulative::Exact(common, ticks) => {
                let ticket = sample_below(rng, common);
                let pos = ticks.partition_point(|(c, _)| *c <= ticket);
                ticks[pos].1.clone()
            }
            Cumulative::Float(cum) => {
                let u: f64 = rng.gen();
                let pos = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                BitStr::new(pos as u32, self.dist.n())
            }
        }
    }

    fn exact_dist(&self) -> Result<BitStringDist, SamplerError> {
        Ok(self.dist.clone())
    }
}

// ---------------------------------------------------------------------------
// Statevector circuit simulator.
// ---------------------------------------------------------------------------

pub const MAX_QUBITS: u32 = 12;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(u32),
    X(u32),
    T(u32),
    Cnot { control: u32, target: u32 },
    Cz(u32, u32),
    Rz { target: u32, angle: f64 },
}

/// A gate list over `qubits` wires plus an ordered measurement map: output
/// bit j reads qubit `measured[j]`. Qubit 0 is the most significant bit of
/// the basis-state index.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumCircuit {
    pub qubits: u32,
    pub gates: Vec<Gate>,
    pub measured: Vec<u32>,
}

impl QuantumCircuit {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.qubits == 0 || self.qubits > MAX_QUBITS {
            return Err(SamplerError::TooManyQubits(self.qubits));
        }
        let check = |q: u32| -> Result<(), SamplerError> {
            if q >= self.qubits {
                Err(SamplerError::BadWiring(format!(
                    "qubit {q} out of range for {} wires",
                    self.qubits
                )))
            } else {
                Ok(())
            }
        };
        for g in &self.gates {
            match *g {
                Gate::H(q) | Gate::X(q) | Gate::T(q) | Gate::Rz { target: q, .. } => check(q)?,
                Gate::Cnot { control, target } => {
                    check(control)?;
                    check(target)?;
                    if control == target {
                        return Err(SamplerError::BadWiring(
                            "cnot control equals target".into(),
                        ));
                    }
                }
                Gate::Cz(a, b) => {
                    check(a)?;
                    check(b)?;
                    if a == b {
                        return Err(SamplerError::BadWiring("cz wires coincide".into()));
                    }
                }
            }
        }
        if self.measured.is_empty() {
            return Err(SamplerError::BadWiring("no measured qubits".into()));
        }
        for (j, &q) in self.measured.iter().enumerate() {
            check(q)?;
            if self.measured[..j].contains(&q) {
                return Err(SamplerError::BadWiring(format!("qubit {q} measured twice")));
            }
        }
        Ok(())
    }

    fn mask(&self, qubit: u32) -> usize {
        1usize << (self.qubits - 1 - qubit)
    }

    /// Runs the gate list on |0…0⟩ and returns the final statevector.
    pub fn simulate(&self) -> Result<Vec<Complex64>, SamplerError> {
        self.validate()?;
        let dim = 1usize << self.qubits;
        let mut state = vec![Complex64::new(0.0, 0.0); dim];
        state[0] = Complex64::new(1.0, 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for g in &self.gates {
            match *g {
                Gate::H(q) => {
                    let m = self.mask(q);
                    for i in 0..dim {
                        if i & m == 0 {
                            let (a, b) = (state[i], state[i | m]);
                            state[i] = (a + b) * s;
                            state[i | m] = (a - b) * s;
                        }
                    }
                }
                Gate::X(q) => {
                    let m = self.mask(q);
                    for i in 0..dim {
                        if i & m == 0 {
                            state.swap(i, i | m);
                        }
                    }
                }
                Gate::T(q) => {
                    let m = self.mask(q);
                    let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
                    for (i, amp) in state.iter_mut().enumerate() {
                        if i & m != 0 {
                            *amp *= phase;
                        }
                    }
                }
                Gate::Rz { target, angle } => {
                    let m = self.mask(target);
                    let lo = Complex64::from_polar(1.0, -angle / 2.0);
                    let hi = Complex64::from_polar(1.0, angle / 2.0);
                    for (i, amp) in state.iter_mut().enumerate() {
                        *amp *= if i & m == 0 { lo } else { hi };
                    }
                }
                Gate::Cnot { control, target } => {
                    let (mc, mt) = (self.mask(control), self.mask(target));
                    for i in 0..dim {
                        if i & mc != 0 && i & mt == 0 {
                            state.swap(i, i | mt);
                        }
                    }
                }
                Gate::Cz(a, b) => {
                    let (ma, mb) = (self.mask(a), self.mask(b));
                    for (i, amp) in state.iter_mut().enumerate() {
                        if i & ma != 0 && i & mb != 0 {
                            *amp = -*amp;
                        }
                    }
                }
            }
            let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
            assert!(
                (norm - 1.0).abs() <= NORM_TOL,
                "statevector norm drifted to {norm}"
            );
        }
        Ok(state)
    }

    /// Born-rule distribution over the measured qubits, in measurement
    /// order. The float masses are renormalized by their (≈1) total so the
    /// stored table sums to 1 up to binary64 rounding.
    pub fn exact_dist(&self) -> Result<BitStringDist, SamplerError> {
        let state = self.simulate()?;
        let width = self.measured.len() as u32;
        let mut probs = vec![0.0; 1usize << width];
        for (i, amp) in state.iter().enumerate() {
            let mut out = 0usize;
            for &q in &self.measured {
                out = (out << 1) | usize::from(i & self.mask(q) != 0);
            }
            probs[out] += amp.norm_sqr();
        }
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() <= NORM_TOL, "Born masses sum to {total}");
        for p in &mut probs {
            *p /= total;
        }
        Ok(BitStringDist::from_float(width, probs)?)
    }
}

/// A circuit plus its precomputed Born distribution, sampled classically.
pub struct CircuitSampler {
    circuit: QuantumCircuit,
    table: TableSampler,
}

impl CircuitSampler {
    pub fn new(circuit: QuantumCircuit) -> Result<Self, SamplerError> {
        let dist = circuit.exact_dist()?;
        Ok(CircuitSampler { circuit, table: TableSampler::new(dist) })
    }

    pub fn circuit(&self) -> &QuantumCircuit {
        &self.circuit
    }
}

impl Sampler for CircuitSampler {
    fn n(&self) -> u32 {
        self.table.n()
    }

    fn sample(&self, rng: &mut LabRng) -> BitStr {
        self.table.sample(rng)
    }

    fn exact_dist(&self) -> Result<BitStringDist, SamplerError> {
        self.table.exact_dist()
    }
}

// ---------------------------------------------------------------------------
// Seeded samplers: deterministic maps {0,1}^t -> {0,1}^n.
// ---------------------------------------------------------------------------

pub const MAX_SEED_LEN: u32 = 20;

/// The deterministic map behind a [`SeededSampler`].
#[derive(Debug, Clone, PartialEq)]
pub enum SeedMap {
    /// n = t; the seed is the output.
    Identity,
    /// Ignores the seed.
    Constant(BitStr),
    /// Output bit j is the parity of the first j seed bits (needs t ≥ n).
    PrefixParity,
    /// Output bit j is seed bit ((j−1) mod t) + 1: the seed tiled to n bits.
    RepeatTruncate,
    /// Output bit j is seed bit 2j−1 AND seed bit 2j (needs t ≥ 2n).
    AndPairs,
    /// Explicit table of 2^t output values, each < 2^n.
    TruthTable(Vec<u32>),
}

/// A total deterministic map from t-bit seeds to n-bit outputs; its output
/// distribution under a uniform seed is dyadic with denominator 2^t.
#[derive(Debug, Clone, PartialEq)]
pub struct SeededSampler {
    seed_len: u32,
    n: u32,
    map: SeedMap,
}

impl SeededSampler {
    pub fn new(seed_len: u32, n: u32, map: SeedMap) -> Result<Self, SamplerError> {
        if seed_len == 0 || seed_len > 32 || n == 0 || n > 32 {
            return Err(SamplerError::BadWiring(format!(
                "seed_len {seed_len}, n {n} out of the 1..=32 range"
            )));
        }
        let fit = |ok: bool, why: &str| {
            if ok {
                Ok(())
            } else {
                Err(SamplerError::BadWiring(why.to_string()))
            }
        };
        match &map {
            SeedMap::Identity => fit(seed_len == n, "identity needs t = n")?,
            SeedMap::Constant(z) => fit(z.len() == n, "constant has wrong width")?,
            SeedMap::PrefixParity => fit(seed_len >= n, "prefix parity needs t >= n")?,
            SeedMap::RepeatTruncate => {}
            SeedMap::AndPairs => fit(seed_len >= 2 * n, "and-pairs needs t >= 2n")?,
            SeedMap::TruthTable(v) => {
                fit(seed_len <= MAX_SEED_LEN, "truth table too large")?;
                fit(v.len() == 1usize << seed_len, "truth table has wrong size")?;
                fit(v.iter().all(|&y| u64::from(y) < 1u64 << n), "table value too wide")?;
            }
        }
        Ok(SeededSampler { seed_len, n, map })
    }

    pub fn seed_len(&self) -> u32 {
        self.seed_len
    }

    pub fn map(&self) -> &SeedMap {
        &self.map
    }

    /// The map itself: total and deterministic on t-bit seeds.
    pub fn eval(&self, r: &BitStr) -> BitStr {
        assert_eq!(r.len(), self.seed_len, "seed has wrong length");
        match &self.map {
            SeedMap::Identity => r.clone(),
            SeedMap::Constant(z) => z.clone(),
            SeedMap::PrefixParity => {
                let mut parity = 0u8;
                let bits: Vec<u8> = (1..=self.n)
                    .map(|j| {
                        parity ^= r.bit(j);
                        parity
                    })
                    .collect();
                BitStr::from_bits(&bits)
            }
            SeedMap::RepeatTruncate => {
                let bits: Vec<u8> =
                    (0..self.n).map(|j| r.bit(j % self.seed_len + 1)).collect();
                BitStr::from_bits(&bits)
            }
            SeedMap::AndPairs => {
                let bits: Vec<u8> =
                    (1..=self.n).map(|j| r.bit(2 * j - 1) & r.bit(2 * j)).collect();
                BitStr::from_bits(&bits)
            }
            SeedMap::TruthTable(v) => BitStr::new(v[r.value() as usize], self.n),
        }
    }

    /// Enumerates all 2^t seeds and counts collisions: Pr[x] = |eval⁻¹(x)| / 2^t.
    pub fn seeded_exact_dist(&self) -> Result<BitStringDist, SamplerError> {
        if self.seed_len > MAX_SEED_LEN {
            return Err(SamplerError::BudgetExceeded(self.seed_len));
        }
        let mut counts: std::collections::BTreeMap<BitStr, u64> = Default::default();
        for r in BitStr::all(self.seed_len) {
            *counts.entry(self.eval(&r)).or_insert(0) += 1;
        }
        let denom = num_bigint::BigInt::from(2).pow(self.seed_len);
        let entries: Vec<(BitStr, num_rational::BigRational)> = counts
            .into_iter()
            .map(|(x, c)| (x, num_rational::BigRational::new(c.into(), denom.clone())))
            .collect();
        Ok(BitStringDist::from_exact(self.n, entries)?)
    }
}

impl Sampler for SeededSampler {
    fn n(&self) -> u32 {
        self.n
    }

    fn sample(&self, rng: &mut LabRng) -> BitStr {
        // 2^t is a power of two, so masking rng output is already unbiased.
        let r = if self.seed_len == 32 {
            rng.gen::<u32>()
        } else {
            rng.gen::<u32>() & ((1u32 << self.seed_len) - 1)
        };
        self.eval(&BitStr::new(r, self.seed_len))
    }

    fn exact_dist(&self) -> Result<BitStringDist, SamplerError> {
        self.seeded_exact_dist()
    }
}

// ---------------------------------------------------------------------------
// Empirical smoke check.
// ---------------------------------------------------------------------------

/// SD between a `shots`-sample histogram and the sampler's exact
/// distribution. Callers compare against [`empirical_threshold`].
pub fn empirical_check(
    s: &dyn Sampler,
    shots: u64,
    rng: &mut LabRng,
) -> Result<f64, SamplerError> {
    assert!(shots >= 1);
    let exact = s.exact_dist()?.to_float()?;
    let mut counts = vec![0u64; 1usize << s.n()];
    for _ in 0..shots {
        counts[s.sample(rng).value() as usize] += 1;
    }
    let hist = BitStringDist::from_float(
        s.n(),
        counts.iter().map(|&c| c as f64 / shots as f64).collect(),
    )?;
    Ok(crate::dist::statistical_distance(&hist, &exact)?.as_f64())
}

/// The smoke threshold 3·sqrt(2^n / shots): a few standard deviations of
/// the expected histogram fluctuation.
pub fn empirical_threshold(n: u32, shots: u64) -> f64 {
    3.0 * ((1u64 << n) as f64 / shots as f64).sqrt()
}

mod io;
pub use io::{circuit_from_json, circuit_to_json, seeded_from_json, seeded_to_json};

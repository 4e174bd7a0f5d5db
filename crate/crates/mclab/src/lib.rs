//! mclab is a desk-scale laboratory for exact verification of the algebra
//! behind time-bounded description complexity, threshold deciders over bit
//! string distributions, sampled prefix extrapolation, distinguisher
//! advantage accounting, parallel-repetition amplification, and classical
//! seed-inversion chains.
//!
//! Everything that can be checked in exact rational arithmetic is; sampled
//! paths are driven by one named counter-based generator so every artifact is
//! reproducible byte for byte from a seed.
//!
//! Layout:
//! - [`bits`], [`rng`], [`ratio`]: bit strings, deterministic randomness,
//!   exact rational helpers.
//! - [`dist`]: exact distributions over fixed-length bit strings, statistical
//!   distance, mixtures, chain factorization, parallel repetition.
//! - [`utm`]: the toy description machine, oracle table construction by
//!   exhaustive enumeration, witness programs, persistence.
//! - [`sampler`]: small statevector circuits and seeded classical samplers.
//! - [`extrapolate`]: next-bit extrapolators and the sampled product
//!   estimator with full audit output.
//! - [`gapk`]: promise labels, the threshold decider, and exact error
//!   accounts.
//! - [`qprg`]: far-from-uniform generators, amplification, mixture instances,
//!   and the decider-to-distinguisher advantage identity.
//! - [`classical`]: seeded function families, brute-force and planted-error
//!   inverters, and the exact statistical-distance chain.
//! - [`harness`]: experiment configs, reports, golden files, and the claim
//!   coverage registry.

pub mod bits;
pub mod classical;
pub mod dist;
pub mod extrapolate;
pub mod gapk;
pub mod harness;
pub mod qprg;
pub mod ratio;
pub mod rng;
pub mod sampler;
pub mod utm;

//! Randomized invariants: the laws each layer advertises, checked on
//! generated inputs rather than the frozen examples the unit tests pin.

use mclab::bits::BitStr;
use mclab::dist::{
    chain_factorize, conditional_mass_bound, mixture, parallel_repeat_sd,
    statistical_distance, BitStringDist,
};
use mclab::extrapolate::{exact_extrapolator, substituted_product};
use mclab::gapk::{exact_error_account, GapKParams, GapSchedule, ThresholdDecider};
use mclab::harness::{report_from_json, report_json, ExperimentReport, ReportRow};
use mclab::utm::{build_oracle, gamma_encode, gamma_len, OracleTable, UtmConfig};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::collection::vec;
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;

fn rational(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A random exact distribution on n-bit strings: nonnegative integer
/// weights over the whole space, normalized by their sum.
fn arb_dist(n: u32) -> impl Strategy<Value = BitStringDist> {
    vec(0u32..16, 1usize << n).prop_filter_map("needs positive total mass", move |weights| {
        let total: u64 = weights.iter().map(|&w| u64::from(w)).sum();
        if total == 0 {
            return None;
        }
        let entries = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(v, &w)| (BitStr::new(v as u32, n), rational(u64::from(w), total)));
        BitStringDist::from_exact(n, entries).ok()
    })
}

/// Two independent distributions over the same random length.
fn arb_dist_pair() -> impl Strategy<Value = (u32, BitStringDist, BitStringDist)> {
    (1u32..=5).prop_flat_map(|n| (arb_dist(n), arb_dist(n)).prop_map(move |(a, b)| (n, a, b)))
}

fn any_small_dist() -> impl Strategy<Value = (u32, BitStringDist)> {
    (1u32..=5).prop_flat_map(|n| arb_dist(n).prop_map(move |d| (n, d)))
}

fn shared_oracle() -> &'static OracleTable {
    static ORACLE: OnceLock<OracleTable> = OnceLock::new();
    ORACLE.get_or_init(|| build_oracle(&UtmConfig::reference()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Statistical distance is a metric bounded by [0, 1] that vanishes
    // exactly on equal distributions.
    #[test]
    fn sd_is_a_bounded_metric((n, a, b) in arb_dist_pair()) {
        let ab = statistical_distance(&a, &b).unwrap().exact();
        let ba = statistical_distance(&b, &a).unwrap().exact();
        prop_assert_eq!(&ab, &ba);
        prop_assert!(ab >= BigRational::zero() && ab <= BigRational::one());
        prop_assert_eq!(
            statistical_distance(&a, &a).unwrap().exact(),
            BigRational::zero()
        );
        let u = BitStringDist::uniform(n);
        let au = statistical_distance(&a, &u).unwrap().exact();
        let bu = statistical_distance(&b, &u).unwrap().exact();
        // Triangle through the uniform midpoint.
        prop_assert!(ab <= au + bu);
    }

    // A mixture carries total mass one and never sits further from a
    // reference than its components' weighted average.
    #[test]
    fn mixture_mass_and_convexity((n, a, b) in arb_dist_pair(), w_num in 1u64..8) {
        let w = rational(w_num, 8);
        let cw = BigRational::one() - &w;
        let mixed = mixture(&[(w.clone(), &a), (cw.clone(), &b)]).unwrap();
        let total: BigRational = mixed.support().map(|(_, p)| p.clone()).sum();
        prop_assert!(total.is_one());
        let u = BitStringDist::uniform(n);
        let mu = statistical_distance(&mixed, &u).unwrap().exact();
        let au = statistical_distance(&a, &u).unwrap().exact();
        let bu = statistical_distance(&b, &u).unwrap().exact();
        prop_assert!(mu <= w * au + cw * bu);
    }

    // The chain factorization reconstructs every probability exactly,
    // on and off the support.
    #[test]
    fn chain_rule_reconstructs_probabilities((n, d) in any_small_dist()) {
        let chain = chain_factorize(&d).unwrap();
        let ext = exact_extrapolator(&d).unwrap();
        for y in BitStr::all(n) {
            let direct = d.prob(&y);
            prop_assert_eq!(substituted_product(&y, &ext).unwrap(), direct.clone());
            let mut product = BigRational::one();
            for i in 1..=n {
                let c = chain.conditional(&y.prefix(i - 1));
                product *= if y.bit(i) == 1 {
                    c.p_one.clone()
                } else {
                    BigRational::one() - &c.p_one
                };
            }
            prop_assert_eq!(product, direct);
        }
    }

    // Mass on strings with any conditional below 1/(2a) is at most n/a.
    #[test]
    fn small_conditionals_carry_little_mass((n, d) in any_small_dist(), a in 2u64..64) {
        let a = rational(a, 1);
        let report = conditional_mass_bound(&d, &a).unwrap();
        let bound = rational(u64::from(n), 1) / &a;
        prop_assert!(report.violating_mass <= bound);
    }

    // Product repetition: the dynamic program agrees with the brute-force
    // distance on the fully expanded product distribution.
    #[test]
    fn parallel_repetition_matches_brute_force(d in arb_dist(2), b in 1u32..4) {
        let dp = parallel_repeat_sd(&d, b).unwrap();
        let n = 2 * b;
        let mut product: BTreeMap<u32, BigRational> = BTreeMap::new();
        let blocks: Vec<(BitStr, BigRational)> =
            d.support().map(|(x, p)| (x.clone(), p.clone())).collect();
        let mut stack = vec![(0u32, BigRational::one(), 0u32)];
        while let Some((value, weight, depth)) = stack.pop() {
            if depth == b {
                *product.entry(value).or_insert_with(BigRational::zero) += weight;
                continue;
            }
            for (x, p) in &blocks {
                stack.push(((value << 2) | x.value(), &weight * p, depth + 1));
            }
        }
        let expanded = BitStringDist::from_exact(
            n,
            product.into_iter().map(|(v, p)| (BitStr::new(v, n), p)),
        )
        .unwrap();
        let brute = statistical_distance(&expanded, &BitStringDist::uniform(n))
            .unwrap()
            .exact();
        prop_assert_eq!(dp, brute);
    }

    // Gamma codes: self-delimiting, the advertised length, and decodable
    // by an independent reader.
    #[test]
    fn gamma_codes_round_trip(m in 1u32..1_000_000) {
        let code = gamma_encode(m);
        prop_assert_eq!(code.len() as u32, gamma_len(m));
        let zeros = code.iter().take_while(|&&b| b == 0).count();
        prop_assert_eq!(code.len(), 2 * zeros + 1);
        let mut value = 0u32;
        for &bit in &code[zeros..] {
            value = (value << 1) | u32::from(bit);
        }
        prop_assert_eq!(value, m);
    }

    // Raising s2 at fixed s1 never increases the threshold decider's
    // yes-side error.
    #[test]
    fn yes_error_is_monotone_in_s2(d in arb_dist(4), s2_lo in 9u32..13) {
        let oracle = shared_oracle();
        let account = |s2: u32| {
            let p = GapKParams::new(4, 7, s2, GapSchedule::Explicit(s2 - 7)).unwrap();
            let decider = ThresholdDecider::exact_probability(p, &d);
            exact_error_account(&decider, &d, &p, oracle)
                .unwrap()
                .yes_error_mass
        };
        prop_assert!(account(s2_lo + 1) <= account(s2_lo));
    }

    // Report artifacts survive a JSON round trip byte-exactly.
    #[test]
    fn reports_round_trip_through_json(
        seed in any::<u64>(),
        n in 0u32..32,
        pass in any::<bool>(),
        measured in "[0-9]{1,6}/[0-9]{1,6}",
        note in "[ -~]{0,40}",
    ) {
        let report = ExperimentReport {
            schema_version: 1,
            experiment: "E3".into(),
            seed,
            config_digest: "00ff00ff00ff00ff".into(),
            code_version: "0.0.0".into(),
            oracle_fingerprint: "none".into(),
            rows: vec![ReportRow {
                claim: "counting.program_bound".into(),
                n,
                params: BTreeMap::from([("k".to_string(), "v".to_string())]),
                measured,
                bound: "1/2".into(),
                pass,
                note,
            }],
            all_pass: pass,
        };
        let text = report_json(&report);
        let back = report_from_json(&text).unwrap();
        prop_assert_eq!(report_json(&back), text);
    }
}

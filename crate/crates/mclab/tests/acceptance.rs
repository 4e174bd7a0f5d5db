//! The exit gate: ten numbered criteria, each one test, each at its stated
//! tolerance. Criterion order matches the project checklist; cargo prints
//! one pass/fail line per criterion.

use mclab::bits::BitStr;
use mclab::classical::{
    brute_force_inverter, classical_ext, planted_error_inverter, verify_sd_chain, FnFamily,
};
use mclab::dist::{
    bernoulli34, chain_factorize, conditional_mass_bound, mixture, ramp, standard_corpus,
    BitStringDist,
};
use mclab::extrapolate::{
    estimate_accuracy_sweep, exact_extrapolator, substituted_product, EstimateConfig,
};
use mclab::gapk::{
    band_report, exact_error_account, CoinDecider, Decider, GapKParams, GapSchedule,
    LabelDecider, ThresholdDecider,
};
use mclab::harness::verify_golden;
use mclab::qprg::{advantage_identity, amplify, mixture_instance, QprgSpec};
use mclab::ratio::{frac, frac_str, pow2};
use mclab::sampler::{SeedMap, SeededSampler};
use mclab::utm::{build_oracle, OracleTable, UtmConfig};
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::path::Path;
use std::sync::OnceLock;

fn oracle() -> &'static OracleTable {
    static ORACLE: OnceLock<OracleTable> = OnceLock::new();
    ORACLE.get_or_init(|| build_oracle(&UtmConfig::reference()).unwrap())
}

#[test]
fn criterion_01_program_counting_bound() {
    // Every complexity level s ≤ 14 holds at most 2^(s+1) − 2 strings,
    // across all output lengths jointly, checked by exact enumeration.
    let oracle = oracle();
    assert_eq!(oracle.l_max(), 14);
    assert_eq!(oracle.step_cap(), 10_000);
    let mut worst = (0u32, 0u64, 0u64);
    for s in 0..=14u32 {
        let count = oracle.count_low_complexity_all_lengths(s).unwrap();
        let bound = (1u64 << (s + 1)) - 2;
        assert!(count <= bound, "criterion 1 FAIL: s={s} count={count} > {bound}");
        if bound - count < worst.2 - worst.1 || s == 0 {
            worst = (s, count, bound);
        }
    }
    println!(
        "criterion 01 PASS: all s <= 14 within 2^(s+1)-2; tightest at s={} ({} of {})",
        worst.0, worst.1, worst.2
    );
}

#[test]
fn criterion_02_uniform_low_complexity_mass() {
    // The uniform mass of strings compressing by delta or more is at most
    // 2^(1-delta), for n in {8,10,12} and delta in {3,4,6}, exactly.
    let oracle = oracle();
    for n in [8u32, 10, 12] {
        for delta in [3u32, 4, 6] {
            let mass = oracle.uniform_low_mass(n, n - delta).unwrap();
            let bound = pow2(1 - i64::from(delta));
            assert!(
                mass <= bound,
                "criterion 2 FAIL: n={n} delta={delta} mass={} > {}",
                frac_str(&mass),
                frac_str(&bound)
            );
        }
    }
    println!("criterion 02 PASS: uniform low-complexity mass <= 2^(1-delta) on the 3x3 grid");
}

#[test]
fn criterion_03_conditional_mass_bound() {
    // For every corpus distribution at n <= 12 and a in {4,16,64}, the
    // exact mass of strings with a conditional below 1/(2a) is <= n/a.
    let mut checked = 0usize;
    for n in [6u32, 8, 10, 12] {
        let corpus = standard_corpus(n);
        assert!(corpus.len() >= 6, "corpus at n={n} must offer >= 6 distributions");
        for (name, d) in &corpus {
            for a in [4u64, 16, 64] {
                let report =
                    conditional_mass_bound(d, &BigRational::from_integer(a.into())).unwrap();
                let bound = BigRational::new(n.into(), a.into());
                assert!(
                    report.violating_mass <= bound,
                    "criterion 3 FAIL: {name} n={n} a={a}: {} > {}",
                    frac_str(&report.violating_mass),
                    frac_str(&bound)
                );
                checked += 1;
            }
        }
    }
    println!("criterion 03 PASS: violating mass <= n/a across {checked} (dist, a) cells");
}

#[test]
fn criterion_04_chain_rule_identity() {
    // Substituting exact conditionals into the product estimator returns
    // Pr[y] as an exact rational for every y, every corpus dist, n <= 10.
    let mut checked = 0u64;
    for n in [6u32, 7, 8, 9, 10] {
        for (name, d) in &standard_corpus(n) {
            let ext = exact_extrapolator(d).unwrap();
            for y in BitStr::all(n) {
                assert_eq!(
                    substituted_product(&y, &ext).unwrap(),
                    d.prob(&y),
                    "criterion 4 FAIL: {name} n={n} y={y}"
                );
                checked += 1;
            }
        }
    }
    println!("criterion 04 PASS: chain-rule identity exact on {checked} strings");
}

#[test]
fn criterion_05_estimate_accuracy() {
    // Sampled estimates at n=10, reps=1e5, c=11/10, fixed seed: at least
    // 99/100 of the target mass lands within the multiplicative band.
    // The analytic failure bound is printed alongside the measurement.
    let n = 10u32;
    let cfg = EstimateConfig::paper_defaults(n, 1, 100_000, frac(11, 10));
    let floor = frac(99, 100);
    let sweep_corpus: [(&str, BitStringDist, u64); 3] = [
        ("uniform", BitStringDist::uniform(n), 0xE1_0001),
        ("bernoulli34", bernoulli34(n), 0xE1_0002),
        ("ramp", ramp(n), 0xE1_0003),
    ];
    for (name, d, seed) in &sweep_corpus {
        let ext = exact_extrapolator(d).unwrap();
        let sweep = estimate_accuracy_sweep(d, &ext, &cfg, *seed).unwrap();
        println!(
            "criterion 05 [{name}]: weighted pass mass = {} (floor 99/100), \
             analytic failure bound = {:.4e}",
            frac_str(&sweep.weighted_pass_mass),
            sweep.hoeffding_bound
        );
        assert!(
            sweep.weighted_pass_mass >= floor,
            "criterion 5 FAIL: {name} pass mass {} < 99/100",
            frac_str(&sweep.weighted_pass_mass)
        );
    }
    println!("criterion 05 PASS: all three sweeps clear the 99/100 floor");
}

#[test]
fn criterion_06_decider_band_property() {
    // With exact probabilities behind the threshold decider, every error
    // lies inside the analytic band plus the Low/High exception sets, and
    // the yes-side error mass is at most 2^(-delta/3), for n in {10,12}.
    let oracle = oracle();
    for n in [10u32, 12] {
        let params = GapKParams::new(n, 8, 12, GapSchedule::Explicit(4)).unwrap();
        for (name, d) in &standard_corpus(n) {
            let bands = band_report(d, &params, oracle).unwrap();
            assert!(
                bands.violations.is_empty(),
                "criterion 6 FAIL: {name} n={n}: {} error atoms escape the band",
                bands.violations.len()
            );
            assert!(bands.high_counting_bound_ok, "criterion 6 FAIL: {name} n={n} high set");
            let decider = ThresholdDecider::exact_probability(params, d);
            let errors = exact_error_account(&decider, d, &params, oracle).unwrap();
            assert!(
                errors.yes_bound_holds,
                "criterion 6 FAIL: {name} n={n} yes error {} > 2^(-4/3)",
                frac_str(&errors.yes_error_mass)
            );
        }
    }
    println!("criterion 06 PASS: band containment and yes-error <= 2^(-delta/3) at n=10,12");
}

#[test]
fn criterion_07_amplification_floor() {
    // Parallel repetition with A*B <= 24: the exact product distance is at
    // least 1 - exp(-B * base distance) for four base distributions.
    let make = |entries: &[(u32, BigRational)]| {
        BitStringDist::from_exact(2, entries.iter().map(|(v, p)| (BitStr::new(*v, 2), p.clone())))
            .unwrap()
    };
    let bases = [
        ("three-atom-dominant", make(&[(0, frac(1, 2)), (1, frac(1, 4)), (2, frac(1, 4))])),
        ("pair-heavy", make(&[(0, frac(3, 4)), (1, frac(1, 4))])),
        ("point-mass", BitStringDist::point_mass(BitStr::new(0, 2))),
        ("two-point-spread", make(&[(0, frac(1, 2)), (3, frac(1, 2))])),
    ];
    for n in [10u32, 16] {
        for (name, d) in &bases {
            let sd = mclab::dist::statistical_distance(d, &BitStringDist::uniform(2))
                .unwrap()
                .exact();
            let spec = QprgSpec::new(d.clone(), sd).unwrap();
            let amp = amplify(&spec, n, (3, 4)).unwrap();
            assert!(amp.a_len * amp.copies <= 24, "width cap violated");
            assert!(
                amp.exp_bound_holds,
                "criterion 7 FAIL: {name} n={n}: product sd {} below 1-exp(-{}*{})",
                frac_str(&amp.product_sd),
                amp.copies,
                frac_str(&amp.base_sd)
            );
        }
    }
    println!("criterion 07 PASS: exponential floor holds for 4 bases at B=8 and B=12");
}

#[test]
fn criterion_08_distinguisher_algebra() {
    // On the half-mixture instance over the period-3 generator at n=12,
    // the advantage identity has residual exactly zero for a spread of
    // deciders, and the oracle-label decider's advantage clears the
    // analytic floor 1 - 2^(-t) - uniform low-complexity mass.
    let oracle = oracle();
    let n = 12u32;
    let t = 8u32;
    let gen = BitStringDist::from_exact(
        n,
        BitStr::all(4).map(|s| (s.repeat(3), pow2(-4))),
    )
    .unwrap();
    let params = GapKParams::new(n, 9, 12, GapSchedule::Explicit(3)).unwrap();
    let mix_dist = mixture_instance(&gen).unwrap();
    let label = LabelDecider { params, oracle };
    let coin = CoinDecider(frac(1, 2));
    let always_yes = CoinDecider(BigRational::one());
    let threshold = ThresholdDecider::exact_probability(params, &mix_dist);
    let deciders: [(&str, &dyn Decider); 4] = [
        ("label", &label),
        ("coin", &coin),
        ("always_yes", &always_yes),
        ("threshold_exact", &threshold),
    ];
    for (name, decider) in deciders {
        let ident = advantage_identity(decider, &gen, &params, oracle).unwrap();
        assert!(
            ident.residual.is_zero(),
            "criterion 8 FAIL: {name} residual {} != 0",
            frac_str(&ident.residual)
        );
    }
    let ident = advantage_identity(&label, &gen, &params, oracle).unwrap();
    let floor =
        BigRational::one() - pow2(-i64::from(t)) - oracle.uniform_low_mass(n, 9).unwrap();
    assert!(
        ident.advantage >= floor,
        "criterion 8 FAIL: label advantage {} < floor {}",
        frac_str(&ident.advantage),
        frac_str(&floor)
    );
    println!(
        "criterion 08 PASS: residual 0 for 4 deciders; label advantage {} >= {}",
        frac_str(&ident.advantage),
        frac_str(&floor)
    );
}

#[test]
fn criterion_09_classical_chain() {
    // The brute-force inverter's extrapolator reproduces the true chain
    // conditionals exactly at t=12, and the planted-error inverter keeps
    // the averaged distance step within its advertised slack.
    let sampler = SeededSampler::new(12, 6, SeedMap::AndPairs).unwrap();
    let family = FnFamily::new(sampler).unwrap();
    let brute = brute_force_inverter(&family).unwrap();
    let ext = classical_ext(&family, &brute);
    let table = ext.conditional_table().unwrap();
    let truth = family.sampler().seeded_exact_dist().unwrap();
    let chain = chain_factorize(&truth).unwrap();
    for (prefix, p_one) in &table {
        assert_eq!(
            &chain.conditional(prefix).p_one,
            p_one,
            "criterion 9 FAIL: conditional after {prefix} disagrees"
        );
    }

    let delta = frac(1, 8);
    let planted = planted_error_inverter(&family, delta.clone()).unwrap();
    let zero_point = BitStringDist::point_mass(BitStr::new(0, 6));
    let target = mixture(&[(frac(3, 4), &truth), (frac(1, 4), &zero_point)]).unwrap();
    let report = verify_sd_chain(&family, &planted, 2, &target).unwrap();
    assert!(report.within_advertised_slack, "criterion 9 FAIL: slack exceeded");
    assert!(report.data_processing_ok, "criterion 9 FAIL: projection grew distance");
    assert!(report.averaging_ok, "criterion 9 FAIL: averaging step");
    assert!(
        report.averaged_sd <= delta,
        "criterion 9 FAIL: averaged sd {} > 1/8",
        frac_str(&report.averaged_sd)
    );
    println!(
        "criterion 09 PASS: {} conditionals exact; averaged sd {} within 1/8",
        table.len(),
        frac_str(&report.averaged_sd)
    );
}

#[test]
fn criterion_10_reproducibility() {
    // Every golden config re-runs to a byte-identical report.
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden"));
    let checks = verify_golden(dir).unwrap();
    assert!(checks.len() >= 4);
    for check in &checks {
        assert!(check.matched, "criterion 10 FAIL: golden {} drifted", check.name);
    }
    println!("criterion 10 PASS: {} golden reports byte-identical", checks.len());
}

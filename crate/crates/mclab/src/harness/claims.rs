//! The claim registry: every verifiable statement the library is built
//! around, as a stable semantic id, with the experiments that measure it.
//!
//! Report rows cite these ids in their `claim` field, which keeps the
//! artifacts self-contained: a summary names what was checked, not where the
//! statement came from. The registry test asserts the coverage map is total
//! in both directions (every id is emitted by its experiments; every emitted
//! id is registered).

/// One verifiable claim and where it is exercised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClaimAnchor {
    /// Stable semantic id cited by report rows.
    pub id: &'static str,
    /// What the rows citing this id actually measure.
    pub statement: &'static str,
    /// Experiments that emit at least one row with this id.
    pub experiments: &'static [&'static str],
}

/// Everything the experiments are on the hook for.
pub const CLAIM_REGISTRY: &[ClaimAnchor] = &[
    ClaimAnchor {
        id: "puzzle.pair_interface",
        statement: "sampled (instance, witness) pairs verify: re-running the \
                    sampler on a returned witness reproduces the instance, \
                    and posterior draws spread over all consistent witnesses",
        experiments: &["E5"],
    },
    ClaimAnchor {
        id: "extrapolator.slack_contract",
        statement: "an extrapolator's per-index conditional deviation from \
                    the true chain conditionals stays within its advertised \
                    slack on average, and the mass of strings crossing a \
                    b-slack deviation is at most n/b",
        experiments: &["E1"],
    },
    ClaimAnchor {
        id: "estimate.chain_rule",
        statement: "substituting exact conditionals into the product \
                    estimator returns Pr[y] exactly, for every y on and off \
                    support",
        experiments: &["E1"],
    },
    ClaimAnchor {
        id: "estimate.conditional_mass",
        statement: "the mass of strings passing through a conditional below \
                    1/(2a) is at most n/a, for every distribution and a > 0",
        experiments: &["E1"],
    },
    ClaimAnchor {
        id: "estimate.concentration",
        statement: "with exact conditionals sampled at finite reps, the \
                    mass-weighted fraction of strings estimated within a \
                    multiplicative factor c clears the configured floor; the \
                    Hoeffding failure bound 2n*exp(-2*reps/d^2) is printed \
                    with every sweep",
        experiments: &["E1"],
    },
    ClaimAnchor {
        id: "gapk.promise_bands",
        statement: "every support string gets exactly one label (yes at \
                    complexity <= s1, no at >= s2 or beyond the table when \
                    s2 <= l_max + 1, promise-violating between), and the \
                    three label masses total 1",
        experiments: &["E2"],
    },
    ClaimAnchor {
        id: "decider.threshold_bands",
        statement: "the exact-probability threshold decider errs only inside \
                    the low-yes band and the high-no band, and its yes-error \
                    mass is at most 2^(-delta/3)",
        experiments: &["E2"],
    },
    ClaimAnchor {
        id: "hardness.error_metrics",
        statement: "weak and strong average-hardness are measurable error \
                    masses: the blind coin decider exhibits the weak floor \
                    while the exact-probability decider beats the strong \
                    schema floor 1/2 - n^(-k)",
        experiments: &["E2"],
    },
    ClaimAnchor {
        id: "counting.program_bound",
        statement: "at most 2^(s+1) - 2 strings have table complexity <= s, \
                    so uniform mass at depth n - delta is at most \
                    2^(-delta+1)",
        experiments: &["E3"],
    },
    ClaimAnchor {
        id: "counting.index_witness",
        statement: "every member of a high set is pinned by a runnable index \
                    program whose index field costs at most 2*ceil(log2 \
                    |High|) + 1 bits, and |High| <= (100/99)*2^(s - delta/2)",
        experiments: &["E3"],
    },
    ClaimAnchor {
        id: "qprg.sd_floor",
        statement: "a generator's claimed distance from uniform never \
                    exceeds its exact statistical distance",
        experiments: &["E4"],
    },
    ClaimAnchor {
        id: "qprg.strong_hardness",
        statement: "uniform strings are incompressible (mass of K <= n - \
                    delta at most 2^(-delta+1)), far-generator mass piles \
                    above the indexability cutoff, the advantage identity \
                    2*err = 1 - adv - offYes - offNo + slacks has residual \
                    exactly 0 for every decider, and the label decider's \
                    advantage clears 1 - 2^(-t) - uniform-low-K mass",
        experiments: &["E4"],
    },
    ClaimAnchor {
        id: "qprg.nu_advice",
        statement: "averaging the advice uniformly leaves the advised \
                    instance distribution exactly sd_far/(2m) from uniform",
        experiments: &["E4"],
    },
    ClaimAnchor {
        id: "qprg.weak_from_advice",
        statement: "any distinguisher's advantage on the advice-averaged \
                    generator is capped by its statistical distance \
                    sd_far/m, so only weak hardness survives advice \
                    averaging",
        experiments: &["E4"],
    },
    ClaimAnchor {
        id: "classical.inversion_chain",
        statement: "the inverter-level joint distance dominates the appended \
                    and projected distances, the per-index average equals \
                    the projected distance exactly, a zero-slack inverter \
                    extrapolates the true chain conditionals, and a \
                    delta-planted inverter stays within delta through the \
                    whole chain",
        experiments: &["E5"],
    },
    ClaimAnchor {
        id: "amplify.parallel_repetition",
        statement: "B-fold repetition of a support-dominant base has product \
                    distance exactly 1 - (m/2^A)^B, which clears the \
                    displayed floor 1 - exp(-B*sd); the uniform base is \
                    degenerate and the quarter-tilt base is a reproducible \
                    counterexample to the floor",
        experiments: &["E6"],
    },
];

/// Looks up one anchor by id.
pub fn claim_anchor(id: &str) -> Option<&'static ClaimAnchor> {
    CLAIM_REGISTRY.iter().find(|a| a.id == id)
}

/// True when `id` names a registered claim.
pub fn is_registered_claim(id: &str) -> bool {
    claim_anchor(id).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_ids_are_unique_and_match_experiment_names() {
        let mut seen = std::collections::BTreeSet::new();
        for anchor in CLAIM_REGISTRY {
            assert!(seen.insert(anchor.id), "duplicate claim id {}", anchor.id);
            assert!(!anchor.experiments.is_empty(), "{} has no experiment", anchor.id);
            for e in anchor.experiments {
                assert!(
                    matches!(*e, "E1" | "E2" | "E3" | "E4" | "E5" | "E6"),
                    "{} cites unknown experiment {e}",
                    anchor.id
                );
            }
        }
        assert_eq!(CLAIM_REGISTRY.len(), 16);
    }
}

//! Experiment configuration: TOML in, validated knobs out.
//!
//! Configs are human-authored, so they are TOML with defaults for everything
//! but the experiment id and seed. Validation enforces each experiment's
//! feasibility caps up front: a config that passes `validate` will not blow
//! the exact-arithmetic budget mid-run.

use super::HarnessError;
use crate::ratio::parse_frac;
use crate::utm::UtmConfig;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// The machine/oracle knobs an experiment builds its table from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    /// Longest program enumerated (L_max).
    pub l_max: u32,
    /// Step cap per program run.
    pub step_cap: u64,
    /// Longest output the machine may produce.
    pub max_output_len: u32,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { l_max: 14, step_cap: 10_000, max_output_len: 24 }
    }
}

impl OracleSettings {
    /// The machine configuration, with the enumeration budget taken from
    /// `MCLAB_BUDGET` when that env var is set.
    pub fn utm_config(&self) -> Result<UtmConfig, HarnessError> {
        let mut cfg = UtmConfig::reference();
        cfg.max_program_len = self.l_max;
        cfg.step_cap = self.step_cap;
        cfg.max_output_len = self.max_output_len;
        cfg.execution_budget = effective_budget(cfg.execution_budget)?;
        Ok(cfg)
    }
}

/// The enumeration budget: `MCLAB_BUDGET` when set (decimal u64), otherwise
/// the given default. A present-but-unparsable value is a config error, not
/// a silent fallback.
pub fn effective_budget(default: u64) -> Result<u64, HarnessError> {
    match std::env::var("MCLAB_BUDGET") {
        Ok(s) => parse_budget(&s),
        Err(std::env::VarError::NotPresent) => Ok(default),
        Err(std::env::VarError::NotUnicode(_)) => Err(HarnessError::ConfigInvalid(
            "MCLAB_BUDGET is not valid unicode".into(),
        )),
    }
}

fn parse_budget(s: &str) -> Result<u64, HarnessError> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| HarnessError::ConfigInvalid(format!("MCLAB_BUDGET is not a u64: {s:?}")))
}

/// Per-experiment numeric knobs. Every field has a default, so configs only
/// name what they change. Fractions are carried as "p/q" strings and parsed
/// exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSettings {
    /// Sampled draws per index in the product estimator (E1).
    pub reps: u64,
    /// Multiplicative accuracy target, "p/q" with p/q > 1 (E1).
    pub c: String,
    /// Analysis exponent q: a = n^(q+2), b = d = n^(q+4) (E1).
    pub q: u32,
    /// The a values for the conditional-mass rows (E1).
    pub mass_divisors: Vec<u64>,
    /// Noisy-extrapolator slack is 1/slack_den (E1).
    pub slack_den: u64,
    /// Weighted pass-mass floor for accuracy sweeps, "p/q" (E1).
    pub pass_mass_floor: String,
    /// Yes threshold s1 (E2).
    pub s1: u32,
    /// No threshold s2 (E2).
    pub s2: u32,
    /// Strong-schema exponent: floor 1/2 - n^(-k) (E2).
    pub k: u32,
    /// Compression depths for the uniform-mass rows (E3, E4).
    pub delta_values: Vec<u32>,
    /// Amplification exponent tau as [num, den], num < den (E4 floor, E6).
    pub tau: [u32; 2],
    /// Cutoff scale G, "p/q" in (0, 1) (E4 partition).
    pub g: String,
    /// Planted inverter error, "p/q" in [0, 1] (E5).
    pub planted_delta: String,
    /// Posterior-spread draws for the seeded inversion smoke (E5).
    pub chi2_reps: u64,
    /// Chi-square acceptance ceiling, "p/q" (E5; 15 degrees of freedom).
    pub chi2_critical: String,
}

impl Default for ParamSettings {
    fn default() -> Self {
        ParamSettings {
            reps: 100_000,
            c: "11/10".into(),
            q: 1,
            mass_divisors: vec![4, 16, 64],
            slack_den: 16,
            pass_mass_floor: "99/100".into(),
            s1: 8,
            s2: 12,
            k: 2,
            delta_values: vec![3, 4, 6],
            tau: [3, 4],
            g: "1/8".into(),
            planted_delta: "1/8".into(),
            chi2_reps: 1600,
            chi2_critical: "45/1".into(),
        }
    }
}

impl ParamSettings {
    pub fn c_frac(&self) -> Result<BigRational, HarnessError> {
        let c = parse_fraction("c", &self.c)?;
        if c <= BigRational::one() {
            return Err(HarnessError::ConfigInvalid(format!(
                "accuracy factor c must exceed 1, got {}",
                self.c
            )));
        }
        Ok(c)
    }

    pub fn g_frac(&self) -> Result<BigRational, HarnessError> {
        let g = parse_fraction("g", &self.g)?;
        if !num_traits::Signed::is_positive(&g) || g >= BigRational::one() {
            return Err(HarnessError::ConfigInvalid(format!(
                "cutoff scale g must lie in (0, 1), got {}",
                self.g
            )));
        }
        Ok(g)
    }

    pub fn planted_delta_frac(&self) -> Result<BigRational, HarnessError> {
        let d = parse_fraction("planted_delta", &self.planted_delta)?;
        if num_traits::Signed::is_negative(&d) || d > BigRational::one() {
            return Err(HarnessError::ConfigInvalid(format!(
                "planted_delta must lie in [0, 1], got {}",
                self.planted_delta
            )));
        }
        Ok(d)
    }

    pub fn pass_mass_floor_frac(&self) -> Result<BigRational, HarnessError> {
        parse_fraction("pass_mass_floor", &self.pass_mass_floor)
    }

    pub fn chi2_critical_frac(&self) -> Result<BigRational, HarnessError> {
        parse_fraction("chi2_critical", &self.chi2_critical)
    }
}

fn parse_fraction(field: &str, text: &str) -> Result<BigRational, HarnessError> {
    parse_frac(text)
        .map_err(|e| HarnessError::ConfigInvalid(format!("bad fraction for {field}: {e}")))
}

/// One experiment run, fully pinned: what to run, at which lengths, from
/// which seed, against which machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "E1" through "E6".
    pub experiment: String,
    /// Output lengths; defaults to {8, 10, 12, 14} filtered by the
    /// experiment's feasibility cap.
    #[serde(default)]
    pub n_grid: Vec<u32>,
    /// Master seed; per-cell substreams are derived from it.
    pub seed: u64,
    /// Where artifacts land when the CLI is not told otherwise.
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub oracle: OracleSettings,
    #[serde(default)]
    pub params: ParamSettings,
}

/// The generic default grid; experiments drop the lengths outside their cap.
pub const DEFAULT_N_GRID: [u32; 4] = [8, 10, 12, 14];

impl ExperimentConfig {
    /// A ready-to-run config with every knob at its default.
    pub fn new(experiment: &str, seed: u64) -> Self {
        ExperimentConfig {
            experiment: experiment.to_string(),
            n_grid: Vec::new(),
            seed,
            out_dir: None,
            oracle: OracleSettings::default(),
            params: ParamSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text)
            .map_err(|e| HarnessError::ConfigInvalid(format!("TOML parse: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::ConfigInvalid(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    /// The grid actually run: the configured one, or the default filtered by
    /// this experiment's cap.
    pub fn effective_grid(&self) -> Result<Vec<u32>, HarnessError> {
        let mut grid = if self.n_grid.is_empty() {
            DEFAULT_N_GRID
                .iter()
                .copied()
                .filter(|&n| self.n_feasible(n).is_ok())
                .collect()
        } else {
            self.n_grid.clone()
        };
        grid.sort_unstable();
        grid.dedup();
        if grid.is_empty() {
            return Err(HarnessError::ConfigInvalid(format!(
                "no feasible n for {}",
                self.experiment
            )));
        }
        Ok(grid)
    }

    /// Full validation: experiment id, oracle knobs, parameter fractions,
    /// and every grid value against the experiment's feasibility cap.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !matches!(self.experiment.as_str(), "E1" | "E2" | "E3" | "E4" | "E5" | "E6") {
            return Err(HarnessError::ConfigInvalid(format!(
                "unknown experiment {:?} (expected E1..E6)",
                self.experiment
            )));
        }
        if self.oracle.l_max == 0 || self.oracle.l_max > 20 {
            return Err(HarnessError::ConfigInvalid(format!(
                "oracle.l_max {} outside 1..=20",
                self.oracle.l_max
            )));
        }
        if self.oracle.step_cap < 64 {
            return Err(HarnessError::ConfigInvalid(
                "oracle.step_cap below 64 cannot run the emit loop".into(),
            ));
        }
        if self.oracle.max_output_len > 24 {
            return Err(HarnessError::ConfigInvalid(
                "oracle.max_output_len above the 24-bit string cap".into(),
            ));
        }
        self.params.c_frac()?;
        self.params.g_frac()?;
        self.params.planted_delta_frac()?;
        self.params.pass_mass_floor_frac()?;
        self.params.chi2_critical_frac()?;
        let [num, den] = self.params.tau;
        if num == 0 || num >= den {
            return Err(HarnessError::ConfigInvalid(format!(
                "tau = {num}/{den} must lie strictly between 0 and 1"
            )));
        }
        if self.params.reps == 0 {
            return Err(HarnessError::ConfigInvalid("reps must be positive".into()));
        }
        if self.params.mass_divisors.is_empty()
            || self.params.mass_divisors.iter().any(|&a| a == 0)
        {
            return Err(HarnessError::ConfigInvalid(
                "mass_divisors must be nonempty and positive".into(),
            ));
        }
        if self.params.delta_values.is_empty()
            || self.params.delta_values.iter().any(|&d| d == 0)
        {
            return Err(HarnessError::ConfigInvalid(
                "delta_values must be nonempty and positive".into(),
            ));
        }
        if self.params.slack_den < 2 {
            return Err(HarnessError::ConfigInvalid(
                "slack_den must be at least 2 (slack at most 1/2)".into(),
            ));
        }
        for &n in &self.effective_grid()? {
            self.n_feasible(n)?;
        }
        Ok(())
    }

    /// Per-experiment feasibility cap for one output length. E5 runs fixed
    /// function families and accepts any grid.
    fn n_feasible(&self, n: u32) -> Result<(), HarnessError> {
        let fail = |why: String| {
            Err(HarnessError::ConfigInvalid(format!(
                "{} cannot run at n = {n}: {why}",
                self.experiment
            )))
        };
        match self.experiment.as_str() {
            "E1" => {
                if n < 6 || n % 2 != 0 {
                    return fail("the distribution corpus needs even n >= 6".into());
                }
                // Sweep work is reps draws per (string, index); cap the
                // per-distribution total so a run stays in minutes.
                let work = self
                    .params
                    .reps
                    .saturating_mul(u64::from(n))
                    .saturating_mul(1u64 << n.min(40));
                if work > 1u64 << 31 {
                    return fail(format!(
                        "sampled sweep needs reps*n*2^n <= 2^31 per distribution \
                         (got {work}); lower reps or n"
                    ));
                }
                Ok(())
            }
            "E2" => {
                if n < 6 || n % 2 != 0 {
                    return fail("the distribution corpus needs even n >= 6".into());
                }
                if n > self.oracle.max_output_len {
                    return fail("n exceeds the oracle output cap".into());
                }
                if self.params.s1 >= self.params.s2 {
                    return fail(format!(
                        "needs s1 < s2, got ({}, {})",
                        self.params.s1, self.params.s2
                    ));
                }
                if self.params.s2 > self.oracle.l_max + 1 {
                    return fail(format!(
                        "s2 = {} cannot be certified past l_max + 1 = {}",
                        self.params.s2,
                        self.oracle.l_max + 1
                    ));
                }
                if n > 14 {
                    return fail("exact corpus scans cap at n = 14".into());
                }
                Ok(())
            }
            "E3" => {
                if n < 6 || n % 2 != 0 {
                    return fail("the high-set witness distribution needs even n >= 6".into());
                }
                if n > self.oracle.max_output_len || n > 16 {
                    return fail("whole-space oracle scans cap at min(16, output cap)".into());
                }
                for &delta in &self.params.delta_values {
                    if delta <= n && n - delta > self.oracle.l_max {
                        return fail(format!(
                            "depth n - {delta} exceeds l_max = {}",
                            self.oracle.l_max
                        ));
                    }
                }
                Ok(())
            }
            "E4" => {
                if n % 3 != 0 || n < 12 {
                    return fail("the period-3 generator needs n >= 12 with 3 | n".into());
                }
                if n > self.oracle.l_max + 1 || n > self.oracle.max_output_len {
                    return fail(format!(
                        "labels at s2 = n need n <= l_max + 1 = {}",
                        self.oracle.l_max + 1
                    ));
                }
                Ok(())
            }
            "E5" => Ok(()),
            "E6" => {
                if n < 4 {
                    return fail("amplification needs n >= 4".into());
                }
                // Width overruns surface as budget errors at run time, by
                // design; nothing further to check here.
                Ok(())
            }
            _ => unreachable!("validated above"),
        }
    }

    /// Hex digest pinning the exact config a report was produced from.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialization never fails");
        let hash = Sha256::digest(&bytes);
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_strings_parse_strictly() {
        assert_eq!(parse_budget("10000").unwrap(), 10_000);
        assert_eq!(parse_budget(" 42 ").unwrap(), 42);
        for bad in ["lots", "-3", "1e6", ""] {
            let err = parse_budget(bad).unwrap_err();
            assert!(matches!(err, HarnessError::ConfigInvalid(_)), "{bad:?}: {err}");
        }
    }

    #[test]
    fn defaults_parse_and_validate_for_every_experiment() {
        for e in ["E1", "E2", "E3", "E4", "E5", "E6"] {
            let cfg = ExperimentConfig::new(e, 7);
            cfg.validate().unwrap_or_else(|err| panic!("{e}: {err}"));
            let grid = cfg.effective_grid().unwrap();
            assert!(!grid.is_empty(), "{e} has an empty default grid");
        }
    }

    #[test]
    fn default_grids_respect_the_caps() {
        assert_eq!(ExperimentConfig::new("E1", 0).effective_grid().unwrap(), vec![8, 10]);
        assert_eq!(
            ExperimentConfig::new("E2", 0).effective_grid().unwrap(),
            vec![8, 10, 12, 14]
        );
        assert_eq!(
            ExperimentConfig::new("E3", 0).effective_grid().unwrap(),
            vec![8, 10, 12, 14]
        );
        assert_eq!(ExperimentConfig::new("E4", 0).effective_grid().unwrap(), vec![12]);
        assert_eq!(
            ExperimentConfig::new("E6", 0).effective_grid().unwrap(),
            vec![8, 10, 12, 14]
        );
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let text = r#"
            experiment = "E3"
            seed = 99
            n_grid = [8, 10]

            [oracle]
            l_max = 12

            [params]
            delta_values = [3, 4]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiment, "E3");
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.oracle.l_max, 12);
        assert_eq!(cfg.oracle.step_cap, 10_000, "unset oracle knobs keep defaults");
        assert_eq!(cfg.params.delta_values, vec![3, 4]);
        assert_eq!(cfg.params.reps, 100_000, "unset params keep defaults");
        cfg.validate().unwrap();
    }

    #[test]
    fn infeasible_grids_are_rejected_with_the_reason() {
        let mut cfg = ExperimentConfig::new("E1", 1);
        cfg.n_grid = vec![12];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("lower reps or n"), "got: {err}");

        let mut cfg = ExperimentConfig::new("E4", 1);
        cfg.n_grid = vec![10];
        assert!(cfg.validate().is_err(), "E4 needs 3 | n");

        let mut cfg = ExperimentConfig::new("E2", 1);
        cfg.params.s2 = 16;
        assert!(cfg.validate().is_err(), "s2 past l_max + 1 is uncertifiable");

        let cfg = ExperimentConfig::new("E9", 1);
        assert!(matches!(cfg.validate(), Err(HarnessError::ConfigInvalid(_))));
    }

    #[test]
    fn digest_pins_the_whole_config() {
        let a = ExperimentConfig::new("E3", 7);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.params.delta_values = vec![5];
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = ExperimentConfig::from_toml("experiment = \"E1\"\nseed = 1\nbogus = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("TOML parse"), "got: {err}");
    }
}

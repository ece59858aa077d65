use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    ProgrammerOnly,
    ProgrammerPlusInspector,
}

/// A simulated instruction stream. Each instruction's first attempt
/// succeeds with `first_attempt_success_rate`; with the inspector enabled a
/// failure gets up to `max_attempts` repair rounds, each succeeding with
/// `repair_success_rate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationScenario {
    pub n_instructions: usize,
    pub first_attempt_success_rate: f64,
    pub repair_success_rate: f64,
    pub seed: u64,
    pub agents_mode: AblationMode,
    #[serde(rename = "T", alias = "max_attempts")]
    pub max_attempts: u32,
}

impl AblationScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_instructions == 0 {
            return Err(Error::Domain("n_instructions must be at least 1".into()));
        }
        for (name, p) in [
            ("first_attempt_success_rate", self.first_attempt_success_rate),
            ("repair_success_rate", self.repair_success_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: AblationMode) -> Self {
        Self { agents_mode: mode, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRateResult {
    pub passed: usize,
    pub total: usize,
    pub pass_rate: f64,
    /// Relative gain over a baseline rate: `(rate - base) / base`.
    pub improvement_over_baseline: Option<f64>,
}

impl PassRateResult {
    pub fn from_counts(passed: usize, total: usize) -> Result<Self> {
        if total == 0 || passed > total {
            return Err(Error::Domain(format!("invalid counts {passed}/{total}")));
        }
        Ok(Self { passed, total, pass_rate: passed as f64 / total as f64, improvement_over_baseline: None })
    }

    pub fn with_baseline(mut self, baseline_rate: f64) -> Result<Self> {
        if baseline_rate <= 0.0 {
            return Err(Error::Domain("baseline pass rate must be positive".into()));
        }
        self.improvement_over_baseline = Some((self.pass_rate - baseline_rate) / baseline_rate);
        Ok(self)
    }

    pub fn percent(&self) -> f64 {
        self.pass_rate * 100.0
    }
}

/// Simulates the scenario. Every instruction consumes exactly
/// `max_attempts + 1` uniforms whatever the mode, so two runs with the same
/// seed see the same stream and differ only in whether repairs count.
pub fn run_ablation(scenario: &AblationScenario) -> Result<PassRateResult> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let rounds = scenario.max_attempts as usize;
    let mut draws = vec![0.0f64; rounds + 1];
    let mut passed = 0;
    for _ in 0..scenario.n_instructions {
        for d in draws.iter_mut() {
            *d = rng.gen::<f64>();
        }
        let first = draws[0] < scenario.first_attempt_success_rate;
        let ok = first
            || (scenario.agents_mode == AblationMode::ProgrammerPlusInspector
                && draws[1..].iter().any(|&u| u < scenario.repair_success_rate));
        passed += usize::from(ok);
    }
    PassRateResult::from_counts(passed, scenario.n_instructions)
}

/// Runs both modes on the same stream; the combined result carries its
/// improvement over the programmer-only baseline.
pub fn run_ablation_pair(scenario: &AblationScenario) -> Result<(PassRateResult, PassRateResult)> {
    let base = run_ablation(&scenario.with_mode(AblationMode::ProgrammerOnly))?;
    let combined = run_ablation(&scenario.with_mode(AblationMode::ProgrammerPlusInspector))?;
    let combined = if base.passed > 0 { combined.with_baseline(base.pass_rate)? } else { combined };
    Ok((base, combined))
}

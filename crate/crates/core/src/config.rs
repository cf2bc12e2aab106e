//! Experiment configuration, read from TOML.
//!
//! ```toml
//! k = 3
//! rounds = 1000
//! seed = 7
//!
//! [budget]
//! kind = "zero"
//!
//! [truth]
//! kind = "uniform"
//!
//! [agent]
//! kind = "omniscient"
//!
//! [env]
//! kind = "random_walk"
//! sigma = 0.05
//!
//! [output]
//! run_log = "out/run.csv"
//! summary = "out/summary.json"
//! ```

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentSpec, RewardModel};
use crate::diagnostics::DEFAULT_LEMMA_TOLERANCE;
use crate::environments::{lower_bound_values, EnvSpec};
use crate::error::{Error, Result};
use crate::predictor::EmptySetPolicy;
use crate::rng::{derive_seed, rng_from, stream};
use crate::sampler::SamplerConfig;
use crate::types::{RegretBudget, ValueVector, DEFAULT_COST_CAP};

/// Where the agent's private values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthSpec {
    Fixed {
        values: Vec<f64>,
    },
    /// Uniform on the unit box, drawn from the run seed.
    Uniform,
    /// `1` on even arms, `0` on odd arms.
    LowerBound,
}

impl TruthSpec {
    pub fn resolve(&self, k: usize, seed: u64) -> Result<ValueVector> {
        match self {
            TruthSpec::Fixed { values } => {
                if values.len() != k {
                    return Err(Error::Config(format!("truth has {} values, k = {k}", values.len())));
                }
                ValueVector::new(values.clone())
            }
            TruthSpec::Uniform => {
                let mut rng = rng_from(derive_seed(seed, stream::TRUTH));
                ValueVector::new((0..k).map(|_| rng.random::<f64>()).collect())
            }
            TruthSpec::LowerBound => lower_bound_values(k),
        }
    }
}

/// Sampler settings; unset fields take the defaults for the run's `k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerOverrides {
    pub n_samples: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub bisection_tol: Option<f64>,
    pub n_chains: Option<usize>,
}

impl SamplerOverrides {
    pub fn resolve(&self, k: usize) -> SamplerConfig {
        let d = SamplerConfig::for_dim(k, 0);
        SamplerConfig {
            n_samples: self.n_samples.unwrap_or(d.n_samples),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            thin: self.thin.unwrap_or(d.thin),
            bisection_tol: self.bisection_tol.unwrap_or(d.bisection_tol),
            n_chains: self.n_chains.unwrap_or(d.n_chains),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub run_log: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    /// Public transcript `t, c_1..c_k, a`, usable as replay input.
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// Adds weight, lemma margin and empty-set columns to the run log.
    pub emit_weights: bool,
    /// Computes the mismatch-lemma margin on every mismatch round.
    pub emit_diagnostics: bool,
    pub empty_set_policy: EmptySetPolicy,
    pub lemma_tolerance: f64,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            emit_weights: false,
            emit_diagnostics: false,
            empty_set_policy: EmptySetPolicy::Abort,
            lemma_tolerance: DEFAULT_LEMMA_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub c_max: f64,
    /// Utility gap for the mistake counts.
    #[serde(default = "default_gap")]
    pub gap: f64,
    pub budget: RegretBudget,
    pub truth: TruthSpec,
    pub agent: AgentSpec,
    #[serde(default)]
    pub reward: RewardModel,
    pub env: EnvSpec,
    #[serde(default)]
    pub sampler: SamplerOverrides,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub flags: Flags,
}

fn default_cap() -> f64 {
    DEFAULT_COST_CAP
}

fn default_gap() -> f64 {
    0.1
}

impl ExperimentConfig {
    /// A config with defaults everywhere except the named fields.
    pub fn new(k: usize, rounds: usize, seed: u64, agent: AgentSpec, env: EnvSpec) -> Self {
        ExperimentConfig {
            k,
            rounds,
            seed,
            c_max: DEFAULT_COST_CAP,
            gap: default_gap(),
            budget: RegretBudget::Zero,
            truth: TruthSpec::Uniform,
            agent,
            reward: RewardModel::default(),
            env,
            sampler: SamplerOverrides::default(),
            output: OutputPaths::default(),
            flags: Flags::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let EnvSpec::FromFile { path } = &mut self.env {
            fix(path);
        }
        for p in [&mut self.output.run_log, &mut self.output.summary, &mut self.output.transcript].into_iter().flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.c_max.is_finite() && self.c_max > 0.0) {
            return Err(Error::Config(format!("c_max {} must be positive", self.c_max)));
        }
        if self.gap.is_nan() || self.gap <= 0.0 {
            return Err(Error::NonPositiveGap(self.gap));
        }
        self.budget.validate()?;
        self.agent.validate(self.k)?;
        self.sampler.resolve(self.k).validate()?;
        self.truth.resolve(self.k, self.seed)?;
        match &self.env {
            EnvSpec::LowerBound { .. } if self.rounds > self.k / 2 => {
                return Err(Error::Config(format!("lower-bound costs last k/2 = {} rounds", self.k / 2)));
            }
            EnvSpec::FromFile { path } if !path.exists() => {
                return Err(Error::Config(format!("cost file {} does not exist", path.display())));
            }
            _ => {}
        }
        if let AgentSpec::Scripted { actions } = &self.agent {
            if actions.len() < self.rounds {
                return Err(Error::Config(format!("script has {} actions for {} rounds", actions.len(), self.rounds)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
k = 3
rounds = 50
seed = 11

[budget]
kind = "log"
coefficient = 0.5

[truth]
kind = "fixed"
values = [0.2, 0.9, 0.5]

[agent]
kind = "ucb_cost"

[env]
kind = "iid_uniform"
low = 0.0
high = 1.0

[sampler]
n_samples = 500

[flags]
emit_weights = true
empty_set_policy = "double_budget"
"#;

    #[test]
    fn parses_nested_tables() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.budget, RegretBudget::Log { coefficient: 0.5 });
        assert_eq!(cfg.agent, AgentSpec::UcbCost { exploration: 2.0 });
        assert_eq!(cfg.flags.empty_set_policy, EmptySetPolicy::DoubleBudget);
        let s = cfg.sampler.resolve(3);
        assert_eq!((s.n_samples, s.thin, s.burn_in), (500, 3, 300));
        assert_eq!(cfg.c_max, 2.0);
        // round trip through the writer
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_k = EXAMPLE.replace("k = 3", "k = 1");
        assert!(ExperimentConfig::from_toml(&bad_k).is_err());
        let typo = EXAMPLE.replace("rounds = 50", "rounds = 50\nroundz = 3");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
        let mut cfg = ExperimentConfig::new(4, 3, 0, AgentSpec::Omniscient, EnvSpec::LowerBound { h: 2.0 });
        assert!(cfg.validate().is_err());
        cfg.rounds = 2;
        assert!(cfg.validate().is_ok());
        cfg.env = EnvSpec::FromFile { path: "/nonexistent/costs.csv".into() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn truth_resolution() {
        assert_eq!(TruthSpec::LowerBound.resolve(4, 0).unwrap().as_slice(), &[0.0, 1.0, 0.0, 1.0]);
        let a = TruthSpec::Uniform.resolve(3, 5).unwrap();
        assert_eq!(a, TruthSpec::Uniform.resolve(3, 5).unwrap());
        assert_ne!(a, TruthSpec::Uniform.resolve(3, 6).unwrap());
        assert!(TruthSpec::Fixed { values: vec![0.5] }.resolve(2, 0).is_err());
    }
}

//! Cost sequences posted to the agent and the predictor.

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::types::{CostVector, ValueVector, DEFAULT_COST_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    /// Independent uniform costs in `[low, high]` every round.
    IidUniform { low: f64, high: f64 },
    /// Gaussian steps of size `sigma` per arm, clamped to `[0, c_max]`.
    /// Starts from `start`, or uniform in `[0, c_max]` when absent.
    RandomWalk {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        start: Option<Vec<f64>>,
    },
    /// Cycles through `pattern`.
    Periodic { pattern: Vec<Vec<f64>> },
    /// Round `t` costs 0 on arms `2t − 1, 2t` and `h` elsewhere; `k/2` rounds.
    LowerBound { h: f64 },
    /// Costs read from a transcript file.
    FromFile { path: PathBuf },
}

fn default_sigma() -> f64 {
    0.05
}

/// Stateful generator for one [`EnvSpec`]. Round `t`'s costs depend only on
/// the spec, `k`, the cap and the seed.
#[derive(Debug, Clone)]
pub struct CostProcess {
    spec: EnvSpec,
    k: usize,
    cap: f64,
    seed: u64,
    /// Generated rounds, for the kinds that are defined recursively.
    cache: Vec<CostVector>,
    walk_rng: Option<ChaCha8Rng>,
}

impl CostProcess {
    pub fn new(spec: EnvSpec, k: usize, cap: f64, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 arms, got {k}")));
        }
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::Config(format!("cost cap {cap} must be positive")));
        }
        let mut cache = Vec::new();
        match &spec {
            EnvSpec::IidUniform { low, high } => {
                if !(0.0 <= *low && low <= high && *high <= cap) {
                    return Err(Error::Config(format!("uniform range [{low}, {high}] must lie in [0, {cap}]")));
                }
            }
            EnvSpec::RandomWalk { sigma, start } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::Config(format!("random-walk step {sigma} must be >= 0")));
                }
                if let Some(start) = start {
                    if start.len() != k {
                        return Err(Error::Config("random-walk start must have k entries".into()));
                    }
                    CostVector::with_cap(start.clone(), cap)?;
                }
            }
            EnvSpec::Periodic { pattern } => {
                if pattern.is_empty() {
                    return Err(Error::Config("periodic pattern is empty".into()));
                }
                for row in pattern {
                    if row.len() != k {
                        return Err(Error::Config("periodic pattern rows must have k entries".into()));
                    }
                    CostVector::with_cap(row.clone(), cap)?;
                }
            }
            EnvSpec::LowerBound { h } => {
                if !k.is_multiple_of(2) {
                    return Err(Error::OddK(k));
                }
                if !(*h > 1.0 && *h <= cap) {
                    return Err(Error::Config(format!("lower-bound cost {h} must exceed 1 and fit the cap {cap}")));
                }
            }
            EnvSpec::FromFile { path } => {
                let transcript = crate::io::read_transcript(path)?;
                if transcript.k() != k {
                    return Err(Error::Config(format!("transcript has k = {}, config says {k}", transcript.k())));
                }
                for round in transcript.rounds() {
                    round.costs.check_cap(cap)?;
                    cache.push(round.costs.clone());
                }
            }
        }
        Ok(CostProcess { spec, k, cap, seed, cache, walk_rng: None })
    }

    /// Number of rounds available, when finite.
    pub fn horizon(&self) -> Option<usize> {
        match &self.spec {
            EnvSpec::LowerBound { .. } => Some(self.k / 2),
            EnvSpec::FromFile { .. } => Some(self.cache.len()),
            _ => None,
        }
    }

    /// Costs for round `t ≥ 1`.
    pub fn next_costs(&mut self, t: usize) -> Result<CostVector> {
        if t == 0 {
            return Err(Error::Usage("rounds are numbered from 1".into()));
        }
        match &self.spec {
            EnvSpec::IidUniform { low, high } => {
                let mut rng = rng_from(derive_seed(self.seed, t as u64));
                let (low, high) = (*low, *high);
                CostVector::new((0..self.k).map(|_| low + (high - low) * rng.random::<f64>()).collect())
            }
            EnvSpec::Periodic { pattern } => CostVector::new(pattern[(t - 1) % pattern.len()].clone()),
            EnvSpec::LowerBound { h } => lower_bound_costs(self.k, *h, t),
            EnvSpec::FromFile { .. } => self.cache.get(t - 1).cloned().ok_or(Error::OutOfRounds { round: t }),
            EnvSpec::RandomWalk { sigma, start } => {
                let (sigma, start) = (*sigma, start.clone());
                while self.cache.len() < t {
                    let next = self.walk_step(sigma, start.as_deref())?;
                    self.cache.push(next);
                }
                Ok(self.cache[t - 1].clone())
            }
        }
    }

    fn walk_step(&mut self, sigma: f64, start: Option<&[f64]>) -> Result<CostVector> {
        let (k, cap) = (self.k, self.cap);
        let rng = self.walk_rng.get_or_insert_with(|| rng_from(self.seed));
        let next = match self.cache.last() {
            None => match start {
                Some(s) => s.to_vec(),
                None => (0..k).map(|_| cap * rng.random::<f64>()).collect(),
            },
            Some(prev) => {
                let step = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
                prev.as_slice().iter().map(|c| (c + step.sample(rng)).clamp(0.0, cap)).collect()
            }
        };
        CostVector::new(next)
    }
}

/// Costs `0` on arms `2t − 1` and `2t`, `h` on all others.
pub fn lower_bound_costs(k: usize, h: f64, t: usize) -> Result<CostVector> {
    if !k.is_multiple_of(2) {
        return Err(Error::OddK(k));
    }
    if t == 0 || t > k / 2 {
        return Err(Error::OutOfRounds { round: t });
    }
    CostVector::new((1..=k).map(|i| if i == 2 * t - 1 || i == 2 * t { 0.0 } else { h }).collect())
}

/// Values `1` on even arms and `0` on odd arms.
pub fn lower_bound_values(k: usize) -> Result<ValueVector> {
    if !k.is_multiple_of(2) {
        return Err(Error::OddK(k));
    }
    ValueVector::new((1..=k).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect())
}

/// Default cost cap, re-exported for configuration defaults.
pub const fn default_cap() -> f64 {
    DEFAULT_COST_CAP
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_rounds() {
        let mut env = CostProcess::new(EnvSpec::LowerBound { h: 2.0 }, 4, 2.0, 0).unwrap();
        assert_eq!(env.next_costs(1).unwrap().as_slice(), &[0.0, 0.0, 2.0, 2.0]);
        assert_eq!(env.next_costs(2).unwrap().as_slice(), &[2.0, 2.0, 0.0, 0.0]);
        assert_eq!(env.next_costs(3).unwrap_err(), Error::OutOfRounds { round: 3 });
        assert_eq!(env.horizon(), Some(2));
    }

    #[test]
    fn lower_bound_preconditions() {
        assert_eq!(CostProcess::new(EnvSpec::LowerBound { h: 2.0 }, 5, 2.0, 0).unwrap_err(), Error::OddK(5));
        assert!(CostProcess::new(EnvSpec::LowerBound { h: 1.0 }, 4, 2.0, 0).is_err());
        assert!(CostProcess::new(EnvSpec::LowerBound { h: 3.0 }, 4, 2.0, 0).is_err());
    }

    #[test]
    fn lower_bound_value_vectors() {
        assert_eq!(lower_bound_values(2).unwrap().as_slice(), &[0.0, 1.0]);
        assert_eq!(lower_bound_values(4).unwrap().as_slice(), &[0.0, 1.0, 0.0, 1.0]);
        let ten = lower_bound_values(10).unwrap();
        assert_eq!(ten.as_slice().iter().filter(|v| **v == 1.0).count(), 5);
        assert!(ten.as_slice().chunks(2).all(|p| p == [0.0, 1.0]));
        assert_eq!(lower_bound_values(3).unwrap_err(), Error::OddK(3));
    }

    #[test]
    fn periodic_with_period_one_is_constant() {
        let mut env = CostProcess::new(EnvSpec::Periodic { pattern: vec![vec![0.3, 0.7]] }, 2, 2.0, 0).unwrap();
        for t in 1..20 {
            assert_eq!(env.next_costs(t).unwrap().as_slice(), &[0.3, 0.7]);
        }
    }

    #[test]
    fn stochastic_kinds_are_seed_deterministic() {
        for spec in [EnvSpec::IidUniform { low: 0.0, high: 1.5 }, EnvSpec::RandomWalk { sigma: 0.05, start: None }] {
            let mut a = CostProcess::new(spec.clone(), 3, 2.0, 42).unwrap();
            let mut b = CostProcess::new(spec.clone(), 3, 2.0, 42).unwrap();
            let mut c = CostProcess::new(spec, 3, 2.0, 43).unwrap();
            let xs: Vec<_> = (1..50).map(|t| a.next_costs(t).unwrap()).collect();
            let ys: Vec<_> = (1..50).map(|t| b.next_costs(t).unwrap()).collect();
            assert_eq!(xs, ys);
            assert_ne!(xs[5], c.next_costs(6).unwrap());
            // out-of-order queries see the same sequence
            assert_eq!(a.next_costs(7).unwrap(), xs[6]);
        }
    }

    #[test]
    fn random_walk_stays_in_range_and_moves_slowly() {
        let mut env = CostProcess::new(EnvSpec::RandomWalk { sigma: 0.05, start: None }, 4, 2.0, 7).unwrap();
        let mut prev = env.next_costs(1).unwrap();
        for t in 2..2000 {
            let c = env.next_costs(t).unwrap();
            assert!(c.as_slice().iter().all(|x| (0.0..=2.0).contains(x)));
            assert!(c.as_slice().iter().zip(prev.as_slice()).all(|(a, b)| (a - b).abs() < 0.5));
            prev = c;
        }
    }
}

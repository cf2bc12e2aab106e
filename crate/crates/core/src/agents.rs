//! The observed agent. It sees the posted costs, plays an arm, and privately
//! draws a reward; the predictor never sees the reward.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::types::{argmax_utility, optimal_arm, ArmIndex, CostVector, ValueVector};

/// How rewards are drawn around the true values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardModel {
    /// `Bernoulli(v_i)`.
    #[default]
    Bernoulli,
    /// Always `v_i`.
    Deterministic,
}

impl RewardModel {
    pub fn draw(self, value: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            RewardModel::Bernoulli => f64::from(u8::from(rng.random::<f64>() < value)),
            RewardModel::Deterministic => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    /// Knows the true values and always plays the optimal arm.
    Omniscient,
    /// Explores uniformly with probability `epsilon`, otherwise plays the best empirical utility.
    EpsilonGreedy { epsilon: f64 },
    /// Plays `argmax [mean_i + √(exploration · ln t / n_i) − c_i]`.
    UcbCost {
        #[serde(default = "default_exploration")]
        exploration: f64,
    },
    /// Plays the best empirical utility with no exploration bonus.
    FollowLeader,
    /// Replays fixed one-based actions.
    Scripted { actions: Vec<usize> },
}

fn default_exploration() -> f64 {
    2.0
}

impl AgentSpec {
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            AgentSpec::EpsilonGreedy { epsilon } if !(0.0..=1.0).contains(epsilon) => {
                Err(Error::Config(format!("epsilon {epsilon} outside [0, 1]")))
            }
            AgentSpec::UcbCost { exploration } if !(*exploration > 0.0 && exploration.is_finite()) => {
                Err(Error::Config(format!("exploration coefficient {exploration} must be positive")))
            }
            AgentSpec::Scripted { actions } if actions.iter().any(|a| *a == 0 || *a > k) => {
                Err(Error::Config(format!("scripted actions must lie in 1..={k}")))
            }
            _ => Ok(()),
        }
    }
}

/// Mutable agent: empirical statistics, private values, and its own random stream.
#[derive(Debug, Clone)]
pub struct Agent {
    spec: AgentSpec,
    reward_model: RewardModel,
    true_values: ValueVector,
    pulls: Vec<u64>,
    means: Vec<f64>,
    round: usize,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(spec: AgentSpec, reward_model: RewardModel, true_values: ValueVector, seed: u64) -> Result<Self> {
        let k = true_values.len();
        spec.validate(k)?;
        Ok(Agent {
            spec,
            reward_model,
            true_values,
            pulls: vec![0; k],
            means: vec![0.0; k],
            round: 0,
            rng: rng_from(seed),
        })
    }

    pub fn k(&self) -> usize {
        self.true_values.len()
    }

    pub fn true_values(&self) -> &ValueVector {
        &self.true_values
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Chooses this round's arm.
    pub fn step(&mut self, c: &CostVector) -> Result<ArmIndex> {
        if c.len() != self.k() {
            return Err(Error::Usage(format!("cost vector has {} entries, expected {}", c.len(), self.k())));
        }
        self.round += 1;
        let untried = self.pulls.iter().position(|n| *n == 0);
        let arm = match &self.spec {
            AgentSpec::Omniscient => optimal_arm(&self.true_values, c)?,
            AgentSpec::Scripted { actions } => {
                let number = *actions.get(self.round - 1).ok_or(Error::ScriptExhausted { round: self.round })?;
                ArmIndex::from_number(number)?
            }
            AgentSpec::UcbCost { exploration } => match untried {
                Some(i) => ArmIndex::new(i),
                None => {
                    let log_t = (self.round as f64).ln();
                    let scores: Vec<f64> = self
                        .means
                        .iter()
                        .zip(&self.pulls)
                        .map(|(m, n)| m + (exploration * log_t / *n as f64).sqrt())
                        .collect();
                    ArmIndex::new(argmax_utility(&scores, c.as_slice()))
                }
            },
            AgentSpec::FollowLeader => match untried {
                Some(i) => ArmIndex::new(i),
                None => ArmIndex::new(argmax_utility(&self.means, c.as_slice())),
            },
            AgentSpec::EpsilonGreedy { epsilon } => {
                let epsilon = *epsilon;
                if self.rng.random::<f64>() < epsilon {
                    ArmIndex::new(self.rng.random_range(0..self.k()))
                } else {
                    match untried {
                        Some(i) => ArmIndex::new(i),
                        None => ArmIndex::new(argmax_utility(&self.means, c.as_slice())),
                    }
                }
            }
        };
        Ok(arm)
    }

    /// Privately draws the reward of `arm`.
    pub fn draw_reward(&mut self, arm: ArmIndex) -> f64 {
        let value = self.true_values.get(arm);
        self.reward_model.draw(value, &mut self.rng)
    }

    /// Folds one observed reward into arm `a`'s running mean.
    pub fn update(&mut self, a: ArmIndex, reward: f64) -> Result<()> {
        a.check(self.k())?;
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::Usage(format!("reward {reward} outside [0, 1]")));
        }
        let i = a.index();
        self.pulls[i] += 1;
        self.means[i] += (reward - self.means[i]) / self.pulls[i] as f64;
        Ok(())
    }
}

/// Per-round agent regret and its running sum, measured against true means.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    pub per_round: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// `ar_t = (v_o − c_o) − (v_a − c_a)` for each `(c^t, a_t)`.
pub fn realized_regret(v_star: &ValueVector, rounds: &[(CostVector, ArmIndex)]) -> Result<RegretTrace> {
    let mut trace = RegretTrace::default();
    let mut total = 0.0;
    for (c, a) in rounds {
        let o = optimal_arm(v_star, c)?;
        a.check(v_star.len())?;
        let ar = (v_star.get(o) - c.get(o)) - (v_star.get(*a) - c.get(*a));
        total += ar;
        trace.per_round.push(ar);
        trace.cumulative.push(total);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(c: &[f64]) -> CostVector {
        CostVector::new(c.to_vec()).unwrap()
    }

    fn vv(v: &[f64]) -> ValueVector {
        ValueVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn omniscient_plays_optimum() {
        let mut agent = Agent::new(AgentSpec::Omniscient, RewardModel::Bernoulli, vv(&[1.0, 0.0]), 1).unwrap();
        assert_eq!(agent.step(&cv(&[0.3, 0.1])).unwrap().number(), 1);
        let mut agent =
            Agent::new(AgentSpec::Omniscient, RewardModel::Bernoulli, vv(&[0.0, 1.0, 0.0, 1.0]), 1).unwrap();
        assert_eq!(agent.step(&cv(&[0.0, 0.0, 2.0, 2.0])).unwrap().number(), 2);
    }

    #[test]
    fn ucb_tries_untried_first() {
        let mut agent =
            Agent::new(AgentSpec::UcbCost { exploration: 2.0 }, RewardModel::Bernoulli, vv(&[0.2, 0.9]), 1).unwrap();
        assert_eq!(agent.step(&cv(&[0.5, 0.0])).unwrap().number(), 1);
    }

    #[test]
    fn update_running_mean() {
        let mut agent = Agent::new(AgentSpec::FollowLeader, RewardModel::Bernoulli, vv(&[0.2, 0.9]), 1).unwrap();
        agent.update(ArmIndex::new(1), 1.0).unwrap();
        assert_eq!((agent.means()[1], agent.pulls()[1]), (1.0, 1));
        agent.update(ArmIndex::new(1), 0.0).unwrap();
        assert_eq!((agent.means()[1], agent.pulls()[1]), (0.5, 2));
        assert_eq!((agent.means()[0], agent.pulls()[0]), (0.0, 0));
        assert!(agent.update(ArmIndex::new(0), 1.5).is_err());
    }

    #[test]
    fn scripted_exhausts() {
        let mut agent =
            Agent::new(AgentSpec::Scripted { actions: vec![2, 1] }, RewardModel::Deterministic, vv(&[0.5, 0.5]), 0)
                .unwrap();
        let c = cv(&[0.0, 0.0]);
        assert_eq!(agent.step(&c).unwrap().number(), 2);
        assert_eq!(agent.step(&c).unwrap().number(), 1);
        assert_eq!(agent.step(&c).unwrap_err(), Error::ScriptExhausted { round: 3 });
        assert!(AgentSpec::Scripted { actions: vec![3] }.validate(2).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(AgentSpec::EpsilonGreedy { epsilon: 1.5 }.validate(2).is_err());
        assert!(AgentSpec::UcbCost { exploration: 0.0 }.validate(2).is_err());
        assert!(AgentSpec::EpsilonGreedy { epsilon: 0.1 }.validate(2).is_ok());
    }

    #[test]
    fn regret_examples() {
        let v = vv(&[1.0, 0.0]);
        let tr = realized_regret(&v, &[(cv(&[0.3, 0.1]), ArmIndex::new(1))]).unwrap();
        assert!((tr.per_round[0] - 0.8).abs() < 1e-15);
        let tr =
            realized_regret(&v, &[(cv(&[0.3, 0.1]), ArmIndex::new(0)), (cv(&[0.9, 0.0]), ArmIndex::new(0))]).unwrap();
        assert_eq!(tr.cumulative.last().copied(), Some(0.0));
    }

    #[test]
    fn omniscient_has_zero_regret() {
        let v = vv(&[0.3, 0.8, 0.5]);
        let mut agent = Agent::new(AgentSpec::Omniscient, RewardModel::Bernoulli, v.clone(), 4).unwrap();
        let mut rng = rng_from(9);
        let mut rounds = Vec::new();
        for _ in 0..200 {
            let c = cv(&(0..3).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
            let a = agent.step(&c).unwrap();
            rounds.push((c, a));
        }
        let tr = realized_regret(&v, &rounds).unwrap();
        assert!(tr.per_round.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn ucb_regret_is_sublinear() {
        let (k, horizon, seeds) = (3, 2000, 20);
        let mut total = 0.0;
        for seed in 0..seeds {
            let mut rng = rng_from(1000 + seed);
            let v = ValueVector::new((0..k).map(|_| rng.random::<f64>()).collect()).unwrap();
            let mut agent =
                Agent::new(AgentSpec::UcbCost { exploration: 2.0 }, RewardModel::Bernoulli, v.clone(), seed).unwrap();
            let base: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 0.5).collect();
            let mut rounds = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                let c = cv(&base);
                let a = agent.step(&c).unwrap();
                let r = agent.draw_reward(a);
                agent.update(a, r).unwrap();
                rounds.push((c, a));
            }
            let tr = realized_regret(&v, &rounds).unwrap();
            assert!(tr.per_round.iter().all(|r| *r >= 0.0));
            total += tr.cumulative.last().unwrap() / horizon as f64;
        }
        let avg = total / seeds as f64;
        assert!(avg < 0.1, "average per-round regret {avg}");
    }
}

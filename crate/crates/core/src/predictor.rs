//! The observer: keeps the consistent set for the transcript seen so far,
//! estimates for each arm the probability that it is optimal under a uniform
//! draw from that set, and predicts the arm with the largest probability.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::consistent_set::{ConsistentSetView, DEFAULT_TOLERANCE, DEGENERATE_TOLERANCE};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::sampler::{hit_and_run_from, SampleSet, SamplerConfig};
use crate::types::{argmax_utility, ArmIndex, CostVector, RegretBudget, ValueVector};

/// Upper limit on budget doublings before an empty set is reported anyway.
const MAX_DOUBLINGS: usize = 64;

/// What to do when no value vector is consistent with the transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptySetPolicy {
    #[default]
    Abort,
    /// Double the budget (logging a warning) until the set is nonempty.
    DoubleBudget,
}

/// Per-arm probability of being optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    /// Samples behind the estimate; `None` for exact weights.
    pub n_effective: Option<usize>,
}

impl WeightVector {
    pub fn exact(weights: Vec<f64>) -> Self {
        WeightVector { weights, n_effective: None }
    }

    /// Width of the band below the maximum treated as a tie: `2/√n`, or 0 for exact weights.
    pub fn tie_window(&self) -> f64 {
        self.n_effective.map_or(0.0, |n| 2.0 / (n as f64).sqrt())
    }

    /// Lowest-index arm whose weight is within [`Self::tie_window`] of the maximum.
    pub fn argmax(&self) -> ArmIndex {
        let max = self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let window = self.tie_window();
        let best = self.weights.iter().position(|w| *w >= max - window).unwrap_or(0);
        ArmIndex::new(best)
    }
}

/// Fraction of samples for which each arm maximises `v_i − c_i` (ties to the lowest index).
pub fn weight_estimate(samples: &SampleSet, c: &CostVector) -> Result<WeightVector> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let k = c.len();
    let mut counts = vec![0usize; k];
    for p in &samples.points {
        if p.len() != k {
            return Err(Error::Usage("sample and cost dimensions differ".into()));
        }
        counts[argmax_utility(p.as_slice(), c.as_slice())] += 1;
    }
    let n = samples.len();
    Ok(WeightVector { weights: counts.iter().map(|c| *c as f64 / n as f64).collect(), n_effective: Some(n) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub budget: RegretBudget,
    pub sampler: SamplerConfig,
    pub tolerance: f64,
    pub degenerate_tolerance: f64,
    pub empty_set_policy: EmptySetPolicy,
    /// Master seed; each round's sampler seed is derived from it and the round index.
    pub seed: u64,
}

impl PredictorConfig {
    pub fn new(k: usize, budget: RegretBudget, seed: u64) -> Self {
        PredictorConfig {
            budget,
            sampler: SamplerConfig::for_dim(k, 0),
            tolerance: DEFAULT_TOLERANCE,
            degenerate_tolerance: DEGENERATE_TOLERANCE,
            empty_set_policy: EmptySetPolicy::Abort,
            seed,
        }
    }
}

/// Result of one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub arm: ArmIndex,
    pub weights: WeightVector,
    /// True when the set was empty this round and the budget had to be relaxed.
    pub relaxed_budget: bool,
    /// True when the body was numerically lower dimensional this round.
    pub degenerate: bool,
}

/// Observer state across rounds.
#[derive(Debug, Clone)]
pub struct PredictorState {
    view: ConsistentSetView,
    warm: Vec<ValueVector>,
    cfg: PredictorConfig,
    round: usize,
}

impl PredictorState {
    pub fn new(k: usize, cfg: PredictorConfig) -> Result<Self> {
        cfg.sampler.validate()?;
        let view = ConsistentSetView::new(crate::types::History::new(k)?, cfg.budget.clone(), cfg.tolerance)?;
        Ok(PredictorState { view, warm: Vec::new(), cfg, round: 1 })
    }

    pub fn view(&self) -> &ConsistentSetView {
        &self.view
    }

    /// Samples kept from the last prediction that are still consistent.
    pub fn warm_samples(&self) -> &[ValueVector] {
        &self.warm
    }

    /// Index of the round about to be predicted.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.cfg
    }

    /// Sampler seed for round `t`.
    pub fn round_seed(&self, t: usize) -> u64 {
        derive_seed(self.cfg.seed, t as u64)
    }

    /// Predicts this round's arm from the transcript so far and the posted costs.
    pub fn predict(&mut self, c: &CostVector) -> Result<Prediction> {
        if c.len() != self.view.k() {
            return Err(Error::Usage(format!("cost vector has {} entries, expected {}", c.len(), self.view.k())));
        }
        let seed = self.round_seed(self.round);
        let mut doublings = 0;
        let start = loop {
            match self.starting_points(seed) {
                Ok(starts) => break starts,
                Err(Error::EmptySet { round })
                    if self.cfg.empty_set_policy == EmptySetPolicy::DoubleBudget && doublings < MAX_DOUBLINGS =>
                {
                    let doubled = self.view.budget().doubled();
                    warn!("round {round}: consistent set empty, relaxing budget to {doubled:?}");
                    self.view = self.view.with_budget(doubled)?;
                    doublings += 1;
                }
                Err(err) => return Err(err),
            }
        };
        let relaxed_budget = doublings > 0;
        let (samples, degenerate) = self.sample(&start, seed)?;
        let weights = weight_estimate(&samples, c)?;
        self.warm = samples.points;
        Ok(Prediction { arm: weights.argmax(), weights, relaxed_budget, degenerate })
    }

    fn starting_points(&self, seed: u64) -> Result<Vec<ValueVector>> {
        let n = self.cfg.sampler.n_chains;
        if !self.warm.is_empty() {
            // spread chain starts across the surviving samples
            return Ok((0..n).map(|c| self.warm[c * self.warm.len() / n].clone()).collect());
        }
        let point = self.view.find_interior_point(&[], derive_seed(seed, stream::INTERIOR))?;
        Ok(vec![point])
    }

    fn sample(&mut self, starts: &[ValueVector], seed: u64) -> Result<(SampleSet, bool)> {
        let cfg = self.cfg.sampler.with_seed(seed);
        match hit_and_run_from(&self.view, starts, &cfg) {
            Ok(samples) => Ok((samples, false)),
            Err(Error::Degenerate { .. }) => {
                let loose = self.view.with_tolerance(self.cfg.degenerate_tolerance.max(self.view.tolerance()))?;
                let result = hit_and_run_from(&loose, starts, &cfg);
                self.view = loose;
                match result {
                    Ok(samples) => Ok((samples, true)),
                    Err(Error::Degenerate { .. }) => {
                        let point = self.view.find_interior_point(starts, derive_seed(seed, stream::INTERIOR))?;
                        Ok((SampleSet::point_mass(point, cfg.n_samples), true))
                    }
                    Err(err) => Err(err),
                }
            }
            Err(err) => Err(err),
        }
    }

    /// Records the agent's action for the round just predicted.
    pub fn observe(&mut self, c: &CostVector, a: ArmIndex) -> Result<()> {
        self.view.push_round(c.clone(), a)?;
        let view = &self.view;
        self.warm.retain(|p| view.contains(p));
        self.round += 1;
        Ok(())
    }
}

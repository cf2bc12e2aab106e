//! Self-checks behind the `validate` subcommand.
//!
//! Each scenario runner returns raw statistics so that callers can apply
//! their own thresholds; [`run_suite`] applies the documented ones.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::agents::AgentSpec;
use crate::config::{ExperimentConfig, TruthSpec};
use crate::consistent_set::ConsistentSetView;
use crate::diagnostics::{extreme_difference_k2, lemma1_margin};
use crate::environments::EnvSpec;
use crate::error::{Error, Result};
use crate::exact_k2;
use crate::experiment::{run_experiment, RunOutcome};
use crate::metrics::{lambda, theorem1_bound, theorem2_bound};
use crate::predictor::{PredictorConfig, PredictorState};
use crate::rng::{derive_seed, rng_from};
use crate::sampler::{grid_oracle, hit_and_run, SampleSet, SamplerConfig};
use crate::types::{optimal_arm, ArmIndex, CostVector, History, RegretBudget, ValueVector};

/// χ² critical values at significance 0.001, indexed by degrees of freedom.
const CHI2_999: [(usize, f64); 4] = [(1, 10.828), (3, 16.266), (7, 24.322), (15, 37.697)];

pub fn chi2_critical_999(df: usize) -> Option<f64> {
    CHI2_999.iter().find(|(d, _)| *d == df).map(|(_, v)| *v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Core,
    ConsistentSet,
    Sampler,
    Predictor,
    Lemma1,
    LowerBound,
    Metrics,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Core,
        Suite::ConsistentSet,
        Suite::Sampler,
        Suite::Predictor,
        Suite::Lemma1,
        Suite::LowerBound,
        Suite::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Core => "core",
            Suite::ConsistentSet => "consistent_set",
            Suite::Sampler => "sampler",
            Suite::Predictor => "predictor",
            Suite::Lemma1 => "lemma1",
            Suite::LowerBound => "lower_bound",
            Suite::Metrics => "metrics",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

// ---- scenario builders ----

/// Transcript of an omniscient agent with uniform private values facing
/// independent uniform costs in `[0, 1]`.
pub fn random_transcript(k: usize, rounds: usize, seed: u64) -> Result<(History, ValueVector)> {
    let mut rng = rng_from(seed);
    let v = ValueVector::new((0..k).map(|_| rng.random::<f64>()).collect())?;
    let mut h = History::new(k)?;
    for _ in 0..rounds {
        let c = CostVector::new((0..k).map(|_| rng.random::<f64>()).collect())?;
        let a = optimal_arm(&v, &c)?;
        h.push(c, a)?;
    }
    Ok((h, v))
}

/// Transcript of an agent that plays the optimal arm except with probability
/// `slip`, when it plays a uniform arm instead.
pub fn noisy_transcript(k: usize, rounds: usize, slip: f64, seed: u64) -> Result<History> {
    let mut rng = rng_from(seed);
    let v = ValueVector::new((0..k).map(|_| rng.random::<f64>()).collect())?;
    let mut h = History::new(k)?;
    for _ in 0..rounds {
        let c = CostVector::new((0..k).map(|_| rng.random::<f64>()).collect())?;
        let a = if rng.random::<f64>() < slip { ArmIndex::new(rng.random_range(0..k)) } else { optimal_arm(&v, &c)? };
        h.push(c, a)?;
    }
    Ok(h)
}

fn orthant(v: &[f64]) -> usize {
    v.iter().enumerate().map(|(i, x)| usize::from(*x >= 0.5) << i).sum()
}

fn orthant_profile(samples: &SampleSet, k: usize) -> Vec<f64> {
    let mut mass = vec![0.0; 1 << k];
    for p in &samples.points {
        mass[orthant(p.as_slice())] += 1.0;
    }
    let n = samples.len().max(1) as f64;
    mass.iter_mut().for_each(|m| *m /= n);
    mass
}

// ---- scenario runners ----

/// The adversarial construction with `k` arms, cost `h` off the zero-cost pair, and an omniscient agent.
pub fn lower_bound_run(k: usize, h: f64, seed: u64, thin: Option<usize>) -> Result<RunOutcome> {
    let mut cfg = ExperimentConfig::new(k, k / 2, seed, AgentSpec::Omniscient, EnvSpec::LowerBound { h });
    cfg.truth = TruthSpec::LowerBound;
    cfg.sampler.thin = thin;
    run_experiment(&cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaSweep {
    pub scenarios: usize,
    pub rounds: usize,
    pub mismatches: usize,
    pub violations: usize,
    /// Smallest margin seen on a mismatch round.
    pub min_margin: f64,
}

/// Two-arm scenarios predicted with exact weights; every mismatch round is
/// checked against the shrinkage inequality with zero tolerance.
pub fn lemma1_exact_sweep(scenarios: usize, rounds: usize, seed: u64) -> Result<LemmaSweep> {
    let mut sweep = LemmaSweep { scenarios, rounds: 0, mismatches: 0, violations: 0, min_margin: f64::INFINITY };
    for s in 0..scenarios {
        let mut rng = rng_from(derive_seed(seed, s as u64));
        let v = ValueVector::new(vec![rng.random(), rng.random()])?;
        let mut view = ConsistentSetView::empty(2, RegretBudget::Zero)?;
        for _ in 0..rounds {
            let c = CostVector::new(vec![rng.random(), rng.random()])?;
            let interval = exact_k2::difference_interval(view.history(), view.budget())?
                .ok_or(Error::EmptySet { round: view.len() + 1 })?;
            let p = exact_k2::weights(interval, &c)?.argmax();
            let a = optimal_arm(&v, &c)?;
            sweep.rounds += 1;
            if a != p {
                sweep.mismatches += 1;
                let diff = extreme_difference_k2(&view, a, p)?;
                let outcome = lemma1_margin(2, &c, &diff, 0.0);
                sweep.min_margin = sweep.min_margin.min(outcome.margin);
                if !outcome.holds {
                    sweep.violations += 1;
                }
            }
            view.push_round(c, a)?;
        }
    }
    Ok(sweep)
}

fn sampler_cfg(k: usize, n: usize, seed: u64, thin: Option<usize>) -> SamplerConfig {
    let mut cfg = SamplerConfig::for_dim(k, seed);
    cfg.n_samples = n;
    if let Some(thin) = thin {
        cfg.thin = thin;
    }
    cfg
}

/// Fraction of hit-and-run samples from `{v_1 − v_2 ≥ 0.4}` with `v_1 − v_2 ≥ 0.5`; exactly 25/36 in the limit.
pub fn strip_tail_fraction(n: usize, seed: u64) -> Result<f64> {
    let mut view = ConsistentSetView::empty(2, RegretBudget::Zero)?;
    view.push_round(CostVector::new(vec![0.5, 0.1])?, ArmIndex::new(0))?;
    let start = ValueVector::new(vec![0.9, 0.2])?;
    let samples = hit_and_run(&view, &start, &sampler_cfg(2, n, seed, None))?;
    let tail = samples.points.iter().filter(|p| p.as_slice()[0] - p.as_slice()[1] >= 0.5).count();
    Ok(tail as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub critical: f64,
}

/// Pearson χ² of hit-and-run orthant counts on the unit box against the uniform profile.
pub fn box_orthant_chi2(k: usize, n: usize, seed: u64, thin: Option<usize>) -> Result<ChiSquare> {
    let cells = 1usize << k;
    let critical = chi2_critical_999(cells - 1)
        .ok_or_else(|| Error::Usage(format!("no tabulated χ² critical value for k = {k}")))?;
    let view = ConsistentSetView::empty(k, RegretBudget::Zero)?;
    let samples = hit_and_run(&view, &ValueVector::center(k), &sampler_cfg(k, n, seed, thin))?;
    let expected = samples.len() as f64 / cells as f64;
    let statistic = orthant_profile(&samples, k)
        .iter()
        .map(|m| {
            let observed = m * samples.len() as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    Ok(ChiSquare { statistic, critical })
}

/// Largest L∞ gap between hit-and-run and grid orthant profiles over random transcripts.
///
/// Even-numbered transcripts use a zero budget; odd ones use a constant budget
/// of 0.1 and an agent that slips 20% of the time.
pub fn grid_orthant_agreement(k: usize, transcripts: usize, n: usize, resolution: usize, seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in 0..transcripts {
        let tseed = derive_seed(seed, s as u64);
        let rounds = 1 + s % 6;
        let (history, budget) = if s % 2 == 0 {
            (random_transcript(k, rounds, tseed)?.0, RegretBudget::Zero)
        } else {
            (noisy_transcript(k, rounds, 0.2, tseed)?, RegretBudget::Constant { coefficient: 0.1 })
        };
        let view = ConsistentSetView::new(history, budget, crate::consistent_set::DEFAULT_TOLERANCE)?;
        let grid = grid_oracle(&view, resolution)?;
        if grid.is_empty() {
            continue;
        }
        let start = view.find_interior_point(&[], tseed)?;
        let samples = hit_and_run(&view, &start, &sampler_cfg(k, n, tseed, None))?;
        let (a, b) = (orthant_profile(&samples, k), orthant_profile(&grid, k));
        let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    Ok(worst)
}

fn mixed_view(k: usize, rounds: usize, seed: u64) -> Result<ConsistentSetView> {
    let (history, budget) = match seed % 3 {
        0 => (random_transcript(k, rounds, seed)?.0, RegretBudget::Zero),
        1 => (noisy_transcript(k, rounds, 0.3, seed)?, RegretBudget::Constant { coefficient: 0.2 }),
        _ => (noisy_transcript(k, rounds, 0.3, seed)?, RegretBudget::Log { coefficient: 0.1 }),
    };
    ConsistentSetView::new(history, budget, crate::consistent_set::DEFAULT_TOLERANCE)
}

/// Counts midpoints of member pairs that fall outside the set.
pub fn convexity_violations(midpoints: usize, seed: u64) -> Result<usize> {
    let mut rng = rng_from(seed);
    let mut checked = 0;
    let mut violations = 0;
    let mut view_index = 0u64;
    while checked < midpoints {
        view_index += 1;
        let view = match mixed_view(3, 2 + (view_index % 5) as usize, derive_seed(seed, view_index)) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let Ok(start) = view.find_interior_point(&[], view_index) else { continue };
        let samples = hit_and_run(&view, &start, &sampler_cfg(3, 200, view_index, None))?;
        for _ in 0..100.min(midpoints - checked) {
            let x = &samples.points[rng.random_range(0..samples.len())];
            let y = &samples.points[rng.random_range(0..samples.len())];
            let mid: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| 0.5 * (a + b)).collect();
            if !view.contains_slice(&mid) {
                violations += 1;
            }
            checked += 1;
        }
    }
    Ok(violations)
}

/// Counts (point, round) pairs where a point leaves the set and later re-enters it.
pub fn shrinkage_violations(transcripts: usize, points: usize, rounds: usize, seed: u64) -> Result<usize> {
    let mut violations = 0;
    for s in 0..transcripts {
        let tseed = derive_seed(seed, s as u64);
        let full = mixed_view(3, rounds, tseed)?;
        let mut prefix = ConsistentSetView::empty(3, full.budget().clone())?;
        let mut views = vec![prefix.clone()];
        for r in full.history().rounds() {
            prefix.push_round(r.costs.clone(), r.action)?;
            views.push(prefix.clone());
        }
        let mut rng = rng_from(tseed);
        for _ in 0..points {
            let v: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let member: Vec<bool> = views.iter().map(|view| view.contains_slice(&v)).collect();
            violations += member.windows(2).filter(|w| w[1] && !w[0]).count();
        }
    }
    Ok(violations)
}

/// Rounds at which the true values drop out of the set built from the transcript.
pub fn truth_violations(transcript: &History, v_star: &ValueVector, budget: &RegretBudget) -> Result<usize> {
    let mut view = ConsistentSetView::empty(transcript.k(), budget.clone())?;
    let mut violations = usize::from(!view.contains(v_star));
    for r in transcript.rounds() {
        view.push_round(r.costs.clone(), r.action)?;
        violations += usize::from(!view.contains(v_star));
    }
    Ok(violations)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightAgreement {
    pub rounds: usize,
    pub max_error: f64,
}

/// Largest gap between sampled and closed-form two-arm weights.
///
/// Scenarios alternate between a zero budget and a constant budget of 0.2.
pub fn k2_weight_agreement(scenarios: usize, rounds: usize, n: usize, seed: u64) -> Result<WeightAgreement> {
    let mut out = WeightAgreement { rounds: 0, max_error: 0.0 };
    for s in 0..scenarios {
        let sseed = derive_seed(seed, s as u64);
        let budget = if s % 2 == 0 { RegretBudget::Zero } else { RegretBudget::Constant { coefficient: 0.2 } };
        let mut cfg = PredictorConfig::new(2, budget.clone(), sseed);
        cfg.sampler.n_samples = n;
        let mut predictor = PredictorState::new(2, cfg)?;
        let mut rng = rng_from(sseed);
        let v = ValueVector::new(vec![rng.random(), rng.random()])?;
        for _ in 0..rounds {
            let c = CostVector::new(vec![rng.random(), rng.random()])?;
            let sampled = predictor.predict(&c)?;
            let interval = exact_k2::difference_interval(predictor.view().history(), &budget)?
                .ok_or(Error::EmptySet { round: predictor.round() })?;
            let exact = exact_k2::weights(interval, &c)?;
            out.max_error = out.max_error.max((sampled.weights.weights[0] - exact.weights[0]).abs());
            out.rounds += 1;
            predictor.observe(&c, optimal_arm(&v, &c)?)?;
        }
    }
    Ok(out)
}

// ---- suites ----

fn check(suite: Suite, name: &str, passed: bool, detail: String) -> Check {
    Check { suite: suite.name().to_owned(), name: name.to_owned(), passed, detail }
}

fn check_result<T>(suite: Suite, name: &str, r: Result<T>, judge: impl FnOnce(&T) -> (bool, String)) -> Check {
    match r {
        Ok(v) => {
            let (passed, detail) = judge(&v);
            check(suite, name, passed, detail)
        }
        Err(e) => check(suite, name, false, format!("error: {e}")),
    }
}

/// Runs one suite (or all of them) and reports each check.
pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    if suite == Suite::All {
        return Suite::EACH.iter().flat_map(|s| run_suite(*s, seed)).collect();
    }
    let mut out = Vec::new();
    match suite {
        Suite::Core => {
            let v = ValueVector::new(vec![1.0, 0.0]).expect("valid values");
            let c = CostVector::new(vec![0.3, 0.1]).expect("valid costs");
            let arm = optimal_arm(&v, &c).map(|a| a.number());
            out.push(check(suite, "optimal_arm example", arm == Ok(1), format!("{arm:?}")));
            let tie = ValueVector::new(vec![0.5, 0.5])
                .and_then(|v| optimal_arm(&v, &CostVector::new(vec![0.2, 0.2])?))
                .map(|a| a.number());
            out.push(check(suite, "lowest-index tie", tie == Ok(1), format!("{tie:?}")));
            let envelope = RegretBudget::Envelope { coefficient: 1.0, arms: 3 };
            let monotone = (0..500).all(|t| envelope.eval(t + 1) >= envelope.eval(t));
            out.push(check(suite, "budget monotone", monotone, "envelope budget over 500 rounds".into()));
        }
        Suite::ConsistentSet => {
            out.push(check_result(suite, "convexity", convexity_violations(1000, seed), |v| {
                (*v == 0, format!("{v} violations over 1000 midpoints"))
            }));
            out.push(check_result(suite, "monotone shrinkage", shrinkage_violations(50, 1000, 8, seed), |v| {
                (*v == 0, format!("{v} violations over 50 transcripts x 1000 points"))
            }));
            let truth = (0..20u64)
                .map(|s| {
                    let (h, v) = random_transcript(3, 200, derive_seed(seed, s))?;
                    truth_violations(&h, &v, &RegretBudget::Zero)
                })
                .sum::<Result<usize>>();
            out.push(check_result(suite, "true values stay consistent", truth, |v| {
                (*v == 0, format!("{v} violations over 20 omniscient transcripts"))
            }));
        }
        Suite::Sampler => {
            out.push(check_result(suite, "strip tail mass", strip_tail_fraction(20_000, seed), |f| {
                ((f - 25.0 / 36.0).abs() <= 0.03, format!("{f:.4} vs 25/36 = 0.6944"))
            }));
            for k in [2, 3] {
                out.push(check_result(
                    suite,
                    &format!("box orthant chi2 k={k}"),
                    box_orthant_chi2(k, 20_000, seed, None),
                    |x| (x.statistic <= x.critical, format!("chi2 {:.2} vs critical {:.2}", x.statistic, x.critical)),
                ));
                let res = if k == 2 { 200 } else { 40 };
                out.push(check_result(
                    suite,
                    &format!("grid agreement k={k}"),
                    grid_orthant_agreement(k, 20, 20_000, res, seed),
                    |g| (*g <= 0.05, format!("max L-inf orthant gap {g:.4}")),
                ));
            }
        }
        Suite::Predictor => {
            out.push(check_result(suite, "two-arm weights", k2_weight_agreement(50, 10, 10_000, seed), |w| {
                (w.max_error <= 0.03, format!("max |w - exact| = {:.4} over {} rounds", w.max_error, w.rounds))
            }));
        }
        Suite::Lemma1 => {
            out.push(check_result(suite, "exact two-arm sweep", lemma1_exact_sweep(50, 200, seed), |s| {
                (
                    s.violations == 0,
                    format!(
                        "{} violations over {} mismatch rounds, min margin {:.4}",
                        s.violations, s.mismatches, s.min_margin
                    ),
                )
            }));
        }
        Suite::LowerBound => {
            out.push(check_result(suite, "k=10 construction", lower_bound_run(10, 2.0, seed, Some(100)), |o| {
                let s = o.summary.sum_pr;
                (s == 5.0 && s >= 2.5, format!("sum pr = {s} (lower bound k/4 = 2.5)"))
            }));
        }
        Suite::Metrics => {
            let l = lambda(2);
            out.push(check(suite, "lambda(2)", (l - 504.2189).abs() < 1e-3, format!("{l:.4}")));
            let b = theorem1_bound(2, 0.0, 1);
            out.push(check(suite, "envelope at T=1", (b - 4.0 * l).abs() < 1e-9, format!("{b:.3}")));
            let m = theorem2_bound(2, 0.0, 100, 0.1);
            out.push(check_result(suite, "mistake bound example", m, |m| {
                ((m - 736.827).abs() < 1e-3, format!("{m:.3}"))
            }));
        }
        Suite::All => unreachable!("handled above"),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH.into_iter().chain([Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn chi2_table() {
        assert_eq!(chi2_critical_999(3), Some(16.266));
        assert_eq!(chi2_critical_999(4), None);
    }

    #[test]
    fn quick_suites_pass() {
        for suite in [Suite::Core, Suite::Metrics, Suite::LowerBound] {
            for c in run_suite(suite, 0) {
                assert!(c.passed, "{c:?}");
            }
        }
    }

    #[test]
    fn small_property_runs_are_clean() {
        assert_eq!(convexity_violations(200, 1).unwrap(), 0);
        assert_eq!(shrinkage_violations(5, 200, 6, 1).unwrap(), 0);
        let sweep = lemma1_exact_sweep(5, 100, 2).unwrap();
        assert_eq!(sweep.violations, 0);
        assert!(sweep.mismatches > 0);
    }
}

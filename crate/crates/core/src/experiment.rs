//! The interaction loop and the drivers built on it.
//!
//! Each round the environment posts costs, the predictor commits to an arm,
//! the agent plays and privately draws its reward, and only then does the
//! predictor see the agent's action. The ordering is fixed by [`run_loop`]:
//! a predictor's `predict` is handed nothing but the costs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::config::ExperimentConfig;
use crate::diagnostics::lemma1_check;
use crate::environments::CostProcess;
use crate::error::{Error, Result};
use crate::io::{self, PredictionRow};
use crate::metrics::{RoundLog, RunSummary};
use crate::predictor::{EmptySetPolicy, Prediction, PredictorConfig, PredictorState};
use crate::rng::{derive_seed, stream};
use crate::types::{ArmIndex, CostVector, History, RegretBudget, ValueVector};

/// Something that names an arm before seeing the agent's choice.
pub trait RoundPredictor {
    fn predict(&mut self, c: &CostVector) -> Result<Prediction>;
    fn observe(&mut self, c: &CostVector, a: ArmIndex) -> Result<()>;
    /// Mismatch-lemma margin for the set as it stood when `p` was predicted.
    fn lemma1_margin(&self, _c: &CostVector, _a: ArmIndex, _p: ArmIndex, _tolerance: f64) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// Something that plays arms and learns from its own rewards.
pub trait Policy {
    fn act(&mut self, c: &CostVector) -> Result<ArmIndex>;
    /// Privately draws and absorbs the reward of the arm just played.
    fn absorb_reward(&mut self, a: ArmIndex) -> Result<()>;
}

impl RoundPredictor for PredictorState {
    fn predict(&mut self, c: &CostVector) -> Result<Prediction> {
        PredictorState::predict(self, c)
    }

    fn observe(&mut self, c: &CostVector, a: ArmIndex) -> Result<()> {
        PredictorState::observe(self, c, a)
    }

    fn lemma1_margin(&self, c: &CostVector, a: ArmIndex, p: ArmIndex, tolerance: f64) -> Result<Option<f64>> {
        Ok(Some(lemma1_check(self.view(), c, a, p, tolerance)?.margin))
    }
}

impl Policy for Agent {
    fn act(&mut self, c: &CostVector) -> Result<ArmIndex> {
        self.step(c)
    }

    fn absorb_reward(&mut self, a: ArmIndex) -> Result<()> {
        let reward = self.draw_reward(a);
        self.update(a, reward)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoopOptions {
    pub emit_weights: bool,
    pub emit_diagnostics: bool,
    pub lemma_tolerance: f64,
}

/// Runs `rounds` rounds and returns the logs and the public transcript.
pub fn run_loop<P, A, C>(
    k: usize,
    rounds: usize,
    mut costs: C,
    predictor: &mut P,
    agent: &mut A,
    v_star: &ValueVector,
    opts: LoopOptions,
) -> Result<(Vec<RoundLog>, History)>
where
    P: RoundPredictor + ?Sized,
    A: Policy + ?Sized,
    C: FnMut(usize) -> Result<CostVector>,
{
    let mut logs: Vec<RoundLog> = Vec::with_capacity(rounds);
    let mut transcript = History::new(k)?;
    for t in 1..=rounds {
        let c = costs(t)?;
        let prediction = predictor.predict(&c)?;
        let a = agent.act(&c)?;
        agent.absorb_reward(a)?;
        let p = prediction.arm;
        let mut log = RoundLog::new(t, c.clone(), a, p, v_star, logs.last())?;
        log.cv_empty = prediction.relaxed_budget;
        if opts.emit_weights {
            log.weights = Some(prediction.weights.weights);
        }
        if opts.emit_diagnostics && a != p {
            log.lemma1_margin = predictor.lemma1_margin(&c, a, p, opts.lemma_tolerance)?;
        }
        predictor.observe(&c, a)?;
        transcript.push(c, a)?;
        logs.push(log);
    }
    Ok((logs, transcript))
}

/// Seed of the predictor stream for a master seed; replay uses the same one.
pub fn predictor_seed(master: u64) -> u64 {
    derive_seed(master, stream::PREDICTOR)
}

/// Predictor settings implied by an experiment config.
pub fn predictor_config(cfg: &ExperimentConfig) -> PredictorConfig {
    let mut pc = PredictorConfig::new(cfg.k, cfg.budget.clone(), predictor_seed(cfg.seed));
    pc.sampler = cfg.sampler.resolve(cfg.k);
    pc.empty_set_policy = cfg.flags.empty_set_policy;
    pc
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub logs: Vec<RoundLog>,
    pub transcript: History,
    pub v_star: ValueVector,
    pub summary: RunSummary,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let k = cfg.k;
    let v_star = cfg.truth.resolve(k, cfg.seed)?;
    let mut env = CostProcess::new(cfg.env.clone(), k, cfg.c_max, derive_seed(cfg.seed, stream::ENVIRONMENT))?;
    let mut agent = Agent::new(cfg.agent.clone(), cfg.reward, v_star.clone(), derive_seed(cfg.seed, stream::AGENT))?;
    let mut predictor = PredictorState::new(k, predictor_config(cfg))?;
    let opts = LoopOptions {
        emit_weights: cfg.flags.emit_weights,
        emit_diagnostics: cfg.flags.emit_diagnostics,
        lemma_tolerance: cfg.flags.lemma_tolerance,
    };
    let (logs, transcript) = run_loop(k, cfg.rounds, |t| env.next_costs(t), &mut predictor, &mut agent, &v_star, opts)?;
    let mut summary = RunSummary::from_logs(&logs, k, cfg.seed, &v_star, cfg.budget.eval(cfg.rounds), cfg.gap)?;
    summary.runtime_secs = started.elapsed().as_secs_f64();
    Ok(RunOutcome { logs, transcript, v_star, summary })
}

/// Writes whichever outputs the config names.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    if let Some(path) = &cfg.output.run_log {
        io::save_run_log(path, cfg.k, &outcome.logs, cfg.flags.emit_weights)?;
    }
    if let Some(path) = &cfg.output.transcript {
        io::save_transcript(path, &outcome.transcript)?;
    }
    if let Some(path) = &cfg.output.summary {
        write_json(path, &outcome.summary)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub rows: Vec<PredictionRow>,
    pub mismatches: usize,
}

/// Predicts every round of a logged transcript, consuming each action only
/// after its prediction is made.
pub fn replay(transcript: &History, cfg: PredictorConfig) -> Result<ReplayOutcome> {
    let mut predictor = PredictorState::new(transcript.k(), cfg)?;
    let mut rows = Vec::with_capacity(transcript.len());
    for round in transcript.rounds() {
        let prediction = predictor.predict(&round.costs)?;
        rows.push(PredictionRow {
            t: round.t,
            p: prediction.arm,
            weights: prediction.weights.weights,
            a: round.action,
        });
        predictor.observe(&round.costs, round.action)?;
    }
    let mismatches = rows.iter().filter(|r| r.p != r.a).count();
    Ok(ReplayOutcome { rows, mismatches })
}

/// Predictor settings for replaying a transcript with `k` arms outside any experiment.
pub fn replay_config(k: usize, budget: RegretBudget, master_seed: u64, policy: EmptySetPolicy) -> PredictorConfig {
    let mut pc = PredictorConfig::new(k, budget, predictor_seed(master_seed));
    pc.empty_set_policy = policy;
    pc
}

/// Aggregate of a multi-seed bench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runs: Vec<RunSummary>,
    pub failures: Vec<(u64, String)>,
    /// Runs whose Σpr stayed under the regret envelope.
    pub within_theorem1: usize,
    /// Runs whose gap-restricted mistake count stayed under the mistake bound.
    pub within_theorem2: usize,
    pub mean_sum_pr: f64,
    pub mean_mismatches: f64,
}

/// Runs `cfg` once per seed in parallel. Outputs named in `cfg` are redirected
/// to `out_dir/seed-<s>/` so runs never share files.
pub fn bench(cfg: &ExperimentConfig, seeds: &[u64], out_dir: Option<&Path>) -> BenchReport {
    let results: Vec<(u64, Result<RunSummary>)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = seed;
            let dir = out_dir.map(|d| d.join(format!("seed-{seed}")));
            let redirect = |p: &Option<PathBuf>, default: &str| {
                dir.as_ref().map(|d| d.join(p.as_ref().and_then(|p| p.file_name()).unwrap_or(default.as_ref())))
            };
            run_cfg.output.run_log = redirect(&cfg.output.run_log, "run.csv");
            run_cfg.output.summary = redirect(&cfg.output.summary, "summary.json");
            run_cfg.output.transcript = redirect(&cfg.output.transcript, "transcript.csv");
            let result = run_experiment(&run_cfg).and_then(|out| {
                write_outputs(&run_cfg, &out)?;
                Ok(out.summary)
            });
            (seed, result)
        })
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(s) => runs.push(s),
            Err(e) => failures.push((seed, e.to_string())),
        }
    }
    let n = runs.len().max(1) as f64;
    BenchReport {
        within_theorem1: runs.iter().filter(|s| s.sum_pr <= s.theorem1_bound).count(),
        within_theorem2: runs.iter().filter(|s| s.mistakes.total() as f64 <= s.theorem2_bound).count(),
        mean_sum_pr: runs.iter().map(|s| s.sum_pr).sum::<f64>() / n,
        mean_mismatches: runs.iter().map(|s| s.mismatches as f64).sum::<f64>() / n,
        runs,
        failures,
    }
}

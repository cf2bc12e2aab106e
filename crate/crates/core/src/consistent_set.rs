//! The set of value vectors consistent with the public transcript.
//!
//! A value vector `v ∈ [0,1]^k` is consistent with rounds `1..t-1` when some
//! per-round regrets `r_ℓ` satisfy
//!
//! ```text
//! v_{a_ℓ} − c^ℓ_{a_ℓ} ≥ v_i − c^ℓ_i − r_ℓ      for every ℓ and every arm i
//! Σ_{j ≤ ℓ} r_j ≤ f(ℓ)                         for every ℓ
//! ```
//!
//! For fixed `v` each `r_ℓ` appears with coefficient `+1` in every prefix sum,
//! so the smallest admissible choice `s_ℓ(v) = max_i [(v_i − c_i) − (v_a − c_a)]`
//! is optimal for all prefixes at once. Membership therefore reduces to the
//! prefix sums of `s_ℓ(v)` staying under the budget, an `O(t·k)` test on a
//! fixed `k`-dimensional convex body.
//!
//! Two exact compressions keep the test cheap on long transcripts:
//!
//! * a round whose every competing arm costs at least one more than the played
//!   arm has `s_ℓ ≡ 0` on the box and is skipped;
//! * while the budget is identically zero every `r_ℓ` is forced to zero, so the
//!   body is the intersection of the pairwise half-spaces
//!   `v_a − v_i ≥ max_ℓ (c^ℓ_a − c^ℓ_i)`, one per ordered arm pair. The
//!   tolerance is then applied per half-space rather than to the summed slack.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::sampler::{self, MembershipOracle};
use crate::types::{ArmIndex, CostVector, History, RegretBudget, ValueVector};

/// Default constraint slack.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Slack used once the body turns out to be numerically lower dimensional.
pub const DEGENERATE_TOLERANCE: f64 = 1e-6;

const INTERIOR_MAX_ITERS: usize = 4000;
const INTERIOR_RANDOM_STARTS: usize = 16;
const CENTERING_SWEEPS: usize = 4;

/// A round whose slack can be positive somewhere in the box.
#[derive(Debug, Clone)]
struct ActiveRound {
    /// One-based round index.
    t: usize,
    action: usize,
    /// `c_a − c_i` per arm, so `s_ℓ(v) = max_i (v_i + offsets_i) − v_a`.
    offsets: Vec<f64>,
    /// `f(t)` under the current budget.
    allowance: f64,
    /// False when the prefix ending here cannot exceed its allowance anywhere in the box.
    binding: bool,
}

/// `v_a − v_i ≥ bound` in the zero-budget compression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConstraint {
    pub played: usize,
    pub other: usize,
    pub bound: f64,
}

/// Membership view of the consistent-value set for one transcript and budget.
#[derive(Debug, Clone)]
pub struct ConsistentSetView {
    history: History,
    budget: RegretBudget,
    tolerance: f64,
    active: Vec<ActiveRound>,
    /// Largest possible prefix slack over the box, through the last active round.
    slack_ceiling: f64,
    /// `k × k` row-major `max_ℓ (c_a − c_i)` over rounds where `a` was played.
    pair_bounds: Vec<f64>,
    pairs: Vec<PairConstraint>,
}

impl ConsistentSetView {
    /// View over an empty transcript: the whole unit box.
    pub fn empty(k: usize, budget: RegretBudget) -> Result<Self> {
        Self::new(History::new(k)?, budget, DEFAULT_TOLERANCE)
    }

    pub fn new(history: History, budget: RegretBudget, tolerance: f64) -> Result<Self> {
        budget.validate()?;
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return Err(Error::Usage(format!("tolerance {tolerance} must be finite and >= 0")));
        }
        let k = history.k();
        let mut view = ConsistentSetView {
            history: History::new(k)?,
            budget,
            tolerance,
            active: Vec::new(),
            slack_ceiling: 0.0,
            pair_bounds: vec![f64::NEG_INFINITY; k * k],
            pairs: Vec::new(),
        };
        for round in history.rounds() {
            view = view.append_round(round.costs.clone(), round.action)?;
        }
        Ok(view)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.history.k()
    }

    /// Number of observed rounds (`t − 1` when predicting round `t`).
    #[inline]
    pub fn len(&self) -> usize {
        self.history.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn budget(&self) -> &RegretBudget {
        &self.budget
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Same transcript under another budget.
    pub fn with_budget(&self, budget: RegretBudget) -> Result<Self> {
        Self::new(self.history.clone(), budget, self.tolerance)
    }

    /// Same transcript with another constraint slack.
    pub fn with_tolerance(&self, tolerance: f64) -> Result<Self> {
        Self::new(self.history.clone(), self.budget.clone(), tolerance)
    }

    /// True while every observed prefix has a zero allowance.
    #[inline]
    pub fn zero_budget(&self) -> bool {
        self.budget.is_zero_through(self.len())
    }

    /// Non-vacuous pairwise half-spaces of the zero-budget compression.
    pub fn pair_constraints(&self) -> &[PairConstraint] {
        &self.pairs
    }

    /// Indices (one-based) of rounds that can constrain the box, with their actions and costs.
    pub fn active_rounds(&self) -> impl Iterator<Item = (usize, ArmIndex, &[f64])> + '_ {
        self.active.iter().map(|r| (r.t, ArmIndex::new(r.action), r.offsets.as_slice()))
    }

    /// Adds one observed round. Membership in the result implies membership here.
    pub fn append_round(mut self, costs: CostVector, action: ArmIndex) -> Result<Self> {
        self.push_round(costs, action)?;
        Ok(self)
    }

    /// In-place form of [`Self::append_round`].
    pub fn push_round(&mut self, costs: CostVector, action: ArmIndex) -> Result<()> {
        let k = self.k();
        let record = self.history.push(costs, action)?;
        let t = record.t;
        let a = record.action.index();
        let c = record.costs.as_slice();

        let offsets: Vec<f64> = c.iter().map(|ci| c[a] - ci).collect();
        for (i, off) in offsets.iter().enumerate() {
            if i != a {
                let slot = &mut self.pair_bounds[a * k + i];
                if *off > *slot {
                    *slot = *off;
                }
            }
        }
        self.rebuild_pairs();

        // Largest slack this round can produce on the box: v_i = 1, v_a = 0.
        let ceiling =
            offsets.iter().enumerate().filter(|(i, _)| *i != a).map(|(_, off)| 1.0 + off).fold(0.0f64, f64::max);
        if ceiling > 0.0 {
            self.slack_ceiling += ceiling;
            let allowance = self.budget.eval(t);
            self.active.push(ActiveRound { t, action: a, offsets, allowance, binding: self.slack_ceiling > allowance });
        }
        Ok(())
    }

    fn rebuild_pairs(&mut self) {
        let k = self.k();
        self.pairs.clear();
        for played in 0..k {
            for other in 0..k {
                let bound = self.pair_bounds[played * k + other];
                // v_a − v_i ≥ −1 always holds on the box
                if played != other && bound > -1.0 {
                    self.pairs.push(PairConstraint { played, other, bound });
                }
            }
        }
    }

    /// Minimal cumulative regret through each observed round if the values were `v`.
    pub fn slack_prefix(&self, v: &ValueVector) -> Result<Vec<f64>> {
        if v.len() != self.k() {
            return Err(Error::Usage(format!("value vector has {} entries, expected {}", v.len(), self.k())));
        }
        let v = v.as_slice();
        let mut total = 0.0;
        Ok(self
            .history
            .rounds()
            .iter()
            .map(|round| {
                total += round_slack(v, round.costs.as_slice(), round.action.index());
                total
            })
            .collect())
    }

    /// Membership test.
    pub fn contains(&self, v: &ValueVector) -> bool {
        v.len() == self.k() && self.contains_slice(v.as_slice())
    }

    /// Membership test on a raw coordinate slice of length `k`.
    pub fn contains_slice(&self, v: &[f64]) -> bool {
        let tol = self.tolerance;
        if v.iter().any(|x| *x < -tol || *x > 1.0 + tol) {
            return false;
        }
        if self.zero_budget() {
            return self.pairs.iter().all(|p| v[p.played] - v[p.other] >= p.bound - tol);
        }
        let mut total = 0.0;
        for round in &self.active {
            total += active_slack(v, round);
            if round.binding && total > round.allowance + tol {
                return false;
            }
        }
        true
    }

    /// Convex violation `Φ(v) ≥ 0`, zero exactly on the body (up to tolerance), and a subgradient.
    pub fn penalty(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut phi = 0.0;
        if self.zero_budget() {
            for p in &self.pairs {
                let gap = p.bound - (v[p.played] - v[p.other]);
                if gap > 0.0 {
                    phi += gap;
                    grad[p.played] -= 1.0;
                    grad[p.other] += 1.0;
                }
            }
            return phi;
        }
        // Σ_ℓ max(0, S_ℓ − f(ℓ)); round j's slack enters every violated prefix ℓ ≥ j.
        let mut total = 0.0;
        let mut maximisers = Vec::with_capacity(self.active.len());
        let mut violated_at = Vec::with_capacity(self.active.len());
        for round in &self.active {
            let (slack, arg) = active_slack_arg(v, round);
            total += slack;
            maximisers.push(if slack > 0.0 { Some(arg) } else { None });
            let excess = total - round.allowance;
            violated_at.push(excess > 0.0);
            if excess > 0.0 {
                phi += excess;
            }
        }
        let mut multiplicity = 0.0;
        for (idx, round) in self.active.iter().enumerate().rev() {
            if violated_at[idx] {
                multiplicity += 1.0;
            }
            if let (Some(arg), true) = (maximisers[idx], multiplicity > 0.0) {
                grad[arg] += multiplicity;
                grad[round.action] -= multiplicity;
            }
        }
        phi
    }

    /// A member of the set, pushed away from the boundary when the body is full dimensional.
    ///
    /// Minimises the violation `Φ` by projected Polyak subgradient steps,
    /// starting from `warm` points first and then from the box centre and
    /// seeded random points. The feasible point is then centred by a few
    /// sweeps of chord-midpoint moves along coordinate and pairwise
    /// directions.
    pub fn find_interior_point(&self, warm: &[ValueVector], seed: u64) -> Result<ValueVector> {
        let k = self.k();
        let center = ValueVector::center(k);
        if self.is_empty() {
            return Ok(center);
        }
        let feasible = warm
            .iter()
            .find(|w| self.contains(w))
            .map(|w| w.as_slice().to_vec())
            .or_else(|| self.descend_from_starts(warm, seed))
            .ok_or(Error::EmptySet { round: self.len() + 1 })?;
        Ok(ValueVector::clamped(self.center_point(feasible)))
    }

    fn descend_from_starts(&self, warm: &[ValueVector], seed: u64) -> Option<Vec<f64>> {
        let k = self.k();
        let mut rng = rng_from(seed);
        let mut starts: Vec<Vec<f64>> = warm.iter().map(|w| w.as_slice().to_vec()).collect();
        starts.push(vec![0.5; k]);
        for _ in 0..INTERIOR_RANDOM_STARTS {
            starts.push((0..k).map(|_| rng.random::<f64>()).collect());
        }
        starts.into_iter().find_map(|start| self.polyak_descent(start))
    }

    fn polyak_descent(&self, mut v: Vec<f64>) -> Option<Vec<f64>> {
        let k = self.k();
        let mut grad = vec![0.0; k];
        let target = 0.25 * self.tolerance;
        for _ in 0..INTERIOR_MAX_ITERS {
            let phi = self.penalty(&v, &mut grad);
            if phi <= target && self.contains_slice(&v) {
                return Some(v);
            }
            let norm_sq: f64 = grad.iter().map(|g| g * g).sum();
            if norm_sq == 0.0 {
                break;
            }
            // aim slightly past the level set so iterates cross into the body
            let step = (phi + target) / norm_sq;
            for (x, g) in v.iter_mut().zip(&grad) {
                *x = (*x - step * g).clamp(0.0, 1.0);
            }
        }
        if self.contains_slice(&v) {
            Some(v)
        } else {
            None
        }
    }

    fn center_point(&self, mut x: Vec<f64>) -> Vec<f64> {
        let k = self.k();
        let mut directions: Vec<Vec<f64>> = Vec::new();
        for i in 0..k {
            let mut d = vec![0.0; k];
            d[i] = 1.0;
            directions.push(d);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..k {
            for j in (i + 1)..k {
                let mut d = vec![0.0; k];
                d[i] = s;
                d[j] = -s;
                directions.push(d);
                let mut d = vec![0.0; k];
                d[i] = s;
                d[j] = s;
                directions.push(d);
            }
        }
        let mut probe = vec![0.0; k];
        for _ in 0..CENTERING_SWEEPS {
            for d in &directions {
                if let Ok((lo, hi)) = sampler::chord_on_slice(self, &x, d, sampler::DEFAULT_BISECTION_TOL, &mut probe) {
                    let mid = 0.5 * (lo + hi);
                    for (p, (xi, di)) in probe.iter_mut().zip(x.iter().zip(d)) {
                        *p = xi + mid * di;
                    }
                    if self.contains_slice(&probe) {
                        x.copy_from_slice(&probe);
                    }
                }
            }
        }
        x
    }
}

impl MembershipOracle for ConsistentSetView {
    fn dim(&self) -> usize {
        self.k()
    }

    fn contains_point(&self, v: &[f64]) -> bool {
        self.contains_slice(v)
    }

    /// Zero-budget bodies are polytopes, so the chord is a line/half-space intersection.
    fn line_chord(&self, x: &[f64], d: &[f64]) -> Option<(f64, f64)> {
        if !self.zero_budget() {
            return None;
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut clip = |room: f64, rate: f64| {
            // keep room + α·rate ≥ 0
            let room = room.max(0.0);
            if rate > 0.0 {
                lo = lo.max(-room / rate);
            } else if rate < 0.0 {
                hi = hi.min(room / -rate);
            }
        };
        for (xi, di) in x.iter().zip(d) {
            clip(*xi, *di);
            clip(1.0 - xi, -di);
        }
        for p in &self.pairs {
            clip(x[p.played] - x[p.other] - p.bound, d[p.played] - d[p.other]);
        }
        Some((lo.min(0.0), hi.max(0.0)))
    }
}

#[inline]
fn round_slack(v: &[f64], costs: &[f64], action: usize) -> f64 {
    let played = v[action] - costs[action];
    v.iter().zip(costs).map(|(vi, ci)| vi - ci - played).fold(0.0f64, f64::max)
}

#[inline]
fn active_slack(v: &[f64], round: &ActiveRound) -> f64 {
    let best = v.iter().zip(&round.offsets).map(|(vi, off)| vi + off).fold(f64::NEG_INFINITY, f64::max);
    (best - v[round.action]).max(0.0)
}

#[inline]
fn active_slack_arg(v: &[f64], round: &ActiveRound) -> (f64, usize) {
    let mut arg = round.action;
    let mut best = v[round.action];
    for (i, (vi, off)) in v.iter().zip(&round.offsets).enumerate() {
        if vi + off > best {
            best = vi + off;
            arg = i;
        }
    }
    (best - v[round.action], arg)
}

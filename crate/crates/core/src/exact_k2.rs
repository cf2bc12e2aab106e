//! Closed forms for two arms.
//!
//! With `k = 2` every round's minimal regret is a hinge in the single
//! difference `d = v_1 − v_2`: playing arm 1 costs `max(0, θ − d)` and playing
//! arm 2 costs `max(0, d − θ)`, with `θ = c_1 − c_2`. Each prefix sum is a
//! convex piecewise-linear function of `d`, so the consistent set is the
//! strip `{v ∈ [0,1]²: d ∈ [lo, hi]}` and both its extreme differences and
//! the optimal-arm probabilities under the uniform measure are exact.

use crate::error::{Error, Result};
use crate::predictor::WeightVector;
use crate::types::{CostVector, History, RegretBudget};

/// Exact interval `[lo, hi]` of `v_1 − v_2` over the consistent set, or `None` if it is empty.
pub fn difference_interval(history: &History, budget: &RegretBudget) -> Result<Option<(f64, f64)>> {
    if history.k() != 2 {
        return Err(Error::Usage(format!("closed form needs k = 2, got {}", history.k())));
    }
    let rounds = history.rounds();
    let mut falling = SortedSums::default(); // θ of rounds where arm 1 was played
    let mut rising = SortedSums::default(); // θ of rounds where arm 2 was played
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for (idx, round) in rounds.iter().enumerate() {
        let c = round.costs.as_slice();
        let theta = c[0] - c[1];
        if round.action.index() == 0 {
            falling.insert(theta);
        } else {
            rising.insert(theta);
        }
        let t = idx + 1;
        let allowance = budget.eval(t);
        // prefix t is implied by prefix t + 1 when the allowance does not grow
        if t < rounds.len() && budget.eval(t + 1) <= allowance {
            continue;
        }
        match sublevel_interval(&falling, &rising, allowance) {
            Some((a, b)) => {
                lo = lo.max(a);
                hi = hi.min(b);
                if lo > hi {
                    return Ok(None);
                }
            }
            None => return Ok(None),
        }
    }
    Ok(Some((lo, hi)))
}

#[derive(Debug, Default)]
struct SortedSums {
    values: Vec<f64>,
    /// `prefix[i] = Σ values[..i]`
    prefix: Vec<f64>,
}

impl SortedSums {
    fn insert(&mut self, x: f64) {
        let at = self.values.partition_point(|v| *v < x);
        self.values.insert(at, x);
        self.prefix.clear();
        self.prefix.push(0.0);
        let mut acc = 0.0;
        for v in &self.values {
            acc += v;
            self.prefix.push(acc);
        }
    }

    /// `Σ_{θ > x} (θ − x)`
    fn above(&self, x: f64) -> f64 {
        let split = self.values.partition_point(|v| *v <= x);
        let total = self.prefix.last().copied().unwrap_or(0.0);
        (total - self.prefix.get(split).copied().unwrap_or(0.0)) - x * (self.values.len() - split) as f64
    }

    /// `Σ_{θ < x} (x − θ)`
    fn below(&self, x: f64) -> f64 {
        let split = self.values.partition_point(|v| *v < x);
        x * split as f64 - self.prefix.get(split).copied().unwrap_or(0.0)
    }
}

/// `{d ∈ [−1, 1] : S(d) ≤ allowance}` for `S(d) = Σ (θ − d)+ + Σ (d − φ)+`.
fn sublevel_interval(falling: &SortedSums, rising: &SortedSums, allowance: f64) -> Option<(f64, f64)> {
    let slack = |d: f64| falling.above(d) + rising.below(d);
    let mut knots: Vec<f64> =
        falling.values.iter().chain(&rising.values).copied().filter(|x| *x > -1.0 && *x < 1.0).collect();
    knots.push(-1.0);
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let values: Vec<f64> = knots.iter().map(|d| slack(*d)).collect();
    let best = (0..values.len()).min_by(|a, b| values[*a].total_cmp(&values[*b]))?;
    if values[best] > allowance {
        return None;
    }
    // S is linear between knots, so interpolate at the crossing
    let cross = |a: usize, b: usize| {
        let (sa, sb) = (values[a], values[b]);
        knots[a] + (sa - allowance) / (sa - sb) * (knots[b] - knots[a])
    };
    let lo = match (0..best).rev().find(|j| values[*j] > allowance) {
        None => knots[0],
        Some(j) => cross(j, j + 1),
    };
    let hi = match (best + 1..values.len()).find(|j| values[*j] > allowance) {
        None => knots[knots.len() - 1],
        Some(j) => cross(j, j - 1),
    };
    Some((lo, hi))
}

/// Area of `{(v_1, v_2) ∈ [0,1]² : v_1 − v_2 ≥ x}`.
pub fn area_at_least(x: f64) -> f64 {
    if x <= -1.0 {
        1.0
    } else if x <= 0.0 {
        1.0 - 0.5 * (1.0 + x) * (1.0 + x)
    } else if x < 1.0 {
        0.5 * (1.0 - x) * (1.0 - x)
    } else {
        0.0
    }
}

/// Exact optimal-arm probabilities for costs `c` under the uniform measure on the strip `[lo, hi]`.
///
/// Arm 1 wins when `d ≥ c_1 − c_2` (ties go to arm 1). A strip of zero area is
/// treated as its line segment.
pub fn weights(interval: (f64, f64), c: &CostVector) -> Result<WeightVector> {
    if c.len() != 2 {
        return Err(Error::Usage("closed-form weights need k = 2".into()));
    }
    let (lo, hi) = interval;
    let theta = c.as_slice()[0] - c.as_slice()[1];
    let area = area_at_least(lo) - area_at_least(hi);
    let w1 = if area > 0.0 {
        if theta <= lo {
            1.0
        } else if theta > hi {
            0.0
        } else {
            ((area_at_least(theta) - area_at_least(hi)) / area).clamp(0.0, 1.0)
        }
    } else if lo >= theta {
        1.0
    } else {
        0.0
    };
    Ok(WeightVector::exact(vec![w1, 1.0 - w1]))
}

//! Extreme value differences over the consistent set and the per-mismatch
//! shrinkage inequality.
//!
//! `U_ij = max (v_i − v_j)` and `L_ij = min (v_i − v_j)` over the consistent
//! set. On a round where the prediction `p` differs from the agent's action `a`,
//! exact weights guarantee
//!
//! ```text
//! c_a − c_p ≥ L_ap + (U_ap − L_ap) / (8k)
//! ```
//!
//! The primary route solves a linear program over the lifted polytope in
//! `(v, r)`; two-arm transcripts also have a closed form, and small `k` can be
//! checked on a grid.

use serde::{Deserialize, Serialize};

use crate::consistent_set::ConsistentSetView;
use crate::error::{Error, Result};
use crate::exact_k2;
use crate::lp::{LinearProgram, LpOutcome};
use crate::sampler::{grid_oracle, GRID_MAX_DIM};
use crate::types::{ArmIndex, CostVector};

/// Default slack for sampled weights in [`lemma1_check`].
pub const DEFAULT_LEMMA_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DifferenceMethod {
    LiftedLp,
    K2ClosedForm,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeDifference {
    pub i: ArmIndex,
    pub j: ArmIndex,
    pub upper: f64,
    pub lower: f64,
    pub method: DifferenceMethod,
}

impl ExtremeDifference {
    /// The same extremes for the pair `(j, i)`.
    pub fn swapped(self) -> Self {
        ExtremeDifference { i: self.j, j: self.i, upper: -self.lower, lower: -self.upper, method: self.method }
    }
}

/// Outcome of the mismatch inequality on one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Outcome {
    pub holds: bool,
    /// `(c_a − c_p) − [L + (U − L)/(8k)]`
    pub margin: f64,
}

/// Builds the lifted program over `(v, r)`.
///
/// With `compress` set, rounds that cannot bind on the box are dropped (their
/// `r_ℓ` can be zero for free) and a budget that is zero on every observed
/// prefix removes all `r` variables, leaving one half-space per ordered arm
/// pair. Both reductions preserve the projection onto `v`.
pub fn lifted_program(view: &ConsistentSetView, compress: bool) -> LinearProgram {
    let k = view.k();
    if compress && view.zero_budget() {
        let mut lp = LinearProgram::new(k);
        box_rows(&mut lp, k);
        for p in view.pair_constraints() {
            lp.add_le(&[(p.other, 1.0), (p.played, -1.0)], -p.bound);
        }
        return lp;
    }
    // (one-based round index, action, offsets c_a − c_i)
    let rounds: Vec<(usize, usize, Vec<f64>)> = if compress {
        view.active_rounds().map(|(t, a, off)| (t, a.index(), off.to_vec())).collect()
    } else {
        view.history()
            .rounds()
            .iter()
            .map(|r| {
                let c = r.costs.as_slice();
                let a = r.action.index();
                (r.t, a, c.iter().map(|ci| c[a] - ci).collect())
            })
            .collect()
    };
    let mut lp = LinearProgram::new(k + rounds.len());
    box_rows(&mut lp, k);
    for (slot, (_, a, offsets)) in rounds.iter().enumerate() {
        let r = k + slot;
        for (i, off) in offsets.iter().enumerate() {
            if i != *a {
                // v_i − v_a − r_ℓ ≤ c_i − c_a
                lp.add_le(&[(i, 1.0), (*a, -1.0), (r, -1.0)], -off);
            }
        }
    }
    let budget = view.budget();
    let mut terms = Vec::with_capacity(rounds.len());
    for (slot, (t, _, _)) in rounds.iter().enumerate() {
        terms.push((k + slot, 1.0));
        lp.add_le(&terms, budget.eval(*t));
    }
    lp
}

fn box_rows(lp: &mut LinearProgram, k: usize) {
    for i in 0..k {
        lp.add_le(&[(i, 1.0)], 1.0);
    }
}

fn pivot_cap(view: &ConsistentSetView) -> usize {
    50 * (view.k() + view.len())
}

fn maximize_difference(lp: &mut LinearProgram, i: usize, j: usize, cap: usize, round: usize) -> Result<f64> {
    let mut objective = vec![0.0; lp.n_vars()];
    objective[i] = 1.0;
    objective[j] = -1.0;
    lp.maximize(objective);
    match lp.solve(cap)? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Infeasible => Err(Error::EmptySet { round }),
        LpOutcome::Unbounded => Err(Error::NumericalFailure("difference unbounded on the unit box".into())),
    }
}

/// `U_ij` and `L_ij` by linear programming over the lifted polytope.
pub fn extreme_difference(view: &ConsistentSetView, i: ArmIndex, j: ArmIndex) -> Result<ExtremeDifference> {
    extreme_difference_lp(view, i, j, true)
}

/// [`extreme_difference`] with control over the constraint compression.
pub fn extreme_difference_lp(
    view: &ConsistentSetView,
    i: ArmIndex,
    j: ArmIndex,
    compress: bool,
) -> Result<ExtremeDifference> {
    let k = view.k();
    i.check(k)?;
    j.check(k)?;
    let round = view.len() + 1;
    let mut lp = lifted_program(view, compress);
    let cap = pivot_cap(view);
    let upper = maximize_difference(&mut lp, i.index(), j.index(), cap, round)?;
    let lower = -maximize_difference(&mut lp, j.index(), i.index(), cap, round)?;
    Ok(ExtremeDifference { i, j, upper, lower: lower.min(upper), method: DifferenceMethod::LiftedLp })
}

/// Closed-form extremes for two arms.
pub fn extreme_difference_k2(view: &ConsistentSetView, i: ArmIndex, j: ArmIndex) -> Result<ExtremeDifference> {
    i.check(2)?;
    j.check(2)?;
    let (lo, hi) = exact_k2::difference_interval(view.history(), view.budget())?
        .ok_or(Error::EmptySet { round: view.len() + 1 })?;
    let forward = ExtremeDifference {
        i: ArmIndex::new(0),
        j: ArmIndex::new(1),
        upper: hi,
        lower: lo,
        method: DifferenceMethod::K2ClosedForm,
    };
    Ok(match (i.index(), j.index()) {
        (0, 1) => forward,
        (1, 0) => forward.swapped(),
        _ => ExtremeDifference { i, j, upper: 0.0, lower: 0.0, method: DifferenceMethod::K2ClosedForm },
    })
}

/// Extremes over the members of a regular grid; within one grid spacing of the truth.
pub fn extreme_difference_grid(
    view: &ConsistentSetView,
    i: ArmIndex,
    j: ArmIndex,
    resolution: usize,
) -> Result<ExtremeDifference> {
    let k = view.k();
    if k > GRID_MAX_DIM {
        return Err(Error::DimensionTooLarge { k, max: GRID_MAX_DIM });
    }
    i.check(k)?;
    j.check(k)?;
    let grid = grid_oracle(view, resolution)?;
    let diffs = grid.points.iter().map(|p| p.get(i) - p.get(j));
    let (lower, upper) = diffs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if grid.is_empty() {
        return Err(Error::EmptySet { round: view.len() + 1 });
    }
    Ok(ExtremeDifference { i, j, upper, lower, method: DifferenceMethod::Grid })
}

/// Evaluates the mismatch inequality for known extremes of `(a, p)`.
pub fn lemma1_margin(k: usize, c: &CostVector, diff: &ExtremeDifference, tolerance: f64) -> Lemma1Outcome {
    let (a, p) = (diff.i, diff.j);
    let threshold = diff.lower + (diff.upper - diff.lower) / (8.0 * k as f64);
    let margin = (c.get(a) - c.get(p)) - threshold;
    Lemma1Outcome { holds: margin >= -tolerance, margin }
}

/// Checks the mismatch inequality on `view` (the set before observing `a`).
pub fn lemma1_check(
    view: &ConsistentSetView,
    c: &CostVector,
    a: ArmIndex,
    p: ArmIndex,
    tolerance: f64,
) -> Result<Lemma1Outcome> {
    if a == p {
        return Err(Error::Usage("lemma check applies only when the prediction differs from the action".into()));
    }
    if c.len() != view.k() {
        return Err(Error::Usage("cost vector length differs from k".into()));
    }
    let diff = extreme_difference(view, a, p)?;
    Ok(lemma1_margin(view.k(), c, &diff, tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RegretBudget;

    fn cv(c: &[f64]) -> CostVector {
        CostVector::new(c.to_vec()).unwrap()
    }

    fn view(k: usize, budget: RegretBudget, rounds: &[(&[f64], usize)]) -> ConsistentSetView {
        let mut view = ConsistentSetView::empty(k, budget).unwrap();
        for (c, a) in rounds {
            view = view.append_round(cv(c), ArmIndex::from_number(*a).unwrap()).unwrap();
        }
        view
    }

    const A1: ArmIndex = ArmIndex::new(0);
    const A2: ArmIndex = ArmIndex::new(1);

    #[test]
    fn empty_history_box_extremes() {
        let v = view(3, RegretBudget::Zero, &[]);
        let d = extreme_difference(&v, A1, ArmIndex::new(2)).unwrap();
        assert_eq!((d.upper, d.lower), (1.0, -1.0));
    }

    #[test]
    fn single_round_strip() {
        let v = view(2, RegretBudget::Zero, &[(&[0.5, 0.1], 1)]);
        let d = extreme_difference(&v, A1, A2).unwrap();
        assert!((d.upper - 1.0).abs() < 1e-12 && (d.lower - 0.4).abs() < 1e-12);
        let r = extreme_difference(&v, A2, A1).unwrap();
        assert!((r.upper + 0.4).abs() < 1e-12 && (r.lower + 1.0).abs() < 1e-12);
        for compress in [false, true] {
            let d = extreme_difference_lp(&v, A1, A2, compress).unwrap();
            assert!((d.lower - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_view_reports_empty() {
        let v = view(2, RegretBudget::Zero, &[(&[0.0, 1.0], 2), (&[1.0, 0.0], 1)]);
        assert_eq!(extreme_difference(&v, A1, A2).unwrap_err(), Error::EmptySet { round: 3 });
        assert_eq!(extreme_difference_lp(&v, A1, A2, false).unwrap_err(), Error::EmptySet { round: 3 });
        assert!(extreme_difference_k2(&v, A1, A2).is_err());
    }

    #[test]
    fn lemma_examples() {
        let diff = ExtremeDifference { i: A1, j: A2, upper: 1.0, lower: 0.4, method: DifferenceMethod::K2ClosedForm };
        let ok = lemma1_margin(2, &cv(&[0.9, 0.4]), &diff, 0.0);
        assert!(ok.holds && (ok.margin - 0.0625).abs() < 1e-12);
        let bad = lemma1_margin(2, &cv(&[0.42, 0.0]), &diff, 0.0);
        assert!(!bad.holds && (bad.margin - (0.42 - 0.4375)).abs() < 1e-12);
    }

    #[test]
    fn lemma_rejects_matching_arms() {
        let v = view(2, RegretBudget::Zero, &[]);
        assert!(matches!(lemma1_check(&v, &cv(&[0.1, 0.2]), A1, A1, 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn positive_budget_routes_agree() {
        let v = view(
            2,
            RegretBudget::Constant { coefficient: 0.1 },
            &[(&[0.9, 0.0], 1), (&[0.8, 0.0], 1), (&[0.9, 0.0], 2)],
        );
        let lp = extreme_difference(&v, A1, A2).unwrap();
        let raw = extreme_difference_lp(&v, A1, A2, false).unwrap();
        let closed = extreme_difference_k2(&v, A1, A2).unwrap();
        for d in [lp, raw] {
            assert!(
                (d.upper - closed.upper).abs() < 1e-9 && (d.lower - closed.lower).abs() < 1e-9,
                "{d:?} vs {closed:?}"
            );
        }
        assert!((closed.lower - 0.8).abs() < 1e-12);
    }

    #[test]
    fn grid_extremes_within_spacing() {
        let v = view(3, RegretBudget::Sqrt { coefficient: 0.2 }, &[(&[0.5, 0.1, 0.3], 1), (&[0.2, 0.6, 0.0], 3)]);
        let lp = extreme_difference(&v, A1, ArmIndex::new(2)).unwrap();
        let grid = extreme_difference_grid(&v, A1, ArmIndex::new(2), 60).unwrap();
        let spacing = 2.0 / 60.0;
        assert!((lp.upper - grid.upper).abs() <= spacing);
        assert!((lp.lower - grid.lower).abs() <= spacing);
    }
}

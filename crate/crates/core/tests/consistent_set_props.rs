//! Structural properties of the consistent set, checked on random transcripts.

use agent_predict::consistent_set::{ConsistentSetView, DEFAULT_TOLERANCE};
use agent_predict::diagnostics::lifted_program;
use agent_predict::lp::LpOutcome;
use agent_predict::types::{ArmIndex, CostVector, History, RegretBudget, ValueVector};
use proptest::prelude::*;

fn budget_strategy() -> impl Strategy<Value = RegretBudget> {
    prop_oneof![
        Just(RegretBudget::Zero),
        (0.0..0.5f64).prop_map(|coefficient| RegretBudget::Constant { coefficient }),
        (0.0..0.3f64).prop_map(|coefficient| RegretBudget::Log { coefficient }),
        (0.0..0.2f64).prop_map(|coefficient| RegretBudget::Sqrt { coefficient }),
    ]
}

/// Arbitrary transcripts: any costs, any actions.
fn history_strategy(k: usize, max_rounds: usize) -> impl Strategy<Value = History> {
    prop::collection::vec((prop::collection::vec(0.0..1.5f64, k), 0..k), 0..max_rounds).prop_map(move |rounds| {
        let mut h = History::new(k).unwrap();
        for (c, a) in rounds {
            h.push(CostVector::new(c).unwrap(), ArmIndex::new(a)).unwrap();
        }
        h
    })
}

fn point(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, k)
}

fn view(h: History, b: RegretBudget) -> ConsistentSetView {
    ConsistentSetView::new(h, b, DEFAULT_TOLERANCE).unwrap()
}

/// Distance of `v` from the membership boundary, measured in cumulative slack.
fn boundary_gap(view: &ConsistentSetView, v: &[f64]) -> f64 {
    let vv = ValueVector::new(v.to_vec()).unwrap();
    let prefix = view.slack_prefix(&vv).unwrap();
    prefix.iter().enumerate().map(|(t, s)| (view.budget().eval(t + 1) - s).abs()).fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn membership_is_convex(h in history_strategy(3, 8), b in budget_strategy(), x in point(3), y in point(3), w in 0.0..=1.0f64) {
        let v = view(h, b);
        if v.contains_slice(&x) && v.contains_slice(&y) {
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| w * a + (1.0 - w) * b).collect();
            prop_assert!(v.contains_slice(&z));
        }
    }

    #[test]
    fn later_rounds_only_shrink(h in history_strategy(3, 10), b in budget_strategy(), x in point(3)) {
        let mut prefix = ConsistentSetView::empty(3, b).unwrap();
        let mut was_member = prefix.contains_slice(&x);
        for r in h.rounds() {
            prefix.push_round(r.costs.clone(), r.action).unwrap();
            let member = prefix.contains_slice(&x);
            prop_assert!(was_member || !member, "point re-entered at round {}", r.t);
            was_member = member;
        }
    }

    #[test]
    fn larger_budget_only_grows(h in history_strategy(3, 8), c in 0.0..0.5f64, extra in 0.0..0.5f64, x in point(3)) {
        let tight = view(h.clone(), RegretBudget::Constant { coefficient: c });
        let loose = view(h, RegretBudget::Constant { coefficient: c + extra });
        prop_assert!(!tight.contains_slice(&x) || loose.contains_slice(&x));
    }

    #[test]
    fn membership_matches_lifted_program(h in history_strategy(3, 6), b in budget_strategy(), x in point(3)) {
        let v = view(h, b);
        prop_assume!(boundary_gap(&v, &x) > 1e-6);
        for compress in [false, true] {
            let mut lp = lifted_program(&v, compress);
            for (i, xi) in x.iter().enumerate() {
                lp.add_le(&[(i, 1.0)], *xi);
                lp.add_le(&[(i, -1.0)], -xi);
            }
            let n = lp.n_vars();
            lp.maximize(vec![0.0; n]);
            let feasible = matches!(lp.solve(100_000).unwrap(), LpOutcome::Optimal { .. });
            prop_assert_eq!(feasible, v.contains_slice(&x), "compress = {}", compress);
        }
    }

    #[test]
    fn compressed_and_direct_membership_agree(h in history_strategy(4, 10), b in budget_strategy(), x in point(4)) {
        let v = view(h, b);
        prop_assume!(boundary_gap(&v, &x) > 1e-9);
        let vv = ValueVector::new(x.clone()).unwrap();
        let direct = v
            .slack_prefix(&vv)
            .unwrap()
            .iter()
            .enumerate()
            .all(|(t, s)| *s <= v.budget().eval(t + 1) + DEFAULT_TOLERANCE);
        prop_assert_eq!(direct, v.contains(&vv));
    }

    #[test]
    fn interior_point_is_member(h in history_strategy(3, 8), b in budget_strategy(), seed in any::<u64>()) {
        let v = view(h, b);
        match v.find_interior_point(&[], seed) {
            Ok(p) => prop_assert!(v.contains(&p)),
            Err(e) => {
                // only an empty set may fail, and then no grid point is a member either
                let empty = matches!(e, agent_predict::Error::EmptySet { .. });
                prop_assert!(empty, "unexpected error {}", e);
                let grid = agent_predict::sampler::grid_oracle(&v, 30).unwrap();
                prop_assert!(grid.is_empty());
            }
        }
    }
}

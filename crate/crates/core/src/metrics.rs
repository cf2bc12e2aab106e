//! Regret accounting and the analytic bounds observed runs are checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{optimal_arm, utility, ArmIndex, CostVector, ValueVector};

/// One logged round of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub t: usize,
    pub costs: CostVector,
    /// Agent's arm.
    pub a: ArmIndex,
    /// Predicted arm.
    pub p: ArmIndex,
    /// Optimal arm under the true values.
    pub o: ArmIndex,
    pub ar: f64,
    pub pr: f64,
    pub er: f64,
    pub cum_ar: f64,
    pub cum_pr: f64,
    pub weights: Option<Vec<f64>>,
    /// Only filled on mismatch rounds when diagnostics are on.
    pub lemma1_margin: Option<f64>,
    /// Set when the consistent set was empty under the configured budget.
    pub cv_empty: bool,
}

impl RoundLog {
    /// Builds the log for round `t`, continuing the running sums of `previous`.
    pub fn new(
        t: usize,
        costs: CostVector,
        a: ArmIndex,
        p: ArmIndex,
        v_star: &ValueVector,
        previous: Option<&RoundLog>,
    ) -> Result<Self> {
        let r = round_regrets(v_star, &costs, a, p)?;
        let (cum_ar, cum_pr) = previous.map_or((0.0, 0.0), |l| (l.cum_ar, l.cum_pr));
        Ok(RoundLog {
            t,
            costs,
            a,
            p,
            o: r.optimal,
            ar: r.ar,
            pr: r.pr,
            er: r.er,
            cum_ar: cum_ar + r.ar,
            cum_pr: cum_pr + r.pr,
            weights: None,
            lemma1_margin: None,
            cv_empty: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRegrets {
    pub optimal: ArmIndex,
    pub ar: f64,
    pub pr: f64,
    pub er: f64,
}

/// Agent, prediction and excess regret of one round.
pub fn round_regrets(v_star: &ValueVector, c: &CostVector, a: ArmIndex, p: ArmIndex) -> Result<RoundRegrets> {
    let o = optimal_arm(v_star, c)?;
    let best = utility(v_star, c, o)?;
    let ua = utility(v_star, c, a)?;
    let up = utility(v_star, c, p)?;
    Ok(RoundRegrets { optimal: o, ar: best - ua, pr: best - up, er: (ua - up).max(0.0) })
}

/// `δ = 1 − 1/(8k)`, the fraction in the mismatch lemma.
pub fn lemma_delta(k: usize) -> f64 {
    1.0 - 1.0 / (8.0 * k as f64)
}

/// `λ(k) = 3 + 1/(1 − δ(1 − ln δ))`, one above the threshold the envelope needs.
pub fn lambda(k: usize) -> f64 {
    let d = lemma_delta(k);
    3.0 + 1.0 / (1.0 - d * (1.0 - d.ln()))
}

/// `H(T) = Σ_{i ≤ T} 1/i`
pub fn harmonic(t: usize) -> f64 {
    (1..=t).map(|i| 1.0 / i as f64).sum()
}

/// Envelope on cumulative prediction regret: `f(T) + k²·λ·H(T)·(f(T) + 1)`.
pub fn theorem1_bound(k: usize, f_t: f64, t: usize) -> f64 {
    let k2 = (k * k) as f64;
    f_t + k2 * lambda(k) * harmonic(t) * (f_t + 1.0)
}

/// Mistake bound under a per-round utility gap: `(k⁴(f(T) + 1)·ln T + f(T)) / gap`.
pub fn theorem2_bound(k: usize, f_t: f64, t: usize, gap: f64) -> Result<f64> {
    if gap.is_nan() || gap <= 0.0 {
        return Err(Error::NonPositiveGap(gap));
    }
    let k4 = (k as f64).powi(4);
    Ok((k4 * (f_t + 1.0) * (t.max(1) as f64).ln() + f_t) / gap)
}

/// Gap between the best and second-best utility in a round.
pub fn utility_gap(v_star: &ValueVector, c: &CostVector) -> f64 {
    let mut u: Vec<f64> = v_star.as_slice().iter().zip(c.as_slice()).map(|(v, c)| v - c).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    u[0] - u[1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MistakeCounts {
    /// Wrong predictions that named the optimal arm.
    pub m_o: usize,
    /// Wrong predictions that named a suboptimal arm.
    pub m_a: usize,
}

impl MistakeCounts {
    pub fn total(self) -> usize {
        self.m_o + self.m_a
    }
}

/// Classifies mismatch rounds whose utility gap under `v_star` is at least `gap`.
pub fn mistake_counts(logs: &[RoundLog], v_star: &ValueVector, gap: f64) -> MistakeCounts {
    let mut counts = MistakeCounts::default();
    for log in logs.iter().filter(|l| l.p != l.a && utility_gap(v_star, &l.costs) >= gap) {
        if log.p == log.o {
            counts.m_o += 1;
        } else {
            counts.m_a += 1;
        }
    }
    counts
}

/// `buckets[α][β]` = Σ er over rounds with `a_t = α`, `p_t = β`.
pub fn pair_buckets(logs: &[RoundLog], k: usize) -> Vec<Vec<f64>> {
    let mut buckets = vec![vec![0.0; k]; k];
    for log in logs {
        buckets[log.a.index()][log.p.index()] += log.er;
    }
    buckets
}

/// Run totals and the bounds they are compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub k: usize,
    pub rounds: usize,
    pub seed: u64,
    pub sum_ar: f64,
    pub sum_pr: f64,
    pub sum_er: f64,
    pub mismatches: usize,
    pub mistakes: MistakeCounts,
    pub gap: f64,
    pub budget_at_t: f64,
    pub theorem1_bound: f64,
    pub theorem2_bound: f64,
    pub cv_empty_rounds: usize,
    pub runtime_secs: f64,
}

impl RunSummary {
    pub fn from_logs(logs: &[RoundLog], k: usize, seed: u64, v_star: &ValueVector, f_t: f64, gap: f64) -> Result<Self> {
        let rounds = logs.len();
        Ok(RunSummary {
            k,
            rounds,
            seed,
            sum_ar: logs.iter().map(|l| l.ar).sum(),
            sum_pr: logs.iter().map(|l| l.pr).sum(),
            sum_er: logs.iter().map(|l| l.er).sum(),
            mismatches: logs.iter().filter(|l| l.a != l.p).count(),
            mistakes: mistake_counts(logs, v_star, gap),
            gap,
            budget_at_t: f_t,
            theorem1_bound: theorem1_bound(k, f_t, rounds.max(1)),
            theorem2_bound: theorem2_bound(k, f_t, rounds.max(1), gap)?,
            cv_empty_rounds: logs.iter().filter(|l| l.cv_empty).count(),
            runtime_secs: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cv(x: &[f64]) -> CostVector {
        CostVector::new(x.to_vec()).unwrap()
    }

    fn arm(n: usize) -> ArmIndex {
        ArmIndex::from_number(n).unwrap()
    }

    #[test]
    fn regret_examples() {
        let v = ValueVector::new(vec![1.0, 0.0]).unwrap();
        let c = cv(&[0.3, 0.1]);
        let r = round_regrets(&v, &c, arm(1), arm(2)).unwrap();
        assert_eq!(r.ar, 0.0);
        assert!((r.pr - 0.8).abs() < 1e-15 && (r.er - 0.8).abs() < 1e-15);
        let r = round_regrets(&v, &c, arm(2), arm(1)).unwrap();
        assert!((r.ar - 0.8).abs() < 1e-15);
        assert_eq!((r.pr, r.er), (0.0, 0.0));
        let r = round_regrets(&v, &c, arm(1), arm(1)).unwrap();
        assert_eq!((r.ar, r.pr, r.er), (0.0, 0.0, 0.0));
    }

    #[test]
    fn lambda_values() {
        assert!((lemma_delta(2) - 0.9375).abs() < 1e-15);
        assert!((lambda(2) - 504.218_855_610_864).abs() < 1e-9);
        assert!((lambda(3) - 1_138.886_673_263_425).abs() < 1e-9);
        assert!((lambda(10) - 12_749.554_902_551_91).abs() < 1e-7);
    }

    #[test]
    fn theorem1_examples() {
        assert!((theorem1_bound(2, 0.0, 1) - 2_016.875_422_443_457).abs() < 1e-9);
        let mut prev = 0.0;
        for t in 1..100 {
            let b = theorem1_bound(3, 0.0, t);
            assert!(b > prev);
            assert!((b - 9.0 * lambda(3) * harmonic(t)).abs() < 1e-9 * b);
            prev = b;
        }
    }

    #[test]
    fn theorem2_examples() {
        assert!((theorem2_bound(2, 0.0, 100, 0.1).unwrap() - 736.827_229_758_094_6).abs() < 1e-9);
        let a = theorem2_bound(3, 1.0, 50, 0.2).unwrap();
        let b = theorem2_bound(3, 1.0, 50, 0.4).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-9);
        assert_eq!(theorem2_bound(2, 0.0, 1, 0.1).unwrap(), 0.0);
        assert_eq!(theorem2_bound(2, 0.0, 10, 0.0).unwrap_err(), Error::NonPositiveGap(0.0));
    }

    fn log(v: &ValueVector, c: &[f64], a: usize, p: usize) -> RoundLog {
        RoundLog::new(1, cv(c), arm(a), arm(p), v, None).unwrap()
    }

    #[test]
    fn mistake_classification() {
        let v = ValueVector::new(vec![1.0, 0.0, 0.5]).unwrap();
        let perfect = vec![log(&v, &[0.0, 0.0, 0.0], 1, 1)];
        assert_eq!(mistake_counts(&perfect, &v, 0.1), MistakeCounts::default());
        // agent optimal, predictor wrong once
        let logs = vec![log(&v, &[0.0, 0.0, 0.0], 1, 1), log(&v, &[0.0, 0.0, 0.0], 1, 3)];
        assert_eq!(mistake_counts(&logs, &v, 0.1), MistakeCounts { m_o: 0, m_a: 1 });
        // agent strays, predictor names the optimum
        let logs = vec![log(&v, &[0.0, 0.0, 0.0], 2, 1)];
        assert_eq!(mistake_counts(&logs, &v, 0.1), MistakeCounts { m_o: 1, m_a: 0 });
        // rounds under the gap are ignored
        let logs = vec![log(&v, &[0.45, 0.0, 0.0], 1, 3)];
        assert_eq!(mistake_counts(&logs, &v, 0.1).total(), 0);
    }

    fn arb_round(k: usize) -> impl Strategy<Value = (Vec<f64>, usize, usize)> {
        (prop::collection::vec(0.0..2.0f64, k), 0..k, 0..k)
    }

    proptest! {
        #[test]
        fn regret_identities(v in prop::collection::vec(0.0..=1.0f64, 4), rounds in prop::collection::vec(arb_round(4), 1..30)) {
            let v = ValueVector::new(v).unwrap();
            let mut logs: Vec<RoundLog> = Vec::new();
            for (t, (c, a, p)) in rounds.into_iter().enumerate() {
                let l = RoundLog::new(t + 1, cv(&c), ArmIndex::new(a), ArmIndex::new(p), &v, logs.last()).unwrap();
                prop_assert!(l.ar >= 0.0 && l.pr >= 0.0 && l.er >= 0.0);
                prop_assert!(l.pr <= l.ar + l.er + 1e-12);
                let ua = utility(&v, &l.costs, l.a).unwrap();
                let up = utility(&v, &l.costs, l.p).unwrap();
                prop_assert!((l.pr - (l.ar + (ua - up))).abs() < 1e-12);
                logs.push(l);
            }
            let mut cum = (0.0, 0.0);
            for l in &logs {
                cum.0 += l.ar;
                cum.1 += l.pr;
                prop_assert_eq!((l.cum_ar, l.cum_pr), cum);
            }
            let buckets = pair_buckets(&logs, 4);
            let total: f64 = buckets.iter().flatten().sum();
            let direct: f64 = logs.iter().map(|l| l.er).sum();
            prop_assert!((total - direct).abs() < 1e-12);
            prop_assert!((0..4).all(|i| buckets[i][i] == 0.0));
        }
    }
}

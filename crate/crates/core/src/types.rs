//! Domain types shared by every module: arms, cost and value vectors, the
//! regret budget, and the public transcript.
//!
//! Arms are stored zero-based; [`ArmIndex::number`] gives the one-based label
//! used in files and reports.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on any single arm cost.
pub const DEFAULT_COST_CAP: f64 = 2.0;

/// Default geometric comparison tolerance.
pub const EPS_GEOM: f64 = 1e-9;

/// One of the `k` arms, stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArmIndex(usize);

impl ArmIndex {
    pub const fn new(zero_based: usize) -> Self {
        ArmIndex(zero_based)
    }

    /// Builds an arm from its one-based label.
    pub fn from_number(number: usize) -> Result<Self> {
        if number == 0 {
            return Err(Error::Usage("arm numbers start at 1".into()));
        }
        Ok(ArmIndex(number - 1))
    }

    #[inline]
    pub const fn index(self) -> usize {
        self.0
    }

    /// One-based label.
    #[inline]
    pub const fn number(self) -> usize {
        self.0 + 1
    }

    pub fn check(self, k: usize) -> Result<Self> {
        if self.0 < k {
            Ok(self)
        } else {
            Err(Error::Usage(format!("arm {} out of range for k = {}", self.number(), k)))
        }
    }
}

impl fmt::Display for ArmIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Per-arm costs for one round, in utility units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    /// Validates length (at least two arms), finiteness and non-negativity.
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.len() < 2 {
            return Err(Error::Usage(format!("need at least 2 arms, got {}", costs.len())));
        }
        if let Some(bad) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::Usage(format!("cost {bad} is not a finite non-negative real")));
        }
        Ok(CostVector(costs))
    }

    /// Like [`CostVector::new`] and additionally enforces `cost <= cap`.
    pub fn with_cap(costs: Vec<f64>, cap: f64) -> Result<Self> {
        let v = Self::new(costs)?;
        v.check_cap(cap)?;
        Ok(v)
    }

    pub fn check_cap(&self, cap: f64) -> Result<()> {
        match self.0.iter().find(|c| **c > cap) {
            Some(c) => Err(Error::Usage(format!("cost {c} exceeds cap {cap}"))),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn get(&self, arm: ArmIndex) -> f64 {
        self.0[arm.index()]
    }
}

/// Expected rewards per arm, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueVector(Vec<f64>);

impl ValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Usage(format!("need at least 2 arms, got {}", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Usage(format!("value {bad} outside [0, 1]")));
        }
        Ok(ValueVector(values))
    }

    /// Clamps every coordinate into `[0, 1]`. Used for sampler output where
    /// floating point drift can leave a coordinate an ulp outside the box.
    pub(crate) fn clamped(mut values: Vec<f64>) -> Self {
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        ValueVector(values)
    }

    /// The centre of the unit box.
    pub fn center(k: usize) -> Self {
        ValueVector(vec![0.5; k])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn get(&self, arm: ArmIndex) -> f64 {
        self.0[arm.index()]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Assumed upper bound `f(T)` on the agent's cumulative regret after `T` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegretBudget {
    /// `f ≡ 0`: the agent always plays an optimal arm.
    Zero,
    /// `f(T) = coefficient` for every `T`, including `T = 0`.
    Constant { coefficient: f64 },
    /// `f(T) = coefficient · ln(1 + T)`.
    Log { coefficient: f64 },
    /// `f(T) = coefficient · √T`.
    Sqrt { coefficient: f64 },
    /// `f(T) = coefficient · √(arms · T · ln T)`, the usual envelope for stochastic bandit agents.
    Envelope { coefficient: f64, arms: usize },
    /// `f(T) = values[T - 1]`, held at the last entry past the end; `f(0) = 0`.
    Table { values: Vec<f64> },
}

impl RegretBudget {
    pub fn validate(&self) -> Result<()> {
        let coefficient_ok = |c: f64| c.is_finite() && c >= 0.0;
        match self {
            RegretBudget::Zero => Ok(()),
            RegretBudget::Constant { coefficient }
            | RegretBudget::Log { coefficient }
            | RegretBudget::Sqrt { coefficient } => {
                if coefficient_ok(*coefficient) {
                    Ok(())
                } else {
                    Err(Error::Config(format!("budget coefficient {coefficient} must be finite and >= 0")))
                }
            }
            RegretBudget::Envelope { coefficient, arms } => {
                if !coefficient_ok(*coefficient) || *arms == 0 {
                    return Err(Error::Config("envelope needs a finite coefficient >= 0 and arms >= 1".into()));
                }
                Ok(())
            }
            RegretBudget::Table { values } => {
                if values.iter().any(|v| !coefficient_ok(*v)) {
                    return Err(Error::Config("budget table entries must be finite and >= 0".into()));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::Config("budget table must be non-decreasing".into()));
                }
                Ok(())
            }
        }
    }

    /// Evaluates `f(rounds)`.
    pub fn eval(&self, rounds: usize) -> f64 {
        match self {
            RegretBudget::Zero => 0.0,
            RegretBudget::Constant { coefficient } => *coefficient,
            RegretBudget::Log { coefficient } => coefficient * (rounds as f64).ln_1p(),
            RegretBudget::Sqrt { coefficient } => coefficient * (rounds as f64).sqrt(),
            RegretBudget::Envelope { coefficient, arms } => {
                let t = rounds as f64;
                coefficient * (*arms as f64 * t * t.ln().max(0.0)).sqrt()
            }
            RegretBudget::Table { values } => match rounds {
                0 => 0.0,
                t => values.get(t - 1).or(values.last()).copied().unwrap_or(0.0),
            },
        }
    }

    /// True when `f(ℓ) = 0` for every `1 ≤ ℓ ≤ rounds`.
    pub fn is_zero_through(&self, rounds: usize) -> bool {
        rounds == 0 || self.eval(rounds) == 0.0
    }

    /// The relaxed budget used by the budget-doubling empty-set policy.
    pub fn doubled(&self) -> RegretBudget {
        let grow = |c: f64| if c > 0.0 { 2.0 * c } else { 1.0 };
        match self {
            RegretBudget::Zero => RegretBudget::Constant { coefficient: 1.0 },
            RegretBudget::Constant { coefficient } => RegretBudget::Constant { coefficient: grow(*coefficient) },
            RegretBudget::Log { coefficient } => RegretBudget::Log { coefficient: grow(*coefficient) },
            RegretBudget::Sqrt { coefficient } => RegretBudget::Sqrt { coefficient: grow(*coefficient) },
            RegretBudget::Envelope { coefficient, arms } => {
                RegretBudget::Envelope { coefficient: grow(*coefficient), arms: *arms }
            }
            RegretBudget::Table { values } => {
                let mut values: Vec<f64> = values.iter().map(|v| grow(*v)).collect();
                if values.is_empty() {
                    values.push(1.0);
                }
                RegretBudget::Table { values }
            }
        }
    }
}

/// One public round: the posted costs and the arm the agent played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub costs: CostVector,
    pub action: ArmIndex,
}

/// The public transcript observed by the predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    k: usize,
    rounds: Vec<RoundRecord>,
}

impl History {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Usage(format!("need at least 2 arms, got {k}")));
        }
        Ok(History { k, rounds: Vec::new() })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    /// Appends the next round; its index is assigned as `len + 1`.
    pub fn push(&mut self, costs: CostVector, action: ArmIndex) -> Result<&RoundRecord> {
        if costs.len() != self.k {
            return Err(Error::Usage(format!("cost vector has {} entries, expected {}", costs.len(), self.k)));
        }
        action.check(self.k)?;
        let t = self.rounds.len() + 1;
        self.rounds.push(RoundRecord { t, costs, action });
        Ok(self.rounds.last().expect("just pushed"))
    }
}

/// `v_i − c_i` for arm `i`.
pub fn utility(v: &ValueVector, c: &CostVector, i: ArmIndex) -> Result<f64> {
    if v.len() != c.len() {
        return Err(Error::Usage(format!("value/cost length mismatch: {} vs {}", v.len(), c.len())));
    }
    i.check(v.len())?;
    Ok(v.get(i) - c.get(i))
}

/// Arm maximising `v_i − c_i`; ties go to the lowest index.
pub fn optimal_arm(v: &ValueVector, c: &CostVector) -> Result<ArmIndex> {
    if v.len() != c.len() {
        return Err(Error::Usage(format!("value/cost length mismatch: {} vs {}", v.len(), c.len())));
    }
    Ok(ArmIndex(argmax_utility(v.as_slice(), c.as_slice())))
}

/// Lowest index attaining `max_i (values[i] − costs[i])`.
#[inline]
pub(crate) fn argmax_utility(values: &[f64], costs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_u = values[0] - costs[0];
    for i in 1..values.len() {
        let u = values[i] - costs[i];
        if u > best_u {
            best = i;
            best_u = u;
        }
    }
    best
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
    fn utility_examples() {
        let u = utility(&vv(&[1.0, 0.0]), &cv(&[0.3, 0.1]), ArmIndex::new(0)).unwrap();
        assert!((u - 0.7).abs() < 1e-15);
        let u = utility(&vv(&[0.5, 0.5]), &cv(&[0.5, 0.5]), ArmIndex::new(1)).unwrap();
        assert_eq!(u, 0.0);
        // second round of the lower-bound construction with H = 2
        let u = utility(&vv(&[0.0, 0.0, 1.0, 1.0]), &cv(&[2.0, 2.0, 0.0, 0.0]), ArmIndex::new(0)).unwrap();
        assert_eq!(u, -2.0);
    }

    #[test]
    fn utility_rejects_bad_index() {
        let err = utility(&vv(&[1.0, 0.0]), &cv(&[0.3, 0.1]), ArmIndex::new(2)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn optimal_arm_examples() {
        assert_eq!(optimal_arm(&vv(&[1.0, 0.0]), &cv(&[0.3, 0.1])).unwrap(), ArmIndex::new(0));
        assert_eq!(optimal_arm(&vv(&[0.5, 0.5]), &cv(&[0.2, 0.2])).unwrap(), ArmIndex::new(0));
        let v = vv(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(optimal_arm(&v, &cv(&[0.0, 0.0, 2.0, 2.0])).unwrap().number(), 2);
    }

    #[test]
    fn optimal_arm_length_mismatch() {
        assert!(optimal_arm(&vv(&[1.0, 0.0]), &cv(&[0.3, 0.1, 0.0])).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(CostVector::new(vec![0.1]).is_err());
        assert!(CostVector::new(vec![0.1, -0.1]).is_err());
        assert!(CostVector::with_cap(vec![0.1, 2.5], 2.0).is_err());
        assert!(ValueVector::new(vec![0.1, 1.1]).is_err());
        assert!(ArmIndex::from_number(0).is_err());
        assert_eq!(ArmIndex::from_number(3).unwrap().index(), 2);
    }

    #[test]
    fn budget_shapes() {
        assert_eq!(RegretBudget::Zero.eval(10), 0.0);
        assert_eq!(RegretBudget::Log { coefficient: 2.0 }.eval(0), 0.0);
        assert_eq!(RegretBudget::Sqrt { coefficient: 2.0 }.eval(0), 0.0);
        assert_eq!(RegretBudget::Sqrt { coefficient: 2.0 }.eval(4), 4.0);
        let envelope = RegretBudget::Envelope { coefficient: 1.0, arms: 2 };
        assert_eq!(envelope.eval(1), 0.0);
        assert!((envelope.eval(3) - (6.0 * 3f64.ln()).sqrt()).abs() < 1e-15);
        let table = RegretBudget::Table { values: vec![0.0, 1.0, 3.0] };
        assert_eq!(table.eval(0), 0.0);
        assert_eq!(table.eval(2), 1.0);
        assert_eq!(table.eval(9), 3.0);
        assert!(RegretBudget::Table { values: vec![1.0, 0.5] }.validate().is_err());
        assert!(RegretBudget::Constant { coefficient: -1.0 }.validate().is_err());
        assert!(table.is_zero_through(1));
        assert!(!table.is_zero_through(2));
    }

    #[test]
    fn budget_is_monotone() {
        let budgets = [
            RegretBudget::Zero,
            RegretBudget::Constant { coefficient: 0.5 },
            RegretBudget::Log { coefficient: 1.5 },
            RegretBudget::Sqrt { coefficient: 0.7 },
            RegretBudget::Envelope { coefficient: 0.3, arms: 3 },
        ];
        for b in &budgets {
            for t in 0..200 {
                assert!(b.eval(t + 1) >= b.eval(t));
                assert!(b.eval(t) >= 0.0);
            }
        }
    }

    #[test]
    fn history_assigns_round_indices() {
        let mut h = History::new(2).unwrap();
        h.push(cv(&[0.5, 0.1]), ArmIndex::new(0)).unwrap();
        h.push(cv(&[0.1, 0.1]), ArmIndex::new(1)).unwrap();
        assert_eq!(h.rounds().iter().map(|r| r.t).collect::<Vec<_>>(), vec![1, 2]);
        assert!(h.push(cv(&[0.1, 0.1, 0.2]), ArmIndex::new(0)).is_err());
        assert!(h.push(cv(&[0.1, 0.1]), ArmIndex::new(2)).is_err());
        assert!(History::new(1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec_in(k: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(lo..hi, k)
        }

        proptest! {
            #[test]
            fn utility_is_affine(
                (v, w, c) in (2usize..6).prop_flat_map(|k| (vec_in(k, 0.0, 1.0), vec_in(k, 0.0, 1.0), vec_in(k, 0.0, 2.0))),
                alpha in 0.0f64..=1.0,
            ) {
                let k = v.len();
                let mix: Vec<f64> = v.iter().zip(&w).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
                let (v, w, mix, c) = (vv(&v), vv(&w), ValueVector::clamped(mix), cv(&c));
                for i in 0..k {
                    let i = ArmIndex::new(i);
                    let lhs = utility(&mix, &c, i).unwrap();
                    let rhs = alpha * utility(&v, &c, i).unwrap() + (1.0 - alpha) * utility(&w, &c, i).unwrap();
                    prop_assert!((lhs - rhs).abs() < 1e-12);
                }
            }

            #[test]
            fn optimal_arm_attains_max_and_ignores_shift(
                (v, c) in (2usize..6).prop_flat_map(|k| (vec_in(k, 0.0, 1.0), vec_in(k, 0.0, 1.0))),
                shift in 0.0f64..1.0,
            ) {
                let (vv_, cv_) = (vv(&v), cv(&c));
                let o = optimal_arm(&vv_, &cv_).unwrap();
                let best = (0..v.len()).map(|i| v[i] - c[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(utility(&vv_, &cv_, o).unwrap(), best);
                // shifted costs (exact ties could resolve differently after rounding, so compare utilities)
                let shifted = cv(&c.iter().map(|x| x + shift).collect::<Vec<_>>());
                let o2 = optimal_arm(&vv_, &shifted).unwrap();
                prop_assert!((utility(&vv_, &cv_, o2).unwrap() - best).abs() < 1e-12);
            }
        }
    }
}

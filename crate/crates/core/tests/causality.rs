//! The predictor commits before it sees the agent's action.

use std::cell::RefCell;
use std::rc::Rc;

use agent_predict::agents::{Agent, AgentSpec, RewardModel};
use agent_predict::experiment::{run_loop, LoopOptions, Policy, RoundPredictor};
use agent_predict::predictor::{Prediction, PredictorConfig, PredictorState};
use agent_predict::rng::rng_from;
use agent_predict::types::{ArmIndex, CostVector, RegretBudget, ValueVector};
use agent_predict::Result;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    Predict(usize),
    Act(usize),
    Reward(usize),
    Observe(usize),
}

type Log = Rc<RefCell<Vec<Event>>>;

struct Watched<T> {
    inner: T,
    log: Log,
    round: usize,
}

impl RoundPredictor for Watched<PredictorState> {
    fn predict(&mut self, c: &CostVector) -> Result<Prediction> {
        self.round += 1;
        self.log.borrow_mut().push(Event::Predict(self.round));
        self.inner.predict(c)
    }

    fn observe(&mut self, c: &CostVector, a: ArmIndex) -> Result<()> {
        self.log.borrow_mut().push(Event::Observe(self.round));
        self.inner.observe(c, a)
    }
}

impl Policy for Watched<Agent> {
    fn act(&mut self, c: &CostVector) -> Result<ArmIndex> {
        self.round += 1;
        self.log.borrow_mut().push(Event::Act(self.round));
        self.inner.act(c)
    }

    fn absorb_reward(&mut self, a: ArmIndex) -> Result<()> {
        self.log.borrow_mut().push(Event::Reward(self.round));
        self.inner.absorb_reward(a)
    }
}

fn costs(seed: u64, k: usize, rounds: usize) -> Vec<CostVector> {
    let mut rng = rng_from(seed);
    (0..rounds).map(|_| CostVector::new((0..k).map(|_| rng.random::<f64>()).collect()).unwrap()).collect()
}

fn small_predictor(k: usize, budget: RegretBudget) -> PredictorState {
    let mut cfg = PredictorConfig::new(k, budget, 3);
    cfg.sampler.n_samples = 300;
    PredictorState::new(k, cfg).unwrap()
}

#[test]
fn every_round_predicts_before_the_agent_acts() {
    let k = 3;
    let rounds = 12;
    let v = ValueVector::new(vec![0.7, 0.4, 0.9]).unwrap();
    let log: Log = Rc::default();
    let mut predictor =
        Watched { inner: small_predictor(k, RegretBudget::Log { coefficient: 1.0 }), log: log.clone(), round: 0 };
    let agent = Agent::new(AgentSpec::EpsilonGreedy { epsilon: 0.2 }, RewardModel::Bernoulli, v.clone(), 9).unwrap();
    let mut agent = Watched { inner: agent, log: log.clone(), round: 0 };
    let cs = costs(1, k, rounds);
    let opts = LoopOptions::default();
    let (logs, transcript) =
        run_loop(k, rounds, |t| Ok(cs[t - 1].clone()), &mut predictor, &mut agent, &v, opts).unwrap();
    assert_eq!(logs.len(), rounds);
    assert_eq!(transcript.len(), rounds);

    let events = log.borrow();
    let expected: Vec<Event> =
        (1..=rounds).flat_map(|t| [Event::Predict(t), Event::Act(t), Event::Reward(t), Event::Observe(t)]).collect();
    assert_eq!(*events, expected);
}

#[test]
fn a_prediction_ignores_the_action_it_predicts() {
    // two agents that agree on rounds 1..=5 and differ from round 6 on
    let k = 3;
    let first: Vec<usize> = vec![3, 1, 3, 3, 1, 3, 3, 3];
    let mut second = first.clone();
    second[5] = 2;
    second[6] = 2;
    let cs = costs(2, k, first.len());
    let v = ValueVector::new(vec![0.5, 0.5, 0.5]).unwrap();
    let predictions = |script: Vec<usize>| {
        let mut predictor = small_predictor(k, RegretBudget::Constant { coefficient: 5.0 });
        let mut agent =
            Agent::new(AgentSpec::Scripted { actions: script }, RewardModel::Deterministic, v.clone(), 0).unwrap();
        let (logs, _) =
            run_loop(k, cs.len(), |t| Ok(cs[t - 1].clone()), &mut predictor, &mut agent, &v, LoopOptions::default())
                .unwrap();
        logs.into_iter().map(|l| l.p).collect::<Vec<_>>()
    };
    let a = predictions(first);
    let b = predictions(second);
    // round 6 is predicted from rounds 1..=5 only, so it cannot differ
    assert_eq!(a[..6], b[..6]);
}

//! Online decision problems.
//!
//! At each round the learner commits to a [`MixedAction`], the adversary picks a
//! [`RewardFunction`] without seeing the sampled action, an action is drawn and the
//! full reward vector is revealed to the learner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matcher::StepTrace;
use crate::{Error, Result};

/// Probability sums may drift this far from one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Action sampling of the (first) learner.
    Learner = 0,
    Adversary = 1,
    /// Estimator noise / features of the (first) learner.
    Estimator = 2,
    /// Action sampling of the second player in self-play.
    SecondLearner = 3,
    SecondEstimator = 4,
}

/// ChaCha8 seeded with `seed`, positioned on `stream`.
pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// The action set `A` (by size) and the reward bound `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSystem {
    num_actions: usize,
    reward_bound: f64,
}

impl RewardSystem {
    pub fn new(num_actions: usize, reward_bound: f64) -> Result<Self> {
        if num_actions < 2 {
            return Err(Error::invalid(
                "reward system",
                format!("need at least 2 actions, got {num_actions}"),
            ));
        }
        if !(reward_bound.is_finite() && reward_bound > 0.0) {
            return Err(Error::invalid(
                "reward system",
                format!("reward bound must be positive and finite, got {reward_bound}"),
            ));
        }
        Ok(Self {
            num_actions,
            reward_bound,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }
}

/// A distribution over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedAction(Vec<f64>);

impl MixedAction {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("mixed action", "empty distribution"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::invalid(
                "mixed action",
                format!("entry {i} is {p}, expected a nonnegative probability"),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(
                "mixed action",
                format!("probabilities sum to {total}"),
            ));
        }
        Ok(Self(probs))
    }

    pub fn uniform(num_actions: usize) -> Self {
        Self(vec![1.0 / num_actions as f64; num_actions])
    }

    /// The point mass `δ_a`.
    pub fn point(num_actions: usize, action: usize) -> Self {
        let mut probs = vec![0.0; num_actions];
        probs[action] = 1.0;
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Rewards for every action in one round. Entries lie in `[0, U]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFunction(Vec<f64>);

impl RewardFunction {
    pub fn new(system: &RewardSystem, values: Vec<f64>) -> Result<Self> {
        Error::check_len("reward function", system.num_actions(), values.len())?;
        let bound = system.reward_bound();
        for (action, &value) in values.iter().enumerate() {
            if !(0.0..=bound).contains(&value) {
                return Err(Error::RewardRange {
                    action,
                    value,
                    bound,
                });
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sampled actions and revealed rewards so far. Append-only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    steps: Vec<(usize, RewardFunction)>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, action: usize, reward: RewardFunction) {
        self.steps.push((action, reward));
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[(usize, RewardFunction)] {
        &self.steps
    }

    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|(a, _)| *a)
    }
}

/// Draws an action index from `q`.
///
/// Uses one uniform draw and a cumulative scan, so the outcome is a pure
/// function of the generator state.
pub fn sample_action<R: Rng + ?Sized>(q: &MixedAction, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in q.probs().iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // u landed in the rounding gap above the final partial sum
    last_positive
}

/// What a learner commits to for the coming round.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub q: MixedAction,
    /// Link outputs and diagnostics, for learners that have them.
    pub trace: Option<StepTrace>,
}

/// An online learning algorithm: a map from the history before round `t` to a
/// mixed action, maintained incrementally through [`Learner::observe`].
pub trait Learner {
    fn system(&self) -> &RewardSystem;

    /// Mixed action for the next round. Must depend only on what was observed.
    fn decide(&mut self) -> Result<Decision>;

    fn observe(&mut self, action: usize, reward: &RewardFunction) -> Result<()>;
}

/// A reward stream. Sees the history of earlier rounds, never the current sample.
pub trait Adversary {
    /// Raw reward values for the next round; [`run_odp`] validates the range.
    fn next_rewards(&mut self, history: &History) -> Result<Vec<f64>>;
}

/// Plays uniformly at random forever.
#[derive(Debug, Clone)]
pub struct UniformLearner {
    system: RewardSystem,
}

impl UniformLearner {
    pub fn new(system: RewardSystem) -> Self {
        Self { system }
    }
}

impl Learner for UniformLearner {
    fn system(&self) -> &RewardSystem {
        &self.system
    }

    fn decide(&mut self) -> Result<Decision> {
        Ok(Decision {
            q: MixedAction::uniform(self.system.num_actions()),
            trace: None,
        })
    }

    fn observe(&mut self, _action: usize, _reward: &RewardFunction) -> Result<()> {
        Ok(())
    }
}

/// One round of an online decision problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    /// Round index, starting at 1.
    pub t: usize,
    pub q: MixedAction,
    pub action: usize,
    pub reward: RewardFunction,
    pub trace: Option<StepTrace>,
}

/// Runs `horizon` rounds of learner against adversary.
///
/// The adversary commits to the round's rewards before the action is sampled.
pub fn run_odp<R: Rng + ?Sized>(
    learner: &mut dyn Learner,
    adversary: &mut dyn Adversary,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<MatchRecord>> {
    let mut records = Vec::with_capacity(horizon);
    run_odp_with(learner, adversary, horizon, rng, |rec| {
        records.push(rec);
        Ok(())
    })?;
    Ok(records)
}

/// [`run_odp`], handing each record to `sink` instead of collecting them.
pub fn run_odp_with<R: Rng + ?Sized>(
    learner: &mut dyn Learner,
    adversary: &mut dyn Adversary,
    horizon: usize,
    rng: &mut R,
    mut sink: impl FnMut(MatchRecord) -> Result<()>,
) -> Result<()> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let system = *learner.system();
    let mut history = History::new();
    for t in 1..=horizon {
        let Decision { q, trace } = learner.decide()?;
        Error::check_len("learner output", system.num_actions(), q.len())?;
        let reward = RewardFunction::new(&system, adversary.next_rewards(&history)?)?;
        let action = sample_action(&q, rng);
        learner.observe(action, &reward)?;
        history.push(action, reward.clone());
        sink(MatchRecord {
            t,
            q,
            action,
            reward,
            trace,
        })?;
    }
    Ok(())
}

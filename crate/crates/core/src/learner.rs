//! The act/observe interface shared by every bandit learner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Context;
use crate::surrogate::ActionDistribution;

/// What the learner played in a round.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub action: usize,
    pub distribution: ActionDistribution,
}

impl Action {
    /// Probability with which the played action was drawn.
    pub fn propensity(&self) -> f64 {
        self.distribution.prob(self.action)
    }
}

/// The learner's bookkeeping after seeing the played action's loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    /// Played coordinate of the loss estimate handed to the update.
    pub estimate: f64,
    /// Geometric resampling count, for learners that use it.
    pub resample_count: Option<usize>,
}

/// A contextual bandit learner: `act` on a context, then `observe` the loss.
pub trait Learner {
    fn actions(&self) -> usize;
    fn act(&mut self, x: &Context) -> Result<Action>;
    /// Must follow a successful `act`.
    fn observe(&mut self, loss: f64) -> Result<Feedback>;
}

/// Validates an observed loss; drift within 1e-9 of `[0, 1]` is clamped.
pub(crate) fn checked_loss(loss: f64) -> Result<f64> {
    const SLACK: f64 = 1e-9;
    if (0.0..=1.0).contains(&loss) {
        Ok(loss)
    } else if (-SLACK..=1.0 + SLACK).contains(&loss) {
        log::warn!("clamping observed loss {loss} into [0, 1]");
        Ok(loss.clamp(0.0, 1.0))
    } else {
        Err(Error::domain(format!("observed loss {loss} outside [0, 1]")))
    }
}

/// Plays uniformly at random; the reference point for regret curves.
#[derive(Debug, Clone)]
pub struct UniformBaseline {
    actions: usize,
    rng: ChaCha8Rng,
    pending: Option<usize>,
}

impl UniformBaseline {
    pub fn new(actions: usize, seed: u64) -> Self {
        UniformBaseline { actions, rng: ChaCha8Rng::seed_from_u64(seed), pending: None }
    }
}

impl Learner for UniformBaseline {
    fn actions(&self) -> usize {
        self.actions
    }

    fn act(&mut self, _x: &Context) -> Result<Action> {
        let distribution = ActionDistribution::uniform(self.actions);
        let action = distribution.sample(&mut self.rng);
        self.pending = Some(action);
        Ok(Action { action, distribution })
    }

    fn observe(&mut self, loss: f64) -> Result<Feedback> {
        let loss = checked_loss(loss)?;
        self.pending.take().ok_or_else(|| Error::domain("observe called before act"))?;
        Ok(Feedback { estimate: loss * self.actions as f64, resample_count: None })
    }
}

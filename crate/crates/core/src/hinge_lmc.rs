//! Hinge-LMC: continuous exponential weights over the parameter ball, sampled
//! with smoothed projected Langevin Monte Carlo.
//!
//! Each round:
//! 1. draw `θ_t` from the current potential and play `a_t ~ p_t^μ(·; θ_t)`,
//!    where `p_t = π_hinge(f(x_t; θ_t))` smoothed by `μ`;
//! 2. redraw `(θ̃, ã)` from the same potential until `ã = a_t` or `M` trials
//!    pass, giving the resample count `m_t`;
//! 3. add `ℓ̃_t = ℓ_t(a_t)·m_t·e_{a_t}` to the potential.
//!
//! Resampling either starts a fresh chain per trial ([`Resampling::Faithful`])
//! or continues the round's chain past burn-in and takes every `thin`-th
//! iterate ([`Resampling::Fast`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::learner::{checked_loss, Action, Feedback, Learner};
use crate::model::{Context, ModelSpec, ParamVector};
use crate::sampler::{lmc_sample, LmcChain, LmcConfig, Potential};
use crate::surrogate::{induced_policy_hinge, smooth, ActionDistribution, LossVector, Margin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Resampling {
    /// One chain per round; trial `i` uses the iterate `N + i·thin`.
    Fast { thin: usize },
    /// A fresh `N`-step chain for every trial.
    Faithful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HingeLmcConfig {
    pub eta: f64,
    pub gamma: Margin,
    pub mu: f64,
    /// Truncation `M` of the geometric resampling loop.
    pub resample_cap: usize,
    pub lmc: LmcConfig,
    pub resampling: Resampling,
    pub seed: u64,
}

impl HingeLmcConfig {
    /// `η = 0.5 γ √(d / (K² B² T))`, `μ = 1/(K√T)`, `M = ⌈√T⌉`, practical LMC
    /// settings and fast resampling with `thin = ⌈N/M⌉`.
    pub fn practical(spec: &ModelSpec, horizon: usize, gamma: Margin, seed: u64) -> Self {
        let t = horizon.max(1) as f64;
        let k = spec.actions() as f64;
        let b = spec.score_bound();
        let eta = 0.5 * gamma.get() * (spec.dim() as f64 / (k * k * b * b * t)).sqrt();
        let resample_cap = t.sqrt().ceil() as usize;
        let lmc = LmcConfig::practical(spec.radius());
        HingeLmcConfig {
            eta,
            gamma,
            mu: 1.0 / (k * t.sqrt()),
            resample_cap,
            resampling: Resampling::Fast { thin: lmc.steps.div_ceil(resample_cap).max(1) },
            lmc,
            seed,
        }
    }

    pub fn validate(&self, actions: usize) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::config("eta must be positive"));
        }
        if !(0.0..=1.0 / actions as f64).contains(&self.mu) {
            return Err(Error::config(format!("mu = {} outside [0, 1/K]", self.mu)));
        }
        if self.resample_cap == 0 {
            return Err(Error::config("resample_cap must be at least 1"));
        }
        if let Resampling::Fast { thin: 0 } = self.resampling {
            return Err(Error::config("fast resampling needs thin >= 1"));
        }
        self.lmc.validate()
    }
}

/// Where parameter draws come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSource {
    Langevin,
    /// Every draw returns this point; isolates the bandit logic from sampling.
    Fixed(ParamVector),
}

/// The successive parameter draws of one round.
#[derive(Debug, Clone)]
enum ThetaStream {
    Fixed(ParamVector),
    Fresh,
    Pool { chain: LmcChain, thin: usize },
}

impl ThetaStream {
    fn draw<R: Rng + ?Sized>(&mut self, potential: &Potential, cfg: &LmcConfig, rng: &mut R) -> Result<ParamVector> {
        match self {
            ThetaStream::Fixed(theta) => Ok(theta.clone()),
            ThetaStream::Fresh => lmc_sample(potential, cfg, rng),
            ThetaStream::Pool { chain, thin } => {
                let steps = if chain.step_index() == 0 { cfg.steps } else { *thin };
                chain.run(potential, cfg, steps, rng);
                Ok(chain.theta())
            }
        }
    }
}

/// Outcome of the action-selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub distribution: ActionDistribution,
    pub theta: ParamVector,
}

/// Everything decided and estimated in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundDecision {
    pub action: usize,
    pub distribution: ActionDistribution,
    pub theta: ParamVector,
    pub observed_loss: f64,
    pub resample_count: usize,
    pub loss_estimate: LossVector,
}

#[derive(Debug, Clone)]
struct Pending {
    x: Context,
    choice: Choice,
    stream: ThetaStream,
}

/// Counts draws until `target` is sampled again, capped at `cap`.
///
/// `draw` supplies a fresh action distribution per trial.
pub fn geometric_resample<R, F>(target: usize, cap: usize, mut draw: F, rng: &mut R) -> Result<usize>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<ActionDistribution>,
{
    if cap == 0 {
        return Err(Error::domain("resample cap must be at least 1"));
    }
    for m in 1..=cap {
        let p = draw(rng)?;
        if target >= p.len() {
            return Err(Error::domain(format!("action {target} out of range")));
        }
        if p.sample(rng) == target {
            return Ok(m);
        }
    }
    Ok(cap)
}

#[derive(Debug, Clone)]
pub struct HingeLmc {
    spec: ModelSpec,
    config: HingeLmcConfig,
    potential: Potential,
    source: ThetaSource,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
}

impl HingeLmc {
    pub fn new(spec: ModelSpec, config: HingeLmcConfig) -> Result<Self> {
        config.validate(spec.actions())?;
        let potential = Potential::new(spec, config.eta, config.gamma)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(HingeLmc { spec, config, potential, source: ThetaSource::Langevin, rng, pending: None })
    }

    /// Replaces the Langevin sampler with a constant parameter.
    pub fn with_fixed_theta(mut self, theta: ParamVector) -> Result<Self> {
        check_dim(self.spec.dim(), theta.len())?;
        self.source = ThetaSource::Fixed(theta);
        Ok(self)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn config(&self) -> &HingeLmcConfig {
        &self.config
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// Completed rounds.
    pub fn rounds(&self) -> usize {
        self.potential.len()
    }

    /// `p^μ(·; θ)` at context `x`.
    pub fn distribution_at(&self, theta: &ParamVector, x: &Context) -> Result<ActionDistribution> {
        let scores = self.spec.predict(theta, x)?;
        smooth(&induced_policy_hinge(&scores, self.config.gamma), self.config.mu)
    }

    fn new_stream(&self) -> ThetaStream {
        match (&self.source, self.config.resampling) {
            (ThetaSource::Fixed(theta), _) => ThetaStream::Fixed(theta.clone()),
            (ThetaSource::Langevin, Resampling::Faithful) => ThetaStream::Fresh,
            (ThetaSource::Langevin, Resampling::Fast { thin }) => {
                ThetaStream::Pool { chain: LmcChain::new(&self.spec), thin }
            }
        }
    }

    /// Draws `θ_t`, forms `p_t^μ` and samples the action to play.
    pub fn choose_action(&mut self, x: &Context) -> Result<Choice> {
        check_dim(self.spec.context_dim(), x.len())?;
        let mut stream = self.new_stream();
        let theta = stream.draw(&self.potential, &self.config.lmc, &mut self.rng)?;
        let distribution = self.distribution_at(&theta, x)?;
        let action = distribution.sample(&mut self.rng);
        let choice = Choice { action, distribution, theta };
        self.pending = Some(Pending { x: x.clone(), choice: choice.clone(), stream });
        Ok(choice)
    }

    /// Resample count `m_t` for the pending round's action.
    pub fn geometric_resample(&mut self) -> Result<usize> {
        let HingeLmc { spec, config, potential, rng, pending, .. } = self;
        let pending = pending.as_mut().ok_or_else(|| Error::domain("no pending round"))?;
        let Pending { x, choice, stream } = pending;
        geometric_resample(
            choice.action,
            config.resample_cap,
            |rng| {
                let theta = stream.draw(potential, &config.lmc, rng)?;
                let scores = spec.predict(&theta, x)?;
                smooth(&induced_policy_hinge(&scores, config.gamma), config.mu)
            },
            rng,
        )
    }

    /// Appends `ℓ̃ = loss·m·e_action` to the potential and returns it.
    pub fn update(
        &mut self,
        x: &Context,
        action: usize,
        observed_loss: f64,
        resample_count: usize,
    ) -> Result<LossVector> {
        let loss = checked_loss(observed_loss)?;
        if !(1..=self.config.resample_cap).contains(&resample_count) {
            return Err(Error::domain(format!(
                "resample count {resample_count} outside [1, {}]",
                self.config.resample_cap
            )));
        }
        let estimate = LossVector::one_hot(self.spec.actions(), action, loss * resample_count as f64)?;
        self.potential.push(x.clone(), estimate.clone())?;
        self.pending = None;
        Ok(estimate)
    }

    fn finish_round(&mut self, observed_loss: f64) -> Result<RoundDecision> {
        let loss = checked_loss(observed_loss)?;
        let m = self.geometric_resample()?;
        let Pending { x, choice, .. } = self.pending.take().ok_or_else(|| Error::domain("no pending round"))?;
        let loss_estimate = self.update(&x, choice.action, loss, m)?;
        Ok(RoundDecision {
            action: choice.action,
            distribution: choice.distribution,
            theta: choice.theta,
            observed_loss: loss,
            resample_count: m,
            loss_estimate,
        })
    }

    /// One full round against a loss oracle for the played action.
    pub fn run_round(&mut self, x: &Context, loss_fn: impl FnOnce(usize) -> f64) -> Result<RoundDecision> {
        let choice = self.choose_action(x)?;
        self.finish_round(loss_fn(choice.action))
    }
}

impl Learner for HingeLmc {
    fn actions(&self) -> usize {
        self.spec.actions()
    }

    fn act(&mut self, x: &Context) -> Result<Action> {
        let choice = self.choose_action(x)?;
        Ok(Action { action: choice.action, distribution: choice.distribution })
    }

    fn observe(&mut self, loss: f64) -> Result<Feedback> {
        let d = self.finish_round(loss)?;
        Ok(Feedback { estimate: d.loss_estimate.values()[d.action], resample_count: Some(d.resample_count) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ModelSpec {
        ModelSpec::new(2, 3, 2.0, 1.0).unwrap()
    }

    fn quick_config(seed: u64) -> HingeLmcConfig {
        let mut cfg = HingeLmcConfig::practical(&spec(), 100, Margin::new(0.5).unwrap(), seed);
        cfg.lmc.steps = 20;
        cfg
    }

    #[test]
    fn practical_defaults() {
        let cfg = HingeLmcConfig::practical(&spec(), 100, Margin::new(0.5).unwrap(), 0);
        assert_eq!(cfg.resample_cap, 10);
        assert!((cfg.mu - 1.0 / 30.0).abs() < 1e-15);
        // 0.5 · 0.5 · √(6 / (9 · 16 · 100))
        assert!((cfg.eta - 0.25 * (6.0f64 / 14_400.0).sqrt()).abs() < 1e-15);
        assert_eq!(cfg.resampling, Resampling::Fast { thin: 40 });
    }

    #[test]
    fn config_validation() {
        let mut cfg = quick_config(0);
        cfg.mu = 0.5;
        assert!(HingeLmc::new(spec(), cfg).is_err());
        let mut cfg = quick_config(0);
        cfg.resample_cap = 0;
        assert!(HingeLmc::new(spec(), cfg).is_err());
    }

    #[test]
    fn full_smoothing_is_uniform() {
        let mut cfg = quick_config(1);
        cfg.mu = 1.0 / 3.0;
        let mut learner = HingeLmc::new(spec(), cfg).unwrap();
        let c = learner.choose_action(&Context::new(vec![0.6, 0.8])).unwrap();
        for &p in c.distribution.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_step_chain_gives_uniform() {
        let mut cfg = quick_config(2);
        cfg.lmc.steps = 0;
        let mut learner = HingeLmc::new(spec(), cfg).unwrap();
        let c = learner.choose_action(&Context::new(vec![0.6, 0.8])).unwrap();
        assert!(c.theta.iter().all(|&v| v == 0.0));
        for &p in c.distribution.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn same_seed_same_choice() {
        let x = Context::new(vec![0.6, 0.8]);
        let mut a = HingeLmc::new(spec(), quick_config(3)).unwrap();
        let mut b = HingeLmc::new(spec(), quick_config(3)).unwrap();
        for _ in 0..5 {
            let da = a.run_round(&x, |act| if act == 0 { 0.0 } else { 1.0 }).unwrap();
            let db = b.run_round(&x, |act| if act == 0 { 0.0 } else { 1.0 }).unwrap();
            assert_eq!(da, db);
        }
        assert_eq!(a.rounds(), 5);
    }

    #[test]
    fn resample_cap_one() {
        let mut cfg = quick_config(4);
        cfg.resample_cap = 1;
        let mut learner = HingeLmc::new(spec(), cfg).unwrap();
        for _ in 0..10 {
            let d = learner.run_round(&Context::new(vec![1.0, 0.0]), |_| 1.0).unwrap();
            assert_eq!(d.resample_count, 1);
        }
    }

    #[test]
    fn degenerate_distribution_matches_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let point = ActionDistribution::new(vec![0.0, 1.0, 0.0]).unwrap();
        for _ in 0..50 {
            let m = geometric_resample(1, 100, |_| Ok(point.clone()), &mut rng).unwrap();
            assert_eq!(m, 1);
        }
        assert!(geometric_resample(1, 0, |_| Ok(point.clone()), &mut rng).is_err());
    }

    #[test]
    fn update_builds_one_hot_estimate() {
        let mut learner = HingeLmc::new(spec(), quick_config(5)).unwrap();
        let x = Context::new(vec![0.0, 1.0]);
        let est = learner.update(&x, 1, 1.0, 3).unwrap();
        assert_eq!(est.values(), &[0.0, 3.0, 0.0]);
        let est = learner.update(&x, 2, 0.0, 2).unwrap();
        assert_eq!(est.values(), &[0.0, 0.0, 0.0]);
        assert!(learner.update(&x, 0, 1.5, 1).is_err());
        assert!(learner.update(&x, 0, 0.5, 0).is_err());
        assert!(learner.update(&x, 0, 0.5, 11).is_err());
        assert_eq!(learner.rounds(), 2);
    }

    #[test]
    fn zero_loss_leaves_potential_value() {
        let mut learner = HingeLmc::new(spec(), quick_config(6)).unwrap();
        let theta = [0.2, -0.1, 0.4, 0.3, -0.5, 0.0];
        let before = learner.potential().value(&theta);
        learner.update(&Context::new(vec![0.6, 0.8]), 0, 0.0, 4).unwrap();
        assert_eq!(learner.potential().value(&theta), before);
    }

    #[test]
    fn estimate_norm_bounded_by_cap() {
        let mut cfg = quick_config(7);
        cfg.mu = 0.01;
        let cap = cfg.resample_cap as f64;
        let mut learner = HingeLmc::new(spec(), cfg).unwrap();
        for t in 0..30 {
            let x = Context::new(vec![(t as f64).cos(), (t as f64).sin()]);
            let d = learner.run_round(&x, |_| 1.0).unwrap();
            assert!(d.loss_estimate.l1() <= cap);
            assert!(d.distribution.probs().iter().all(|&p| p >= 0.01 - 1e-15));
        }
    }

    #[test]
    fn faithful_mode_runs() {
        let mut cfg = quick_config(8);
        cfg.resampling = Resampling::Faithful;
        let mut learner = HingeLmc::new(spec(), cfg).unwrap();
        let d = learner.run_round(&Context::new(vec![1.0, 0.0]), |_| 1.0).unwrap();
        assert!((1..=10).contains(&d.resample_count));
    }
}

//! SmoothFTL: follow-the-leader on importance-weighted hinge losses with
//! doubling epochs and uniform smoothing.
//!
//! Epoch `m` covers rounds `2^m ..= 2^{m+1} - 1` (1-based). At the start of
//! epoch `m ≥ 1` the learner refits `θ̂` by hinge ERM on the samples of epoch
//! `m - 1` only, then plays `(1 - Kμ) π_hinge(f(x; θ̂)) + μ` for the whole
//! epoch. Round 1 is played uniformly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::learner::{checked_loss, Action, Feedback, Learner};
use crate::model::{norm, project_in_place, Context, ModelSpec, ParamVector};
use crate::surrogate::{hinge, induced_policy_hinge, smooth, ActionDistribution, LossVector, Margin};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtlConfig {
    pub gamma: Margin,
    pub mu: f64,
    pub erm_steps: usize,
    /// Scale `c` of the `c·R / (G √k)` subgradient step.
    pub erm_step_size: f64,
    pub seed: u64,
}

impl FtlConfig {
    /// `μ = 1/(K·T^{1/3})` and 2000 ERM steps.
    pub fn practical(spec: &ModelSpec, horizon: usize, gamma: Margin, seed: u64) -> Self {
        FtlConfig {
            gamma,
            mu: 1.0 / (spec.actions() as f64 * (horizon.max(1) as f64).cbrt()),
            erm_steps: 2000,
            erm_step_size: 1.0,
            seed,
        }
    }

    pub fn validate(&self, actions: usize) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0 / actions as f64) {
            return Err(Error::config(format!("mu = {} outside (0, 1/K]", self.mu)));
        }
        if self.erm_steps == 0 {
            return Err(Error::config("erm_steps must be positive"));
        }
        if !(self.erm_step_size.is_finite() && self.erm_step_size > 0.0) {
            return Err(Error::config("erm_step_size must be positive"));
        }
        Ok(())
    }
}

/// Zero-based epoch of 1-based round `t`: `⌊log₂ t⌋`.
pub fn epoch_of_round(t: u64) -> Result<u32> {
    if t == 0 {
        return Err(Error::domain("rounds are numbered from 1"));
    }
    Ok(63 - t.leading_zeros())
}

/// First round of epoch `m`.
pub fn epoch_start(m: u32) -> u64 {
    1u64 << m
}

/// A context with its importance-weighted loss vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub context: Context,
    pub loss_estimate: LossVector,
}

/// `ℓ̂(a) = ℓ(a_t)·1{a = a_t} / p(a_t)`.
pub fn importance_weight(observed_loss: f64, action: usize, p: &ActionDistribution) -> Result<LossVector> {
    if action >= p.len() {
        return Err(Error::domain(format!("action {action} out of range")));
    }
    let propensity = p.prob(action);
    if propensity <= 0.0 {
        return Err(Error::domain(format!("zero propensity for action {action}")));
    }
    LossVector::one_hot(p.len(), action, observed_loss / propensity)
}

/// `Σ_τ ⟨ℓ̂_τ, hinge(f(x_τ; θ))⟩`.
pub fn hinge_objective(samples: &[WeightedSample], spec: &ModelSpec, theta: &[f64], gamma: Margin) -> f64 {
    let mut s = vec![0.0; spec.actions()];
    samples
        .iter()
        .map(|smp| {
            spec.scores_into(theta, &smp.context, &mut s);
            s.iter().zip(smp.loss_estimate.values()).map(|(&v, &l)| l * hinge(v, gamma)).sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmOutcome {
    pub theta: ParamVector,
    pub objective: f64,
    /// Objective of the running average, recorded every 10 steps.
    pub trace: Vec<f64>,
}

/// Projected subgradient descent from the origin with steps `c·R/(G√k)`,
/// returning the uniform average of the iterates.
///
/// `G = Σ_τ ‖ℓ̂_τ‖₁ · L / γ` bounds the objective's subgradients. If the
/// average is worse than the origin, the origin is returned.
pub fn erm_hinge(
    samples: &[WeightedSample],
    spec: &ModelSpec,
    gamma: Margin,
    steps: usize,
    step_size: f64,
) -> Result<ErmOutcome> {
    if samples.is_empty() {
        return Err(Error::domain("hinge ERM needs at least one sample"));
    }
    if steps == 0 {
        return Err(Error::domain("hinge ERM needs at least one step"));
    }
    for smp in samples {
        check_dim(spec.context_dim(), smp.context.len())?;
        check_dim(spec.actions(), smp.loss_estimate.len())?;
    }
    let d = spec.dim();
    let origin = vec![0.0; d];
    let origin_value = hinge_objective(samples, spec, &origin, gamma);
    let lip = samples.iter().map(|s| s.loss_estimate.l1()).sum::<f64>() * spec.lipschitz() / gamma.get();
    if lip == 0.0 {
        return Ok(ErmOutcome { theta: ParamVector::new(origin), objective: origin_value, trace: vec![origin_value] });
    }

    let base = step_size * spec.radius() / lip;
    let mut theta = origin.clone();
    let mut avg = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut scores = vec![0.0; spec.actions()];
    let mut trace = Vec::with_capacity(steps / 10 + 1);
    for k in 1..=steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for smp in samples {
            spec.scores_into(&theta, &smp.context, &mut scores);
            spec.accumulate_subgradient(&scores, &smp.context, smp.loss_estimate.values(), gamma, 1.0, &mut grad);
        }
        let step = base / (k as f64).sqrt();
        theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= step * g);
        project_in_place(&mut theta, spec.radius());
        let w = 1.0 / k as f64;
        avg.iter_mut().zip(&theta).for_each(|(a, t)| *a += w * (t - *a));
        if k % 10 == 0 || k == steps {
            trace.push(hinge_objective(samples, spec, &avg, gamma));
        }
    }
    let value = *trace.last().expect("at least one trace entry");
    let (theta, objective) = if value <= origin_value { (avg, value) } else { (origin, origin_value) };
    debug_assert!(norm(&theta) <= spec.radius() * (1.0 + 1e-12));
    Ok(ErmOutcome { theta: ParamVector::new(theta), objective, trace })
}

/// `smooth(π_hinge(f(x; θ̂)), μ)`.
pub fn policy_for_epoch(
    spec: &ModelSpec,
    theta_hat: &ParamVector,
    x: &Context,
    gamma: Margin,
    mu: f64,
) -> Result<ActionDistribution> {
    let scores = spec.predict(theta_hat, x)?;
    smooth(&induced_policy_hinge(&scores, gamma), mu)
}

/// One ERM refit: which rounds it read and what it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FitEvent {
    /// Round at which the fit happened (first round of the new epoch).
    pub round: u64,
    pub epoch: u32,
    /// Inclusive 1-based round range of the samples used.
    pub data_rounds: (u64, u64),
    pub samples: usize,
    pub objective: f64,
}

#[derive(Debug, Clone)]
struct Pending {
    x: Context,
    action: usize,
    distribution: ActionDistribution,
}

#[derive(Debug, Clone)]
pub struct SmoothFtl {
    spec: ModelSpec,
    config: FtlConfig,
    theta_hat: Option<ParamVector>,
    // samples of the epoch in progress, with their round numbers
    epoch_samples: Vec<(u64, WeightedSample)>,
    round: u64,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
    fits: Vec<FitEvent>,
}

impl SmoothFtl {
    pub fn new(spec: ModelSpec, config: FtlConfig) -> Result<Self> {
        config.validate(spec.actions())?;
        Ok(SmoothFtl {
            spec,
            config,
            theta_hat: None,
            epoch_samples: Vec::new(),
            round: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            pending: None,
            fits: Vec::new(),
        })
    }

    pub fn theta_hat(&self) -> Option<&ParamVector> {
        self.theta_hat.as_ref()
    }

    /// Log of every refit so far.
    pub fn fits(&self) -> &[FitEvent] {
        &self.fits
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    fn refit(&mut self, t: u64, epoch: u32) -> Result<()> {
        let samples: Vec<WeightedSample> = self.epoch_samples.iter().map(|(_, s)| s.clone()).collect();
        let first = self.epoch_samples.first().map_or(0, |(r, _)| *r);
        let last = self.epoch_samples.last().map_or(0, |(r, _)| *r);
        let fit = erm_hinge(&samples, &self.spec, self.config.gamma, self.config.erm_steps, self.config.erm_step_size)?;
        self.fits.push(FitEvent {
            round: t,
            epoch,
            data_rounds: (first, last),
            samples: samples.len(),
            objective: fit.objective,
        });
        self.theta_hat = Some(fit.theta);
        self.epoch_samples.clear();
        Ok(())
    }
}

impl Learner for SmoothFtl {
    fn actions(&self) -> usize {
        self.spec.actions()
    }

    fn act(&mut self, x: &Context) -> Result<Action> {
        check_dim(self.spec.context_dim(), x.len())?;
        let t = self.round + 1;
        let epoch = epoch_of_round(t)?;
        if epoch >= 1 && t == epoch_start(epoch) {
            self.refit(t, epoch)?;
        }
        let distribution = match &self.theta_hat {
            None => ActionDistribution::uniform(self.spec.actions()),
            Some(theta) => policy_for_epoch(&self.spec, theta, x, self.config.gamma, self.config.mu)?,
        };
        let action = distribution.sample(&mut self.rng);
        self.pending = Some(Pending { x: x.clone(), action, distribution: distribution.clone() });
        Ok(Action { action, distribution })
    }

    fn observe(&mut self, loss: f64) -> Result<Feedback> {
        let loss = checked_loss(loss)?;
        let Pending { x, action, distribution } =
            self.pending.take().ok_or_else(|| Error::domain("observe called before act"))?;
        let estimate = importance_weight(loss, action, &distribution)?;
        let value = estimate.values()[action];
        self.round += 1;
        self.epoch_samples.push((self.round, WeightedSample { context: x, loss_estimate: estimate }));
        Ok(Feedback { estimate: value, resample_count: None })
    }
}

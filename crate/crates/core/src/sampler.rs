//! Smoothed projected Langevin Monte Carlo for the exponential-weights density
//! `P(θ) ∝ exp(-F(θ))` with
//!
//! ```text
//!   F(θ) = η Σ_τ ⟨ℓ̃_τ, hinge(f(x_τ; θ))⟩
//! ```
//!
//! Each step draws a fresh batch `z_1..z_m ~ N(0, u² I)`, forms the smoothed
//! ridge-regularized surrogate `F̃_k(θ) = (1/m) Σ_i F(θ + z_i) + (λ/2)‖θ‖²`,
//! and applies
//!
//! ```text
//!   θ_k = P_Θ(θ_{k-1} - (α/2) ∇F̃_k(θ_{k-1}) + √α ξ_k),   ξ_k ~ N(0, I)
//! ```
//!
//! starting from the origin. The Gaussian noise is drawn coordinate by
//! coordinate from the caller's stream (batch first, then `ξ_k`), so a fixed
//! seed reproduces the chain exactly.

use std::sync::atomic::{AtomicBool, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{project_in_place, Context, ModelSpec, ParamVector};
use crate::surrogate::{hinge, LossVector, Margin};

/// Accumulated exponential-weights energy over past rounds.
#[derive(Debug, Clone)]
pub struct Potential {
    spec: ModelSpec,
    eta: f64,
    gamma: Margin,
    history: Vec<(Context, LossVector)>,
    // rounds with a nonzero loss vector, flattened for the gradient loop
    active_x: Vec<f64>,
    active_loss: Vec<f64>,
    max_loss_l1: f64,
}

impl Potential {
    pub fn new(spec: ModelSpec, eta: f64, gamma: Margin) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::domain(format!("learning rate must be > 0, got {eta}")));
        }
        Ok(Potential {
            spec,
            eta,
            gamma,
            history: Vec::new(),
            active_x: Vec::new(),
            active_loss: Vec::new(),
            max_loss_l1: 0.0,
        })
    }

    pub fn push(&mut self, x: Context, loss: LossVector) -> Result<()> {
        check_dim(self.spec.context_dim(), x.len())?;
        check_dim(self.spec.actions(), loss.len())?;
        if loss.values().iter().any(|&l| l != 0.0) {
            self.active_x.extend_from_slice(&x);
            self.active_loss.extend_from_slice(loss.values());
        }
        self.max_loss_l1 = self.max_loss_l1.max(loss.l1());
        self.history.push((x, loss));
        Ok(())
    }

    #[inline]
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    #[inline]
    pub fn eta(&self) -> f64 {
        self.eta
    }

    #[inline]
    pub fn gamma(&self) -> Margin {
        self.gamma
    }

    pub fn history(&self) -> &[(Context, LossVector)] {
        &self.history
    }

    /// Number of accumulated rounds.
    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Largest `‖ℓ̃_τ‖₁` seen so far.
    pub fn max_loss_l1(&self) -> f64 {
        self.max_loss_l1
    }

    fn active_rounds(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.active_x.chunks_exact(self.spec.context_dim()).zip(self.active_loss.chunks_exact(self.spec.actions()))
    }

    /// `F(θ)`, evaluated exactly over the whole history.
    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut s = vec![0.0; self.spec.actions()];
        let mut total = 0.0;
        for (x, loss) in self.active_rounds() {
            self.spec.scores_into(theta, x, &mut s);
            total += s.iter().zip(loss).map(|(&v, &l)| l * hinge(v, self.gamma)).sum::<f64>();
        }
        self.eta * total
    }

    /// Adds `scale · ∇F(θ)` into `out`.
    pub(crate) fn add_subgradient(&self, theta: &[f64], scale: f64, scores: &mut [f64], out: &mut [f64]) {
        let c = scale * self.eta;
        for (x, loss) in self.active_rounds() {
            self.spec.scores_into(theta, x, scores);
            self.spec.accumulate_subgradient(scores, x, loss, self.gamma, c, out);
        }
    }

    /// Subgradient of `F` at `θ`.
    pub fn subgradient(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        check_dim(self.spec.dim(), theta.len())?;
        let mut out = vec![0.0; self.spec.dim()];
        let mut s = vec![0.0; self.spec.actions()];
        self.add_subgradient(theta, 1.0, &mut s, &mut out);
        Ok(out)
    }

    fn has_active_terms(&self) -> bool {
        !self.active_loss.is_empty()
    }
}

/// Gradient of `(1/m) Σ_i F(θ + z_i) + (λ/2)‖θ‖²` for a given noise batch.
pub fn smoothed_regularized_subgrad(
    potential: &Potential,
    theta: &ParamVector,
    z_batch: &[Vec<f64>],
    ridge: f64,
) -> Result<Vec<f64>> {
    let d = potential.spec.dim();
    check_dim(d, theta.len())?;
    if z_batch.is_empty() {
        return Err(Error::domain("smoothing batch must be nonempty"));
    }
    let mut grad = vec![0.0; d];
    let mut shifted = vec![0.0; d];
    let mut s = vec![0.0; potential.spec.actions()];
    let w = 1.0 / z_batch.len() as f64;
    for z in z_batch {
        check_dim(d, z.len())?;
        for ((o, t), zi) in shifted.iter_mut().zip(theta.iter()).zip(z) {
            *o = t + zi;
        }
        potential.add_subgradient(&shifted, w, &mut s, &mut grad);
    }
    for (g, t) in grad.iter_mut().zip(theta.iter()) {
        *g += ridge * t;
    }
    Ok(grad)
}

/// Settings for one LMC call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmcConfig {
    /// Smoothing batch size `m`.
    pub smoothing_samples: usize,
    /// Per-coordinate std `u` of the smoothing noise.
    pub smoothing_width: f64,
    /// Ridge weight `λ`.
    pub ridge: f64,
    /// Number of steps `N`.
    pub steps: usize,
    /// Step size `α`.
    pub step_size: f64,
    /// Set when the values came from [`theoretical_params`].
    #[serde(default)]
    pub theoretical_mode: bool,
}

impl LmcConfig {
    /// Practical defaults: `N = 400`, `m = 8`, `u = 0.05·R`, `λ = 1e-3`, `α = R²/N`.
    pub fn practical(radius: f64) -> Self {
        let steps = 400;
        LmcConfig {
            smoothing_samples: 8,
            smoothing_width: 0.05 * radius,
            ridge: 1e-3,
            steps,
            step_size: radius * radius / steps as f64,
            theoretical_mode: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.smoothing_samples == 0 {
            return Err(Error::config("smoothing_samples must be positive"));
        }
        if !(self.smoothing_width.is_finite() && self.smoothing_width > 0.0) {
            return Err(Error::config("smoothing_width must be positive"));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::config("ridge must be nonnegative"));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::config("step_size must be positive"));
        }
        Ok(())
    }

    /// Largest step for which one gradient step on the smoothed potential is
    /// contractive: `2 / (η T B_ℓ L / (u γ) + λ)`.
    pub fn contractive_step_bound(&self, potential: &Potential) -> f64 {
        let smooth = potential.eta * potential.len() as f64 * potential.max_loss_l1 * potential.spec.lipschitz()
            / (self.smoothing_width * potential.gamma.get());
        2.0 / (smooth + self.ridge)
    }
}

static STEP_WARNED: AtomicBool = AtomicBool::new(false);

/// State of a running chain; the iterate always lies in the ball.
#[derive(Debug, Clone)]
pub struct LmcChain {
    theta: Vec<f64>,
    step_index: usize,
    shifted: Vec<f64>,
    grad: Vec<f64>,
    scores: Vec<f64>,
}

impl LmcChain {
    pub fn new(spec: &ModelSpec) -> Self {
        let d = spec.dim();
        LmcChain {
            theta: vec![0.0; d],
            step_index: 0,
            shifted: vec![0.0; d],
            grad: vec![0.0; d],
            scores: vec![0.0; spec.actions()],
        }
    }

    pub fn theta(&self) -> ParamVector {
        ParamVector::new(self.theta.clone())
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// One projected Langevin step on a freshly smoothed potential.
    pub fn step<R: Rng + ?Sized>(&mut self, potential: &Potential, cfg: &LmcConfig, rng: &mut R) {
        let d = self.theta.len();
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        // an empty potential has zero gradient under any perturbation
        if potential.has_active_terms() {
            let w = 1.0 / cfg.smoothing_samples as f64;
            for _ in 0..cfg.smoothing_samples {
                for (o, t) in self.shifted.iter_mut().zip(&self.theta) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = t + cfg.smoothing_width * z;
                }
                potential.add_subgradient(&self.shifted, w, &mut self.scores, &mut self.grad);
            }
        }
        let half = 0.5 * cfg.step_size;
        let noise = cfg.step_size.sqrt();
        for i in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            let g = self.grad[i] + cfg.ridge * self.theta[i];
            self.theta[i] += -half * g + noise * xi;
        }
        project_in_place(&mut self.theta, potential.spec.radius());
        self.step_index += 1;
    }

    pub fn run<R: Rng + ?Sized>(&mut self, potential: &Potential, cfg: &LmcConfig, steps: usize, rng: &mut R) {
        for _ in 0..steps {
            self.step(potential, cfg, rng);
        }
    }
}

fn warn_step_size(potential: &Potential, cfg: &LmcConfig) {
    let bound = cfg.contractive_step_bound(potential);
    if cfg.step_size > bound && !STEP_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!(
            "LMC step size {} exceeds the contractive bound {bound:.3e}; further warnings suppressed",
            cfg.step_size
        );
    }
}

/// Runs `cfg.steps` steps from the origin and returns the final iterate.
pub fn lmc_sample<R: Rng + ?Sized>(potential: &Potential, cfg: &LmcConfig, rng: &mut R) -> Result<ParamVector> {
    cfg.validate()?;
    warn_step_size(potential, cfg);
    let mut chain = LmcChain::new(&potential.spec);
    chain.run(potential, cfg, cfg.steps, rng);
    Ok(chain.theta())
}

/// Problem constants entering the worst-case parameter formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub horizon: f64,
    pub dim: usize,
    pub actions: usize,
    pub radius: f64,
    pub lipschitz: f64,
    pub score_bound: f64,
    pub gamma: f64,
    /// Bound `B_ℓ` on `‖ℓ̃‖₁`.
    pub loss_bound: f64,
    /// Learning rate; computed from the horizon when absent.
    pub eta: Option<f64>,
}

impl TheoryInputs {
    pub fn from_spec(horizon: usize, spec: &ModelSpec, gamma: Margin, eta: Option<f64>, loss_bound: f64) -> Self {
        TheoryInputs {
            horizon: horizon as f64,
            dim: spec.dim(),
            actions: spec.actions(),
            radius: spec.radius(),
            lipschitz: spec.lipschitz(),
            score_bound: spec.score_bound(),
            gamma: gamma.get(),
            loss_bound,
            eta,
        }
    }
}

/// The worst-case parameter settings, with the unspecified `Õ` constants set
/// to 1 and every polylog factor replaced by `max(1, ln(RLTK/γ))`.
///
/// These are for inspection: `steps` grows like `T⁶ d¹²` and is not meant to
/// be executed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalParams {
    pub eta: f64,
    pub mu: f64,
    /// `√T`; the learner uses its ceiling.
    pub resample_cap: f64,
    pub smoothing_width: f64,
    pub ridge: f64,
    pub step_size: f64,
    pub steps: f64,
    pub smoothing_samples: f64,
    pub log_factor: f64,
    /// Always set: the constants above are placeholders.
    pub constants_unspecified: bool,
}

impl TheoreticalParams {
    /// Saturating conversion into a runnable (but impractically slow) config.
    pub fn lmc_config(&self) -> LmcConfig {
        LmcConfig {
            smoothing_samples: saturating_count(self.smoothing_samples),
            smoothing_width: self.smoothing_width,
            ridge: self.ridge,
            steps: saturating_count(self.steps),
            step_size: self.step_size,
            theoretical_mode: true,
        }
    }
}

fn saturating_count(v: f64) -> usize {
    if v >= usize::MAX as f64 {
        usize::MAX
    } else {
        v.ceil().max(1.0) as usize
    }
}

pub fn theoretical_params(inp: &TheoryInputs) -> Result<TheoreticalParams> {
    let positive = [
        inp.horizon,
        inp.dim as f64,
        inp.actions as f64,
        inp.radius,
        inp.lipschitz,
        inp.score_bound,
        inp.gamma,
        inp.loss_bound,
    ];
    if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || inp.eta.is_some_and(|e| e.is_nan() || e <= 0.0) {
        return Err(Error::domain("theoretical parameters need positive inputs"));
    }
    let t = inp.horizon;
    let d = inp.dim as f64;
    let k = inp.actions as f64;
    let (r, l, b, g, bl) = (inp.radius, inp.lipschitz, inp.score_bound, inp.gamma, inp.loss_bound);
    let log_factor = (r * l * t * k / g).ln().max(1.0);
    let eta = inp.eta.unwrap_or_else(|| (d * g * g * log_factor / (5.0 * k * k * b * b * t)).sqrt());
    let u = 1.0 / (t.powf(1.5) * l * bl * r * eta * d.sqrt());
    let ridge = 1.0 / (8.0 * t.sqrt() * r.powi(3));
    let steps = (r.powi(18) * l.powi(12) * t.powi(6) * d.powi(12) + r.powi(24) * l.powi(48) * d.powi(12) / k.powi(24))
        * log_factor;
    let smoothing_samples = t.powi(3) * d * r.powi(4) * l * l * bl * bl / (k * g).powi(2) * log_factor;
    Ok(TheoreticalParams {
        eta,
        mu: 1.0 / (k * t.sqrt()),
        resample_cap: t.sqrt(),
        smoothing_width: u,
        ridge,
        step_size: r * r / steps,
        steps,
        smoothing_samples,
        log_factor,
        constants_unspecified: true,
    })
}

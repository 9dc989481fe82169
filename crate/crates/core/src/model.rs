//! Linear sum-to-zero regressor `f(x;θ)` over a Euclidean parameter ball.
//!
//! The parameter vector holds `K` contiguous blocks of length `d'`; block `a`
//! produces the raw score `g_a = ⟨θ_a, x⟩` and the output is the centered
//! vector `g - mean(g)`. The class is linear in `θ`, satisfies `f(x;0) = 0`,
//! and has Lipschitz constant `L = 2·X_max` and score bound `B = 2·R·X_max`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::surrogate::{hinge_slope, LossVector, Margin, ScoreVector};

/// A point in the model's parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Self {
        ParamVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|v| v * c).collect())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Observed features for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(Vec<f64>);

impl Context {
    pub fn new(features: Vec<f64>) -> Self {
        Context(features)
    }

    pub fn features(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for Context {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Shape and bounds of the regressor class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelSpec")]
pub struct ModelSpec {
    context_dim: usize,
    actions: usize,
    radius: f64,
    context_bound: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelSpec {
    context_dim: usize,
    actions: usize,
    radius: f64,
    #[serde(default = "default_context_bound")]
    context_bound: f64,
}

fn default_context_bound() -> f64 {
    1.0
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = Error;
    fn try_from(r: RawModelSpec) -> Result<Self> {
        ModelSpec::new(r.context_dim, r.actions, r.radius, r.context_bound)
    }
}

impl ModelSpec {
    /// `radius` must be at least 1 so the ball contains the unit ball.
    pub fn new(context_dim: usize, actions: usize, radius: f64, context_bound: f64) -> Result<Self> {
        if context_dim == 0 {
            return Err(Error::config("context_dim must be positive"));
        }
        if actions < 2 {
            return Err(Error::config("need at least two actions"));
        }
        if !(radius.is_finite() && radius >= 1.0) {
            return Err(Error::config(format!("radius must be >= 1, got {radius}")));
        }
        if !(context_bound.is_finite() && context_bound > 0.0) {
            return Err(Error::config("context_bound must be positive"));
        }
        Ok(ModelSpec { context_dim, actions, radius, context_bound })
    }

    #[inline]
    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    #[inline]
    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn context_bound(&self) -> f64 {
        self.context_bound
    }

    /// Total parameter dimension `K·d'`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.actions * self.context_dim
    }

    /// Per-coordinate Lipschitz bound of `θ ↦ f(x;θ)_a`.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self.context_bound
    }

    /// Bound on `‖f(x;θ)‖_∞` over the ball.
    pub fn score_bound(&self) -> f64 {
        2.0 * self.radius * self.context_bound
    }

    fn check(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        check_dim(self.dim(), theta.len())?;
        check_dim(self.context_dim, x.len())
    }

    /// Writes the centered scores for `(θ, x)` into `out` (length `K`).
    #[inline]
    pub(crate) fn scores_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let dp = self.context_dim;
        let mut mean = 0.0;
        for (a, g) in out.iter_mut().enumerate() {
            let block = &theta[a * dp..(a + 1) * dp];
            *g = block.iter().zip(x).map(|(t, v)| t * v).sum();
            mean += *g;
        }
        mean /= self.actions as f64;
        out.iter_mut().for_each(|g| *g -= mean);
    }

    pub fn raw_scores(&self, theta: &ParamVector, x: &Context) -> Result<Vec<f64>> {
        self.check(theta, x)?;
        let dp = self.context_dim;
        Ok((0..self.actions)
            .map(|a| theta[a * dp..(a + 1) * dp].iter().zip(x.iter()).map(|(t, v)| t * v).sum())
            .collect())
    }

    pub fn predict(&self, theta: &ParamVector, x: &Context) -> Result<ScoreVector> {
        self.check(theta, x)?;
        let mut s = vec![0.0; self.actions];
        self.scores_into(theta, x, &mut s);
        Ok(ScoreVector::from_centered_unchecked(s))
    }

    /// Adds `scale · ∇_θ ⟨ℓ, hinge(f(x;θ))⟩` into `out`, given the scores at `θ`.
    ///
    /// `∇_θ f_a` puts `x` in block `a` and `-x/K` in every block, so the
    /// gradient is assembled from one per-block coefficient plus a shared
    /// offset.
    #[inline]
    pub(crate) fn accumulate_subgradient(
        &self,
        scores: &[f64],
        x: &[f64],
        loss: &[f64],
        gamma: Margin,
        scale: f64,
        out: &mut [f64],
    ) {
        let dp = self.context_dim;
        let mut shared = 0.0;
        for (a, (&s, &l)) in scores.iter().zip(loss).enumerate() {
            if l == 0.0 {
                continue;
            }
            let c = scale * l * hinge_slope(s, gamma);
            if c == 0.0 {
                continue;
            }
            shared += c;
            for (o, v) in out[a * dp..(a + 1) * dp].iter_mut().zip(x) {
                *o += c * v;
            }
        }
        if shared != 0.0 {
            let off = shared / self.actions as f64;
            for block in out.chunks_exact_mut(dp) {
                for (o, v) in block.iter_mut().zip(x) {
                    *o -= off * v;
                }
            }
        }
    }

    /// Subgradient of `θ ↦ ⟨ℓ̃, hinge(f(x;θ))⟩`.
    pub fn round_subgradient(
        &self,
        theta: &ParamVector,
        x: &Context,
        loss_est: &LossVector,
        gamma: Margin,
    ) -> Result<Vec<f64>> {
        self.check(theta, x)?;
        check_dim(self.actions, loss_est.len())?;
        let mut s = vec![0.0; self.actions];
        self.scores_into(theta, x, &mut s);
        let mut grad = vec![0.0; self.dim()];
        self.accumulate_subgradient(&s, x, loss_est.values(), gamma, 1.0, &mut grad);
        Ok(grad)
    }
}

/// Euclidean projection onto the centered ball of radius `radius`.
pub fn project(theta: &ParamVector, radius: f64) -> ParamVector {
    let mut out = theta.clone();
    project_in_place(out.as_mut_slice(), radius);
    out
}

#[inline]
pub(crate) fn project_in_place(theta: &mut [f64], radius: f64) {
    let n = norm(theta);
    // points within rounding of the sphere count as inside, so projecting twice is a no-op
    if n > radius * (1.0 + 4.0 * f64::EPSILON) {
        let c = radius / n;
        theta.iter_mut().for_each(|v| *v *= c);
    }
}

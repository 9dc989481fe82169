//! Simulated bandit environments and fixed-comparator benchmarks.
//!
//! Environments are immutable descriptions; every run supplies its own RNG
//! stream, so one environment can drive many concurrent replicates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{norm, Context, ModelSpec, ParamVector};
use crate::oracles::{grid_erm, GridSpec, MAX_ORACLE_DIM};
use crate::smooth_ftl::{erm_hinge, hinge_objective, WeightedSample};
use crate::surrogate::{LossVector, Margin};

/// Rejections allowed per stochastic round before the margin is declared
/// infeasible.
pub const REJECTION_BUDGET: usize = 10_000;

/// One environment round: the context, the realized full loss vector and,
/// when known, its conditional mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvRound {
    pub context: Context,
    pub loss: LossVector,
    pub mean_loss: Option<LossVector>,
}

pub trait Environment {
    fn spec(&self) -> &ModelSpec;
    /// Comparator the environment was built around, if any.
    fn theta_star(&self) -> Option<&ParamVector>;
    /// Round `t` (0-based) of a run driven by `rng`.
    fn round(&self, t: usize, rng: &mut ChaCha8Rng) -> Result<EnvRound>;
}

/// I.i.d. contexts on the sphere, filtered to a score gap under `θ*`, with
/// Bernoulli losses that favour `argmax_a f_a(x; θ*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStochastic")]
pub struct StochasticEnv {
    spec: ModelSpec,
    theta_star: ParamVector,
    margin_floor: f64,
    label_noise: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStochastic {
    spec: ModelSpec,
    theta_star: ParamVector,
    margin_floor: f64,
    label_noise: f64,
}

impl TryFrom<RawStochastic> for StochasticEnv {
    type Error = Error;
    fn try_from(r: RawStochastic) -> Result<Self> {
        StochasticEnv::new(r.spec, r.theta_star, r.margin_floor, r.label_noise)
    }
}

impl StochasticEnv {
    pub fn new(spec: ModelSpec, theta_star: ParamVector, margin_floor: f64, label_noise: f64) -> Result<Self> {
        check_dim(spec.dim(), theta_star.len())?;
        if theta_star.norm() > spec.radius() * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "theta_star norm {} exceeds radius {}",
                theta_star.norm(),
                spec.radius()
            )));
        }
        if !(margin_floor.is_finite() && margin_floor >= 0.0) {
            return Err(Error::config("margin_floor must be non-negative"));
        }
        if !(0.0..0.5).contains(&label_noise) {
            return Err(Error::config(format!("label_noise {label_noise} outside [0, 0.5)")));
        }
        Ok(StochasticEnv { spec, theta_star, margin_floor, label_noise })
    }

    /// Comparator whose blocks are `scale` times unit vectors evenly spread
    /// over the circle of the first two context coordinates (`±1` when the
    /// context is one-dimensional).
    pub fn symmetric_theta(spec: &ModelSpec, scale: f64) -> ParamVector {
        let (dp, k) = (spec.context_dim(), spec.actions());
        let mut theta = vec![0.0; spec.dim()];
        for a in 0..k {
            let block = &mut theta[a * dp..(a + 1) * dp];
            if dp == 1 {
                block[0] = if a % 2 == 0 { scale } else { -scale };
            } else {
                let angle = std::f64::consts::TAU * a as f64 / k as f64;
                block[0] = scale * angle.cos();
                block[1] = scale * angle.sin();
            }
        }
        ParamVector::new(theta)
    }

    pub fn margin_floor(&self) -> f64 {
        self.margin_floor
    }

    pub fn label_noise(&self) -> f64 {
        self.label_noise
    }

    /// Uniform on the sphere of radius `X_max`.
    fn draw_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let mut x: Vec<f64> = (0..self.spec.context_dim()).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&x);
            if n > 1e-12 {
                let c = self.spec.context_bound() / n;
                x.iter_mut().for_each(|v| *v *= c);
                return x;
            }
        }
    }

    /// Draws `(x, ℓ, ℓ̄)`; `a*` is the returned mean's unique minimizer.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EnvRound> {
        let k = self.spec.actions();
        for _ in 0..=REJECTION_BUDGET {
            let x = Context::new(self.draw_context(rng));
            let scores = self.spec.predict(&self.theta_star, &x)?;
            let (best, gap) = top_gap(scores.values());
            if gap < self.margin_floor || gap <= 0.0 {
                continue;
            }
            let mean: Vec<f64> =
                (0..k).map(|a| if a == best { self.label_noise } else { 1.0 - self.label_noise }).collect();
            let loss: Vec<f64> = mean.iter().map(|&m| if rng.random::<f64>() < m { 1.0 } else { 0.0 }).collect();
            return Ok(EnvRound {
                context: x,
                loss: LossVector::bounded(loss)?,
                mean_loss: Some(LossVector::bounded(mean)?),
            });
        }
        Err(Error::config(format!(
            "no context met margin_floor {} within {REJECTION_BUDGET} rejections",
            self.margin_floor
        )))
    }
}

/// Index of the largest score and its lead over the runner-up.
fn top_gap(s: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (a, &v) in s.iter().enumerate() {
        if v > s[best] {
            best = a;
        }
    }
    let second = s.iter().enumerate().filter(|&(a, _)| a != best).map(|(_, &v)| v).fold(f64::NEG_INFINITY, f64::max);
    (best, s[best] - second)
}

impl Environment for StochasticEnv {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn theta_star(&self) -> Option<&ParamVector> {
        Some(&self.theta_star)
    }

    fn round(&self, _t: usize, rng: &mut ChaCha8Rng) -> Result<EnvRound> {
        self.sample_round(rng)
    }
}

/// A fixed sequence of `(x_t, ℓ_t)` pairs, replayed verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScripted")]
pub struct ScriptedEnv {
    spec: ModelSpec,
    rounds: Vec<(Context, LossVector)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScripted {
    spec: ModelSpec,
    rounds: Vec<(Context, LossVector)>,
}

impl TryFrom<RawScripted> for ScriptedEnv {
    type Error = Error;
    fn try_from(r: RawScripted) -> Result<Self> {
        ScriptedEnv::new(r.spec, r.rounds)
    }
}

impl ScriptedEnv {
    pub fn new(spec: ModelSpec, rounds: Vec<(Context, LossVector)>) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::config("scripted environment needs at least one round"));
        }
        for (x, l) in &rounds {
            check_dim(spec.context_dim(), x.len())?;
            check_dim(spec.actions(), l.len())?;
            if x.norm() > spec.context_bound() * (1.0 + 1e-9) {
                return Err(Error::config(format!("context norm {} exceeds bound", x.norm())));
            }
            if l.values().iter().any(|&v| v > 1.0) {
                return Err(Error::config("scripted losses must lie in [0, 1]"));
            }
        }
        Ok(ScriptedEnv { spec, rounds })
    }

    pub fn rounds(&self) -> &[(Context, LossVector)] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

impl Environment for ScriptedEnv {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn theta_star(&self) -> Option<&ParamVector> {
        None
    }

    fn round(&self, t: usize, _rng: &mut ChaCha8Rng) -> Result<EnvRound> {
        let (x, l) = self
            .rounds
            .get(t)
            .ok_or_else(|| Error::config(format!("scripted environment has only {} rounds", self.rounds.len())))?;
        Ok(EnvRound { context: x.clone(), loss: l.clone(), mean_loss: Some(l.clone()) })
    }
}

/// A fixed comparator and its full-information cumulative surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub theta: ParamVector,
    pub cumulative_surrogate: f64,
    pub cumulative_best_action: Option<f64>,
}

/// How the best-in-hindsight comparator is searched for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchmarkSolver {
    /// Grid oracle when `d ≤ 4`, subgradient ERM otherwise.
    Auto {
        grid_points: usize,
        erm_steps: usize,
    },
    Grid {
        resolution: usize,
    },
    Erm {
        steps: usize,
    },
}

impl Default for BenchmarkSolver {
    fn default() -> Self {
        BenchmarkSolver::Auto { grid_points: 200_000, erm_steps: 3000 }
    }
}

/// `Σ_t ⟨ℓ_t, hinge(f(x_t; θ))⟩`.
pub fn surrogate_of(
    rounds: &[(Context, LossVector)],
    spec: &ModelSpec,
    gamma: Margin,
    theta: &ParamVector,
) -> Result<f64> {
    check_dim(spec.dim(), theta.len())?;
    let samples = as_samples(rounds, spec)?;
    Ok(hinge_objective(&samples, spec, theta, gamma))
}

fn as_samples(rounds: &[(Context, LossVector)], spec: &ModelSpec) -> Result<Vec<WeightedSample>> {
    rounds
        .iter()
        .map(|(x, l)| {
            check_dim(spec.context_dim(), x.len())?;
            check_dim(spec.actions(), l.len())?;
            Ok(WeightedSample { context: x.clone(), loss_estimate: l.clone() })
        })
        .collect()
}

/// Sum over rounds of the smallest mean loss.
pub fn cumulative_best_action(means: &[LossVector]) -> f64 {
    means.iter().map(|m| m.values().iter().copied().fold(f64::INFINITY, f64::min)).sum()
}

/// Best fixed comparator for the full-information surrogate over `rounds`.
pub fn best_fixed_surrogate(
    rounds: &[(Context, LossVector)],
    means: Option<&[LossVector]>,
    spec: &ModelSpec,
    gamma: Margin,
    solver: BenchmarkSolver,
) -> Result<BenchmarkReport> {
    let samples = as_samples(rounds, spec)?;
    let best_action = means.map(cumulative_best_action);
    if samples.is_empty() {
        return Ok(BenchmarkReport {
            theta: ParamVector::zeros(spec.dim()),
            cumulative_surrogate: 0.0,
            cumulative_best_action: best_action,
        });
    }
    let objective = |t: &[f64]| hinge_objective(&samples, spec, t, gamma);
    let (theta, value) = match solver {
        BenchmarkSolver::Auto { grid_points, .. } if spec.dim() <= MAX_ORACLE_DIM => {
            grid_erm(objective, &GridSpec::within_budget(spec.dim(), spec.radius(), grid_points)?)?
        }
        BenchmarkSolver::Auto { erm_steps, .. } | BenchmarkSolver::Erm { steps: erm_steps } => {
            let out = erm_hinge(&samples, spec, gamma, erm_steps, 1.0)?;
            (out.theta, out.objective)
        }
        BenchmarkSolver::Grid { resolution } => {
            grid_erm(objective, &GridSpec::new(spec.dim(), resolution, spec.radius())?)?
        }
    };
    Ok(BenchmarkReport { theta, cumulative_surrogate: value, cumulative_best_action: best_action })
}

//! Replicated experiment runs and regret accounting.
//!
//! Replicate `r` uses seed `base_seed + r`: the environment stream is seeded
//! with it directly and the learner with a splitmix64 hash of it. Replicates
//! run in parallel and are merged in replicate order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{best_fixed_surrogate, Environment};
use crate::error::Result;
use crate::harness::config::{Algorithm, ExperimentConfig};
use crate::harness::output::round_sig12;
use crate::hinge_lmc::HingeLmc;
use crate::learner::{Learner, UniformBaseline};
use crate::model::{Context, ParamVector};
use crate::smooth_ftl::{hinge_objective, SmoothFtl, WeightedSample};
use crate::surrogate::LossVector;

/// Most points kept per regret curve.
const CURVE_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub replicate: usize,
    /// 1-based.
    pub round: usize,
    pub action: usize,
    pub propensity: f64,
    pub observed_loss: f64,
    /// Played coordinate of the learner's loss estimate.
    pub estimate: f64,
    pub resample_count: Option<usize>,
    pub cumulative_loss: f64,
}

impl RoundRecord {
    /// Same record with floats cut to the 12 digits that get persisted.
    pub fn rounded(self) -> Self {
        RoundRecord {
            propensity: round_sig12(self.propensity),
            observed_loss: round_sig12(self.observed_loss),
            estimate: round_sig12(self.estimate),
            cumulative_loss: round_sig12(self.cumulative_loss),
            ..self
        }
    }
}

/// Regret at one checkpoint against both benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub round: usize,
    pub cumulative_loss: f64,
    pub theta_star_surrogate: Option<f64>,
    pub hindsight_surrogate: f64,
    pub best_action_loss: Option<f64>,
    /// `cumulative_loss - θ* surrogate / K`.
    pub regret_theta_star: Option<f64>,
    /// `cumulative_loss - best-in-hindsight surrogate / K`.
    pub regret_hindsight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    /// `theta_star`, or `hindsight` for the comparator fitted on all rounds.
    pub benchmark: String,
    pub rounds: Vec<usize>,
    pub regret: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub seed: u64,
    pub cumulative_loss: f64,
    pub mean_loss: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub curve: RegretCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMean {
    pub round: usize,
    pub mean_cumulative_loss: f64,
    pub mean_regret_hindsight: f64,
    pub mean_regret_theta_star: Option<f64>,
}

/// Replicate means of the benchmark surrogates over the full horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub theta_star_surrogate: Option<f64>,
    pub hindsight_surrogate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_echo: ExperimentConfig,
    pub per_replicate: Vec<ReplicateSummary>,
    pub regret_checkpoints: Vec<CheckpointMean>,
    pub benchmark: BenchmarkSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: RunSummary,
    /// Ordered by `(replicate, round)`.
    pub records: Vec<RoundRecord>,
}

/// splitmix64 finalizer.
pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `T/4`, `T/2` and `T`, each at least 1, without duplicates.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut c: Vec<usize> = [horizon / 4, horizon / 2, horizon].iter().map(|&t| t.max(1)).collect();
    c.dedup();
    c
}

fn curve_rounds(horizon: usize) -> Vec<usize> {
    let n = horizon.min(CURVE_POINTS);
    let mut r: Vec<usize> = (1..=n).map(|i| (i * horizon).div_ceil(n)).collect();
    r.dedup();
    r
}

fn build_learner(cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn Learner>> {
    let spec = cfg.model;
    Ok(match cfg.algorithm {
        Algorithm::HingeLmc => {
            let c = cfg.hinge_lmc.clone().unwrap_or_default().resolve(&spec, cfg.horizon, cfg.gamma, seed);
            Box::new(HingeLmc::new(spec, c)?)
        }
        Algorithm::SmoothFtl => {
            let c = cfg.smooth_ftl.clone().unwrap_or_default().resolve(&spec, cfg.horizon, cfg.gamma, seed);
            Box::new(SmoothFtl::new(spec, c)?)
        }
        Algorithm::UniformBaseline => Box::new(UniformBaseline::new(spec.actions(), seed)),
    })
}

/// Running `Σ_{s ≤ t} ⟨ℓ_s, hinge(f(x_s; θ))⟩` for every prefix.
fn surrogate_prefix(log: &[(Context, LossVector)], cfg: &ExperimentConfig, theta: &ParamVector) -> Vec<f64> {
    let mut acc = 0.0;
    log.iter()
        .map(|(x, l)| {
            let one = [WeightedSample { context: x.clone(), loss_estimate: l.clone() }];
            acc += hinge_objective(&one, &cfg.model, theta, cfg.gamma);
            acc
        })
        .collect()
}

fn run_replicate(
    cfg: &ExperimentConfig,
    env: &(dyn Environment + Sync),
    r: usize,
) -> Result<(Vec<RoundRecord>, ReplicateSummary)> {
    let seed = cfg.base_seed.wrapping_add(r as u64);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = build_learner(cfg, splitmix64(seed))?;
    let k = cfg.model.actions() as f64;

    let mut records = Vec::with_capacity(cfg.horizon);
    let mut log = Vec::with_capacity(cfg.horizon);
    let mut means = Vec::with_capacity(cfg.horizon);
    let mut cumulative = Vec::with_capacity(cfg.horizon);
    let mut total = 0.0;
    for t in 0..cfg.horizon {
        let round = env.round(t, &mut env_rng)?;
        let action = learner.act(&round.context)?;
        let loss = round.loss.values()[action.action];
        let fb = learner.observe(loss)?;
        total += loss;
        cumulative.push(total);
        records.push(
            RoundRecord {
                replicate: r,
                round: t + 1,
                action: action.action,
                propensity: action.propensity(),
                observed_loss: loss,
                estimate: fb.estimate,
                resample_count: fb.resample_count,
                cumulative_loss: total,
            }
            .rounded(),
        );
        if let Some(m) = round.mean_loss {
            means.push(m);
        }
        log.push((round.context, round.loss));
    }
    let means = (means.len() == log.len()).then_some(means);

    let star_prefix = env.theta_star().map(|theta| surrogate_prefix(&log, cfg, theta));
    let mut points = Vec::new();
    let mut final_theta = None;
    for c in checkpoints(cfg.horizon) {
        let hind =
            best_fixed_surrogate(&log[..c], means.as_deref().map(|m| &m[..c]), &cfg.model, cfg.gamma, cfg.benchmark)?;
        if c == cfg.horizon {
            final_theta = Some(hind.theta.clone());
        }
        let cum = round_sig12(cumulative[c - 1]);
        let star = star_prefix.as_ref().map(|p| round_sig12(p[c - 1]));
        let hindsight = round_sig12(hind.cumulative_surrogate);
        points.push(Checkpoint {
            round: c,
            cumulative_loss: cum,
            theta_star_surrogate: star,
            hindsight_surrogate: hindsight,
            best_action_loss: hind.cumulative_best_action.map(round_sig12),
            regret_theta_star: star.map(|s| round_sig12(cum - s / k)),
            regret_hindsight: round_sig12(cum - hindsight / k),
        });
    }

    let (benchmark, prefix) = match star_prefix {
        Some(p) => ("theta_star", p),
        None => ("hindsight", surrogate_prefix(&log, cfg, &final_theta.expect("last checkpoint is the horizon"))),
    };
    let rounds = curve_rounds(cfg.horizon);
    let regret = rounds.iter().map(|&t| round_sig12(cumulative[t - 1] - prefix[t - 1] / k)).collect();
    let summary = ReplicateSummary {
        replicate: r,
        seed,
        cumulative_loss: round_sig12(total),
        mean_loss: round_sig12(total / cfg.horizon as f64),
        checkpoints: points,
        curve: RegretCurve { benchmark: benchmark.into(), rounds, regret },
    };
    Ok((records, summary))
}

/// Runs every replicate and assembles records and summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let env = config.environment.build(config.model, config.horizon)?;
    let env = env.as_env();
    let results: Vec<(Vec<RoundRecord>, ReplicateSummary)> =
        (0..config.replicates).into_par_iter().map(|r| run_replicate(config, env, r)).collect::<Result<_>>()?;

    let n = results.len() as f64;
    let mut records = Vec::with_capacity(config.horizon * results.len());
    let mut per_replicate = Vec::with_capacity(results.len());
    for (rec, summary) in results {
        records.extend(rec);
        per_replicate.push(summary);
    }
    let regret_checkpoints = per_replicate[0]
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let col =
                |f: &dyn Fn(&Checkpoint) -> f64| per_replicate.iter().map(|r| f(&r.checkpoints[i])).sum::<f64>() / n;
            let star = c.regret_theta_star.map(|_| round_sig12(col(&|p| p.regret_theta_star.unwrap_or(f64::NAN))));
            CheckpointMean {
                round: c.round,
                mean_cumulative_loss: round_sig12(col(&|p| p.cumulative_loss)),
                mean_regret_hindsight: round_sig12(col(&|p| p.regret_hindsight)),
                mean_regret_theta_star: star,
            }
        })
        .collect();
    let last = |r: &ReplicateSummary| r.checkpoints.last().expect("at least one checkpoint").clone();
    let benchmark = BenchmarkSummary {
        theta_star_surrogate: last(&per_replicate[0]).theta_star_surrogate.map(|_| {
            round_sig12(per_replicate.iter().map(|r| last(r).theta_star_surrogate.unwrap_or(f64::NAN)).sum::<f64>() / n)
        }),
        hindsight_surrogate: round_sig12(per_replicate.iter().map(|r| last(r).hindsight_surrogate).sum::<f64>() / n),
    };
    Ok(ExperimentOutput {
        summary: RunSummary { config_echo: config.clone(), per_replicate, regret_checkpoints, benchmark },
        records,
    })
}

//! Brute-force references for low-dimensional instances: exact rejection
//! sampling from the ball-truncated target, exhaustive grid minimization,
//! central finite differences, and exact truncated-geometric moments.
//!
//! Everything here trades speed for independence from the production code
//! paths it checks, and is capped to `d ≤ 4`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm, Context, ModelSpec, ParamVector};
use crate::sampler::{lmc_sample, LmcConfig, Potential};
use crate::surrogate::{LossVector, Margin};

/// Largest dimension the brute-force oracles accept.
pub const MAX_ORACLE_DIM: usize = 4;
/// Upper bound on the number of grid points.
pub const GRID_BUDGET: usize = 10_000_000;

/// Regular grid on `[-R, R]^d`, restricted to the ball of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    /// Points per axis; 1 means the center only.
    pub resolution: usize,
    pub radius: f64,
}

impl GridSpec {
    pub fn new(dim: usize, resolution: usize, radius: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_ORACLE_DIM {
            return Err(Error::domain(format!("grid oracle supports 1..={MAX_ORACLE_DIM} dims, got {dim}")));
        }
        if resolution == 0 {
            return Err(Error::domain("grid resolution must be positive"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::domain("grid radius must be positive"));
        }
        let total = (resolution as f64).powi(dim as i32);
        if total > GRID_BUDGET as f64 {
            return Err(Error::Budget(format!(
                "grid with {resolution}^{dim} points exceeds the {GRID_BUDGET} point budget"
            )));
        }
        Ok(GridSpec { dim, resolution, radius })
    }

    /// Finest resolution whose point count stays within `budget`.
    pub fn within_budget(dim: usize, radius: f64, budget: usize) -> Result<Self> {
        let mut res = ((budget.min(GRID_BUDGET) as f64).powf(1.0 / dim as f64)).floor() as usize;
        while res > 1 && (res as f64).powi(dim as i32) > budget as f64 {
            res -= 1;
        }
        GridSpec::new(dim, res.max(1), radius)
    }

    /// Spacing between adjacent points along an axis.
    pub fn spacing(&self) -> f64 {
        if self.resolution == 1 {
            0.0
        } else {
            2.0 * self.radius / (self.resolution - 1) as f64
        }
    }

    fn coord(&self, i: usize) -> f64 {
        if self.resolution == 1 {
            0.0
        } else {
            -self.radius + i as f64 * self.spacing()
        }
    }

    /// Visits every grid point inside the ball in lexicographic index order.
    fn for_each_point(&self, mut visit: impl FnMut(&[f64])) {
        let mut idx = vec![0usize; self.dim];
        let mut point = vec![self.coord(0); self.dim];
        let r2 = self.radius * self.radius * (1.0 + 1e-12);
        loop {
            if point.iter().map(|v| v * v).sum::<f64>() <= r2 {
                visit(&point);
            }
            // odometer increment, last axis fastest
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.resolution {
                    point[axis] = self.coord(idx[axis]);
                    break;
                }
                idx[axis] = 0;
                point[axis] = self.coord(0);
            }
        }
    }
}

/// Exhaustive minimum over the grid points inside the ball; ties keep the
/// lexicographically first point.
pub fn grid_erm(objective: impl Fn(&[f64]) -> f64, grid: &GridSpec) -> Result<(ParamVector, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    grid.for_each_point(|p| {
        let v = objective(p);
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((p.to_vec(), v));
        }
    });
    let (theta, value) = best.ok_or_else(|| Error::domain("grid has no points inside the ball"))?;
    Ok((ParamVector::new(theta), value))
}

/// Central differences `(f(θ + h e_i) - f(θ - h e_i)) / 2h`.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe);
        probe[i] = theta[i] - h;
        let down = f(&probe);
        probe[i] = theta[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Moments of `min(Geometric(p), M)` on `{1, 2, ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomMoments {
    pub mean: f64,
    pub second_moment: f64,
    /// Probability that a match happens within the first `M` trials.
    pub matched_mass: f64,
}

/// Exact moments by direct summation over the truncated support.
pub fn truncated_geom_moments(p: f64, cap: usize) -> Result<GeomMoments> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("match probability {p} outside (0, 1]")));
    }
    if cap == 0 {
        return Err(Error::domain("truncation cap must be at least 1"));
    }
    let q = 1.0 - p;
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut tail = 1.0; // q^(k-1)
    for k in 1..cap {
        let mass = p * tail;
        let kf = k as f64;
        mean += kf * mass;
        second += kf * kf * mass;
        tail *= q;
    }
    let m = cap as f64;
    mean += m * tail;
    second += m * m * tail;
    Ok(GeomMoments { mean, second_moment: second, matched_mass: 1.0 - q.powi(cap as i32) })
}

/// Closed form `(1 - (1-p)^M) / p` of the truncated mean.
pub fn truncated_geom_mean_closed_form(p: f64, cap: usize) -> f64 {
    (1.0 - (1.0 - p).powi(cap as i32)) / p
}

/// Exact sampler for `exp(-F(θ) - (λ/2)‖θ‖²)` restricted to the ball.
///
/// Proposals are uniform in the ball and accepted with probability
/// `exp(-(F_tot(θ) - F_min))`, where `F_min` is a certified lower bound:
/// the grid minimum minus the larger of 1% headroom and the Lipschitz slack
/// over half a grid cell diagonal.
#[derive(Debug, Clone)]
pub struct RejectionSampler<'a> {
    potential: &'a Potential,
    ridge: f64,
    radius: f64,
    floor: f64,
    proposals: u64,
    accepted: u64,
}

const MIN_ACCEPTANCE: f64 = 1e-5;
const ACCEPTANCE_WARMUP: u64 = 200_000;

impl<'a> RejectionSampler<'a> {
    pub fn new(potential: &'a Potential, ridge: f64) -> Result<Self> {
        let d = potential.spec().dim();
        if d > MAX_ORACLE_DIM {
            return Err(Error::domain(format!("rejection oracle supports d <= {MAX_ORACLE_DIM}, got {d}")));
        }
        let radius = potential.spec().radius();
        let total = |t: &[f64]| potential.value(t) + 0.5 * ridge * t.iter().map(|v| v * v).sum::<f64>();
        let grid = GridSpec::within_budget(d, radius, 200_000)?;
        let (_, grid_min) = grid_erm(total, &grid)?;
        let loss_mass: f64 = potential.history().iter().map(|(_, l)| l.l1()).sum();
        let lipschitz =
            potential.eta() * loss_mass * potential.spec().lipschitz() / potential.gamma().get() + ridge * radius;
        let half_diag = 0.5 * grid.spacing() * (d as f64).sqrt();
        let slack = (0.01 * grid_min.abs()).max(lipschitz * half_diag);
        Ok(RejectionSampler { potential, ridge, radius, floor: grid_min - slack, proposals: 0, accepted: 0 })
    }

    fn total(&self, t: &[f64]) -> f64 {
        self.potential.value(t) + 0.5 * self.ridge * t.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<ParamVector> {
        let d = self.potential.spec().dim();
        let mut dir = vec![0.0; d];
        loop {
            self.proposals += 1;
            if self.proposals > ACCEPTANCE_WARMUP && self.acceptance_rate() < MIN_ACCEPTANCE {
                return Err(Error::Budget(format!(
                    "rejection acceptance rate {:.2e} below {MIN_ACCEPTANCE:e}",
                    self.acceptance_rate()
                )));
            }
            uniform_in_ball(&mut dir, self.radius, rng);
            let excess = self.total(&dir) - self.floor;
            debug_assert!(excess >= -1e-9, "rejection floor above the target minimum");
            let u: f64 = rng.random();
            if u < (-excess.max(0.0)).exp() {
                self.accepted += 1;
                return Ok(ParamVector::new(dir.clone()));
            }
        }
    }
}

/// One exact draw; see [`RejectionSampler`].
pub fn rejection_sample<R: Rng + ?Sized>(potential: &Potential, ridge: f64, rng: &mut R) -> Result<ParamVector> {
    RejectionSampler::new(potential, ridge)?.sample(rng)
}

fn uniform_in_ball<R: Rng + ?Sized>(out: &mut [f64], radius: f64, rng: &mut R) {
    loop {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = norm(out);
        if n > 0.0 {
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / out.len() as f64) / n;
            out.iter_mut().for_each(|v| *v *= r);
            return;
        }
    }
}

/// Fixed low-dimensional targets used to validate the Langevin sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerTarget {
    /// Empty history with unit ridge in a radius-6 ball: a near-standard Gaussian.
    Ridge,
    /// Three informative rounds of hinge potential.
    Hinge,
}

/// Potential, ridge and sampler settings for one validation target.
#[derive(Debug, Clone)]
pub struct SamplerInstance {
    pub target: SamplerTarget,
    pub potential: Potential,
    pub lmc: LmcConfig,
}

impl SamplerInstance {
    /// Builds the target with `K = 2` actions over `context_dim` features.
    pub fn new(target: SamplerTarget, context_dim: usize) -> Result<Self> {
        match target {
            SamplerTarget::Ridge => {
                let spec = ModelSpec::new(context_dim, 2, 6.0, 1.0)?;
                let potential = Potential::new(spec, 1.0, Margin::new(1.0)?)?;
                let mut lmc = LmcConfig::practical(spec.radius());
                lmc.ridge = 1.0;
                Ok(SamplerInstance { target, potential, lmc })
            }
            SamplerTarget::Hinge => {
                let spec = ModelSpec::new(context_dim, 2, 1.5, 1.0)?;
                let mut potential = Potential::new(spec, 1.0, Margin::new(0.5)?)?;
                let unit = |angle: f64| -> Vec<f64> {
                    let mut x = vec![0.0; context_dim];
                    x[0] = angle.cos();
                    if context_dim > 1 {
                        x[1] = angle.sin();
                    }
                    let n = norm(&x);
                    x.iter_mut().for_each(|v| *v /= n);
                    x
                };
                let rounds = [(0.3, [2.0, 0.0]), (2.2, [0.0, 1.5]), (4.0, [1.0, 0.0])];
                for (angle, loss) in rounds {
                    potential.push(Context::new(unit(angle)), LossVector::new(loss.to_vec())?)?;
                }
                let lmc = LmcConfig::practical(spec.radius());
                Ok(SamplerInstance { target, potential, lmc })
            }
        }
    }
}

/// Moments of the Langevin sampler against the rejection oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub target: SamplerTarget,
    pub dim: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub empirical_mean: Vec<f64>,
    pub empirical_cov_diag: Vec<f64>,
    pub oracle_mean: Vec<f64>,
    pub oracle_cov_diag: Vec<f64>,
    /// `‖empirical_mean - oracle_mean‖₂`.
    pub mean_distance: f64,
    /// Largest `|var_lmc / var_oracle - 1|` over coordinates.
    pub max_variance_rel_error: f64,
    pub oracle_acceptance_rate: f64,
}

fn moments(samples: &[ParamVector]) -> (Vec<f64>, Vec<f64>) {
    let d = samples[0].len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        mean.iter_mut().zip(s.iter()).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; d];
    for s in samples {
        var.iter_mut().zip(s.iter().zip(&mean)).for_each(|(c, (v, m))| *c += (v - m).powi(2) / (n - 1.0));
    }
    (mean, var)
}

/// Draws `n` independent LMC samples (one chain each) and `n` oracle samples.
pub fn compare_sampler_to_oracle(instance: &SamplerInstance, n: usize, seed: u64) -> Result<SamplerDiagnostics> {
    if n < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    let mut lmc_rng = ChaCha8Rng::seed_from_u64(seed);
    let lmc: Vec<ParamVector> =
        (0..n).map(|_| lmc_sample(&instance.potential, &instance.lmc, &mut lmc_rng)).collect::<Result<_>>()?;
    let mut oracle_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut oracle = RejectionSampler::new(&instance.potential, instance.lmc.ridge)?;
    let reference: Vec<ParamVector> = (0..n).map(|_| oracle.sample(&mut oracle_rng)).collect::<Result<_>>()?;

    let (empirical_mean, empirical_cov_diag) = moments(&lmc);
    let (oracle_mean, oracle_cov_diag) = moments(&reference);
    let diff: Vec<f64> = empirical_mean.iter().zip(&oracle_mean).map(|(a, b)| a - b).collect();
    let max_variance_rel_error =
        empirical_cov_diag.iter().zip(&oracle_cov_diag).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    Ok(SamplerDiagnostics {
        target: instance.target,
        dim: instance.potential.spec().dim(),
        n_samples: n,
        seed,
        mean_distance: norm(&diff),
        empirical_mean,
        empirical_cov_diag,
        oracle_mean,
        oracle_cov_diag,
        max_variance_rel_error,
        oracle_acceptance_rate: oracle.acceptance_rate(),
    })
}

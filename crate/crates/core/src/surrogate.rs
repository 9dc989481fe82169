//! Ramp and hinge surrogates over sum-to-zero score vectors, the randomized
//! policies they induce, and uniform exploration smoothing.
//!
//! For a score `s` and margin `γ`:
//!
//! ```text
//!   ramp(s)  = min(max(1 + s/γ, 0), 1)
//!   hinge(s) = max(1 + s/γ, 0)
//! ```
//!
//! Both upper-bound the cost-sensitive loss of the argmax action, and the
//! induced policies `π(s)_a ∝ surrogate(s_a)` turn a score vector into an
//! action distribution whose expected loss is controlled by the surrogate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Absolute tolerance below which a score vector is accepted as summing to zero.
pub const SUM_ZERO_TOL: f64 = 1e-9;
/// Drift up to this size is removed by re-centering instead of rejected.
pub const RECENTER_TOL: f64 = 1e-6;

/// Margin scale `γ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Margin(f64);

impl Margin {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(Margin(gamma))
        } else {
            Err(Error::domain(format!("margin must be finite and > 0, got {gamma}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Margin {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Margin::new(v)
    }
}

impl From<Margin> for f64 {
    fn from(m: Margin) -> f64 {
        m.0
    }
}

/// Per-action scores constrained to sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    /// Accepts `values` if they sum to zero; small floating-point drift is
    /// re-centered away, anything beyond [`RECENTER_TOL`] is rejected.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain("score vector needs at least two actions"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("score vector has non-finite entries"));
        }
        let sum: f64 = values.iter().sum();
        if sum.abs() > RECENTER_TOL {
            return Err(Error::domain(format!("scores sum to {sum}, expected 0")));
        }
        if sum.abs() > SUM_ZERO_TOL {
            let mean = sum / values.len() as f64;
            values.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(ScoreVector(values))
    }

    /// Projects arbitrary raw scores onto the sum-to-zero subspace.
    pub fn centered(raw: &[f64]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::domain("score vector needs at least two actions"));
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        Ok(ScoreVector(raw.iter().map(|g| g - mean).collect()))
    }

    pub(crate) fn from_centered_unchecked(values: Vec<f64>) -> Self {
        ScoreVector(values)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (a, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = a;
            }
        }
        best
    }
}

/// Nonnegative per-action losses (environment losses or their estimates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LossVector(Vec<f64>);

impl LossVector {
    /// Any finite nonnegative vector; used for importance-weighted estimates.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("losses must be finite and nonnegative"));
        }
        Ok(LossVector(values))
    }

    /// A loss vector drawn by an environment: every entry in `[0, 1]`.
    pub fn bounded(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("environment losses must lie in [0, 1]"));
        }
        Ok(LossVector(values))
    }

    pub fn zeros(k: usize) -> Self {
        LossVector(vec![0.0; k])
    }

    /// `value · e_action` in `R^k`.
    pub fn one_hot(k: usize, action: usize, value: f64) -> Result<Self> {
        if action >= k {
            return Err(Error::domain(format!("action {action} out of range for K = {k}")));
        }
        let mut v = vec![0.0; k];
        v[action] = value;
        LossVector::new(v)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for LossVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LossVector::new(v)
    }
}

impl From<LossVector> for Vec<f64> {
    fn from(l: LossVector) -> Vec<f64> {
        l.0
    }
}

/// A probability distribution over the `K` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution(Vec<f64>);

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("empty action distribution"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("probabilities sum to {total}")));
        }
        Ok(Self::normalized(probs, total))
    }

    pub fn uniform(k: usize) -> Self {
        ActionDistribution(vec![1.0 / k as f64; k])
    }

    /// Normalizes nonnegative weights with a known positive total.
    fn normalized(mut weights: Vec<f64>, total: f64) -> Self {
        weights.iter_mut().for_each(|w| *w /= total);
        // second pass absorbs the 1-ulp residue of the first division
        let again: f64 = weights.iter().sum();
        if again != 1.0 {
            weights.iter_mut().for_each(|w| *w /= again);
        }
        ActionDistribution(weights)
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn prob(&self, action: usize) -> f64 {
        self.0[action]
    }

    /// Expected loss `⟨p, ℓ⟩`.
    pub fn expected_loss(&self, loss: &LossVector) -> f64 {
        dot(&self.0, loss.values())
    }

    /// Inverse-CDF draw from one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in self.0.iter().enumerate() {
            if p > 0.0 {
                last_positive = a;
                acc += p;
                if u < acc {
                    return a;
                }
            }
        }
        last_positive
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn ramp(s: f64, gamma: Margin) -> f64 {
    (1.0 + s / gamma.get()).clamp(0.0, 1.0)
}

#[inline]
pub fn hinge(s: f64, gamma: Margin) -> f64 {
    (1.0 + s / gamma.get()).max(0.0)
}

/// Subgradient of [`hinge`]: `1/γ` strictly right of the kink at `-γ`, else 0.
#[inline]
pub fn hinge_slope(s: f64, gamma: Margin) -> f64 {
    if s > -gamma.get() {
        1.0 / gamma.get()
    } else {
        0.0
    }
}

fn induced(s: &ScoreVector, surrogate: impl Fn(f64) -> f64, floor: f64) -> ActionDistribution {
    let weights: Vec<f64> = s.values().iter().map(|&v| surrogate(v)).collect();
    let total: f64 = weights.iter().sum();
    debug_assert!(total >= floor - 1e-9, "normalizer {total} below {floor}");
    ActionDistribution::normalized(weights, total)
}

/// Normalizer `Σ_a hinge(s_a)`; at least `K` for sum-to-zero scores.
pub fn hinge_normalizer(s: &ScoreVector, gamma: Margin) -> f64 {
    s.values().iter().map(|&v| hinge(v, gamma)).sum()
}

/// Normalizer `Σ_a ramp(s_a)`; at least 1 for sum-to-zero scores.
pub fn ramp_normalizer(s: &ScoreVector, gamma: Margin) -> f64 {
    s.values().iter().map(|&v| ramp(v, gamma)).sum()
}

/// `π_hinge(s)_a ∝ hinge(s_a)`.
pub fn induced_policy_hinge(s: &ScoreVector, gamma: Margin) -> ActionDistribution {
    induced(s, |v| hinge(v, gamma), s.len() as f64)
}

/// `π_ramp(s)_a ∝ ramp(s_a)`.
pub fn induced_policy_ramp(s: &ScoreVector, gamma: Margin) -> ActionDistribution {
    induced(s, |v| ramp(v, gamma), 1.0)
}

/// Mixes `p` with the uniform distribution: `(1 - Kμ) p + μ`.
pub fn smooth(p: &ActionDistribution, mu: f64) -> Result<ActionDistribution> {
    let k = p.len() as f64;
    if !(0.0..=1.0 / k).contains(&mu) {
        return Err(Error::domain(format!("smoothing {mu} outside [0, 1/K]")));
    }
    let keep = (1.0 - k * mu).max(0.0);
    let probs: Vec<f64> = p.probs().iter().map(|&q| keep * q + mu).collect();
    let total = probs.iter().sum();
    Ok(ActionDistribution::normalized(probs, total))
}

/// Cost-sensitive hinge loss `Σ_a ℓ_a · hinge(s_a)`.
pub fn cc_hinge_loss(s: &ScoreVector, loss: &LossVector, gamma: Margin) -> Result<f64> {
    check_dim(s.len(), loss.len())?;
    Ok(s.values().iter().zip(loss.values()).map(|(&v, &l)| l * hinge(v, gamma)).sum())
}

/// Vector ramp loss `Σ_a ℓ_a · ramp(s_a)`.
pub fn cc_ramp_loss(s: &ScoreVector, loss: &LossVector, gamma: Margin) -> Result<f64> {
    check_dim(s.len(), loss.len())?;
    Ok(s.values().iter().zip(loss.values()).map(|(&v, &l)| l * ramp(v, gamma)).sum())
}

/// Margin loss `Σ_a ℓ_a · 1{s_a ≥ -γ}`.
pub fn margin_loss(s: &ScoreVector, loss: &LossVector, gamma: Margin) -> Result<f64> {
    check_dim(s.len(), loss.len())?;
    Ok(s.values().iter().zip(loss.values()).filter(|(&v, _)| v >= -gamma.get()).map(|(_, &l)| l).sum())
}

/// Multiclass hinge loss on unconstrained scores:
/// `max(1 - (g_y - max_{b≠y} g_b)/γ, 0)`.
pub fn mc_hinge_loss(raw_scores: &[f64], true_label: usize, gamma: Margin) -> Result<f64> {
    if raw_scores.len() < 2 {
        return Err(Error::domain("multiclass hinge needs at least two classes"));
    }
    if true_label >= raw_scores.len() {
        return Err(Error::domain(format!("label {true_label} out of range")));
    }
    let runner_up = raw_scores
        .iter()
        .enumerate()
        .filter(|&(b, _)| b != true_label)
        .map(|(_, &g)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = raw_scores[true_label] - runner_up;
    Ok((1.0 - margin / gamma.get()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(v: f64) -> Margin {
        Margin::new(v).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn ramp_values() {
        assert_eq!(ramp(0.0, g(0.5)), 1.0);
        for gamma in [0.1, 0.7, 3.0] {
            assert_eq!(ramp(-gamma, g(gamma)), 0.0);
            assert!((ramp(-gamma / 2.0, g(gamma)) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn hinge_values() {
        for gamma in [0.1, 1.0, 2.5] {
            assert_eq!(hinge(0.0, g(gamma)), 1.0);
            assert_eq!(hinge(-2.0 * gamma, g(gamma)), 0.0);
            assert_eq!(hinge(gamma, g(gamma)), 2.0);
        }
    }

    #[test]
    fn hinge_slope_is_right_open_at_kink() {
        assert_eq!(hinge_slope(-1.0, g(1.0)), 0.0);
        assert_eq!(hinge_slope(-0.999, g(1.0)), 1.0);
        assert_eq!(hinge_slope(0.0, g(0.5)), 2.0);
    }

    #[test]
    fn margin_rejects_nonpositive() {
        assert!(Margin::new(0.0).is_err());
        assert!(Margin::new(-1.0).is_err());
        assert!(Margin::new(f64::NAN).is_err());
    }

    #[test]
    fn score_vector_tolerances() {
        assert!(ScoreVector::new(vec![1.0, -1.0]).is_ok());
        let drift = ScoreVector::new(vec![1.0 + 5e-7, -1.0]).unwrap();
        assert!(drift.values().iter().sum::<f64>().abs() < 1e-12);
        assert!(ScoreVector::new(vec![1.0 + 1e-5, -1.0]).is_err());
        assert!(ScoreVector::new(vec![0.0]).is_err());
    }

    #[test]
    fn hinge_policy_examples() {
        let p = induced_policy_hinge(&ScoreVector::new(vec![0.0; 3]).unwrap(), g(0.8));
        assert!(close(p.probs(), &[1.0 / 3.0; 3], 1e-15));

        let gamma = 0.4;
        let s = ScoreVector::new(vec![3.0 * gamma - gamma, -gamma, -gamma]).unwrap();
        let p = induced_policy_hinge(&s, g(gamma));
        assert_eq!(p.probs(), &[1.0, 0.0, 0.0]);

        // hinge values (2, 1, 0) with normalizer 3 = K
        let s = ScoreVector::new(vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(hinge_normalizer(&s, g(1.0)), 3.0);
        let p = induced_policy_hinge(&s, g(1.0));
        assert!(close(p.probs(), &[2.0 / 3.0, 1.0 / 3.0, 0.0], 1e-15));
    }

    #[test]
    fn ramp_policy_examples() {
        let p = induced_policy_ramp(&ScoreVector::new(vec![0.0, 0.0]).unwrap(), g(1.0));
        assert!(close(p.probs(), &[0.5, 0.5], 1e-15));
        let p = induced_policy_ramp(&ScoreVector::new(vec![1.0, -1.0]).unwrap(), g(1.0));
        assert!(close(p.probs(), &[1.0, 0.0], 1e-15));
        let p = induced_policy_ramp(&ScoreVector::new(vec![0.5, -0.5]).unwrap(), g(1.0));
        assert!(close(p.probs(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn smoothing_examples() {
        let p = ActionDistribution::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(smooth(&p, 0.0).unwrap().probs(), &[1.0, 0.0]);
        assert!(close(smooth(&p, 0.5).unwrap().probs(), &[0.5, 0.5], 1e-15));
        let p = ActionDistribution::new(vec![0.8, 0.2]).unwrap();
        assert!(close(smooth(&p, 0.1).unwrap().probs(), &[0.74, 0.26], 1e-15));
        assert!(smooth(&p, 0.51).is_err());
        assert!(smooth(&p, -0.01).is_err());
    }

    #[test]
    fn cc_hinge_examples() {
        let gamma = 0.3;
        for k in 2..=5 {
            let mut s = vec![-gamma; k];
            s[1] = k as f64 * gamma - gamma;
            let s = ScoreVector::new(s).unwrap();
            let loss = LossVector::new((0..k).map(|a| 0.1 * a as f64 + 0.05).collect()).unwrap();
            let v = cc_hinge_loss(&s, &loss, g(gamma)).unwrap();
            assert!((v - k as f64 * loss.values()[1]).abs() < 1e-12);
        }
        let s = ScoreVector::new(vec![0.0, 0.0]).unwrap();
        let l = LossVector::new(vec![0.2, 0.8]).unwrap();
        assert!((cc_hinge_loss(&s, &l, g(1.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cc_hinge_matches_term_by_term() {
        let s = ScoreVector::new(vec![0.3, -0.5, 0.2]).unwrap();
        let l = LossVector::new(vec![0.9, 0.4, 0.1]).unwrap();
        // γ = 0.25: hinge = (2.2, 0, 1.8)
        let expected = 0.9 * 2.2 + 0.4 * 0.0 + 0.1 * 1.8;
        assert!((cc_hinge_loss(&s, &l, g(0.25)).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn margin_loss_examples() {
        let s = ScoreVector::new(vec![0.0, 0.0]).unwrap();
        let l = LossVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(margin_loss(&s, &l, g(1.0)).unwrap(), 2.0);
        let gamma = 0.5;
        let s = ScoreVector::new(vec![-2.0 * gamma, 2.0 * gamma]).unwrap();
        let l = LossVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(margin_loss(&s, &l, g(gamma)).unwrap(), 0.0);
    }

    #[test]
    fn margin_loss_dominates_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let k = rng.random_range(2..6);
            let gamma = g(rng.random_range(0.1..2.0));
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = ScoreVector::centered(&raw).unwrap();
            let l = LossVector::new((0..k).map(|_| rng.random()).collect()).unwrap();
            let ml = margin_loss(&s, &l, gamma).unwrap();
            let rl = cc_ramp_loss(&s, &l, gamma).unwrap();
            assert!(rl <= ml + 1e-12);
        }
    }

    #[test]
    fn mc_hinge_examples() {
        let gamma = 0.2;
        let gs = [3.0 * gamma, 0.0, -3.0 * gamma];
        assert_eq!(mc_hinge_loss(&gs, 0, g(3.0 * gamma)).unwrap(), 0.0);
        let s = ScoreVector::centered(&gs).unwrap();
        let l = LossVector::new(vec![0.0, 1.0, 1.0]).unwrap();
        for tilde in [0.1, 1.0, 10.0] {
            assert!(cc_hinge_loss(&s, &l, g(tilde)).unwrap() >= 1.0);
        }
        for y in 0..3 {
            assert_eq!(mc_hinge_loss(&[0.7; 3], y, g(1.3)).unwrap(), 1.0);
        }
        assert!(mc_hinge_loss(&[1.0], 0, g(1.0)).is_err());
        assert!(mc_hinge_loss(&[1.0, 2.0], 2, g(1.0)).is_err());
    }

    #[test]
    fn sampling_follows_probabilities() {
        let p = ActionDistribution::new(vec![0.2, 0.0, 0.8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[p.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        let f0 = counts[0] as f64 / 20_000.0;
        assert!((f0 - 0.2).abs() < 0.02);
    }

    #[test]
    fn loss_vector_validation() {
        assert!(LossVector::bounded(vec![0.0, 1.0]).is_ok());
        assert!(LossVector::bounded(vec![1.5]).is_err());
        assert!(LossVector::new(vec![-0.1]).is_err());
        assert!(LossVector::new(vec![5.0]).is_ok());
        assert!(LossVector::one_hot(3, 3, 1.0).is_err());
    }
}

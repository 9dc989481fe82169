use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hinge_bandits::hinge_lmc::geometric_resample;
use hinge_bandits::oracles::{finite_diff_grad, truncated_geom_mean_closed_form};
use hinge_bandits::sampler::{LmcChain, LmcConfig, Potential};
use hinge_bandits::smooth_ftl::{epoch_start, FtlConfig, SmoothFtl};
use hinge_bandits::surrogate::{
    cc_hinge_loss, cc_ramp_loss, hinge_normalizer, induced_policy_hinge, induced_policy_ramp, margin_loss,
    ramp_normalizer, smooth,
};
use hinge_bandits::{ActionDistribution, Context, Learner, LossVector, Margin, ModelSpec, ParamVector, ScoreVector};

fn scores_and_loss() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..6).prop_flat_map(|k| (prop::collection::vec(-3.0..3.0f64, k), prop::collection::vec(0.0..=1.0f64, k)))
}

proptest! {
    #[test]
    fn surrogate_chains_hold((raw, loss) in scores_and_loss(), gamma in 0.05..2.0f64) {
        let s = ScoreVector::centered(&raw).unwrap();
        let l = LossVector::bounded(loss).unwrap();
        let g = Margin::new(gamma).unwrap();
        let k = s.len() as f64;
        let tol = 1e-12;

        prop_assert!(ramp_normalizer(&s, g) >= 1.0 - tol);
        prop_assert!(hinge_normalizer(&s, g) >= k - tol);

        let ramp_policy = induced_policy_ramp(&s, g).expected_loss(&l);
        let cc_ramp = cc_ramp_loss(&s, &l, g).unwrap();
        prop_assert!(ramp_policy <= cc_ramp + tol);
        prop_assert!(cc_ramp <= margin_loss(&s, &l, g).unwrap() + tol);

        let hinge_policy = induced_policy_hinge(&s, g).expected_loss(&l);
        prop_assert!(hinge_policy <= cc_hinge_loss(&s, &l, g).unwrap() / k + tol);
    }

    #[test]
    fn smoothing_floors_every_action(raw in prop::collection::vec(-3.0..3.0f64, 2..6), frac in 0.0..=1.0f64) {
        let s = ScoreVector::centered(&raw).unwrap();
        let p = induced_policy_hinge(&s, Margin::new(0.5).unwrap());
        let mu = frac / s.len() as f64;
        let q = smooth(&p, mu).unwrap();
        prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.probs().iter().all(|&v| v >= mu - 1e-15));
    }

    #[test]
    fn potential_gradient_matches_finite_differences(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec::new(2, 3, 2.0, 1.0).unwrap();
        let gamma = Margin::new(0.3).unwrap();
        let mut pot = Potential::new(spec, 0.7, gamma).unwrap();
        let mut xs = Vec::new();
        for _ in 0..4 {
            let x = Context::new(vec![rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)]);
            let l = LossVector::bounded((0..3).map(|_| rng.random::<f64>()).collect()).unwrap();
            xs.push(x.clone());
            pot.push(x, l).unwrap();
        }
        let theta = ParamVector::new((0..6).map(|_| rng.random_range(-0.8..0.8)).collect());
        // subgradients only equal derivatives away from the kink
        for x in &xs {
            let s = spec.predict(&theta, x).unwrap();
            prop_assume!(s.values().iter().all(|v| (v + 0.3).abs() > 1e-3));
        }
        let fd = finite_diff_grad(|t| pot.value(t), &theta, 1e-6).unwrap();
        let g = pot.subgradient(&theta).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            prop_assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn chain_never_leaves_the_ball() {
    let spec = ModelSpec::new(2, 2, 1.0, 1.0).unwrap();
    let mut pot = Potential::new(spec, 5.0, Margin::new(0.1).unwrap()).unwrap();
    pot.push(Context::new(vec![1.0, 0.0]), LossVector::bounded(vec![1.0, 0.0]).unwrap()).unwrap();
    let mut cfg = LmcConfig::practical(spec.radius());
    cfg.step_size = 2.0;
    let mut chain = LmcChain::new(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        chain.step(&pot, &cfg, &mut rng);
        assert!(chain.theta().norm() <= spec.radius() * (1.0 + 1e-12));
    }
    assert_eq!(chain.step_index(), 500);
}

#[test]
fn geometric_count_has_the_truncated_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (p, cap) in [(0.2, 8), (0.7, 3), (0.05, 40)] {
        let dist = ActionDistribution::new(vec![p, 1.0 - p]).unwrap();
        let n = 40_000;
        let total: usize = (0..n).map(|_| geometric_resample(0, cap, |_| Ok(dist.clone()), &mut rng).unwrap()).sum();
        let mean = total as f64 / n as f64;
        let exact = truncated_geom_mean_closed_form(p, cap);
        assert!((mean - exact).abs() < 0.03 * exact, "p={p}: {mean} vs {exact}");
    }
}

#[test]
fn smooth_ftl_refits_on_the_previous_epoch_only() {
    let spec = ModelSpec::new(1, 2, 1.0, 1.0).unwrap();
    let cfg = FtlConfig::practical(&spec, 64, Margin::new(0.5).unwrap(), 3);
    let mut ftl = SmoothFtl::new(spec, cfg).unwrap();
    for t in 1..=64u64 {
        let x = Context::new(vec![if t % 2 == 0 { 1.0 } else { -1.0 }]);
        let a = ftl.act(&x).unwrap();
        ftl.observe(if a.action == 0 { 0.0 } else { 1.0 }).unwrap();
    }
    let fits = ftl.fits();
    assert_eq!(fits.len(), 6);
    for (i, f) in fits.iter().enumerate() {
        let m = i as u32 + 1;
        assert_eq!(f.epoch, m);
        assert_eq!(f.round, epoch_start(m));
        assert_eq!(f.data_rounds, (epoch_start(m - 1), epoch_start(m) - 1));
        assert_eq!(f.samples as u64, epoch_start(m - 1));
    }
    assert_eq!(ftl.rounds(), 64);
}

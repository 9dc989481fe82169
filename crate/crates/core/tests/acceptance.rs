//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p hinge-bandits --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hinge_bandits::harness::{run_experiment, Algorithm, ExperimentConfig, ExperimentOutput};
use hinge_bandits::hinge_lmc::geometric_resample;
use hinge_bandits::model::ModelSpec;
use hinge_bandits::oracles::{
    compare_sampler_to_oracle, finite_diff_grad, grid_erm, truncated_geom_moments, GridSpec, SamplerInstance,
    SamplerTarget,
};
use hinge_bandits::smooth_ftl::{erm_hinge, hinge_objective, importance_weight, WeightedSample};
use hinge_bandits::surrogate::*;
use hinge_bandits::{ActionDistribution, Context, ParamVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&repo_root().join("configs").join(name)).expect("shipped config parses")
}

fn random_centered(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> ScoreVector {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(-scale..scale)).collect();
    ScoreVector::centered(&raw).unwrap()
}

fn random_loss(rng: &mut ChaCha8Rng, k: usize) -> LossVector {
    LossVector::bounded((0..k).map(|_| rng.random()).collect()).unwrap()
}

fn dot(p: &ActionDistribution, l: &LossVector) -> f64 {
    p.probs().iter().zip(l.values()).map(|(a, b)| a * b).sum()
}

fn c1_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for i in 0..10_000 {
        let k = [2, 3, 5][i % 3];
        let gamma = Margin::new(rng.random_range(0.1..2.0)).unwrap();
        let s = random_centered(&mut rng, k, 3.0);
        let l = random_loss(&mut rng, k);
        let ramp_pol = dot(&induced_policy_ramp(&s, gamma), &l);
        let ramp_sur = cc_ramp_loss(&s, &l, gamma).unwrap();
        let margin = margin_loss(&s, &l, gamma).unwrap();
        let hinge_pol = dot(&induced_policy_hinge(&s, gamma), &l);
        let hinge_sur = cc_hinge_loss(&s, &l, gamma).unwrap() / k as f64;
        let ok = ramp_pol <= ramp_sur + 1e-9
            && ramp_sur <= margin + 1e-9
            && hinge_pol <= hinge_sur + 1e-9
            && hinge_normalizer(&s, gamma) >= k as f64 - 1e-9
            && ramp_normalizer(&s, gamma) >= 1.0 - 1e-9;
        if !ok {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations over 10^4 draws"))
}

fn c2_realizability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut point_mass = true;
    for k in 2..=6usize {
        for _ in 0..100 {
            let gamma = Margin::new(rng.random_range(0.1..2.0)).unwrap();
            let star = rng.random_range(0..k);
            let g = gamma.get();
            let s: Vec<f64> = (0..k).map(|a| if a == star { k as f64 * g - g } else { -g }).collect();
            let s = ScoreVector::new(s).unwrap();
            let l = random_loss(&mut rng, k);
            let lhs = cc_hinge_loss(&s, &l, gamma).unwrap();
            let rhs = k as f64 * l.values()[star];
            worst = worst.max((lhs - rhs).abs() / rhs.max(1e-300));
            let p = induced_policy_hinge(&s, gamma);
            point_mass &= p.probs().iter().enumerate().all(|(a, &q)| q == if a == star { 1.0 } else { 0.0 });
        }
    }
    outcome(worst <= 1e-12 && point_mass, format!("max relative gap {worst:.2e}, point mass: {point_mass}"))
}

fn c3_cc_to_mc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=6);
        let gamma = Margin::new(rng.random_range(0.1..2.0)).unwrap();
        let star = rng.random_range(0..k);
        let mut s: Vec<f64> = (0..k).map(|_| -gamma.get() - rng.random_range(0.0..2.0)).collect();
        s[star] = 0.0;
        s[star] = -s.iter().sum::<f64>();
        let sv = ScoreVector::new(s.clone()).unwrap();
        let complement = LossVector::bounded((0..k).map(|a| if a == star { 0.0 } else { 1.0 }).collect()).unwrap();
        let cc = cc_hinge_loss(&sv, &complement, gamma).unwrap();
        let mc = mc_hinge_loss(&s, star, Margin::new(k as f64 * gamma.get()).unwrap()).unwrap();
        if cc != 0.0 || mc > 1e-12 {
            failures += 1;
        }
    }
    let g = 0.7;
    let counter = [3.0 * g, 0.0, -3.0 * g];
    let mc = mc_hinge_loss(&counter, 0, Margin::new(3.0 * g).unwrap()).unwrap();
    let sv = ScoreVector::new(counter.to_vec()).unwrap();
    let complement = LossVector::bounded(vec![0.0, 1.0, 1.0]).unwrap();
    let cc_min = [0.1, 1.0, 10.0]
        .iter()
        .map(|&t| cc_hinge_loss(&sv, &complement, Margin::new(t).unwrap()).unwrap())
        .fold(f64::INFINITY, f64::min);
    outcome(
        failures == 0 && mc == 0.0 && cc_min >= 1.0,
        format!("{failures} failures; counterexample mc = {mc}, min cc = {cc_min:.3}"),
    )
}

fn c4_unbiasedness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=6);
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = w.iter().sum();
        let p = ActionDistribution::new(w.iter().map(|v| v / total).collect()).unwrap();
        let l = random_loss(&mut rng, k);
        let mut mean = vec![0.0; k];
        for a in 0..k {
            let est = importance_weight(l.values()[a], a, &p).unwrap();
            mean.iter_mut().zip(est.values()).for_each(|(m, e)| *m += p.prob(a) * e);
        }
        for (m, v) in mean.iter().zip(l.values()) {
            worst = worst.max((m - v).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max coordinate error {worst:.2e}"))
}

fn c5_geometric() -> Outcome {
    let cap = 100;
    let mut details = Vec::new();
    let mut pass = true;
    for &p in &[0.1, 0.5] {
        let dist = ActionDistribution::new(vec![p, 1.0 - p]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += geometric_resample(0, cap, |_| Ok(dist.clone()), &mut rng).unwrap() as f64;
        }
        let want = (1.0 - (1.0 - p).powi(cap as i32)) / p;
        let rel = (sum / n as f64 - want).abs() / want;
        pass &= rel <= 0.01;
        details.push(format!("p={p}: rel err {rel:.4}"));
    }
    let mut dominated = true;
    for i in 1..=20 {
        let p = i as f64 / 20.0;
        for cap in [1, 2, 5, 10, 50, 100, 1000] {
            let m = truncated_geom_moments(p, cap).unwrap();
            dominated &= m.second_moment <= 2.0 / (p * p) + 1e-12;
        }
    }
    pass &= dominated;
    details.push(format!("second moment <= 2/p^2 on grid: {dominated}"));
    outcome(pass, details.join("; "))
}

fn c6_sampler() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for (target, name) in [(SamplerTarget::Ridge, "ridge"), (SamplerTarget::Hinge, "hinge")] {
        let instance = SamplerInstance::new(target, 1).unwrap();
        let d = compare_sampler_to_oracle(&instance, 5000, 6).unwrap();
        pass &= d.dim == 2 && d.mean_distance <= 0.1 && d.max_variance_rel_error <= 0.15;
        details.push(format!("{name}: mean dist {:.4}, var rel err {:.4}", d.mean_distance, d.max_variance_rel_error));
    }
    outcome(pass, details.join("; "))
}

fn c7_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 200 {
        let k = rng.random_range(2..=4);
        let dp = rng.random_range(1..=3);
        let spec = ModelSpec::new(dp, k, 2.0, 1.0).unwrap();
        let gamma = Margin::new(rng.random_range(0.2..1.5)).unwrap();
        let theta: Vec<f64> = (0..spec.dim()).map(|_| rng.random_range(-0.8..0.8)).collect();
        let x = Context::new((0..dp).map(|_| rng.random_range(-0.57..0.57)).collect());
        let loss = LossVector::new((0..k).map(|_| rng.random_range(0.0..3.0)).collect()).unwrap();
        let theta = ParamVector::new(theta);
        let s = spec.predict(&theta, &x).unwrap();
        if s.values().iter().any(|&v| (v + gamma.get()).abs() < 1e-3) {
            continue;
        }
        let g = spec.round_subgradient(&theta, &x, &loss, gamma).unwrap();
        let f = |t: &[f64]| {
            let s = spec.predict(&ParamVector::new(t.to_vec()), &x).unwrap();
            cc_hinge_loss(&s, &loss, gamma).unwrap()
        };
        let fd = finite_diff_grad(f, &theta, 1e-5).unwrap();
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(if gn > 0.0 { err / gn } else { err });
        checked += 1;
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.2e} over 200 points"))
}

fn c8_erm() -> Outcome {
    let spec = ModelSpec::new(2, 2, 1.0, 1.0).unwrap();
    let gamma = Margin::new(0.5).unwrap();
    let grid = GridSpec::within_budget(4, spec.radius(), 4_000_000).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + i);
        let samples: Vec<WeightedSample> = (0..20)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let p = rng.random_range(0.2..0.8);
                let (act, prop) = if rng.random::<f64>() < p { (0, p) } else { (1, 1.0 - p) };
                let l: f64 = rng.random();
                WeightedSample {
                    context: Context::new(vec![a.cos(), a.sin()]),
                    loss_estimate: LossVector::one_hot(2, act, l / prop).unwrap(),
                }
            })
            .collect();
        let erm = erm_hinge(&samples, &spec, gamma, 2000, 1.0).unwrap();
        let (_, best) = grid_erm(|t| hinge_objective(&samples, &spec, t, gamma), &grid).unwrap();
        worst = worst.max((erm.objective - best) / best);
    }
    outcome(
        worst <= 0.02,
        format!("worst (erm - grid)/grid = {worst:+.4} over 20 instances, grid {}^4", grid.resolution),
    )
}

fn final_fraction_loss(out: &ExperimentOutput, from_round: usize) -> f64 {
    let tail: Vec<f64> = out.records.iter().filter(|r| r.round > from_round).map(|r| r.observed_loss).collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn c9_hinge_lmc() -> Outcome {
    let cfg = load_config("hinge_lmc_realizable.toml");
    let mut base = cfg.clone();
    base.algorithm = Algorithm::UniformBaseline;
    base.hinge_lmc = None;
    let t = cfg.horizon;
    let cut = t - t / 5;
    let lmc = run_experiment(&cfg).unwrap();
    let uni = run_experiment(&base).unwrap();
    let (l_lmc, l_uni) = (final_fraction_loss(&lmc, cut), final_fraction_loss(&uni, cut));
    let improving = lmc
        .summary
        .per_replicate
        .iter()
        .filter(|r| {
            let q = &r.checkpoints[0];
            let e = r.checkpoints.last().unwrap();
            e.regret_theta_star.unwrap() / (e.round as f64) < q.regret_theta_star.unwrap() / (q.round as f64)
        })
        .count();
    outcome(
        l_lmc <= 0.5 * l_uni && improving >= 4 && cfg.replicates == 5 && t == 1000,
        format!("final-20% loss {l_lmc:.4} vs uniform {l_uni:.4}; average regret fell in {improving}/5 replicates"),
    )
}

fn c10_smooth_ftl() -> Outcome {
    let cfg = load_config("smooth_ftl_stochastic.toml");
    let out = run_experiment(&cfg).unwrap();
    let at = |round: usize| {
        out.summary.regret_checkpoints.iter().find(|c| c.round == round).map(|c| c.mean_regret_hindsight).unwrap()
    };
    let (half, full) = (at(2048), at(4096));
    let ratio = full / half;
    outcome(
        half > 0.0 && ratio <= 1.8 && cfg.replicates == 10 && cfg.horizon == 4096,
        format!("Reg(2048) = {half:.3}, Reg(4096) = {full:.3}, ratio {ratio:.3}"),
    )
}

fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

fn c11_bench_params() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_hinge-bandits"))
        .args(["bench-params", "--T", "10000", "--d", "6", "--K", "3", "--gamma", "0.25", "--radius", "2"])
        .output()
        .unwrap();
    if !out.status.success() {
        return outcome(false, format!("bench-params exited with {}", out.status));
    }
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = &json["params"];
    let get = |k: &str| p[k].as_f64().unwrap();
    // T = 10^4, d = 6, K = 3, γ = 1/4, R = 2, L = 2, B = R·L = 4, B_ℓ = √T = 100
    let log_factor = (2.0f64 * 2.0 * 10_000.0 * 3.0 / 0.25).ln();
    let eta = (6.0 * 0.0625 * log_factor / (5.0 * 9.0 * 16.0 * 10_000.0)).sqrt();
    let want = [
        ("smoothing_width", 1.0 / (1_000_000.0 * 2.0 * 100.0 * 2.0 * eta * 6f64.sqrt())),
        ("ridge", 1.0 / (8.0 * 100.0 * 8.0)),
        ("mu", 1.0 / 300.0),
        ("resample_cap", 100.0),
    ];
    let mismatches: Vec<String> = want
        .iter()
        .filter(|(k, v)| sig12(get(k)) != sig12(*v))
        .map(|(k, v)| format!("{k}: got {} want {}", sig12(get(k)), sig12(*v)))
        .collect();
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!(
                "u = {}, lambda = {}, mu = {}, M = {}",
                sig12(want[0].1),
                sig12(want[1].1),
                sig12(want[2].1),
                want[3].1
            )
        } else {
            mismatches.join("; ")
        },
    )
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut results = Vec::new();
    for name in ["hinge_lmc_realizable.toml", "smooth_ftl_stochastic.toml"] {
        let mut cfg = load_config(name);
        cfg.horizon = cfg.horizon.min(300);
        cfg.replicates = 3;
        cfg.output.dir = dir.path().join(name);
        let path = dir.path().join(format!("{name}.toml"));
        std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
        let mut runs = Vec::new();
        for _ in 0..2 {
            let status = Command::new(env!("CARGO_BIN_EXE_hinge-bandits"))
                .args(["run", "--config"])
                .arg(&path)
                .args(["--seed", "42"])
                .output()
                .unwrap()
                .status;
            assert!(status.success());
            runs.push((
                std::fs::read(cfg.output.csv_path()).unwrap(),
                std::fs::read(cfg.output.summary_path()).unwrap(),
            ));
        }
        results.push(runs[0] == runs[1]);
    }
    outcome(results.iter().all(|&r| r), format!("byte-identical reruns: {results:?}"))
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "calibration suite", Duration::from_secs(5), c1_calibration),
        (2, "hinge realizability", Duration::from_secs(1), c2_realizability),
        (3, "CC implies MC", Duration::from_secs(1), c3_cc_to_mc),
        (4, "importance weighting", Duration::MAX, c4_unbiasedness),
        (5, "geometric resampling", Duration::from_secs(10), c5_geometric),
        (6, "sampler vs oracle", Duration::from_secs(120), c6_sampler),
        (7, "gradient correctness", Duration::from_secs(5), c7_gradient),
        (8, "ERM solver", Duration::from_secs(30), c8_erm),
        (9, "Hinge-LMC regret trend", Duration::from_secs(600), c9_hinge_lmc),
        (10, "SmoothFTL sublinearity", Duration::from_secs(300), c10_smooth_ftl),
        (11, "theoretical parameters", Duration::from_secs(1), c11_bench_params),
        (12, "determinism", Duration::MAX, c12_determinism),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        let limit =
            if budget == Duration::MAX { String::new() } else { format!(" / limit {:.0} s", budget.as_secs_f64()) };
        println!(
            "criterion {id:>2} {}  {name}: {} ({:.2} s{limit})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

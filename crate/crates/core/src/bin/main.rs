use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hinge_bandits::harness::{self, ExperimentConfig};
use hinge_bandits::oracles::{compare_sampler_to_oracle, SamplerInstance, SamplerTarget};
use hinge_bandits::sampler::{theoretical_params, TheoryInputs};
use hinge_bandits::{Error, Result};

#[derive(Parser)]
#[command(name = "hinge-bandits", version, about = "Contextual bandit experiments with hinge surrogate losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Ridge,
    Hinge,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the Langevin sampler with the rejection oracle.
    SampleTest {
        /// Context dimension; the parameter has two blocks of this size.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=2))]
        dim: u64,
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Target::Hinge)]
        target: Target,
        /// Write the diagnostics here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot the regret curves of a run summary as SVG.
    Plot {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the worst-case sampler and learner parameters.
    BenchParams {
        #[arg(long = "T")]
        horizon: f64,
        /// Parameter dimension.
        #[arg(long)]
        d: usize,
        #[arg(long = "K")]
        actions: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Score Lipschitz constant; defaults to 2 (unit contexts).
        #[arg(long, default_value_t = 2.0)]
        lipschitz: f64,
        /// Score bound; defaults to `radius * lipschitz`.
        #[arg(long)]
        score_bound: Option<f64>,
        /// Bound on the loss estimates; defaults to `√T`.
        #[arg(long)]
        loss_bound: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
    },
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out_dir, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(dir) = out_dir {
                cfg.output.dir = dir;
            }
            let result = harness::run_experiment(&cfg)?;
            let files = harness::write_outputs(&result, &cfg.output)?;
            for c in &result.summary.regret_checkpoints {
                println!(
                    "round {:>7}  mean loss {:>12}  regret (hindsight) {:>12}{}",
                    c.round,
                    c.mean_cumulative_loss,
                    c.mean_regret_hindsight,
                    c.mean_regret_theta_star.map(|r| format!("  regret (theta*) {r:>12}")).unwrap_or_default()
                );
            }
            println!("wrote {}, {}, {}", files.csv.display(), files.summary.display(), files.svg.display());
        }
        Command::SampleTest { dim, samples, seed, target, out } => {
            let target = match target {
                Target::Ridge => SamplerTarget::Ridge,
                Target::Hinge => SamplerTarget::Hinge,
            };
            let instance = SamplerInstance::new(target, dim as usize)?;
            let diag = compare_sampler_to_oracle(&instance, samples, seed)?;
            let json = to_json(&diag)?;
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
        Command::Plot { summary, out } => {
            let summary = harness::read_summary(&summary)?;
            harness::emit_svg(&harness::regret_series(&summary), &out)?;
        }
        Command::BenchParams { horizon, d, actions, gamma, radius, lipschitz, score_bound, loss_bound, eta } => {
            let inputs = TheoryInputs {
                horizon,
                dim: d,
                actions,
                radius,
                lipschitz,
                score_bound: score_bound.unwrap_or(radius * lipschitz),
                gamma,
                loss_bound: loss_bound.unwrap_or(horizon.sqrt()),
                eta,
            };
            let params = theoretical_params(&inputs).map_err(|e| Error::Config(e.to_string()))?;
            println!("{}", to_json(&serde_json::json!({ "inputs": inputs, "params": params }))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

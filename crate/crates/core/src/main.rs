use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use agent_predict::config::ExperimentConfig;
use agent_predict::error::Error;
use agent_predict::experiment::{self, predictor_seed, replay, run_experiment, write_outputs};
use agent_predict::io;
use agent_predict::predictor::EmptySetPolicy;
use agent_predict::types::RegretBudget;
use agent_predict::validation::{run_suite, Suite};

/// Predict a low-regret bandit agent's arms from public costs and its past choices.
#[derive(Debug, Parser)]
#[command(name = "agent-predict", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict every round of a logged transcript (`t,c_1..c_k,a`).
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        /// Where to write `t,p,w_1..w_k,a`.
        #[arg(long)]
        out: PathBuf,
        /// Take budget, sampler and seed from an experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `zero`, `constant:C`, `log:C`, `sqrt:C` or `envelope:C`; ignored with --config.
        #[arg(long, default_value = "zero")]
        budget: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Relax the budget instead of failing when the set empties.
        #[arg(long)]
        double_budget: bool,
    },
    /// Run built-in self-checks.
    Validate {
        /// core, consistent_set, sampler, predictor, lemma1, lower_bound, metrics or all.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one config over many seeds.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Per-seed outputs go to `<out-dir>/seed-<s>/`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn parse_budget(spec: &str, k: usize) -> Result<RegretBudget, Error> {
    let (kind, coefficient) = match spec.split_once(':') {
        Some((kind, c)) => {
            let c = c.parse::<f64>().map_err(|_| Error::Usage(format!("bad budget coefficient in {spec:?}")))?;
            (kind, c)
        }
        None => (spec, 0.0),
    };
    let budget = match kind {
        "zero" => RegretBudget::Zero,
        "constant" => RegretBudget::Constant { coefficient },
        "log" => RegretBudget::Log { coefficient },
        "sqrt" => RegretBudget::Sqrt { coefficient },
        "envelope" => RegretBudget::Envelope { coefficient, arms: k },
        _ => return Err(Error::Usage(format!("unknown budget {spec:?}"))),
    };
    budget.validate()?;
    Ok(budget)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) | Error::Config(_) | Error::Parse { .. } | Error::Io(_) => 2,
        _ => 1,
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}"))
}

fn execute(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run { config, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let outcome = run_experiment(&cfg)?;
            write_outputs(&cfg, &outcome)?;
            println!("{}", to_json(&outcome.summary));
            Ok(0)
        }
        Command::Replay { transcript, out, config, budget, seed, double_budget } => {
            let history = io::read_transcript(&transcript)?;
            let k = history.k();
            let mut pc = match &config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(path)?;
                    if cfg.k != k {
                        return Err(Error::Config(format!("config has k = {}, transcript has k = {k}", cfg.k)));
                    }
                    experiment::predictor_config(&cfg)
                }
                None => experiment::replay_config(k, parse_budget(&budget, k)?, 0, EmptySetPolicy::Abort),
            };
            if let Some(seed) = seed {
                pc.seed = predictor_seed(seed);
            }
            if double_budget {
                pc.empty_set_policy = EmptySetPolicy::DoubleBudget;
            }
            let outcome = replay(&history, pc)?;
            io::save_predictions(&out, k, &outcome.rows)?;
            println!("{{\"rounds\": {}, \"mismatches\": {}}}", outcome.rows.len(), outcome.mismatches);
            Ok(0)
        }
        Command::Validate { suite, seed } => {
            let suite: Suite = suite.parse()?;
            let checks = run_suite(suite, seed);
            for c in &checks {
                println!("{} [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {failed} failed", checks.len());
            Ok(u8::from(failed > 0))
        }
        Command::Bench { config, seeds, first_seed, out_dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seeds: Vec<u64> = (first_seed..first_seed + seeds).collect();
            info!("running {} seeds", seeds.len());
            let report = experiment::bench(&cfg, &seeds, out_dir.as_deref());
            println!("{}", to_json(&report));
            Ok(u8::from(!report.failures.is_empty()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

//! `pdcl`: scenario management, training, verification and benchmarking.

mod bench;
mod config;
mod rundir;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pdcl::agents::{evaluate, write_summaries, Checkpoint, RunSummary};
use pdcl::fixtures::historical_scheme;
use pdcl::pattern::{extract_pattern, match_patterns, reward_rz};
use pdcl::search::lower_bound_of;
use pdcl::sim::{GreedyLower, LowerPolicy};
use pdcl::verify::{check_scheme, compile_scheme};
use pdcl::{makespan, ScenarioConfig, SchedulingScheme};

use crate::config::ExperimentConfig;
use crate::rundir::RunDir;

#[derive(Debug, Parser)]
#[command(name = "pdcl", version, about = "Pattern-driven correctness learning for job-shop scheduling")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory that receives one run-stamped subdirectory per invocation.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a scenario and its historical reference scheme.
    Scenario(ScenarioArgs),
    /// Train upper-layer policies for every (algorithm, alpha, seed).
    Train(train::TrainArgs),
    /// Verify a scheme; exit 0 if Verified, 1 if not, 2 on bad input.
    Verify(VerifyArgs),
    /// Print the priority pattern of a scheme.
    Pattern(PatternArgs),
    /// Evaluate a checkpoint greedily.
    Eval(EvalArgs),
    /// Build the comparison table from finished training runs.
    Bench(bench::BenchArgs),
}

/// Scenario selection shared by several commands.
#[derive(Debug, Args, Clone, Default)]
pub struct ScenarioSel {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "tasks")]
    scenario: Option<PathBuf>,
    /// Size of the built-in scenario.
    #[arg(long)]
    tasks: Option<usize>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[command(flatten)]
    sel: ScenarioSel,
    /// Override the number of cars.
    #[arg(long)]
    cars: Option<usize>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Scheme CSV.
    scheme: PathBuf,
    #[command(flatten)]
    sel: ScenarioSel,
}

#[derive(Debug, Args)]
struct PatternArgs {
    /// Scheme CSV.
    scheme: PathBuf,
    /// Historical scheme to match against.
    #[arg(long)]
    against: Option<PathBuf>,
    /// Pattern weight used to report r_z.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[command(flatten)]
    sel: ScenarioSel,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint written by `pdcl train`.
    checkpoint: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    match cli.command {
        Command::Scenario(args) => cmd_scenario(&cli.out_dir, &cfg, cli.seed, args),
        Command::Train(args) => train::cmd_train(&cli.out_dir, cfg, cli.seed, args),
        Command::Verify(args) => cmd_verify(&cli.out_dir, &cfg, args),
        Command::Pattern(args) => cmd_pattern(&cli.out_dir, &cfg, args),
        Command::Eval(args) => cmd_eval(&cli.out_dir, cli.seed, args),
        Command::Bench(args) => bench::cmd_bench(&cli.out_dir, args),
    }
}

pub fn read_scheme(path: &Path) -> Result<SchedulingScheme> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SchedulingScheme::from_csv_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_scenario(out: &Path, cfg: &ExperimentConfig, seed: Option<u64>, args: ScenarioArgs) -> Result<ExitCode> {
    let mut scenario = cfg.scenario(&args.sel)?;
    if let Some(cars) = args.cars {
        scenario = ScenarioConfig::new(scenario.tasks, scenario.equipment, cars, scenario.car_init_seed)?;
    }
    if let Some(seed) = seed {
        scenario.car_init_seed = seed;
    }
    let historical = historical_scheme(&scenario);
    let dir = RunDir::create(out, "scenario")?;
    dir.write("scenario.toml", scenario.to_toml())?;
    dir.write("historical.csv", historical.to_csv_string())?;
    println!(
        "{} tasks, {} operations, {} cars, total work {}, lower bound {}, historical makespan {}",
        scenario.n_tasks(),
        scenario.n_total(),
        scenario.cars,
        scenario.total_work(),
        lower_bound_of(&scenario),
        makespan(&historical, &scenario)?
    );
    println!("wrote {}", dir.path().display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(out: &Path, cfg: &ExperimentConfig, args: VerifyArgs) -> Result<ExitCode> {
    let scheme = read_scheme(&args.scheme)?;
    let scenario = cfg.scenario(&args.sel)?;
    let dir = RunDir::create(out, "verify")?;
    let report = match check_scheme(&scheme, &scenario, None) {
        Ok(report) => report,
        Err(err) => {
            let text = format!("verdict: rejected\nreason: {err}\n");
            dir.write("report.txt", &text)?;
            print!("{text}");
            return Ok(ExitCode::from(1));
        }
    };
    let program = compile_scheme(&scheme, Some(&scenario))?;
    dir.write("program.mljss", program.source())?;
    dir.write("report.txt", report.render())?;
    print!("{}", report.render());
    Ok(if report.is_verified() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_pattern(out: &Path, cfg: &ExperimentConfig, args: PatternArgs) -> Result<ExitCode> {
    let scenario = cfg.scenario(&args.sel)?;
    let pattern_of = |path: &Path| -> Result<_> {
        let report = check_scheme(&read_scheme(path)?, &scenario, None)?;
        anyhow::ensure!(report.is_verified(), "{} is not Verified: {}", path.display(), report.verdict);
        Ok(extract_pattern(&report)?)
    };
    let pattern = pattern_of(&args.scheme)?;
    let dir = RunDir::create(out, "pattern")?;
    dir.write("pattern.txt", pattern.to_string())?;
    print!("{pattern}");
    if let Some(path) = &args.against {
        let historical = pattern_of(path)?;
        let m = match_patterns(&pattern, &historical, &scenario)?;
        let mut reward = cfg.train.reward;
        reward.alpha = args.alpha;
        let line = format!(
            "matched {} of {} historical relations, r_z {:.4} at alpha {}\n",
            m.mu_match,
            m.mu_total,
            reward_rz(&m, &reward),
            args.alpha
        );
        dir.write("match.txt", &line)?;
        eprint!("{line}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(out: &Path, seed: Option<u64>, args: EvalArgs) -> Result<ExitCode> {
    let ck = Checkpoint::load(&args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let scenario = ck.scenario()?;
    let net_lower = ck.lower_policy()?;
    let lower: &dyn LowerPolicy = match &net_lower {
        Some(l) => l,
        None => &GreedyLower,
    };
    let mut policy = ck.learner.policy();
    let r = evaluate(&mut policy, &scenario, lower, ck.config.reward, seed.unwrap_or(ck.config.seed))?;
    let dir = RunDir::create(out, "eval")?;
    if let Some(scheme) = &r.scheme {
        dir.write("scheme.csv", scheme.to_csv_string())?;
    }
    let summary = RunSummary {
        algorithm: ck.config.algorithm,
        alpha: ck.config.reward.alpha,
        seed: ck.config.seed,
        steps: ck.step,
        comt: r.comt,
        cum_reward: r.cum_reward,
        dect_total_ms: r.dect_total_ms,
        dect_mean_ms: r.dect_mean_ms,
        trat_min: 0.0,
        verified: r.verified,
    };
    let mut buf = Vec::new();
    write_summaries(&mut buf, &[summary])?;
    dir.write("summary.csv", buf)?;
    println!(
        "ComT {}, CumR {:.6}, {} decisions, DecT {:.3} ms total, verified {}",
        r.comt.map_or("DNF".to_string(), |c| c.to_string()),
        r.cum_reward,
        r.decisions,
        r.dect_total_ms,
        r.verified
    );
    println!("wrote {}", dir.path().display());
    Ok(ExitCode::SUCCESS)
}

//! `pdcl train`: one run per (algorithm, alpha, seed).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use pdcl::agents::{
    evaluate, train_lower, write_metrics, write_summaries, Algorithm, Checkpoint, EpisodeMetrics, NetLower,
    RunSummary, TrainConfig, UpperTrainer,
};
use pdcl::pattern::pattern_of_scheme;
use pdcl::sim::{GreedyLower, LowerPolicy};
use pdcl::ScenarioConfig;

use crate::config::ExperimentConfig;
use crate::rundir::RunDir;
use crate::ScenarioSel;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Algorithms to train (comma separated): dqn, ddqn, dueling, ppo.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    /// Pattern weights (comma separated); 0 is the baseline.
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Seeds (comma separated). Defaults to `--seed`, then the config file.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Upper-layer training steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Upper-layer learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Lower-layer training steps; 0 keeps the greedy car choice.
    #[arg(long)]
    lower_steps: Option<usize>,
    /// Continue a run from its checkpoint up to `--steps`.
    #[arg(long, conflicts_with_all = ["algorithms", "alphas", "seeds"])]
    resume: Option<PathBuf>,
    #[command(flatten)]
    sel: ScenarioSel,
}

/// Directory name of one run inside `runs/`.
pub fn run_name(algorithm: Algorithm, alpha: f64, seed: u64) -> String {
    format!("{algorithm}-a{alpha}-s{seed}")
}

pub fn cmd_train(out: &Path, mut cfg: ExperimentConfig, seed: Option<u64>, args: TrainArgs) -> Result<ExitCode> {
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    if let Some(lr) = args.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(steps) = args.lower_steps {
        cfg.train.lower.steps = steps;
    }
    if let Some(path) = &args.resume {
        return resume(out, &cfg, path, args.steps);
    }
    if !args.algorithms.is_empty() {
        cfg.algorithms = args.algorithms.clone();
    }
    if !args.alphas.is_empty() {
        cfg.alphas = args.alphas.clone();
    }
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds.clone();
    } else if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    cfg.validate()?;

    let scenario = cfg.scenario(&args.sel)?;
    let historical_scheme = cfg.historical(&scenario)?;
    let historical = pattern_of_scheme(&historical_scheme, &scenario).context("historical scheme")?;
    let dir = RunDir::create(out, "train")?;
    dir.write("experiment.toml", toml::to_string(&cfg)?)?;
    dir.write("scenario.toml", scenario.to_toml())?;
    dir.write("historical.csv", historical_scheme.to_csv_string())?;

    let mut lowers: BTreeMap<u64, Option<NetLower>> = BTreeMap::new();
    let mut summaries = Vec::new();
    let mut failed = 0;
    for &seed in &cfg.seeds {
        for &algorithm in &cfg.algorithms {
            for &alpha in &cfg.alphas {
                let mut run_cfg = cfg.train.clone();
                run_cfg.algorithm = algorithm;
                run_cfg.seed = seed;
                run_cfg.reward.alpha = alpha;
                let lower = match lowers.get(&seed) {
                    Some(l) => l.clone(),
                    None => {
                        let l = frozen_lower(&scenario, &run_cfg)?;
                        lowers.insert(seed, l.clone());
                        l
                    }
                };
                let trainer = UpperTrainer::new(&scenario, &run_cfg, Some(historical.clone()))?;
                match run_one(&dir, trainer, lower.as_ref(), run_cfg.steps) {
                    Ok(s) => summaries.push(s),
                    Err(err) => {
                        eprintln!("{}: {err:#}", run_name(algorithm, alpha, seed));
                        failed += 1;
                    }
                }
            }
        }
    }
    let mut buf = Vec::new();
    write_summaries(&mut buf, &summaries)?;
    dir.write("summary.csv", buf)?;
    println!("wrote {}", dir.path().display());
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failed} run(s) failed; partial results kept");
        ExitCode::from(1)
    })
}

fn frozen_lower(scenario: &ScenarioConfig, cfg: &TrainConfig) -> Result<Option<NetLower>> {
    if cfg.lower.steps == 0 {
        return Ok(None);
    }
    let started = Instant::now();
    let run = train_lower(scenario, &cfg.lower, cfg.reward, cfg.seed)?;
    eprintln!(
        "lower layer seed {}: {} episodes in {:.1}s",
        cfg.seed,
        run.episode_rewards.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(Some(run.policy))
}

fn resume(out: &Path, cfg: &ExperimentConfig, path: &Path, steps: Option<usize>) -> Result<ExitCode> {
    let mut ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(steps) = steps {
        ck.config.steps = steps;
    }
    let scenario = ck.scenario()?;
    let historical = pattern_of_scheme(&cfg.historical(&scenario)?, &scenario).context("historical scheme")?;
    let trainer = ck.resume(Some(historical))?;
    let lower = ck.lower_policy()?;
    let dir = RunDir::create(out, "train")?;
    dir.write("scenario.toml", scenario.to_toml())?;
    let summary = run_one(&dir, trainer, lower.as_ref(), ck.config.steps)?;
    let mut buf = Vec::new();
    write_summaries(&mut buf, &[summary])?;
    dir.write("summary.csv", buf)?;
    println!("wrote {}", dir.path().display());
    Ok(ExitCode::SUCCESS)
}

/// Trains, evaluates and writes `runs/<name>/`. Metrics gathered before a
/// failure are still written.
fn run_one(dir: &RunDir, mut trainer: UpperTrainer, lower: Option<&NetLower>, until: usize) -> Result<RunSummary> {
    let cfg = trainer.config().clone();
    let name = format!("runs/{}", run_name(cfg.algorithm, cfg.reward.alpha, cfg.seed));
    let frozen: &dyn LowerPolicy = match lower {
        Some(l) => l,
        None => &GreedyLower,
    };
    let started = Instant::now();
    let mut episodes: Vec<EpisodeMetrics> = Vec::new();
    let trained = trainer.run_until(until, frozen, &mut |m| episodes.push(m.clone()));
    let trat_min = started.elapsed().as_secs_f64() / 60.0;
    let mut buf = Vec::new();
    write_metrics(&mut buf, &episodes)?;
    dir.write(&format!("{name}/metrics.csv"), buf)?;
    trained?;
    Checkpoint::of(&trainer, lower).save(&dir.path().join(format!("{name}/checkpoint.json")))?;

    let mut policy = trainer.policy();
    let r = evaluate(&mut policy, trainer.scenario(), frozen, cfg.reward, cfg.seed)?;
    if let Some(scheme) = &r.scheme {
        dir.write(&format!("{name}/scheme.csv"), scheme.to_csv_string())?;
    }
    let summary = RunSummary {
        algorithm: cfg.algorithm,
        alpha: cfg.reward.alpha,
        seed: cfg.seed,
        steps: trainer.step(),
        comt: r.comt,
        cum_reward: r.cum_reward,
        dect_total_ms: r.dect_total_ms,
        dect_mean_ms: r.dect_mean_ms,
        trat_min,
        verified: r.verified,
    };
    let mut buf = Vec::new();
    write_summaries(&mut buf, std::slice::from_ref(&summary))?;
    dir.write(&format!("{name}/summary.csv"), buf)?;
    let gate = trainer.gate();
    eprintln!(
        "{}: ComT {}, {} episodes ({} verified, r_z added {}), {:.1}s",
        run_name(cfg.algorithm, cfg.reward.alpha, cfg.seed),
        r.comt.map_or("DNF".to_string(), |c| c.to_string()),
        episodes.len(),
        gate.verified,
        gate.rz_added,
        trat_min * 60.0
    );
    Ok(summary)
}

//! Upper-layer training: task selection over a frozen car-selection policy.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, TrainConfig};
use super::dqn::DqnAgent;
use super::lower::episode_seed;
use super::metrics::EpisodeMetrics;
use super::net::{argmax, DenseNet};
use super::ppo::{PpoAgent, Rollout};
use super::replay::{ReplayBuffer, Transition};
use super::AgentError;
use crate::ids::TaskId;
use crate::pattern::{extract_pattern, match_patterns, reward_rz, PriorityPattern};
use crate::scenario::ScenarioConfig;
use crate::sim::{JobShopEnv, LowerPolicy, UpperState};
use crate::verify::check_scheme;

/// Anything that picks the next task from an upper observation.
pub trait TaskPolicy {
    fn choose(&mut self, state: &UpperState, scenario: &ScenarioConfig) -> TaskId;
}

/// Greedy task choice of a trained network (Q values or policy logits).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperPolicy {
    pub algorithm: Algorithm,
    pub net: DenseNet,
}

impl TaskPolicy for UpperPolicy {
    fn choose(&mut self, state: &UpperState, scenario: &ScenarioConfig) -> TaskId {
        TaskId(argmax(&self.net.forward(&state.features(scenario))))
    }
}

/// Counters around the verification gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateStats {
    /// Episodes that placed every assignment.
    pub completed: usize,
    pub verified: usize,
    /// Completed episodes whose scheme failed verification.
    pub rejected: usize,
    pub rz_added: usize,
    /// `r_z` additions on an incomplete or unverified episode.
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Learner {
    Value(DqnAgent),
    Policy(PpoAgent),
}

impl Learner {
    pub fn new(scenario: &ScenarioConfig, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let inputs = UpperState::feature_len(scenario);
        let outputs = scenario.n_tasks();
        match cfg.algorithm {
            Algorithm::Ppo => Learner::Policy(PpoAgent::new(
                inputs,
                outputs,
                &cfg.hidden,
                cfg.activation(),
                cfg.learning_rate,
                cfg.gamma,
                cfg.ppo,
                rng,
            )),
            algorithm => Learner::Value(DqnAgent::new(
                algorithm,
                inputs,
                outputs,
                &cfg.hidden,
                cfg.activation(),
                cfg.learning_rate,
                cfg.gamma,
                cfg.dqn,
                rng,
            )),
        }
    }

    pub fn policy(&self) -> UpperPolicy {
        match self {
            Learner::Value(a) => UpperPolicy {
                algorithm: a.algorithm,
                net: a.online.clone(),
            },
            Learner::Policy(a) => UpperPolicy {
                algorithm: Algorithm::Ppo,
                net: a.actor.clone(),
            },
        }
    }
}

/// What the verification gate returned for one finished episode.
struct GateOutcome {
    verified: bool,
    mu_match: usize,
    mu_total: usize,
    r_z: f64,
}

/// Resumable upper-layer training state.
#[derive(Debug)]
pub struct UpperTrainer {
    scenario: ScenarioConfig,
    cfg: TrainConfig,
    learner: Learner,
    historical: Option<PriorityPattern>,
    replay: ReplayBuffer,
    step: usize,
    episodes: usize,
    gate: GateStats,
}

impl UpperTrainer {
    pub fn new(
        scenario: &ScenarioConfig,
        cfg: &TrainConfig,
        historical: Option<PriorityPattern>,
    ) -> Result<Self, AgentError> {
        cfg.validate().map_err(AgentError::Config)?;
        if let Some(h) = &historical {
            h.check_namespace(scenario)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let learner = Learner::new(scenario, cfg, &mut rng);
        Ok(Self::assemble(scenario, cfg, learner, historical, 0, 0, GateStats::default()))
    }

    pub(crate) fn assemble(
        scenario: &ScenarioConfig,
        cfg: &TrainConfig,
        learner: Learner,
        historical: Option<PriorityPattern>,
        step: usize,
        episodes: usize,
        gate: GateStats,
    ) -> Self {
        UpperTrainer {
            scenario: scenario.clone(),
            replay: ReplayBuffer::new(cfg.dqn.buffer_size.max(1)),
            cfg: cfg.clone(),
            learner,
            historical,
            step,
            episodes,
            gate,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn gate(&self) -> GateStats {
        self.gate
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn policy(&self) -> UpperPolicy {
        self.learner.policy()
    }

    /// Verifies the scheme of a completed episode and, if it verifies,
    /// scores it against the historical pattern.
    fn verification_gate(&mut self, env: &JobShopEnv) -> GateOutcome {
        let mut out = GateOutcome {
            verified: false,
            mu_match: 0,
            mu_total: self.historical.as_ref().map_or(0, PriorityPattern::len),
            r_z: 0.0,
        };
        if !env.is_complete() {
            return out;
        }
        self.gate.completed += 1;
        let report = env
            .emit_scheme()
            .ok()
            .and_then(|scheme| check_scheme(&scheme, &self.scenario, None).ok());
        let Some(report) = report.filter(|r| r.is_verified()) else {
            self.gate.rejected += 1;
            return out;
        };
        out.verified = true;
        self.gate.verified += 1;
        let Some(historical) = &self.historical else {
            return out;
        };
        let pattern = extract_pattern(&report).expect("report is verified");
        let m = match_patterns(&pattern, historical, &self.scenario)
            .expect("namespaces checked at construction");
        out.mu_match = m.mu_match;
        out.r_z = reward_rz(&m, &self.cfg.reward);
        if !(env.placed() == env.n_total() && report.is_verified()) {
            self.gate.violations += 1;
        }
        self.gate.rz_added += 1;
        out
    }

    /// Trains until the step counter reaches `until`, calling `on_episode`
    /// after every finished episode. An episode still running at `until`
    /// is dropped.
    pub fn run_until(
        &mut self,
        until: usize,
        lower: &dyn LowerPolicy,
        on_episode: &mut dyn FnMut(&EpisodeMetrics),
    ) -> Result<(), AgentError> {
        let scenario = self.scenario.clone();
        let total = self.cfg.steps;
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(self.cfg.seed, self.step as u64) ^ 0x5851_f42d);
        let (reward_cfg, seed) = (self.cfg.reward, self.cfg.seed);
        let new_env = |episode: usize| {
            JobShopEnv::upper_reset(&scenario, reward_cfg, episode_seed(seed, episode as u64))
        };
        let (mut env, mut state) = new_env(self.episodes);
        let mut rollout = Rollout::default();
        let (mut cum, mut ep_steps) = (0.0, 0usize);
        while self.step < until {
            let x = state.features(&scenario);
            let (action, logp, value) = match &self.learner {
                Learner::Value(a) => (a.act(&x, self.cfg.epsilon.at(self.step, total), &mut rng), 0.0, 0.0),
                Learner::Policy(a) => a.act(&x, &mut rng),
            };
            let out = env.upper_step(TaskId(action), lower)?;
            cum += out.reward;
            ep_steps += 1;
            let mut reward = out.reward;
            let gate = out.done.then(|| self.verification_gate(&env));
            if let Some(g) = &gate {
                reward += g.r_z;
            }
            let next_x = out.next_state.features(&scenario);
            // running out of budget is a time limit, not a terminal state
            let terminal = env.is_complete();
            let step = self.step;
            self.step += 1;
            match &mut self.learner {
                Learner::Value(a) => {
                    self.replay.push(Transition {
                        state: x,
                        action,
                        reward,
                        next_state: next_x.clone(),
                        done: terminal,
                    });
                    let p = a.params;
                    if self.step >= p.learning_starts
                        && self.replay.len() >= p.batch_size
                        && self.step % p.train_freq == 0
                    {
                        let batch = self.replay.sample(p.batch_size, &mut rng);
                        a.train_batch(&batch).map_err(|e| e.at_step(step))?;
                    }
                    if self.step % p.target_update == 0 {
                        a.sync_target();
                    }
                }
                Learner::Policy(a) => {
                    if out.done && !terminal {
                        reward += a.gamma * a.value(&next_x);
                    }
                    rollout.push(x, action, logp, value, reward, out.done);
                    if rollout.len() == a.params.n_steps || self.step == until {
                        let last = if out.done { 0.0 } else { a.value(&next_x) };
                        a.update(&rollout, last, &mut rng).map_err(|e| e.at_step(step))?;
                        rollout.clear();
                    }
                }
            }
            state = out.next_state;
            if let Some(g) = gate {
                let metrics = EpisodeMetrics {
                    episode: self.episodes,
                    comt: env.is_complete().then(|| env.horizon()),
                    cum_reward: cum,
                    r_z: g.r_z,
                    verified: g.verified,
                    mu_match: g.mu_match,
                    mu_total: g.mu_total,
                    steps: ep_steps,
                };
                on_episode(&metrics);
                self.episodes += 1;
                (env, state) = new_env(self.episodes);
                (cum, ep_steps) = (0.0, 0);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct UpperRun {
    pub policy: UpperPolicy,
    pub episodes: Vec<EpisodeMetrics>,
    pub gate: GateStats,
    /// Wall-clock training time in minutes.
    pub train_minutes: f64,
}

/// Trains the upper layer for `cfg.steps` steps from scratch.
pub fn train_upper(
    scenario: &ScenarioConfig,
    lower: &dyn LowerPolicy,
    historical: Option<&PriorityPattern>,
    cfg: &TrainConfig,
) -> Result<UpperRun, AgentError> {
    let started = Instant::now();
    let mut trainer = UpperTrainer::new(scenario, cfg, historical.cloned())?;
    let mut episodes = Vec::new();
    trainer.run_until(cfg.steps, lower, &mut |m| episodes.push(m.clone()))?;
    Ok(UpperRun {
        policy: trainer.policy(),
        episodes,
        gate: trainer.gate(),
        train_minutes: started.elapsed().as_secs_f64() / 60.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::pattern_of_scheme;
    use crate::scenario::default_scenario;
    use crate::search::optimal_scheme;
    use crate::sim::GreedyLower;

    fn quick(algorithm: Algorithm, alpha: f64, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig {
            algorithm,
            steps: 3_000,
            seed,
            hidden: vec![32],
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        cfg.dqn.learning_starts = 200;
        cfg.dqn.target_update = 200;
        cfg.ppo.n_steps = 256;
        cfg.reward.alpha = alpha;
        cfg
    }

    #[test]
    fn runs_are_seed_deterministic() {
        let s = default_scenario(3);
        let h = pattern_of_scheme(&optimal_scheme(&s).1, &s).unwrap();
        for algorithm in Algorithm::ALL {
            let cfg = quick(algorithm, 0.05, 4);
            let a = train_upper(&s, &GreedyLower, Some(&h), &cfg).unwrap();
            let b = train_upper(&s, &GreedyLower, Some(&h), &cfg).unwrap();
            assert_eq!(a.policy, b.policy, "{algorithm}");
            assert_eq!(a.episodes, b.episodes, "{algorithm}");
            assert!(!a.episodes.is_empty());
        }
    }

    #[test]
    fn gate_counts_and_zero_alpha_ablation() {
        let s = default_scenario(3);
        let h = pattern_of_scheme(&optimal_scheme(&s).1, &s).unwrap();
        let with = train_upper(&s, &GreedyLower, Some(&h), &quick(Algorithm::Dqn, 0.0, 1)).unwrap();
        let without = train_upper(&s, &GreedyLower, None, &quick(Algorithm::Dqn, 0.0, 1)).unwrap();
        assert_eq!(with.policy, without.policy);
        let strip = |v: &[EpisodeMetrics]| -> Vec<_> { v.iter().map(|m| (m.comt, m.cum_reward, m.verified)).collect() };
        assert_eq!(strip(&with.episodes), strip(&without.episodes));
        let g = with.gate;
        assert_eq!(g.violations, 0);
        assert_eq!(g.rejected, 0);
        assert_eq!(g.completed, g.verified);
        assert_eq!(g.rz_added, g.verified);
        assert_eq!(without.gate.rz_added, 0);
        let complete = with.episodes.iter().filter(|m| m.comt.is_some()).count();
        assert_eq!(complete, g.completed);
        assert!(with.episodes.iter().all(|m| m.verified == m.comt.is_some()));
    }

    #[test]
    fn own_pattern_as_history_pays_half_the_relations() {
        let s = default_scenario(3);
        let alpha = 0.1;
        let cfg = quick(Algorithm::Dqn, alpha, 2);
        let mut trainer = UpperTrainer::new(&s, &cfg, None).unwrap();
        let mut env = JobShopEnv::new(&s, cfg.reward, 0);
        for t in [0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2] {
            env.upper_step(TaskId(t), &GreedyLower).unwrap();
        }
        let own = pattern_of_scheme(&env.emit_scheme().unwrap(), &s).unwrap();
        trainer.historical = Some(own.clone());
        let g = trainer.verification_gate(&env);
        assert!(g.verified);
        assert_eq!(g.mu_match, own.len());
        assert!((g.r_z - alpha * own.len() as f64 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn resuming_continues_the_step_counter() {
        let s = default_scenario(2);
        let cfg = quick(Algorithm::Ddqn, 0.0, 5);
        let mut t = UpperTrainer::new(&s, &cfg, None).unwrap();
        let mut n = 0;
        t.run_until(500, &GreedyLower, &mut |_| n += 1).unwrap();
        assert_eq!(t.step(), 500);
        assert_eq!(t.episodes(), n);
        t.run_until(800, &GreedyLower, &mut |_| n += 1).unwrap();
        assert_eq!(t.step(), 800);
        assert_eq!(t.episodes(), n);
    }
}

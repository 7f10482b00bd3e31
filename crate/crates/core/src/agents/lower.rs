//! Car-selection training on standalone lower episodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::LowerConfig;
use super::net::{argmax, DenseNet};
use super::ppo::{PpoAgent, Rollout};
use super::AgentError;
use crate::scenario::ScenarioConfig;
use crate::sim::{lower_feature_len, lower_reset, LowerPolicy, LowerState, RewardConfig};

/// Frozen car-selection network.
#[derive(Clone, Debug)]
pub struct NetLower {
    net: DenseNet,
    scenario: ScenarioConfig,
}

impl NetLower {
    pub fn new(net: DenseNet, scenario: &ScenarioConfig) -> Result<Self, AgentError> {
        let want = (lower_feature_len(scenario), scenario.cars + 1);
        if (net.n_inputs(), net.n_outputs()) != want {
            return Err(AgentError::Shape {
                expected: want,
                found: (net.n_inputs(), net.n_outputs()),
            });
        }
        Ok(NetLower {
            net,
            scenario: scenario.clone(),
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }
}

impl LowerPolicy for NetLower {
    fn act(&self, state: &LowerState) -> usize {
        argmax(&self.net.forward(&state.features(&self.scenario)))
    }
}

/// Uniformly random car choice, for baselines.
#[derive(Debug)]
pub struct RandomLower {
    rng: std::cell::RefCell<ChaCha8Rng>,
}

impl RandomLower {
    pub fn new(seed: u64) -> Self {
        RandomLower {
            rng: std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl LowerPolicy for RandomLower {
    fn act(&self, state: &LowerState) -> usize {
        self.rng.borrow_mut().gen_range(0..=state.n_cars())
    }
}

#[derive(Clone, Debug)]
pub struct LowerRun {
    pub policy: NetLower,
    /// Mean step reward of each completed lower episode.
    pub episode_rewards: Vec<f64>,
}

/// Trains the car-selection layer with PPO for `cfg.steps` lower steps.
pub fn train_lower(
    scenario: &ScenarioConfig,
    cfg: &LowerConfig,
    reward: RewardConfig,
    seed: u64,
) -> Result<LowerRun, AgentError> {
    cfg.validate().map_err(AgentError::Config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = PpoAgent::new(
        lower_feature_len(scenario),
        scenario.cars + 1,
        &cfg.hidden,
        cfg.activation,
        cfg.learning_rate,
        cfg.gamma,
        cfg.ppo,
        &mut rng,
    );
    let mut episode = 0u64;
    let mut env = lower_reset(scenario, reward, episode_seed(seed, episode));
    let mut rollout = Rollout::default();
    let mut episode_rewards = Vec::new();
    let (mut ep_sum, mut ep_len) = (0.0, 0usize);
    for step in 0..cfg.steps {
        let x = env.state().features(scenario);
        let (action, logp, value) = agent.act(&x, &mut rng);
        let (outcome, done) = env.step(action)?;
        let r = outcome.reward();
        ep_sum += r;
        ep_len += 1;
        rollout.push(x, action, logp, value, r, done);
        if done {
            episode_rewards.push(ep_sum / ep_len as f64);
            (ep_sum, ep_len) = (0.0, 0);
            episode += 1;
            env = lower_reset(scenario, reward, episode_seed(seed, episode));
        }
        if rollout.len() == cfg.ppo.n_steps || step + 1 == cfg.steps {
            let last = agent.value(&env.state().features(scenario));
            agent
                .update(&rollout, last, &mut rng)
                .map_err(|e| e.at_step(step))?;
            rollout.clear();
        }
    }
    Ok(LowerRun {
        policy: NetLower::new(agent.actor, scenario)?,
        episode_rewards,
    })
}

pub(crate) fn episode_seed(seed: u64, episode: u64) -> u64 {
    seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(episode)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerEval {
    /// Mean `r_q` per step.
    pub mean_process_reward: f64,
    /// Fraction of steps whose action was one of the two valid cases.
    pub valid_fraction: f64,
    pub steps: usize,
}

/// Runs `policy` on lower episodes seeded by `seeds`, up to `max_steps` each.
pub fn evaluate_lower(
    policy: &dyn LowerPolicy,
    scenario: &ScenarioConfig,
    reward: RewardConfig,
    seeds: &[u64],
    max_steps: usize,
) -> Result<LowerEval, AgentError> {
    let (mut total, mut valid, mut steps) = (0.0, 0usize, 0usize);
    for &seed in seeds {
        let mut env = lower_reset(scenario, reward, seed);
        for _ in 0..max_steps {
            if env.is_done() {
                break;
            }
            let action = policy.act(env.state()).min(env.state().n_cars());
            let (outcome, _) = env.step(action)?;
            total += outcome.process_reward;
            valid += usize::from(outcome.case.is_valid());
            steps += 1;
        }
    }
    let n = steps.max(1) as f64;
    Ok(LowerEval {
        mean_process_reward: total / n,
        valid_fraction: valid as f64 / n,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Equipment, Operation, Task};
    use crate::sim::GreedyLower;

    fn one_car() -> ScenarioConfig {
        let tasks = (0..4)
            .map(|i| Task {
                ops: vec![
                    Operation { resource_type: 0, duration: 1 + i % 3 },
                    Operation { resource_type: 1, duration: 2 },
                ],
            })
            .collect();
        let equipment = vec![
            Equipment { resource_type: 0, workstations: 1 },
            Equipment { resource_type: 1, workstations: 1 },
        ];
        ScenarioConfig::new(tasks, equipment, 1, 0).unwrap()
    }

    fn small_cfg(steps: usize) -> LowerConfig {
        LowerConfig {
            steps,
            learning_rate: 3e-3,
            hidden: vec![16],
            ppo: crate::agents::PpoParams {
                n_steps: 256,
                minibatch: 32,
                ..Default::default()
            },
            ..LowerConfig::default()
        }
    }

    #[test]
    fn one_car_policy_learns_the_valid_action() {
        let s = one_car();
        let reward = RewardConfig::default();
        let run = train_lower(&s, &small_cfg(15_000), reward, 1).unwrap();
        let held_out: Vec<u64> = (1000..1040).collect();
        let eval = evaluate_lower(&run.policy, &s, reward, &held_out, 200).unwrap();
        assert!(eval.valid_fraction >= 0.95, "{eval:?}");
        assert!(eval.mean_process_reward >= 0.0);
        let random = evaluate_lower(&RandomLower::new(3), &s, reward, &held_out, 200).unwrap();
        assert!(random.mean_process_reward < eval.mean_process_reward);
        let greedy = evaluate_lower(&GreedyLower, &s, reward, &held_out, 200).unwrap();
        assert_eq!(greedy.valid_fraction, 1.0);
    }

    #[test]
    fn same_seed_same_weights() {
        let s = one_car();
        let a = train_lower(&s, &small_cfg(600), RewardConfig::default(), 9).unwrap();
        let b = train_lower(&s, &small_cfg(600), RewardConfig::default(), 9).unwrap();
        assert_eq!(a.policy.net(), b.policy.net());
        let c = train_lower(&s, &small_cfg(600), RewardConfig::default(), 10).unwrap();
        assert_ne!(a.policy.net(), c.policy.net());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let s = one_car();
        let net = DenseNet::new(
            3,
            &[],
            2,
            crate::agents::Activation::Tanh,
            crate::agents::Head::Linear,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(NetLower::new(net, &s), Err(AgentError::Shape { .. })));
    }
}

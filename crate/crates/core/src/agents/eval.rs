//! Greedy evaluation rollouts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::upper::TaskPolicy;
use super::AgentError;
use crate::ids::TaskId;
use crate::scenario::{ScenarioConfig, Slice};
use crate::scheme::SchedulingScheme;
use crate::sim::{JobShopEnv, LowerPolicy, RewardConfig, UpperState};
use crate::verify::check_scheme;

#[derive(Clone, Debug)]
pub struct EvalResult {
    /// Makespan, or `None` when the budget ran out first (DNF).
    pub comt: Option<Slice>,
    /// `Σ (r_x + r_y)` over the episode.
    pub cum_reward: f64,
    pub decisions: usize,
    /// Wall time of all upper decisions, including the lower layer's car
    /// choices they trigger.
    pub dect_total_ms: f64,
    pub dect_mean_ms: f64,
    pub scheme: Option<SchedulingScheme>,
    /// Whether the emitted scheme passed `check_scheme`.
    pub verified: bool,
}

/// One episode driven by `policy` to completion or budget exhaustion.
pub fn evaluate(
    policy: &mut dyn TaskPolicy,
    scenario: &ScenarioConfig,
    lower: &dyn LowerPolicy,
    reward: RewardConfig,
    seed: u64,
) -> Result<EvalResult, AgentError> {
    let (mut env, mut state) = JobShopEnv::upper_reset(scenario, reward, seed);
    let mut cum = 0.0;
    let mut elapsed = 0.0;
    let mut decisions = 0;
    while !env.is_done() {
        let started = Instant::now();
        let task = policy.choose(&state, scenario);
        let out = env.upper_step(task, lower)?;
        elapsed += started.elapsed().as_secs_f64() * 1e3;
        decisions += 1;
        cum += out.reward;
        state = out.next_state;
    }
    let scheme = env.emit_scheme().ok();
    let verified = scheme
        .as_ref()
        .and_then(|s| check_scheme(s, scenario, None).ok())
        .is_some_and(|r| r.is_verified());
    Ok(EvalResult {
        comt: env.is_complete().then(|| env.horizon()),
        cum_reward: cum,
        decisions,
        dect_total_ms: elapsed,
        dect_mean_ms: elapsed / decisions.max(1) as f64,
        scheme,
        verified,
    })
}

/// Always picks the same task.
#[derive(Clone, Copy, Debug)]
pub struct FixedTask(pub TaskId);

impl TaskPolicy for FixedTask {
    fn choose(&mut self, _: &UpperState, _: &ScenarioConfig) -> TaskId {
        self.0
    }
}

/// Uniformly random task choice.
#[derive(Clone, Debug)]
pub struct RandomTasks(ChaCha8Rng);

impl RandomTasks {
    pub fn new(seed: u64) -> Self {
        RandomTasks(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl TaskPolicy for RandomTasks {
    fn choose(&mut self, state: &UpperState, _: &ScenarioConfig) -> TaskId {
        TaskId(self.0.gen_range(0..state.n_tasks()))
    }
}

//! Lower layer: choose a car for the focal task's next operation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::reward::{classify_lower, RewardCase, RewardConfig};
use super::{CarPlace, EnvError, JobShopEnv};
use crate::ids::{CarId, TaskId};
use crate::scenario::{ScenarioConfig, Slice};
use crate::scheme::SchemeRecord;

/// Observation of the lower layer: one focal task, the equipment and the cars.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerState {
    pub task: TaskId,
    /// Time at which the focal task asks for a car.
    pub now: Slice,
    pub resource_type: usize,
    pub duration: Slice,
    pub remaining: Slice,
    pub progress: usize,
    pub n_ops: usize,
    /// Free workstations per equipment at `now`.
    pub equipment_free: Vec<usize>,
    /// Whether some equipment of the focal resource type has a free workstation.
    pub equipment_ready: bool,
    /// `1` idle, `-1` busy at `now`.
    pub car_flags: Vec<i8>,
    pub car_places: Vec<CarPlace>,
}

impl LowerState {
    /// Effective availability per car: idle and the focal equipment free.
    pub fn available(&self) -> Vec<bool> {
        self.car_flags
            .iter()
            .map(|&f| f == 1 && self.equipment_ready)
            .collect()
    }

    pub fn n_cars(&self) -> usize {
        self.car_flags.len()
    }

    pub fn classify(&self, action: usize) -> Result<RewardCase, EnvError> {
        if action > self.n_cars() {
            return Err(EnvError::CarOutOfRange {
                action,
                cars: self.n_cars(),
            });
        }
        Ok(classify_lower(&self.available(), action))
    }

    /// Feature vector for the lower policy network.
    pub fn features(&self, scenario: &ScenarioConfig) -> Vec<f64> {
        let max_d = scenario.max_duration() as f64;
        let n_types = scenario
            .equipment
            .iter()
            .map(|e| e.resource_type + 1)
            .max()
            .unwrap_or(1);
        let mut out = Vec::with_capacity(lower_feature_len(scenario));
        for t in 0..n_types {
            out.push(if t == self.resource_type { 1.0 } else { 0.0 });
        }
        out.push(self.duration as f64 / max_d);
        out.push(self.remaining as f64 / (max_d * self.n_ops.max(1) as f64));
        out.push(self.progress as f64 / self.n_ops.max(1) as f64);
        for (free, eq) in self.equipment_free.iter().zip(&scenario.equipment) {
            out.push(*free as f64 / eq.workstations as f64);
        }
        out.push(if self.equipment_ready { 1.0 } else { -1.0 });
        out.extend(self.car_flags.iter().map(|&f| f as f64));
        out
    }
}

pub fn lower_feature_len(scenario: &ScenarioConfig) -> usize {
    let n_types = scenario
        .equipment
        .iter()
        .map(|e| e.resource_type + 1)
        .max()
        .unwrap_or(1);
    n_types + 3 + scenario.equipment.len() + 1 + scenario.cars
}

/// A frozen car-selection policy: returns 0 to wait or `d` to pick car `d`.
pub trait LowerPolicy {
    fn act(&self, state: &LowerState) -> usize;
}

/// Picks the lowest-id available car, otherwise waits. Always earns the
/// positive reward case.
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyLower;

impl LowerPolicy for GreedyLower {
    fn act(&self, state: &LowerState) -> usize {
        state
            .available()
            .iter()
            .position(|&a| a)
            .map_or(0, |i| i + 1)
    }
}

impl<P: LowerPolicy + ?Sized> LowerPolicy for &P {
    fn act(&self, state: &LowerState) -> usize {
        (**self).act(state)
    }
}

/// Result of one lower action.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerOutcome {
    pub case: RewardCase,
    /// `r_q`.
    pub process_reward: f64,
    /// `r_p`: the task reward when the operation was placed, else 0.
    pub task_reward: f64,
    pub placed: Option<SchemeRecord>,
    /// Focal state after the action (unchanged for an invalid action).
    pub next: LowerState,
}

impl LowerOutcome {
    pub fn reward(&self) -> f64 {
        self.process_reward + self.task_reward
    }
}

impl JobShopEnv {
    /// Lower observation for `task` at the time the task becomes ready.
    pub fn lower_state(&self, task: TaskId) -> LowerState {
        self.lower_state_at(task, self.task_ready(task))
    }

    pub(crate) fn lower_state_at(&self, task: TaskId, now: Slice) -> LowerState {
        let def = self.scenario().task(task);
        let progress = self.progress(task).min(def.ops.len() - 1);
        let op = def.ops[progress];
        let equipment_free = self.free_workstations(now);
        let equipment_ready = self
            .scenario()
            .equipment_for(op.resource_type)
            .any(|e| equipment_free[e] > 0);
        LowerState {
            task,
            now,
            resource_type: op.resource_type,
            duration: op.duration,
            remaining: def.ops[progress..].iter().map(|o| o.duration).sum(),
            progress: self.progress(task),
            n_ops: def.ops.len(),
            equipment_free,
            equipment_ready,
            car_flags: self
                .car_free()
                .iter()
                .map(|&t| if t <= now { 1 } else { -1 })
                .collect(),
            car_places: self.car_places().to_vec(),
        }
    }

    /// Applies a lower action to the focal state.
    ///
    /// Selecting an available car places the operation now. Waiting while
    /// nothing is available advances the focal time to the moment a car and
    /// a workstation are both free. Invalid actions change nothing.
    pub fn lower_apply(&mut self, state: &LowerState, action: usize) -> Result<LowerOutcome, EnvError> {
        if self.is_finished(state.task) {
            return Err(EnvError::TaskFinished { task: state.task });
        }
        let case = state.classify(action)?;
        let mut outcome = LowerOutcome {
            case,
            process_reward: case.reward(),
            task_reward: 0.0,
            placed: None,
            next: state.clone(),
        };
        match case {
            RewardCase::SelectAvailable => {
                let record = self.place(state.task, CarId(action));
                outcome.task_reward = self.reward_config().task_reward;
                outcome.placed = Some(record);
                if !self.is_finished(state.task) {
                    outcome.next = self.lower_state(state.task);
                }
            }
            RewardCase::WaitWhenBusy => {
                let (ws_time, _) = self.earliest_workstation(state.resource_type);
                let car_time = self.car_free().iter().copied().min().unwrap_or(0);
                let next_now = ws_time.max(car_time).max(state.now);
                outcome.next = self.lower_state_at(state.task, next_now);
            }
            _ => {}
        }
        Ok(outcome)
    }

    /// Drives one operation of `task` to placement with `policy`. An invalid
    /// choice is penalized and then replaced by the greedy action. Returns the placed record, the
    /// summed lower reward and the number of replaced actions.
    pub(crate) fn run_lower(
        &mut self,
        task: TaskId,
        policy: &dyn LowerPolicy,
    ) -> Result<(SchemeRecord, f64, usize, Slice), EnvError> {
        let mut state = self.lower_state(task);
        let ready = state.now;
        let mut total = 0.0;
        let mut overrides = 0;
        loop {
            let action = policy.act(&state).min(state.n_cars());
            let mut outcome = self.lower_apply(&state, action)?;
            total += outcome.reward();
            if !outcome.case.is_valid() {
                overrides += 1;
                outcome = self.lower_apply(&state, GreedyLower.act(&state))?;
                total += outcome.reward();
            }
            if let Some(record) = outcome.placed {
                return Ok((record, total, overrides, ready));
            }
            state = outcome.next;
        }
    }
}

/// Standalone lower-layer episode: focal tasks are drawn at random among
/// unfinished tasks after each placement.
#[derive(Clone, Debug)]
pub struct LowerEnv {
    env: JobShopEnv,
    state: LowerState,
    rng: ChaCha8Rng,
    steps: usize,
}

/// Starts a lower episode: a seeded random prefix of greedy placements puts
/// cars and workstations in mixed states, then one focal task is chosen.
pub fn lower_reset(scenario: &ScenarioConfig, reward: RewardConfig, seed: u64) -> LowerEnv {
    assert!(scenario.n_total() > 0, "lower episode needs at least one operation");
    let mut env = JobShopEnv::new(scenario, reward, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let warmup = rng.gen_range(0..scenario.n_total());
    for _ in 0..warmup {
        let open = env.open_tasks();
        let task = *open.choose(&mut rng).expect("warm-up leaves work");
        env.dispatch_canonical(task).expect("open task");
    }
    let open = env.open_tasks();
    let task = *open.choose(&mut rng).expect("at least one open task");
    let state = env.lower_state(task);
    LowerEnv {
        env,
        state,
        rng,
        steps: 0,
    }
}

impl LowerEnv {
    pub fn state(&self) -> &LowerState {
        &self.state
    }

    pub fn env(&self) -> &JobShopEnv {
        &self.env
    }

    pub fn is_done(&self) -> bool {
        self.env.is_complete() || self.steps >= self.env.budget()
    }

    /// One lower step. Returns the outcome and whether the episode ended.
    pub fn step(&mut self, action: usize) -> Result<(LowerOutcome, bool), EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeDone);
        }
        let mut outcome = self.env.lower_apply(&self.state, action)?;
        self.steps += 1;
        if outcome.placed.is_some() && !self.env.is_complete() {
            let open = self.env.open_tasks();
            let task = *open.choose(&mut self.rng).expect("open task");
            outcome.next = self.env.lower_state(task);
        }
        self.state = outcome.next.clone();
        Ok((outcome, self.is_done()))
    }
}

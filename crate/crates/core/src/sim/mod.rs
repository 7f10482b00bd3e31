//! Discrete-time execution environment for the two decision layers.
//!
//! Every resource (car, workstation) keeps the time it next becomes free and
//! each task keeps the time its previous operation ends. An operation placed
//! by a decision starts at the latest of those three times and resources are
//! never back-filled, so per-resource intervals are disjoint by construction.

mod lower;
pub mod reward;
mod upper;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ids::{CarId, Location, TaskId};
use crate::scenario::{ScenarioConfig, Slice};
use crate::scheme::{SchedulingScheme, SchemeRecord};

pub use lower::{lower_feature_len, lower_reset, GreedyLower, LowerEnv, LowerOutcome, LowerPolicy, LowerState};
pub use reward::{
    classify_lower, AlphaSign, HorizonEstimate, HorizonMeasure, RewardCase, RewardConfig,
};
pub use upper::{CarRow, EquipmentRow, StepInfo, StepOutcome, TaskRow, UpperState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("upper action {action} out of range (tasks 0..{n_tasks})")]
    TaskOutOfRange { action: usize, n_tasks: usize },
    #[error("lower action {action} out of range (0..={cars})")]
    CarOutOfRange { action: usize, cars: usize },
    #[error("episode already finished")]
    EpisodeDone,
    #[error("episode incomplete: {placed} of {total} assignments")]
    Incomplete { placed: usize, total: usize },
    #[error("{task} has no remaining operation")]
    TaskFinished { task: TaskId },
}

/// Where a car currently stands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CarPlace {
    Depot,
    At(Location),
}

/// Mutable simulation state shared by both layers.
#[derive(Clone, Debug)]
pub struct JobShopEnv {
    scenario: ScenarioConfig,
    reward: RewardConfig,
    progress: Vec<usize>,
    task_ready: Vec<Slice>,
    ws_free: Vec<Vec<Slice>>,
    car_free: Vec<Slice>,
    car_place: Vec<CarPlace>,
    records: Vec<SchemeRecord>,
    steps: usize,
    budget: usize,
}

/// Step budget per episode as a multiple of the assignment count.
pub const BUDGET_FACTOR: usize = 20;

impl JobShopEnv {
    /// Fresh episode: no operation placed, every car idle at a seeded
    /// starting place.
    pub fn new(scenario: &ScenarioConfig, reward: RewardConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locations = scenario.locations();
        let car_place = (0..scenario.cars)
            .map(|_| {
                let pick = rng.gen_range(0..=locations.len());
                if pick == locations.len() {
                    CarPlace::Depot
                } else {
                    CarPlace::At(locations[pick])
                }
            })
            .collect();
        JobShopEnv {
            progress: vec![0; scenario.n_tasks()],
            task_ready: vec![0; scenario.n_tasks()],
            ws_free: scenario
                .equipment
                .iter()
                .map(|e| vec![0; e.workstations])
                .collect(),
            car_free: vec![0; scenario.cars],
            car_place,
            records: Vec::new(),
            steps: 0,
            budget: BUDGET_FACTOR * scenario.n_total().max(1),
            reward,
            scenario: scenario.clone(),
        }
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn set_reward_config(&mut self, reward: RewardConfig) {
        self.reward = reward;
    }

    /// Assignments completed so far (`F_t`).
    pub fn placed(&self) -> usize {
        self.records.len()
    }

    pub fn n_total(&self) -> usize {
        self.scenario.n_total()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn is_complete(&self) -> bool {
        self.placed() == self.n_total()
    }

    pub fn is_done(&self) -> bool {
        self.is_complete() || self.steps >= self.budget
    }

    pub fn is_finished(&self, task: TaskId) -> bool {
        self.progress[task.0] == self.scenario.task(task).ops.len()
    }

    pub fn progress(&self, task: TaskId) -> usize {
        self.progress[task.0]
    }

    pub fn task_ready(&self, task: TaskId) -> Slice {
        self.task_ready[task.0]
    }

    pub fn car_free(&self) -> &[Slice] {
        &self.car_free
    }

    pub fn car_places(&self) -> &[CarPlace] {
        &self.car_place
    }

    pub fn records(&self) -> &[SchemeRecord] {
        &self.records
    }

    /// Latest end time of any placed operation.
    pub fn horizon(&self) -> Slice {
        self.records.iter().map(|r| r.end).max().unwrap_or(0)
    }

    fn remaining_work(&self, task: usize) -> Slice {
        self.scenario.tasks[task].ops[self.progress[task]..]
            .iter()
            .map(|o| o.duration)
            .sum()
    }

    /// Completion horizon `M` under the configured estimate.
    pub fn completion_horizon(&self) -> f64 {
        let placed = self.horizon();
        match self.reward.horizon {
            HorizonEstimate::Placed => placed as f64,
            HorizonEstimate::Projected => (0..self.scenario.n_tasks())
                .map(|t| self.task_ready[t] + self.remaining_work(t))
                .fold(placed, Slice::max) as f64,
        }
    }

    /// Earliest free time of a workstation serving `resource_type`, with its
    /// location (ties: lowest equipment, then lowest workstation).
    fn earliest_workstation(&self, resource_type: usize) -> (Slice, Location) {
        self.scenario
            .equipment_for(resource_type)
            .flat_map(|e| {
                self.ws_free[e]
                    .iter()
                    .enumerate()
                    .map(move |(w, &t)| (t, Location::new(e, w)))
            })
            .min_by_key(|&(t, loc)| (t, loc))
            .expect("validated scenario has equipment for every type")
    }

    /// Free workstations per equipment at time `now`.
    pub fn free_workstations(&self, now: Slice) -> Vec<usize> {
        self.ws_free
            .iter()
            .map(|ws| ws.iter().filter(|&&t| t <= now).count())
            .collect()
    }

    /// Places the next operation of `task` on `car` at the earliest time the
    /// task, the car and a workstation are all free.
    fn place(&mut self, task: TaskId, car: CarId) -> SchemeRecord {
        let op_index = self.progress[task.0];
        let op = self.scenario.tasks[task.0].ops[op_index];
        let (ws_time, location) = self.earliest_workstation(op.resource_type);
        let start = self.task_ready[task.0]
            .max(ws_time)
            .max(self.car_free[car.index()]);
        let end = start + op.duration;
        self.ws_free[location.equipment][location.workstation] = end;
        self.car_free[car.index()] = end;
        self.car_place[car.index()] = CarPlace::At(location);
        self.task_ready[task.0] = end;
        self.progress[task.0] += 1;
        let record = SchemeRecord {
            task,
            op: op_index,
            location,
            car,
            start,
            end,
        };
        self.records.push(record);
        record
    }

    /// Car the environment uses when the lower layer waits: the one free
    /// earliest (ties: lowest id).
    fn earliest_car(&self) -> CarId {
        let (index, _) = self
            .car_free
            .iter()
            .enumerate()
            .min_by_key(|&(i, &t)| (t, i))
            .expect("at least one car");
        CarId::from_index(index)
    }

    /// Materializes the scheme of a completed episode.
    pub fn emit_scheme(&self) -> Result<SchedulingScheme, EnvError> {
        if !self.is_complete() {
            return Err(EnvError::Incomplete {
                placed: self.placed(),
                total: self.n_total(),
            });
        }
        Ok(SchedulingScheme::new(self.records.clone()))
    }

    /// Places `task`'s next operation using the environment's own car choice.
    /// Used for warm-up and by search routines.
    pub fn dispatch_canonical(&mut self, task: TaskId) -> Result<SchemeRecord, EnvError> {
        if task.0 >= self.scenario.n_tasks() {
            return Err(EnvError::TaskOutOfRange {
                action: task.0,
                n_tasks: self.scenario.n_tasks(),
            });
        }
        if self.is_finished(task) {
            return Err(EnvError::TaskFinished { task });
        }
        let state = self.lower_state(task);
        let car = match GreedyLower.act(&state) {
            0 => self.earliest_car(),
            d => CarId(d),
        };
        Ok(self.place(task, car))
    }

    /// Unfinished tasks in id order.
    pub fn open_tasks(&self) -> Vec<TaskId> {
        (0..self.scenario.n_tasks())
            .map(TaskId)
            .filter(|&t| !self.is_finished(t))
            .collect()
    }
}

#[cfg(test)]
mod tests;

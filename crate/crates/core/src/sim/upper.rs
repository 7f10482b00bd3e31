//! Upper layer: choose which task is served next.

use super::lower::LowerPolicy;
use super::reward::{finished_task_penalty, horizon_reward, HorizonMeasure, RewardCase};
use super::{CarPlace, EnvError, JobShopEnv};
use crate::ids::TaskId;
use crate::scenario::{ScenarioConfig, Slice};
use crate::scheme::SchemeRecord;

#[derive(Clone, Debug, PartialEq)]
pub struct TaskRow {
    pub progress: usize,
    pub n_ops: usize,
    pub next_resource: Option<usize>,
    pub next_duration: Slice,
    pub remaining: Slice,
    pub ready_at: Slice,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquipmentRow {
    pub workstations: usize,
    /// Free workstations at the reference time.
    pub free: usize,
    pub next_free: Slice,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarRow {
    pub flag: i8,
    pub free_at: Slice,
    pub place: CarPlace,
}

/// Observation of the upper layer.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperState {
    pub tasks: Vec<TaskRow>,
    pub equipment: Vec<EquipmentRow>,
    pub cars: Vec<CarRow>,
    /// Assignments completed (`F_t`).
    pub progress: usize,
    pub n_total: usize,
    /// Earliest ready time among unfinished tasks.
    pub reference_time: Slice,
}

impl UpperState {
    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn feature_len(scenario: &ScenarioConfig) -> usize {
        5 * scenario.n_tasks() + 2 * scenario.equipment.len() + 2 * scenario.cars + 1
    }

    /// Feature vector for the upper policy network.
    pub fn features(&self, scenario: &ScenarioConfig) -> Vec<f64> {
        let max_d = scenario.max_duration() as f64;
        let span = scenario
            .tasks
            .iter()
            .map(|t| t.total_duration())
            .max()
            .unwrap_or(1)
            .max(1) as f64;
        let rel = |t: Slice| (t.saturating_sub(self.reference_time) as f64 / span).min(2.0);
        let mut out = Vec::with_capacity(Self::feature_len(scenario));
        for row in &self.tasks {
            let finished = row.next_resource.is_none();
            out.push(if finished { 1.0 } else { 0.0 });
            out.push(row.progress as f64 / row.n_ops as f64);
            out.push(row.next_duration as f64 / max_d);
            out.push(row.remaining as f64 / span);
            out.push(if finished { 0.0 } else { rel(row.ready_at) });
        }
        for row in &self.equipment {
            out.push(row.free as f64 / row.workstations as f64);
            out.push(rel(row.next_free));
        }
        for row in &self.cars {
            out.push(row.flag as f64);
            out.push(rel(row.free_at));
        }
        out.push(self.progress as f64 / self.n_total.max(1) as f64);
        out
    }
}

/// Diagnostics of one upper step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub m_old: f64,
    pub m_new: f64,
    pub r_x: f64,
    pub r_y: f64,
    /// Reward collected by the lower layer while placing the operation.
    pub lower_reward: f64,
    /// Lower actions replaced by the greedy choice because they were invalid.
    pub lower_overrides: usize,
    pub finished_task_selected: bool,
    pub placed: Option<SchemeRecord>,
    pub lower_case: Option<RewardCase>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: UpperState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

impl JobShopEnv {
    /// Fresh episode for the upper layer.
    pub fn upper_reset(
        scenario: &ScenarioConfig,
        reward: super::RewardConfig,
        seed: u64,
    ) -> (Self, UpperState) {
        let env = JobShopEnv::new(scenario, reward, seed);
        let state = env.upper_state();
        (env, state)
    }

    pub fn upper_state(&self) -> UpperState {
        let scenario = self.scenario();
        let open = self.open_tasks();
        let reference_time = open
            .iter()
            .map(|&t| self.task_ready(t))
            .min()
            .unwrap_or_else(|| self.horizon());
        let tasks = scenario
            .tasks
            .iter()
            .enumerate()
            .map(|(i, def)| {
                let progress = self.progress(TaskId(i));
                let next = def.ops.get(progress);
                TaskRow {
                    progress,
                    n_ops: def.ops.len(),
                    next_resource: next.map(|o| o.resource_type),
                    next_duration: next.map_or(0, |o| o.duration),
                    remaining: def.ops[progress..].iter().map(|o| o.duration).sum(),
                    ready_at: self.task_ready(TaskId(i)),
                }
            })
            .collect();
        let equipment = self
            .ws_free
            .iter()
            .map(|ws| EquipmentRow {
                workstations: ws.len(),
                free: ws.iter().filter(|&&t| t <= reference_time).count(),
                next_free: ws.iter().copied().min().unwrap_or(0),
            })
            .collect();
        let cars = self
            .car_free()
            .iter()
            .zip(self.car_places())
            .map(|(&free_at, &place)| CarRow {
                flag: if free_at <= reference_time { 1 } else { -1 },
                free_at,
                place,
            })
            .collect();
        UpperState {
            tasks,
            equipment,
            cars,
            progress: self.placed(),
            n_total: self.n_total(),
            reference_time,
        }
    }

    /// One upper decision: serve `task` through the frozen lower policy.
    ///
    /// Selecting a finished task earns `r_y` and leaves time untouched;
    /// otherwise the task's next operation is placed and `r_x` rewards the
    /// change of the completion horizon.
    pub fn upper_step(
        &mut self,
        task: TaskId,
        lower: &dyn LowerPolicy,
    ) -> Result<StepOutcome, EnvError> {
        if task.0 >= self.scenario().n_tasks() {
            return Err(EnvError::TaskOutOfRange {
                action: task.0,
                n_tasks: self.scenario().n_tasks(),
            });
        }
        if self.is_done() {
            return Err(EnvError::EpisodeDone);
        }
        self.steps += 1;
        let m_old = self.completion_horizon();
        let mut info = StepInfo {
            m_old,
            m_new: m_old,
            ..Default::default()
        };
        if self.is_finished(task) {
            info.finished_task_selected = true;
            info.r_y = finished_task_penalty(self.n_total(), self.placed());
        } else {
            let before = (self.reward_config().measure == HorizonMeasure::BeforeWait)
                .then(|| self.clone());
            let (record, lower_reward, overrides, ready) = self.run_lower(task, lower)?;
            info.m_new = match self.reward_config().measure {
                HorizonMeasure::AfterWait => self.completion_horizon(),
                HorizonMeasure::BeforeWait => {
                    let mut unwaited = before.expect("cloned for this measure");
                    unwaited.place_at(task, record, ready);
                    unwaited.completion_horizon()
                }
            };
            info.r_x = horizon_reward(m_old, info.m_new, self.reward_config().rx_scale);
            info.lower_reward = lower_reward;
            info.lower_overrides = overrides;
            info.lower_case = Some(if record.start > ready {
                RewardCase::WaitWhenBusy
            } else {
                RewardCase::SelectAvailable
            });
            info.placed = Some(record);
        }
        Ok(StepOutcome {
            next_state: self.upper_state(),
            reward: info.r_x + info.r_y,
            done: self.is_done(),
            info,
        })
    }

    /// Counterfactual placement of `record` starting at `ready` instead of
    /// its actual start.
    fn place_at(&mut self, task: TaskId, record: SchemeRecord, ready: Slice) {
        let end = ready + (record.end - record.start);
        self.records.push(SchemeRecord {
            start: ready,
            end,
            ..record
        });
        self.task_ready[task.0] = end;
        self.progress[task.0] += 1;
    }
}

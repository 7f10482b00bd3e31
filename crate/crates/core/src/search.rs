//! Reference schedulers built on the environment's dispatch rule.
//!
//! Any semi-active schedule can be produced by dispatching operations in
//! start-time order, letting the environment pick the earliest free car and
//! workstation, so searching over task sequences alone is exact.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ids::TaskId;
use crate::scenario::{ScenarioConfig, Slice};
use crate::scheme::SchedulingScheme;
use crate::sim::{JobShopEnv, RewardConfig};

fn lower_bound(env: &JobShopEnv) -> Slice {
    let scenario = env.scenario();
    let mut bound = env.horizon();
    for t in 0..scenario.n_tasks() {
        let id = TaskId(t);
        let rest: Slice = scenario.tasks[t].ops[env.progress(id)..]
            .iter()
            .map(|o| o.duration)
            .sum();
        bound = bound.max(env.task_ready(id) + rest);
    }
    // remaining work must also fit on the cars
    let remaining: Slice = (0..scenario.n_tasks())
        .map(|t| {
            scenario.tasks[t].ops[env.progress(TaskId(t))..]
                .iter()
                .map(|o| o.duration)
                .sum::<Slice>()
        })
        .sum();
    let car_floor = env.car_free().iter().copied().min().unwrap_or(0);
    let car_load: Slice = env
        .car_free()
        .iter()
        .map(|&f| f - car_floor)
        .sum::<Slice>()
        + remaining;
    let cars = scenario.cars as Slice;
    bound.max(car_floor + car_load.div_ceil(cars))
}

/// Lower bound on the makespan of any schedule of `scenario`.
pub fn lower_bound_of(scenario: &ScenarioConfig) -> Slice {
    lower_bound(&JobShopEnv::new(scenario, RewardConfig::default(), 0))
}

fn branch(env: &JobShopEnv, best: &mut Option<(Slice, JobShopEnv)>) {
    if env.is_complete() {
        let ms = env.horizon();
        if best.as_ref().is_none_or(|(b, _)| ms < *b) {
            *best = Some((ms, env.clone()));
        }
        return;
    }
    if let Some((b, _)) = best {
        if lower_bound(env) >= *b {
            return;
        }
    }
    for task in env.open_tasks() {
        let mut child = env.clone();
        child.dispatch_canonical(task).expect("open task");
        branch(&child, best);
    }
}

/// Exhaustive branch-and-bound over dispatch sequences. Exponential; meant
/// for instances with a handful of operations.
pub fn optimal_scheme(scenario: &ScenarioConfig) -> (Slice, SchedulingScheme) {
    let env = JobShopEnv::new(scenario, RewardConfig::default(), scenario.car_init_seed);
    let mut best = None;
    branch(&env, &mut best);
    let (ms, env) = best.expect("search visits at least one complete schedule");
    (ms, env.emit_scheme().expect("complete"))
}

pub fn optimal_makespan(scenario: &ScenarioConfig) -> Slice {
    optimal_scheme(scenario).0
}

/// Dispatches tasks in the given order of task ids (each id once per
/// operation) and returns the resulting scheme.
pub fn dispatch_sequence(scenario: &ScenarioConfig, sequence: &[TaskId]) -> SchedulingScheme {
    let mut env = JobShopEnv::new(scenario, RewardConfig::default(), scenario.car_init_seed);
    for &task in sequence {
        env.dispatch_canonical(task).expect("valid sequence");
    }
    env.emit_scheme().expect("sequence covers every operation")
}

/// Best of `iterations` random dispatch sequences followed by pairwise-swap
/// local search. Deterministic in `seed`.
pub fn best_random_scheme(
    scenario: &ScenarioConfig,
    seed: u64,
    iterations: usize,
) -> (Slice, Vec<TaskId>, SchedulingScheme) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base: Vec<TaskId> = scenario
        .tasks
        .iter()
        .enumerate()
        .flat_map(|(t, task)| std::iter::repeat_n(TaskId(t), task.ops.len()))
        .collect();
    let eval = |seq: &[TaskId]| dispatch_sequence(scenario, seq).horizon();
    let mut best_seq = base.clone();
    let mut best = eval(&best_seq);
    for _ in 0..iterations {
        base.shuffle(&mut rng);
        let ms = eval(&base);
        if ms < best {
            best = ms;
            best_seq = base.clone();
        }
    }
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..best_seq.len() {
            for j in i + 1..best_seq.len() {
                if best_seq[i] == best_seq[j] {
                    continue;
                }
                best_seq.swap(i, j);
                let ms = eval(&best_seq);
                if ms < best {
                    best = ms;
                    improved = true;
                } else {
                    best_seq.swap(i, j);
                }
            }
        }
    }
    let scheme = dispatch_sequence(scenario, &best_seq);
    (best, best_seq, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_scenario, Equipment, Operation, Task};

    #[test]
    fn single_task_optimum_is_serial_sum() {
        let s = default_scenario(1);
        assert_eq!(optimal_makespan(&s), s.total_work());
    }

    #[test]
    fn two_tasks_one_station() {
        let s = ScenarioConfig::new(
            vec![
                Task { ops: vec![Operation { resource_type: 0, duration: 3 }, Operation { resource_type: 0, duration: 1 }] },
                Task { ops: vec![Operation { resource_type: 0, duration: 2 }, Operation { resource_type: 0, duration: 2 }] },
            ],
            vec![Equipment { resource_type: 0, workstations: 1 }],
            2,
            0,
        )
        .unwrap();
        // a single station serializes all work
        assert_eq!(optimal_makespan(&s), 8);
    }

    #[test]
    fn random_search_is_deterministic_and_bounded() {
        let s = default_scenario(4);
        let (a, seq, scheme) = best_random_scheme(&s, 1, 50);
        let (b, _, _) = best_random_scheme(&s, 1, 50);
        assert_eq!(a, b);
        assert_eq!(seq.len(), s.n_total());
        assert_eq!(scheme.horizon(), a);
        assert!(a >= optimal_makespan(&default_scenario(1)));
    }
}

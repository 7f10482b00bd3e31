//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use pdcl::scenario::{Equipment, Operation, Task};
use pdcl::{ScenarioConfig, SchemeRecord, Slice};
use rand::Rng;

/// Optimal makespan by exhaustive search over integer start times.
///
/// Workstations of one resource type and cars are identical, so a set of
/// intervals is feasible exactly when, at every instant, the running
/// operations of each type fit the type's workstations and all running
/// operations fit the cars.
pub fn brute_force_optimum(s: &ScenarioConfig) -> Slice {
    let ops: Vec<(usize, usize, Slice)> = s
        .tasks
        .iter()
        .enumerate()
        .flat_map(|(t, task)| task.ops.iter().map(move |o| (t, o.resource_type, o.duration)))
        .collect();
    let mut capacity: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &s.equipment {
        *capacity.entry(e.resource_type).or_default() += e.workstations;
    }
    let tail: Vec<Slice> = (0..ops.len())
        .map(|i| {
            ops[i..]
                .iter()
                .take_while(|o| o.0 == ops[i].0)
                .map(|o| o.2)
                .sum()
        })
        .collect();
    let mut best = s.total_work() + 1;
    let mut starts = Vec::with_capacity(ops.len());
    search(&ops, &tail, &capacity, s.cars, &mut starts, &mut best);
    best
}

fn fits(ops: &[(usize, usize, Slice)], starts: &[Slice], capacity: &BTreeMap<usize, usize>, cars: usize) -> bool {
    let k = starts.len() - 1;
    let (_, ty, d) = ops[k];
    let (a, b) = (starts[k], starts[k] + d);
    // overlap counts only change at interval starts, so checking every
    // start inside [a, b) plus a itself is enough
    let mut probes: Vec<Slice> = vec![a];
    probes.extend(starts[..k].iter().copied().filter(|&t| t > a && t < b));
    probes.into_iter().all(|t| {
        let running: Vec<usize> = (0..=k)
            .filter(|&i| starts[i] <= t && t < starts[i] + ops[i].2)
            .collect();
        running.len() <= cars && running.iter().filter(|&&i| ops[i].1 == ty).count() <= capacity[&ty]
    })
}

fn search(
    ops: &[(usize, usize, Slice)],
    tail: &[Slice],
    capacity: &BTreeMap<usize, usize>,
    cars: usize,
    starts: &mut Vec<Slice>,
    best: &mut Slice,
) {
    let k = starts.len();
    if k == ops.len() {
        let ms = (0..k).map(|i| starts[i] + ops[i].2).max().unwrap_or(0);
        *best = (*best).min(ms);
        return;
    }
    let earliest = if k > 0 && ops[k - 1].0 == ops[k].0 {
        starts[k - 1] + ops[k - 1].2
    } else {
        0
    };
    let mut t = earliest;
    while t + tail[k] < *best {
        starts.push(t);
        if fits(ops, starts, capacity, cars) {
            search(ops, tail, capacity, cars, starts, best);
        }
        starts.pop();
        t += 1;
    }
}

/// Recomputes start times of `records`, taken in placement order, as the
/// latest end among earlier records on the same task, location or car.
pub fn sweep_starts(records: &[SchemeRecord]) -> Vec<Slice> {
    let mut out: Vec<Slice> = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let start = records[..i]
            .iter()
            .zip(&out)
            .filter(|(p, _)| p.task == r.task || p.location == r.location || p.car == r.car)
            .map(|(p, s)| s + (p.end - p.start))
            .max()
            .unwrap_or(0);
        out.push(start);
    }
    out
}

/// Whether any two records share a location or a car at the same time.
pub fn has_overlap(records: &[SchemeRecord]) -> bool {
    records.iter().enumerate().any(|(i, a)| {
        records[i + 1..].iter().any(|b| {
            (a.location == b.location || a.car == b.car) && a.start < b.end && b.start < a.end
        })
    })
}

/// Every scenario with up to three tasks of one or two operations, over
/// two resource types with durations 1 or 3, for two workstation layouts
/// and one or two cars. Task lists are taken as multisets.
pub fn small_family() -> Vec<ScenarioConfig> {
    let op_choices: Vec<Operation> = [(0, 1), (0, 3), (1, 1), (1, 3)]
        .into_iter()
        .map(|(resource_type, duration)| Operation { resource_type, duration })
        .collect();
    let mut tasks: Vec<Task> = op_choices.iter().map(|&o| Task { ops: vec![o] }).collect();
    for &a in &op_choices {
        for &b in &op_choices {
            tasks.push(Task { ops: vec![a, b] });
        }
    }
    let mut task_sets: Vec<Vec<usize>> = Vec::new();
    for i in 0..tasks.len() {
        task_sets.push(vec![i]);
        for j in i..tasks.len() {
            task_sets.push(vec![i, j]);
            for k in j..tasks.len() {
                task_sets.push(vec![i, j, k]);
            }
        }
    }
    let mut out = Vec::new();
    for layout in [[1, 1], [2, 1]] {
        for cars in [1, 2] {
            for set in &task_sets {
                let equipment = layout
                    .iter()
                    .enumerate()
                    .map(|(resource_type, &workstations)| Equipment { resource_type, workstations })
                    .collect();
                let ts = set.iter().map(|&i| tasks[i].clone()).collect();
                out.push(ScenarioConfig::new(ts, equipment, cars, 0).expect("valid"));
            }
        }
    }
    out
}

/// A random valid scenario of modest size.
pub fn random_scenario(rng: &mut impl Rng, max_tasks: usize) -> ScenarioConfig {
    let types = rng.gen_range(1..=3);
    let equipment: Vec<Equipment> = (0..types)
        .map(|resource_type| Equipment {
            resource_type,
            workstations: rng.gen_range(1..=2),
        })
        .collect();
    let tasks = (0..rng.gen_range(1..=max_tasks))
        .map(|_| Task {
            ops: (0..rng.gen_range(1..=4))
                .map(|_| Operation {
                    resource_type: rng.gen_range(0..types),
                    duration: rng.gen_range(1..=5),
                })
                .collect(),
        })
        .collect();
    ScenarioConfig::new(tasks, equipment, rng.gen_range(1..=3), rng.gen()).expect("valid")
}

//! Machine state: stores and heaps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::ast::{CarRes, CarVar, TaskVar};
use crate::ids::LocId;

/// Value of a task variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaskVal {
    Null,
    Fin,
    /// Cars currently working for the task. Never empty.
    Cars(Vec<CarRes>),
}

impl TaskVal {
    pub fn from_cars(cars: Vec<CarRes>) -> Self {
        if cars.is_empty() {
            TaskVal::Null
        } else {
            TaskVal::Cars(cars)
        }
    }

    pub fn cars(&self) -> &[CarRes] {
        match self {
            TaskVal::Cars(c) => c,
            _ => &[],
        }
    }
}

impl fmt::Display for TaskVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskVal::Null => f.write_str("null"),
            TaskVal::Fin => f.write_str("fin"),
            TaskVal::Cars(c) => {
                let parts: Vec<String> = c.iter().map(ToString::to_string).collect();
                write!(f, "{}", parts.join("."))
            }
        }
    }
}

/// Stores `s_T`, `s_C`, `s_L` and heaps `h_C`, `h_L`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MachineState {
    pub tasks: BTreeMap<TaskVar, TaskVal>,
    pub cars: BTreeMap<CarVar, CarRes>,
    pub locals: BTreeMap<String, i64>,
    pub car_heap: BTreeMap<CarRes, Vec<LocId>>,
    pub loc_heap: BTreeMap<LocId, i64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeparationViolation {
    #[error("{loc} is queued on both {first} and {second}")]
    SharedLocation { loc: LocId, first: CarRes, second: CarRes },
    #[error("{loc} is queued on {car} but has no heap cell")]
    DanglingLocation { loc: LocId, car: CarRes },
    #[error("{loc} has a heap cell but no car queues it")]
    OrphanLocation { loc: LocId },
    #[error("{car} works for both {first} and {second}")]
    SharedCar { car: CarRes, first: TaskVar, second: TaskVar },
    #[error("{task} holds {car}, which has no heap cell")]
    DanglingCar { task: TaskVar, car: CarRes },
}

impl MachineState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Both heaps are empty and every task is finished or idle.
    pub fn is_clean(&self) -> bool {
        self.car_heap.is_empty()
            && self.loc_heap.is_empty()
            && self
                .tasks
                .values()
                .all(|v| matches!(v, TaskVal::Fin | TaskVal::Null))
    }

    /// Task owning `car`, if any.
    pub fn owner_of(&self, car: CarRes) -> Option<TaskVar> {
        self.tasks
            .iter()
            .find(|(_, v)| v.cars().contains(&car))
            .map(|(t, _)| *t)
    }

    /// Disjointness of the heaps: each location cell is queued on exactly
    /// one car and each car works for at most one task.
    pub fn check_separation(&self) -> Result<(), SeparationViolation> {
        let mut seen: BTreeMap<LocId, CarRes> = BTreeMap::new();
        for (car, locs) in &self.car_heap {
            for loc in locs {
                if let Some(first) = seen.insert(*loc, *car) {
                    return Err(SeparationViolation::SharedLocation {
                        loc: *loc,
                        first,
                        second: *car,
                    });
                }
                if !self.loc_heap.contains_key(loc) {
                    return Err(SeparationViolation::DanglingLocation { loc: *loc, car: *car });
                }
            }
        }
        if let Some(loc) = self.loc_heap.keys().find(|l| !seen.contains_key(l)) {
            return Err(SeparationViolation::OrphanLocation { loc: *loc });
        }
        let mut owners: BTreeMap<CarRes, TaskVar> = BTreeMap::new();
        for (task, val) in &self.tasks {
            for car in val.cars() {
                if let Some(first) = owners.insert(*car, *task) {
                    return Err(SeparationViolation::SharedCar {
                        car: *car,
                        first,
                        second: *task,
                    });
                }
                if !self.car_heap.contains_key(car) {
                    return Err(SeparationViolation::DanglingCar { task: *task, car: *car });
                }
            }
        }
        Ok(())
    }

    /// Locations currently allocated.
    pub fn live_locations(&self) -> BTreeSet<LocId> {
        self.loc_heap.keys().copied().collect()
    }
}

fn write_map<K: fmt::Display, V>(
    f: &mut fmt::Formatter<'_>,
    map: &BTreeMap<K, V>,
    show: impl Fn(&V) -> String,
) -> fmt::Result {
    f.write_str("{")?;
    for (i, (k, v)) in map.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{k} -> {}", show(v))?;
    }
    f.write_str("}")
}

impl fmt::Display for MachineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("sT = ")?;
        write_map(f, &self.tasks, |v| v.to_string())?;
        f.write_str("\nsC = ")?;
        write_map(f, &self.cars, |v| v.to_string())?;
        f.write_str("\nsL = ")?;
        write_map(f, &self.locals, |v| v.to_string())?;
        f.write_str("\nhC = ")?;
        write_map(f, &self.car_heap, |v| {
            let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
            format!("[{}]", parts.join(", "))
        })?;
        f.write_str("\nhL = ")?;
        write_map(f, &self.loc_heap, |v| v.to_string())
    }
}

//! Static problem instances: operations, tasks, equipment and cars.
//!
//! A scenario is stored as TOML:
//!
//! ```toml
//! cars = 3
//! seed = 0
//!
//! [[equipment]]
//! resource_type = 0
//! workstations = 2
//!
//! [[tasks]]
//! ops = [{ resource_type = 0, duration = 3 }]
//! ```
//!
//! [`ScenarioConfig::to_toml`] is the normal form; loading and re-emitting a
//! normalized file reproduces it byte for byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{Location, TaskId, MAX_WORKSTATIONS};

/// Whole time slices ("minutes").
pub type Slice = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Operation {
    pub resource_type: usize,
    pub duration: Slice,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub ops: Vec<Operation>,
}

impl Task {
    pub fn total_duration(&self) -> Slice {
        self.ops.iter().map(|op| op.duration).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Equipment {
    pub resource_type: usize,
    pub workstations: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    cars: usize,
    #[serde(default)]
    seed: u64,
    equipment: Vec<Equipment>,
    #[serde(default)]
    tasks: Vec<Task>,
}

/// A validated problem instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub tasks: Vec<Task>,
    pub equipment: Vec<Equipment>,
    pub cars: usize,
    pub car_init_seed: u64,
    n_total: usize,
}

impl ScenarioConfig {
    pub fn new(
        tasks: Vec<Task>,
        equipment: Vec<Equipment>,
        cars: usize,
        car_init_seed: u64,
    ) -> Result<Self, ScenarioError> {
        let n_total = tasks.iter().map(|t| t.ops.len()).sum();
        let scenario = ScenarioConfig {
            tasks,
            equipment,
            cars,
            car_init_seed,
            n_total,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.cars == 0 {
            return invalid("cars must be at least 1".into());
        }
        if self.equipment.is_empty() {
            return invalid("at least one piece of equipment is required".into());
        }
        for (i, e) in self.equipment.iter().enumerate() {
            if e.workstations == 0 {
                return invalid(format!("equipment {i} has no workstations"));
            }
            if e.workstations > MAX_WORKSTATIONS {
                return invalid(format!(
                    "equipment {i} has {} workstations (at most {MAX_WORKSTATIONS})",
                    e.workstations
                ));
            }
        }
        for (t, task) in self.tasks.iter().enumerate() {
            if task.ops.is_empty() {
                return invalid(format!("task {t} has no operations"));
            }
            for (k, op) in task.ops.iter().enumerate() {
                if op.duration == 0 {
                    return invalid(format!("task {t} operation {k} has zero duration"));
                }
                if !self
                    .equipment
                    .iter()
                    .any(|e| e.resource_type == op.resource_type)
                {
                    return invalid(format!(
                        "task {t} operation {k} requires resource type {} but no equipment provides it",
                        op.resource_type
                    ));
                }
            }
        }
        Ok(())
    }

    /// Total number of assignments, one per operation.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id.0]
    }

    /// Every location of the scenario in `(equipment, workstation)` order.
    pub fn locations(&self) -> Vec<Location> {
        self.equipment
            .iter()
            .enumerate()
            .flat_map(|(e, eq)| (0..eq.workstations).map(move |w| Location::new(e, w)))
            .collect()
    }

    pub fn has_location(&self, loc: Location) -> bool {
        self.equipment
            .get(loc.equipment)
            .is_some_and(|e| loc.workstation < e.workstations)
    }

    /// Equipment indices that can serve `resource_type`.
    pub fn equipment_for(&self, resource_type: usize) -> impl Iterator<Item = usize> + '_ {
        self.equipment
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.resource_type == resource_type)
            .map(|(i, _)| i)
    }

    pub fn total_work(&self) -> Slice {
        self.tasks.iter().map(Task::total_duration).sum()
    }

    pub fn max_duration(&self) -> Slice {
        self.tasks
            .iter()
            .flat_map(|t| t.ops.iter().map(|o| o.duration))
            .max()
            .unwrap_or(1)
    }

    /// Normal-form TOML text.
    pub fn to_toml(&self) -> String {
        let file = ScenarioFile {
            cars: self.cars,
            seed: self.car_init_seed,
            equipment: self.equipment.clone(),
            tasks: self.tasks.clone(),
        };
        toml::to_string(&file).expect("scenario serializes")
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|err| {
        let (line, column) = err
            .span()
            .map(|span| line_col(text, span.start))
            .unwrap_or((1, 1));
        ScenarioError::Parse {
            line,
            column,
            message: err.message().to_string(),
        }
    })?;
    ScenarioConfig::new(file.tasks, file.equipment, file.cars, file.seed)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Operation durations of the built-in scenarios; task `i` uses row `i % 12`.
const DURATION_TABLE: [[Slice; 5]; 12] = [
    [3, 2, 4, 2, 3],
    [2, 4, 3, 1, 2],
    [4, 3, 2, 3, 1],
    [1, 2, 5, 2, 4],
    [3, 5, 1, 2, 2],
    [2, 3, 3, 1, 5],
    [5, 1, 2, 2, 3],
    [2, 2, 4, 3, 1],
    [3, 4, 2, 1, 3],
    [1, 3, 3, 2, 2],
    [4, 2, 1, 3, 2],
    [2, 3, 2, 2, 4],
];

/// Workstations of the five equipment types.
pub const DEFAULT_WORKSTATIONS: [usize; 5] = [2, 2, 2, 1, 2];

pub const DEFAULT_CARS: usize = 3;

/// The built-in instance shape: `n_tasks` tasks of five sequential operations
/// over five equipment types, three cars.
pub fn default_scenario(n_tasks: usize) -> ScenarioConfig {
    assert!(n_tasks >= 1, "default_scenario needs at least one task");
    let equipment = DEFAULT_WORKSTATIONS
        .iter()
        .enumerate()
        .map(|(w, &n)| Equipment {
            resource_type: w,
            workstations: n,
        })
        .collect();
    let tasks = (0..n_tasks)
        .map(|i| Task {
            ops: DURATION_TABLE[i % DURATION_TABLE.len()]
                .iter()
                .enumerate()
                .map(|(w, &duration)| Operation {
                    resource_type: w,
                    duration,
                })
                .collect(),
        })
        .collect();
    ScenarioConfig::new(tasks, equipment, DEFAULT_CARS, 0).expect("built-in scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
cars = 2
seed = 7

[[equipment]]
resource_type = 0
workstations = 1

[[equipment]]
resource_type = 1
workstations = 2

[[tasks]]
ops = [{ resource_type = 0, duration = 3 }, { resource_type = 1, duration = 4 }]
"#;

    #[test]
    fn loads_small_file() {
        let s = load_scenario(SMALL).unwrap();
        assert_eq!(s.n_tasks(), 1);
        assert_eq!(s.cars, 2);
        assert_eq!(s.car_init_seed, 7);
        assert_eq!(s.n_total(), 2);
        assert_eq!(s.locations().len(), 3);
    }

    #[test]
    fn default_ten_task_shape() {
        let s = default_scenario(10);
        assert_eq!(s.n_tasks(), 10);
        assert_eq!(s.cars, 3);
        let ws: Vec<_> = s.equipment.iter().map(|e| e.workstations).collect();
        assert_eq!(ws, vec![2, 2, 2, 1, 2]);
        assert_eq!(s.n_total(), 50);
        assert!(s.tasks.iter().all(|t| t.ops.len() == 5));
    }

    #[test]
    fn default_twelve_and_one() {
        let s = default_scenario(12);
        assert_eq!(s.n_tasks(), 12);
        assert_eq!(s.equipment, default_scenario(10).equipment);
        assert_eq!(default_scenario(1).n_total(), 5);
    }

    #[test]
    fn built_in_file_round_trip() {
        let s = default_scenario(10);
        let text = s.to_toml();
        let back = load_scenario(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn zero_cars_rejected() {
        let text = SMALL.replace("cars = 2", "cars = 0");
        assert!(matches!(load_scenario(&text), Err(ScenarioError::Invalid(m)) if m.contains("cars")));
    }

    #[test]
    fn unknown_resource_type_rejected() {
        let text = SMALL.replace("resource_type = 1, duration = 4", "resource_type = 9, duration = 4");
        assert!(matches!(load_scenario(&text), Err(ScenarioError::Invalid(m)) if m.contains("resource type 9")));
    }

    #[test]
    fn zero_duration_rejected() {
        let text = SMALL.replace("duration = 3", "duration = 0");
        assert!(matches!(load_scenario(&text), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn parse_error_has_position() {
        let text = "cars = 3\nseed = \n";
        match load_scenario(text) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn location_ids_follow_equipment_and_workstation() {
        assert_eq!(Location::new(1, 1).loc_id().0, 11);
        assert_eq!(Location::new(4, 0).to_string(), "loc40");
        assert_eq!(Location::from_loc_id(Location::new(3, 0).loc_id()), Location::new(3, 0));
    }
}

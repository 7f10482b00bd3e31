//! Identifiers shared by the simulator, the modeling language and the verifier.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a task within a scenario (`t0`, `t1`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub usize);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// A physical car, numbered from 1 so that lower-layer action `d` selects car `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CarId(pub usize);

impl CarId {
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(index: usize) -> Self {
        CarId(index + 1)
    }
}

impl fmt::Display for CarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "car{}", self.0)
    }
}

/// Identity of a location resource in the location heap.
///
/// Scenario locations map onto ids as `10 * equipment + workstation`, so the
/// second workstation of equipment 1 is `loc11`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocId(pub u32);

impl fmt::Display for LocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "loc{}", self.0)
    }
}

/// One workstation of one piece of equipment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub equipment: usize,
    pub workstation: usize,
}

/// Largest workstation count that keeps [`Location::loc_id`] injective.
pub const MAX_WORKSTATIONS: usize = 10;

impl Location {
    pub fn new(equipment: usize, workstation: usize) -> Self {
        Location { equipment, workstation }
    }

    pub fn loc_id(self) -> LocId {
        LocId((self.equipment * MAX_WORKSTATIONS + self.workstation) as u32)
    }

    pub fn from_loc_id(id: LocId) -> Self {
        let raw = id.0 as usize;
        Location::new(raw / MAX_WORKSTATIONS, raw % MAX_WORKSTATIONS)
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.loc_id().fmt(f)
    }
}

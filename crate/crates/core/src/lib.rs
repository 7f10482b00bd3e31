//! Pattern-driven correctness learning for hierarchical job-shop scheduling.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`] and [`scheme`]: problem instances and the schedules they admit.
//! - [`sim`]: the two-layer decision environment (task selection above, car
//!   selection below) that emits complete schemes.
//! - [`lang`]: a small resource-heap modeling language with a deterministic
//!   small-step interpreter.
//! - [`verify`]: compiles a scheme into a modeling program, runs it and
//!   reports whether every resource was used and released correctly.
//! - [`pattern`]: per-location task priority relations extracted from a
//!   verified run, and the pattern-match reward.
//! - [`agents`]: small dense networks, DQN-family and PPO learners and the
//!   hierarchical training loop.
//! - [`search`]: exhaustive and randomized reference schedulers.
//! - [`fixtures`]: shipped reference programs and schemes.

pub mod agents;
pub mod fixtures;
pub mod ids;
pub mod lang;
pub mod pattern;
pub mod scenario;
pub mod scheme;
pub mod search;
pub mod sim;
pub mod verify;

pub use ids::{CarId, LocId, Location, TaskId};
pub use scenario::{default_scenario, load_scenario, ScenarioConfig, Slice};
pub use scheme::{makespan, SchedulingScheme, SchemeRecord};

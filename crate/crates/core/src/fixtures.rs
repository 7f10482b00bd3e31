//! Reference material shipped with the crate.

use crate::lang::{parse_program, Program};
use crate::scenario::ScenarioConfig;
use crate::scheme::SchedulingScheme;
use crate::search::{best_random_scheme, optimal_scheme};

/// Hand-written program for two tasks, `t0` and `t8`, that share `loc11`
/// and `loc20`. Line numbers are stable; tests refer to them.
pub const HANDOVER_PROGRAM: &str = include_str!("../fixtures/handover.mljss");

/// The scheme fragment that [`HANDOVER_PROGRAM`] models.
pub const HANDOVER_SCHEME_CSV: &str = include_str!("../fixtures/handover.csv");

/// Near-optimal scheme for `default_scenario(10)`, found by randomized
/// search (makespan 44, lower bound 43).
pub const HISTORICAL_10_CSV: &str = include_str!("../fixtures/historical_10.csv");

pub fn handover_program() -> Program {
    parse_program(HANDOVER_PROGRAM).expect("shipped fixture parses")
}

pub fn handover_scheme() -> SchedulingScheme {
    SchedulingScheme::from_csv_str(HANDOVER_SCHEME_CSV).expect("shipped fixture parses")
}

pub fn historical_10() -> SchedulingScheme {
    SchedulingScheme::from_csv_str(HISTORICAL_10_CSV).expect("shipped fixture parses")
}

/// Historical reference scheme for `scenario`: the shipped fixture for the
/// default 10-task scenario, an exact optimum for small instances and a
/// seeded randomized search otherwise.
pub fn historical_scheme(scenario: &ScenarioConfig) -> SchedulingScheme {
    if *scenario == crate::default_scenario(10) {
        return historical_10();
    }
    if scenario.n_total() <= 12 {
        return optimal_scheme(scenario).1;
    }
    best_random_scheme(scenario, 7, 2_000).2
}

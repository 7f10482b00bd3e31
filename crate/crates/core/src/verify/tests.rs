use proptest::prelude::*;

use super::*;
use crate::ids::{CarId, Location, TaskId};
use crate::lang::{parse_program, CarRes, Command, PlanItem, Rule};
use crate::scheme::SchemeRecord;
use crate::sim::{JobShopEnv, RewardConfig};

fn rec(task: usize, op: usize, loc: (usize, usize), car: usize, start: u64, end: u64) -> SchemeRecord {
    SchemeRecord {
        task: TaskId(task),
        op,
        location: Location::new(loc.0, loc.1),
        car: CarId(car),
        start,
        end,
    }
}

fn rules(p: &ModelingProgram) -> Vec<&'static str> {
    p.program
        .stmts
        .iter()
        .map(|s| match s.command {
            Command::Plan(..) => "plan",
            Command::Asgn(..) => "asgn",
            Command::Att(..) => "att",
            Command::Exec1(..) => "exec1",
            Command::Free(..) => "free",
            Command::Comp(..) => "comp",
            _ => "other",
        })
        .collect()
}

#[test]
fn single_run_compiles_to_one_plan() {
    let s = SchedulingScheme::new(vec![rec(0, 0, (0, 0), 1, 0, 2), rec(0, 1, (1, 0), 1, 2, 5)]);
    let p = compile_scheme(&s, None).unwrap();
    assert_eq!(rules(&p), ["plan", "asgn", "exec1", "exec1", "free", "comp"]);
    assert_eq!(p.line_map, vec![0, 0, 0, 1, 1, 1]);
    let r = verify(&p.program, None);
    assert!(r.is_verified(), "{}", r.render());
    assert_eq!(r.simulated_makespan, 5);
}

#[test]
fn shared_location_is_replanned_after_release() {
    let s = SchedulingScheme::new(vec![rec(0, 0, (1, 1), 1, 0, 3), rec(1, 0, (1, 1), 2, 3, 5)]);
    let p = compile_scheme(&s, None).unwrap();
    let r = verify(&p.program, None);
    assert!(r.is_verified());
    assert!(r.occupancy_alternates());
    let kinds: Vec<_> = r
        .occupancy_of(LocId(11))
        .map(|e| (e.task.0, e.kind))
        .collect();
    assert_eq!(
        kinds,
        vec![
            (0, OccupancyKind::Allocate),
            (0, OccupancyKind::Release),
            (1, OccupancyKind::Allocate),
            (1, OccupancyKind::Release)
        ]
    );
}

#[test]
fn runs_split_when_a_cell_is_needed_elsewhere() {
    // t0 visits loc11 then loc20 on car 1, but t1 uses loc20 in between.
    let s = SchedulingScheme::new(vec![
        rec(0, 0, (1, 1), 1, 0, 2),
        rec(0, 1, (2, 0), 1, 4, 6),
        rec(1, 0, (2, 0), 2, 1, 3),
    ]);
    let p = compile_scheme(&s, None).unwrap();
    let plans = p
        .program
        .stmts
        .iter()
        .filter(|s| matches!(s.command, Command::Plan(..)))
        .count();
    assert_eq!(plans, 3);
    assert!(verify(&p.program, None).is_verified());

    // The same car reused by another task in a gap also forces a split.
    let s = SchedulingScheme::new(vec![
        rec(0, 0, (1, 1), 1, 0, 2),
        rec(0, 1, (2, 0), 1, 4, 6),
        rec(1, 0, (3, 0), 1, 2, 4),
    ]);
    let p = compile_scheme(&s, None).unwrap();
    assert!(rules(&p).contains(&"att"));
    assert!(verify(&p.program, None).is_verified());
}

#[test]
fn revisiting_a_location_within_one_run() {
    let s = SchedulingScheme::new(vec![rec(0, 0, (1, 1), 1, 0, 2), rec(0, 1, (1, 1), 1, 2, 4)]);
    let p = compile_scheme(&s, None).unwrap();
    assert!(verify(&p.program, None).is_verified());
}

#[test]
fn overlapping_scheme_is_refused() {
    let s = SchedulingScheme::new(vec![rec(0, 0, (1, 1), 1, 0, 3), rec(1, 0, (1, 1), 2, 2, 5)]);
    assert!(matches!(
        compile_scheme(&s, None),
        Err(SchemeViolation::LocationOverlap { .. })
    ));
}

#[test]
fn free_before_exec1_is_stuck() {
    let p = parse_program("plan c1@0 [2 @ loc11];\nasgn t0 (c1@0);\nfree t0.0;\n").unwrap();
    let r = verify(&p, None);
    assert_eq!(
        r.verdict,
        Verdict::Stuck {
            reason: Stuck::NonEmptyCar(CarRes(1)),
            command: 2
        }
    );
}

#[test]
fn double_planned_location_is_stuck_on_freshness() {
    let s = SchedulingScheme::new(vec![rec(0, 0, (1, 1), 1, 0, 3), rec(1, 0, (1, 1), 2, 3, 5)]);
    let mut p = compile_scheme(&s, None).unwrap().program;
    // Move t1's plan in front of t0's release.
    let idx = p
        .stmts
        .iter()
        .position(|s| matches!(&s.command, Command::Plan(c, _) if c.owner == 1))
        .unwrap();
    let plan = p.stmts.remove(idx);
    p.stmts.insert(2, plan);
    let r = verify(&p, None);
    assert!(
        matches!(&r.verdict, Verdict::Stuck { reason: Stuck::LocationInUse(l), command: 2 } if *l == LocId(11)),
        "{}",
        r.verdict
    );
    assert!(r.verdict.to_string().contains("freshness"));
}

#[test]
fn leftover_cells_are_unclean() {
    let p = Program::from_commands([Command::Plan(
        crate::lang::CarVar::new(1, 0),
        vec![PlanItem::pinned(1, LocId(11))],
    )]);
    assert_eq!(verify(&p, None).verdict, Verdict::Unclean);
}

#[test]
fn fuel_exhaustion_is_a_verdict() {
    let p = parse_program("while true do { skip; };").unwrap();
    assert_eq!(verify(&p, Some(20)).verdict, Verdict::FuelExhausted);
}

#[test]
fn report_renders_table() {
    let s = SchedulingScheme::new(vec![rec(0, 0, (1, 1), 1, 0, 3)]);
    let r = verify(&compile_scheme(&s, None).unwrap().program, None);
    let text = r.render();
    assert!(text.starts_with("verdict: Verified\n"));
    assert!(text.contains("loc11"));
    assert!(text.contains("release"));
}

fn random_episode_scheme(n: usize, seed: u64) -> (crate::ScenarioConfig, SchedulingScheme, u64) {
    let scenario = crate::default_scenario(n);
    let (mut env, _) = JobShopEnv::upper_reset(&scenario, RewardConfig::default(), seed);
    let mut rng = seed;
    while !env.is_done() {
        let open = env.open_tasks();
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let t = open[(rng >> 33) as usize % open.len()];
        env.upper_step(t, &crate::sim::GreedyLower).unwrap();
    }
    let scheme = env.emit_scheme().unwrap();
    let horizon = env.horizon();
    (scenario, scheme, horizon)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn episode_schemes_verify(n in 1usize..8, seed in any::<u64>()) {
        let (scenario, scheme, horizon) = random_episode_scheme(n, seed);
        let report = check_scheme(&scheme, &scenario, None).unwrap();
        prop_assert!(report.is_verified(), "{}", report.render());
        prop_assert_eq!(report.simulated_makespan, horizon);
        prop_assert!(report.occupancy_alternates());
        // Occupancy order per location follows scheme start order.
        for loc in scenario.locations() {
            let mut recs: Vec<_> = scheme.records.iter().filter(|r| r.location == loc).collect();
            recs.sort_by_key(|r| r.start);
            let want: Vec<u32> = recs.iter().map(|r| r.task.0 as u32).collect();
            let got: Vec<u32> = report
                .occupancy_of(loc.loc_id())
                .filter(|e| e.kind == OccupancyKind::Release)
                .map(|e| e.task.0)
                .collect();
            prop_assert_eq!(got, want);
        }
        let releases = report.occupancy.iter().filter(|e| e.kind == OccupancyKind::Release).count();
        prop_assert_eq!(releases, scheme.len());
    }
}

#[test]
fn trace_rules_cover_resource_commands() {
    let s = SchedulingScheme::new(vec![rec(0, 0, (0, 0), 1, 0, 2)]);
    let p = compile_scheme(&s, None).unwrap();
    let run = crate::lang::run_program(&p.program, MachineState::new(), Default::default());
    let rules: Vec<Rule> = run.trace.iter().map(|e| e.step.rule).collect();
    assert_eq!(rules, [Rule::Plan, Rule::Asgn, Rule::Exec1, Rule::Free, Rule::Comp]);
}

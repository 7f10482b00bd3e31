mod common;

use common::{brute_force_optimum, has_overlap, random_scenario, small_family, sweep_starts};
use pdcl::agents::RandomLower;
use pdcl::search::optimal_makespan;
use pdcl::sim::{JobShopEnv, RewardConfig};
use pdcl::TaskId;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn search_matches_brute_force_on_the_small_family() {
    let family = small_family();
    assert_eq!(family.len(), 4 * (20 + 210 + 1540));
    for s in &family {
        assert_eq!(optimal_makespan(s), brute_force_optimum(s), "{}", s.to_toml());
    }
}

#[test]
fn brute_force_on_a_hand_case() {
    // two workstations but one car: the two operations run back to back
    let text = "cars = 1\n[[equipment]]\nresource_type = 0\nworkstations = 2\n[[tasks]]\nops = [{ resource_type = 0, duration = 3 }]\n[[tasks]]\nops = [{ resource_type = 0, duration = 3 }]\n";
    let s = pdcl::load_scenario(text).unwrap();
    assert_eq!(brute_force_optimum(&s), 6);
    let s = pdcl::load_scenario(&text.replace("cars = 1", "cars = 2")).unwrap();
    assert_eq!(brute_force_optimum(&s), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simulator_times_match_an_interval_sweep(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scenario(&mut rng, 5);
        let lower = RandomLower::new(seed);
        let (mut env, _) = JobShopEnv::upper_reset(&s, RewardConfig::default(), seed);
        while !env.is_done() {
            let t = TaskId(rng.gen_range(0..s.n_tasks()));
            env.upper_step(t, &lower).unwrap();
        }
        let records = env.records();
        let starts = sweep_starts(records);
        for (r, st) in records.iter().zip(&starts) {
            prop_assert_eq!(r.start, *st);
        }
        prop_assert!(!has_overlap(records));
        let sweep_ms = records.iter().zip(&starts).map(|(r, s)| s + r.end - r.start).max().unwrap_or(0);
        prop_assert_eq!(env.horizon(), sweep_ms);
    }
}

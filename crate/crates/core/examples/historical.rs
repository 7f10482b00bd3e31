//! Regenerates the historical reference scheme for the 10-task scenario:
//! `cargo run --release -p pdcl --example historical > fixtures/historical_10.csv`

use pdcl::search::best_random_scheme;
use pdcl::verify::check_scheme;

fn main() {
    let scenario = pdcl::default_scenario(10);
    let (ms, _, scheme) = best_random_scheme(&scenario, 7, 20_000);
    let report = check_scheme(&scheme, &scenario, None).expect("search output is a valid scheme");
    assert!(report.is_verified());
    eprintln!("makespan {ms}, lower bound {}", pdcl::search::lower_bound_of(&scenario));
    print!("{}", scheme.to_csv_string());
}

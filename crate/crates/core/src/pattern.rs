//! Priority patterns: which task holds each shared location first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ids::LocId;
use crate::lang::TaskVar;
use crate::scenario::ScenarioConfig;
use crate::scheme::SchedulingScheme;
use crate::sim::RewardConfig;
use crate::verify::{check_scheme, OccupancyKind, Verdict, VerificationReport, VerifyError};

/// `(location, earlier task, later task)`.
pub type Relation = (LocId, TaskVar, TaskVar);

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("patterns come only from verified schemes, got {0}")]
    NotVerified(Verdict),
    #[error("{0} is not a location of the scenario")]
    UnknownLocation(LocId),
    #[error("pattern line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PriorityPattern {
    pub relations: BTreeSet<Relation>,
}

impl PriorityPattern {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn locations(&self) -> BTreeSet<LocId> {
        self.relations.iter().map(|r| r.0).collect()
    }

    /// Tasks of `loc` in priority order, if the relations there form a
    /// strict total order.
    pub fn order_at(&self, loc: LocId) -> Option<Vec<TaskVar>> {
        let mut wins: BTreeMap<TaskVar, usize> = BTreeMap::new();
        for &(l, a, b) in &self.relations {
            if l == loc {
                *wins.entry(a).or_default() += 1;
                wins.entry(b).or_default();
            }
        }
        let n = wins.len();
        let mut order: Vec<(usize, TaskVar)> = wins.into_iter().map(|(t, w)| (w, t)).collect();
        order.sort_by(|x, y| y.cmp(x));
        let total = order.iter().enumerate().all(|(i, (w, _))| *w == n - 1 - i);
        total.then(|| order.into_iter().map(|(_, t)| t).collect())
    }

    /// Fails on the first location missing from `scenario`.
    pub fn check_namespace(&self, scenario: &ScenarioConfig) -> Result<(), PatternError> {
        let known: BTreeSet<LocId> = scenario.locations().iter().map(|l| l.loc_id()).collect();
        match self.locations().into_iter().find(|l| !known.contains(l)) {
            Some(l) => Err(PatternError::UnknownLocation(l)),
            None => Ok(()),
        }
    }
}

/// Pattern file: one `locN tA tB` triple per line, sorted.
impl fmt::Display for PriorityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, a, b) in &self.relations {
            writeln!(f, "{l} {a} {b}")?;
        }
        Ok(())
    }
}

fn parse_num(word: &str, prefix: &str) -> Option<u32> {
    word.strip_prefix(prefix)?.parse().ok()
}

impl FromStr for PriorityPattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut relations = BTreeSet::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("# ") || line == "#" {
                continue;
            }
            let err = |message: &str| PatternError::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let words: Vec<&str> = line.split_whitespace().collect();
            let [l, a, b] = words[..] else {
                return Err(err("expected `locN tA tB`"));
            };
            let l = parse_num(l, "loc").ok_or_else(|| err("bad location"))?;
            let a = parse_num(a, "t").ok_or_else(|| err("bad task"))?;
            let b = parse_num(b, "t").ok_or_else(|| err("bad task"))?;
            if a == b {
                return Err(err("a task cannot precede itself"));
            }
            relations.insert((LocId(l), TaskVar(a), TaskVar(b)));
        }
        Ok(PriorityPattern { relations })
    }
}

/// Orders the tasks at every location by their first allocation and emits
/// all ordered pairs.
pub fn extract_pattern(report: &VerificationReport) -> Result<PriorityPattern, PatternError> {
    if !report.is_verified() {
        return Err(PatternError::NotVerified(report.verdict.clone()));
    }
    let mut occupants: BTreeMap<LocId, Vec<TaskVar>> = BTreeMap::new();
    for e in &report.occupancy {
        if e.kind == OccupancyKind::Allocate {
            let seq = occupants.entry(e.location).or_default();
            if !seq.contains(&e.task) {
                seq.push(e.task);
            }
        }
    }
    let mut relations = BTreeSet::new();
    for (loc, seq) in occupants {
        for (i, &a) in seq.iter().enumerate() {
            for &b in &seq[i + 1..] {
                relations.insert((loc, a, b));
            }
        }
    }
    Ok(PriorityPattern { relations })
}

/// Verifies `scheme` and extracts its pattern.
pub fn pattern_of_scheme(
    scheme: &SchedulingScheme,
    scenario: &ScenarioConfig,
) -> Result<PriorityPattern, PatternError> {
    extract_pattern(&check_scheme(scheme, scenario, None)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    pub mu_match: usize,
    pub mu_total: usize,
    pub matched: BTreeSet<Relation>,
    pub missed: BTreeSet<Relation>,
}

/// Counts the historical relations that the output reproduces.
pub fn match_patterns(
    output: &PriorityPattern,
    historical: &PriorityPattern,
    scenario: &ScenarioConfig,
) -> Result<MatchResult, PatternError> {
    output.check_namespace(scenario)?;
    historical.check_namespace(scenario)?;
    let matched: BTreeSet<Relation> = historical
        .relations
        .intersection(&output.relations)
        .copied()
        .collect();
    let missed = historical.relations.difference(&matched).copied().collect();
    Ok(MatchResult {
        mu_match: matched.len(),
        mu_total: historical.len(),
        matched,
        missed,
    })
}

/// Pattern reward `sign * alpha * (mu_match - mu_total / 2)`.
pub fn reward_rz(m: &MatchResult, cfg: &RewardConfig) -> f64 {
    rz(m.mu_match, m.mu_total, cfg)
}

pub fn rz(mu_match: usize, mu_total: usize, cfg: &RewardConfig) -> f64 {
    cfg.alpha_sign.factor() * cfg.alpha * (mu_match as f64 - mu_total as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::ids::{CarId, Location, TaskId};
    use crate::scheme::SchemeRecord;
    use crate::sim::AlphaSign;
    use crate::verify::{compile_scheme, verify};

    fn rel(l: u32, a: u32, b: u32) -> Relation {
        (LocId(l), TaskVar(a), TaskVar(b))
    }

    fn pat(rs: &[Relation]) -> PriorityPattern {
        PriorityPattern {
            relations: rs.iter().copied().collect(),
        }
    }

    fn through_one_location(order: &[usize]) -> SchedulingScheme {
        SchedulingScheme::new(
            order
                .iter()
                .enumerate()
                .map(|(k, &t)| SchemeRecord {
                    task: TaskId(t),
                    op: 0,
                    location: Location::new(1, 1),
                    car: CarId(1),
                    start: 2 * k as u64,
                    end: 2 * k as u64 + 2,
                })
                .collect(),
        )
    }

    fn pattern(s: &SchedulingScheme) -> PriorityPattern {
        extract_pattern(&verify(&compile_scheme(s, None).unwrap().program, None)).unwrap()
    }

    #[test]
    fn pairwise_closure_of_one_location() {
        let p = pattern(&through_one_location(&[1, 2, 3]));
        assert_eq!(p, pat(&[rel(11, 1, 2), rel(11, 1, 3), rel(11, 2, 3)]));
        assert_eq!(p.order_at(LocId(11)), Some(vec![TaskVar(1), TaskVar(2), TaskVar(3)]));
        assert!(pattern(&through_one_location(&[4])).is_empty());
    }

    #[test]
    fn translation_does_not_change_pattern() {
        let s = through_one_location(&[2, 0, 1]);
        assert_eq!(pattern(&s), pattern(&s.translated(17)));
    }

    #[test]
    fn unverified_reports_are_rejected() {
        let p = crate::lang::parse_program("plan c1@0 [1 @ loc11];").unwrap();
        assert!(matches!(
            extract_pattern(&verify(&p, None)),
            Err(PatternError::NotVerified(Verdict::Unclean))
        ));
    }

    #[test]
    fn matching_counts_historical_relations() {
        let sc = crate::default_scenario(3);
        let hist = pat(&[rel(11, 0, 1), rel(20, 1, 0)]);
        let out = pat(&[rel(11, 0, 1), rel(20, 0, 1)]);
        let m = match_patterns(&out, &hist, &sc).unwrap();
        assert_eq!((m.mu_match, m.mu_total), (1, 2));
        assert_eq!(m.missed, pat(&[rel(20, 1, 0)]).relations);
        let same = match_patterns(&hist, &hist, &sc).unwrap();
        assert_eq!(same.mu_match, same.mu_total);
        let none = match_patterns(&pat(&[rel(30, 2, 1)]), &hist, &sc).unwrap();
        assert_eq!(none.mu_match, 0);
        assert!(matches!(
            match_patterns(&pat(&[rel(99, 0, 1)]), &hist, &sc),
            Err(PatternError::UnknownLocation(LocId(99)))
        ));
    }

    #[test]
    fn reward_values() {
        let mut cfg = RewardConfig {
            alpha: 1.0,
            ..RewardConfig::default()
        };
        assert_eq!(rz(4, 4, &cfg), 2.0);
        cfg.alpha_sign = AlphaSign::Negative;
        assert_eq!(rz(4, 4, &cfg), -2.0);
        assert_eq!(rz(3, 6, &cfg), 0.0);
        cfg.alpha = 0.0;
        assert_eq!(rz(1, 4, &cfg), 0.0);
    }

    #[test]
    fn pattern_file_round_trip() {
        let p = pat(&[rel(20, 8, 0), rel(11, 0, 8)]);
        let text = p.to_string();
        assert_eq!(text, "loc11 t0 t8\nloc20 t8 t0\n");
        assert_eq!(text.parse::<PriorityPattern>().unwrap(), p);
        assert!("loc11 t0".parse::<PriorityPattern>().is_err());
        assert!("loc11 t0 t0".parse::<PriorityPattern>().is_err());
    }

    proptest! {
        #[test]
        fn extracted_orders_are_strict_and_total(order in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle()) {
            let p = pattern(&through_one_location(&order));
            for &(l, a, b) in &p.relations {
                prop_assert!(!p.relations.contains(&(l, b, a)));
            }
            let want: Vec<TaskVar> = order.iter().map(|&t| TaskVar(t as u32)).collect();
            prop_assert_eq!(p.order_at(LocId(11)), Some(want));
        }
    }
}

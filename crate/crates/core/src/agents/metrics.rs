//! Per-episode metrics and per-run summaries as CSV.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::Algorithm;
use super::AgentError;
use crate::scenario::Slice;

/// One training episode. `comt` is empty when the episode ran out of budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    #[serde(rename = "ComT")]
    pub comt: Option<Slice>,
    /// `Σ (r_x + r_y)`; the pattern reward is reported separately.
    #[serde(rename = "CumR")]
    pub cum_reward: f64,
    pub r_z: f64,
    pub verified: bool,
    pub mu_match: usize,
    pub mu_total: usize,
    pub steps: usize,
}

/// Outcome of one training run followed by a greedy evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub seed: u64,
    pub steps: usize,
    #[serde(rename = "ComT")]
    pub comt: Option<Slice>,
    #[serde(rename = "CumR")]
    pub cum_reward: f64,
    #[serde(rename = "DecT_total_ms")]
    pub dect_total_ms: f64,
    #[serde(rename = "DecT_mean_ms")]
    pub dect_mean_ms: f64,
    #[serde(rename = "TraT_min")]
    pub trat_min: f64,
    pub verified: bool,
}

pub fn write_metrics(out: impl Write, rows: &[EpisodeMetrics]) -> Result<(), AgentError> {
    write_rows(out, rows)
}

pub fn read_metrics(input: impl Read) -> Result<Vec<EpisodeMetrics>, AgentError> {
    read_rows(input)
}

pub fn write_summaries(out: impl Write, rows: &[RunSummary]) -> Result<(), AgentError> {
    write_rows(out, rows)
}

pub fn read_summaries(input: impl Read) -> Result<Vec<RunSummary>, AgentError> {
    read_rows(input)
}

fn write_rows<T: Serialize>(out: impl Write, rows: &[T]) -> Result<(), AgentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(input: impl Read) -> Result<Vec<T>, AgentError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(AgentError::from)
}

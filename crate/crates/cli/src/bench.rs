//! `pdcl bench`: baseline vs PDCL table and reward curves from persisted CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use pdcl::agents::{read_metrics, read_summaries, Algorithm, EpisodeMetrics, RunSummary};

use crate::rundir::RunDir;
use crate::train::run_name;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Training run directories written by `pdcl train`.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Pattern weight of the PDCL rows. Needed when the runs use several
    /// non-zero weights.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Run {
    pub summary: RunSummary,
    pub episodes: Vec<EpisodeMetrics>,
}

/// Every `runs/<name>/summary.csv` under the given directories, with its
/// metrics, in path order.
pub fn load_runs(dirs: &[PathBuf]) -> Result<Vec<Run>> {
    let mut out: BTreeMap<String, Run> = BTreeMap::new();
    for dir in dirs {
        let runs_dir = dir.join("runs");
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&runs_dir)
            .with_context(|| format!("reading {}", runs_dir.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for path in entries {
            let summary_path = path.join("summary.csv");
            if !summary_path.is_file() {
                eprintln!("skipping {}: no summary.csv", path.display());
                continue;
            }
            let summaries = read_summaries(File::open(&summary_path)?)
                .with_context(|| format!("reading {}", summary_path.display()))?;
            let metrics_path = path.join("metrics.csv");
            let episodes = read_metrics(File::open(&metrics_path)?)
                .with_context(|| format!("reading {}", metrics_path.display()))?;
            for summary in summaries {
                let name = run_name(summary.algorithm, summary.alpha, summary.seed);
                if out.contains_key(&name) {
                    bail!("run {name} appears more than once");
                }
                out.insert(
                    name,
                    Run {
                        summary,
                        episodes: episodes.clone(),
                    },
                );
            }
        }
    }
    Ok(out.into_values().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    Baseline,
    Pdcl,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Pdcl => "PDCL",
        }
    }
}

/// One table row: means over the seeds of one (algorithm, mode) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub alpha: Option<f64>,
    pub runs: usize,
    pub completed: usize,
    /// Mean over completed runs.
    pub comt: Option<f64>,
    pub cum_reward: Option<f64>,
    pub dect_total_ms: Option<f64>,
    pub dect_mean_ms: Option<f64>,
    pub trat_min: Option<f64>,
    /// `(baseline ComT - PDCL ComT) / baseline ComT`, on PDCL rows.
    pub improvement: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

pub fn pdcl_alpha(runs: &[Run], requested: Option<f64>) -> Result<Option<f64>> {
    if requested.is_some() {
        return Ok(requested);
    }
    let mut alphas: Vec<f64> = runs.iter().map(|r| r.summary.alpha).filter(|&a| a != 0.0).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    match alphas.as_slice() {
        [] => Ok(None),
        [a] => Ok(Some(*a)),
        many => bail!("runs use several pattern weights {many:?}; choose one with --alpha"),
    }
}

pub fn table(runs: &[Run], alpha: Option<f64>) -> Vec<Row> {
    let mut rows = Vec::new();
    for algorithm in Algorithm::ALL {
        let mut base_comt = None;
        for mode in [Mode::Baseline, Mode::Pdcl] {
            let want = match mode {
                Mode::Baseline => Some(0.0),
                Mode::Pdcl => alpha,
            };
            let cell: Vec<&RunSummary> = runs
                .iter()
                .map(|r| &r.summary)
                .filter(|s| s.algorithm == algorithm && Some(s.alpha) == want)
                .collect();
            let done = || cell.iter().filter(|s| s.comt.is_some());
            let comt = mean(done().map(|s| s.comt.unwrap() as f64));
            let improvement = match (mode, base_comt, comt) {
                (Mode::Pdcl, Some(b), Some(p)) => Some((b - p) / b),
                _ => None,
            };
            if mode == Mode::Baseline {
                base_comt = comt;
            }
            rows.push(Row {
                algorithm,
                mode,
                alpha: want,
                runs: cell.len(),
                completed: done().count(),
                comt,
                cum_reward: mean(cell.iter().map(|s| s.cum_reward)),
                dect_total_ms: mean(cell.iter().map(|s| s.dect_total_ms)),
                dect_mean_ms: mean(cell.iter().map(|s| s.dect_mean_ms)),
                trat_min: mean(cell.iter().map(|s| s.trat_min)),
                improvement,
            });
        }
    }
    rows
}

const HEADER: [&str; 11] = [
    "algorithm",
    "mode",
    "alpha",
    "runs",
    "completed",
    "ComT",
    "CumR",
    "DecT_total_ms",
    "DecT_mean_ms",
    "TraT_min",
    "improvement",
];

fn cells(row: &Row) -> [String; 11] {
    let f = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |v| format!("{v:.digits$}"));
    [
        row.algorithm.to_string(),
        row.mode.name().to_string(),
        row.alpha.map_or("-".to_string(), |a| a.to_string()),
        row.runs.to_string(),
        row.completed.to_string(),
        f(row.comt, 1),
        f(row.cum_reward, 6),
        f(row.dect_total_ms, 3),
        f(row.dect_mean_ms, 4),
        f(row.trat_min, 2),
        row.improvement.map_or("-".to_string(), |v| format!("{:.1}%", v * 100.0)),
    ]
}

pub fn render_markdown(rows: &[Row]) -> String {
    let body: Vec<[String; 11]> = rows.iter().map(cells).collect();
    let widths: Vec<usize> = (0..HEADER.len())
        .map(|i| body.iter().map(|r| r[i].len()).chain([HEADER[i].len()]).max().unwrap())
        .collect();
    let mut s = String::new();
    let line = |s: &mut String, cols: &[&str]| {
        s.push('|');
        for (c, w) in cols.iter().zip(&widths) {
            let _ = write!(s, " {c:<w$} |");
        }
        s.push('\n');
    };
    line(&mut s, &HEADER);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut s, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    for r in &body {
        line(&mut s, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    s
}

pub fn render_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(cells(r))?;
    }
    Ok(w.into_inner()?)
}

fn curve(episodes: &[EpisodeMetrics]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["episode", "CumR", "r_z", "ComT"])?;
    for m in episodes {
        w.write_record([
            m.episode.to_string(),
            m.cum_reward.to_string(),
            m.r_z.to_string(),
            m.comt.map_or(String::new(), |c| c.to_string()),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn cmd_bench(out: &Path, args: BenchArgs) -> Result<ExitCode> {
    let runs = load_runs(&args.runs)?;
    let alpha = pdcl_alpha(&runs, args.alpha)?;
    let rows = table(&runs, alpha);
    for r in rows.iter().filter(|r| r.runs == 0) {
        eprintln!("missing cell: {} {}", r.algorithm, r.mode.name());
    }
    let dir = RunDir::create(out, "bench")?;
    let md = render_markdown(&rows);
    dir.write("table.md", &md)?;
    dir.write("table.csv", render_csv(&rows)?)?;
    for r in &runs {
        let s = &r.summary;
        dir.write(
            &format!("curves/{}.csv", run_name(s.algorithm, s.alpha, s.seed)),
            curve(&r.episodes)?,
        )?;
    }
    print!("{md}");
    println!("wrote {}", dir.path().display());
    Ok(ExitCode::SUCCESS)
}

//! Threshold sweeps over a directory of programs.

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

use crate::analysis::{verify_with, Verdict};
use crate::config::{Config, Threshold};
use crate::cpa::CpaRegistry;
use crate::frontend::parse;
use crate::interp::Outcome;

pub const DEFAULT_THRESHOLDS: [Threshold; 5] = [
    Threshold::Finite(0),
    Threshold::Finite(2),
    Threshold::Finite(3),
    Threshold::Finite(5),
    Threshold::Infinite,
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchCell {
    /// `SAFE`, `UNSAFE` or `UNKNOWN`.
    pub verdict: String,
    pub relaxed: bool,
    pub time_us: u64,
    pub preds: usize,
    pub refines: usize,
    /// The run hit a limit or failed; counts are not meaningful.
    pub aborted: bool,
    /// For UNSAFE cells, whether the witness replays to an error.
    pub replayed: Option<bool>,
}

impl BenchCell {
    fn failed() -> Self {
        BenchCell {
            verdict: "UNKNOWN".into(),
            relaxed: false,
            time_us: 0,
            preds: 0,
            refines: 0,
            aborted: true,
            replayed: None,
        }
    }

    pub fn time_s(&self) -> f64 {
        self.time_us as f64 / 1e6
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub program: String,
    pub cells: Vec<(Threshold, BenchCell)>,
}

impl BenchRow {
    pub fn cell(&self, t: Threshold) -> Option<&BenchCell> {
        self.cells.iter().find(|(x, _)| *x == t).map(|(_, c)| c)
    }

    pub fn is_bug_variant(&self) -> bool {
        self.program.ends_with("_BUG")
    }
}

/// `.mc` files of `dir`, sorted by name.
pub fn suite_programs(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let io = |e: std::io::Error| BenchError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.extension().is_some_and(|e| e == "mc") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Verifies one program at one threshold.
pub fn run_cell(registry: &CpaRegistry, source: &str, config: &Config, t: Threshold) -> BenchCell {
    let Ok(program) = parse(source) else {
        return BenchCell::failed();
    };
    let cfg = config.clone().with_threshold(t);
    let Ok(r) = verify_with(registry, &Arc::new(program), &cfg) else {
        return BenchCell::failed();
    };
    let cex = r.counterexample.as_ref();
    BenchCell {
        verdict: r.verdict.to_string(),
        relaxed: cex.is_some_and(|c| c.relaxed),
        time_us: r.stats.wall_time.as_micros() as u64,
        preds: r.stats.predicates,
        refines: r.stats.refinements,
        aborted: matches!(r.verdict, Verdict::Unknown(_)),
        replayed: cex.map(|c| c.replay == Outcome::ErrorReached),
    }
}

/// Runs every (program, threshold) pair of `dir`, spreading cells over
/// worker threads. Each verification itself stays single-threaded.
pub fn bench_sweep(dir: &Path, thresholds: &[Threshold], config: &Config) -> Result<Vec<BenchRow>, BenchError> {
    let registry = CpaRegistry::with_defaults();
    let mut sources = Vec::new();
    for p in suite_programs(dir)? {
        let text = std::fs::read_to_string(&p).map_err(|e| BenchError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        sources.push((name, text));
    }
    let jobs: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|i| (0..thresholds.len()).map(move |j| (i, j)))
        .collect();
    let results: Mutex<Vec<Option<BenchCell>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, j)) = jobs.get(k) else { break };
                let cell = run_cell(&registry, &sources[i].1, config, thresholds[j]);
                results.lock().expect("no worker panics while holding the lock")[k] = Some(cell);
            });
        }
    });
    let mut cells = results.into_inner().expect("workers finished").into_iter();
    Ok(sources
        .into_iter()
        .map(|(program, _)| BenchRow {
            program,
            cells: thresholds
                .iter()
                .map(|&t| (t, cells.next().flatten().unwrap_or_else(BenchCell::failed)))
                .collect(),
        })
        .collect())
}

fn name_width(rows: &[BenchRow]) -> usize {
    rows.iter().map(|r| r.program.len()).max().unwrap_or(0).max("Program".len())
}

fn thresholds_of(rows: &[BenchRow]) -> Vec<Threshold> {
    rows.first().map(|r| r.cells.iter().map(|(t, _)| *t).collect()).unwrap_or_default()
}

/// Runtime per program and threshold, in seconds; `-` marks aborted runs.
pub fn render_runtime_table(rows: &[BenchRow]) -> String {
    let w = name_width(rows);
    let mut out = format!("{:<w$}", "Program");
    for t in thresholds_of(rows) {
        write!(out, " {:>9}", t.to_string()).unwrap();
    }
    out.push('\n');
    for r in rows {
        write!(out, "{:<w$}", r.program).unwrap();
        for (_, c) in &r.cells {
            let text = if c.aborted { "-".to_string() } else { format!("{:.3}", c.time_s()) };
            write!(out, " {text:>9}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// `Preds/Refines` per program and threshold; `-` marks aborted runs.
pub fn render_stats_table(rows: &[BenchRow]) -> String {
    let w = name_width(rows);
    let mut out = format!("{:<w$}", "Program");
    for t in thresholds_of(rows) {
        write!(out, " {:>11}", t.to_string()).unwrap();
    }
    out.push('\n');
    for r in rows {
        write!(out, "{:<w$}", r.program).unwrap();
        for (_, c) in &r.cells {
            let text = if c.aborted { "-".to_string() } else { format!("{}/{}", c.preds, c.refines) };
            write!(out, " {text:>11}").unwrap();
        }
        out.push('\n');
    }
    out
}

const CSV_HEADER: &str = "program,threshold,verdict,relaxed,time_us,preds,refines,aborted,replayed";

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        for (t, c) in &r.cells {
            let replayed = match c.replayed {
                Some(b) => b.to_string(),
                None => String::new(),
            };
            writeln!(
                out,
                "{},{t},{},{},{},{},{},{},{replayed}",
                r.program, c.verdict, c.relaxed, c.time_us, c.preds, c.refines, c.aborted
            )
            .unwrap();
        }
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows: Vec<BenchRow> = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(BenchError::Csv {
                line: 1,
                message: "missing header".into(),
            })
        }
    }
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |message: String| BenchError::Csv { line: i + 1, message };
        let f: Vec<&str> = line.split(',').collect();
        let [program, t, verdict, relaxed, time_us, preds, refines, aborted, replayed] = f.as_slice() else {
            return Err(err(format!("expected 9 fields, found {}", f.len())));
        };
        let bad = |what: &str| err(format!("bad {what}"));
        let cell = BenchCell {
            verdict: verdict.to_string(),
            relaxed: relaxed.parse().map_err(|_| bad("relaxed"))?,
            time_us: time_us.parse().map_err(|_| bad("time"))?,
            preds: preds.parse().map_err(|_| bad("preds"))?,
            refines: refines.parse().map_err(|_| bad("refines"))?,
            aborted: aborted.parse().map_err(|_| bad("aborted"))?,
            replayed: match *replayed {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("replayed"))?),
            },
        };
        let t: Threshold = t.parse().map_err(|_| bad("threshold"))?;
        match rows.last_mut() {
            Some(r) if r.program == *program => r.cells.push((t, cell)),
            _ => rows.push(BenchRow {
                program: program.to_string(),
                cells: vec![(t, cell)],
            }),
        }
    }
    Ok(rows)
}

/// Total wall time of a sweep's cells.
pub fn total_time(rows: &[BenchRow]) -> Duration {
    Duration::from_micros(rows.iter().flat_map(|r| &r.cells).map(|(_, c)| c.time_us).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<BenchRow> {
        let cell = |v: &str, preds, refines, aborted| BenchCell {
            verdict: v.into(),
            relaxed: false,
            time_us: 1234,
            preds,
            refines,
            aborted,
            replayed: (v == "UNSAFE").then_some(true),
        };
        vec![
            BenchRow {
                program: "a".into(),
                cells: DEFAULT_THRESHOLDS.iter().map(|&t| (t, cell("SAFE", 3, 2, false))).collect(),
            },
            BenchRow {
                program: "a_BUG".into(),
                cells: DEFAULT_THRESHOLDS.iter().map(|&t| (t, cell("UNSAFE", 1, 1, false))).collect(),
            },
            BenchRow {
                program: "slow".into(),
                cells: DEFAULT_THRESHOLDS.iter().map(|&t| (t, cell("UNKNOWN", 0, 0, true))).collect(),
            },
        ]
    }

    #[test]
    fn csv_round_trips() {
        let rows = sample();
        assert_eq!(parse_csv(&to_csv(&rows)).unwrap(), rows);
    }

    #[test]
    fn tables_have_one_line_per_program() {
        let rows = sample();
        let t = render_stats_table(&rows);
        assert_eq!(t.lines().count(), 4);
        assert!(t.lines().next().unwrap().ends_with("inf"));
        assert!(t.contains("3/2"));
        assert!(t.lines().last().unwrap().trim_end().ends_with('-'));
        assert_eq!(render_runtime_table(&rows).lines().count(), 4);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let bad = format!("{CSV_HEADER}\na,0,SAFE,false,1,0,0,false,\nb,0,SAFE\n");
        match parse_csv(&bad) {
            Err(BenchError::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_over_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ok.mc"), "void main(){ int x; x = 1; if (x == 2) { ERROR: ; } }").unwrap();
        std::fs::write(dir.path().join("ok_BUG.mc"), "void main(){ int x; x = 2; if (x == 2) { ERROR: ; } }").unwrap();
        std::fs::write(dir.path().join("broken.mc"), "void main( {").unwrap();
        let rows = bench_sweep(dir.path(), &DEFAULT_THRESHOLDS, &Config::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].cells.iter().all(|(_, c)| c.aborted));
        assert!(rows[1].cells.iter().all(|(_, c)| c.verdict == "SAFE"));
        assert!(rows[2].cells.iter().all(|(_, c)| c.verdict == "UNSAFE" && c.replayed == Some(true)));
    }
}

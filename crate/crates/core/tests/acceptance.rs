//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout.
//! Exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use minicpa::analysis::{
    check_feasibility, discover_predicates, run_cpa_plus, verify, PathFeasibility, ReachOptions, ReachOutcome,
    Verdict,
};
use minicpa::bench::{parse_csv, to_csv, DEFAULT_THRESHOLDS};
use minicpa::config::{Config, Threshold};
use minicpa::cpa::{AnyPrecision, Cpa, CpaRegistry};
use minicpa::domains::{Predicate, PredicatePrecision};
use minicpa::frontend::parse;
use minicpa::interp::{explore, replay, Outcome, DEFAULT_LOOP_BOUND};
use minicpa::report::stable_section;
use minicpa::solver::{integer_witness, Feasibility, IntBox, LinearConstraint, LinearTerm, Solver};

use common::*;

/// Preds/Refines per suite program at thresholds 0, 2, 3, 5 and ∞, locked
/// from the first verified-correct sweep.
const GOLDEN: [(&str, [(usize, usize); 5]); 10] = [
    ("cdrom_ioctl", [(18, 23), (10, 14), (9, 12), (0, 0), (0, 0)]),
    ("cdrom_ioctl_BUG", [(8, 5), (0, 0), (0, 0), (0, 0), (0, 0)]),
    ("disk_counter", [(29, 12), (26, 7), (26, 6), (25, 3), (0, 0)]),
    ("floppy_power", [(19, 11), (15, 4), (15, 4), (15, 4), (15, 4)]),
    ("floppy_power_BUG", [(8, 4), (3, 2), (3, 2), (3, 2), (3, 2)]),
    ("floppy_queue", [(14, 17), (12, 11), (11, 8), (0, 0), (0, 0)]),
    ("floppy_queue_BUG", [(6, 6), (4, 1), (0, 0), (0, 0), (0, 0)]),
    ("kbd_filter", [(22, 29), (21, 23), (14, 12), (0, 0), (0, 0)]),
    ("kbd_filter_irp", [(15, 11), (10, 7), (9, 4), (0, 0), (0, 0)]),
    ("kbd_filter_irp_BUG", [(15, 8), (10, 4), (9, 1), (0, 0), (0, 0)]),
];

struct Cell {
    program: String,
    threshold: Threshold,
    verdict: Verdict,
    relaxed: bool,
    witness_replay: Option<Outcome>,
    preds: usize,
    refines: usize,
    growth: Vec<usize>,
}

struct Matrix {
    cells: Vec<Cell>,
    /// Brute-force error reachability per program.
    brute: BTreeMap<String, bool>,
    incomplete: Vec<String>,
    deterministic: Vec<String>,
    elapsed: Duration,
}

fn run_matrix() -> Matrix {
    let start = Instant::now();
    let mut cells = Vec::new();
    let mut brute = BTreeMap::new();
    let mut incomplete = Vec::new();
    let mut deterministic = Vec::new();
    for (name, src) in bounded_programs() {
        let program = Arc::new(parse(&src).unwrap_or_else(|e| panic!("{name}: {e}")));
        let e = explore(program.ast(), 0..=3, DEFAULT_LOOP_BOUND, 200_000);
        if e.incomplete {
            incomplete.push(name.clone());
        }
        brute.insert(name.clone(), e.error_reachable());
        if is_deterministic(&src) {
            deterministic.push(name.clone());
        }
        for t in DEFAULT_THRESHOLDS {
            let r = verify(&program, &Config::default().with_threshold(t)).unwrap();
            let cex = r.counterexample.as_ref();
            cells.push(Cell {
                program: name.clone(),
                threshold: t,
                verdict: r.verdict.clone(),
                relaxed: cex.is_some_and(|c| c.relaxed),
                witness_replay: cex.map(|c| replay(program.ast(), &c.witness)),
                preds: r.stats.predicates,
                refines: r.stats.refinements,
                growth: r.precision_growth.clone(),
            });
        }
    }
    Matrix {
        cells,
        brute,
        incomplete,
        deterministic,
        elapsed: start.elapsed(),
    }
}

type Check = Result<String, String>;

fn soundness(m: &Matrix) -> Check {
    let programs = m.brute.len();
    if programs < 20 {
        return Err(format!("only {programs} programs"));
    }
    if !m.incomplete.is_empty() {
        return Err(format!("brute force incomplete on {:?}", m.incomplete));
    }
    let mut problems = Vec::new();
    let mut relaxed_alarms = 0;
    for c in &m.cells {
        let reachable = m.brute[&c.program];
        match (&c.verdict, reachable) {
            (Verdict::Safe, false) | (Verdict::Unsafe, true) => {}
            (Verdict::Safe, true) => problems.push(format!("false SAFE {}@{}", c.program, c.threshold)),
            (Verdict::Unsafe, false) if c.relaxed => relaxed_alarms += 1,
            (Verdict::Unsafe, false) => problems.push(format!("false UNSAFE {}@{}", c.program, c.threshold)),
            (Verdict::Unknown(why), _) => problems.push(format!("UNKNOWN {}@{}: {why}", c.program, c.threshold)),
        }
    }
    if m.elapsed > Duration::from_secs(60) {
        problems.push(format!("took {:.1} s", m.elapsed.as_secs_f64()));
    }
    if problems.is_empty() {
        Ok(format!(
            "{programs} programs x 5 thresholds agree with brute force, {relaxed_alarms} relaxed alarms, {:.1} s",
            m.elapsed.as_secs_f64()
        ))
    } else {
        Err(problems.join("; "))
    }
}

fn replay_check(m: &Matrix) -> Check {
    let mut unsafe_cells = 0;
    let mut bug_cells = 0;
    let mut problems = Vec::new();
    for c in &m.cells {
        let is_bug_suite = c.program.ends_with("_BUG") && GOLDEN.iter().any(|(n, _)| *n == c.program);
        if is_bug_suite {
            bug_cells += 1;
            if c.verdict != Verdict::Unsafe {
                problems.push(format!("{}@{} is {}", c.program, c.threshold, c.verdict));
            }
        }
        if c.verdict == Verdict::Unsafe {
            unsafe_cells += 1;
            if c.witness_replay != Some(Outcome::ErrorReached) {
                problems.push(format!("{}@{} replays to {:?}", c.program, c.threshold, c.witness_replay));
            }
        }
    }
    if problems.is_empty() {
        Ok(format!("{unsafe_cells} UNSAFE witnesses replay to ERROR, {bug_cells} BUG-suite cells"))
    } else {
        Err(problems.join("; "))
    }
}

fn trend(m: &Matrix) -> Check {
    let mut problems = Vec::new();
    for (name, golden) in GOLDEN {
        let row: Vec<(usize, usize)> = DEFAULT_THRESHOLDS
            .iter()
            .map(|t| {
                let c = m.cells.iter().find(|c| c.program == name && c.threshold == *t).expect("cell ran");
                (c.preds, c.refines)
            })
            .collect();
        for w in row[..4].windows(2) {
            if w[1].0 > w[0].0 || w[1].1 > w[0].1 {
                problems.push(format!("{name} not monotone: {row:?}"));
                break;
            }
        }
        if row != golden {
            problems.push(format!("{name} {row:?} differs from golden {golden:?}"));
        }
    }
    let safe_deterministic: Vec<&String> = m.deterministic.iter().filter(|n| !m.brute[*n]).collect();
    for name in &safe_deterministic {
        let c = m
            .cells
            .iter()
            .find(|c| &&c.program == name && c.threshold == Threshold::Infinite)
            .expect("cell ran");
        if (c.preds, c.refines) != (0, 0) {
            problems.push(format!("{name} at inf has {}/{}", c.preds, c.refines));
        }
    }
    if problems.is_empty() {
        Ok(format!(
            "suite non-increasing over 0,2,3,5 and equal to golden; {} safe deterministic programs at inf with 0/0",
            safe_deterministic.len()
        ))
    } else {
        Err(problems.join("; "))
    }
}

fn lattice() -> Check {
    const CASES: u32 = 10_000;
    let results = [
        ("explicit", check_lattice(&explicit_cpa(), explicit_state(), CASES)),
        ("octagon", check_lattice(&octagon_cpa(), octagon_state(), CASES)),
        (
            "predicate",
            check_lattice(&minicpa::domains::PredicateCpa::standalone(Solver::default()), predicate_state(), CASES),
        ),
        ("composite", check_lattice(&composite_cpa(), composite_state(), CASES)),
    ];
    let failed: Vec<String> = results
        .into_iter()
        .filter_map(|(n, r)| r.err().map(|e| format!("{n}: {e}")))
        .collect();
    if failed.is_empty() {
        Ok(format!("{CASES} random triples per domain, 4 domains, 8 laws each"))
    } else {
        Err(failed.join("; "))
    }
}

fn octagon_closure() -> Check {
    let checked = std::cell::Cell::new(0);
    let empty = std::cell::Cell::new(0);
    let result = runner(1000).run(&random_dbm(3), |d| {
        checked.set(checked.get() + 1);
        let before = box_points(&d);
        let closed = d.clone().close();
        let oracle = oracle_close(&d);
        match (&closed, &oracle) {
            (Some(c), Some(o)) if c.entries() == o.as_slice() => {}
            (None, None) => {}
            _ => {
                let msg = format!("closure {closed:?} vs oracle {oracle:?} on {d:?}");
                return Err(proptest::test_runner::TestCaseError::fail(msg));
            }
        }
        let after = match &closed {
            Some(c) => box_points(c),
            None => {
                empty.set(empty.get() + 1);
                Vec::new()
            }
        };
        proptest::prop_assert_eq!(before, after, "concretization changed for {:?}", d);
        Ok(())
    });
    match result {
        Ok(()) => Ok(format!(
            "{} random matrices (up to 3 variables, 6 signed), {} empty",
            checked.get(),
            empty.get()
        )),
        Err(e) => Err(e.to_string()),
    }
}

fn solver_relaxation() -> Check {
    let solver = Solver::default();
    let (feasible, infeasible) = (std::cell::Cell::new(0), std::cell::Cell::new(0));
    let result = runner(1000).run(&random_conjunction(), |c| {
        let mut bounds = IntBox::new();
        for v in c.vars() {
            bounds.insert(v, ((-10).into(), 10.into()));
        }
        let witness = integer_witness(&c, &bounds).expect("box is small enough");
        if let Some(w) = &witness {
            proptest::prop_assert!(c.satisfied_by(w), "witness {:?} violates {:?}", w, c);
        }
        match solver.is_feasible(&c) {
            Ok(Feasibility::Infeasible) => {
                infeasible.set(infeasible.get() + 1);
                proptest::prop_assert!(witness.is_none(), "infeasible but witness {:?} for {:?}", witness, c);
                proptest::prop_assert!(brute_force_point(&c, 10).is_none(), "infeasible but brute force finds a point");
            }
            Ok(Feasibility::Feasible(model)) => {
                feasible.set(feasible.get() + 1);
                proptest::prop_assert!(c.satisfied_by(&model), "model {:?} violates {:?}", model, c);
            }
            Err(e) => return Err(proptest::test_runner::TestCaseError::fail(format!("solver error {e}"))),
        }
        Ok(())
    });
    match result {
        Ok(()) => Ok(format!(
            "1000 random conjunctions: {} feasible, {} infeasible",
            feasible.get(),
            infeasible.get()
        )),
        Err(e) => Err(e.to_string()),
    }
}

fn refinement_progress(m: &Matrix) -> Check {
    let mut problems = Vec::new();
    for c in &m.cells {
        if c.growth.len() != c.refines {
            problems.push(format!("{}@{}: growth not recorded per refinement", c.program, c.threshold));
        }
        if c.growth.windows(2).any(|w| w[1] <= w[0]) || c.growth.first() == Some(&0) {
            problems.push(format!("{}@{}: precision did not grow {:?}", c.program, c.threshold, c.growth));
        }
    }

    let src = "void main(){ int x; x = 0; x = x + 1; if (x == 0) { ERROR: ; } }";
    let program = Arc::new(parse(src).unwrap());
    let cfg = Config::default().with_threshold(Threshold::Finite(0));
    let r = verify(&program, &cfg).unwrap();
    if (r.verdict.clone(), r.stats.refinements) != (Verdict::Safe, 1) {
        problems.push(format!("canonical path: {} after {} refinements", r.verdict, r.stats.refinements));
    }

    // the SP atom alone at the cut after the increment removes the path
    let cpa = CpaRegistry::with_defaults().build_composite(&program, &cfg).unwrap();
    let pred = cpa.index_of("predicate").unwrap();
    let solver = Solver::default();
    let first = run_cpa_plus(&cpa, &program, cpa.initial_state(program.entry()), cpa.initial_precision(), &ReachOptions::default());
    let ReachOutcome::ErrorReached(node) = first.outcome else {
        return Err("canonical path: no error reached without predicates".into());
    };
    let (edges, _) = first.arg.path_to(node);
    let PathFeasibility::Infeasible(k) = check_feasibility(&program, &edges, &solver) else {
        return Err("canonical path is not infeasible".into());
    };
    let found = discover_predicates(&program, &edges, k, &solver).unwrap();
    let cut = edges[1].target;
    let x_is = |v: i64| Predicate::new(LinearConstraint::eq(LinearTerm::from_parts([("main::x", 1)], -v)));
    let at_cut = found.get(&cut).cloned().unwrap_or_default();
    if !(at_cut.contains(&x_is(1)) && at_cut.contains(&x_is(0))) {
        problems.push(format!("cut after increment yields {at_cut:?}"));
    }
    // Cartesian abstraction cannot derive x == 1 from an unconstrained
    // predecessor, so the atom needs the SP atom of the previous cut
    let rerun = |preds: &[(minicpa::frontend::LocationId, Predicate)]| {
        let mut p = PredicatePrecision::new();
        for (loc, atom) in preds {
            p.insert_at(*loc, atom.clone());
        }
        let prec = cpa.initial_precision().with_component(pred, AnyPrecision::new(p));
        run_cpa_plus(&cpa, &program, cpa.initial_state(program.entry()), prec, &ReachOptions::default()).outcome
    };
    let before_cut = edges[0].target;
    if !matches!(rerun(&[(before_cut, x_is(0)), (cut, x_is(1))]), ReachOutcome::Completed) {
        problems.push("SP atoms x == 0, x == 1 do not remove the canonical path".into());
    }
    if problems.is_empty() {
        Ok(format!(
            "{} runs grow strictly per refinement; canonical path gone after 1 refinement",
            m.cells.len()
        ))
    } else {
        Err(problems.join("; "))
    }
}

fn cli(bin: &Path) -> Check {
    let mut problems = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    for (name, _) in suite_programs() {
        let path = suite_dir().join(format!("{name}.mc"));
        let expected = if name.ends_with("_BUG") { 1 } else { 0 };
        let mut docs = Vec::new();
        for run in 0..2 {
            let report = dir.path().join(format!("{name}.{run}.txt"));
            let out = Command::new(bin)
                .args(["verify", path.to_str().unwrap(), "--threshold", "3", "--report", report.to_str().unwrap()])
                .output()
                .unwrap();
            if out.status.code() != Some(expected) {
                problems.push(format!("{name}: exit {:?}, expected {expected}", out.status.code()));
            }
            docs.push(std::fs::read_to_string(&report).unwrap_or_default());
        }
        if docs[0].is_empty() || stable_section(&docs[0]) != stable_section(&docs[1]) {
            problems.push(format!("{name}: report differs between runs"));
        }
    }

    let bad = dir.path().join("bad.mc");
    std::fs::write(&bad, "void main( {").unwrap();
    let out = Command::new(bin).args(["verify", bad.to_str().unwrap()]).output().unwrap();
    if out.status.code() != Some(2) {
        problems.push(format!("parse error exits {:?}", out.status.code()));
    }

    let out_dir = dir.path().join("bench");
    let start = Instant::now();
    let out = Command::new(bin)
        .args(["bench", suite_dir().to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    if !out.status.success() {
        problems.push(format!("bench exits {:?}", out.status.code()));
    }
    if elapsed > Duration::from_secs(120) {
        problems.push(format!("bench took {:.1} s", elapsed.as_secs_f64()));
    }
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap_or_default();
    match parse_csv(&csv) {
        Ok(rows) => {
            if to_csv(&rows) != csv {
                problems.push("csv does not round-trip".into());
            }
            let full = rows.len() == 10
                && rows
                    .iter()
                    .all(|r| DEFAULT_THRESHOLDS.iter().all(|t| r.cell(*t).is_some_and(|c| !c.aborted)));
            if !full {
                problems.push("bench grid is not 10 x 5 with every cell populated".into());
            }
        }
        Err(e) => problems.push(format!("csv: {e}")),
    }
    for table in ["runtime.txt", "stats.txt"] {
        let text = std::fs::read_to_string(out_dir.join(table)).unwrap_or_default();
        let lines: Vec<&str> = text.lines().collect();
        let shaped = lines.len() == 11 && lines.iter().all(|l| l.split_whitespace().count() == 6);
        if !shaped {
            problems.push(format!("{table} is not an 11 x 6 table"));
        }
    }
    if problems.is_empty() {
        Ok(format!("exit codes and reports stable on 10 programs; bench 10 x 5 in {:.1} s", elapsed.as_secs_f64()))
    } else {
        Err(problems.join("; "))
    }
}

fn main() {
    let bin = Path::new(env!("CARGO_BIN_EXE_minicpa"));
    let matrix = run_matrix();
    let criteria: Vec<(&str, Check)> = vec![
        ("soundness oracle", soundness(&matrix)),
        ("counterexample replay", replay_check(&matrix)),
        ("threshold trend", trend(&matrix)),
        ("lattice laws", lattice()),
        ("octagon closure", octagon_closure()),
        ("solver relaxation", solver_relaxation()),
        ("refinement progress", refinement_progress(&matrix)),
        ("cli contract", cli(bin)),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in criteria.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

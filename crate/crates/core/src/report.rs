//! Text renderings of a verification report.
//!
//! The machine-readable document is a flat `key = value` file split into
//! sections. Everything before `[volatile]` depends only on the program and
//! the configuration, so it is byte-identical across runs.

use std::fmt::Write;

use crate::analysis::{Verdict, VerificationReport};
use crate::config::Config;
use crate::interp::Outcome;

const VOLATILE_HEADER: &str = "[volatile]";

fn seconds(d: std::time::Duration) -> String {
    format!("{:.3}", d.as_secs_f64())
}

fn replay_text(o: Outcome) -> &'static str {
    match o {
        Outcome::ErrorReached => "error-reached",
        Outcome::Finished => "no-error",
        Outcome::LoopBound => "loop-bound",
    }
}

/// Human-oriented summary printed by `verify`.
pub fn render_summary(r: &VerificationReport) -> String {
    let mut out = String::new();
    write!(out, "verdict: {}", r.verdict).unwrap();
    if let Some(c) = &r.counterexample {
        if c.relaxed {
            out.push_str(" (RELAXED)");
        }
    }
    out.push('\n');
    if let Verdict::Unknown(why) = &r.verdict {
        writeln!(out, "reason: {why}").unwrap();
    }
    writeln!(out, "predicates: {}", r.stats.predicates).unwrap();
    writeln!(out, "refinements: {}", r.stats.refinements).unwrap();
    writeln!(out, "reached: {}", r.stats.reached).unwrap();
    writeln!(out, "time_s: {}", seconds(r.stats.wall_time)).unwrap();
    if let Some(c) = &r.counterexample {
        writeln!(out, "counterexample:").unwrap();
        for e in &c.edges {
            writeln!(out, "  {e}").unwrap();
        }
        let nondet: Vec<String> = c.witness.nondet.iter().map(ToString::to_string).collect();
        writeln!(out, "witness nondet: [{}]", nondet.join(", ")).unwrap();
        for (v, val) in &c.witness.initial {
            writeln!(out, "witness initial: {v} = {val}").unwrap();
        }
        writeln!(out, "replay: {}", replay_text(c.replay)).unwrap();
    }
    out
}

/// Self-describing report document.
pub fn render_document(r: &VerificationReport, program: &str, config: &Config) -> String {
    let mut out = String::from("# minicpa verification report\n[config]\n");
    out.push_str(&config.to_string());
    if !out.ends_with('\n') {
        out.push('\n');
    }
    writeln!(out, "[result]").unwrap();
    writeln!(out, "program = {program}").unwrap();
    writeln!(out, "verdict = {}", r.verdict).unwrap();
    if let Verdict::Unknown(why) = &r.verdict {
        writeln!(out, "reason = {why}").unwrap();
    }
    writeln!(out, "predicates = {}", r.stats.predicates).unwrap();
    writeln!(out, "predicates_per_location = {}", r.stats.predicates_per_location).unwrap();
    writeln!(out, "refinements = {}", r.stats.refinements).unwrap();
    writeln!(out, "reached = {}", r.stats.reached).unwrap();
    writeln!(out, "pops = {}", r.stats.pops).unwrap();
    if let Some(c) = &r.counterexample {
        writeln!(out, "[counterexample]").unwrap();
        writeln!(out, "relaxed = {}", c.relaxed).unwrap();
        writeln!(out, "length = {}", c.edges.len()).unwrap();
        for (i, e) in c.edges.iter().enumerate() {
            writeln!(out, "edge.{i} = {e}").unwrap();
        }
        let nondet: Vec<String> = c.witness.nondet.iter().map(ToString::to_string).collect();
        writeln!(out, "witness.nondet = {}", nondet.join(",")).unwrap();
        for (v, val) in &c.witness.initial {
            writeln!(out, "witness.initial.{v} = {val}").unwrap();
        }
        for (sym, val) in &c.model {
            writeln!(out, "model.{sym} = {val}").unwrap();
        }
        writeln!(out, "replay = {}", replay_text(c.replay)).unwrap();
    }
    writeln!(out, "[precision]").unwrap();
    if !r.precision.global().is_empty() {
        let ps: Vec<String> = r.precision.global().iter().map(ToString::to_string).collect();
        writeln!(out, "global = {}", ps.join("; ")).unwrap();
    }
    for (loc, preds) in r.precision.by_location() {
        let ps: Vec<String> = preds.iter().map(ToString::to_string).collect();
        writeln!(out, "{loc} = {}", ps.join("; ")).unwrap();
    }
    writeln!(out, "{VOLATILE_HEADER}").unwrap();
    writeln!(out, "time_s = {}", seconds(r.stats.wall_time)).unwrap();
    if let Some(cpu) = r.stats.cpu_time {
        writeln!(out, "cpu_s = {}", seconds(cpu)).unwrap();
    }
    out
}

/// The part of a document that must not vary between runs.
pub fn stable_section(document: &str) -> &str {
    match document.find(VOLATILE_HEADER) {
        Some(i) => &document[..i],
        None => document,
    }
}

/// Reads `key = value` pairs of one section of a document.
pub fn section_entries<'d>(document: &'d str, section: &str) -> Vec<(&'d str, &'d str)> {
    let header = format!("[{section}]");
    document
        .lines()
        .skip_while(|l| l.trim() != header)
        .skip(1)
        .take_while(|l| !l.starts_with('['))
        .filter_map(|l| l.split_once(" = "))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::analysis::verify;
    use crate::config::Threshold;
    use crate::frontend::parse;

    fn report(src: &str) -> (VerificationReport, Config) {
        let p = Arc::new(parse(src).unwrap());
        let cfg = Config::default().with_threshold(Threshold::Finite(0));
        (verify(&p, &cfg).unwrap(), cfg)
    }

    #[test]
    fn summary_has_required_keys() {
        let (r, _) = report("void main(){}");
        let s = render_summary(&r);
        assert!(s.starts_with("verdict: SAFE\n"));
        for key in ["predicates: 0", "refinements: 0", "reached: ", "time_s: "] {
            assert!(s.contains(key), "{key} missing in {s}");
        }
    }

    #[test]
    fn document_is_stable_across_runs() {
        let src = "void main(){ int x; x = nondet(); while (x > 0) { x = x - 1; } if (x == 0) { ERROR: ; } }";
        let (a, cfg) = report(src);
        let (b, _) = report(src);
        let (da, db) = (render_document(&a, "p.mc", &cfg), render_document(&b, "p.mc", &cfg));
        assert_eq!(stable_section(&da), stable_section(&db));
        assert!(stable_section(&da).contains("[counterexample]"));
        assert!(!stable_section(&da).contains("time_s"));
    }

    #[test]
    fn sections_parse_back() {
        let (r, cfg) = report("void main(){ int x; x = 0; x = x + 1; if (x == 0) { ERROR: ; } }");
        let doc = render_document(&r, "inc.mc", &cfg);
        let result = section_entries(&doc, "result");
        assert!(result.contains(&("verdict", "SAFE")));
        assert!(result.contains(&("refinements", "1")));
        assert!(!section_entries(&doc, "precision").is_empty());
    }
}

//! Octagon matrices directly, then as an analysis component.

use std::sync::Arc;

use minicpa::analysis::verify;
use minicpa::config::Config;
use minicpa::domains::octagon::INF;
use minicpa::domains::Dbm;
use minicpa::frontend::parse;

fn bound(v: i64) -> String {
    if v == INF { "inf".into() } else { v.to_string() }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // x0 - x1 <= 1, x1 <= 3 (as +x1 - (-x1) <= 6)
    let mut d = Dbm::top(2);
    d.constrain(0, 2, 1);
    d.constrain(2, 3, 6);
    let closed = d.close().expect("satisfiable");
    println!("upper bound of x0 after closure: {}", bound(closed.upper(0).unwrap_or(INF)));
    println!("(4, 3) inside: {}, (5, 3) inside: {}", closed.contains(&[4, 3]), closed.contains(&[5, 3]));

    let mut empty = closed.clone();
    empty.constrain(3, 2, -8); // x1 >= 4
    println!("adding x1 >= 4: {}", if empty.close().is_none() { "empty" } else { "non-empty" });

    // x == y is relational; the trip count is bounded because the domain
    // has no widening
    let program = Arc::new(parse(
        "void main() {
           int x; int y; int n;
           n = nondet();
           if (n > 6) { n = 6; }
           x = 0; y = 0;
           while (x < n) { x = x + 1; y = y + 1; }
           if (x != y) { ERROR: ; }
         }",
    )?);
    let mut cfg = Config::parse("cpas = location, callstack, octagon")?;
    cfg.limits.max_pops = 100_000;
    let report = verify(&program, &cfg)?;
    println!("octagon alone: {} ({} states)", report.verdict, report.stats.reached);
    Ok(())
}

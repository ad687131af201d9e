//! Cross-checks verdicts against brute-force execution: the witness of an
//! UNSAFE result is replayed, and a SAFE result is compared with an
//! exhaustive run over small nondet values.

use std::sync::Arc;

use minicpa::analysis::{verify, Verdict};
use minicpa::config::Config;
use minicpa::frontend::parse;
use minicpa::interp::{explore, replay, DEFAULT_LOOP_BOUND};

const PROGRAMS: [(&str, &str); 2] = [
    (
        "drain_BUG",
        "int q;
         void main() {
           int n;
           n = nondet();
           q = n;
           while (q > 0) { q = q - 1; }
           if (n == 3) { ERROR: ; }
         }",
    ),
    (
        "drain",
        "int q;
         void main() {
           int n;
           n = nondet();
           q = n;
           while (q > 0) { q = q - 1; }
           if (q > 0) { ERROR: ; }
         }",
    ),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, src) in PROGRAMS {
        let program = Arc::new(parse(src)?);
        let report = verify(&program, &Config::default())?;
        let brute = explore(program.ast(), 0..=3, DEFAULT_LOOP_BOUND, 100_000);
        println!("{name}: {} | brute force error reachable: {}", report.verdict, brute.error_reachable());
        if report.verdict == Verdict::Unsafe {
            let cex = report.counterexample.expect("unsafe verdicts carry a counterexample");
            println!("  witness nondet {:?}, initial {:?}", cex.witness.nondet, cex.witness.initial);
            println!("  replay: {:?}", replay(program.ast(), &cex.witness));
        }
    }
    Ok(())
}

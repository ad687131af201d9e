//! The explicit-value threshold trades predicates for concrete values.
//! Threshold 0 leaves everything to predicate abstraction; `inf` tracks
//! every value and needs no refinement on this bounded loop.

use std::sync::Arc;

use minicpa::analysis::verify;
use minicpa::config::{Config, Threshold};
use minicpa::frontend::parse;

const SRC: &str = "
void main() {
  int x;
  int y;
  x = 0;
  y = 10;
  while (x < 4) {
    x = x + 1;
    y = y - 2;
  }
  if (y != 2) { ERROR: ; }
}
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = Arc::new(parse(SRC)?);
    println!("{:>9} {:>8} {:>6} {:>8} {:>8}", "threshold", "verdict", "preds", "refines", "reached");
    for t in ["0", "2", "3", "5", "inf"] {
        let threshold: Threshold = t.parse()?;
        let report = verify(&program, &Config::default().with_threshold(threshold))?;
        let s = &report.stats;
        println!(
            "{:>9} {:>8} {:>6} {:>8} {:>8}",
            t,
            report.verdict.to_string(),
            s.predicates,
            s.refinements,
            s.reached
        );
    }
    Ok(())
}

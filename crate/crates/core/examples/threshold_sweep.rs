//! Runs the bundled driver-like suite at every threshold and prints both
//! tables, the same output as `minicpa bench`.
//!
//! `cargo run --release --example threshold_sweep [dir]`

use std::path::PathBuf;

use minicpa::bench::{bench_sweep, render_runtime_table, render_stats_table, total_time, DEFAULT_THRESHOLDS};
use minicpa::config::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("suite"));
    let rows = bench_sweep(&dir, &DEFAULT_THRESHOLDS, &Config::default())?;
    println!("Runtime (s)\n{}", render_runtime_table(&rows));
    println!("Preds/Refines\n{}", render_stats_table(&rows));
    println!("total {:.2} s", total_time(&rows).as_secs_f64());
    Ok(())
}

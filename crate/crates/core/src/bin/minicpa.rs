use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use minicpa::analysis::verify_with;
use minicpa::bench::{bench_sweep, render_runtime_table, render_stats_table, to_csv, DEFAULT_THRESHOLDS};
use minicpa::config::{load_config, Config, Threshold};
use minicpa::cpa::CpaRegistry;
use minicpa::frontend::{export_dot, parse};
use minicpa::report::{render_document, render_summary};

#[derive(Parser)]
#[command(name = "minicpa", version, about = "Reachability verification for MiniC programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether an ERROR label is reachable.
    Verify {
        program: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Explicit-value threshold (a number or `inf`).
        #[arg(long)]
        threshold: Option<Threshold>,
        /// Write the CFA and ARG as Graphviz files.
        #[arg(long)]
        emit_dot: bool,
        /// Write the machine-readable report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every program of a directory at several thresholds.
    Bench {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<Threshold>>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for the tables and the CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>, registry: &CpaRegistry) -> Result<Config, String> {
    match path {
        Some(p) => load_config(p, registry).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(Config::default()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn verify(
    program: &Path,
    config: Option<&Path>,
    threshold: Option<Threshold>,
    emit_dot: bool,
    report: Option<&Path>,
) -> Result<i32, String> {
    let registry = CpaRegistry::with_defaults();
    let mut cfg = load(config, &registry)?;
    if let Some(t) = threshold {
        cfg.threshold = t;
    }
    cfg.emit_dot |= emit_dot;
    let source = std::fs::read_to_string(program).map_err(|e| format!("cannot read {}: {e}", program.display()))?;
    let parsed = Arc::new(parse(&source).map_err(|e| format!("{}:{e}", program.display()))?);
    let r = verify_with(&registry, &parsed, &cfg).map_err(|e| e.to_string())?;
    print!("{}", render_summary(&r));
    let name = program.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if let Some(out) = report {
        write(out, &render_document(&r, &name, &cfg))?;
    }
    if cfg.emit_dot {
        let dir = report.or(Some(program)).and_then(Path::parent).unwrap_or(Path::new("."));
        let stem = program.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write(&dir.join(format!("{stem}.cfa.dot")), &export_dot(&parsed))?;
        write(&dir.join(format!("{stem}.arg.dot")), &r.arg.to_dot())?;
    }
    Ok(r.verdict.exit_code())
}

fn bench(dir: &Path, thresholds: Option<Vec<Threshold>>, config: Option<&Path>, out: Option<&Path>) -> Result<i32, String> {
    let cfg = load(config, &CpaRegistry::with_defaults())?;
    let thresholds = thresholds.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let rows = bench_sweep(dir, &thresholds, &cfg).map_err(|e| e.to_string())?;
    let runtime = render_runtime_table(&rows);
    let stats = render_stats_table(&rows);
    println!("Runtime (s)\n{runtime}\nPreds/Refines\n{stats}");
    if let Some(out) = out {
        std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
        write(&out.join("runtime.txt"), &runtime)?;
        write(&out.join("stats.txt"), &stats)?;
        write(&out.join("results.csv"), &to_csv(&rows))?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify {
            program,
            config,
            threshold,
            emit_dot,
            report,
        } => verify(&program, config.as_deref(), threshold, emit_dot, report.as_deref()),
        Command::Bench {
            dir,
            thresholds,
            config,
            out,
        } => bench(&dir, thresholds, config.as_deref(), out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

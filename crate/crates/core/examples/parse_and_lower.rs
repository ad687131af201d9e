//! Parses a MiniC program, prints its control-flow automata and the
//! Graphviz rendering.
//!
//! `cargo run --example parse_and_lower [file.mc]`

use minicpa::frontend::{export_dot, parse};

const DEFAULT: &str = "
int lock;

void acquire() {
  if (lock == 1) { ERROR: ; }
  lock = 1;
}

void main() {
  int i;
  lock = 0;
  i = 0;
  while (i < 2) {
    acquire();
    lock = 0;
    i = i + 1;
  }
}
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT.to_string(),
    };
    let program = parse(&source)?;
    println!("globals: {:?}", program.globals());
    for (name, cfa) in program.cfas() {
        println!("\n{name}: entry {} exit {} params {:?}", cfa.entry, cfa.exit, cfa.params);
        for e in &cfa.edges {
            let mark = if program.is_error(e.target) { "  <- ERROR" } else { "" };
            println!("  {e}{mark}");
        }
    }
    println!("\n{}", export_dot(&program));
    Ok(())
}

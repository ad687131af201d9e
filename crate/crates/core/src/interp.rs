//! Concrete interpreter over the syntax tree.
//!
//! Storage is static: a function's locals keep their values between calls,
//! and a variable read before any write takes an arbitrary initial value.
//! Unknown values (initial values and `nondet()`) come from a
//! [`ChoiceSource`], which makes the same interpreter serve witness replay
//! and exhaustive enumeration over a small value range.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::analysis::Witness;
use crate::frontend::{qualify, return_var, ArithOp, Expr, Module, Stmt};

/// Default iteration bound per loop execution.
pub const DEFAULT_LOOP_BOUND: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    /// First read of a variable that was never written.
    Initial(String),
    Nondet,
}

pub trait ChoiceSource {
    fn choose(&mut self, choice: &Choice) -> BigInt;
}

/// How a single execution ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ErrorReached,
    Finished,
    /// Some loop ran past the iteration bound.
    LoopBound,
}

enum Flow {
    Normal,
    Return,
    Stop(Outcome),
}

pub struct Interpreter<'m> {
    module: &'m Module,
    locals: BTreeMap<&'m str, BTreeSet<&'m str>>,
    loop_bound: usize,
}

fn collect_decls<'m>(stmts: &'m [Stmt], out: &mut BTreeSet<&'m str>) {
    for s in stmts {
        match s {
            Stmt::Decl(x) => {
                out.insert(x);
            }
            Stmt::If {
                then_block, else_block, ..
            } => {
                collect_decls(then_block, out);
                if let Some(e) = else_block {
                    collect_decls(e, out);
                }
            }
            Stmt::While { body, .. } | Stmt::Block(body) => collect_decls(body, out),
            _ => {}
        }
    }
}

struct Run<'a, 'm> {
    interp: &'a Interpreter<'m>,
    store: BTreeMap<String, BigInt>,
    source: &'a mut dyn ChoiceSource,
}

impl<'m> Interpreter<'m> {
    pub fn new(module: &'m Module) -> Self {
        let locals = module
            .functions
            .iter()
            .map(|f| {
                let mut s: BTreeSet<&str> = f.params.iter().map(String::as_str).collect();
                collect_decls(&f.body, &mut s);
                (f.name.as_str(), s)
            })
            .collect();
        Interpreter {
            module,
            locals,
            loop_bound: DEFAULT_LOOP_BOUND,
        }
    }

    pub fn with_loop_bound(mut self, bound: usize) -> Self {
        self.loop_bound = bound;
        self
    }

    /// Storage name of `name` as seen from inside `function`.
    fn resolve(&self, function: &str, name: &str) -> String {
        if self.locals.get(function).is_some_and(|s| s.contains(name)) {
            qualify(function, name)
        } else {
            name.to_string()
        }
    }

    /// Executes `main` once.
    pub fn run(&self, source: &mut dyn ChoiceSource) -> Outcome {
        let mut run = Run {
            interp: self,
            store: BTreeMap::new(),
            source,
        };
        let main = self.module.function("main").expect("main exists");
        match run.block(&main.name, &main.body) {
            Flow::Stop(o) => o,
            Flow::Normal | Flow::Return => Outcome::Finished,
        }
    }
}

impl Run<'_, '_> {
    fn read(&mut self, var: String) -> BigInt {
        if let Some(v) = self.store.get(&var) {
            return v.clone();
        }
        let v = self.source.choose(&Choice::Initial(var.clone()));
        self.store.insert(var, v.clone());
        v
    }

    fn arith(&mut self, f: &str, e: &Expr) -> BigInt {
        match e {
            Expr::Int(v) => v.clone(),
            Expr::Var(x) => {
                let name = self.interp.resolve(f, x);
                self.read(name)
            }
            Expr::Nondet => self.source.choose(&Choice::Nondet),
            Expr::Arith(op, l, r) => {
                let (l, r) = (self.arith(f, l), self.arith(f, r));
                match op {
                    ArithOp::Add => l + r,
                    ArithOp::Sub => l - r,
                    ArithOp::Mul => l * r,
                }
            }
            other => panic!("condition in arithmetic position: {other}"),
        }
    }

    fn cond(&mut self, f: &str, e: &Expr) -> bool {
        match e {
            Expr::Cmp(op, l, r) => {
                let (l, r) = (self.arith(f, l), self.arith(f, r));
                op.holds(l.cmp(&r))
            }
            Expr::Not(x) => !self.cond(f, x),
            Expr::And(l, r) => self.cond(f, l) && self.cond(f, r),
            Expr::Or(l, r) => self.cond(f, l) || self.cond(f, r),
            // a bare arithmetic condition tests for non-zero
            other => !self.arith(f, other).is_zero(),
        }
    }

    fn call(&mut self, f: &str, callee: &str, args: &[Expr]) -> Flow {
        let func = self.interp.module.function(callee).expect("callee exists");
        let values: Vec<BigInt> = args.iter().map(|a| self.arith(f, a)).collect();
        for (p, v) in func.params.iter().zip(values) {
            self.store.insert(qualify(callee, p), v);
        }
        match self.block(callee, &func.body) {
            Flow::Stop(o) => Flow::Stop(o),
            _ => Flow::Normal,
        }
    }

    fn block(&mut self, f: &str, stmts: &[Stmt]) -> Flow {
        for s in stmts {
            match self.stmt(f, s) {
                Flow::Normal => {}
                other => return other,
            }
        }
        Flow::Normal
    }

    fn stmt(&mut self, f: &str, s: &Stmt) -> Flow {
        match s {
            Stmt::Decl(_) => Flow::Normal,
            Stmt::Assign { lhs, rhs } => {
                let v = self.arith(f, rhs);
                let name = self.interp.resolve(f, lhs);
                self.store.insert(name, v);
                Flow::Normal
            }
            Stmt::Call { callee, args } => self.call(f, callee, args),
            Stmt::CallAssign { lhs, callee, args } => {
                if let Flow::Stop(o) = self.call(f, callee, args) {
                    return Flow::Stop(o);
                }
                let v = self.read(return_var(callee));
                let name = self.interp.resolve(f, lhs);
                self.store.insert(name, v);
                Flow::Normal
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.cond(f, cond) {
                    self.block(f, then_block)
                } else if let Some(e) = else_block {
                    self.block(f, e)
                } else {
                    Flow::Normal
                }
            }
            Stmt::While { cond, body } => {
                let mut iterations = 0;
                while self.cond(f, cond) {
                    if iterations == self.interp.loop_bound {
                        return Flow::Stop(Outcome::LoopBound);
                    }
                    iterations += 1;
                    match self.block(f, body) {
                        Flow::Normal => {}
                        other => return other,
                    }
                }
                Flow::Normal
            }
            Stmt::Return(value) => {
                if let Some(e) = value {
                    let v = self.arith(f, e);
                    self.store.insert(return_var(f), v);
                }
                Flow::Return
            }
            Stmt::Error => Flow::Stop(Outcome::ErrorReached),
            Stmt::Block(b) => self.block(f, b),
        }
    }
}

/// Supplies a fixed witness; missing values default to zero.
pub struct WitnessSource<'w> {
    witness: &'w Witness,
    next_nondet: usize,
}

impl<'w> WitnessSource<'w> {
    pub fn new(witness: &'w Witness) -> Self {
        WitnessSource { witness, next_nondet: 0 }
    }
}

impl ChoiceSource for WitnessSource<'_> {
    fn choose(&mut self, choice: &Choice) -> BigInt {
        match choice {
            Choice::Initial(v) => self.witness.initial.get(v).cloned().unwrap_or_default(),
            Choice::Nondet => {
                let v = self.witness.nondet.get(self.next_nondet).cloned().unwrap_or_default();
                self.next_nondet += 1;
                v
            }
        }
    }
}

/// Runs the program on a witness.
pub fn replay(module: &Module, witness: &Witness) -> Outcome {
    Interpreter::new(module).run(&mut WitnessSource::new(witness))
}

/// Result of enumerating executions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exploration {
    pub executions: usize,
    /// Choice sequence of the first execution that reached an error.
    pub error_trace: Option<Vec<i64>>,
    /// Some execution hit the loop bound.
    pub loop_bound_hit: bool,
    /// Stopped before covering every choice sequence.
    pub incomplete: bool,
}

impl Exploration {
    pub fn error_reachable(&self) -> bool {
        self.error_trace.is_some()
    }
}

/// Replays a choice prefix and extends it with the range minimum.
struct Odometer<'p> {
    prefix: &'p [i64],
    taken: Vec<i64>,
    low: i64,
}

impl ChoiceSource for Odometer<'_> {
    fn choose(&mut self, _: &Choice) -> BigInt {
        let v = self.prefix.get(self.taken.len()).copied().unwrap_or(self.low);
        self.taken.push(v);
        BigInt::from(v)
    }
}

/// Runs every execution whose unknown values lie in `range`, stopping at
/// the first error or after `max_executions` runs.
pub fn explore(module: &Module, range: RangeInclusive<i64>, loop_bound: usize, max_executions: usize) -> Exploration {
    let interp = Interpreter::new(module).with_loop_bound(loop_bound);
    let (low, high) = (*range.start(), *range.end());
    let mut result = Exploration::default();
    let mut prefix: Vec<i64> = Vec::new();
    loop {
        if result.executions == max_executions {
            result.incomplete = true;
            return result;
        }
        let mut odo = Odometer {
            prefix: &prefix,
            taken: Vec::new(),
            low,
        };
        let outcome = interp.run(&mut odo);
        result.executions += 1;
        let mut taken = odo.taken;
        match outcome {
            Outcome::ErrorReached => {
                result.error_trace = Some(taken);
                return result;
            }
            Outcome::LoopBound => result.loop_bound_hit = true,
            Outcome::Finished => {}
        }
        while taken.last() == Some(&high) {
            taken.pop();
        }
        match taken.last_mut() {
            Some(v) => *v += 1,
            None => return result,
        }
        prefix = taken;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_module;

    fn module(src: &str) -> Module {
        parse_module(src).unwrap()
    }

    #[test]
    fn deterministic_error() {
        let m = module("void main(){ int x; x = 0; while (x < 2) { x = x + 1; } if (x == 2) { ERROR: ; } }");
        assert_eq!(replay(&m, &Witness::default()), Outcome::ErrorReached);
        let e = explore(&m, 0..=3, 64, 1000);
        assert!(e.error_reachable());
        assert_eq!(e.executions, 1);
    }

    #[test]
    fn safe_program_is_fully_enumerated() {
        let m = module("void main(){ int x; int y; x = nondet(); y = nondet(); if (x + y > 6) { ERROR: ; } }");
        let e = explore(&m, 0..=3, 64, 1000);
        assert!(!e.error_reachable());
        assert_eq!(e.executions, 16);
        assert!(!e.incomplete);
    }

    #[test]
    fn error_found_at_boundary() {
        let m = module("void main(){ int x; int y; x = nondet(); y = nondet(); if (x + y == 6) { ERROR: ; } }");
        let e = explore(&m, 0..=3, 64, 1000);
        assert_eq!(e.error_trace, Some(vec![3, 3]));
    }

    #[test]
    fn witness_drives_nondet_and_initial_values() {
        let m = module("void main(){ int x; int y; x = nondet(); if (x == 2 && y == 5) { ERROR: ; } }");
        let mut w = Witness::default();
        w.nondet.push(2.into());
        assert_eq!(replay(&m, &w), Outcome::Finished);
        w.initial.insert("main::y".into(), 5.into());
        assert_eq!(replay(&m, &w), Outcome::ErrorReached);
    }

    #[test]
    fn locals_are_static_and_globals_shared() {
        let src = "int g; int count(){ int c; c = c + 1; g = g + 1; return c; } \
                   void main(){ int r; g = 0; r = count(); r = count(); if (r == 2 && g == 2) { ERROR: ; } }";
        let m = module(src);
        let mut w = Witness::default();
        w.initial.insert("count::c".into(), 0.into());
        assert_eq!(replay(&m, &w), Outcome::ErrorReached);
    }

    #[test]
    fn loop_bound_cuts_execution() {
        let m = module("void main(){ int x; x = 0; while (x >= 0) { x = x + 1; } ERROR: ; }");
        assert_eq!(Interpreter::new(&m).with_loop_bound(10).run(&mut WitnessSource::new(&Witness::default())), Outcome::LoopBound);
        assert!(explore(&m, 0..=3, 10, 100).loop_bound_hit);
    }

    #[test]
    fn execution_cap_marks_incomplete() {
        let m = module("void main(){ int a; int b; int c; a = nondet(); b = nondet(); c = nondet(); }");
        let e = explore(&m, 0..=3, 64, 10);
        assert!(e.incomplete);
        assert_eq!(e.executions, 10);
    }
}

//! Control-flow automata and the lowering from syntax trees.
//!
//! Locals are renamed to `function::name` so every program variable has a
//! single global name; an int function's result lives in `function::return`.
//! Recursion is rejected up front, which makes this static naming exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use super::ast::{negate_condition, Expr, Function, Module, Stmt};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocationId(pub u32);

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EdgeOp {
    /// Continue only if `cond` evaluates to `truth`.
    Assume { cond: Expr, truth: bool },
    Assign { lhs: String, rhs: Expr },
    Skip,
    Call {
        callee: String,
        args: Vec<Expr>,
        return_target: LocationId,
    },
    Return { returned: Option<Expr> },
}

impl EdgeOp {
    /// The condition an assume edge requires, with the false branch negated.
    pub fn assumed_condition(&self) -> Option<Expr> {
        match self {
            EdgeOp::Assume { cond, truth: true } => Some(cond.clone()),
            EdgeOp::Assume { cond, truth: false } => Some(negate_condition(cond)),
            _ => None,
        }
    }

    pub fn display_with<'a>(&'a self, names: &'a dyn Fn(&str) -> String) -> EdgeOpDisplay<'a> {
        EdgeOpDisplay { op: self, names }
    }
}

pub struct EdgeOpDisplay<'a> {
    op: &'a EdgeOp,
    names: &'a dyn Fn(&str) -> String,
}

impl fmt::Display for EdgeOpDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names;
        match self.op {
            EdgeOp::Assume { .. } => {
                let c = self.op.assumed_condition().expect("assume");
                write!(f, "[{}]", c.display_with(names))
            }
            EdgeOp::Assign { lhs, rhs } => write!(f, "{} = {}", names(lhs), rhs.display_with(names)),
            EdgeOp::Skip => write!(f, "skip"),
            EdgeOp::Call { callee, args, .. } => {
                write!(f, "call {callee}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", a.display_with(names))?;
                }
                write!(f, ")")
            }
            EdgeOp::Return { returned: None } => write!(f, "return"),
            EdgeOp::Return { returned: Some(e) } => write!(f, "return {}", e.display_with(names)),
        }
    }
}

impl fmt::Display for EdgeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display_with(&|n| n.to_string()).fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CfaEdge {
    pub source: LocationId,
    pub target: LocationId,
    pub op: EdgeOp,
}

impl fmt::Display for CfaEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}: {}", self.source, self.target, self.op)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfa {
    pub function_name: String,
    pub entry: LocationId,
    pub exit: LocationId,
    pub locations: BTreeSet<LocationId>,
    pub edges: Vec<CfaEdge>,
    pub error_locations: BTreeSet<LocationId>,
    /// Qualified parameter names in declaration order.
    pub params: Vec<String>,
    /// Qualified parameters and declared locals.
    pub locals: BTreeSet<String>,
    pub return_var: Option<String>,
}

/// A lowered program: one automaton per function plus lookup tables.
#[derive(Debug)]
pub struct Program {
    cfas: BTreeMap<String, Cfa>,
    main_function: String,
    globals: BTreeSet<String>,
    ast: Module,
    outgoing: BTreeMap<LocationId, Vec<CfaEdge>>,
    owner: BTreeMap<LocationId, String>,
    errors: BTreeSet<LocationId>,
}

pub fn qualify(function: &str, name: &str) -> String {
    format!("{function}::{name}")
}

pub fn return_var(function: &str) -> String {
    qualify(function, "return")
}

impl Program {
    pub fn cfas(&self) -> &BTreeMap<String, Cfa> {
        &self.cfas
    }

    pub fn cfa(&self, name: &str) -> Option<&Cfa> {
        self.cfas.get(name)
    }

    pub fn main_function(&self) -> &str {
        &self.main_function
    }

    pub fn main_cfa(&self) -> &Cfa {
        &self.cfas[&self.main_function]
    }

    pub fn entry(&self) -> LocationId {
        self.main_cfa().entry
    }

    pub fn globals(&self) -> &BTreeSet<String> {
        &self.globals
    }

    pub fn ast(&self) -> &Module {
        &self.ast
    }

    pub fn outgoing(&self, loc: LocationId) -> &[CfaEdge] {
        self.outgoing.get(&loc).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn function_of(&self, loc: LocationId) -> Option<&str> {
        self.owner.get(&loc).map(String::as_str)
    }

    pub fn is_error(&self, loc: LocationId) -> bool {
        self.errors.contains(&loc)
    }

    pub fn error_locations(&self) -> &BTreeSet<LocationId> {
        &self.errors
    }

    pub fn locations(&self) -> impl Iterator<Item = LocationId> + '_ {
        self.owner.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = &CfaEdge> {
        self.cfas.values().flat_map(|c| c.edges.iter())
    }

    /// Every program variable, qualified, in sorted order.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut vars = self.globals.clone();
        for cfa in self.cfas.values() {
            vars.extend(cfa.locals.iter().cloned());
            vars.extend(cfa.return_var.iter().cloned());
        }
        vars
    }

    /// Longest chain of nested calls starting in `main` (1 = no calls).
    pub fn max_call_depth(&self) -> usize {
        fn depth(p: &Program, f: &str, memo: &mut BTreeMap<String, usize>) -> usize {
            if let Some(d) = memo.get(f) {
                return *d;
            }
            let d = 1 + p.cfas[f]
                .edges
                .iter()
                .filter_map(|e| match &e.op {
                    EdgeOp::Call { callee, .. } => Some(depth(p, callee, memo)),
                    _ => None,
                })
                .max()
                .unwrap_or(0);
            memo.insert(f.to_string(), d);
            d
        }
        depth(self, &self.main_function, &mut BTreeMap::new())
    }

    pub fn has_calls(&self) -> bool {
        self.edges().any(|e| matches!(e.op, EdgeOp::Call { .. }))
    }
}

struct CallRecord {
    callee: String,
    return_target: LocationId,
}

struct FnBuilder<'a> {
    func: &'a Function,
    entry: LocationId,
    exit: LocationId,
    locals: BTreeSet<String>,
    locations: BTreeSet<LocationId>,
    edges: Vec<CfaEdge>,
    errors: BTreeSet<LocationId>,
}

struct Lowerer<'a> {
    next: u32,
    module: &'a Module,
    entries: BTreeMap<String, (LocationId, LocationId)>,
    calls: Vec<(String, CallRecord)>,
}

impl Lowerer<'_> {
    fn fresh(&mut self, b: &mut FnBuilder) -> LocationId {
        let id = LocationId(self.next);
        self.next += 1;
        b.locations.insert(id);
        id
    }

    fn resolve(b: &FnBuilder, name: &str) -> String {
        if b.locals.contains(name) {
            qualify(&b.func.name, name)
        } else {
            name.to_string()
        }
    }

    fn expr(b: &FnBuilder, e: &Expr) -> Expr {
        e.rename(&|n| Self::resolve(b, n))
    }

    fn edge(b: &mut FnBuilder, source: LocationId, target: LocationId, op: EdgeOp) {
        b.edges.push(CfaEdge { source, target, op });
    }

    /// Moves every reference to `from` onto `into` and drops `from`.
    fn merge_into(&mut self, b: &mut FnBuilder, from: LocationId, into: LocationId) {
        for e in &mut b.edges {
            if e.source == from {
                e.source = into;
            }
            if e.target == from {
                e.target = into;
            }
            if let EdgeOp::Call { return_target, .. } = &mut e.op {
                if *return_target == from {
                    *return_target = into;
                }
            }
        }
        for (_, c) in &mut self.calls {
            if c.return_target == from {
                c.return_target = into;
            }
        }
        b.locations.remove(&from);
    }

    fn call(&mut self, b: &mut FnBuilder, cur: LocationId, callee: &str, args: &[Expr]) -> LocationId {
        let ret = self.fresh(b);
        let callee_entry = self.entries[callee].0;
        let args = args.iter().map(|a| Self::expr(b, a)).collect();
        Self::edge(
            b,
            cur,
            callee_entry,
            EdgeOp::Call {
                callee: callee.to_string(),
                args,
                return_target: ret,
            },
        );
        self.calls.push((
            b.func.name.clone(),
            CallRecord {
                callee: callee.to_string(),
                return_target: ret,
            },
        ));
        ret
    }

    fn block(&mut self, b: &mut FnBuilder, stmts: &[Stmt], mut cur: LocationId) -> LocationId {
        for s in stmts {
            cur = self.stmt(b, s, cur);
        }
        cur
    }

    fn stmt(&mut self, b: &mut FnBuilder, stmt: &Stmt, cur: LocationId) -> LocationId {
        match stmt {
            Stmt::Decl(_) => cur,
            Stmt::Assign { lhs, rhs } => {
                let next = self.fresh(b);
                let op = EdgeOp::Assign {
                    lhs: Self::resolve(b, lhs),
                    rhs: Self::expr(b, rhs),
                };
                Self::edge(b, cur, next, op);
                next
            }
            Stmt::Call { callee, args } => self.call(b, cur, callee, args),
            Stmt::CallAssign { lhs, callee, args } => {
                let ret = self.call(b, cur, callee, args);
                let next = self.fresh(b);
                let op = EdgeOp::Assign {
                    lhs: Self::resolve(b, lhs),
                    rhs: Expr::Var(return_var(callee)),
                };
                Self::edge(b, ret, next, op);
                next
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
            } => {
                let cond = Self::expr(b, cond);
                let then_start = self.fresh(b);
                Self::edge(b, cur, then_start, EdgeOp::Assume { cond: cond.clone(), truth: true });
                let then_end = self.block(b, then_block, then_start);
                let join = if b.errors.contains(&then_end) {
                    let j = self.fresh(b);
                    Self::edge(b, then_end, j, EdgeOp::Skip);
                    j
                } else {
                    then_end
                };
                match else_block {
                    None => Self::edge(b, cur, join, EdgeOp::Assume { cond, truth: false }),
                    Some(els) => {
                        let else_start = self.fresh(b);
                        Self::edge(b, cur, else_start, EdgeOp::Assume { cond, truth: false });
                        let else_end = self.block(b, els, else_start);
                        Self::edge(b, else_end, join, EdgeOp::Skip);
                    }
                }
                join
            }
            Stmt::While { cond, body } => {
                let cond = Self::expr(b, cond);
                let head = if cur == b.entry || b.errors.contains(&cur) {
                    let h = self.fresh(b);
                    Self::edge(b, cur, h, EdgeOp::Skip);
                    h
                } else {
                    cur
                };
                let after = self.fresh(b);
                let body_start = self.fresh(b);
                Self::edge(b, head, body_start, EdgeOp::Assume { cond: cond.clone(), truth: true });
                let body_end = self.block(b, body, body_start);
                if b.errors.contains(&body_end) {
                    Self::edge(b, body_end, head, EdgeOp::Skip);
                } else {
                    self.merge_into(b, body_end, head);
                }
                Self::edge(b, head, after, EdgeOp::Assume { cond, truth: false });
                after
            }
            Stmt::Return(value) => {
                let op = match (value, &b.func.returns_int) {
                    (Some(e), true) => EdgeOp::Assign {
                        lhs: return_var(&b.func.name),
                        rhs: Self::expr(b, e),
                    },
                    _ => EdgeOp::Skip,
                };
                let exit = b.exit;
                Self::edge(b, cur, exit, op);
                // anything after a return is dead and pruned later
                self.fresh(b)
            }
            Stmt::Error => {
                b.errors.insert(cur);
                cur
            }
            Stmt::Block(stmts) => self.block(b, stmts, cur),
        }
    }
}

fn reachable(cfa: &Cfa) -> BTreeSet<LocationId> {
    let mut seen = BTreeSet::from([cfa.entry]);
    let mut stack = vec![cfa.entry];
    while let Some(l) = stack.pop() {
        for e in cfa.edges.iter().filter(|e| e.source == l) {
            let next = match &e.op {
                EdgeOp::Call { return_target, .. } => *return_target,
                _ => e.target,
            };
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    seen
}

/// Lowers a checked syntax tree into control-flow automata.
pub fn lower(module: Module) -> Program {
    let mut lw = Lowerer {
        next: 0,
        module: &module,
        entries: BTreeMap::new(),
        calls: Vec::new(),
    };
    for f in &lw.module.functions {
        let entry = LocationId(lw.next);
        let exit = LocationId(lw.next + 1);
        lw.next += 2;
        lw.entries.insert(f.name.clone(), (entry, exit));
    }

    let mut cfas = BTreeMap::new();
    let mut order = Vec::new();
    for f in &lw.module.functions {
        let (entry, exit) = lw.entries[&f.name];
        let mut locals: BTreeSet<String> = f.params.iter().cloned().collect();
        collect_decls(&f.body, &mut locals);
        let mut b = FnBuilder {
            func: f,
            entry,
            exit,
            locals,
            locations: BTreeSet::from([entry, exit]),
            edges: Vec::new(),
            errors: BTreeSet::new(),
        };
        let end = lw.block(&mut b, &f.body, entry);
        Lowerer::edge(&mut b, end, exit, EdgeOp::Skip);

        let cfa = Cfa {
            function_name: f.name.clone(),
            entry,
            exit,
            locations: b.locations,
            edges: b.edges,
            error_locations: b.errors,
            params: f.params.iter().map(|p| qualify(&f.name, p)).collect(),
            locals: b.locals.iter().map(|l| qualify(&f.name, l)).collect(),
            return_var: f.returns_int.then(|| return_var(&f.name)),
        };
        order.push(f.name.clone());
        cfas.insert(f.name.clone(), cfa);
    }

    // prune dead code, keeping entry and exit
    let mut live_calls = Vec::new();
    for cfa in cfas.values_mut() {
        let mut live = reachable(cfa);
        live.insert(cfa.exit);
        cfa.locations.retain(|l| live.contains(l));
        cfa.edges.retain(|e| live.contains(&e.source));
        cfa.error_locations.retain(|l| live.contains(l));
    }
    for (caller, rec) in lw.calls.drain(..) {
        if cfas[&caller].locations.contains(&rec.return_target) {
            live_calls.push(rec);
        }
    }
    for rec in live_calls {
        let callee = cfas.get_mut(&rec.callee).expect("callee exists");
        let returned = callee.return_var.clone().map(Expr::Var);
        let exit = callee.exit;
        callee.edges.push(CfaEdge {
            source: exit,
            target: rec.return_target,
            op: EdgeOp::Return { returned },
        });
    }

    // dense, deterministic numbering in source order
    let mut remap = BTreeMap::new();
    for name in &order {
        for l in &cfas[name].locations {
            let id = LocationId(remap.len() as u32);
            remap.insert(*l, id);
        }
    }
    let m = |l: &LocationId| remap[l];
    for cfa in cfas.values_mut() {
        cfa.entry = m(&cfa.entry);
        cfa.exit = m(&cfa.exit);
        cfa.locations = cfa.locations.iter().map(m).collect();
        cfa.error_locations = cfa.error_locations.iter().map(m).collect();
        for e in &mut cfa.edges {
            e.source = m(&e.source);
            e.target = m(&e.target);
            if let EdgeOp::Call { return_target, .. } = &mut e.op {
                *return_target = m(return_target);
            }
        }
        cfa.edges.sort_by_key(|e| (e.source, e.target));
    }

    let mut outgoing: BTreeMap<LocationId, Vec<CfaEdge>> = BTreeMap::new();
    let mut owner = BTreeMap::new();
    let mut errors = BTreeSet::new();
    for cfa in cfas.values() {
        for l in &cfa.locations {
            owner.insert(*l, cfa.function_name.clone());
        }
        for e in &cfa.edges {
            outgoing.entry(e.source).or_default().push(e.clone());
        }
        errors.extend(cfa.error_locations.iter().copied());
    }
    let globals = module.globals.iter().cloned().collect();
    Program {
        cfas,
        main_function: "main".to_string(),
        globals,
        ast: module,
        outgoing,
        owner,
        errors,
    }
}

fn collect_decls(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match s {
            Stmt::Decl(n) => {
                out.insert(n.clone());
            }
            Stmt::If {
                then_block,
                else_block,
                ..
            } => {
                collect_decls(then_block, out);
                if let Some(e) = else_block {
                    collect_decls(e, out);
                }
            }
            Stmt::While { body, .. } => collect_decls(body, out),
            Stmt::Block(b) => collect_decls(b, out),
            _ => {}
        }
    }
}

/// Shared handle used by analyses.
pub type ProgramRef = Arc<Program>;

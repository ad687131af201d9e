//! Syntax tree for MiniC and its pretty printer.
//!
//! The printer emits text the parser reads back into a structurally
//! identical tree, so it doubles as a canonical source form.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Signed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The comparison that holds exactly when `self` does not.
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

/// Expressions in both arithmetic and condition positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(BigInt),
    Var(String),
    Nondet,
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn int(v: impl Into<BigInt>) -> Expr {
        Expr::Int(v.into())
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn arith(op: ArithOp, l: Expr, r: Expr) -> Expr {
        Expr::Arith(op, Box::new(l), Box::new(r))
    }

    pub fn cmp(op: CmpOp, l: Expr, r: Expr) -> Expr {
        Expr::Cmp(op, Box::new(l), Box::new(r))
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Expr, r: Expr) -> Expr {
        Expr::Or(Box::new(l), Box::new(r))
    }

    pub fn negation(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn is_condition(&self) -> bool {
        matches!(
            self,
            Expr::Cmp(..) | Expr::Not(_) | Expr::And(..) | Expr::Or(..)
        )
    }

    pub fn contains_nondet(&self) -> bool {
        match self {
            Expr::Nondet => true,
            Expr::Int(_) | Expr::Var(_) => false,
            Expr::Not(e) => e.contains_nondet(),
            Expr::Arith(_, l, r) | Expr::Cmp(_, l, r) | Expr::And(l, r) | Expr::Or(l, r) => {
                l.contains_nondet() || r.contains_nondet()
            }
        }
    }

    /// Collects every variable name in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            Expr::Int(_) | Expr::Nondet => {}
            Expr::Not(e) => e.collect_vars(out),
            Expr::Arith(_, l, r) | Expr::Cmp(_, l, r) | Expr::And(l, r) | Expr::Or(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Applies `f` to every variable name, producing a new expression.
    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Expr {
        match self {
            Expr::Var(v) => Expr::Var(f(v)),
            Expr::Int(_) | Expr::Nondet => self.clone(),
            Expr::Not(e) => Expr::negation(e.rename(f)),
            Expr::Arith(op, l, r) => Expr::arith(*op, l.rename(f), r.rename(f)),
            Expr::Cmp(op, l, r) => Expr::cmp(*op, l.rename(f), r.rename(f)),
            Expr::And(l, r) => Expr::and(l.rename(f), r.rename(f)),
            Expr::Or(l, r) => Expr::or(l.rename(f), r.rename(f)),
        }
    }

    /// Display adapter that rewrites variable names on the fly.
    pub fn display_with<'a>(&'a self, names: &'a dyn Fn(&str) -> String) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(_) => 3,
            Expr::Cmp(..) => 4,
            Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => 5,
            Expr::Arith(ArithOp::Mul, ..) => 6,
            Expr::Int(v) if v.is_negative() => 7,
            Expr::Int(_) | Expr::Var(_) | Expr::Nondet => 8,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, names: &dyn Fn(&str) -> String) -> fmt::Result {
        // children are parenthesized unless they bind strictly tighter; keeps
        // printing and reparsing structurally stable for left-assoc chains
        let child = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if e.precedence() > min {
                e.write(f, names)
            } else {
                write!(f, "(")?;
                e.write(f, names)?;
                write!(f, ")")
            }
        };
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{}", names(v)),
            Expr::Nondet => write!(f, "nondet()"),
            Expr::Arith(op, l, r) => {
                let p = self.precedence();
                child(f, l, p - 1)?;
                write!(f, " {} ", op.symbol())?;
                child(f, r, p)
            }
            Expr::Cmp(op, l, r) => {
                child(f, l, 4)?;
                write!(f, " {} ", op.symbol())?;
                child(f, r, 4)
            }
            Expr::Not(e) => {
                write!(f, "!")?;
                child(f, e, 7)
            }
            Expr::And(l, r) => {
                child(f, l, 1)?;
                write!(f, " && ")?;
                child(f, r, 2)
            }
            Expr::Or(l, r) => {
                child(f, l, 0)?;
                write!(f, " || ")?;
                child(f, r, 1)
            }
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a dyn Fn(&str) -> String,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(f, self.names)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, &|n| n.to_string())
    }
}

/// Logical negation pushed down to the comparison atoms.
///
/// Comparisons flip their operator, `&&`/`||` swap by De Morgan and double
/// negations cancel, so the result never has a `Not` above `And`/`Or`.
pub fn negate_condition(cond: &Expr) -> Expr {
    match cond {
        Expr::Cmp(op, l, r) => Expr::Cmp(op.negated(), l.clone(), r.clone()),
        Expr::Not(inner) => push_negations(inner),
        Expr::And(l, r) => Expr::or(negate_condition(l), negate_condition(r)),
        Expr::Or(l, r) => Expr::and(negate_condition(l), negate_condition(r)),
        // arithmetic in condition position means `e != 0`
        other => Expr::cmp(CmpOp::Eq, other.clone(), Expr::int(0)),
    }
}

/// Removes every `Not` node by pushing it into the atoms.
pub fn push_negations(cond: &Expr) -> Expr {
    match cond {
        Expr::Not(inner) => negate_condition(inner),
        Expr::And(l, r) => Expr::and(push_negations(l), push_negations(r)),
        Expr::Or(l, r) => Expr::or(push_negations(l), push_negations(r)),
        other => other.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Decl(String),
    Assign { lhs: String, rhs: Expr },
    /// `lhs = callee(args);`
    CallAssign {
        lhs: String,
        callee: String,
        args: Vec<Expr>,
    },
    Call { callee: String, args: Vec<Expr> },
    If {
        cond: Expr,
        then_block: Vec<Stmt>,
        else_block: Option<Vec<Stmt>>,
    },
    While { cond: Expr, body: Vec<Stmt> },
    Return(Option<Expr>),
    Error,
    Block(Vec<Stmt>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub returns_int: bool,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

/// A parsed translation unit.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Module {
    pub globals: Vec<String>,
    pub functions: Vec<Function>,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }
}

fn indent(f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
    for _ in 0..depth {
        write!(f, "    ")?;
    }
    Ok(())
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Expr]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

fn write_block(f: &mut fmt::Formatter<'_>, block: &[Stmt], depth: usize) -> fmt::Result {
    writeln!(f, "{{")?;
    for s in block {
        write_stmt(f, s, depth + 1)?;
    }
    indent(f, depth)?;
    write!(f, "}}")
}

fn write_stmt(f: &mut fmt::Formatter<'_>, stmt: &Stmt, depth: usize) -> fmt::Result {
    indent(f, depth)?;
    match stmt {
        Stmt::Decl(name) => writeln!(f, "int {name};"),
        Stmt::Assign { lhs, rhs } => writeln!(f, "{lhs} = {rhs};"),
        Stmt::CallAssign { lhs, callee, args } => {
            write!(f, "{lhs} = {callee}(")?;
            write_args(f, args)?;
            writeln!(f, ");")
        }
        Stmt::Call { callee, args } => {
            write!(f, "{callee}(")?;
            write_args(f, args)?;
            writeln!(f, ");")
        }
        Stmt::If {
            cond,
            then_block,
            else_block,
        } => {
            write!(f, "if ({cond}) ")?;
            write_block(f, then_block, depth)?;
            if let Some(e) = else_block {
                write!(f, " else ")?;
                write_block(f, e, depth)?;
            }
            writeln!(f)
        }
        Stmt::While { cond, body } => {
            write!(f, "while ({cond}) ")?;
            write_block(f, body, depth)?;
            writeln!(f)
        }
        Stmt::Return(None) => writeln!(f, "return;"),
        Stmt::Return(Some(e)) => writeln!(f, "return {e};"),
        Stmt::Error => writeln!(f, "ERROR: ;"),
        Stmt::Block(b) => {
            write_block(f, b, depth)?;
            writeln!(f)
        }
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.globals {
            writeln!(f, "int {g};")?;
        }
        for func in &self.functions {
            let ret = if func.returns_int { "int" } else { "void" };
            write!(f, "{ret} {}(", func.name)?;
            for (i, p) in func.params.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "int {p}")?;
            }
            write!(f, ") ")?;
            write_block(f, &func.body, 0)?;
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_gt_0() -> Expr {
        Expr::cmp(CmpOp::Gt, Expr::var("x"), Expr::int(0))
    }

    #[test]
    fn negation_flips_operator() {
        assert_eq!(
            negate_condition(&x_gt_0()),
            Expr::cmp(CmpOp::Le, Expr::var("x"), Expr::int(0))
        );
    }

    #[test]
    fn negation_de_morgan() {
        let c = Expr::and(
            Expr::cmp(CmpOp::Eq, Expr::var("a"), Expr::var("b")),
            Expr::cmp(CmpOp::Lt, Expr::var("c"), Expr::var("d")),
        );
        let expected = Expr::or(
            Expr::cmp(CmpOp::Ne, Expr::var("a"), Expr::var("b")),
            Expr::cmp(CmpOp::Ge, Expr::var("c"), Expr::var("d")),
        );
        assert_eq!(negate_condition(&c), expected);
        assert_eq!(negate_condition(&c).to_string(), "a != b || c >= d");
    }

    #[test]
    fn double_negation_cancels() {
        let c = Expr::cmp(CmpOp::Lt, Expr::var("x"), Expr::int(1));
        assert_eq!(negate_condition(&Expr::negation(c.clone())), c);
    }

    #[test]
    fn no_not_above_connectives() {
        let c = Expr::negation(Expr::or(Expr::negation(x_gt_0()), Expr::and(x_gt_0(), x_gt_0())));
        fn no_not(e: &Expr) -> bool {
            match e {
                Expr::Not(_) => false,
                Expr::And(l, r) | Expr::Or(l, r) => no_not(l) && no_not(r),
                _ => true,
            }
        }
        assert!(no_not(&negate_condition(&c)));
        assert!(no_not(&push_negations(&c)));
    }

    #[test]
    fn printing_parenthesizes_right_operands() {
        let e = Expr::arith(
            ArithOp::Sub,
            Expr::var("a"),
            Expr::arith(ArithOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::arith(
            ArithOp::Mul,
            Expr::arith(ArithOp::Add, Expr::var("a"), Expr::int(1)),
            Expr::int(2),
        );
        assert_eq!(e.to_string(), "(a + 1) * 2");
    }
}

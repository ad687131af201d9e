//! Hand-written lexer and recursive-descent parser for MiniC.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_bigint::BigInt;
use num_traits::Signed;

use super::ast::{ArithOp, CmpOp, Expr, Function, Module, Stmt};
use super::FrontendError;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    KwInt,
    KwVoid,
    KwIf,
    KwElse,
    KwWhile,
    KwReturn,
    KwError,
    KwNondet,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Colon,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Bang,
    AndAnd,
    OrOr,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::KwInt => "int",
            Tok::KwVoid => "void",
            Tok::KwIf => "if",
            Tok::KwElse => "else",
            Tok::KwWhile => "while",
            Tok::KwReturn => "return",
            Tok::KwError => "ERROR",
            Tok::KwNondet => "nondet",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Assign => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, FrontendError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: String| FrontendError::Parse { line, col, message };

    while i < chars.len() {
        let c = chars[i];
        let start = Pos { line, col };
        let advance = |n: usize, i: &mut usize, line: &mut usize, col: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(2, &mut i, &mut line, &mut col);
            loop {
                if i >= chars.len() {
                    return Err(err(start.line, start.col, "unterminated comment".into()));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance(2, &mut i, &mut line, &mut col);
                    break;
                }
                advance(1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let value: BigInt = text.parse().expect("digits parse");
            advance(j - i, &mut i, &mut line, &mut col);
            out.push((Tok::Int(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            advance(j - i, &mut i, &mut line, &mut col);
            let tok = match word.as_str() {
                "int" => Tok::KwInt,
                "void" => Tok::KwVoid,
                "if" => Tok::KwIf,
                "else" => Tok::KwElse,
                "while" => Tok::KwWhile,
                "return" => Tok::KwReturn,
                "ERROR" => Tok::KwError,
                "nondet" => Tok::KwNondet,
                _ => Tok::Ident(word),
            };
            out.push((tok, start));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let tok2 = match two.as_str() {
            "==" => Some(Tok::EqEq),
            "!=" => Some(Tok::NotEq),
            "<=" => Some(Tok::Le),
            ">=" => Some(Tok::Ge),
            "&&" => Some(Tok::AndAnd),
            "||" => Some(Tok::OrOr),
            _ => None,
        };
        if let Some(t) = tok2 {
            advance(2, &mut i, &mut line, &mut col);
            out.push((t, start));
            continue;
        }
        let tok1 = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '=' => Tok::Assign,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '!' => Tok::Bang,
            other => {
                return Err(err(line, col, format!("unexpected character `{other}`")));
            }
        };
        advance(1, &mut i, &mut line, &mut col);
        out.push((tok1, start));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct CallSite {
    callee: String,
    arity: usize,
    needs_value: bool,
    caller: String,
    pos: Pos,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    globals: BTreeSet<String>,
    /// Variables visible in the function being parsed.
    locals: HashSet<String>,
    returns_int: bool,
    current_fn: String,
    calls: Vec<CallSite>,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn parse_err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let p = self.pos();
        Err(FrontendError::Parse {
            line: p.line,
            col: p.col,
            message: message.into(),
        })
    }

    fn semantic<T>(&self, pos: Pos, message: impl Into<String>) -> PResult<T> {
        Err(FrontendError::Semantic {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            let found = self.peek().describe();
            self.parse_err(format!("expected `{}`, found {found}", tok.text()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => self.parse_err(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn module(&mut self) -> PResult<Module> {
        let mut module = Module::default();
        // globals: `int name ;`
        while *self.peek() == Tok::KwInt && *self.peek_at(2) == Tok::Semi {
            self.bump();
            let pos = self.pos();
            let name = self.ident()?;
            self.expect(Tok::Semi)?;
            if !self.globals.insert(name.clone()) {
                return self.semantic(pos, format!("duplicate global `{name}`"));
            }
            module.globals.push(name);
        }
        let mut positions = BTreeMap::new();
        while *self.peek() != Tok::Eof {
            let pos = self.pos();
            let f = self.function()?;
            if positions.insert(f.name.clone(), pos).is_some() {
                return self.semantic(pos, format!("duplicate function `{}`", f.name));
            }
            if self.globals.contains(&f.name) {
                return self.semantic(pos, format!("`{}` is both a global and a function", f.name));
            }
            module.functions.push(f);
        }
        let eof = self.pos();
        let Some(main) = module.function("main") else {
            return self.semantic(eof, "missing `main` function");
        };
        if !main.params.is_empty() {
            return self.semantic(positions["main"], "`main` takes no parameters");
        }
        for call in &self.calls {
            let Some(callee) = module.function(&call.callee) else {
                return self.semantic(call.pos, format!("call to undefined function `{}`", call.callee));
            };
            if callee.params.len() != call.arity {
                return self.semantic(
                    call.pos,
                    format!(
                        "`{}` expects {} argument(s), got {}",
                        call.callee,
                        callee.params.len(),
                        call.arity
                    ),
                );
            }
            if call.needs_value && !callee.returns_int {
                return self.semantic(call.pos, format!("`{}` returns no value", call.callee));
            }
        }
        if let Some(cycle_fn) = find_recursion(&self.calls) {
            return self.semantic(positions[&cycle_fn], format!("recursive call cycle through `{cycle_fn}`"));
        }
        Ok(module)
    }

    fn function(&mut self) -> PResult<Function> {
        let returns_int = match self.bump() {
            Tok::KwInt => true,
            Tok::KwVoid => false,
            other => {
                self.at -= 1;
                return self.parse_err(format!("expected `int` or `void`, found {}", other.describe()));
            }
        };
        let name = self.ident()?;
        self.current_fn = name.clone();
        self.returns_int = returns_int;
        self.locals.clear();
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                if *self.peek() == Tok::KwVoid && *self.peek_at(1) == Tok::RParen && params.is_empty() {
                    self.bump();
                    break;
                }
                self.expect(Tok::KwInt)?;
                let pos = self.pos();
                let p = self.ident()?;
                if self.globals.contains(&p) {
                    return self.semantic(pos, format!("parameter `{p}` shadows a global"));
                }
                if !self.locals.insert(p.clone()) {
                    return self.semantic(pos, format!("duplicate parameter `{p}`"));
                }
                params.push(p);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let body = self.block()?;
        Ok(Function {
            name,
            returns_int,
            params,
            body,
        })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.parse_err("unexpected end of input inside block");
            }
            if let Some(s) = self.statement()? {
                stmts.push(s);
            }
        }
        self.bump();
        Ok(stmts)
    }

    fn check_declared(&self, name: &str, pos: Pos) -> PResult<()> {
        if self.locals.contains(name) || self.globals.contains(name) {
            Ok(())
        } else {
            self.semantic(pos, format!("undeclared variable `{name}`"))
        }
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.arith_expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    /// `Ok(None)` for the empty statement `;`.
    fn statement(&mut self) -> PResult<Option<Stmt>> {
        let pos = self.pos();
        let stmt = match self.peek().clone() {
            Tok::Semi => {
                self.bump();
                return Ok(None);
            }
            Tok::KwInt => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Semi)?;
                if self.globals.contains(&name) {
                    return self.semantic(pos, format!("local `{name}` shadows a global"));
                }
                if !self.locals.insert(name.clone()) {
                    return self.semantic(pos, format!("duplicate declaration of `{name}`"));
                }
                Stmt::Decl(name)
            }
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.cond_expr()?;
                self.expect(Tok::RParen)?;
                let then_block = self.block()?;
                let else_block = if *self.peek() == Tok::KwElse {
                    self.bump();
                    if *self.peek() == Tok::KwIf {
                        // `else if` chains become a nested if in an else block
                        let nested = self.statement()?.expect("if statement");
                        Some(vec![nested])
                    } else {
                        Some(self.block()?)
                    }
                } else {
                    None
                };
                Stmt::If {
                    cond,
                    then_block,
                    else_block,
                }
            }
            Tok::KwWhile => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.cond_expr()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                Stmt::While { cond, body }
            }
            Tok::KwReturn => {
                self.bump();
                let value = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.rhs_expr()?)
                };
                self.expect(Tok::Semi)?;
                match (&value, self.returns_int) {
                    (Some(_), false) => return self.semantic(pos, "`return` with a value in a void function"),
                    (None, true) => return self.semantic(pos, "`return` without a value in an int function"),
                    _ => {}
                }
                Stmt::Return(value)
            }
            Tok::KwError => {
                self.bump();
                self.expect(Tok::Colon)?;
                Stmt::Error
            }
            Tok::LBrace => Stmt::Block(self.block()?),
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let args = self.args()?;
                    self.expect(Tok::Semi)?;
                    self.calls.push(CallSite {
                        callee: name.clone(),
                        arity: args.len(),
                        needs_value: false,
                        caller: self.current_fn.clone(),
                        pos,
                    });
                    Stmt::Call { callee: name, args }
                } else {
                    self.check_declared(&name, pos)?;
                    self.expect(Tok::Assign)?;
                    let rhs_pos = self.pos();
                    let stmt = match (self.peek().clone(), self.peek_at(1).clone()) {
                        (Tok::Ident(callee), Tok::LParen) => {
                            self.bump();
                            let args = self.args()?;
                            self.calls.push(CallSite {
                                callee: callee.clone(),
                                arity: args.len(),
                                needs_value: true,
                                caller: self.current_fn.clone(),
                                pos: rhs_pos,
                            });
                            Stmt::CallAssign {
                                lhs: name,
                                callee,
                                args,
                            }
                        }
                        _ => Stmt::Assign {
                            lhs: name,
                            rhs: self.rhs_expr()?,
                        },
                    };
                    self.expect(Tok::Semi)?;
                    stmt
                }
            }
            other => return self.parse_err(format!("expected statement, found {}", other.describe())),
        };
        Ok(Some(stmt))
    }

    fn nondet_call(&mut self) -> PResult<()> {
        self.expect(Tok::KwNondet)?;
        self.expect(Tok::LParen)?;
        self.expect(Tok::RParen)
    }

    /// Expression in condition position; bare arithmetic means `e != 0`.
    fn cond_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.expr()?;
        self.as_condition(e, pos)
    }

    fn as_condition(&self, e: Expr, pos: Pos) -> PResult<Expr> {
        match e {
            Expr::Cmp(op, l, r) => {
                self.as_arith(&l, pos)?;
                self.as_arith(&r, pos)?;
                Ok(Expr::Cmp(op, l, r))
            }
            Expr::Not(inner) => Ok(Expr::negation(self.as_condition(*inner, pos)?)),
            Expr::And(l, r) => Ok(Expr::and(self.as_condition(*l, pos)?, self.as_condition(*r, pos)?)),
            Expr::Or(l, r) => Ok(Expr::or(self.as_condition(*l, pos)?, self.as_condition(*r, pos)?)),
            arith => {
                self.as_arith(&arith, pos)?;
                Ok(Expr::cmp(CmpOp::Ne, arith, Expr::int(0)))
            }
        }
    }

    fn as_arith(&self, e: &Expr, pos: Pos) -> PResult<()> {
        match e {
            Expr::Int(_) | Expr::Var(_) => Ok(()),
            Expr::Nondet => self.semantic(pos, "`nondet()` is only allowed as the whole right-hand side of an assignment"),
            Expr::Arith(op, l, r) => {
                if *op == ArithOp::Mul && !matches!(**l, Expr::Int(_)) && !matches!(**r, Expr::Int(_)) {
                    return self.semantic(pos, "nonlinear term: `*` needs a literal operand");
                }
                self.as_arith(l, pos)?;
                self.as_arith(r, pos)
            }
            _ => self.semantic(pos, "condition used where an integer expression is expected"),
        }
    }

    /// Arithmetic expression, or a bare `nondet()`.
    fn rhs_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.expr()?;
        if e != Expr::Nondet {
            self.as_arith(&e, pos)?;
        }
        Ok(e)
    }

    fn arith_expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let e = self.expr()?;
        self.as_arith(&e, pos)?;
        Ok(e)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.cmp_expr()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        if matches!(
            self.peek(),
            Tok::EqEq | Tok::NotEq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
        ) {
            return self.parse_err("chained comparison; add parentheses");
        }
        Ok(Expr::cmp(op, lhs, rhs))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::arith(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::arith(ArithOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                let inner = self.unary()?;
                Ok(match inner {
                    Expr::Int(v) if !v.is_negative() => Expr::Int(-v),
                    other => Expr::arith(ArithOp::Sub, Expr::int(0), other),
                })
            }
            Tok::Bang => {
                self.bump();
                let inner = self.unary()?;
                Ok(Expr::negation(inner))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    return self.semantic(pos, "function calls are only allowed as statements or `x = f(...);`");
                }
                self.check_declared(&name, pos)?;
                Ok(Expr::Var(name))
            }
            Tok::KwNondet => {
                self.nondet_call()?;
                Ok(Expr::Nondet)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => self.parse_err(format!("expected expression, found {}", other.describe())),
        }
    }
}

fn find_recursion(calls: &[CallSite]) -> Option<String> {
    let mut graph: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for c in calls {
        graph.entry(&c.caller).or_default().insert(&c.callee);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit<'a>(
        node: &'a str,
        graph: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
    ) -> Option<String> {
        match state.get(node) {
            Some(1) => return Some(node.to_string()),
            Some(2) => return None,
            _ => {}
        }
        state.insert(node, 1);
        if let Some(succ) = graph.get(node) {
            for s in succ {
                if let Some(found) = visit(s, graph, state) {
                    return Some(found);
                }
            }
        }
        state.insert(node, 2);
        None
    }
    let mut state = BTreeMap::new();
    let nodes: Vec<&str> = graph.keys().copied().collect();
    nodes.into_iter().find_map(|n| visit(n, &graph, &mut state))
}

/// Parses MiniC source into a syntax tree, running all semantic checks.
pub fn parse_module(source: &str) -> Result<Module, FrontendError> {
    let toks = lex(source)?;
    let mut parser = Parser {
        toks,
        at: 0,
        globals: BTreeSet::new(),
        locals: HashSet::new(),
        returns_int: false,
        current_fn: String::new(),
        calls: Vec::new(),
    };
    parser.module()
}

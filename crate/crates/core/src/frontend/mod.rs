//! MiniC frontend: parsing, semantic checks and lowering into control-flow
//! automata.

pub mod ast;
mod cfa;
mod dot;
mod parser;

use thiserror::Error;

pub use ast::{negate_condition, push_negations, ArithOp, CmpOp, Expr, Function, Module, Stmt};
pub use cfa::{lower, qualify, return_var, Cfa, CfaEdge, EdgeOp, LocationId, Program, ProgramRef};
pub use dot::export_dot;
pub use parser::parse_module;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: parse error: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: semantic error: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
}

/// Parses MiniC source and lowers it into control-flow automata.
pub fn parse(source: &str) -> Result<Program, FrontendError> {
    parse_module(source).map(lower)
}

use thiserror::Error;

use crate::analysis::WellformednessReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}: reference to undeclared nonterminal `{name}`")]
    Undeclared { name: String, line: usize },
    #[error("{line}: duplicate rule `{name}`")]
    DuplicateRule { name: String, line: usize },
    #[error("{line}: %order must list every declared rule exactly once")]
    BadOrder { line: usize },
    #[error("grammar has no rules")]
    NoRules,
    #[error("nonterminal index {id} out of range for {count} rules")]
    RuleOutOfRange { id: usize, count: usize },
    #[error("rank is not a permutation of the rule indices")]
    BadRank,
    #[error("bound {bound} exceeds input length {len}")]
    BoundTooLarge { bound: usize, len: usize },
}

#[derive(Debug, Error)]
pub enum TreeFormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown node kind `{0}`")]
    UnknownKind(String),
    #[error("missing or invalid field `{field}` on `{kind}` node")]
    Field { kind: String, field: &'static str },
    #[error("node bounds violated: s = {s}, e = {e}")]
    Bounds { s: usize, e: usize },
    #[error("invalid skipped expression: {0}")]
    Skipped(#[from] GrammarError),
    #[error("{0}")]
    Shape(&'static str),
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("grammar is not well-formed ({} violation(s))", .0.violations.len())]
    IllFormed(Box<WellformednessReport>),
}

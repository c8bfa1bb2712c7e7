//! Parsing expression grammars with checkable parse certificates.
//!
//! The pipeline is: load a [`Grammar`] (usually from text with
//! [`parse_grammar_text`]), check it with [`grammar_wellformed`], build a
//! [`ParseContext`], and parse with either the reference interpreter
//! ([`parse`]) or the memoizing one ([`packrat_parse`]). Both return the same
//! [`TraceTree`], a full record of the computation that can be validated
//! independently with [`tree_wellformed`], [`true_to_grammar`] and
//! [`true_to_input`]. [`semantic_parse`] folds user actions into the parse
//! and returns a compacted tree.

pub mod analysis;
pub mod arith;
pub mod error;
pub mod grammar;
pub mod packrat;
pub mod parser;
pub mod semantic;
pub mod text;
pub mod tree;

pub use analysis::{
    expr_wellformed, extend_props, fixpoint_props, fixpoint_run, grammar_wellformed, infer_order,
    is_coherent, node_props, prop_leq, sweep, FixpointRun, PropTriple, PropertySet, Violation,
    ViolationKind, WellformednessReport,
};
pub use error::{ContextError, GrammarError, TreeFormatError};
pub use grammar::{desugar, peg_measure, Expr, ExtendedExpr, Grammar, InputText, Rule, RuleId, Token};
pub use packrat::{packrat_parse, packrat_parse_expr, MemoTable, PackratStats};
pub use parser::{instrument, parse, parse_checked, parse_expr, CallStats, ParseContext};
pub use semantic::{equivalent_compacted, semantic_interp, semantic_parse, SemanticAction};
pub use text::{parse_grammar_text, pretty_print};
pub use tree::{
    deserialize_tree, first_divergence, outcome, serialize_tree, tree_wellformed, true_to_grammar, true_to_input,
    Node, Outcome, TraceTree,
};

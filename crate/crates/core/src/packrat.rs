//! Memoizing interpreter.
//!
//! Same recursion as the reference interpreter, except that the result of
//! parsing a nonterminal at a position is stored the first time it is
//! computed and returned directly afterwards. Each table entry is written
//! once, so at most `(n + 1) * (b + 1)` rule bodies are ever parsed. Subtrees
//! are shared, so a memo hit costs a reference-count bump.
//!
//! Stored entries must equal what the reference interpreter returns for the
//! same nonterminal and position; the test suite checks that against
//! [`crate::parser::parse_expr`], which is never called from here.

use std::sync::Arc;

use serde_json::json;

use crate::grammar::{Expr, Grammar, RuleId};
use crate::parser::{CallStats, ParseContext};
use crate::tree::{Outcome, TraceTree};

/// Completed nonterminal results indexed by `[rule][position]`.
#[derive(Debug, Clone)]
pub struct MemoTable {
    width: usize,
    entries: Vec<Option<(Arc<TraceTree>, Outcome)>>,
}

impl MemoTable {
    pub fn new(rules: usize, bound: usize) -> MemoTable {
        MemoTable { width: bound + 1, entries: vec![None; rules * (bound + 1)] }
    }

    pub fn for_context(ctx: &ParseContext<'_>) -> MemoTable {
        MemoTable::new(ctx.grammar().len(), ctx.bound())
    }

    pub fn get(&self, rule: RuleId, pos: usize) -> Option<&Arc<TraceTree>> {
        self.entries[rule * self.width + pos].as_ref().map(|(t, _)| t)
    }

    fn lookup(&self, rule: RuleId, pos: usize) -> Option<&(Arc<TraceTree>, Outcome)> {
        self.entries[rule * self.width + pos].as_ref()
    }

    fn store(&mut self, rule: RuleId, pos: usize, tree: Arc<TraceTree>, out: Outcome) {
        let slot = &mut self.entries[rule * self.width + pos];
        debug_assert!(slot.is_none(), "memo entries are write-once");
        *slot = Some((tree, out));
    }

    /// `(rule, position, tree)` for every known entry.
    pub fn known(&self) -> impl Iterator<Item = (RuleId, usize, &Arc<TraceTree>)> {
        self.entries.iter().enumerate().filter_map(move |(i, e)| {
            e.as_ref().map(|(t, _)| (i / self.width, i % self.width, t))
        })
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Memo behaviour of one packrat run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackratStats {
    /// Rule bodies actually parsed, per `(rule, position)`.
    pub computed: CallStats,
    pub misses: u64,
    pub hits: u64,
}

impl PackratStats {
    fn new(rules: usize, bound: usize) -> PackratStats {
        PackratStats { computed: CallStats::new(rules, bound), misses: 0, hits: 0 }
    }

    pub fn to_json(&self, g: &Grammar) -> serde_json::Value {
        let mut v = self.computed.to_json(g);
        v["misses"] = json!(self.misses);
        v["hits"] = json!(self.hits);
        v
    }
}

struct Packrat<'c, 'g, 'm> {
    ctx: &'c ParseContext<'g>,
    memo: &'m mut MemoTable,
    stats: PackratStats,
}

impl Packrat<'_, '_, '_> {
    fn nonterminal(&mut self, b: RuleId, s: usize) -> (Arc<TraceTree>, Outcome) {
        if let Some((t, o)) = self.memo.lookup(b, s) {
            self.stats.hits += 1;
            return (t.clone(), *o);
        }
        self.stats.misses += 1;
        self.stats.computed.record(b, s);
        let (sub, out) = self.expr(b, self.ctx.grammar().body(b), s, s);
        let tree = Arc::new(TraceTree::new(s, sub.end, crate::tree::Node::NonTerminal { id: b, sub }));
        self.memo.store(b, s, tree.clone(), out);
        (tree, out)
    }

    fn expr(&mut self, rule: RuleId, e: &Expr, s: usize, s_t: usize) -> (Arc<TraceTree>, Outcome) {
        use crate::tree::Node;
        let leaf = |t: TraceTree, o| (Arc::new(t), o);
        let node = |s, e, n| Arc::new(TraceTree::new(s, e, n));
        let input = self.ctx.input();
        match e {
            Expr::Empty => leaf(TraceTree::empty(s, s), Outcome::Success),
            Expr::Any => match input.at(s) {
                Some(x) => leaf(TraceTree::any(s, s + 1, Some(x)), Outcome::Success),
                None => leaf(TraceTree::any(s, s, None), Outcome::Failure),
            },
            Expr::Terminal(a) => match input.at(s) {
                Some(x) if x == *a => leaf(TraceTree::terminal(s, s + 1, *a, Some(x)), Outcome::Success),
                got => leaf(TraceTree::terminal(s, s, *a, got), Outcome::Failure),
            },
            Expr::NonTerminal(b) => self.nonterminal(*b, s),
            Expr::Seq(e1, e2) => {
                let (first, o1) = self.expr(rule, e1, s, s_t);
                if o1 == Outcome::Failure {
                    let m = first.end;
                    let second = Arc::new(TraceTree::skip(m, m, (**e2).clone()));
                    return (node(s, m, Node::Seq { first, second }), o1);
                }
                let (second, o2) = self.expr(rule, e2, first.end, s_t);
                (node(s, second.end, Node::Seq { first, second }), o2)
            }
            Expr::Prior(e1, e2) => {
                let (first, o1) = self.expr(rule, e1, s, s_t);
                if o1 == Outcome::Success {
                    let end = first.end;
                    let second = Arc::new(TraceTree::skip(s, s, (**e2).clone()));
                    return (node(s, end, Node::Prior { first, second }), o1);
                }
                let (second, o2) = self.expr(rule, e2, s, s_t);
                (node(s, second.end, Node::Prior { first, second }), o2)
            }
            Expr::Star(e0) => {
                let (head, o0) = self.expr(rule, e0, s, s_t);
                if o0 == Outcome::Failure {
                    let tail = Arc::new(TraceTree::skip(s, s, e.clone()));
                    return (node(s, s, Node::Star { head, tail }), Outcome::Success);
                }
                let (tail, _) = self.expr(rule, e, head.end, s_t);
                (node(s, tail.end, Node::Star { head, tail }), Outcome::Success)
            }
            Expr::NotP(e0) => {
                let (sub, o) = self.expr(rule, e0, s, s_t);
                (node(s, s, Node::Not { sub }), o.negate())
            }
        }
    }
}

/// Memoized counterpart of [`crate::parser::parse_expr`]. `memo` is
/// extended in place; entries already present are reused.
///
/// # Panics
///
/// Under the same conditions as the reference interpreter.
pub fn packrat_parse_expr(
    ctx: &ParseContext<'_>,
    rule: RuleId,
    e: &Expr,
    s: usize,
    rule_start: usize,
    memo: &mut MemoTable,
) -> (Arc<TraceTree>, PackratStats) {
    ctx.check_call(rule, e, s, rule_start);
    let mut p = Packrat { ctx, memo, stats: PackratStats::new(ctx.grammar().len(), ctx.bound()) };
    let (t, _) = p.expr(rule, e, s, rule_start);
    (t, p.stats)
}

/// Parses the start symbol at position 0 with a fresh memo table.
pub fn packrat_parse(ctx: &ParseContext<'_>) -> (Arc<TraceTree>, PackratStats) {
    let mut memo = MemoTable::for_context(ctx);
    packrat_parse_with(ctx, &mut memo)
}

/// Like [`packrat_parse`], keeping the memo table for inspection.
pub fn packrat_parse_with(ctx: &ParseContext<'_>, memo: &mut MemoTable) -> (Arc<TraceTree>, PackratStats) {
    let start = ctx.grammar().start();
    ctx.check_call(start, ctx.grammar().body(start), 0, 0);
    let mut p = Packrat { ctx, memo, stats: PackratStats::new(ctx.grammar().len(), ctx.bound()) };
    let (t, _) = p.nonterminal(start, 0);
    (t, p.stats)
}

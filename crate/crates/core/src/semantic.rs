//! Semantic actions folded into parsing.
//!
//! A compacted tree keeps the shape of the trace tree but replaces every
//! maximal failing subtree with a [`Node::Fail`] span and every successful
//! nonterminal with a [`Node::Semantic`] node carrying the value the action
//! computed from the (already compacted) body.

use std::marker::PhantomData;
use std::sync::Arc;

use crate::grammar::{Expr, RuleId};
use crate::parser::ParseContext;
use crate::tree::{outcome, Node, Outcome, TraceTree};

/// Computes a value for a successfully parsed nonterminal from its
/// compacted body.
pub trait SemanticAction {
    type Value: Clone;

    fn apply(&self, rule: RuleId, body: &TraceTree<Self::Value>) -> Self::Value;
}

/// Adapts a closure into a [`SemanticAction`].
pub struct FnAction<F, V> {
    f: F,
    _value: PhantomData<fn() -> V>,
}

impl<F, V> FnAction<F, V>
where
    F: Fn(RuleId, &TraceTree<V>) -> V,
{
    pub fn new(f: F) -> Self {
        FnAction { f, _value: PhantomData }
    }
}

impl<F, V: Clone> SemanticAction for FnAction<F, V>
where
    F: Fn(RuleId, &TraceTree<V>) -> V,
{
    type Value = V;

    fn apply(&self, rule: RuleId, body: &TraceTree<V>) -> V {
        (self.f)(rule, body)
    }
}

/// Compacts a parser-produced tree, running `action` bottom-up.
///
/// # Panics
///
/// If `t` already contains semantic nodes.
pub fn semantic_interp<A: SemanticAction>(t: &TraceTree, action: &A) -> TraceTree<A::Value> {
    let (s, e) = (t.start, t.end);
    if outcome(t) == Outcome::Failure {
        return TraceTree::fail(s, e);
    }
    let node = match &t.node {
        Node::Skip(x) => Node::Skip(x.clone()),
        Node::Empty => Node::Empty,
        Node::Any { got } => Node::Any { got: *got },
        Node::Terminal { expected, got } => Node::Terminal { expected: *expected, got: *got },
        Node::NonTerminal { id, sub } => {
            let body = semantic_interp(sub, action);
            return TraceTree::semantic(s, e, *id, action.apply(*id, &body));
        }
        Node::Seq { first, second } => Node::Seq {
            first: Arc::new(semantic_interp(first, action)),
            second: Arc::new(semantic_interp(second, action)),
        },
        Node::Prior { first, second } => Node::Prior {
            first: Arc::new(semantic_interp(first, action)),
            second: Arc::new(semantic_interp(second, action)),
        },
        Node::Star { head, tail } => Node::Star {
            head: Arc::new(semantic_interp(head, action)),
            tail: Arc::new(semantic_interp(tail, action)),
        },
        Node::Not { sub } => Node::Not { sub: Arc::new(semantic_interp(sub, action)) },
        Node::Fail => Node::Fail,
        Node::Semantic { .. } => panic!("input tree is already compacted"),
    };
    TraceTree::new(s, e, node)
}

type Compacted<V> = (Arc<TraceTree<V>>, Outcome);

struct OnTheFly<'c, 'g, 'a, A: SemanticAction> {
    ctx: &'c ParseContext<'g>,
    action: &'a A,
    width: usize,
    memo: Vec<Option<Compacted<A::Value>>>,
}

impl<A: SemanticAction> OnTheFly<'_, '_, '_, A> {
    fn nonterminal(&mut self, b: RuleId, s: usize) -> Compacted<A::Value> {
        let slot = b * self.width + s;
        if let Some(hit) = &self.memo[slot] {
            return hit.clone();
        }
        let (body, out) = self.expr(self.ctx.grammar().body(b), s);
        let end = body.end;
        let tree = match out {
            Outcome::Success => TraceTree::semantic(s, end, b, self.action.apply(b, &body)),
            _ => TraceTree::fail(s, end),
        };
        let result = (Arc::new(tree), out);
        self.memo[slot] = Some(result.clone());
        result
    }

    fn expr(&mut self, e: &Expr, s: usize) -> Compacted<A::Value> {
        let ok = |t: TraceTree<A::Value>| (Arc::new(t), Outcome::Success);
        let failed = |s, e| (Arc::new(TraceTree::fail(s, e)), Outcome::Failure);
        let input = self.ctx.input();
        match e {
            Expr::Empty => ok(TraceTree::empty(s, s)),
            Expr::Any => match input.at(s) {
                Some(x) => ok(TraceTree::any(s, s + 1, Some(x))),
                None => failed(s, s),
            },
            Expr::Terminal(a) => match input.at(s) {
                Some(x) if x == *a => ok(TraceTree::terminal(s, s + 1, *a, Some(x))),
                _ => failed(s, s),
            },
            Expr::NonTerminal(b) => self.nonterminal(*b, s),
            Expr::Seq(e1, e2) => {
                let (first, o1) = self.expr(e1, s);
                if o1 != Outcome::Success {
                    return failed(s, first.end);
                }
                let (second, o2) = self.expr(e2, first.end);
                if o2 != Outcome::Success {
                    return failed(s, second.end);
                }
                let end = second.end;
                ok(TraceTree::new(s, end, Node::Seq { first, second }))
            }
            Expr::Prior(e1, e2) => {
                let (first, o1) = self.expr(e1, s);
                if o1 == Outcome::Success {
                    let end = first.end;
                    let second = Arc::new(TraceTree::skip(s, s, (**e2).clone()));
                    return ok(TraceTree::new(s, end, Node::Prior { first, second }));
                }
                let (second, o2) = self.expr(e2, s);
                if o2 != Outcome::Success {
                    return failed(s, second.end);
                }
                let end = second.end;
                ok(TraceTree::new(s, end, Node::Prior { first, second }))
            }
            Expr::Star(e0) => {
                let (head, o0) = self.expr(e0, s);
                if o0 != Outcome::Success {
                    let tail = Arc::new(TraceTree::skip(s, s, e.clone()));
                    return ok(TraceTree::new(s, s, Node::Star { head, tail }));
                }
                let (tail, _) = self.expr(e, head.end);
                let end = tail.end;
                ok(TraceTree::new(s, end, Node::Star { head, tail }))
            }
            Expr::NotP(e0) => {
                let (sub, o) = self.expr(e0, s);
                if o == Outcome::Success {
                    return failed(s, s);
                }
                ok(TraceTree::new(s, s, Node::Not { sub }))
            }
        }
    }
}

/// Parses the start symbol and applies `action` as nonterminals complete,
/// without building the full trace tree. Equal to
/// `semantic_interp(&parse(ctx), action)`; memoized, so linear in the
/// number of (nonterminal, position) pairs.
pub fn semantic_parse<A: SemanticAction>(ctx: &ParseContext<'_>, action: &A) -> TraceTree<A::Value> {
    let g = ctx.grammar();
    let start = g.start();
    ctx.check_call(start, g.body(start), 0, 0);
    let width = ctx.bound() + 1;
    let mut run = OnTheFly { ctx, action, width, memo: vec![None; g.len() * width] };
    let (t, _) = run.nonterminal(start, 0);
    Arc::try_unwrap(t).unwrap_or_else(|shared| (*shared).clone())
}

/// Whether `compact` is what compacting the reference parse of `ctx` with
/// `action` should give: nodes other than fail and semantic nodes equal the
/// reference ones, every fail node spans a failing reference subtree with
/// the same bounds, and every semantic node carries the action applied to
/// the compacted reference body. Runs the reference parser.
pub fn equivalent_compacted<A>(compact: &TraceTree<A::Value>, ctx: &ParseContext<'_>, action: &A) -> bool
where
    A: SemanticAction,
    A::Value: PartialEq,
{
    matches_reference(compact, &crate::parser::parse(ctx), action)
}

fn matches_reference<A>(compact: &TraceTree<A::Value>, full: &TraceTree, action: &A) -> bool
where
    A: SemanticAction,
    A::Value: PartialEq,
{
    if (compact.start, compact.end) != (full.start, full.end) {
        return false;
    }
    let failed = outcome(full) == Outcome::Failure;
    let both = |a: &TraceTree<A::Value>, b: &TraceTree| matches_reference(a, b, action);
    match (&compact.node, &full.node) {
        (Node::Fail, _) => failed,
        _ if failed => false,
        (Node::Semantic { id, value }, Node::NonTerminal { id: b, sub }) => {
            id == b && *value == action.apply(*id, &semantic_interp(sub, action))
        }
        (Node::Skip(x), Node::Skip(y)) => x == y,
        (Node::Empty, Node::Empty) => true,
        (Node::Any { got: a }, Node::Any { got: b }) => a == b,
        (Node::Terminal { expected: a, got: x }, Node::Terminal { expected: b, got: y }) => a == b && x == y,
        (Node::Seq { first: a1, second: a2 }, Node::Seq { first: b1, second: b2 })
        | (Node::Prior { first: a1, second: a2 }, Node::Prior { first: b1, second: b2 })
        | (Node::Star { head: a1, tail: a2 }, Node::Star { head: b1, tail: b2 }) => both(a1, b1) && both(a2, b2),
        (Node::Not { sub: a }, Node::Not { sub: b }) => both(a, b),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::InputText;
    use crate::parser::parse;
    use crate::text::parse_grammar_text;

    fn spans() -> FnAction<impl Fn(RuleId, &TraceTree<usize>) -> usize, usize> {
        FnAction::new(|_, body: &TraceTree<usize>| body.end - body.start)
    }

    #[test]
    fn failing_parse_is_a_single_fail_node() {
        let g = parse_grammar_text("S <- 'a' 'b'").unwrap();
        let ctx = ParseContext::new(&g, InputText::from("ax")).unwrap();
        let t = semantic_parse(&ctx, &spans());
        assert_eq!(t, TraceTree::fail(0, 1));
    }

    #[test]
    fn on_the_fly_matches_interpretation() {
        let g = parse_grammar_text("S <- (T / 'c')* !'x'\nT <- 'a' 'b' / 'a'").unwrap();
        for input in ["", "ab", "aabc", "abx", "cca"] {
            let ctx = ParseContext::new(&g, InputText::from(input)).unwrap();
            let full = parse(&ctx);
            let interp = semantic_interp(&full, &spans());
            assert_eq!(semantic_parse(&ctx, &spans()), interp, "{input}");
            assert!(equivalent_compacted(&interp, &ctx, &spans()));
        }
    }

    #[test]
    fn successful_root_carries_value() {
        let g = parse_grammar_text("S <- 'a'*").unwrap();
        let ctx = ParseContext::new(&g, InputText::from("aaa")).unwrap();
        let t = semantic_parse(&ctx, &spans());
        assert_eq!(t, TraceTree::semantic(0, 3, 0, 3));
        assert!(equivalent_compacted(&t, &ctx, &spans()));
        assert!(!equivalent_compacted(&TraceTree::semantic(0, 3, 0, 2), &ctx, &spans()));
    }

    #[test]
    fn shifted_fail_node_is_rejected() {
        let g = parse_grammar_text("S <- 'a' 'b'").unwrap();
        let ctx = ParseContext::new(&g, InputText::from("ax")).unwrap();
        assert!(equivalent_compacted(&TraceTree::fail(0, 1), &ctx, &spans()));
        assert!(!equivalent_compacted(&TraceTree::fail(0, 0), &ctx, &spans()));
    }
}

//! The reference interpreter.
//!
//! A direct structural recursion over `(rule, expression, position)` that
//! builds the full trace tree. It terminates on every well-formed grammar:
//! each recursive call strictly decreases `(b - s_T, b - s, rank(A), |e|)`
//! in lexicographic order, where `s_T` is where the current nonterminal
//! started. [`parse_checked`] asserts that measure and the output contract
//! on every call.

use serde_json::json;

use crate::analysis::{expr_wellformed, grammar_wellformed, node_props, PropertySet};
use crate::error::ContextError;
use crate::grammar::{Expr, Grammar, InputText, RuleId};
use crate::tree::{outcome, tree_wellformed, true_to_grammar, true_to_input, Outcome, TraceTree};

/// A well-formed grammar, its fixpoint properties, and the input.
#[derive(Debug, Clone)]
pub struct ParseContext<'g> {
    grammar: &'g Grammar,
    props: PropertySet,
    input: InputText,
}

impl<'g> ParseContext<'g> {
    /// Fails if the grammar is not well-formed; parsing is only defined
    /// (and only terminates) on well-formed grammars.
    pub fn new(grammar: &'g Grammar, input: InputText) -> Result<Self, ContextError> {
        let report = grammar_wellformed(grammar);
        if !report.verdict {
            return Err(ContextError::IllFormed(Box::new(report)));
        }
        Ok(ParseContext { grammar, props: report.properties, input })
    }

    /// Same grammar and properties, different input.
    pub fn with_input(&self, input: InputText) -> ParseContext<'g> {
        ParseContext { grammar: self.grammar, props: self.props.clone(), input }
    }

    pub fn grammar(&self) -> &'g Grammar {
        self.grammar
    }

    pub fn props(&self) -> &PropertySet {
        &self.props
    }

    pub fn input(&self) -> &InputText {
        &self.input
    }

    pub fn bound(&self) -> usize {
        self.input.bound()
    }

    /// Panics unless the arguments satisfy the interpreter's precondition.
    pub(crate) fn check_call(&self, rule: RuleId, e: &Expr, s: usize, rule_start: usize) {
        assert!(rule < self.grammar.len(), "rule {rule} out of range");
        assert!(rule_start <= s && s <= self.bound(), "need s_T <= s <= b");
        assert!(
            expr_wellformed(e, rule, s == rule_start, &self.props, self.grammar),
            "expression is not well-formed for this call"
        );
    }
}

/// One invocation of the interpreter.
#[derive(Debug, Clone, Copy)]
pub struct Call<'a> {
    pub rule: RuleId,
    pub expr: &'a Expr,
    pub start: usize,
    /// Where parsing of `rule` began (`s_T`).
    pub rule_start: usize,
}

/// Observes interpreter calls. All methods default to no-ops.
pub trait Monitor {
    fn enter(&mut self, _call: &Call<'_>) {}
    fn leave(&mut self, _call: &Call<'_>, _tree: &TraceTree) {}
    /// The interpreter is about to parse the body of `rule` at `pos`.
    fn nonterminal(&mut self, _rule: RuleId, _pos: usize) {}
}

impl Monitor for () {}

struct Interp<'c, 'g, M> {
    ctx: &'c ParseContext<'g>,
    monitor: M,
}

impl<M: Monitor> Interp<'_, '_, M> {
    fn run(&mut self, rule: RuleId, e: &Expr, s: usize, s_t: usize) -> (TraceTree, Outcome) {
        let call = Call { rule, expr: e, start: s, rule_start: s_t };
        self.monitor.enter(&call);
        let result = self.step(rule, e, s, s_t);
        self.monitor.leave(&call, &result.0);
        result
    }

    fn nonterminal(&mut self, b: RuleId, s: usize) -> (TraceTree, Outcome) {
        self.monitor.nonterminal(b, s);
        let (sub, out) = self.run(b, self.ctx.grammar.body(b), s, s);
        (TraceTree::nonterminal(s, sub.end, b, sub), out)
    }

    fn step(&mut self, rule: RuleId, e: &Expr, s: usize, s_t: usize) -> (TraceTree, Outcome) {
        let input = &self.ctx.input;
        match e {
            Expr::Empty => (TraceTree::empty(s, s), Outcome::Success),
            Expr::Any => match input.at(s) {
                Some(x) => (TraceTree::any(s, s + 1, Some(x)), Outcome::Success),
                None => (TraceTree::any(s, s, None), Outcome::Failure),
            },
            Expr::Terminal(a) => match input.at(s) {
                Some(x) if x == *a => (TraceTree::terminal(s, s + 1, *a, Some(x)), Outcome::Success),
                got => (TraceTree::terminal(s, s, *a, got), Outcome::Failure),
            },
            Expr::NonTerminal(b) => self.nonterminal(*b, s),
            Expr::Seq(e1, e2) => {
                let (t1, o1) = self.run(rule, e1, s, s_t);
                if o1 == Outcome::Failure {
                    let m = t1.end;
                    return (TraceTree::seq(s, m, t1, TraceTree::skip(m, m, (**e2).clone())), o1);
                }
                let (t2, o2) = self.run(rule, e2, t1.end, s_t);
                (TraceTree::seq(s, t2.end, t1, t2), o2)
            }
            Expr::Prior(e1, e2) => {
                let (t1, o1) = self.run(rule, e1, s, s_t);
                if o1 == Outcome::Success {
                    let end = t1.end;
                    return (TraceTree::prior(s, end, t1, TraceTree::skip(s, s, (**e2).clone())), o1);
                }
                let (t2, o2) = self.run(rule, e2, s, s_t);
                (TraceTree::prior(s, t2.end, t1, t2), o2)
            }
            Expr::Star(e0) => {
                let (t0, o0) = self.run(rule, e0, s, s_t);
                if o0 == Outcome::Failure {
                    return (TraceTree::star(s, s, t0, TraceTree::skip(s, s, e.clone())), Outcome::Success);
                }
                let (rest, _) = self.run(rule, e, t0.end, s_t);
                (TraceTree::star(s, rest.end, t0, rest), Outcome::Success)
            }
            Expr::NotP(e0) => {
                let (t, o) = self.run(rule, e0, s, s_t);
                (TraceTree::not(s, s, t), o.negate())
            }
        }
    }
}

/// Parses `e` (a subterm of `rule`'s body) at `s`, where `rule` started at
/// `rule_start`.
///
/// # Panics
///
/// If `rule_start <= s <= b` does not hold, or `e` is not well-formed for
/// the call (pattern well-formedness is required when `s == rule_start`).
pub fn parse_expr(ctx: &ParseContext<'_>, rule: RuleId, e: &Expr, s: usize, rule_start: usize) -> TraceTree {
    parse_expr_monitored(ctx, rule, e, s, rule_start, &mut ())
}

pub fn parse_expr_monitored<M: Monitor>(
    ctx: &ParseContext<'_>,
    rule: RuleId,
    e: &Expr,
    s: usize,
    rule_start: usize,
    monitor: &mut M,
) -> TraceTree {
    ctx.check_call(rule, e, s, rule_start);
    Interp { ctx, monitor }.run(rule, e, s, rule_start).0
}

impl<M: Monitor> Monitor for &mut M {
    fn enter(&mut self, call: &Call<'_>) {
        (**self).enter(call)
    }
    fn leave(&mut self, call: &Call<'_>, tree: &TraceTree) {
        (**self).leave(call, tree)
    }
    fn nonterminal(&mut self, rule: RuleId, pos: usize) {
        (**self).nonterminal(rule, pos)
    }
}

/// Parses the start symbol's body at position 0 and wraps the result in a
/// nonterminal node.
pub fn parse(ctx: &ParseContext<'_>) -> TraceTree {
    parse_monitored(ctx, &mut ())
}

pub fn parse_monitored<M: Monitor>(ctx: &ParseContext<'_>, monitor: &mut M) -> TraceTree {
    let start = ctx.grammar.start();
    ctx.check_call(start, ctx.grammar.body(start), 0, 0);
    Interp { ctx, monitor }.nonterminal(start, 0).0
}

/// Per-(nonterminal, position) invocation counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallStats {
    counts: Vec<Vec<u64>>,
}

impl CallStats {
    pub fn new(rules: usize, bound: usize) -> CallStats {
        CallStats { counts: vec![vec![0; bound + 1]; rules] }
    }

    pub fn record(&mut self, rule: RuleId, pos: usize) {
        self.counts[rule][pos] += 1;
    }

    pub fn get(&self, rule: RuleId, pos: usize) -> u64 {
        self.counts[rule][pos]
    }

    pub fn rule_total(&self, rule: RuleId) -> u64 {
        self.counts[rule].iter().sum()
    }

    pub fn rule_max(&self, rule: RuleId) -> u64 {
        self.counts[rule].iter().copied().max().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().flatten().copied().max().unwrap_or(0)
    }

    /// `{counts: [{rule, position, calls}], total}`, nonzero entries only,
    /// sorted by rule then position.
    pub fn to_json(&self, g: &Grammar) -> serde_json::Value {
        let counts: Vec<_> = self
            .counts
            .iter()
            .enumerate()
            .flat_map(|(rule, row)| {
                row.iter().enumerate().filter(|(_, c)| **c > 0).map(move |(pos, c)| {
                    json!({"rule": g.name(rule), "position": pos, "calls": c})
                })
            })
            .collect();
        json!({"counts": counts, "total": self.total()})
    }
}

struct Counter(CallStats);

impl Monitor for Counter {
    fn nonterminal(&mut self, rule: RuleId, pos: usize) {
        self.0.record(rule, pos);
    }
}

/// Parses and counts how often each nonterminal is entered at each position.
pub fn instrument(ctx: &ParseContext<'_>) -> (TraceTree, CallStats) {
    let mut counter = Counter(CallStats::new(ctx.grammar.len(), ctx.bound()));
    let tree = parse_monitored(ctx, &mut counter);
    (tree, counter.0)
}

/// A failed runtime contract check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractViolation {
    pub condition: &'static str,
    pub rule: RuleId,
    pub start: usize,
    pub rule_start: usize,
    pub expr: String,
}

/// Checks the termination measure on every call edge and the output
/// contract on every return.
///
/// Output contract for a call on `e` at `s` returning `T`:
/// (a) `T` starts at `s`; (b) a star parses to a star node; (c) `T` is not a
/// skip; (d) `T` is true to `e`; (e) `T` is true to the input; (f)-(h) an
/// empty success, consuming success or failure is only possible if the
/// analysis says `e` can do that; (i) `T` is well-formed; (j) `T` succeeds
/// or fails.
pub struct ContractMonitor<'c, 'g> {
    ctx: &'c ParseContext<'g>,
    stack: Vec<(usize, usize, usize, usize)>,
    depth_limit: usize,
    pub calls: u64,
    pub edges: u64,
    pub violation: Option<ContractViolation>,
}

impl<'c, 'g> ContractMonitor<'c, 'g> {
    pub fn new(ctx: &'c ParseContext<'g>) -> Self {
        let b = ctx.bound();
        let depth_limit = (b + 2) * (b + 2) * ctx.grammar.len() * ctx.grammar.max_measure();
        ContractMonitor { ctx, stack: Vec::new(), depth_limit, calls: 0, edges: 0, violation: None }
    }

    fn fail(&mut self, condition: &'static str, call: &Call<'_>) {
        if self.violation.is_none() {
            self.violation = Some(ContractViolation {
                condition,
                rule: call.rule,
                start: call.start,
                rule_start: call.rule_start,
                expr: crate::text::print_expr(call.expr, self.ctx.grammar),
            });
        }
    }

    fn measure(&self, call: &Call<'_>) -> (usize, usize, usize, usize) {
        let b = self.ctx.bound();
        (
            b - call.rule_start,
            b - call.start,
            self.ctx.grammar.rank()[call.rule],
            call.expr.measure(),
        )
    }
}

impl Monitor for ContractMonitor<'_, '_> {
    fn enter(&mut self, call: &Call<'_>) {
        self.calls += 1;
        if !(call.rule_start <= call.start && call.start <= self.ctx.bound()) {
            self.fail("s_T <= s <= b", call);
        }
        let m = self.measure(call);
        if let Some(parent) = self.stack.last().copied() {
            self.edges += 1;
            if m >= parent {
                self.fail("lexicographic measure decreases", call);
            }
        }
        self.stack.push(m);
        if self.stack.len() > self.depth_limit {
            // a tripwire, not a fuel counter: the measure check above should fire first
            panic!("recursion depth exceeded {}", self.depth_limit);
        }
    }

    fn leave(&mut self, call: &Call<'_>, t: &TraceTree) {
        self.stack.pop();
        let props = node_props(call.expr, &self.ctx.props);
        let out = outcome(t);
        let checks: [(&'static str, bool); 10] = [
            ("(a) starts at s", t.start == call.start),
            ("(b) star yields star node", !matches!(call.expr, Expr::Star(_)) || matches!(t.node, crate::tree::Node::Star { .. })),
            ("(c) not a skip", !t.is_skip()),
            ("(d) true to grammar", true_to_grammar(t, call.expr, self.ctx.grammar)),
            ("(e) true to input", true_to_input(t, &self.ctx.input)),
            ("(f) empty success implies can_empty", !(out == Outcome::Success && t.end == t.start) || props.can_empty),
            ("(g) consuming success implies can_consume", !(out == Outcome::Success && t.end > t.start) || props.can_consume),
            ("(h) failure implies can_fail", out != Outcome::Failure || props.can_fail),
            ("(i) well-formed", tree_wellformed(t)),
            ("(j) meaningful", out.is_meaningful()),
        ];
        for (name, ok) in checks {
            if !ok {
                self.fail(name, call);
            }
        }
    }
}

/// Counters reported by [`parse_checked`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContractStats {
    pub calls: u64,
    pub edges: u64,
}

/// Parses with every runtime contract checked.
pub fn parse_checked(ctx: &ParseContext<'_>) -> Result<(TraceTree, ContractStats), ContractViolation> {
    let mut monitor = ContractMonitor::new(ctx);
    let tree = parse_monitored(ctx, &mut monitor);
    match monitor.violation {
        Some(v) => Err(v),
        None => Ok((tree, ContractStats { calls: monitor.calls, edges: monitor.edges })),
    }
}

pub fn parse_expr_checked(
    ctx: &ParseContext<'_>,
    rule: RuleId,
    e: &Expr,
    s: usize,
    rule_start: usize,
) -> Result<(TraceTree, ContractStats), ContractViolation> {
    let mut monitor = ContractMonitor::new(ctx);
    let tree = parse_expr_monitored(ctx, rule, e, s, rule_start, &mut monitor);
    match monitor.violation {
        Some(v) => Err(v),
        None => Ok((tree, ContractStats { calls: monitor.calls, edges: monitor.edges })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_grammar_text;

    fn ctx_for<'g>(g: &'g Grammar, input: &str) -> ParseContext<'g> {
        ParseContext::new(g, InputText::from(input)).unwrap()
    }

    #[test]
    fn single_terminal() {
        let g = parse_grammar_text("S <- 'a'").unwrap();
        let ctx = ctx_for(&g, "a");
        let t = parse_expr(&ctx, 0, g.body(0), 0, 0);
        assert_eq!(t, TraceTree::terminal(0, 1, 97, Some(97)));
        let (whole, stats) = instrument(&ctx);
        assert_eq!(whole, TraceTree::nonterminal(0, 1, 0, t));
        assert_eq!(stats.get(0, 0), 1);
        assert_eq!(stats.total(), 1);
    }

    #[test]
    fn choice_failure_records_both_attempts() {
        let g = parse_grammar_text("S <- 'a' / 'b'").unwrap();
        let ctx = ctx_for(&g, "c");
        let t = parse_expr(&ctx, 0, g.body(0), 0, 0);
        let expected = TraceTree::prior(
            0,
            0,
            TraceTree::terminal(0, 0, 97, Some(99)),
            TraceTree::terminal(0, 0, 98, Some(99)),
        );
        assert_eq!(t, expected);
        assert_eq!(outcome(&t), Outcome::Failure);
    }

    #[test]
    fn star_stops_at_first_failure() {
        let g = parse_grammar_text("S <- 'a'*").unwrap();
        let ctx = ctx_for(&g, "aab");
        let t = parse_expr(&ctx, 0, g.body(0), 0, 0);
        assert_eq!((t.start, t.end), (0, 2));
        assert_eq!(outcome(&t), Outcome::Success);
        assert!(tree_wellformed(&t));
    }

    #[test]
    fn start_symbol_entry_points() {
        let g = parse_grammar_text("S <- ()").unwrap();
        let t = parse(&ctx_for(&g, "xyz"));
        assert_eq!((t.start, t.end, outcome(&t)), (0, 0, Outcome::Success));

        let g = parse_grammar_text("S <- .").unwrap();
        let t = parse(&ctx_for(&g, ""));
        assert_eq!(outcome(&t), Outcome::Failure);
    }

    #[test]
    fn ill_formed_grammar_is_rejected() {
        let g = parse_grammar_text("A <- B\nB <- A").unwrap();
        assert!(matches!(
            ParseContext::new(&g, InputText::from("")),
            Err(ContextError::IllFormed(_))
        ));
    }

    #[test]
    fn bound_limits_reading() {
        let g = parse_grammar_text("S <- 'a' 'b'").unwrap();
        let ctx = ParseContext::new(&g, InputText::with_bound(b"ab".to_vec(), 1).unwrap()).unwrap();
        let t = parse(&ctx);
        assert_eq!(outcome(&t), Outcome::Failure);
        assert_eq!(t.end, 1);
    }

    #[test]
    fn contracts_hold_on_arithmetic() {
        let g = parse_grammar_text(crate::arith::FORD_GRAMMAR).unwrap();
        let ctx = ctx_for(&g, "1+2*(3-4/5)");
        let (t, stats) = parse_checked(&ctx).unwrap();
        assert_eq!((outcome(&t), t.end), (Outcome::Success, 11));
        assert!(stats.calls > 50);
    }

    #[test]
    #[should_panic(expected = "not well-formed")]
    fn precondition_is_enforced() {
        let g = parse_grammar_text("S <- 'a' S / 'b'").unwrap();
        let ctx = ctx_for(&g, "ab");
        // S is not smaller than itself, so it cannot be reached before consuming
        parse_expr(&ctx, 0, &Expr::NonTerminal(0), 0, 0);
    }
}

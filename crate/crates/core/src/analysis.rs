//! Grammar property analysis and well-formedness checking.
//!
//! Three facts are tracked for every expression: it *can fail*, it *can
//! succeed without consuming*, and it *can succeed consuming at least one
//! token*. A flag set to `false` means "not known", never "refuted". The
//! per-nonterminal facts are found by iterating full sweeps over the rules
//! from the all-unknown set until nothing changes.
//!
//! Well-formedness then rejects the two sources of non-termination: a star
//! over something that can succeed empty, and a rule that may reach a
//! nonterminal that is not strictly smaller before consuming input.

use serde::Serialize;

use crate::grammar::{Expr, Grammar, RuleId};

/// Known facts about one expression or nonterminal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct PropTriple {
    pub can_fail: bool,
    pub can_empty: bool,
    pub can_consume: bool,
}

impl PropTriple {
    pub const UNKNOWN: PropTriple = PropTriple::new(false, false, false);

    pub const fn new(can_fail: bool, can_empty: bool, can_consume: bool) -> PropTriple {
        PropTriple { can_fail, can_empty, can_consume }
    }

    /// Can succeed, consuming or not.
    pub fn can_succeed(self) -> bool {
        self.can_empty || self.can_consume
    }

    /// Every flag known here is known in `other`.
    pub fn leq(self, other: PropTriple) -> bool {
        (!self.can_fail || other.can_fail)
            && (!self.can_empty || other.can_empty)
            && (!self.can_consume || other.can_consume)
    }

    fn count(self) -> usize {
        self.can_fail as usize + self.can_empty as usize + self.can_consume as usize
    }
}

/// Per-nonterminal knowledge, indexed by rule id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PropertySet(Vec<PropTriple>);

impl PropertySet {
    pub fn unknown(len: usize) -> PropertySet {
        PropertySet(vec![PropTriple::UNKNOWN; len])
    }

    pub fn from_vec(v: Vec<PropTriple>) -> PropertySet {
        PropertySet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: RuleId) -> PropTriple {
        self.0[id]
    }

    pub fn set(&mut self, id: RuleId, p: PropTriple) {
        self.0[id] = p;
    }

    pub fn as_slice(&self) -> &[PropTriple] {
        &self.0
    }

    /// Total number of known flags.
    pub fn known(&self) -> usize {
        self.0.iter().map(|p| p.count()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthMismatch;

/// Pointwise order on property sets.
pub fn prop_leq(p: &PropertySet, q: &PropertySet) -> Result<bool, LengthMismatch> {
    if p.len() != q.len() {
        return Err(LengthMismatch);
    }
    Ok(p.0.iter().zip(&q.0).all(|(a, b)| a.leq(*b)))
}

/// Properties of an expression given what is known about the nonterminals.
pub fn node_props(e: &Expr, p: &PropertySet) -> PropTriple {
    match e {
        Expr::Empty => PropTriple::new(false, true, false),
        Expr::Any | Expr::Terminal(_) => PropTriple::new(true, false, true),
        Expr::NonTerminal(id) => p.get(*id),
        Expr::Seq(a, b) => {
            let (a, b) = (node_props(a, p), node_props(b, p));
            PropTriple {
                can_fail: a.can_fail || (a.can_succeed() && b.can_fail),
                can_empty: a.can_empty && b.can_empty,
                can_consume: (a.can_consume && b.can_succeed()) || (a.can_empty && b.can_consume),
            }
        }
        Expr::Prior(a, b) => {
            let (a, b) = (node_props(a, p), node_props(b, p));
            PropTriple {
                can_fail: a.can_fail && b.can_fail,
                can_empty: a.can_empty || (a.can_fail && b.can_empty),
                can_consume: a.can_consume || (a.can_fail && b.can_consume),
            }
        }
        // a star never fails
        Expr::Star(inner) => {
            let i = node_props(inner, p);
            PropTriple { can_fail: false, can_empty: i.can_fail, can_consume: i.can_consume }
        }
        Expr::NotP(inner) => {
            let i = node_props(inner, p);
            PropTriple { can_fail: i.can_succeed(), can_empty: i.can_fail, can_consume: false }
        }
    }
}

/// Recomputes the entry for `id` from its rule body.
pub fn extend_props(id: RuleId, p: &PropertySet, g: &Grammar) -> PropertySet {
    let mut q = p.clone();
    q.set(id, node_props(g.body(id), p));
    q
}

/// No single recomputation contradicts what `p` claims.
pub fn is_coherent(p: &PropertySet, g: &Grammar) -> bool {
    (0..g.len()).all(|id| p.get(id).leq(node_props(g.body(id), p)))
}

/// One pass over the rules in index order starting at `from`, threading the
/// updated set through.
pub fn sweep_from(from: RuleId, p: &PropertySet, g: &Grammar) -> PropertySet {
    debug_assert!(is_coherent(p, g), "sweep requires a coherent property set");
    let mut q = p.clone();
    for id in from..g.len() {
        let next = node_props(g.body(id), &q);
        q.set(id, next);
    }
    q
}

/// A full pass over all rules.
pub fn sweep(p: &PropertySet, g: &Grammar) -> PropertySet {
    sweep_from(0, p, g)
}

/// Result of the fixpoint iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixpointRun {
    pub properties: PropertySet,
    /// Sweeps that learned at least one new flag.
    pub productive_sweeps: usize,
    /// Sweeps performed, including the final one that changed nothing.
    pub total_sweeps: usize,
}

/// Iterates [`sweep`] from the all-unknown set until it stops changing.
///
/// Every productive sweep adds a flag, so there are at most `3 * (n + 1)` of
/// them.
pub fn fixpoint_run(g: &Grammar) -> FixpointRun {
    let mut p = PropertySet::unknown(g.len());
    let mut productive = 0;
    let mut total = 0;
    loop {
        let q = sweep(&p, g);
        total += 1;
        if q == p {
            break;
        }
        debug_assert!(q.known() > p.known());
        productive += 1;
        p = q;
    }
    debug_assert!(productive <= 3 * g.len());
    FixpointRun { properties: p, productive_sweeps: productive, total_sweeps: total }
}

pub fn fixpoint_props(g: &Grammar) -> PropertySet {
    fixpoint_run(g).properties
}

/// Which child a diagnostic path step descends into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Left,
    Right,
    Inner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    StarOfNullable,
    OrderViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: RuleId,
    pub path: Vec<Step>,
    pub reason: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellformednessReport {
    pub verdict: bool,
    pub properties: PropertySet,
    pub violations: Vec<Violation>,
}

impl WellformednessReport {
    /// `{verdict, properties: [{name, can_fail, can_empty, can_consume}], violations: [{rule, path, reason}]}`
    pub fn to_json(&self, g: &Grammar) -> serde_json::Value {
        let properties: Vec<_> = (0..g.len())
            .map(|id| {
                let p = self.properties.get(id);
                serde_json::json!({
                    "name": g.name(id),
                    "can_fail": p.can_fail,
                    "can_empty": p.can_empty,
                    "can_consume": p.can_consume,
                })
            })
            .collect();
        let violations: Vec<_> = self
            .violations
            .iter()
            .map(|v| {
                serde_json::json!({
                    "rule": g.name(v.rule),
                    "path": v.path,
                    "reason": v.reason,
                })
            })
            .collect();
        serde_json::json!({
            "verdict": self.verdict,
            "properties": properties,
            "violations": violations,
        })
    }
}

/// Structural and pattern well-formedness of `e`, a subterm of rule `rule`.
///
/// With `strict` set, every nonterminal reached before input is guaranteed
/// to be consumed must be strictly smaller than `rule`.
pub fn expr_wellformed(
    e: &Expr,
    rule: RuleId,
    strict: bool,
    props: &PropertySet,
    g: &Grammar,
) -> bool {
    let mut violations = Vec::new();
    check_expr(e, rule, strict, props, g, &mut Vec::new(), &mut violations);
    violations.is_empty()
}

fn check_expr(
    e: &Expr,
    rule: RuleId,
    strict: bool,
    props: &PropertySet,
    g: &Grammar,
    path: &mut Vec<Step>,
    out: &mut Vec<Violation>,
) {
    let mut child = |step, e: &Expr, strict, out: &mut Vec<Violation>| {
        path.push(step);
        check_expr(e, rule, strict, props, g, path, out);
        path.pop();
    };
    match e {
        Expr::Empty | Expr::Any | Expr::Terminal(_) => {}
        Expr::NonTerminal(b) => {
            if strict && !g.smaller(*b, rule) {
                out.push(Violation {
                    rule,
                    path: path.clone(),
                    reason: ViolationKind::OrderViolation,
                });
            }
        }
        Expr::Seq(a, b) => {
            child(Step::Left, a, strict, out);
            let right_strict = strict && node_props(a, props).can_empty;
            child(Step::Right, b, right_strict, out);
        }
        Expr::Prior(a, b) => {
            child(Step::Left, a, strict, out);
            child(Step::Right, b, strict, out);
        }
        Expr::Star(inner) => {
            child(Step::Inner, inner, strict, out);
            if node_props(inner, props).can_empty {
                out.push(Violation {
                    rule,
                    path: path.clone(),
                    reason: ViolationKind::StarOfNullable,
                });
            }
        }
        Expr::NotP(inner) => child(Step::Inner, inner, strict, out),
    }
}

/// Checks every rule body against its own nonterminal with `strict` set.
pub fn grammar_wellformed(g: &Grammar) -> WellformednessReport {
    let properties = fixpoint_props(g);
    let mut violations = Vec::new();
    for id in 0..g.len() {
        check_expr(g.body(id), id, true, &properties, g, &mut Vec::new(), &mut violations);
    }
    WellformednessReport { verdict: violations.is_empty(), properties, violations }
}

/// Best-effort search for a nonterminal order under which the grammar has
/// no order violations.
///
/// Collects the edges `A -> B` where `B` is reached from `A`'s body before
/// guaranteed consumption and returns a topological rank, or `None` when
/// those edges form a cycle. Rules with no pending dependencies are ranked
/// from the last-declared upward, so the default order is preferred when it
/// works.
pub fn infer_order(g: &Grammar) -> Option<Vec<usize>> {
    let props = fixpoint_props(g);
    let n = g.len();
    let mut needs: Vec<Vec<RuleId>> = vec![Vec::new(); n];
    for (id, deps) in needs.iter_mut().enumerate() {
        collect_strict(g.body(id), true, &props, deps);
    }
    let mut rank = vec![usize::MAX; n];
    let mut next = 0;
    while next < n {
        let ready = (0..n).rev().find(|&a| {
            rank[a] == usize::MAX && needs[a].iter().all(|&b| b != a && rank[b] != usize::MAX)
        })?;
        rank[ready] = next;
        next += 1;
    }
    Some(rank)
}

fn collect_strict(e: &Expr, strict: bool, props: &PropertySet, out: &mut Vec<RuleId>) {
    match e {
        Expr::Empty | Expr::Any | Expr::Terminal(_) => {}
        Expr::NonTerminal(b) => {
            if strict {
                out.push(*b);
            }
        }
        Expr::Seq(a, b) => {
            collect_strict(a, strict, props, out);
            collect_strict(b, strict && node_props(a, props).can_empty, props, out);
        }
        Expr::Prior(a, b) => {
            collect_strict(a, strict, props, out);
            collect_strict(b, strict, props, out);
        }
        Expr::Star(inner) | Expr::NotP(inner) => collect_strict(inner, strict, props, out),
    }
}

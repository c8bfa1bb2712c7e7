//! Trace trees: the full computational path of a parse.
//!
//! A trace tree records every node the parser visited, including failed
//! attempts and the branches it never tried (as skip nodes). That makes it a
//! checkable certificate: a well-formed tree that is true to a grammar and
//! to an input is the only such tree, so it proves success or failure.
//!
//! Compacted trees produced by the semantic layer add two node kinds:
//! [`Node::Semantic`] replaces a successful nonterminal subtree by a user
//! value and [`Node::Fail`] replaces a failing subtree.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::TreeFormatError;
use crate::grammar::{Expr, Grammar, InputText, RuleId, Token};
use crate::text::{parse_expr_text, print_expr};

/// Success, failure, or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Failure,
    Undefined,
}

impl Outcome {
    pub fn is_meaningful(self) -> bool {
        self != Outcome::Undefined
    }

    pub fn negate(self) -> Outcome {
        match self {
            Outcome::Success => Outcome::Failure,
            Outcome::Failure => Outcome::Success,
            Outcome::Undefined => Outcome::Undefined,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::Undefined => "undefined",
        }
    }
}

pub type SubTree<V> = Arc<TraceTree<V>>;

/// A trace node spanning `[start, end)`.
///
/// `V` is the semantic payload type; trees produced by the plain parsers
/// never contain [`Node::Semantic`] and use the default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceTree<V = Value> {
    pub start: usize,
    pub end: usize,
    pub node: Node<V>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node<V = Value> {
    /// A grammar fragment the parser never visited.
    Skip(Expr),
    Empty,
    /// `got` is `None` at end of input.
    Any { got: Option<Token> },
    Terminal { expected: Token, got: Option<Token> },
    NonTerminal { id: RuleId, sub: SubTree<V> },
    Seq { first: SubTree<V>, second: SubTree<V> },
    Prior { first: SubTree<V>, second: SubTree<V> },
    Star { head: SubTree<V>, tail: SubTree<V> },
    Not { sub: SubTree<V> },
    Semantic { id: RuleId, value: V },
    Fail,
}

impl<V> TraceTree<V> {
    pub fn new(start: usize, end: usize, node: Node<V>) -> Self {
        TraceTree { start, end, node }
    }

    pub fn skip(s: usize, e: usize, expr: Expr) -> Self {
        Self::new(s, e, Node::Skip(expr))
    }

    pub fn empty(s: usize, e: usize) -> Self {
        Self::new(s, e, Node::Empty)
    }

    pub fn any(s: usize, e: usize, got: Option<Token>) -> Self {
        Self::new(s, e, Node::Any { got })
    }

    pub fn terminal(s: usize, e: usize, expected: Token, got: Option<Token>) -> Self {
        Self::new(s, e, Node::Terminal { expected, got })
    }

    pub fn nonterminal(s: usize, e: usize, id: RuleId, sub: Self) -> Self {
        Self::new(s, e, Node::NonTerminal { id, sub: Arc::new(sub) })
    }

    pub fn seq(s: usize, e: usize, first: Self, second: Self) -> Self {
        Self::new(s, e, Node::Seq { first: Arc::new(first), second: Arc::new(second) })
    }

    pub fn prior(s: usize, e: usize, first: Self, second: Self) -> Self {
        Self::new(s, e, Node::Prior { first: Arc::new(first), second: Arc::new(second) })
    }

    pub fn star(s: usize, e: usize, head: Self, tail: Self) -> Self {
        Self::new(s, e, Node::Star { head: Arc::new(head), tail: Arc::new(tail) })
    }

    pub fn not(s: usize, e: usize, sub: Self) -> Self {
        Self::new(s, e, Node::Not { sub: Arc::new(sub) })
    }

    pub fn semantic(s: usize, e: usize, id: RuleId, value: V) -> Self {
        Self::new(s, e, Node::Semantic { id, value })
    }

    pub fn fail(s: usize, e: usize) -> Self {
        Self::new(s, e, Node::Fail)
    }

    pub fn is_skip(&self) -> bool {
        matches!(self.node, Node::Skip(_))
    }

    fn is_star(&self) -> bool {
        matches!(self.node, Node::Star { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self.node {
            Node::Skip(_) => "skip",
            Node::Empty => "empty",
            Node::Any { .. } => "any",
            Node::Terminal { .. } => "terminal",
            Node::NonTerminal { .. } => "nonterminal",
            Node::Seq { .. } => "seq",
            Node::Prior { .. } => "prior",
            Node::Star { .. } => "star",
            Node::Not { .. } => "not",
            Node::Semantic { .. } => "semantic",
            Node::Fail => "fail",
        }
    }

    /// Direct children, in order.
    pub fn children(&self) -> Vec<&TraceTree<V>> {
        match &self.node {
            Node::NonTerminal { sub, .. } | Node::Not { sub } => vec![sub],
            Node::Seq { first, second } | Node::Prior { first, second } => vec![first, second],
            Node::Star { head, tail } => vec![head, tail],
            _ => Vec::new(),
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }
}

/// Path to the first node where two trees differ, as child labels from
/// the root (`sub`, `first`, `second`, `head`, `tail`), or `None` if they
/// are equal.
pub fn first_divergence<V: PartialEq>(a: &TraceTree<V>, b: &TraceTree<V>) -> Option<Vec<&'static str>> {
    fn labels<V>(t: &TraceTree<V>) -> &'static [&'static str] {
        match &t.node {
            Node::NonTerminal { .. } | Node::Not { .. } => &["sub"],
            Node::Seq { .. } | Node::Prior { .. } => &["first", "second"],
            Node::Star { .. } => &["head", "tail"],
            _ => &[],
        }
    }
    if a == b {
        return None;
    }
    if a.kind() == b.kind() && (a.start, a.end) == (b.start, b.end) {
        for ((label, x), y) in labels(a).iter().zip(a.children()).zip(b.children()) {
            if let Some(mut rest) = first_divergence(x, y) {
                rest.insert(0, *label);
                return Some(rest);
            }
        }
    }
    Some(Vec::new())
}

/// Success or failure of a tree, computed bottom-up.
pub fn outcome<V>(t: &TraceTree<V>) -> Outcome {
    use Outcome::*;
    let (s, e) = (t.start, t.end);
    match &t.node {
        Node::Skip(_) => Undefined,
        Node::Empty => {
            if e == s {
                Success
            } else {
                Undefined
            }
        }
        Node::Any { .. } => {
            if e == s + 1 {
                Success
            } else if e == s {
                Failure
            } else {
                Undefined
            }
        }
        Node::Terminal { expected, got } => {
            if e == s + 1 && *got == Some(*expected) {
                Success
            } else if e == s {
                Failure
            } else {
                Undefined
            }
        }
        Node::NonTerminal { sub, .. } => outcome(sub),
        Node::Seq { first, second } => match outcome(first) {
            Failure => Failure,
            Success => match outcome(second) {
                Success => Success,
                Failure => Failure,
                Undefined => Undefined,
            },
            Undefined => Undefined,
        },
        Node::Prior { first, second } => match outcome(first) {
            Success => Success,
            Failure => outcome(second),
            Undefined => Undefined,
        },
        Node::Star { head, tail } => match outcome(head) {
            Failure => Success,
            Success if outcome(tail) == Success => Success,
            _ => Undefined,
        },
        Node::Not { sub } => outcome(sub).negate(),
        Node::Semantic { .. } => Success,
        Node::Fail => Failure,
    }
}

/// Whether the tree describes an actual computation path.
pub fn tree_wellformed<V>(t: &TraceTree<V>) -> bool {
    let (s, e) = (t.start, t.end);
    if s > e {
        return false;
    }
    match &t.node {
        // skips are only legal where a parent allows them, and parents check
        // those positions directly; a skip on its own proves nothing
        Node::Skip(_) => false,
        Node::Semantic { .. } | Node::Fail => true,
        Node::Empty | Node::Any { .. } | Node::Terminal { .. } => outcome(t).is_meaningful(),
        Node::NonTerminal { sub, .. } => {
            tree_wellformed(sub) && sub.start == s && sub.end == e
        }
        Node::Seq { first, second } => {
            if !tree_wellformed(first) || first.start != s || first.end != second.start || second.end != e {
                return false;
            }
            match outcome(first) {
                Outcome::Failure => second.is_skip() && second.start == second.end,
                Outcome::Success => !second.is_skip() && tree_wellformed(second),
                Outcome::Undefined => false,
            }
        }
        Node::Prior { first, second } => {
            if !tree_wellformed(first) || first.start != s || second.start != s {
                return false;
            }
            match outcome(first) {
                Outcome::Success => second.is_skip() && second.end == second.start && e == first.end,
                Outcome::Failure => !second.is_skip() && tree_wellformed(second) && e == second.end,
                Outcome::Undefined => false,
            }
        }
        Node::Star { head, tail } => {
            if !tree_wellformed(head) || head.start != s {
                return false;
            }
            match outcome(head) {
                Outcome::Success => {
                    tail.is_star() && tree_wellformed(tail) && head.end == tail.start && e == tail.end
                }
                // the failed attempt is backtracked: the star ends where it began
                Outcome::Failure => {
                    tail.is_skip() && tail.start == s && tail.end == s && e == s
                }
                Outcome::Undefined => false,
            }
        }
        Node::Not { sub } => tree_wellformed(sub) && sub.start == s && s == e,
    }
}

/// Whether the tree's constructor skeleton rebuilds `e`, following rule
/// bodies through nonterminal nodes.
pub fn true_to_grammar<V>(t: &TraceTree<V>, e: &Expr, g: &Grammar) -> bool {
    match (&t.node, e) {
        (Node::Skip(skipped), _) => skipped == e,
        (Node::Fail, _) => true,
        (Node::Empty, Expr::Empty) => true,
        (Node::Any { .. }, Expr::Any) => true,
        (Node::Terminal { expected, .. }, Expr::Terminal(a)) => expected == a,
        (Node::NonTerminal { id, sub }, Expr::NonTerminal(b)) => {
            id == b && *id < g.len() && true_to_grammar(sub, g.body(*id), g)
        }
        (Node::Semantic { id, .. }, Expr::NonTerminal(b)) => id == b,
        (Node::Seq { first, second }, Expr::Seq(a, b))
        | (Node::Prior { first, second }, Expr::Prior(a, b)) => {
            true_to_grammar(first, a, g) && true_to_grammar(second, b, g)
        }
        (Node::Star { head, tail }, Expr::Star(inner)) => {
            true_to_grammar(head, inner, g) && true_to_grammar(tail, e, g)
        }
        (Node::Not { sub }, Expr::NotP(inner)) => true_to_grammar(sub, inner, g),
        _ => false,
    }
}

/// Whether every token the tree records matches what the input holds at
/// that position, and every bound lies within the parse bound.
///
/// A token-reading node must record exactly what reading at its start
/// yields: the token there, or `None` at the bound. Its extent must agree
/// (one token on a match, zero otherwise).
pub fn true_to_input<V>(t: &TraceTree<V>, input: &InputText) -> bool {
    if t.start > t.end || t.end > input.bound() {
        return false;
    }
    let read = input.at(t.start);
    match &t.node {
        Node::Any { got } => *got == read && (t.end == t.start + 1) == got.is_some(),
        Node::Terminal { expected, got } => {
            *got == read && (t.end == t.start + 1) == (*got == Some(*expected))
        }
        _ => t.children().into_iter().all(|c| true_to_input(c, input)),
    }
}

/// Serializes a tree to JSON text. Nonterminals are emitted with both index
/// and name; skipped expressions are printed in the grammar text syntax.
pub fn serialize_tree<V: Serialize>(t: &TraceTree<V>, g: &Grammar) -> String {
    tree_to_json(t, g).to_string()
}

pub fn tree_to_json<V: Serialize>(t: &TraceTree<V>, g: &Grammar) -> Value {
    let mut obj = Map::new();
    obj.insert("kind".into(), json!(t.kind()));
    obj.insert("s".into(), json!(t.start));
    obj.insert("e".into(), json!(t.end));
    let children = |obj: &mut Map<String, Value>, kids: &[&SubTree<V>]| {
        let v: Vec<Value> = kids.iter().map(|k| tree_to_json(k, g)).collect();
        obj.insert("children".into(), Value::Array(v));
    };
    match &t.node {
        Node::Skip(expr) => {
            obj.insert("skipped".into(), json!(print_expr(expr, g)));
        }
        Node::Empty | Node::Fail => {}
        Node::Any { got } => {
            obj.insert("got".into(), json!(got));
        }
        Node::Terminal { expected, got } => {
            obj.insert("expected".into(), json!(expected));
            obj.insert("got".into(), json!(got));
        }
        Node::NonTerminal { id, sub } => {
            obj.insert("id".into(), json!(id));
            obj.insert("name".into(), json!(g.name(*id)));
            children(&mut obj, &[sub]);
        }
        Node::Seq { first, second } | Node::Prior { first, second } => {
            children(&mut obj, &[first, second]);
        }
        Node::Star { head, tail } => children(&mut obj, &[head, tail]),
        Node::Not { sub } => children(&mut obj, &[sub]),
        Node::Semantic { id, value } => {
            obj.insert("id".into(), json!(id));
            obj.insert("name".into(), json!(g.name(*id)));
            obj.insert(
                "value".into(),
                serde_json::to_value(value).unwrap_or(Value::Null),
            );
        }
    }
    Value::Object(obj)
}

/// Parses the JSON produced by [`serialize_tree`].
pub fn deserialize_tree<V: DeserializeOwned>(
    text: &str,
    g: &Grammar,
) -> Result<TraceTree<V>, TreeFormatError> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let value = Value::deserialize(&mut de)?;
    de.end()?;
    tree_from_json(&value, g)
}

pub fn tree_from_json<V: DeserializeOwned>(
    v: &Value,
    g: &Grammar,
) -> Result<TraceTree<V>, TreeFormatError> {
    let obj = v.as_object().ok_or(TreeFormatError::Shape("node must be an object"))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or(TreeFormatError::Shape("node without a kind"))?;
    let field = |name: &'static str| TreeFormatError::Field { kind: kind.to_string(), field: name };
    let index = |name: &'static str| -> Result<usize, TreeFormatError> {
        obj.get(name).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| field(name))
    };
    let token = |name: &'static str| -> Result<Token, TreeFormatError> {
        obj.get(name)
            .and_then(Value::as_u64)
            .and_then(|x| u8::try_from(x).ok())
            .ok_or_else(|| field(name))
    };
    let opt_token = |name: &'static str| -> Result<Option<Token>, TreeFormatError> {
        match obj.get(name) {
            Some(Value::Null) => Ok(None),
            Some(_) => token(name).map(Some),
            None => Err(field(name)),
        }
    };
    let rule = || -> Result<RuleId, TreeFormatError> {
        let id = index("id")?;
        if id >= g.len() {
            return Err(field("id"));
        }
        Ok(id)
    };
    let kids = |n: usize| -> Result<Vec<TraceTree<V>>, TreeFormatError> {
        let arr = obj.get("children").and_then(Value::as_array).ok_or_else(|| field("children"))?;
        if arr.len() != n {
            return Err(field("children"));
        }
        arr.iter().map(|c| tree_from_json(c, g)).collect()
    };

    let (s, e) = (index("s")?, index("e")?);
    if e < s {
        return Err(TreeFormatError::Bounds { s, e });
    }
    let node = match kind {
        "skip" => {
            let text = obj.get("skipped").and_then(Value::as_str).ok_or_else(|| field("skipped"))?;
            Node::Skip(parse_expr_text(text, g)?)
        }
        "empty" => Node::Empty,
        "fail" => Node::Fail,
        "any" => Node::Any { got: opt_token("got")? },
        "terminal" => Node::Terminal { expected: token("expected")?, got: opt_token("got")? },
        "nonterminal" => {
            let id = rule()?;
            let [sub]: [TraceTree<V>; 1] = kids(1)?.try_into().ok().ok_or_else(|| field("children"))?;
            if sub.is_skip() {
                return Err(TreeFormatError::Shape("nonterminal child cannot be a skip"));
            }
            Node::NonTerminal { id, sub: Arc::new(sub) }
        }
        "seq" | "prior" | "star" => {
            let [a, b]: [TraceTree<V>; 2] = kids(2)?.try_into().ok().ok_or_else(|| field("children"))?;
            if a.is_skip() {
                return Err(TreeFormatError::Shape("first child cannot be a skip"));
            }
            let (a, b) = (Arc::new(a), Arc::new(b));
            match kind {
                "seq" => Node::Seq { first: a, second: b },
                "prior" => Node::Prior { first: a, second: b },
                _ => {
                    if !(b.is_skip() || b.is_star()) {
                        return Err(TreeFormatError::Shape("star tail must be a star or a skip"));
                    }
                    Node::Star { head: a, tail: b }
                }
            }
        }
        "not" => {
            let [sub]: [TraceTree<V>; 1] = kids(1)?.try_into().ok().ok_or_else(|| field("children"))?;
            if sub.is_skip() {
                return Err(TreeFormatError::Shape("not child cannot be a skip"));
            }
            Node::Not { sub: Arc::new(sub) }
        }
        "semantic" => {
            let id = rule()?;
            let raw = obj.get("value").cloned().ok_or_else(|| field("value"))?;
            let value = serde_json::from_value(raw)?;
            Node::Semantic { id, value }
        }
        other => return Err(TreeFormatError::UnknownKind(other.to_string())),
    };
    Ok(TraceTree::new(s, e, node))
}

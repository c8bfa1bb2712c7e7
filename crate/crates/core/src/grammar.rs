//! The PEG expression algebra and the grammar container.
//!
//! Only the eight core constructors exist at this level. The derived operators
//! (ranges, literals, `+`, `?`, `&`) live in [`ExtendedExpr`] and are lowered
//! by [`desugar`] before any analysis or parsing happens.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::GrammarError;

/// Terminal symbols are bytes.
pub type Token = u8;

/// Index of a nonterminal in its grammar, `0..=n`.
pub type RuleId = usize;

/// A core parsing expression.
///
/// Children are reference counted so that subexpressions can be shared by
/// trace trees (skip nodes keep a copy of the expression they skipped).
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Empty,
    Any,
    Terminal(Token),
    NonTerminal(RuleId),
    Seq(Arc<Expr>, Arc<Expr>),
    Prior(Arc<Expr>, Arc<Expr>),
    Star(Arc<Expr>),
    NotP(Arc<Expr>),
}

impl Expr {
    pub fn seq(left: Expr, right: Expr) -> Expr {
        Expr::Seq(Arc::new(left), Arc::new(right))
    }

    pub fn prior(left: Expr, right: Expr) -> Expr {
        Expr::Prior(Arc::new(left), Arc::new(right))
    }

    pub fn star(inner: Expr) -> Expr {
        Expr::Star(Arc::new(inner))
    }

    pub fn not(inner: Expr) -> Expr {
        Expr::NotP(Arc::new(inner))
    }

    /// Number of nodes. Strictly larger than the measure of any proper
    /// subexpression, which is what the parser's termination argument uses.
    pub fn measure(&self) -> usize {
        match self {
            Expr::Empty | Expr::Any | Expr::Terminal(_) | Expr::NonTerminal(_) => 1,
            Expr::Seq(a, b) | Expr::Prior(a, b) => 1 + a.measure() + b.measure(),
            Expr::Star(e) | Expr::NotP(e) => 1 + e.measure(),
        }
    }

    /// Visits every nonterminal reference, left to right.
    pub fn for_each_nonterminal(&self, f: &mut impl FnMut(RuleId)) {
        match self {
            Expr::NonTerminal(id) => f(*id),
            Expr::Seq(a, b) | Expr::Prior(a, b) => {
                a.for_each_nonterminal(f);
                b.for_each_nonterminal(f);
            }
            Expr::Star(e) | Expr::NotP(e) => e.for_each_nonterminal(f),
            _ => {}
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Empty => write!(f, "ε"),
            Expr::Any => write!(f, "."),
            Expr::Terminal(t) => write!(f, "{}", crate::text::token_literal(*t)),
            Expr::NonTerminal(id) => write!(f, "#{id}"),
            Expr::Seq(a, b) => write!(f, "Seq({a:?}, {b:?})"),
            Expr::Prior(a, b) => write!(f, "Prior({a:?}, {b:?})"),
            Expr::Star(e) => write!(f, "Star({e:?})"),
            Expr::NotP(e) => write!(f, "Not({e:?})"),
        }
    }
}

/// Free function form of [`Expr::measure`].
pub fn peg_measure(e: &Expr) -> usize {
    e.measure()
}

/// Front-end expressions: the core constructors plus the derived operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtendedExpr {
    Empty,
    Any,
    Terminal(Token),
    NonTerminal(RuleId),
    Seq(Box<ExtendedExpr>, Box<ExtendedExpr>),
    Prior(Box<ExtendedExpr>, Box<ExtendedExpr>),
    Star(Box<ExtendedExpr>),
    NotP(Box<ExtendedExpr>),
    /// Inclusive byte range, `lo <= hi`.
    Range(Token, Token),
    /// Nonempty token sequence.
    Literal(Vec<Token>),
    Plus(Box<ExtendedExpr>),
    Optional(Box<ExtendedExpr>),
    AndP(Box<ExtendedExpr>),
}

impl ExtendedExpr {
    /// Lifts a core expression into the extended type without change.
    pub fn embed(e: &Expr) -> ExtendedExpr {
        match e {
            Expr::Empty => ExtendedExpr::Empty,
            Expr::Any => ExtendedExpr::Any,
            Expr::Terminal(t) => ExtendedExpr::Terminal(*t),
            Expr::NonTerminal(id) => ExtendedExpr::NonTerminal(*id),
            Expr::Seq(a, b) => {
                ExtendedExpr::Seq(Box::new(Self::embed(a)), Box::new(Self::embed(b)))
            }
            Expr::Prior(a, b) => {
                ExtendedExpr::Prior(Box::new(Self::embed(a)), Box::new(Self::embed(b)))
            }
            Expr::Star(e) => ExtendedExpr::Star(Box::new(Self::embed(e))),
            Expr::NotP(e) => ExtendedExpr::NotP(Box::new(Self::embed(e))),
        }
    }
}

/// Lowers derived operators to the core algebra.
///
/// Ranges and literals become right-nested choices and sequences of
/// terminals; `e+` becomes `e e*`, `e?` becomes `e / ε` and `&e` becomes `!!e`.
pub fn desugar(e: &ExtendedExpr) -> Expr {
    match e {
        ExtendedExpr::Empty => Expr::Empty,
        ExtendedExpr::Any => Expr::Any,
        ExtendedExpr::Terminal(t) => Expr::Terminal(*t),
        ExtendedExpr::NonTerminal(id) => Expr::NonTerminal(*id),
        ExtendedExpr::Seq(a, b) => Expr::seq(desugar(a), desugar(b)),
        ExtendedExpr::Prior(a, b) => Expr::prior(desugar(a), desugar(b)),
        ExtendedExpr::Star(e) => Expr::star(desugar(e)),
        ExtendedExpr::NotP(e) => Expr::not(desugar(e)),
        ExtendedExpr::Range(lo, hi) => {
            assert!(lo <= hi, "range bounds out of order");
            (*lo..*hi)
                .rev()
                .fold(Expr::Terminal(*hi), |acc, t| Expr::prior(Expr::Terminal(t), acc))
        }
        ExtendedExpr::Literal(tokens) => {
            let (last, init) = tokens.split_last().expect("empty literal");
            init.iter()
                .rev()
                .fold(Expr::Terminal(*last), |acc, t| Expr::seq(Expr::Terminal(*t), acc))
        }
        ExtendedExpr::Plus(e) => {
            let inner = Arc::new(desugar(e));
            Expr::Seq(inner.clone(), Arc::new(Expr::Star(inner)))
        }
        ExtendedExpr::Optional(e) => Expr::prior(desugar(e), Expr::Empty),
        ExtendedExpr::AndP(e) => Expr::not(Expr::not(desugar(e))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub body: Expr,
}

/// A grammar: rule bodies indexed `0..=n`, a start symbol, and the
/// nonterminal order used by pattern well-formedness.
///
/// `rank[i]` is the position of rule `i` in the order; `B < A` iff
/// `rank[B] < rank[A]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    rules: Vec<Rule>,
    start: RuleId,
    rank: Vec<usize>,
}

impl Grammar {
    /// Builds a grammar with the default order: later rules are smaller.
    pub fn new(rules: Vec<Rule>) -> Result<Grammar, GrammarError> {
        let n = rules.len();
        let rank = (0..n).map(|i| n - 1 - i).collect();
        Grammar::with_rank(rules, 0, rank)
    }

    pub fn with_rank(
        rules: Vec<Rule>,
        start: RuleId,
        rank: Vec<usize>,
    ) -> Result<Grammar, GrammarError> {
        if rules.is_empty() {
            return Err(GrammarError::NoRules);
        }
        let mut seen = HashMap::new();
        for (i, rule) in rules.iter().enumerate() {
            if seen.insert(rule.name.clone(), i).is_some() {
                return Err(GrammarError::DuplicateRule { name: rule.name.clone(), line: 0 });
            }
        }
        let count = rules.len();
        for rule in &rules {
            let mut bad = None;
            rule.body.for_each_nonterminal(&mut |id| {
                if id >= count && bad.is_none() {
                    bad = Some(id);
                }
            });
            if let Some(id) = bad {
                return Err(GrammarError::RuleOutOfRange { id, count });
            }
        }
        if start >= count {
            return Err(GrammarError::RuleOutOfRange { id: start, count });
        }
        if !is_permutation(&rank, count) {
            return Err(GrammarError::BadRank);
        }
        Ok(Grammar { rules, start, rank })
    }

    /// Convenience constructor from `(name, body)` pairs with the default order.
    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, Expr)>,
    ) -> Result<Grammar, GrammarError> {
        Grammar::new(
            pairs.into_iter().map(|(name, body)| Rule { name: name.into(), body }).collect(),
        )
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn body(&self, id: RuleId) -> &Expr {
        &self.rules[id].body
    }

    pub fn name(&self, id: RuleId) -> &str {
        &self.rules[id].name
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.name.as_str())
    }

    pub fn lookup(&self, name: &str) -> Option<RuleId> {
        self.rules.iter().position(|r| r.name == name)
    }

    pub fn start(&self) -> RuleId {
        self.start
    }

    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    /// `a <_{V_N} b`
    pub fn smaller(&self, a: RuleId, b: RuleId) -> bool {
        self.rank[a] < self.rank[b]
    }

    /// Same rules, different order.
    pub fn reordered(&self, rank: Vec<usize>) -> Result<Grammar, GrammarError> {
        Grammar::with_rank(self.rules.clone(), self.start, rank)
    }

    pub fn with_start(&self, start: RuleId) -> Result<Grammar, GrammarError> {
        Grammar::with_rank(self.rules.clone(), start, self.rank.clone())
    }

    /// Largest rule-body measure; used to size the parser's depth tripwire.
    pub fn max_measure(&self) -> usize {
        self.rules.iter().map(|r| r.body.measure()).max().unwrap_or(1)
    }
}

pub(crate) fn is_permutation(rank: &[usize], n: usize) -> bool {
    if rank.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &r in rank {
        if r >= n || std::mem::replace(&mut seen[r], true) {
            return false;
        }
    }
    true
}

/// The token sequence being parsed and the bound `b` at which parsing stops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputText {
    tokens: Vec<Token>,
    bound: usize,
}

impl InputText {
    pub fn new(tokens: impl Into<Vec<Token>>) -> InputText {
        let tokens = tokens.into();
        let bound = tokens.len();
        InputText { tokens, bound }
    }

    pub fn with_bound(tokens: impl Into<Vec<Token>>, bound: usize) -> Result<InputText, GrammarError> {
        let tokens = tokens.into();
        if bound > tokens.len() {
            return Err(GrammarError::BoundTooLarge { bound, len: tokens.len() });
        }
        Ok(InputText { tokens, bound })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    /// The token read at `pos`, or `None` at or past the bound.
    pub fn at(&self, pos: usize) -> Option<Token> {
        if pos < self.bound {
            Some(self.tokens[pos])
        } else {
            None
        }
    }
}

impl From<&str> for InputText {
    fn from(s: &str) -> InputText {
        InputText::new(s.as_bytes())
    }
}

//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use pegproof::{
    grammar_wellformed, infer_order, tree_wellformed, true_to_grammar, true_to_input, Expr, Grammar, InputText,
    Node, PropTriple, Rule, RuleId, TraceTree,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const AB: &[u8] = b"ab";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- generators

/// A random core expression with exactly `size` nodes.
pub fn random_expr(rng: &mut (impl Rng + ?Sized), rules: usize, size: usize, alphabet: &[u8]) -> Expr {
    if size <= 1 {
        let pick = rng.gen_range(0..if rules > 0 { 8 } else { 5 });
        return match pick {
            0 => Expr::Empty,
            1 => Expr::Any,
            2..=4 => Expr::Terminal(*alphabet.choose(rng).unwrap()),
            _ => Expr::NonTerminal(rng.gen_range(0..rules)),
        };
    }
    if size == 2 || rng.gen_bool(0.25) {
        let inner = random_expr(rng, rules, size - 1, alphabet);
        return if rng.gen_bool(0.5) { Expr::star(inner) } else { Expr::not(inner) };
    }
    let left = rng.gen_range(1..size - 1);
    let a = random_expr(rng, rules, left, alphabet);
    let b = random_expr(rng, rules, size - 1 - left, alphabet);
    if rng.gen_bool(0.5) {
        Expr::seq(a, b)
    } else {
        Expr::prior(a, b)
    }
}

/// A grammar with `n` rules of size at most `max_size` and a random order.
pub fn random_grammar(rng: &mut impl Rng, n: usize, max_size: usize, alphabet: &[u8]) -> Grammar {
    let rules = (0..n)
        .map(|i| {
            let size = rng.gen_range(1..=max_size);
            Rule { name: format!("R{i}"), body: random_expr(rng, n, size, alphabet) }
        })
        .collect();
    let g = Grammar::new(rules).unwrap();
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(rng);
    g.reordered(rank).unwrap()
}

/// Rejection-samples a well-formed grammar, fixing the order with
/// `infer_order` when one exists.
pub fn random_wf_grammar(rng: &mut impl Rng, n: usize, max_size: usize, alphabet: &[u8]) -> Grammar {
    loop {
        let g = random_grammar(rng, n, max_size, alphabet);
        if let Some(rank) = infer_order(&g) {
            let g = g.reordered(rank).unwrap();
            if grammar_wellformed(&g).verdict {
                return g;
            }
        }
    }
}

pub fn random_input(rng: &mut impl Rng, max_len: usize, alphabet: &[u8]) -> Vec<u8> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

/// Every expression with exactly `size` nodes over the given leaves.
pub fn all_exprs(size: usize, leaves: &[Expr]) -> Vec<Expr> {
    let mut by_size: Vec<Vec<Expr>> = vec![Vec::new(), leaves.to_vec()];
    for k in 2..=size {
        let mut out = Vec::new();
        for e in &by_size[k - 1] {
            out.push(Expr::star(e.clone()));
            out.push(Expr::not(e.clone()));
        }
        for left in 1..k - 1 {
            for a in &by_size[left] {
                for b in &by_size[k - 1 - left] {
                    out.push(Expr::seq(a.clone(), b.clone()));
                    out.push(Expr::prior(a.clone(), b.clone()));
                }
            }
        }
        by_size.push(out);
    }
    by_size.swap_remove(size)
}

/// All words over `alphabet` of length at most `max_len`.
pub fn all_inputs(max_len: usize, alphabet: &[u8]) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<u8>| {
                alphabet.iter().map(move |&c| {
                    let mut w = w.clone();
                    w.push(c);
                    w
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// A random tree that is often, but not always, well-formed.
pub fn random_tree(rng: &mut impl Rng, depth: usize, s: usize, b: usize) -> TraceTree {
    let end = |rng: &mut dyn rand::RngCore, s: usize| (s + rng.gen_range(0..=2)).min(b.max(s));
    let tok = |rng: &mut dyn rand::RngCore| if rng.gen_bool(0.2) { None } else { Some(*AB.choose(rng).unwrap()) };
    let kind = if depth == 0 { rng.gen_range(0..4) } else { rng.gen_range(0..11) };
    match kind {
        0 => TraceTree::skip(s, end(rng, s), Expr::Empty),
        1 => TraceTree::empty(s, end(rng, s)),
        2 => {
            let e = end(rng, s);
            TraceTree::any(s, e, tok(rng))
        }
        3 => {
            let e = end(rng, s);
            TraceTree::terminal(s, e, *AB.choose(rng).unwrap(), tok(rng))
        }
        4 => {
            let sub = random_tree(rng, depth - 1, s, b);
            let e = if rng.gen_bool(0.8) { sub.end } else { end(rng, s) };
            TraceTree::nonterminal(s, e, 0, sub)
        }
        5 | 6 => {
            let first = random_tree(rng, depth - 1, s, b);
            let mid = if rng.gen_bool(0.8) { first.end } else { s };
            let second = if rng.gen_bool(0.3) {
                TraceTree::skip(mid, mid, Expr::Any)
            } else {
                random_tree(rng, depth - 1, mid, b)
            };
            let e = if rng.gen_bool(0.8) { second.end } else { first.end };
            TraceTree::seq(s, e, first, second)
        }
        7 => {
            let first = random_tree(rng, depth - 1, s, b);
            let second = if rng.gen_bool(0.5) { TraceTree::skip(s, s, Expr::Any) } else { random_tree(rng, depth - 1, s, b) };
            let e = if rng.gen_bool(0.5) { first.end } else { second.end };
            TraceTree::prior(s, e, first, second)
        }
        8 => {
            let head = random_tree(rng, depth - 1, s, b);
            let tail = if rng.gen_bool(0.5) {
                let at = if rng.gen_bool(0.8) { s } else { head.end };
                TraceTree::skip(at, at, Expr::star(Expr::Any))
            } else {
                let at = head.end;
                let inner = random_tree(rng, depth.saturating_sub(2), at, b);
                let e = inner.end;
                TraceTree::star(at, e, inner, TraceTree::skip(at, at, Expr::star(Expr::Any)))
            };
            let e = if rng.gen_bool(0.7) { tail.end } else { s };
            TraceTree::star(s, e, head, tail)
        }
        9 => {
            let sub = random_tree(rng, depth - 1, s, b);
            let e = if rng.gen_bool(0.85) { s } else { end(rng, s) };
            TraceTree::not(s, e, sub)
        }
        _ => {
            if rng.gen_bool(0.5) {
                TraceTree::fail(s, end(rng, s))
            } else {
                TraceTree::semantic(s, end(rng, s), 0, serde_json::json!(null))
            }
        }
    }
}

/// Applies one local change to a random node of `t`.
pub fn mutate(rng: &mut impl Rng, t: &TraceTree) -> TraceTree {
    let target = rng.gen_range(0..t.size());
    let mut counter = 0;
    mutate_at(rng, t, target, &mut counter)
}

fn mutate_at(rng: &mut impl Rng, t: &TraceTree, target: usize, counter: &mut usize) -> TraceTree {
    let here = *counter;
    *counter += 1;
    if here == target {
        let mut m = t.clone();
        match rng.gen_range(0..4) {
            0 => m.end += 1,
            1 if m.end > m.start => m.end -= 1,
            2 => {
                m.node = match &t.node {
                    Node::Any { got } => Node::Any { got: got.map_or(Some(b'a'), |_| None) },
                    Node::Terminal { expected, got } => Node::Terminal { expected: *expected, got: if *got == Some(b'a') { Some(b'b') } else { Some(b'a') } },
                    Node::Seq { first, second } => Node::Seq { first: second.clone(), second: first.clone() },
                    Node::Prior { first, second } => Node::Prior { first: second.clone(), second: first.clone() },
                    other => other.clone(),
                }
            }
            _ => m = TraceTree::skip(m.start, m.end, Expr::Any),
        }
        return m;
    }
    let rebuild = |rng: &mut dyn rand::RngCore, c: &Arc<TraceTree>, counter: &mut usize| {
        let mut r = ChaCha8Rng::seed_from_u64(rng.gen());
        Arc::new(mutate_at(&mut r, c, target, counter))
    };
    let node = match &t.node {
        Node::NonTerminal { id, sub } => Node::NonTerminal { id: *id, sub: rebuild(rng, sub, counter) },
        Node::Seq { first, second } => {
            let first = rebuild(rng, first, counter);
            Node::Seq { first, second: rebuild(rng, second, counter) }
        }
        Node::Prior { first, second } => {
            let first = rebuild(rng, first, counter);
            Node::Prior { first, second: rebuild(rng, second, counter) }
        }
        Node::Star { head, tail } => {
            let head = rebuild(rng, head, counter);
            Node::Star { head, tail: rebuild(rng, tail, counter) }
        }
        Node::Not { sub } => Node::Not { sub: rebuild(rng, sub, counter) },
        other => other.clone(),
    };
    TraceTree::new(t.start, t.end, node)
}

// ------------------------------------------------- property saturation oracle

/// Least fixpoint of the three properties by worklist saturation over every
/// subexpression of the grammar. Returns `(fail, empty, consume)` per rule.
pub fn saturate(g: &Grammar) -> Vec<PropTriple> {
    enum K {
        Empty,
        Token,
        Rule(RuleId),
        Seq(usize, usize),
        Prior(usize, usize),
        Star(usize),
        Not(usize),
    }
    fn build(e: &Expr, nodes: &mut Vec<K>, parents: &mut Vec<Vec<usize>>) -> usize {
        let k = match e {
            Expr::Empty => K::Empty,
            Expr::Any | Expr::Terminal(_) => K::Token,
            Expr::NonTerminal(b) => K::Rule(*b),
            Expr::Seq(a, b) => K::Seq(build(a, nodes, parents), build(b, nodes, parents)),
            Expr::Prior(a, b) => K::Prior(build(a, nodes, parents), build(b, nodes, parents)),
            Expr::Star(a) => K::Star(build(a, nodes, parents)),
            Expr::NotP(a) => K::Not(build(a, nodes, parents)),
        };
        let id = nodes.len();
        match k {
            K::Seq(a, b) | K::Prior(a, b) => {
                parents[a].push(id);
                parents[b].push(id);
            }
            K::Star(a) | K::Not(a) => parents[a].push(id),
            _ => {}
        }
        nodes.push(k);
        parents.push(Vec::new());
        id
    }

    let mut nodes = Vec::new();
    let mut parents = Vec::new();
    let roots: Vec<usize> = g.rules().iter().map(|r| build(&r.body, &mut nodes, &mut parents)).collect();
    let mut users = vec![Vec::new(); g.len()];
    for (i, k) in nodes.iter().enumerate() {
        if let K::Rule(b) = k {
            users[*b].push(i);
        }
    }
    let mut rule_of_root = HashMap::new();
    for (r, &root) in roots.iter().enumerate() {
        rule_of_root.entry(root).or_insert_with(Vec::new).push(r);
    }

    // [fail, empty, consume]
    let mut facts = vec![[false; 3]; nodes.len()];
    let mut queue: VecDeque<usize> = (0..nodes.len()).collect();
    while let Some(i) = queue.pop_front() {
        let get = |j: usize| facts[j];
        let new = match nodes[i] {
            K::Empty => [false, true, false],
            K::Token => [true, false, true],
            K::Rule(b) => get(roots[b]),
            K::Seq(a, b) => {
                let (x, y) = (get(a), get(b));
                let x_ok = x[1] || x[2];
                [
                    x[0] || (x_ok && y[0]),
                    x[1] && y[1],
                    (x[2] && (y[1] || y[2])) || (x_ok && y[2]),
                ]
            }
            K::Prior(a, b) => {
                let (x, y) = (get(a), get(b));
                [x[0] && y[0], x[1] || (x[0] && y[1]), x[2] || (x[0] && y[2])]
            }
            K::Star(a) => {
                let x = get(a);
                [false, x[0], x[2]]
            }
            K::Not(a) => {
                let x = get(a);
                [x[1] || x[2], x[0], false]
            }
        };
        let old = facts[i];
        let merged = [old[0] || new[0], old[1] || new[1], old[2] || new[2]];
        if merged != old {
            facts[i] = merged;
            queue.extend(parents[i].iter().copied());
            if let Some(rules) = rule_of_root.get(&i) {
                for &r in rules {
                    queue.extend(users[r].iter().copied());
                }
            }
        }
    }
    roots.iter().map(|&r| PropTriple::new(facts[r][0], facts[r][1], facts[r][2])).collect()
}

// ------------------------------------------------ candidate tree enumeration

enum Shape {
    Empty,
    Any,
    Terminal(u8),
    Rule(usize),
    Seq(usize, usize),
    Prior(usize, usize),
    Star(usize),
    Not(usize),
}

/// Enumerates every finite tree that is well-formed, true to a grammar
/// expression and true to the input, for every subexpression and start.
///
/// The table is the least fixpoint of "a candidate is any tree whose
/// children are candidates or skips and which passes the three checks",
/// computed by iterating until nothing changes. Child starts, skip widths
/// and node ends are drawn from the positions already present among the
/// node and its siblings (plus one token further), which covers every
/// bound a well-formed node can have.
pub struct Enumerator<'a> {
    g: &'a Grammar,
    input: &'a InputText,
    exprs: Vec<Expr>,
    shapes: Vec<Shape>,
    table: Vec<Vec<Vec<Arc<TraceTree>>>>,
    tokens: Vec<Option<u8>>,
    pub rounds: usize,
}

pub const CANDIDATE_CAP: usize = 64;

impl<'a> Enumerator<'a> {
    pub fn new(g: &'a Grammar, input: &'a InputText) -> Self {
        let mut en = Enumerator {
            g,
            input,
            exprs: Vec::new(),
            shapes: Vec::new(),
            table: Vec::new(),
            tokens: Vec::new(),
            rounds: 0,
        };
        let mut index = HashMap::new();
        for id in 0..g.len() {
            en.intern(&Expr::NonTerminal(id), &mut index);
        }
        let mut tokens: Vec<Option<u8>> = vec![None];
        for &t in input.tokens().iter().chain(AB) {
            if !tokens.contains(&Some(t)) {
                tokens.push(Some(t));
            }
        }
        en.tokens = tokens;
        en.table = vec![vec![Vec::new(); input.bound() + 1]; en.exprs.len()];
        en
    }

    fn intern(&mut self, e: &Expr, index: &mut HashMap<Expr, usize>) -> usize {
        if let Some(&i) = index.get(e) {
            return i;
        }
        let i = self.exprs.len();
        index.insert(e.clone(), i);
        self.exprs.push(e.clone());
        self.shapes.push(Shape::Empty);
        let shape = match e {
            Expr::Empty => Shape::Empty,
            Expr::Any => Shape::Any,
            Expr::Terminal(a) => Shape::Terminal(*a),
            Expr::NonTerminal(b) => Shape::Rule(self.intern(&self.g.body(*b).clone(), index)),
            Expr::Seq(a, b) => Shape::Seq(self.intern(a, index), self.intern(b, index)),
            Expr::Prior(a, b) => Shape::Prior(self.intern(a, index), self.intern(b, index)),
            Expr::Star(a) => Shape::Star(self.intern(a, index)),
            Expr::NotP(a) => Shape::Not(self.intern(a, index)),
        };
        self.shapes[i] = shape;
        i
    }

    /// Candidates for `e` at `start`. Panics if `e` is not an interned expression.
    pub fn candidates(&self, e: &Expr, start: usize) -> &[Arc<TraceTree>] {
        let i = self.exprs.iter().position(|x| x == e).expect("interned");
        &self.table[i][start]
    }

    /// Largest candidate set over all subexpressions and starts.
    pub fn widest(&self) -> usize {
        self.table.iter().flatten().map(Vec::len).max().unwrap_or(0)
    }

    /// Runs to the fixpoint. Returns false if some set exceeded
    /// [`CANDIDATE_CAP`] or the iteration did not settle.
    pub fn run(&mut self, max_rounds: usize) -> bool {
        let b = self.input.bound();
        loop {
            self.rounds += 1;
            if self.rounds > max_rounds {
                return false;
            }
            let mut changed = false;
            // children are interned after their parents, so go backwards
            for i in (0..self.exprs.len()).rev() {
                for s in 0..=b {
                    let found = self.expand(i, s);
                    if found.len() > CANDIDATE_CAP {
                        return false;
                    }
                    if found.len() != self.table[i][s].len() {
                        changed = true;
                    }
                    self.table[i][s] = found;
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Candidates and skips for child expression `c` at `at`.
    fn options(&self, c: usize, at: usize) -> Vec<Arc<TraceTree>> {
        let b = self.input.bound();
        let mut out = Vec::new();
        if at <= b {
            out.extend(self.table[c][at].iter().cloned());
        }
        for w in 0..=1 {
            out.push(Arc::new(TraceTree::skip(at, at + w, self.exprs[c].clone())));
        }
        out
    }

    fn ends(&self, s: usize, extra: &[usize]) -> Vec<usize> {
        let mut ends = vec![s, s + 1];
        ends.extend_from_slice(extra);
        ends.sort_unstable();
        ends.dedup();
        ends.retain(|&e| e <= self.input.bound());
        ends
    }

    fn expand(&self, i: usize, s: usize) -> Vec<Arc<TraceTree>> {
        let e = &self.exprs[i];
        let mut built: Vec<TraceTree> = Vec::new();
        match self.shapes[i] {
            Shape::Empty => {
                for end in self.ends(s, &[]) {
                    built.push(TraceTree::empty(s, end));
                }
            }
            Shape::Any => {
                for end in self.ends(s, &[]) {
                    for &got in &self.tokens {
                        built.push(TraceTree::any(s, end, got));
                    }
                }
            }
            Shape::Terminal(a) => {
                for end in self.ends(s, &[]) {
                    for &got in &self.tokens {
                        built.push(TraceTree::terminal(s, end, a, got));
                    }
                }
            }
            Shape::Rule(body) => {
                let id = match e {
                    Expr::NonTerminal(id) => *id,
                    _ => unreachable!(),
                };
                for sub in self.options(body, s) {
                    for end in self.ends(s, &[sub.end]) {
                        built.push(TraceTree::new(s, end, Node::NonTerminal { id, sub: sub.clone() }));
                    }
                }
            }
            Shape::Seq(a, c) | Shape::Prior(a, c) => {
                let is_seq = matches!(self.shapes[i], Shape::Seq(..));
                for first in self.options(a, s) {
                    let mut starts = vec![s, first.end];
                    starts.dedup();
                    for &at in &starts {
                        for second in self.options(c, at) {
                            for end in self.ends(s, &[first.end, second.end]) {
                                let (first, second) = (first.clone(), second.clone());
                                let node = if is_seq { Node::Seq { first, second } } else { Node::Prior { first, second } };
                                built.push(TraceTree::new(s, end, node));
                            }
                        }
                    }
                }
            }
            Shape::Star(_) => {
                let inner = match self.shapes[i] {
                    Shape::Star(x) => x,
                    _ => unreachable!(),
                };
                for head in self.options(inner, s) {
                    let mut starts = vec![s, head.end];
                    starts.dedup();
                    for &at in &starts {
                        for tail in self.options(i, at) {
                            for end in self.ends(s, &[head.end, tail.end]) {
                                built.push(TraceTree::new(s, end, Node::Star { head: head.clone(), tail: tail.clone() }));
                            }
                        }
                    }
                }
            }
            Shape::Not(a) => {
                for sub in self.options(a, s) {
                    for end in self.ends(s, &[sub.end]) {
                        built.push(TraceTree::new(s, end, Node::Not { sub: sub.clone() }));
                    }
                }
            }
        }
        built
            .into_iter()
            .filter(|t| tree_wellformed(t) && true_to_input(t, self.input) && true_to_grammar(t, e, self.g))
            .map(Arc::new)
            .collect()
    }
}

// ------------------------------------------------------ arithmetic evaluator

/// `None` on a syntax error or trailing input; `Some(None)` on division by
/// zero. Left-associative, `*` and `/` bind tighter than `+` and `-`.
pub fn eval_arith(text: &str) -> Option<Option<BigRational>> {
    struct P<'t> {
        b: &'t [u8],
        i: usize,
    }
    impl P<'_> {
        fn peek(&self) -> Option<u8> {
            self.b.get(self.i).copied()
        }
        fn sum(&mut self) -> Option<Option<BigRational>> {
            let mut acc = self.prod()?;
            while let Some(op @ (b'+' | b'-')) = self.peek() {
                self.i += 1;
                let rhs = self.prod()?;
                acc = match (acc, rhs) {
                    (Some(x), Some(y)) => Some(if op == b'+' { x + y } else { x - y }),
                    _ => None,
                };
            }
            Some(acc)
        }
        fn prod(&mut self) -> Option<Option<BigRational>> {
            let mut acc = self.atom()?;
            while let Some(op @ (b'*' | b'/')) = self.peek() {
                self.i += 1;
                let rhs = self.atom()?;
                acc = match (acc, rhs) {
                    (Some(x), Some(y)) if op == b'*' => Some(x * y),
                    (Some(_), Some(y)) if y.is_zero() => None,
                    (Some(x), Some(y)) => Some(x / y),
                    _ => None,
                };
            }
            Some(acc)
        }
        fn atom(&mut self) -> Option<Option<BigRational>> {
            if self.peek() == Some(b'(') {
                self.i += 1;
                let v = self.sum()?;
                if self.peek() != Some(b')') {
                    return None;
                }
                self.i += 1;
                return Some(v);
            }
            let start = self.i;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.i += 1;
            }
            if start == self.i {
                return None;
            }
            let digits = std::str::from_utf8(&self.b[start..self.i]).ok()?;
            Some(Some(BigRational::from_integer(digits.parse::<BigInt>().ok()?)))
        }
    }
    let mut p = P { b: text.as_bytes(), i: 0 };
    let v = p.sum()?;
    if p.i != p.b.len() {
        return None;
    }
    Some(v)
}

/// A random arithmetic expression over non-negative integers.
pub fn random_arith(rng: &mut impl Rng, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        return rng.gen_range(0..1000u32).to_string();
    }
    match rng.gen_range(0..5) {
        0 => format!("({})", random_arith(rng, depth - 1)),
        k => {
            let op = ['+', '-', '*', '/'][k - 1];
            format!("{}{op}{}", random_arith(rng, depth - 1), random_arith(rng, depth - 1))
        }
    }
}

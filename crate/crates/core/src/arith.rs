//! Arithmetic grammars and an evaluating action, used by the demo and the
//! tests.
//!
//! [`ArithAction`] works on the shape of a compacted body rather than rule
//! names: a body made only of digit tokens is a numeral, a body starting
//! with `(` is a parenthesized value, and anything else is read as
//! `value (op value)*` folded from the left. Division by zero yields no
//! value, which then propagates upwards.

use std::fmt::{self, Display};
use std::marker::PhantomData;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num};
use serde::{Serialize, Serializer};

use crate::grammar::{Grammar, InputText, RuleId, Token};
use crate::parser::ParseContext;
use crate::semantic::{semantic_parse, SemanticAction};
use crate::text::parse_grammar_text;
use crate::tree::{Node, TraceTree};

/// Sums and products with right-nested operators, plus `-` and `/`.
pub const FORD_GRAMMAR: &str = include_str!("../grammars/ford.peg");

/// The classic sums-and-products grammar with only `+` and `*`.
pub const CLASSIC_GRAMMAR: &str = include_str!("../grammars/classic.peg");

/// Left-associative arithmetic; the grammar the demo evaluates with.
pub const CALC_GRAMMAR: &str = include_str!("../grammars/calc.peg");

/// `((...(d*d)*...)*d` with `k` multiplications, using the digits
/// `k+1, k, ..., 1` cyclically.
pub fn nested_product(k: usize) -> String {
    let digit = |i: usize| char::from(b'0' + (i % 10) as u8);
    let mut text = "(".repeat(k.saturating_sub(1));
    text.push(digit(k + 1));
    for i in (1..=k).rev() {
        text.push('*');
        text.push(digit(i));
        if i > 1 {
            text.push(')');
        }
    }
    text
}

/// A value, or `None` after a division by zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArithValue<T>(pub Option<T>);

impl<T: Display> Serialize for ArithValue<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match &self.0 {
            Some(v) => ser.collect_str(v),
            None => ser.serialize_none(),
        }
    }
}

impl<T: Display> Display for ArithValue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(v) => v.fmt(f),
            None => f.write_str("undefined"),
        }
    }
}

/// Evaluates arithmetic over any numeric type.
pub struct ArithAction<T>(PhantomData<fn() -> T>);

pub type RationalArith = ArithAction<BigRational>;

impl<T> ArithAction<T> {
    pub fn new() -> Self {
        ArithAction(PhantomData)
    }
}

impl<T> Default for ArithAction<T> {
    fn default() -> Self {
        Self::new()
    }
}

enum Item<T> {
    Tok(Token),
    Val(Option<T>),
}

fn flatten<T: Clone>(t: &TraceTree<ArithValue<T>>, out: &mut Vec<Item<T>>) {
    match &t.node {
        Node::Terminal { expected, .. } if t.end == t.start + 1 => out.push(Item::Tok(*expected)),
        Node::Any { got: Some(x) } if t.end == t.start + 1 => out.push(Item::Tok(*x)),
        Node::Semantic { value, .. } => out.push(Item::Val(value.0.clone())),
        // lookahead and failed attempts consume nothing
        Node::Not { .. } | Node::Fail | Node::Skip(_) => {}
        _ => t.children().into_iter().for_each(|c| flatten(c, out)),
    }
}

impl<T: Num + Clone + FromPrimitive> ArithAction<T> {
    fn numeral(items: &[Item<T>]) -> Option<T> {
        let ten = T::from_u8(10)?;
        items.iter().try_fold(T::zero(), |acc, item| match item {
            Item::Tok(d @ b'0'..=b'9') => Some(acc * ten.clone() + T::from_u8(d - b'0')?),
            _ => None,
        })
    }

    fn combine(op: Token, a: T, b: T) -> Option<T> {
        match op {
            b'+' => Some(a + b),
            b'-' => Some(a - b),
            b'*' => Some(a * b),
            b'/' if b.is_zero() => None,
            b'/' => Some(a / b),
            _ => None,
        }
    }

    fn eval(items: &[Item<T>]) -> Option<T> {
        match items {
            [] => None,
            [Item::Tok(b'('), Item::Val(v), Item::Tok(b')')] => v.clone(),
            [Item::Tok(_), ..] => Self::numeral(items),
            [Item::Val(first), rest @ ..] => {
                let mut acc = first.clone()?;
                for pair in rest.chunks(2) {
                    match pair {
                        [Item::Tok(op), Item::Val(v)] => acc = Self::combine(*op, acc, v.clone()?)?,
                        _ => return None,
                    }
                }
                Some(acc)
            }
        }
    }
}

impl<T: Num + Clone + FromPrimitive> SemanticAction for ArithAction<T> {
    type Value = ArithValue<T>;

    fn apply(&self, _rule: RuleId, body: &TraceTree<ArithValue<T>>) -> ArithValue<T> {
        let mut items = Vec::new();
        flatten(body, &mut items);
        ArithValue(Self::eval(&items))
    }
}

/// Result of evaluating a text against an arithmetic grammar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evaluation<T> {
    Value(T),
    DivisionByZero,
    /// The start symbol failed, or did not consume the whole input.
    NoParse { consumed: usize },
}

/// Parses the grammar text once; panics if it is not a well-formed
/// grammar, which is only possible for a caller-supplied text.
pub fn load(text: &str) -> Grammar {
    let g = parse_grammar_text(text).expect("arithmetic grammar text");
    assert!(crate::analysis::grammar_wellformed(&g).verdict, "arithmetic grammar is ill-formed");
    g
}

pub fn evaluate_with<T>(g: &Grammar, input: &[Token]) -> Evaluation<T>
where
    T: Num + Clone + FromPrimitive,
{
    let ctx = ParseContext::new(g, InputText::new(input.to_vec())).expect("well-formed grammar");
    let t = semantic_parse(&ctx, &ArithAction::<T>::new());
    match t.node {
        Node::Semantic { value, .. } if t.end == input.len() => match value.0 {
            Some(v) => Evaluation::Value(v),
            None => Evaluation::DivisionByZero,
        },
        _ => Evaluation::NoParse { consumed: t.end },
    }
}

/// Exact evaluation with the left-associative grammar.
pub fn evaluate(text: &str) -> Evaluation<BigRational> {
    evaluate_with(&load(CALC_GRAMMAR), text.as_bytes())
}

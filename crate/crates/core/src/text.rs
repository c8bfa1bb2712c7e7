//! Textual grammar format.
//!
//! ```text
//! # comment
//! Sum  <- Prod (('+' / '-') Prod)*
//! Num  <- [0-9]+
//! %order Sum > Num
//! ```
//!
//! One rule per line. `.` is any token, `'x'`/`"xy"` literals, `[a-z0-9]`
//! ranges, `()` or `ε` the empty expression, juxtaposition sequences, `/`
//! ordered choice (lowest precedence, right associative), postfix `* + ?`
//! and prefix `! &`. The first rule is the start symbol. Without `%order`,
//! later rules are smaller in the nonterminal order.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::GrammarError;
use crate::grammar::{desugar, is_permutation, Expr, ExtendedExpr, Grammar, Rule, RuleId, Token};

/// Parses a grammar file.
pub fn parse_grammar_text(source: &str) -> Result<Grammar, GrammarError> {
    struct Pending<'a> {
        name: &'a str,
        line: usize,
        body: &'a str,
        column: usize,
    }

    let mut pending = Vec::new();
    let mut order: Option<(usize, Vec<String>)> = None;
    let mut index: HashMap<&str, RuleId> = HashMap::new();

    for (lineno, raw) in source.lines().enumerate() {
        let line = lineno + 1;
        let mut cur = Cursor::new(raw, line, 1);
        cur.skip_ws();
        if cur.at_end() {
            continue;
        }
        if cur.eat_str("%order") {
            if order.is_some() {
                return Err(GrammarError::BadOrder { line });
            }
            let mut names = Vec::new();
            loop {
                cur.skip_ws();
                let name = cur.ident().ok_or_else(|| cur.error("expected rule name"))?;
                names.push(name.to_string());
                cur.skip_ws();
                if cur.at_end() {
                    break;
                }
                if !cur.eat('>') {
                    return Err(cur.error("expected `>` in %order"));
                }
            }
            order = Some((line, names));
            continue;
        }
        let name = cur.ident().ok_or_else(|| cur.error("expected rule name"))?;
        cur.skip_ws();
        if !cur.eat_str("<-") {
            return Err(cur.error("expected `<-`"));
        }
        if index.insert(name, pending.len()).is_some() {
            return Err(GrammarError::DuplicateRule { name: name.to_string(), line });
        }
        let (body, column) = cur.rest();
        pending.push(Pending { name, line, body, column });
    }

    if pending.is_empty() {
        return Err(GrammarError::NoRules);
    }

    let mut rules = Vec::with_capacity(pending.len());
    for p in &pending {
        let resolve = |name: &str| index.get(name).copied();
        let ext = parse_body(p.body, p.line, p.column, &resolve)?;
        rules.push(Rule { name: p.name.to_string(), body: desugar(&ext) });
    }

    let count = rules.len();
    let rank = match order {
        None => (0..count).map(|i| count - 1 - i).collect(),
        Some((line, names)) => {
            let mut rank = vec![usize::MAX; count];
            if names.len() != count {
                return Err(GrammarError::BadOrder { line });
            }
            for (pos, name) in names.iter().enumerate() {
                let id = *index.get(name.as_str()).ok_or(GrammarError::BadOrder { line })?;
                rank[id] = count - 1 - pos;
            }
            if !is_permutation(&rank, count) {
                return Err(GrammarError::BadOrder { line });
            }
            rank
        }
    };
    Grammar::with_rank(rules, 0, rank)
}

/// Parses a single expression, resolving names against `grammar`.
pub fn parse_expr_text(text: &str, grammar: &Grammar) -> Result<Expr, GrammarError> {
    let resolve = |name: &str| grammar.lookup(name);
    parse_body(text, 1, 1, &resolve).map(|e| desugar(&e))
}

fn parse_body(
    text: &str,
    line: usize,
    column: usize,
    resolve: &dyn Fn(&str) -> Option<RuleId>,
) -> Result<ExtendedExpr, GrammarError> {
    let mut p = ExprParser { cur: Cursor::new(text, line, column), resolve };
    let e = p.choice()?;
    p.cur.skip_ws();
    if !p.cur.at_end() {
        return Err(p.cur.error("unexpected character"));
    }
    Ok(e)
}

/// Serializes a grammar in the text format. Deterministic; always emits an
/// explicit `%order` line.
pub fn pretty_print(g: &Grammar) -> String {
    let mut out = String::new();
    for rule in g.rules() {
        let _ = writeln!(out, "{} <- {}", rule.name, print_expr(&rule.body, g));
    }
    let mut by_rank: Vec<RuleId> = (0..g.len()).collect();
    by_rank.sort_by(|a, b| g.rank()[*b].cmp(&g.rank()[*a]));
    let names: Vec<&str> = by_rank.iter().map(|&id| g.name(id)).collect();
    let _ = writeln!(out, "%order {}", names.join(" > "));
    out
}

/// Prints a core expression with minimal parentheses; parsing the result
/// gives back the same expression.
pub fn print_expr(e: &Expr, g: &Grammar) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, g, 0);
    out
}

// precedence levels: choice 0, sequence 1, prefix 2, suffix 3, primary 4
fn write_expr(out: &mut String, e: &Expr, g: &Grammar, ctx: u8) {
    let level = match e {
        Expr::Prior(..) => 0,
        Expr::Seq(..) => 1,
        Expr::NotP(_) => 2,
        Expr::Star(_) => 3,
        _ => 4,
    };
    let paren = level < ctx;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Empty => out.push_str("()"),
        Expr::Any => out.push('.'),
        Expr::Terminal(t) => out.push_str(&token_literal(*t)),
        Expr::NonTerminal(id) => out.push_str(g.name(*id)),
        Expr::Prior(a, b) => {
            write_expr(out, a, g, 1);
            out.push_str(" / ");
            write_expr(out, b, g, 0);
        }
        Expr::Seq(a, b) => {
            write_expr(out, a, g, 2);
            out.push(' ');
            write_expr(out, b, g, 1);
        }
        Expr::NotP(inner) => {
            out.push('!');
            write_expr(out, inner, g, 2);
        }
        Expr::Star(inner) => {
            write_expr(out, inner, g, 3);
            out.push('*');
        }
    }
    if paren {
        out.push(')');
    }
}

/// A quoted single-token literal, escaping anything outside printable ASCII.
pub fn token_literal(t: Token) -> String {
    match t {
        b'\'' => "'\\''".to_string(),
        b'\\' => "'\\\\'".to_string(),
        b'\n' => "'\\n'".to_string(),
        b'\r' => "'\\r'".to_string(),
        b'\t' => "'\\t'".to_string(),
        0x20..=0x7e => format!("'{}'", t as char),
        _ => format!("'\\x{t:02x}'"),
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize, column: usize) -> Self {
        Cursor { src, pos: 0, line, column }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        self.column += 1;
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        if self.src[self.pos..].starts_with(s) {
            for _ in s.chars() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                self.pos = self.src.len();
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        Some(&self.src[start..self.pos])
    }

    fn rest(&self) -> (&'a str, usize) {
        (&self.src[self.pos..], self.column)
    }

    fn error(&self, message: &str) -> GrammarError {
        GrammarError::Syntax { line: self.line, column: self.column, message: message.to_string() }
    }
}

struct ExprParser<'a, 'r> {
    cur: Cursor<'a>,
    resolve: &'r dyn Fn(&str) -> Option<RuleId>,
}

impl ExprParser<'_, '_> {
    fn choice(&mut self) -> Result<ExtendedExpr, GrammarError> {
        let left = self.sequence()?;
        self.cur.skip_ws();
        if self.cur.eat('/') {
            let right = self.choice()?;
            Ok(ExtendedExpr::Prior(Box::new(left), Box::new(right)))
        } else {
            Ok(left)
        }
    }

    fn sequence(&mut self) -> Result<ExtendedExpr, GrammarError> {
        let mut items = Vec::new();
        loop {
            self.cur.skip_ws();
            match self.cur.peek() {
                None | Some('/') | Some(')') => break,
                _ => items.push(self.prefixed()?),
            }
        }
        let last = items.pop().ok_or_else(|| self.cur.error("expected expression"))?;
        Ok(items
            .into_iter()
            .rev()
            .fold(last, |acc, e| ExtendedExpr::Seq(Box::new(e), Box::new(acc))))
    }

    fn prefixed(&mut self) -> Result<ExtendedExpr, GrammarError> {
        self.cur.skip_ws();
        if self.cur.eat('!') {
            Ok(ExtendedExpr::NotP(Box::new(self.prefixed()?)))
        } else if self.cur.eat('&') {
            Ok(ExtendedExpr::AndP(Box::new(self.prefixed()?)))
        } else {
            self.suffixed()
        }
    }

    fn suffixed(&mut self) -> Result<ExtendedExpr, GrammarError> {
        let mut e = self.primary()?;
        loop {
            if self.cur.eat('*') {
                e = ExtendedExpr::Star(Box::new(e));
            } else if self.cur.eat('+') {
                e = ExtendedExpr::Plus(Box::new(e));
            } else if self.cur.eat('?') {
                e = ExtendedExpr::Optional(Box::new(e));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<ExtendedExpr, GrammarError> {
        self.cur.skip_ws();
        let Some(c) = self.cur.peek() else {
            return Err(self.cur.error("expected expression"));
        };
        match c {
            '.' => {
                self.cur.bump();
                Ok(ExtendedExpr::Any)
            }
            'ε' => {
                self.cur.bump();
                Ok(ExtendedExpr::Empty)
            }
            '(' => {
                self.cur.bump();
                self.cur.skip_ws();
                if self.cur.eat(')') {
                    return Ok(ExtendedExpr::Empty);
                }
                let e = self.choice()?;
                self.cur.skip_ws();
                if !self.cur.eat(')') {
                    return Err(self.cur.error("expected `)`"));
                }
                Ok(e)
            }
            '\'' | '"' => self.literal(c),
            '[' => self.class(),
            c if c.is_ascii_alphabetic() || c == '_' => {
                let line = self.cur.line;
                let name = self.cur.ident().unwrap_or_default();
                match (self.resolve)(name) {
                    Some(id) => Ok(ExtendedExpr::NonTerminal(id)),
                    None => Err(GrammarError::Undeclared { name: name.to_string(), line }),
                }
            }
            _ => Err(self.cur.error("unexpected character")),
        }
    }

    fn literal(&mut self, quote: char) -> Result<ExtendedExpr, GrammarError> {
        self.cur.bump();
        let mut tokens = Vec::new();
        loop {
            match self.cur.peek() {
                None => return Err(self.cur.error("unterminated literal")),
                Some(c) if c == quote => {
                    self.cur.bump();
                    break;
                }
                Some('\\') => tokens.push(self.escape()?),
                Some(c) => {
                    self.cur.bump();
                    let mut buf = [0u8; 4];
                    tokens.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                }
            }
        }
        match tokens.len() {
            0 => Err(self.cur.error("empty literal; use () for the empty expression")),
            1 => Ok(ExtendedExpr::Terminal(tokens[0])),
            _ => Ok(ExtendedExpr::Literal(tokens)),
        }
    }

    fn class(&mut self) -> Result<ExtendedExpr, GrammarError> {
        self.cur.bump();
        let mut ranges = Vec::new();
        loop {
            let lo = match self.cur.peek() {
                None => return Err(self.cur.error("unterminated class")),
                Some(']') => {
                    self.cur.bump();
                    break;
                }
                _ => self.class_token()?,
            };
            let hi = if self.cur.peek() == Some('-')
                && !self.cur.src[self.cur.pos + 1..].starts_with(']')
            {
                self.cur.bump();
                self.class_token()?
            } else {
                lo
            };
            if lo > hi {
                return Err(self.cur.error("range bounds out of order"));
            }
            ranges.push(ExtendedExpr::Range(lo, hi));
        }
        let last = ranges.pop().ok_or_else(|| self.cur.error("empty class"))?;
        Ok(ranges
            .into_iter()
            .rev()
            .fold(last, |acc, r| ExtendedExpr::Prior(Box::new(r), Box::new(acc))))
    }

    fn class_token(&mut self) -> Result<Token, GrammarError> {
        match self.cur.peek() {
            Some('\\') => self.escape(),
            Some(c) if c.is_ascii() => {
                self.cur.bump();
                Ok(c as u8)
            }
            _ => Err(self.cur.error("class members must be single bytes")),
        }
    }

    fn escape(&mut self) -> Result<Token, GrammarError> {
        self.cur.bump();
        let c = self.cur.bump().ok_or_else(|| self.cur.error("dangling escape"))?;
        Ok(match c {
            'n' => b'\n',
            'r' => b'\r',
            't' => b'\t',
            '0' => 0,
            'x' => {
                let hex: String = (0..2).filter_map(|_| self.cur.bump()).collect();
                u8::from_str_radix(&hex, 16).map_err(|_| self.cur.error("bad \\x escape"))?
            }
            c if c.is_ascii_punctuation() => c as u8,
            _ => return Err(self.cur.error("unknown escape")),
        })
    }
}

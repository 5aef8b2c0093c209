//! Recursive-descent parser for Ariel scripts.
//!
//! ```text
//! program  := clause*
//! clause   := IF guard THEN stmt* [ELSE stmt*] FI
//! stmt     := clause | action
//! action   := ALARM [LOCAL|GLOBAL] | EMIT tag '(' value {',' value} ')'
//!           | ISOLATE entity | SET_PRIORITY entity int | SET_PARAM name value
//!           | CALL name | SET_VOTE_THRESHOLD int
//! guard    := and {OR and}
//! and      := unary {AND unary}
//! unary    := NOT unary | atom
//! atom     := TRUE | FALSE | '(' guard ')'
//!           | '[' [FORALL|EXISTS] class [var] ':' guard ']'
//!           | (FORALL|EXISTS) class [var] [':'] guard
//!           | (DOWN|ISOLATED) [selector]
//!           | metric [selector] relop number['%']
//! ```
//!
//! A bracketed quantifier without FORALL/EXISTS is existential. An
//! unbracketed quantifier's body extends as far right as possible. A
//! comparison or status test without a selector refers to the innermost bound
//! variable. Comments run from `//` to end of line.

use std::collections::BTreeSet;

use thiserror::Error;

use super::ast::*;
use crate::tuple_space::{to_milli, EntityKind, EntityRef, Value, QOS_METRICS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown metric `{name}`")]
    UnknownMetric { line: usize, col: usize, name: String },
    #[error("{line}:{col}: unknown action `{name}`")]
    UnknownAction { line: usize, col: usize, name: String },
}

/// Metric names accepted in guards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: BTreeSet<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            names: QOS_METRICS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Vocabulary {
    pub fn with(mut self, name: impl Into<String>) -> Self {
        self.names.insert(name.into().to_ascii_lowercase());
        self
    }

    pub fn extend<I: IntoIterator<Item = S>, S: Into<String>>(&mut self, names: I) {
        for n in names {
            self.names.insert(n.into().to_ascii_lowercase());
        }
    }

    /// Canonical name for an identifier, honoring the short aliases.
    pub fn resolve(&self, ident: &str) -> Option<String> {
        let lower = ident.to_ascii_lowercase();
        if self.names.contains(&lower) {
            return Some(lower);
        }
        let alias = match lower.as_str() {
            "cpu" | "cpu_usage" => "cpu_usage_pct",
            "energy" => "energy_pct",
            _ => return None,
        };
        self.names.contains(alias).then(|| alias.to_string())
    }
}

pub fn parse(source: &str) -> Result<ArielAst, ParseError> {
    parse_with(source, &Vocabulary::default())
}

pub fn parse_with(source: &str, vocab: &Vocabulary) -> Result<ArielAst, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        vocab,
        scopes: Vec::new(),
    };
    let mut clauses = Vec::new();
    while !p.at_end() {
        clauses.push(p.clause()?);
    }
    Ok(ArielAst { clauses })
}

/// Parses a standalone guard expression (scenario predicates).
pub fn parse_guard(source: &str, vocab: &Vocabulary) -> Result<GuardExpr, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        vocab,
        scopes: Vec::new(),
    };
    let g = p.guard()?;
    if !p.at_end() {
        return Err(p.error_here("trailing input after guard"));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Entity(EntityRef),
    Number(f64, bool),
    Str(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Colon,
    Comma,
    Rel(RelOp),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let single = match c {
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '≤' => Some(Tok::Rel(RelOp::Le)),
            '≥' => Some(Tok::Rel(RelOp::Ge)),
            '≠' => Some(Tok::Rel(RelOp::Ne)),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line: tl, col: tc });
            advance(1, &mut i, &mut col);
            continue;
        }
        if matches!(c, '<' | '>' | '=' | '!') {
            let next = chars.get(i + 1).copied();
            let (op, len) = match (c, next) {
                ('<', Some('=')) => (RelOp::Le, 2),
                ('<', Some('>')) => (RelOp::Ne, 2),
                ('<', _) => (RelOp::Lt, 1),
                ('>', Some('=')) => (RelOp::Ge, 2),
                ('>', _) => (RelOp::Gt, 1),
                ('=', Some('=')) => (RelOp::Eq, 2),
                ('=', _) => (RelOp::Eq, 1),
                ('!', Some('=')) => (RelOp::Ne, 2),
                _ => return Err(err(tl, tc, "stray `!`".into())),
            };
            out.push(Token {
                tok: Tok::Rel(op),
                line: tl,
                col: tc,
            });
            advance(len, &mut i, &mut col);
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated string".into())),
                    Some('"') => break,
                    Some('\\') => {
                        match chars.get(j + 1) {
                            Some('n') => s.push('\n'),
                            Some(&ch) => s.push(ch),
                            None => return Err(err(tl, tc, "unterminated string".into())),
                        }
                        j += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        j += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            advance(j + 1 - i, &mut i, &mut col);
            continue;
        }
        let starts_number =
            c.is_ascii_digit() || ((c == '-' || c == '.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if starts_number {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| err(tl, tc, format!("malformed number `{text}`")))?;
            let integral = !text.contains('.');
            if chars.get(j) == Some(&'%') {
                j += 1;
            }
            out.push(Token {
                tok: Tok::Number(value, integral),
                line: tl,
                col: tc,
            });
            advance(j - i, &mut i, &mut col);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            if chars.get(j) == Some(&'#') {
                let mut k = j + 1;
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                let text: String = chars[i..k].iter().collect();
                let e: EntityRef = text.parse().map_err(|m: String| err(tl, tc, m))?;
                out.push(Token {
                    tok: Tok::Entity(e),
                    line: tl,
                    col: tc,
                });
                advance(k - i, &mut i, &mut col);
            } else {
                out.push(Token {
                    tok: Tok::Word(word),
                    line: tl,
                    col: tc,
                });
                advance(j - i, &mut i, &mut col);
            }
            continue;
        }
        return Err(err(tl, tc, format!("unexpected character `{c}`")));
    }
    out.push(Token {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "IF",
    "THEN",
    "ELSE",
    "FI",
    "AND",
    "OR",
    "NOT",
    "TRUE",
    "FALSE",
    "FORALL",
    "EXISTS",
    "DOWN",
    "ISOLATED",
    "STATION",
    "ACCESSPOINT",
    "TASK",
    "GROUP",
    "LOCAL",
    "GLOBAL",
];

const ACTIONS: &[&str] = &[
    "ALARM",
    "EMIT",
    "ISOLATE",
    "SET_PRIORITY",
    "SET_PARAM",
    "CALL",
    "SET_VOTE_THRESHOLD",
];

fn is_keyword(w: &str) -> bool {
    let up = w.to_ascii_uppercase();
    KEYWORDS.contains(&up.as_str()) || ACTIONS.contains(&up.as_str())
}

struct Parser<'v> {
    tokens: Vec<Token>,
    pos: usize,
    vocab: &'v Vocabulary,
    scopes: Vec<String>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn at_end(&self) -> bool {
        matches!(self.peek(), Tok::End)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, msg: impl Into<String>) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected {kw}, found {}", describe(self.peek()))))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn clause(&mut self) -> Result<GuardedAction, ParseError> {
        if !self.is_kw("IF") {
            return Err(self.error_here(format!(
                "expected IF, found {} (guarded actions are the only control structure)",
                describe(self.peek())
            )));
        }
        self.bump();
        let guard = self.guard()?;
        self.expect_kw("THEN")?;
        let then_branch = self.stmts()?;
        let else_branch = if self.eat_kw("ELSE") { self.stmts()? } else { Vec::new() };
        self.expect_kw("FI")?;
        Ok(GuardedAction {
            guard,
            then_branch,
            else_branch,
        })
    }

    fn stmts(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        loop {
            if self.is_kw("ELSE") || self.is_kw("FI") {
                return Ok(out);
            }
            if self.is_kw("IF") {
                out.push(Stmt::Clause(self.clause()?));
                continue;
            }
            out.push(Stmt::Action(self.action()?));
        }
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        let tok = self.bump();
        let word = match &tok.tok {
            Tok::Word(w) => w.to_ascii_uppercase(),
            Tok::End => {
                return Err(ParseError::Syntax {
                    line: tok.line,
                    col: tok.col,
                    msg: "unexpected end of input, expected FI".into(),
                })
            }
            other => {
                return Err(ParseError::Syntax {
                    line: tok.line,
                    col: tok.col,
                    msg: format!("expected an action, found {}", describe(other)),
                })
            }
        };
        match word.as_str() {
            "ALARM" => {
                let scope = if self.eat_kw("LOCAL") {
                    Scope::Local
                } else {
                    self.eat_kw("GLOBAL");
                    Scope::Global
                };
                Ok(Action::Alarm(scope))
            }
            "EMIT" => {
                let tag = self.name("tuple tag")?;
                self.expect(Tok::LParen, "`(`")?;
                let mut values = vec![self.literal()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    values.push(self.literal()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(Action::Emit { tag, values })
            }
            "ISOLATE" => Ok(Action::Isolate(self.entity()?)),
            "SET_PRIORITY" => {
                let task = self.entity()?;
                if task.kind != EntityKind::Task {
                    return Err(self.error_here("SET_PRIORITY expects a task"));
                }
                let level = self.integer()?;
                Ok(Action::SetPriority { task, level })
            }
            "SET_PARAM" => {
                let name = self.name("parameter name")?;
                let value = self.literal()?;
                Ok(Action::SetParam { name, value })
            }
            "CALL" => Ok(Action::Call(self.name("method name")?)),
            "SET_VOTE_THRESHOLD" => {
                let m = self.integer()?;
                if m < 1 {
                    return Err(self.error_here("vote threshold must be at least 1"));
                }
                Ok(Action::SetVoteThreshold(m))
            }
            _ => Err(ParseError::UnknownAction {
                line: tok.line,
                col: tok.col,
                name: match tok.tok {
                    Tok::Word(w) => w,
                    _ => unreachable!(),
                },
            }),
        }
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) if !is_keyword(&w) => {
                self.bump();
                Ok(w)
            }
            Tok::Str(s) if !s.is_empty() => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error_here(format!("expected {what}, found {}", describe(&other)))),
        }
    }

    fn entity(&mut self) -> Result<EntityRef, ParseError> {
        match *self.peek() {
            Tok::Entity(e) => {
                self.bump();
                Ok(e)
            }
            ref other => Err(self.error_here(format!("expected entity reference, found {}", describe(other)))),
        }
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        match *self.peek() {
            Tok::Number(v, true) if v.abs() < 9.0e15 => {
                self.bump();
                Ok(v as i64)
            }
            ref other => Err(self.error_here(format!("expected integer, found {}", describe(other)))),
        }
    }

    fn literal(&mut self) -> Result<Value, ParseError> {
        let v = match self.peek().clone() {
            Tok::Number(v, true) if v.abs() < 9.0e15 => Value::Int(v as i64),
            Tok::Number(v, _) => Value::Real(v),
            Tok::Str(s) => Value::Text(s),
            Tok::Entity(e) => Value::Entity(e),
            Tok::Word(w) if w.eq_ignore_ascii_case("TRUE") => Value::Bool(true),
            Tok::Word(w) if w.eq_ignore_ascii_case("FALSE") => Value::Bool(false),
            other => return Err(self.error_here(format!("expected a value, found {}", describe(&other)))),
        };
        self.bump();
        Ok(v)
    }

    fn guard(&mut self) -> Result<GuardExpr, ParseError> {
        let mut lhs = self.conj()?;
        while self.eat_kw("OR") {
            let rhs = self.conj()?;
            lhs = GuardExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<GuardExpr, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat_kw("AND") {
            let rhs = self.unary()?;
            lhs = GuardExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<GuardExpr, ParseError> {
        if self.eat_kw("NOT") {
            return Ok(GuardExpr::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<GuardExpr, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let g = self.guard()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(g)
            }
            Tok::LBracket => {
                self.bump();
                let quantifier = if self.eat_kw("FORALL") {
                    Quantifier::ForAll
                } else {
                    self.eat_kw("EXISTS");
                    Quantifier::Exists
                };
                let g = self.quantified(quantifier, true)?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(g)
            }
            Tok::Word(w) => {
                let up = w.to_ascii_uppercase();
                match up.as_str() {
                    "TRUE" => {
                        self.bump();
                        Ok(GuardExpr::True)
                    }
                    "FALSE" => {
                        self.bump();
                        Ok(GuardExpr::False)
                    }
                    "FORALL" => {
                        self.bump();
                        self.quantified(Quantifier::ForAll, false)
                    }
                    "EXISTS" => {
                        self.bump();
                        self.quantified(Quantifier::Exists, false)
                    }
                    "DOWN" | "ISOLATED" => {
                        self.bump();
                        let test = if up == "DOWN" {
                            StatusTest::Down
                        } else {
                            StatusTest::Isolated
                        };
                        let subject = self.selector()?;
                        Ok(GuardExpr::Status { subject, test })
                    }
                    _ if is_keyword(&w) => Err(self.error_here(format!("unexpected keyword {up} in guard"))),
                    _ => self.comparison(),
                }
            }
            other => Err(self.error_here(format!("expected a guard, found {}", describe(&other)))),
        }
    }

    fn quantified(&mut self, quantifier: Quantifier, bracketed: bool) -> Result<GuardExpr, ParseError> {
        let class = match self.peek().clone() {
            Tok::Word(w) => w.parse::<EntityKind>().ok().filter(|_| {
                matches!(
                    w.to_ascii_uppercase().as_str(),
                    "STATION" | "ACCESSPOINT" | "TASK" | "GROUP"
                )
            }),
            _ => None,
        };
        let Some(class) = class else {
            return Err(self.error_here("expected STATION, ACCESSPOINT, TASK or GROUP"));
        };
        self.bump();
        let depth = self.scopes.len();
        let var = match self.peek().clone() {
            Tok::Word(w) if !is_keyword(&w) && matches!(self.peek_at(1), Tok::Colon) => {
                self.bump();
                w
            }
            Tok::Word(w) if !bracketed && !is_keyword(&w) && self.vocab.resolve(&w).is_none() => {
                self.bump();
                w
            }
            _ => default_var(class, depth),
        };
        if bracketed {
            self.expect(Tok::Colon, "`:`")?;
        } else if *self.peek() == Tok::Colon {
            self.bump();
        }
        self.scopes.push(var.clone());
        let body = self.guard();
        self.scopes.pop();
        Ok(GuardExpr::Quant {
            quantifier,
            class,
            var,
            body: Box::new(body?),
        })
    }

    /// Optional selector; falls back to the innermost bound variable.
    fn selector(&mut self) -> Result<Selector, ParseError> {
        match self.peek().clone() {
            Tok::Entity(e) => {
                self.bump();
                Ok(Selector::Entity(e))
            }
            Tok::Word(w) if !is_keyword(&w) => match self.scopes.iter().rposition(|v| *v == w) {
                Some(depth) => {
                    self.bump();
                    Ok(Selector::Bound(depth))
                }
                None => Err(self.error_here(format!("unbound variable `{w}`"))),
            },
            _ => {
                if self.scopes.is_empty() {
                    Err(self.error_here("no quantifier in scope; name an entity such as station#1"))
                } else {
                    Ok(Selector::Bound(self.scopes.len() - 1))
                }
            }
        }
    }

    fn comparison(&mut self) -> Result<GuardExpr, ParseError> {
        let tok = self.bump();
        let Tok::Word(word) = tok.tok else {
            unreachable!("comparison starts with a word")
        };
        let metric = self.vocab.resolve(&word).ok_or(ParseError::UnknownMetric {
            line: tok.line,
            col: tok.col,
            name: word.clone(),
        })?;
        let subject = self.selector()?;
        let op = match *self.peek() {
            Tok::Rel(op) => {
                self.bump();
                op
            }
            ref other => {
                return Err(self.error_here(format!("expected comparison operator, found {}", describe(other))))
            }
        };
        let milli = match *self.peek() {
            Tok::Number(v, _) => {
                let m = to_milli(v).ok_or_else(|| self.error_here("constant out of range"))?;
                self.bump();
                m
            }
            ref other => return Err(self.error_here(format!("expected number, found {}", describe(other)))),
        };
        Ok(GuardExpr::Compare {
            subject,
            metric,
            op,
            milli,
        })
    }
}

fn default_var(class: EntityKind, depth: usize) -> String {
    let base = match class {
        EntityKind::Station => "s",
        EntityKind::AccessPoint => "a",
        EntityKind::Task => "t",
        EntityKind::Group => "g",
    };
    if depth == 0 {
        base.to_string()
    } else {
        format!("{base}{depth}")
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Entity(e) => format!("`{e}`"),
        Tok::Number(v, _) => format!("number {v}"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Colon => "`:`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Rel(op) => format!("`{}`", op.symbol()),
        Tok::End => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exists_down_alarm() {
        let ast = parse("IF [STATION s: DOWN s] THEN ALARM FI").unwrap();
        assert_eq!(ast.clauses.len(), 1);
        let c = &ast.clauses[0];
        assert_eq!(
            c.guard,
            GuardExpr::Quant {
                quantifier: Quantifier::Exists,
                class: EntityKind::Station,
                var: "s".into(),
                body: Box::new(GuardExpr::Status {
                    subject: Selector::Bound(0),
                    test: StatusTest::Down
                }),
            }
        );
        assert_eq!(c.then_branch, vec![Stmt::Action(Action::Alarm(Scope::Global))]);
        assert!(c.else_branch.is_empty());
    }

    #[test]
    fn empty_source_is_empty_program() {
        assert_eq!(parse("").unwrap().clauses.len(), 0);
        assert_eq!(parse("  // nothing here\n").unwrap().clauses.len(), 0);
    }

    #[test]
    fn loops_are_rejected() {
        let e = parse("WHILE x DO").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 1, col: 1, .. }), "{e}");
    }

    #[test]
    fn unknown_metric_and_action() {
        let e = parse("IF [STATION s: BOGUS s < 3] THEN ALARM FI").unwrap_err();
        assert_eq!(
            e,
            ParseError::UnknownMetric {
                line: 1,
                col: 16,
                name: "BOGUS".into()
            }
        );
        let e = parse("IF TRUE THEN\n  REBOOT\nFI").unwrap_err();
        assert_eq!(
            e,
            ParseError::UnknownAction {
                line: 2,
                col: 3,
                name: "REBOOT".into()
            }
        );
    }

    #[test]
    fn unbracketed_quantifier_takes_whole_conjunction() {
        let vocab = Vocabulary::default();
        let g = parse_guard("FORALL STATION: Energy > 40 AND CPU_Usage < 75%", &vocab).unwrap();
        let GuardExpr::Quant { quantifier, body, .. } = g else {
            panic!("expected quantifier")
        };
        assert_eq!(quantifier, Quantifier::ForAll);
        let GuardExpr::And(a, b) = *body else {
            panic!("expected conjunction")
        };
        assert_eq!(
            *a,
            GuardExpr::Compare {
                subject: Selector::Bound(0),
                metric: "energy_pct".into(),
                op: RelOp::Gt,
                milli: 40_000
            }
        );
        assert!(matches!(
            *b,
            GuardExpr::Compare {
                op: RelOp::Lt,
                milli: 75_000,
                ..
            }
        ));
        let g2 = parse_guard("FORALL STATION CPU < 75", &vocab).unwrap();
        assert!(matches!(
            g2,
            GuardExpr::Quant {
                quantifier: Quantifier::ForAll,
                ..
            }
        ));
    }

    #[test]
    fn nested_scopes_resolve_by_depth() {
        let g = parse_guard(
            "[FORALL STATION s: [EXISTS TASK t: cpu_usage_pct s > 1 AND DOWN t]]",
            &Vocabulary::default(),
        )
        .unwrap();
        let GuardExpr::Quant { body, .. } = g else { panic!() };
        let GuardExpr::Quant { body, var, .. } = *body else {
            panic!()
        };
        assert_eq!(var, "t");
        let GuardExpr::And(a, b) = *body else { panic!() };
        assert!(matches!(
            *a,
            GuardExpr::Compare {
                subject: Selector::Bound(0),
                ..
            }
        ));
        assert!(matches!(
            *b,
            GuardExpr::Status {
                subject: Selector::Bound(1),
                ..
            }
        ));
    }

    #[test]
    fn selectors_need_scope() {
        assert!(parse_guard("cpu_usage_pct < 3", &Vocabulary::default()).is_err());
        assert!(parse_guard("cpu_usage_pct station#2 < 3", &Vocabulary::default()).is_ok());
        assert!(parse_guard("[STATION s: DOWN q]", &Vocabulary::default()).is_err());
    }

    #[test]
    fn actions_and_else() {
        let src = r#"
            IF NOT TRUE THEN
                ALARM LOCAL
            ELSE
                EMIT "route_cost" (station#1, 2.5, "x", TRUE)
                ISOLATE task#3
                SET_PRIORITY task#3 7
                SET_PARAM fec_level 2
                CALL reroute
                IF FALSE THEN SET_VOTE_THRESHOLD 2 FI
            FI"#;
        let ast = parse(src).unwrap();
        let c = &ast.clauses[0];
        assert_eq!(c.then_branch, vec![Stmt::Action(Action::Alarm(Scope::Local))]);
        assert_eq!(c.else_branch.len(), 6);
        assert_eq!(
            c.else_branch[0],
            Stmt::Action(Action::Emit {
                tag: "route_cost".into(),
                values: vec![
                    Value::Entity(EntityRef::station(1)),
                    Value::Real(2.5),
                    Value::text("x"),
                    Value::Bool(true)
                ]
            })
        );
        assert!(matches!(c.else_branch[5], Stmt::Clause(_)));
        assert!(parse("IF TRUE THEN SET_VOTE_THRESHOLD 0 FI").is_err());
        assert!(parse("IF TRUE THEN SET_PRIORITY station#1 3 FI").is_err());
        assert!(parse("IF TRUE THEN ALARM").is_err());
    }

    #[test]
    fn render_round_trips() {
        let vocab = Vocabulary::default();
        for src in [
            "FORALL STATION: Energy > 40 AND CPU < 75",
            "[STATION s: DOWN s] OR NOT (TRUE AND FALSE)",
            "[FORALL STATION s: [EXISTS TASK t: cpu_usage_pct s >= 1.25 OR ISOLATED t]]",
            "link_cost accesspoint#2 != -3",
        ] {
            let g = parse_guard(src, &vocab).unwrap();
            let again = parse_guard(&render_guard(&g), &vocab).unwrap();
            assert_eq!(g, again, "{src}");
        }
    }
}

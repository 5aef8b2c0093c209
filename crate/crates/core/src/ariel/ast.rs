use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tuple_space::{EntityKind, EntityRef, Value};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArielAst {
    pub clauses: Vec<GuardedAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardedAction {
    pub guard: GuardExpr,
    pub then_branch: Vec<Stmt>,
    pub else_branch: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    Action(Action),
    Clause(GuardedAction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl RelOp {
    pub fn apply(self, lhs: i64, rhs: i64) -> bool {
        match self {
            RelOp::Lt => lhs < rhs,
            RelOp::Le => lhs <= rhs,
            RelOp::Eq => lhs == rhs,
            RelOp::Ne => lhs != rhs,
            RelOp::Ge => lhs >= rhs,
            RelOp::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Eq => "=",
            RelOp::Ne => "!=",
            RelOp::Ge => ">=",
            RelOp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantifier {
    ForAll,
    Exists,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatusTest {
    Down,
    Isolated,
}

/// Which entity a comparison or status test looks at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selector {
    /// Variable bound by the quantifier at this nesting depth (0 = outermost).
    Bound(usize),
    Entity(EntityRef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GuardExpr {
    True,
    False,
    /// `metric <op> constant`, constant in thousandths.
    Compare {
        subject: Selector,
        metric: String,
        op: RelOp,
        milli: i64,
    },
    Status {
        subject: Selector,
        test: StatusTest,
    },
    Quant {
        quantifier: Quantifier,
        class: EntityKind,
        var: String,
        body: Box<GuardExpr>,
    },
    And(Box<GuardExpr>, Box<GuardExpr>),
    Or(Box<GuardExpr>, Box<GuardExpr>),
    Not(Box<GuardExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scope {
    Local,
    Global,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Local => "LOCAL",
            Scope::Global => "GLOBAL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Emit { tag: String, values: Vec<Value> },
    Alarm(Scope),
    Isolate(EntityRef),
    SetPriority { task: EntityRef, level: i64 },
    SetParam { name: String, value: Value },
    Call(String),
    SetVoteThreshold(i64),
}

fn class_keyword(k: EntityKind) -> &'static str {
    match k {
        EntityKind::Station => "STATION",
        EntityKind::AccessPoint => "ACCESSPOINT",
        EntityKind::Task => "TASK",
        EntityKind::Group => "GROUP",
    }
}

/// Renders a guard back to source form accepted by the parser.
pub fn render_guard(expr: &GuardExpr) -> String {
    let mut out = String::new();
    let mut vars = Vec::new();
    render(expr, &mut vars, &mut out, 0);
    out
}

fn render(expr: &GuardExpr, vars: &mut Vec<String>, out: &mut String, prec: u8) {
    let selector = |s: &Selector, vars: &Vec<String>| match s {
        Selector::Bound(d) => vars.get(*d).cloned().unwrap_or_else(|| format!("?{d}")),
        Selector::Entity(e) => e.to_string(),
    };
    match expr {
        GuardExpr::True => out.push_str("TRUE"),
        GuardExpr::False => out.push_str("FALSE"),
        GuardExpr::Compare {
            subject,
            metric,
            op,
            milli,
        } => {
            out.push_str(&format!(
                "{metric} {} {} {}",
                selector(subject, vars),
                op.symbol(),
                format_milli(*milli)
            ));
        }
        GuardExpr::Status { subject, test } => {
            let kw = match test {
                StatusTest::Down => "DOWN",
                StatusTest::Isolated => "ISOLATED",
            };
            out.push_str(&format!("{kw} {}", selector(subject, vars)));
        }
        GuardExpr::Quant {
            quantifier,
            class,
            var,
            body,
        } => {
            let q = match quantifier {
                Quantifier::ForAll => "FORALL",
                Quantifier::Exists => "EXISTS",
            };
            out.push_str(&format!("[{q} {} {var}: ", class_keyword(*class)));
            vars.push(var.clone());
            render(body, vars, out, 0);
            vars.pop();
            out.push(']');
        }
        GuardExpr::Or(a, b) => {
            if prec > 0 {
                out.push('(');
            }
            render(a, vars, out, 0);
            out.push_str(" OR ");
            render(b, vars, out, 1);
            if prec > 0 {
                out.push(')');
            }
        }
        GuardExpr::And(a, b) => {
            if prec > 1 {
                out.push('(');
            }
            render(a, vars, out, 1);
            out.push_str(" AND ");
            render(b, vars, out, 2);
            if prec > 1 {
                out.push(')');
            }
        }
        GuardExpr::Not(a) => {
            out.push_str("NOT ");
            render(a, vars, out, 2);
        }
    }
}

/// Formats a thousandths value with the shortest exact decimal expansion.
pub fn format_milli(milli: i64) -> String {
    let sign = if milli < 0 { "-" } else { "" };
    let abs = milli.unsigned_abs();
    let (whole, frac) = (abs / 1000, abs % 1000);
    if frac == 0 {
        format!("{sign}{whole}")
    } else {
        let digits = format!("{frac:03}");
        format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn milli_formatting() {
        assert_eq!(format_milli(75_000), "75");
        assert_eq!(format_milli(1_500), "1.5");
        assert_eq!(format_milli(-20), "-0.02");
        assert_eq!(format_milli(0), "0");
    }

    #[test]
    fn render_parenthesizes_by_precedence() {
        let cmp = |m: i64| GuardExpr::Compare {
            subject: Selector::Entity(EntityRef::station(1)),
            metric: "cpu_usage_pct".into(),
            op: RelOp::Lt,
            milli: m,
        };
        let e = GuardExpr::And(
            Box::new(GuardExpr::Or(Box::new(cmp(1000)), Box::new(GuardExpr::True))),
            Box::new(GuardExpr::Not(Box::new(cmp(2000)))),
        );
        assert_eq!(
            render_guard(&e),
            "(cpu_usage_pct station#1 < 1 OR TRUE) AND NOT cpu_usage_pct station#1 < 2"
        );
    }
}

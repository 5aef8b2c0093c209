use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::opcode::{join_const, Opcode};
use crate::tuple_space::{EntityKind, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub op: i32,
    pub a1: i32,
    pub a2: i32,
}

impl Triplet {
    pub fn new(op: Opcode, a1: i32, a2: i32) -> Self {
        Self { op: op.code(), a1, a2 }
    }

    pub fn opcode(&self) -> Option<Opcode> {
        Opcode::from_code(self.op)
    }
}

/// Compiled Ariel program: integer triplets plus a constant pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ACodeProgram {
    pub name: String,
    pub triplets: Vec<Triplet>,
    pub pool: Vec<Value>,
}

impl ACodeProgram {
    /// Number of pseudo-codes.
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("program name `{0}` must be non-empty and free of whitespace")]
    BadName(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("triplet {index}: {msg}")]
pub struct VerifyError {
    pub index: usize,
    pub msg: String,
}

pub fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(char::is_whitespace)
}

/// Writes the `.acode` text form: header, one `op a1 a2` line per triplet,
/// then the constant pool as one JSON value per line.
pub fn write_acode(p: &ACodeProgram) -> Result<String, FormatError> {
    if !valid_name(&p.name) {
        return Err(FormatError::BadName(p.name.clone()));
    }
    let mut s = format!("ACODE v1 {} {}\n", p.name, p.triplets.len());
    for t in &p.triplets {
        let _ = writeln!(s, "{} {} {}", t.op, t.a1, t.a2);
    }
    let _ = writeln!(s, "POOL {}", p.pool.len());
    for v in &p.pool {
        let _ = writeln!(s, "{}", serde_json::to_string(v).expect("values serialize"));
    }
    Ok(s)
}

pub fn read_acode(text: &str) -> Result<ACodeProgram, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (p, _) = read_acode_lines(&mut lines)?;
    if let Some((line, rest)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(FormatError::Malformed {
            line,
            msg: format!("unexpected trailing content `{rest}`"),
        });
    }
    Ok(p)
}

/// Reads one a-code block from a line stream. Returns the program and the
/// number of the last line consumed.
pub(crate) fn read_acode_lines<'a, I>(lines: &mut I) -> Result<(ACodeProgram, usize), FormatError>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let bad = |line: usize, msg: String| FormatError::Malformed { line, msg };
    let (hl, header) = lines
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| bad(0, "missing ACODE header".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (name, count) = match parts.as_slice() {
        ["ACODE", "v1", name, count] => (
            name.to_string(),
            count
                .parse::<usize>()
                .map_err(|_| bad(hl, format!("bad triplet count `{count}`")))?,
        ),
        _ => return Err(bad(hl, format!("expected `ACODE v1 <name> <count>`, got `{header}`"))),
    };
    let mut triplets = Vec::with_capacity(count);
    let mut last = hl;
    for _ in 0..count {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| bad(last + 1, "unexpected end of triplets".into()))?;
        last = ln;
        let nums: Result<Vec<i32>, _> = l.split_whitespace().map(str::parse::<i32>).collect();
        match nums.as_deref() {
            Ok([op, a1, a2]) => triplets.push(Triplet {
                op: *op,
                a1: *a1,
                a2: *a2,
            }),
            _ => return Err(bad(ln, format!("expected `opcode arg1 arg2`, got `{l}`"))),
        }
    }
    let (ln, l) = lines
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| bad(last + 1, "missing POOL section".into()))?;
    let n = match l.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["POOL", n] => n
            .parse::<usize>()
            .map_err(|_| bad(ln, format!("bad pool size `{n}`")))?,
        _ => return Err(bad(ln, format!("expected `POOL <n>`, got `{l}`"))),
    };
    last = ln;
    let mut pool = Vec::with_capacity(n);
    for _ in 0..n {
        let (vl, v) = lines
            .next()
            .ok_or_else(|| bad(last + 1, "unexpected end of pool".into()))?;
        last = vl;
        pool.push(serde_json::from_str(v).map_err(|e| bad(vl, format!("bad pool value: {e}")))?);
    }
    Ok((ACodeProgram { name, triplets, pool }, last))
}

/// Static control-flow and stack-discipline check.
pub fn verify(p: &ACodeProgram) -> Result<(), VerifyError> {
    let err = |index: usize, msg: String| VerifyError { index, msg };
    let n = p.triplets.len();
    match p.triplets.last().and_then(Triplet::opcode) {
        Some(Opcode::Halt) => {}
        _ => return Err(err(n.saturating_sub(1), "program must end with HALT".into())),
    }
    let pool_ref = |i: usize, idx: i32| -> Result<&Value, VerifyError> {
        usize::try_from(idx)
            .ok()
            .and_then(|k| p.pool.get(k))
            .ok_or_else(|| err(i, format!("pool index {idx} out of range")))
    };
    let mut depth: i64 = 0;
    let mut quants: Vec<(usize, Opcode)> = Vec::new();
    let selector = |i: usize, sel: i32, scopes: usize| -> Result<(), VerifyError> {
        if sel >= 0 {
            if (sel as usize) < scopes {
                Ok(())
            } else {
                Err(err(
                    i,
                    format!("selector depth {sel} exceeds {scopes} open quantifiers"),
                ))
            }
        } else {
            match pool_ref(i, -(sel + 1))? {
                Value::Entity(_) => Ok(()),
                other => Err(err(i, format!("selector refers to non-entity {other}"))),
            }
        }
    };
    for (i, t) in p.triplets.iter().enumerate() {
        let op = t.opcode().ok_or_else(|| err(i, format!("unknown opcode {}", t.op)))?;
        let (pops, pushes) = match op {
            Opcode::Halt => (0, 0),
            Opcode::PushTrue | Opcode::PushFalse | Opcode::PushConst => (0, 1),
            Opcode::LoadMetric => {
                match pool_ref(i, t.a1)? {
                    Value::Text(_) => {}
                    other => return Err(err(i, format!("metric name must be text, got {other}"))),
                }
                selector(i, t.a2, quants.len())?;
                (0, 1)
            }
            Opcode::StatusDown | Opcode::StatusIsolated => {
                selector(i, t.a1, quants.len())?;
                (0, 1)
            }
            Opcode::CmpLt
            | Opcode::CmpLe
            | Opcode::CmpEq
            | Opcode::CmpNe
            | Opcode::CmpGe
            | Opcode::CmpGt
            | Opcode::And
            | Opcode::Or => (2, 1),
            Opcode::Not => (1, 1),
            Opcode::QuantAllBegin | Opcode::QuantExistsBegin => {
                if EntityKind::from_code(t.a1).is_none() {
                    return Err(err(i, format!("unknown entity class {}", t.a1)));
                }
                let end = usize::try_from(t.a2).ok().filter(|&e| e > i && e < n);
                let end_op = end.and_then(|e| p.triplets[e].opcode());
                let want = if op == Opcode::QuantAllBegin {
                    Opcode::QuantAllEnd
                } else {
                    Opcode::QuantExistsEnd
                };
                match (end, end_op) {
                    (Some(e), Some(o)) if o == want && p.triplets[e].a2 as usize == i => {}
                    _ => return Err(err(i, "quantifier BEGIN/END mismatch".into())),
                }
                quants.push((i, op));
                (0, 0)
            }
            Opcode::QuantAllEnd | Opcode::QuantExistsEnd => {
                match quants.pop() {
                    Some((b, _)) if b as i32 == t.a2 => {}
                    _ => return Err(err(i, "unbalanced quantifier END".into())),
                }
                (1, 1)
            }
            Opcode::Jump | Opcode::JumpIfFalse => {
                let target = t.a1;
                if target <= i as i32 || target as usize >= n {
                    return Err(err(i, format!("jump target {target} not a forward in-range index")));
                }
                let pops = if op == Opcode::JumpIfFalse { 1 } else { 0 };
                if depth != pops || !quants.is_empty() {
                    return Err(err(i, "jump with unbalanced guard stack".into()));
                }
                (pops, 0)
            }
            Opcode::ActEmit => {
                let count = usize::try_from(t.a2).map_err(|_| err(i, "negative value count".into()))?;
                match pool_ref(i, t.a1)? {
                    Value::Text(_) => {}
                    other => return Err(err(i, format!("tag must be text, got {other}"))),
                }
                let last = t.a1 as usize + count;
                if count == 0 || last >= p.pool.len() {
                    return Err(err(i, "emit values out of pool range".into()));
                }
                (0, 0)
            }
            Opcode::ActAlarm => {
                if !(0..=1).contains(&t.a1) {
                    return Err(err(i, format!("bad alarm scope {}", t.a1)));
                }
                (0, 0)
            }
            Opcode::ActIsolate | Opcode::ActSetPriority => {
                match pool_ref(i, t.a1)? {
                    Value::Entity(_) => {}
                    other => return Err(err(i, format!("expected entity, got {other}"))),
                }
                (0, 0)
            }
            Opcode::ActSetParam => {
                pool_ref(i, t.a1)?;
                pool_ref(i, t.a2)?;
                (0, 0)
            }
            Opcode::ActCall => {
                pool_ref(i, t.a1)?;
                (0, 0)
            }
            Opcode::ActSetVoteThreshold => {
                if t.a1 < 1 {
                    return Err(err(i, "vote threshold must be at least 1".into()));
                }
                (0, 0)
            }
        };
        if op.is_action() && depth != 0 {
            return Err(err(i, "action with non-empty guard stack".into()));
        }
        if depth < pops {
            return Err(err(i, "stack underflow".into()));
        }
        depth = depth - pops + pushes;
    }
    if !quants.is_empty() {
        return Err(err(n - 1, "unterminated quantifier".into()));
    }
    Ok(())
}

/// A top-level guarded action located in the triplet stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClauseSpan {
    pub start: usize,
    /// Index of the JUMP_IF_FALSE closing the guard.
    pub branch: usize,
    /// First triplet after the clause.
    pub end: usize,
}

/// Recovers top-level clause boundaries. A clause is its guard code, a
/// JUMP_IF_FALSE, the then-branch, and, when an else-branch exists, a JUMP
/// over it placed right before the else-branch.
pub fn clause_spans(p: &ACodeProgram) -> Vec<ClauseSpan> {
    let mut spans = Vec::new();
    let mut ip = 0;
    while ip < p.triplets.len() && p.triplets[ip].opcode() != Some(Opcode::Halt) {
        let start = ip;
        let Some(branch) = (start..p.triplets.len()).find(|&i| p.triplets[i].opcode() == Some(Opcode::JumpIfFalse))
        else {
            break;
        };
        let target = p.triplets[branch].a1 as usize;
        let before = &p.triplets[target - 1];
        let end = if target - 1 > branch && before.opcode() == Some(Opcode::Jump) && before.a1 as usize >= target {
            before.a1 as usize
        } else {
            target
        };
        spans.push(ClauseSpan { start, branch, end });
        ip = end;
    }
    spans
}

/// Human-readable listing, one line per triplet. Unknown opcodes are listed as
/// `RAW(op,a1,a2)`.
pub fn disassemble(p: &ACodeProgram) -> String {
    let mut out = String::new();
    for (i, t) in p.triplets.iter().enumerate() {
        let _ = writeln!(out, "{i:04} {}", render_triplet(p, t));
    }
    out
}

fn render_triplet(p: &ACodeProgram, t: &Triplet) -> String {
    let pool = |idx: i32| -> String {
        usize::try_from(idx)
            .ok()
            .and_then(|k| p.pool.get(k))
            .map(|v| v.to_string())
            .unwrap_or_else(|| format!("<pool {idx}?>"))
    };
    let sel = |s: i32| -> String {
        if s >= 0 {
            format!("q{s}")
        } else {
            pool(-(s + 1))
        }
    };
    let class = |c: i32| {
        EntityKind::from_code(c)
            .map(|k| k.as_str().to_ascii_uppercase())
            .unwrap_or_else(|| format!("class{c}"))
    };
    let Some(op) = t.opcode() else {
        return format!("RAW({},{},{})", t.op, t.a1, t.a2);
    };
    let m = op.mnemonic();
    match op {
        Opcode::Halt
        | Opcode::PushTrue
        | Opcode::PushFalse
        | Opcode::CmpLt
        | Opcode::CmpLe
        | Opcode::CmpEq
        | Opcode::CmpNe
        | Opcode::CmpGe
        | Opcode::CmpGt
        | Opcode::And
        | Opcode::Or
        | Opcode::Not => m.to_string(),
        Opcode::PushConst => format!("{m} {}", super::ast::format_milli(join_const(t.a1, t.a2))),
        Opcode::LoadMetric => format!("{m} {} {}", pool(t.a1), sel(t.a2)),
        Opcode::QuantAllBegin | Opcode::QuantExistsBegin => {
            format!("{m} {} end={}", class(t.a1), t.a2)
        }
        Opcode::QuantAllEnd | Opcode::QuantExistsEnd => {
            format!("{m} {} begin={}", class(t.a1), t.a2)
        }
        Opcode::StatusDown | Opcode::StatusIsolated => format!("{m} {}", sel(t.a1)),
        Opcode::Jump | Opcode::JumpIfFalse => format!("{m} {:04}", t.a1),
        Opcode::ActEmit => {
            let vals: Vec<String> = (1..=t.a2.max(0)).map(|k| pool(t.a1 + k)).collect();
            format!("{m} {} ({})", pool(t.a1), vals.join(", "))
        }
        Opcode::ActAlarm => format!("{m} {}", if t.a1 == 0 { "LOCAL" } else { "GLOBAL" }),
        Opcode::ActIsolate | Opcode::ActCall => format!("{m} {}", pool(t.a1)),
        Opcode::ActSetPriority => format!("{m} {} {}", pool(t.a1), t.a2),
        Opcode::ActSetParam => format!("{m} {} {}", pool(t.a1), pool(t.a2)),
        Opcode::ActSetVoteThreshold => format!("{m} {}", t.a1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halt_only() -> ACodeProgram {
        ACodeProgram {
            name: "p".into(),
            triplets: vec![Triplet::new(Opcode::Halt, 0, 0)],
            pool: vec![],
        }
    }

    #[test]
    fn halt_listing() {
        assert_eq!(disassemble(&halt_only()), "0000 HALT\n");
    }

    #[test]
    fn raw_opcode_listing() {
        let mut p = halt_only();
        p.triplets.insert(0, Triplet { op: 99, a1: 4, a2: -2 });
        let text = disassemble(&p);
        assert_eq!(text, "0000 RAW(99,4,-2)\n0001 HALT\n");
        assert!(verify(&p).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let p = ACodeProgram {
            name: "demo".into(),
            triplets: vec![
                Triplet::new(Opcode::LoadMetric, 0, -2),
                Triplet::new(Opcode::Halt, 0, 0),
            ],
            pool: vec![
                Value::text("cpu_usage_pct"),
                Value::Entity(crate::tuple_space::EntityRef::station(1)),
            ],
        };
        let s = write_acode(&p).unwrap();
        assert!(s.starts_with("ACODE v1 demo 2\n4 0 -2\n0 0 0\nPOOL 2\n"));
        assert_eq!(read_acode(&s).unwrap(), p);
    }

    #[test]
    fn reader_reports_line_numbers() {
        let e = read_acode("ACODE v1 x 2\n0 0 0\n1 2\n").unwrap_err();
        assert_eq!(
            e,
            FormatError::Malformed {
                line: 3,
                msg: "expected `opcode arg1 arg2`, got `1 2`".into()
            }
        );
        assert!(read_acode("BOGUS").is_err());
        assert!(write_acode(&ACodeProgram {
            name: "a b".into(),
            ..halt_only()
        })
        .is_err());
    }

    #[test]
    fn verify_rejects_backward_jumps_and_missing_halt() {
        let mut p = halt_only();
        p.triplets = vec![Triplet::new(Opcode::Jump, 0, 0), Triplet::new(Opcode::Halt, 0, 0)];
        assert!(verify(&p).is_err());
        p.triplets = vec![Triplet::new(Opcode::PushTrue, 0, 0)];
        assert!(verify(&p).is_err());
        assert!(verify(&halt_only()).is_ok());
    }
}

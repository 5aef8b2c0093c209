use thiserror::Error;

use super::acode::{ACodeProgram, Triplet};
use super::ast::*;
use super::opcode::{split_const, Opcode};
use crate::tuple_space::Value;

pub const POOL_CAP: usize = 65_535;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("constant pool exceeds {POOL_CAP} entries")]
    PoolOverflow,
    #[error("jump target {0} does not fit in an argument word")]
    JumpOutOfRange(usize),
    #[error("argument {0} does not fit in an argument word")]
    ArgOverflow(i64),
}

/// Translates an Ariel AST into a-code.
pub fn compile(ast: &ArielAst, name: &str) -> Result<ACodeProgram, CompileError> {
    let mut c = Codegen::new(name);
    for clause in &ast.clauses {
        c.clause(clause)?;
    }
    c.emit(Opcode::Halt, 0, 0);
    Ok(c.finish())
}

/// Compiles a bare guard to `[guard code..., HALT]`; running it leaves the
/// guard's truth value on the stack.
pub fn compile_guard(expr: &GuardExpr, name: &str) -> Result<ACodeProgram, CompileError> {
    let mut c = Codegen::new(name);
    c.guard(expr)?;
    c.emit(Opcode::Halt, 0, 0);
    Ok(c.finish())
}

struct Codegen {
    name: String,
    code: Vec<Triplet>,
    pool: Vec<Value>,
}

fn word(v: i64) -> Result<i32, CompileError> {
    i32::try_from(v).map_err(|_| CompileError::ArgOverflow(v))
}

impl Codegen {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            code: Vec::new(),
            pool: Vec::new(),
        }
    }

    fn finish(self) -> ACodeProgram {
        ACodeProgram {
            name: self.name,
            triplets: self.code,
            pool: self.pool,
        }
    }

    fn emit(&mut self, op: Opcode, a1: i32, a2: i32) -> usize {
        self.code.push(Triplet::new(op, a1, a2));
        self.code.len() - 1
    }

    fn here(&self) -> Result<i32, CompileError> {
        i32::try_from(self.code.len()).map_err(|_| CompileError::JumpOutOfRange(self.code.len()))
    }

    fn patch_a1(&mut self, at: usize, v: i32) {
        self.code[at].a1 = v;
    }

    fn intern(&mut self, v: Value) -> Result<i32, CompileError> {
        if let Some(i) = self.pool.iter().position(|p| *p == v) {
            return Ok(i as i32);
        }
        self.push_pool(v)
    }

    fn push_pool(&mut self, v: Value) -> Result<i32, CompileError> {
        if self.pool.len() >= POOL_CAP {
            return Err(CompileError::PoolOverflow);
        }
        self.pool.push(v);
        Ok((self.pool.len() - 1) as i32)
    }

    fn selector(&mut self, s: &Selector) -> Result<i32, CompileError> {
        match s {
            Selector::Bound(d) => word(*d as i64),
            Selector::Entity(e) => Ok(-(self.intern(Value::Entity(*e))? + 1)),
        }
    }

    fn clause(&mut self, c: &GuardedAction) -> Result<(), CompileError> {
        self.guard(&c.guard)?;
        let branch = self.emit(Opcode::JumpIfFalse, 0, 0);
        for s in &c.then_branch {
            self.stmt(s)?;
        }
        if c.else_branch.is_empty() {
            let end = self.here()?;
            self.patch_a1(branch, end);
        } else {
            let skip = self.emit(Opcode::Jump, 0, 0);
            let else_start = self.here()?;
            self.patch_a1(branch, else_start);
            for s in &c.else_branch {
                self.stmt(s)?;
            }
            let end = self.here()?;
            self.patch_a1(skip, end);
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), CompileError> {
        match s {
            Stmt::Clause(c) => self.clause(c),
            Stmt::Action(a) => self.action(a),
        }
    }

    fn action(&mut self, a: &Action) -> Result<(), CompileError> {
        match a {
            Action::Emit { tag, values } => {
                // Tag and values must be contiguous, so they are not interned.
                let at = self.push_pool(Value::Text(tag.clone()))?;
                for v in values {
                    self.push_pool(v.clone())?;
                }
                let n = word(values.len() as i64)?;
                self.emit(Opcode::ActEmit, at, n);
            }
            Action::Alarm(scope) => {
                let s = match scope {
                    Scope::Local => 0,
                    Scope::Global => 1,
                };
                self.emit(Opcode::ActAlarm, s, 0);
            }
            Action::Isolate(e) => {
                let at = self.intern(Value::Entity(*e))?;
                self.emit(Opcode::ActIsolate, at, 0);
            }
            Action::SetPriority { task, level } => {
                let at = self.intern(Value::Entity(*task))?;
                let level = word(*level)?;
                self.emit(Opcode::ActSetPriority, at, level);
            }
            Action::SetParam { name, value } => {
                let n = self.intern(Value::Text(name.clone()))?;
                let v = self.intern(value.clone())?;
                self.emit(Opcode::ActSetParam, n, v);
            }
            Action::Call(method) => {
                let at = self.intern(Value::Text(method.clone()))?;
                self.emit(Opcode::ActCall, at, 0);
            }
            Action::SetVoteThreshold(m) => {
                let m = word(*m)?;
                self.emit(Opcode::ActSetVoteThreshold, m, 0);
            }
        }
        Ok(())
    }

    fn guard(&mut self, g: &GuardExpr) -> Result<(), CompileError> {
        match g {
            GuardExpr::True => {
                self.emit(Opcode::PushTrue, 0, 0);
            }
            GuardExpr::False => {
                self.emit(Opcode::PushFalse, 0, 0);
            }
            GuardExpr::Compare {
                subject,
                metric,
                op,
                milli,
            } => {
                let m = self.intern(Value::Text(metric.clone()))?;
                let sel = self.selector(subject)?;
                self.emit(Opcode::LoadMetric, m, sel);
                let (hi, lo) = split_const(*milli);
                self.emit(Opcode::PushConst, hi, lo);
                let cmp = match op {
                    RelOp::Lt => Opcode::CmpLt,
                    RelOp::Le => Opcode::CmpLe,
                    RelOp::Eq => Opcode::CmpEq,
                    RelOp::Ne => Opcode::CmpNe,
                    RelOp::Ge => Opcode::CmpGe,
                    RelOp::Gt => Opcode::CmpGt,
                };
                self.emit(cmp, 0, 0);
            }
            GuardExpr::Status { subject, test } => {
                let sel = self.selector(subject)?;
                let op = match test {
                    StatusTest::Down => Opcode::StatusDown,
                    StatusTest::Isolated => Opcode::StatusIsolated,
                };
                self.emit(op, sel, 0);
            }
            GuardExpr::Quant {
                quantifier,
                class,
                body,
                ..
            } => {
                let (begin_op, end_op) = match quantifier {
                    Quantifier::ForAll => (Opcode::QuantAllBegin, Opcode::QuantAllEnd),
                    Quantifier::Exists => (Opcode::QuantExistsBegin, Opcode::QuantExistsEnd),
                };
                let begin = self.emit(begin_op, class.code(), 0);
                self.guard(body)?;
                let begin_word = word(begin as i64)?;
                let end = self.emit(end_op, class.code(), begin_word);
                let end_word = i32::try_from(end).map_err(|_| CompileError::JumpOutOfRange(end))?;
                self.code[begin].a2 = end_word;
            }
            GuardExpr::And(a, b) => {
                self.guard(a)?;
                self.guard(b)?;
                self.emit(Opcode::And, 0, 0);
            }
            GuardExpr::Or(a, b) => {
                self.guard(a)?;
                self.guard(b)?;
                self.emit(Opcode::Or, 0, 0);
            }
            GuardExpr::Not(a) => {
                self.guard(a)?;
                self.emit(Opcode::Not, 0, 0);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ariel::acode::{clause_spans, disassemble, verify};
    use crate::ariel::parser::parse;

    fn ops(p: &ACodeProgram) -> Vec<Opcode> {
        p.triplets.iter().map(|t| t.opcode().unwrap()).collect()
    }

    #[test]
    fn empty_program_is_single_halt() {
        let p = compile(&ArielAst::default(), "empty").unwrap();
        assert_eq!(p.triplets, vec![Triplet::new(Opcode::Halt, 0, 0)]);
    }

    #[test]
    fn single_true_clause_layout() {
        // Hand-assembled: guard, branch over the then-part to HALT, action, HALT.
        let p = compile(&parse("IF TRUE THEN ALARM FI").unwrap(), "p").unwrap();
        assert_eq!(
            p.triplets,
            vec![
                Triplet::new(Opcode::PushTrue, 0, 0),
                Triplet::new(Opcode::JumpIfFalse, 3, 0),
                Triplet::new(Opcode::ActAlarm, 1, 0),
                Triplet::new(Opcode::Halt, 0, 0),
            ]
        );
        verify(&p).unwrap();
        let listing = disassemble(&p);
        assert_eq!(
            listing,
            "0000 PUSH_TRUE\n0001 JUMP_IF_FALSE 0003\n0002 ACT_ALARM GLOBAL\n0003 HALT\n"
        );
    }

    #[test]
    fn else_branch_layout() {
        let p = compile(
            &parse("IF FALSE THEN ALARM ELSE CALL fix SET_VOTE_THRESHOLD 2 FI").unwrap(),
            "p",
        )
        .unwrap();
        assert_eq!(
            ops(&p),
            vec![
                Opcode::PushFalse,
                Opcode::JumpIfFalse,
                Opcode::ActAlarm,
                Opcode::Jump,
                Opcode::ActCall,
                Opcode::ActSetVoteThreshold,
                Opcode::Halt
            ]
        );
        assert_eq!(p.triplets[1].a1, 4);
        assert_eq!(p.triplets[3].a1, 6);
        verify(&p).unwrap();
    }

    #[test]
    fn quantifier_layout() {
        let p = compile(
            &parse("IF [FORALL STATION s: cpu_usage_pct s < 75] THEN ALARM FI").unwrap(),
            "p",
        )
        .unwrap();
        assert_eq!(
            ops(&p),
            vec![
                Opcode::QuantAllBegin,
                Opcode::LoadMetric,
                Opcode::PushConst,
                Opcode::CmpLt,
                Opcode::QuantAllEnd,
                Opcode::JumpIfFalse,
                Opcode::ActAlarm,
                Opcode::Halt
            ]
        );
        assert_eq!(p.triplets[0].a2, 4);
        assert_eq!(p.triplets[4].a2, 0);
        assert_eq!(p.pool, vec![Value::text("cpu_usage_pct")]);
        verify(&p).unwrap();
    }

    #[test]
    fn spans_follow_top_level_clauses() {
        let src = "IF TRUE THEN IF FALSE THEN ALARM ELSE CALL a FI FI
                   IF FALSE THEN ELSE ALARM FI
                   IF TRUE THEN FI";
        let p = compile(&parse(src).unwrap(), "p").unwrap();
        let spans = clause_spans(&p);
        assert_eq!(spans.len(), 3);
        assert_eq!(spans[0].start, 0);
        assert_eq!(spans[1].start, spans[0].end);
        assert_eq!(spans[2].start, spans[1].end);
        assert_eq!(spans[2].end, p.len() - 1);
    }

    #[test]
    fn deterministic_output() {
        let src = "IF [STATION s: DOWN s] THEN EMIT alert (station#1, 3) ALARM FI";
        let a = compile(&parse(src).unwrap(), "x").unwrap();
        let b = compile(&parse(src).unwrap(), "x").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argument_overflow_is_reported() {
        let ast = parse("IF TRUE THEN SET_PRIORITY task#1 9999999999 FI").unwrap();
        assert_eq!(compile(&ast, "p"), Err(CompileError::ArgOverflow(9_999_999_999)));
    }

    #[test]
    fn pool_overflow_is_reported() {
        let values: Vec<Value> = (0..POOL_CAP as i64).map(Value::Int).collect();
        let ast = ArielAst {
            clauses: vec![GuardedAction {
                guard: GuardExpr::True,
                then_branch: vec![Stmt::Action(Action::Emit {
                    tag: "big".into(),
                    values,
                })],
                else_branch: vec![],
            }],
        };
        assert_eq!(compile(&ast, "p"), Err(CompileError::PoolOverflow));
    }
}

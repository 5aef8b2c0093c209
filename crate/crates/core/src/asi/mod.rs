//! Adaptation Strategies Interpreter: runs a-code against a frozen view of
//! the tuple space and returns the actions to perform. Effects are applied
//! by the caller after execution, so a program never observes its own
//! emissions.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ariel::{clause_spans, join_const, ACodeProgram, Opcode, Scope, Triplet};
use crate::tuple_space::{EntityKind, EntityModel, EntityRef, Status, TupleSpace, Value};

/// Immutable view of the entity model taken at execution start.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub entities: EntityModel,
}

impl Snapshot {
    pub fn of(space: &TupleSpace) -> Self {
        Self {
            entities: space.entities().clone(),
        }
    }

    pub fn from_model(entities: EntityModel) -> Self {
        Self { entities }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    EmitTuple { tag: String, values: Vec<Value> },
    Alarm { scope: Scope },
    Isolate { entity: EntityRef },
    SetPriority { task: EntityRef, level: i64 },
    SetParam { name: String, value: Value },
    Call { method: String },
    SetVoteThreshold { m: i64 },
}

/// An action requested by a program, with the triplet that requested it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub kind: EffectKind,
    pub program: String,
    pub triplet_index: usize,
}

/// How to treat comparisons on metrics an entity has not reported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// The comparison is false.
    #[default]
    Lenient,
    /// Execution fails with [`VmError::MissingMetric`].
    Strict,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VmError {
    #[error("triplet {ip}: {entity} has no numeric `{metric}`")]
    MissingMetric {
        ip: usize,
        entity: EntityRef,
        metric: String,
    },
    #[error("triplet {ip}: unknown entity {entity}")]
    UnknownEntity { ip: usize, entity: EntityRef },
    #[error("triplet {ip}: malformed program: {msg}")]
    Malformed { ip: usize, msg: String },
    #[error("clause {0} does not exist")]
    NoSuchClause(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cell {
    Bool(bool),
    Num(i64),
    Missing,
}

struct Frame {
    forall: bool,
    ids: Vec<u32>,
    class: EntityKind,
    idx: usize,
    begin: usize,
}

enum Stop {
    Halt,
    BranchAt(usize),
}

struct Machine<'a> {
    program: &'a ACodeProgram,
    snapshot: &'a Snapshot,
    mode: MetricMode,
    stack: Vec<Cell>,
    frames: Vec<Frame>,
    effects: Vec<Effect>,
}

impl<'a> Machine<'a> {
    fn new(program: &'a ACodeProgram, snapshot: &'a Snapshot, mode: MetricMode) -> Self {
        Self {
            program,
            snapshot,
            mode,
            stack: Vec::with_capacity(8),
            frames: Vec::new(),
            effects: Vec::new(),
        }
    }

    fn malformed(ip: usize, msg: impl Into<String>) -> VmError {
        VmError::Malformed { ip, msg: msg.into() }
    }

    fn pop(&mut self, ip: usize) -> Result<Cell, VmError> {
        self.stack.pop().ok_or_else(|| Self::malformed(ip, "stack underflow"))
    }

    fn pop_bool(&mut self, ip: usize) -> Result<bool, VmError> {
        match self.pop(ip)? {
            Cell::Bool(b) => Ok(b),
            _ => Err(Self::malformed(ip, "expected boolean on stack")),
        }
    }

    fn pool(&self, ip: usize, idx: i32) -> Result<&'a Value, VmError> {
        usize::try_from(idx)
            .ok()
            .and_then(|i| self.program.pool.get(i))
            .ok_or_else(|| Self::malformed(ip, format!("pool index {idx} out of range")))
    }

    fn pool_entity(&self, ip: usize, idx: i32) -> Result<EntityRef, VmError> {
        self.pool(ip, idx)?
            .as_entity()
            .ok_or_else(|| Self::malformed(ip, "expected entity in pool"))
    }

    fn pool_text(&self, ip: usize, idx: i32) -> Result<&'a str, VmError> {
        self.pool(ip, idx)?
            .as_text()
            .ok_or_else(|| Self::malformed(ip, "expected text in pool"))
    }

    fn select(&self, ip: usize, sel: i32) -> Result<EntityRef, VmError> {
        if sel >= 0 {
            let f = self
                .frames
                .get(sel as usize)
                .ok_or_else(|| Self::malformed(ip, "selector names no open quantifier"))?;
            Ok(EntityRef::new(f.class, f.ids[f.idx]))
        } else {
            self.pool_entity(ip, -(sel + 1))
        }
    }

    fn run(&mut self, start: usize, stop: Stop) -> Result<(), VmError> {
        let code: &[Triplet] = &self.program.triplets;
        let mut ip = start;
        loop {
            if let Stop::BranchAt(b) = stop {
                if ip == b {
                    return Ok(());
                }
            }
            let t = *code
                .get(ip)
                .ok_or_else(|| Self::malformed(ip, "instruction pointer out of range"))?;
            let op = t
                .opcode()
                .ok_or_else(|| Self::malformed(ip, format!("unknown opcode {}", t.op)))?;
            let mut next = ip + 1;
            match op {
                Opcode::Halt => return Ok(()),
                Opcode::PushTrue => self.stack.push(Cell::Bool(true)),
                Opcode::PushFalse => self.stack.push(Cell::Bool(false)),
                Opcode::PushConst => self.stack.push(Cell::Num(join_const(t.a1, t.a2))),
                Opcode::LoadMetric => {
                    let metric = self.pool_text(ip, t.a1)?;
                    let entity = self.select(ip, t.a2)?;
                    let v = self.snapshot.entities.metric(entity, metric).and_then(Value::as_milli);
                    match (v, self.mode) {
                        (Some(m), _) => self.stack.push(Cell::Num(m)),
                        (None, MetricMode::Lenient) => self.stack.push(Cell::Missing),
                        (None, MetricMode::Strict) => {
                            return Err(VmError::MissingMetric {
                                ip,
                                entity,
                                metric: metric.to_string(),
                            })
                        }
                    }
                }
                Opcode::CmpLt | Opcode::CmpLe | Opcode::CmpEq | Opcode::CmpNe | Opcode::CmpGe | Opcode::CmpGt => {
                    let rhs = self.pop(ip)?;
                    let lhs = self.pop(ip)?;
                    let r = match (lhs, rhs) {
                        (Cell::Num(a), Cell::Num(b)) => match op {
                            Opcode::CmpLt => a < b,
                            Opcode::CmpLe => a <= b,
                            Opcode::CmpEq => a == b,
                            Opcode::CmpNe => a != b,
                            Opcode::CmpGe => a >= b,
                            _ => a > b,
                        },
                        (Cell::Missing, _) | (_, Cell::Missing) => false,
                        _ => return Err(Self::malformed(ip, "comparison on non-numbers")),
                    };
                    self.stack.push(Cell::Bool(r));
                }
                Opcode::And | Opcode::Or => {
                    let b = self.pop_bool(ip)?;
                    let a = self.pop_bool(ip)?;
                    let r = if op == Opcode::And { a && b } else { a || b };
                    self.stack.push(Cell::Bool(r));
                }
                Opcode::Not => {
                    let a = self.pop_bool(ip)?;
                    self.stack.push(Cell::Bool(!a));
                }
                Opcode::StatusDown | Opcode::StatusIsolated => {
                    let entity = self.select(ip, t.a1)?;
                    let want = if op == Opcode::StatusDown {
                        Status::Down
                    } else {
                        Status::Isolated
                    };
                    let r = match self.snapshot.entities.status(entity) {
                        Some(s) => s == want,
                        None if self.mode == MetricMode::Strict => return Err(VmError::UnknownEntity { ip, entity }),
                        None => false,
                    };
                    self.stack.push(Cell::Bool(r));
                }
                Opcode::QuantAllBegin | Opcode::QuantExistsBegin => {
                    let class =
                        EntityKind::from_code(t.a1).ok_or_else(|| Self::malformed(ip, "unknown entity class"))?;
                    let end = usize::try_from(t.a2)
                        .ok()
                        .filter(|&e| e > ip && e < code.len())
                        .ok_or_else(|| Self::malformed(ip, "quantifier end out of range"))?;
                    let forall = op == Opcode::QuantAllBegin;
                    let ids = self.snapshot.entities.ids(class);
                    if ids.is_empty() {
                        // Empty domain: FORALL is vacuously true, EXISTS false.
                        self.stack.push(Cell::Bool(forall));
                        next = end + 1;
                    } else {
                        self.frames.push(Frame {
                            forall,
                            ids,
                            class,
                            idx: 0,
                            begin: ip,
                        });
                    }
                }
                Opcode::QuantAllEnd | Opcode::QuantExistsEnd => {
                    let body = self.pop_bool(ip)?;
                    let f = self
                        .frames
                        .last_mut()
                        .ok_or_else(|| Self::malformed(ip, "quantifier END without BEGIN"))?;
                    let decided = if f.forall { !body } else { body };
                    if decided {
                        self.frames.pop();
                        self.stack.push(Cell::Bool(body));
                    } else if f.idx + 1 < f.ids.len() {
                        f.idx += 1;
                        next = f.begin + 1;
                    } else {
                        let forall = f.forall;
                        self.frames.pop();
                        self.stack.push(Cell::Bool(forall));
                    }
                }
                Opcode::Jump | Opcode::JumpIfFalse => {
                    let target = usize::try_from(t.a1)
                        .ok()
                        .filter(|&x| x > ip)
                        .ok_or_else(|| Self::malformed(ip, "jump target must be forward"))?;
                    if op == Opcode::Jump || !self.pop_bool(ip)? {
                        next = target;
                    }
                }
                _ => {
                    let kind = self.action(ip, op, &t)?;
                    self.effects.push(Effect {
                        kind,
                        program: self.program.name.clone(),
                        triplet_index: ip,
                    });
                }
            }
            ip = next;
        }
    }

    fn action(&self, ip: usize, op: Opcode, t: &Triplet) -> Result<EffectKind, VmError> {
        Ok(match op {
            Opcode::ActEmit => {
                let tag = self.pool_text(ip, t.a1)?.to_string();
                let values = (1..=t.a2)
                    .map(|k| self.pool(ip, t.a1 + k).cloned())
                    .collect::<Result<Vec<_>, _>>()?;
                EffectKind::EmitTuple { tag, values }
            }
            Opcode::ActAlarm => EffectKind::Alarm {
                scope: if t.a1 == 0 { Scope::Local } else { Scope::Global },
            },
            Opcode::ActIsolate => EffectKind::Isolate {
                entity: self.pool_entity(ip, t.a1)?,
            },
            Opcode::ActSetPriority => EffectKind::SetPriority {
                task: self.pool_entity(ip, t.a1)?,
                level: t.a2 as i64,
            },
            Opcode::ActSetParam => EffectKind::SetParam {
                name: self.pool_text(ip, t.a1)?.to_string(),
                value: self.pool(ip, t.a2)?.clone(),
            },
            Opcode::ActCall => EffectKind::Call {
                method: self.pool_text(ip, t.a1)?.to_string(),
            },
            Opcode::ActSetVoteThreshold => EffectKind::SetVoteThreshold { m: t.a1 as i64 },
            _ => return Err(Self::malformed(ip, "not an action")),
        })
    }
}

/// Runs a program to completion and returns its effects in execution order.
pub fn execute(program: &ACodeProgram, snapshot: &Snapshot, mode: MetricMode) -> Result<Vec<Effect>, VmError> {
    let mut m = Machine::new(program, snapshot, mode);
    m.run(0, Stop::Halt)?;
    Ok(m.effects)
}

/// Truth value of the guard of top-level clause `clause`.
pub fn eval_guard(
    program: &ACodeProgram,
    clause: usize,
    snapshot: &Snapshot,
    mode: MetricMode,
) -> Result<bool, VmError> {
    let span = *clause_spans(program).get(clause).ok_or(VmError::NoSuchClause(clause))?;
    let mut m = Machine::new(program, snapshot, mode);
    m.run(span.start, Stop::BranchAt(span.branch))?;
    m.pop_bool(span.branch)
}

/// Evaluates a guard-only program built with `compile_guard`.
pub fn eval_predicate(program: &ACodeProgram, snapshot: &Snapshot, mode: MetricMode) -> Result<bool, VmError> {
    let mut m = Machine::new(program, snapshot, mode);
    m.run(0, Stop::Halt)?;
    let end = program.triplets.len().saturating_sub(1);
    m.pop_bool(end)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub program: String,
    pub triplets: usize,
    pub repetitions: usize,
    pub min_ns: u128,
    pub median_ns: u128,
    pub max_ns: u128,
}

impl TimingRecord {
    pub const CSV_HEADER: &'static str = "program,triplets,repetitions,min_ns,median_ns,max_ns";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.program, self.triplets, self.repetitions, self.min_ns, self.median_ns, self.max_ns
        )
    }
}

/// Wall-clock timing of `execute`, effects discarded. `repetitions` of zero
/// is treated as one.
pub fn time_execution(
    program: &ACodeProgram,
    snapshot: &Snapshot,
    repetitions: usize,
) -> Result<TimingRecord, VmError> {
    let reps = repetitions.max(1);
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let effects = execute(program, snapshot, MetricMode::Lenient)?;
        let elapsed = start.elapsed().as_nanos();
        std::hint::black_box(effects);
        samples.push(elapsed);
    }
    samples.sort_unstable();
    Ok(TimingRecord {
        program: program.name.clone(),
        triplets: program.triplets.len(),
        repetitions: reps,
        min_ns: samples[0],
        median_ns: samples[reps / 2],
        max_ns: samples[reps - 1],
    })
}

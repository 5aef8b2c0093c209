//! Shared test support: a tree-walking reference interpreter for Ariel ASTs,
//! seeded random generators for programs, snapshots, tuples and points, and
//! fixture paths.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use ariel_adapt::ariel::{
    Action, ArielAst, GuardExpr, GuardedAction, Quantifier, RelOp, Scope, Selector, StatusTest, Stmt,
};
use ariel_adapt::asi::{EffectKind, MetricMode, Snapshot};
use ariel_adapt::pareto::QoSPoint;
use ariel_adapt::tuple_space::{Attribute, EntityKind, EntityModel, EntityRef, Status, TupleId, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const METRICS: [&str; 3] = ["cpu_usage_pct", "energy_pct", "throughput"];
pub const KINDS: [EntityKind; 4] = [
    EntityKind::Station,
    EntityKind::AccessPoint,
    EntityKind::Task,
    EntityKind::Group,
];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Reference interpreter
// ---------------------------------------------------------------------------

/// Failure reported by the reference interpreter in strict mode.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    MissingMetric(EntityRef, String),
    UnknownEntity(EntityRef),
}

/// Numeric value of a metric in thousandths, computed straight from the
/// stored value.
fn oracle_milli(v: &Value) -> Option<i64> {
    match v {
        Value::Int(i) => i.checked_mul(1000),
        Value::Real(r) if r.is_finite() => Some((r * 1000.0).round() as i64),
        _ => None,
    }
}

fn oracle_status(model: &EntityModel, e: EntityRef) -> Option<Status> {
    model.record(e).map(|r| r.status)
}

pub struct Oracle<'a> {
    pub snapshot: &'a Snapshot,
    pub mode: MetricMode,
}

impl Oracle<'_> {
    fn resolve(&self, s: &Selector, env: &[EntityRef]) -> EntityRef {
        match s {
            Selector::Bound(d) => env[*d],
            Selector::Entity(e) => *e,
        }
    }

    pub fn guard(&self, g: &GuardExpr, env: &mut Vec<EntityRef>) -> Result<bool, OracleError> {
        let model = &self.snapshot.entities;
        Ok(match g {
            GuardExpr::True => true,
            GuardExpr::False => false,
            GuardExpr::Compare {
                subject,
                metric,
                op,
                milli,
            } => {
                let e = self.resolve(subject, env);
                let v = model
                    .record(e)
                    .and_then(|r| r.attrs.get(metric))
                    .and_then(|a| oracle_milli(&a.value));
                match v {
                    Some(x) => match op {
                        RelOp::Lt => x < *milli,
                        RelOp::Le => x <= *milli,
                        RelOp::Eq => x == *milli,
                        RelOp::Ne => x != *milli,
                        RelOp::Ge => x >= *milli,
                        RelOp::Gt => x > *milli,
                    },
                    None if self.mode == MetricMode::Strict => {
                        return Err(OracleError::MissingMetric(e, metric.clone()))
                    }
                    None => false,
                }
            }
            GuardExpr::Status { subject, test } => {
                let e = self.resolve(subject, env);
                let want = match test {
                    StatusTest::Down => Status::Down,
                    StatusTest::Isolated => Status::Isolated,
                };
                match oracle_status(model, e) {
                    Some(s) => s == want,
                    None if self.mode == MetricMode::Strict => return Err(OracleError::UnknownEntity(e)),
                    None => false,
                }
            }
            GuardExpr::Quant {
                quantifier,
                class,
                body,
                ..
            } => {
                let forall = *quantifier == Quantifier::ForAll;
                let mut result = forall;
                for id in model.ids(*class) {
                    env.push(EntityRef::new(*class, id));
                    let b = self.guard(body, env);
                    env.pop();
                    if b? != forall {
                        result = !forall;
                        break;
                    }
                }
                result
            }
            // Both operands are always evaluated.
            GuardExpr::And(a, b) => {
                let x = self.guard(a, env)?;
                let y = self.guard(b, env)?;
                x && y
            }
            GuardExpr::Or(a, b) => {
                let x = self.guard(a, env)?;
                let y = self.guard(b, env)?;
                x || y
            }
            GuardExpr::Not(a) => !self.guard(a, env)?,
        })
    }

    fn clause(&self, c: &GuardedAction, out: &mut Vec<EffectKind>) -> Result<(), OracleError> {
        let branch = if self.guard(&c.guard, &mut Vec::new())? {
            &c.then_branch
        } else {
            &c.else_branch
        };
        for s in branch {
            match s {
                Stmt::Clause(inner) => self.clause(inner, out)?,
                Stmt::Action(a) => out.push(effect_of(a)),
            }
        }
        Ok(())
    }

    pub fn run(&self, ast: &ArielAst) -> Result<Vec<EffectKind>, OracleError> {
        let mut out = Vec::new();
        for c in &ast.clauses {
            self.clause(c, &mut out)?;
        }
        Ok(out)
    }
}

pub fn effect_of(a: &Action) -> EffectKind {
    match a {
        Action::Emit { tag, values } => EffectKind::EmitTuple {
            tag: tag.clone(),
            values: values.clone(),
        },
        Action::Alarm(scope) => EffectKind::Alarm { scope: *scope },
        Action::Isolate(e) => EffectKind::Isolate { entity: *e },
        Action::SetPriority { task, level } => EffectKind::SetPriority {
            task: *task,
            level: *level,
        },
        Action::SetParam { name, value } => EffectKind::SetParam {
            name: name.clone(),
            value: value.clone(),
        },
        Action::Call(m) => EffectKind::Call { method: m.clone() },
        Action::SetVoteThreshold(m) => EffectKind::SetVoteThreshold { m: *m },
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

pub fn random_entity<R: Rng>(r: &mut R) -> EntityRef {
    EntityRef::new(*KINDS.choose(r).unwrap(), r.gen_range(1..=4))
}

/// Integers or quarter-steps, so every value is exact in thousandths.
pub fn random_number<R: Rng>(r: &mut R) -> Value {
    if r.gen_bool(0.5) {
        Value::Int(r.gen_range(-5..=105))
    } else {
        Value::Real(r.gen_range(-20..=420) as f64 / 4.0)
    }
}

pub fn random_value<R: Rng>(r: &mut R) -> Value {
    match r.gen_range(0..5) {
        0 => Value::Int(r.gen_range(-1000..1000)),
        1 => Value::Real(r.gen_range(-400..400) as f64 / 8.0),
        2 => Value::text(["a", "b", "save", "x y"][r.gen_range(0..4)]),
        3 => Value::Bool(r.gen()),
        _ => Value::Entity(random_entity(r)),
    }
}

fn random_op<R: Rng>(r: &mut R) -> RelOp {
    [RelOp::Lt, RelOp::Le, RelOp::Eq, RelOp::Ne, RelOp::Ge, RelOp::Gt][r.gen_range(0..6)]
}

pub fn random_guard<R: Rng>(r: &mut R, bound: usize, depth: u32) -> GuardExpr {
    let leaf = depth == 0 || r.gen_bool(0.3);
    let subject = |r: &mut R| {
        if bound > 0 && r.gen_bool(0.75) {
            Selector::Bound(r.gen_range(0..bound))
        } else {
            Selector::Entity(random_entity(r))
        }
    };
    if leaf {
        return match r.gen_range(0..6) {
            0 => GuardExpr::True,
            1 => GuardExpr::False,
            2 => GuardExpr::Status {
                subject: subject(r),
                test: if r.gen() {
                    StatusTest::Down
                } else {
                    StatusTest::Isolated
                },
            },
            _ => {
                // Thresholds near the generated values so both outcomes occur.
                let milli = if r.gen_bool(0.3) {
                    r.gen_range(-5..=105) * 1000
                } else {
                    r.gen_range(-20..=420) * 250
                };
                GuardExpr::Compare {
                    subject: subject(r),
                    metric: METRICS.choose(r).unwrap().to_string(),
                    op: random_op(r),
                    milli,
                }
            }
        };
    }
    match r.gen_range(0..4) {
        0 => GuardExpr::Quant {
            quantifier: if r.gen() {
                Quantifier::ForAll
            } else {
                Quantifier::Exists
            },
            class: *KINDS.choose(r).unwrap(),
            var: format!("v{bound}"),
            body: Box::new(random_guard(r, bound + 1, depth - 1)),
        },
        1 => GuardExpr::And(
            Box::new(random_guard(r, bound, depth - 1)),
            Box::new(random_guard(r, bound, depth - 1)),
        ),
        2 => GuardExpr::Or(
            Box::new(random_guard(r, bound, depth - 1)),
            Box::new(random_guard(r, bound, depth - 1)),
        ),
        _ => GuardExpr::Not(Box::new(random_guard(r, bound, depth - 1))),
    }
}

pub fn random_action<R: Rng>(r: &mut R) -> Action {
    match r.gen_range(0..7) {
        0 => Action::Emit {
            tag: format!("t{}", r.gen_range(0..3)),
            values: (0..r.gen_range(1..4)).map(|_| random_value(r)).collect(),
        },
        1 => Action::Alarm(if r.gen() { Scope::Local } else { Scope::Global }),
        2 => Action::Isolate(EntityRef::new(
            if r.gen() { EntityKind::Task } else { EntityKind::Group },
            r.gen_range(1..=4),
        )),
        3 => Action::SetPriority {
            task: EntityRef::task(r.gen_range(1..=4)),
            level: r.gen_range(-100..=100),
        },
        4 => Action::SetParam {
            name: format!("p{}", r.gen_range(0..3)),
            value: random_value(r),
        },
        5 => Action::Call(format!("m{}", r.gen_range(0..3))),
        _ => Action::SetVoteThreshold(r.gen_range(1..=5)),
    }
}

fn random_stmts<R: Rng>(r: &mut R, nest: u32) -> Vec<Stmt> {
    (0..r.gen_range(0..=3))
        .map(|_| {
            if nest > 0 && r.gen_bool(0.2) {
                Stmt::Clause(random_clause(r, nest - 1))
            } else {
                Stmt::Action(random_action(r))
            }
        })
        .collect()
}

pub fn random_clause<R: Rng>(r: &mut R, nest: u32) -> GuardedAction {
    GuardedAction {
        guard: random_guard(r, 0, 4),
        then_branch: random_stmts(r, nest),
        else_branch: if r.gen() { random_stmts(r, nest) } else { Vec::new() },
    }
}

pub fn random_ast<R: Rng>(r: &mut R) -> ArielAst {
    ArielAst {
        clauses: (0..r.gen_range(1..=4)).map(|_| random_clause(r, 2)).collect(),
    }
}

fn fill_record<R: Rng>(r: &mut R, model: &mut EntityModel, e: EntityRef) {
    let status = match r.gen_range(0..6) {
        0 => Status::Down,
        1 => Status::Isolated,
        _ => Status::Up,
    };
    let rec = model.record_mut(e).expect("entity just added");
    rec.status = status;
    for m in METRICS {
        if r.gen_bool(0.75) {
            let value = if r.gen_bool(0.05) {
                Value::text("n/a")
            } else {
                random_number(r)
            };
            rec.attrs.insert(
                m.to_string(),
                Attribute {
                    value,
                    tuple: TupleId(0),
                },
            );
        }
    }
}

/// Random entity model; any class may be empty.
pub fn random_snapshot<R: Rng>(r: &mut R) -> Snapshot {
    let mut m = EntityModel::new();
    let stations: Vec<u32> = (1..=4).filter(|_| r.gen_bool(0.7)).collect();
    for &s in &stations {
        m.add_station(s);
        fill_record(r, &mut m, EntityRef::station(s));
    }
    let aps: Vec<u32> = (1..=3).filter(|_| r.gen_bool(0.5)).collect();
    for a in aps {
        m.add_access_point(a);
        fill_record(r, &mut m, EntityRef::access_point(a));
    }
    let mut tasks = BTreeSet::new();
    if !stations.is_empty() {
        let ids: Vec<u32> = (1..=4).filter(|_| r.gen_bool(0.5)).collect();
        for t in ids {
            let host = *stations.choose(r).unwrap();
            m.add_task(t, host, r.gen_range(0..10), r.gen()).unwrap();
            fill_record(r, &mut m, EntityRef::task(t));
            tasks.insert(t);
        }
    }
    if !tasks.is_empty() && r.gen_bool(0.5) {
        let members: BTreeSet<u32> = tasks.iter().copied().filter(|_| r.gen()).collect();
        m.add_group(1, members).unwrap();
        fill_record(r, &mut m, EntityRef::group(1));
    }
    Snapshot::from_model(m)
}

/// Point set with `n` points in `d` dimensions on a coarse grid, so ties and
/// duplicates are common.
pub fn random_points<R: Rng>(r: &mut R, n: usize, d: usize) -> Vec<QoSPoint> {
    let grid = r.gen_range(3..=20);
    (0..n)
        .map(|i| {
            QoSPoint::new(
                format!("p{i}"),
                (0..d).map(|k| (format!("d{k}"), r.gen_range(0..grid) as f64 * 0.5)),
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Tuple space workloads
// ---------------------------------------------------------------------------

use ariel_adapt::tuple_space::{Slot, SpaceError, Template, TupleSpace, ValueKind};

pub const PRODUCERS: [&str; 3] = ["P0", "P1", "P2"];

/// Space with producers `P0..P2` and entities 1..=4 of every class.
pub fn populated_space() -> TupleSpace {
    let mut s = TupleSpace::new();
    for p in PRODUCERS {
        s.register_producer(p);
    }
    let m = s.entities_mut();
    for id in 1..=4 {
        m.add_station(id);
        m.add_access_point(id);
    }
    for id in 1..=4 {
        m.add_task(id, id, 0, true).unwrap();
    }
    for id in 1..=4 {
        m.add_group(id, BTreeSet::from([id])).unwrap();
    }
    s
}

/// Values from a small domain so exact template slots hit often.
pub fn small_value<R: Rng>(r: &mut R) -> Value {
    match r.gen_range(0..6) {
        0 | 1 => Value::Int(r.gen_range(0..3)),
        2 => Value::Real([0.0, 1.0, 2.5][r.gen_range(0..3)]),
        3 => Value::text(["a", "b"][r.gen_range(0..2)]),
        4 => Value::Bool(r.gen()),
        _ => Value::Entity(EntityRef::station(r.gen_range(1..=2))),
    }
}

pub fn small_tuple<R: Rng>(r: &mut R) -> (String, Vec<Value>) {
    let tag = ["a", "b", "c"][r.gen_range(0..3)].to_string();
    let values = (0..r.gen_range(1..=3)).map(|_| small_value(r)).collect();
    (tag, values)
}

pub fn random_template<R: Rng>(r: &mut R) -> Template {
    let tag = if r.gen_bool(0.2) {
        None
    } else {
        Some(["a", "b", "c"][r.gen_range(0..3)].to_string())
    };
    let slots = (0..r.gen_range(0..=3))
        .map(|_| match r.gen_range(0..3) {
            0 => Slot::Exact(small_value(r)),
            1 => Slot::Typed(
                [
                    ValueKind::Int,
                    ValueKind::Real,
                    ValueKind::Text,
                    ValueKind::Bool,
                    ValueKind::Entity,
                ][r.gen_range(0..5)],
            ),
            _ => Slot::Any,
        })
        .collect();
    Template { tag, slots }
}

fn same_kind(a: &Value, k: ValueKind) -> bool {
    matches!(
        (a, k),
        (Value::Int(_), ValueKind::Int)
            | (Value::Real(_), ValueKind::Real)
            | (Value::Text(_), ValueKind::Text)
            | (Value::Bool(_), ValueKind::Bool)
            | (Value::Entity(_), ValueKind::Entity)
    )
}

/// Positional matching written out independently of `Template::matches`.
pub fn oracle_matches(t: &Template, tag: &str, values: &[Value]) -> bool {
    if t.tag.as_deref().is_some_and(|x| x != tag) || t.slots.len() != values.len() {
        return false;
    }
    for (slot, v) in t.slots.iter().zip(values) {
        let ok = match slot {
            Slot::Any => true,
            Slot::Typed(k) => same_kind(v, *k),
            Slot::Exact(x) => x == v,
        };
        if !ok {
            return false;
        }
    }
    true
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OwnershipStats {
    pub attempted_violations: usize,
    pub rejected_not_owner: usize,
    pub illegal_successes: usize,
    pub model_divergences: usize,
}

/// Random interleaving of `out`, `take` and `update` by three producers,
/// checked against a plain map of id -> (owner, tag, values).
pub fn ownership_trial(seed: u64, ops: usize) -> OwnershipStats {
    use std::collections::BTreeMap;
    let mut r = rng(seed);
    let mut space = populated_space();
    let mut model: BTreeMap<u64, (String, String, Vec<Value>)> = BTreeMap::new();
    let mut stats = OwnershipStats::default();
    for _ in 0..ops {
        let who = PRODUCERS[r.gen_range(0..PRODUCERS.len())];
        match r.gen_range(0..3) {
            0 => {
                let (tag, values) = small_tuple(&mut r);
                let id = space.out(who, &tag, values.clone()).unwrap();
                model.insert(id.0, (who.to_string(), tag, values));
            }
            1 => {
                let tmpl = random_template(&mut r);
                let first = model
                    .iter()
                    .find(|(_, (_, tag, vals))| oracle_matches(&tmpl, tag, vals))
                    .map(|(id, (owner, _, _))| (*id, owner.clone()));
                let res = space.take(who, &tmpl);
                match (first, res) {
                    (None, Err(SpaceError::NoMatch)) => {}
                    (Some((id, owner)), res) if owner != who => {
                        stats.attempted_violations += 1;
                        match res {
                            Err(SpaceError::NotOwner { tuple, .. }) if tuple.0 == id => stats.rejected_not_owner += 1,
                            Ok(_) => stats.illegal_successes += 1,
                            Err(_) => stats.model_divergences += 1,
                        }
                    }
                    (Some((id, _)), Ok(t)) if t.id.0 == id => {
                        model.remove(&id);
                    }
                    _ => stats.model_divergences += 1,
                }
            }
            _ => {
                let Some(&id) = model.keys().nth(r.gen_range(0..model.len().max(1))) else {
                    continue;
                };
                let (_, values) = small_tuple(&mut r);
                let owner = model[&id].0.clone();
                let res = space.update(who, TupleId(id), values.clone());
                if owner != who {
                    stats.attempted_violations += 1;
                    match res {
                        Err(SpaceError::NotOwner { .. }) => stats.rejected_not_owner += 1,
                        Ok(()) => stats.illegal_successes += 1,
                        Err(_) => stats.model_divergences += 1,
                    }
                } else if res.is_ok() {
                    model.get_mut(&id).unwrap().2 = values;
                } else {
                    stats.model_divergences += 1;
                }
            }
        }
        let live: Vec<(u64, String, Vec<Value>)> = space
            .tuples()
            .map(|t| (t.id.0, t.tag.clone(), t.values.clone()))
            .collect();
        let want: Vec<(u64, String, Vec<Value>)> = model
            .iter()
            .map(|(id, (_, tag, v))| (*id, tag.clone(), v.clone()))
            .collect();
        if live != want {
            stats.model_divergences += 1;
        }
    }
    stats
}

/// Fills a space with random tuples and checks `rd` against a linear scan for
/// `probes` random templates; returns the number of disagreements.
pub fn matching_trial(seed: u64, probes: usize) -> usize {
    let mut r = rng(seed);
    let mut space = populated_space();
    let mut stored = Vec::new();
    for _ in 0..r.gen_range(0..40) {
        let (tag, values) = small_tuple(&mut r);
        let id = space.out(PRODUCERS[r.gen_range(0..3)], &tag, values.clone()).unwrap();
        stored.push((id, tag, values));
    }
    let mut bad = 0;
    for _ in 0..probes {
        let t = random_template(&mut r);
        let want = stored
            .iter()
            .find(|(_, tag, v)| oracle_matches(&t, tag, v))
            .map(|x| x.0);
        let got = space.rd(&t).map(|x| x.id);
        let all_want: Vec<TupleId> = stored
            .iter()
            .filter(|(_, tag, v)| oracle_matches(&t, tag, v))
            .map(|x| x.0)
            .collect();
        let all_got: Vec<TupleId> = space.rd_all(&t).map(|x| x.id).collect();
        if want != got || all_want != all_got {
            bad += 1;
        }
    }
    bad
}

// ---------------------------------------------------------------------------
// Pareto workloads
// ---------------------------------------------------------------------------

use ariel_adapt::pareto::{pareto_front, Direction, Orientation};

pub fn random_orientation<R: Rng>(r: &mut R, d: usize) -> Orientation {
    let mut o = Orientation::new();
    for k in 0..d {
        o = if r.gen() {
            o.maximize(format!("d{k}"))
        } else {
            o.minimize(format!("d{k}"))
        };
    }
    o
}

/// Quadratic dominance check over every ordered pair.
pub fn oracle_front(points: &[QoSPoint], orient: &Orientation) -> Vec<String> {
    let better = |a: &QoSPoint, b: &QoSPoint| {
        let mut strict = false;
        for (dim, dir) in &orient.0 {
            let (x, y) = (a.coords[dim], b.coords[dim]);
            let (x, y) = match dir {
                Direction::Maximize => (x, y),
                Direction::Minimize => (y, x),
            };
            if x < y {
                return false;
            }
            strict |= x > y;
        }
        strict
    };
    points
        .iter()
        .filter(|p| !points.iter().any(|q| better(q, p)))
        .map(|p| p.label.clone())
        .collect()
}

fn labels(ps: &[QoSPoint]) -> Vec<String> {
    ps.iter().map(|p| p.label.clone()).collect()
}

/// Oracle agreement, idempotence and invariance under a strictly increasing
/// per-dimension transform, on one random point set.
pub fn pareto_trial(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.gen_range(1..=200);
    let d = r.gen_range(1..=4);
    let pts = random_points(&mut r, n, d);
    let orient = random_orientation(&mut r, d);
    let front = pareto_front(&pts, &orient).map_err(|e| e.to_string())?;
    let want = oracle_front(&pts, &orient);
    if labels(&front) != want {
        return Err(format!("front {:?} != oracle {:?}", labels(&front), want));
    }
    let again = pareto_front(&front, &orient).map_err(|e| e.to_string())?;
    if again != front {
        return Err("front is not idempotent".into());
    }
    let (a, b) = (r.gen_range(0.1..10.0), r.gen_range(-50.0..50.0));
    let transformed: Vec<QoSPoint> = pts
        .iter()
        .map(|p| {
            QoSPoint::new(
                p.label.clone(),
                p.coords.iter().map(|(k, v)| (k.clone(), a * v.powi(3) + v + b)),
            )
        })
        .collect();
    let t_front = pareto_front(&transformed, &orient).map_err(|e| e.to_string())?;
    if labels(&t_front) != want {
        return Err("front changed under a monotone transform".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Simulation workloads
// ---------------------------------------------------------------------------

use ariel_adapt::ariel::{Bundle, OTHERWISE};
use ariel_adapt::sim::{Fault, FaultSpec, SimConfig, Simulation, TraceEntry, Verdict};

/// Bundle whose programs both raise a global alarm when a station is down.
pub fn alarm_bundle() -> Bundle {
    let p = |n: &str| {
        ariel_adapt::ariel::compile(
            &ariel_adapt::ariel::parse("IF [STATION s: DOWN s] THEN ALARM GLOBAL FI").unwrap(),
            n,
        )
        .unwrap()
    };
    Bundle::new(vec![
        (
            "CPU_OK".to_string(),
            p("program0"),
            Some("FORALL STATION CPU < 75".to_string()),
        ),
        (OTHERWISE.to_string(), p("program1"), None),
    ])
    .unwrap()
}

/// First suspicion time of the dead station, per observer.
#[derive(Debug, Clone)]
pub struct DetectionRun {
    pub stations: u32,
    pub dead: u32,
    pub first_suspicion: Vec<(u32, Option<u64>)>,
    pub false_suspicions: usize,
}

/// Heartbeat 10, timeout 30, one station killed at t=100; the seed also
/// picks the network size and the victim.
pub fn detection_trial(seed: u64) -> DetectionRun {
    let mut r = rng(seed ^ 0xA5A5);
    let stations = r.gen_range(2..=6);
    let dead = r.gen_range(1..=stations);
    let mut c = SimConfig::new(seed, stations);
    c.heartbeat_period = 10;
    c.failure_timeout = 30;
    c.faults.push(FaultSpec {
        time: 100,
        fault: Fault::StationDown { station: dead },
    });
    let mut sim = Simulation::build(c, alarm_bundle(), None).unwrap();
    sim.run_until(200).unwrap();
    let mut false_suspicions = 0;
    let mut first = std::collections::BTreeMap::new();
    for e in sim.trace() {
        if let TraceEntry::Verdict {
            time,
            observer,
            target,
            verdict: Verdict::Suspected,
        } = e
        {
            if *target == dead {
                first.entry(*observer).or_insert(*time);
            } else if *observer != dead {
                false_suspicions += 1;
            }
        }
    }
    DetectionRun {
        stations,
        dead,
        first_suspicion: (1..=stations)
            .filter(|s| *s != dead)
            .map(|s| (s, first.get(&s).copied()))
            .collect(),
        false_suspicions,
    }
}

impl DetectionRun {
    pub fn within_bound(&self) -> bool {
        self.false_suspicions == 0
            && self
                .first_suspicion
                .iter()
                .all(|(_, t)| t.is_some_and(|t| 100 < t && t <= 140))
    }
}

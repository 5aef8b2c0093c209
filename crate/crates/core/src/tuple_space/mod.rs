//! Tuple space and its manager.
//!
//! Change detectors publish QoS figures here as tuples. Every insertion
//! (`out`, a materialized `eval`, a changed `evalp` sample, an `update`)
//! queues exactly one [`InsertionSignal`]; the scenario manager drains them
//! with [`TupleSpace::take_signals`]. Tuples carrying a known metric tag and an
//! entity subject in first position also refresh the [`EntityModel`].
//!
//! All queries are non-blocking. When several tuples match a template the one
//! with the smallest id is chosen.

mod entity;
mod template;
mod value;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use entity::{Attribute, EntityModel, EntityRecord, GroupRecord, Status, TaskRecord};
pub use template::{Slot, Template};
pub use value::{to_milli, EntityKind, EntityRef, Value, ValueKind};

/// Virtual time, in simulator ticks.
pub type SimTime = u64;

/// Metric tags understood out of the box.
pub const QOS_METRICS: [&str; 7] = [
    "energy_pct",
    "cpu_usage_pct",
    "location",
    "proximity",
    "link_quality",
    "link_cost",
    "failed_attempts_per_sec",
];

const PERCENT_METRICS: [&str; 2] = ["energy_pct", "cpu_usage_pct"];

pub const TAG_NODE_DOWN: &str = "node_down";
pub const TAG_NODE_UP: &str = "node_up";
pub const TAG_ISOLATED: &str = "isolated";
pub const TAG_EVAL_FAILED: &str = "eval_failed";

/// Producer id used by the manager itself.
pub const TSM: &str = "TSM";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TupleId(pub u64);

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub String);

impl ComponentId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ComponentId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liveness {
    Passive,
    Active,
    LiveWithSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub id: TupleId,
    pub tag: String,
    pub values: Vec<Value>,
    pub producer: ComponentId,
    pub liveness: Liveness,
    pub snapshot_version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalCause {
    Out,
    Eval,
    Evalp,
    Update,
}

/// Raised once per insertion; wakes the adaptation machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionSignal {
    pub seq: u64,
    pub time: SimTime,
    pub tuple: TupleId,
    pub tag: String,
    pub cause: SignalCause,
}

/// One line of the operation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub time: SimTime,
    pub op: String,
    pub producer: Option<ComponentId>,
    pub tuple_id: Option<TupleId>,
    pub tag: Option<String>,
    pub values: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("producer `{0}` is not registered")]
    ProducerUnregistered(ComponentId),
    #[error("tuple values must be non-empty")]
    EmptyValues,
    #[error("no tuple matches the template")]
    NoMatch,
    #[error("tuple {tuple} belongs to `{owner}`, not `{requester}`")]
    NotOwner {
        tuple: TupleId,
        owner: ComponentId,
        requester: ComponentId,
    },
    #[error("unknown tuple {0}")]
    UnknownTuple(TupleId),
    #[error("sampling period must be positive")]
    InvalidPeriod,
    #[error("unknown entity {0}")]
    UnknownEntity(EntityRef),
    #[error("metric `{metric}` value {value} out of range")]
    InvalidMetricValue { metric: String, value: Value },
    #[error("tuple {0} is not a live tuple")]
    NotLive(TupleId),
    #[error("tuple {0} is not awaiting evaluation")]
    NotPending(TupleId),
}

/// Deferred computation behind `eval`.
pub type Thunk = Box<dyn FnOnce() -> Result<Vec<Value>, String> + Send>;
/// Sampled computation behind `evalp`; receives the sampling time.
pub type Generator = Box<dyn FnMut(SimTime) -> Vec<Value> + Send>;

struct PendingEval {
    tuple: Tuple,
    ready_at: SimTime,
    thunk: Thunk,
}

struct LiveSource {
    generator: Generator,
    period: SimTime,
    next_due: SimTime,
}

pub struct TupleSpace {
    now: SimTime,
    next_id: u64,
    tuples: BTreeMap<TupleId, Tuple>,
    pending: BTreeMap<TupleId, PendingEval>,
    live: BTreeMap<TupleId, LiveSource>,
    producers: BTreeSet<ComponentId>,
    metrics: BTreeSet<String>,
    entities: EntityModel,
    params: BTreeMap<String, Value>,
    signals: VecDeque<InsertionSignal>,
    signal_seq: u64,
    log: Vec<OpRecord>,
}

impl Default for TupleSpace {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for TupleSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TupleSpace")
            .field("now", &self.now)
            .field("tuples", &self.tuples.len())
            .field("pending", &self.pending.len())
            .field("live", &self.live.len())
            .finish()
    }
}

impl TupleSpace {
    pub fn new() -> Self {
        let mut producers = BTreeSet::new();
        producers.insert(ComponentId::from(TSM));
        Self {
            now: 0,
            next_id: 1,
            tuples: BTreeMap::new(),
            pending: BTreeMap::new(),
            live: BTreeMap::new(),
            producers,
            metrics: QOS_METRICS.iter().map(|m| m.to_string()).collect(),
            entities: EntityModel::new(),
            params: BTreeMap::new(),
            signals: VecDeque::new(),
            signal_seq: 0,
            log: Vec::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn set_time(&mut self, t: SimTime) {
        self.now = t;
    }

    pub fn register_producer(&mut self, id: impl Into<ComponentId>) {
        self.producers.insert(id.into());
    }

    pub fn is_producer(&self, id: &ComponentId) -> bool {
        self.producers.contains(id)
    }

    /// Adds a plain-text tag to the metric vocabulary.
    pub fn register_metric(&mut self, name: impl Into<String>) {
        self.metrics.insert(name.into());
    }

    pub fn metrics(&self) -> &BTreeSet<String> {
        &self.metrics
    }

    pub fn entities(&self) -> &EntityModel {
        &self.entities
    }

    pub fn entities_mut(&mut self) -> &mut EntityModel {
        &mut self.entities
    }

    pub fn get(&self, id: TupleId) -> Option<&Tuple> {
        self.tuples.get(&id).or_else(|| self.pending.get(&id).map(|p| &p.tuple))
    }

    /// Materialized tuples in id order.
    pub fn tuples(&self) -> impl Iterator<Item = &Tuple> {
        self.tuples.values()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn param(&self, name: &str) -> Option<&Value> {
        self.params.get(name)
    }

    pub fn params(&self) -> &BTreeMap<String, Value> {
        &self.params
    }

    pub fn set_param(&mut self, name: impl Into<String>, value: Value) {
        self.params.insert(name.into(), value);
    }

    pub fn pending_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn take_signals(&mut self) -> Vec<InsertionSignal> {
        self.signals.drain(..).collect()
    }

    pub fn next_signal(&mut self) -> Option<InsertionSignal> {
        self.signals.pop_front()
    }

    pub fn log(&self) -> &[OpRecord] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<OpRecord> {
        std::mem::take(&mut self.log)
    }

    pub fn out(
        &mut self,
        producer: impl Into<ComponentId>,
        tag: &str,
        values: Vec<Value>,
    ) -> Result<TupleId, SpaceError> {
        let producer = producer.into();
        if let Err(e) = self.check_emission(&producer, tag, &values) {
            self.record_failure("out", Some(producer), None, Some(tag), &values, &e);
            return Err(e);
        }
        let id = self.fresh_id();
        let tuple = Tuple {
            id,
            tag: tag.to_string(),
            values,
            producer,
            liveness: Liveness::Passive,
            snapshot_version: 0,
        };
        self.record("out", &tuple);
        self.insert(tuple, SignalCause::Out);
        Ok(id)
    }

    /// Non-destructive read; smallest matching id wins.
    pub fn rd(&self, template: &Template) -> Option<&Tuple> {
        self.tuples.values().find(|t| template.matches(&t.tag, &t.values))
    }

    /// Every matching tuple, ascending id.
    pub fn rd_all<'a>(&'a self, template: &'a Template) -> impl Iterator<Item = &'a Tuple> + 'a {
        self.tuples
            .values()
            .filter(move |t| template.matches(&t.tag, &t.values))
    }

    /// Withdraws the smallest-id match, which must belong to `requester`.
    pub fn take(&mut self, requester: impl Into<ComponentId>, template: &Template) -> Result<Tuple, SpaceError> {
        let requester = requester.into();
        let found = self.rd(template).map(|t| (t.id, t.producer.clone()));
        let (id, owner) = match found {
            Some(x) => x,
            None => {
                let e = SpaceError::NoMatch;
                self.record_failure("in", Some(requester), None, template.tag.as_deref(), &[], &e);
                return Err(e);
            }
        };
        if owner != requester {
            let e = SpaceError::NotOwner {
                tuple: id,
                owner,
                requester: requester.clone(),
            };
            self.record_failure("in", Some(requester), Some(id), template.tag.as_deref(), &[], &e);
            return Err(e);
        }
        let tuple = self.tuples.remove(&id).expect("matched tuple present");
        self.live.remove(&id);
        self.record("in", &tuple);
        self.forget_metric(&tuple);
        Ok(tuple)
    }

    /// Stores an active tuple whose values are produced by `thunk` at
    /// `ready_at`. Until then it is invisible to `rd`/`in`.
    pub fn eval(
        &mut self,
        producer: impl Into<ComponentId>,
        tag: &str,
        ready_at: SimTime,
        thunk: Thunk,
    ) -> Result<TupleId, SpaceError> {
        let producer = producer.into();
        if !self.producers.contains(&producer) {
            let e = SpaceError::ProducerUnregistered(producer.clone());
            self.record_failure("eval", Some(producer), None, Some(tag), &[], &e);
            return Err(e);
        }
        let id = self.fresh_id();
        let tuple = Tuple {
            id,
            tag: tag.to_string(),
            values: Vec::new(),
            producer,
            liveness: Liveness::Active,
            snapshot_version: 0,
        };
        self.record("eval", &tuple);
        self.pending.insert(id, PendingEval { tuple, ready_at, thunk });
        Ok(id)
    }

    pub fn eval_ready_at(&self, id: TupleId) -> Option<SimTime> {
        self.pending.get(&id).map(|p| p.ready_at)
    }

    /// Runs the thunk of a pending `eval`. On success the tuple becomes
    /// visible and is signalled; on failure it is dropped and the manager
    /// emits `("eval_failed", id)`.
    pub fn materialize(&mut self, id: TupleId) -> Result<TupleId, SpaceError> {
        let PendingEval { mut tuple, thunk, .. } = self.pending.remove(&id).ok_or(SpaceError::NotPending(id))?;
        let outcome = thunk().and_then(|values| {
            self.check_emission(&tuple.producer, &tuple.tag, &values)
                .map(|_| values)
                .map_err(|e| e.to_string())
        });
        match outcome {
            Ok(values) => {
                tuple.values = values;
                self.record("eval_done", &tuple);
                self.insert(tuple, SignalCause::Eval);
                Ok(id)
            }
            Err(msg) => {
                self.log.push(OpRecord {
                    time: self.now,
                    op: "eval_failed".into(),
                    producer: Some(tuple.producer.clone()),
                    tuple_id: Some(id),
                    tag: Some(tuple.tag.clone()),
                    values: Vec::new(),
                    error: Some(msg),
                });
                self.out(TSM, TAG_EVAL_FAILED, vec![Value::Int(id.0 as i64)])
            }
        }
    }

    /// Emits a live tuple: `generator` is sampled now (snapshot version 1)
    /// and then every `period` ticks via [`TupleSpace::sample`].
    pub fn evalp(
        &mut self,
        producer: impl Into<ComponentId>,
        tag: &str,
        mut generator: Generator,
        period: SimTime,
    ) -> Result<TupleId, SpaceError> {
        let producer = producer.into();
        if period == 0 {
            let e = SpaceError::InvalidPeriod;
            self.record_failure("evalp", Some(producer), None, Some(tag), &[], &e);
            return Err(e);
        }
        let values = generator(self.now);
        if let Err(e) = self.check_emission(&producer, tag, &values) {
            self.record_failure("evalp", Some(producer), None, Some(tag), &values, &e);
            return Err(e);
        }
        let id = self.fresh_id();
        let tuple = Tuple {
            id,
            tag: tag.to_string(),
            values,
            producer,
            liveness: Liveness::LiveWithSnapshot,
            snapshot_version: 1,
        };
        self.record("evalp", &tuple);
        self.insert(tuple, SignalCause::Evalp);
        self.live.insert(
            id,
            LiveSource {
                generator,
                period,
                next_due: self.now + period,
            },
        );
        Ok(id)
    }

    pub fn live_period(&self, id: TupleId) -> Option<SimTime> {
        self.live.get(&id).map(|l| l.period)
    }

    pub fn live_ids(&self) -> Vec<TupleId> {
        self.live.keys().copied().collect()
    }

    /// Samples a live tuple. Returns whether the passive copy changed.
    pub fn sample(&mut self, id: TupleId) -> Result<bool, SpaceError> {
        let now = self.now;
        let source = self.live.get_mut(&id).ok_or(SpaceError::NotLive(id))?;
        source.next_due = now + source.period;
        let values = (source.generator)(now);
        let current = self.tuples.get(&id).ok_or(SpaceError::UnknownTuple(id))?;
        if current.values == values {
            return Ok(false);
        }
        let producer = current.producer.clone();
        let tag = current.tag.clone();
        if let Err(e) = self.check_emission(&producer, &tag, &values) {
            self.record_failure("evalp_sample", Some(producer), Some(id), Some(&tag), &values, &e);
            return Err(e);
        }
        let tuple = self.tuples.get_mut(&id).expect("checked above");
        tuple.values = values;
        tuple.snapshot_version += 1;
        let tuple = tuple.clone();
        self.record("evalp_sample", &tuple);
        self.after_change(&tuple, SignalCause::Evalp);
        Ok(true)
    }

    pub fn update(
        &mut self,
        producer: impl Into<ComponentId>,
        id: TupleId,
        values: Vec<Value>,
    ) -> Result<(), SpaceError> {
        let producer = producer.into();
        let check = match self.tuples.get(&id) {
            None => Err(SpaceError::UnknownTuple(id)),
            Some(t) if t.producer != producer => Err(SpaceError::NotOwner {
                tuple: id,
                owner: t.producer.clone(),
                requester: producer.clone(),
            }),
            Some(t) => {
                let tag = t.tag.clone();
                self.check_emission(&producer, &tag, &values)
            }
        };
        if let Err(e) = check {
            let tag = self.tuples.get(&id).map(|t| t.tag.clone());
            self.record_failure("update", Some(producer), Some(id), tag.as_deref(), &values, &e);
            return Err(e);
        }
        let tuple = self.tuples.get_mut(&id).expect("checked above");
        tuple.values = values;
        if tuple.liveness == Liveness::LiveWithSnapshot {
            tuple.snapshot_version += 1;
        }
        let tuple = tuple.clone();
        self.record("update", &tuple);
        self.after_change(&tuple, SignalCause::Update);
        Ok(())
    }

    /// Standalone driver: materializes due `eval`s and samples due `evalp`
    /// tuples up to `t`, ordered by (due time, tuple id).
    pub fn advance_to(&mut self, t: SimTime) {
        loop {
            let next_eval = self
                .pending
                .values()
                .filter(|p| p.ready_at <= t)
                .map(|p| (p.ready_at, p.tuple.id))
                .min();
            let next_live = self
                .live
                .iter()
                .filter(|(_, l)| l.next_due <= t)
                .map(|(id, l)| (l.next_due, *id))
                .min();
            let (due, id, is_eval) = match (next_eval, next_live) {
                (None, None) => break,
                (Some((d, i)), None) => (d, i, true),
                (None, Some((d, i))) => (d, i, false),
                (Some(a), Some(b)) if a <= b => (a.0, a.1, true),
                (_, Some(b)) => (b.0, b.1, false),
            };
            self.now = self.now.max(due);
            // Failures are already logged and signalled by the callee.
            let _ = if is_eval {
                self.materialize(id).map(|_| ())
            } else {
                self.sample(id).map(|_| ())
            };
        }
        self.now = self.now.max(t);
    }

    fn fresh_id(&mut self) -> TupleId {
        let id = TupleId(self.next_id);
        self.next_id += 1;
        id
    }

    fn check_emission(&self, producer: &ComponentId, tag: &str, values: &[Value]) -> Result<(), SpaceError> {
        if !self.producers.contains(producer) {
            return Err(SpaceError::ProducerUnregistered(producer.clone()));
        }
        if values.is_empty() {
            return Err(SpaceError::EmptyValues);
        }
        for v in values {
            if let Value::Entity(e) = v {
                if !self.entities.contains(*e) {
                    return Err(SpaceError::UnknownEntity(*e));
                }
            }
        }
        if let Some((_, value)) = self.metric_subject(tag, values) {
            if PERCENT_METRICS.contains(&tag) {
                let ok = value.as_f64().is_some_and(|x| (0.0..=100.0).contains(&x));
                if !ok {
                    return Err(SpaceError::InvalidMetricValue {
                        metric: tag.to_string(),
                        value: value.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn metric_subject<'a>(&self, tag: &str, values: &'a [Value]) -> Option<(EntityRef, &'a Value)> {
        if !self.metrics.contains(tag) || values.len() < 2 {
            return None;
        }
        values[0].as_entity().map(|e| (e, &values[1]))
    }

    fn insert(&mut self, tuple: Tuple, cause: SignalCause) {
        let id = tuple.id;
        self.tuples.insert(id, tuple.clone());
        self.after_change(&tuple, cause);
    }

    fn after_change(&mut self, tuple: &Tuple, cause: SignalCause) {
        if let Some((e, v)) = self.metric_subject(&tuple.tag, &tuple.values) {
            let v = v.clone();
            self.entities.observe(e, &tuple.tag, v, tuple.id);
        } else if let Some(e) = tuple.values.first().and_then(Value::as_entity) {
            let status = match tuple.tag.as_str() {
                TAG_NODE_DOWN => Some(Status::Down),
                TAG_NODE_UP => Some(Status::Up),
                TAG_ISOLATED => Some(Status::Isolated),
                _ => None,
            };
            if let Some(s) = status {
                let _ = self.entities.set_status(e, s);
            }
        }
        self.signal_seq += 1;
        self.signals.push_back(InsertionSignal {
            seq: self.signal_seq,
            time: self.now,
            tuple: tuple.id,
            tag: tuple.tag.clone(),
            cause,
        });
    }

    /// After a withdrawal, falls back to the newest remaining tuple for the
    /// same (entity, metric).
    fn forget_metric(&mut self, tuple: &Tuple) {
        let Some((e, _)) = self.metric_subject(&tuple.tag, &tuple.values) else {
            return;
        };
        if self.entities.attr_source(e, &tuple.tag) != Some(tuple.id) {
            return;
        }
        let replacement = self
            .tuples
            .values()
            .rev()
            .find(|t| t.tag == tuple.tag && t.values.len() >= 2 && t.values[0].as_entity() == Some(e))
            .map(|t| Attribute {
                value: t.values[1].clone(),
                tuple: t.id,
            });
        self.entities.replace_attr(e, &tuple.tag, replacement);
    }

    fn record(&mut self, op: &str, tuple: &Tuple) {
        self.log.push(OpRecord {
            time: self.now,
            op: op.to_string(),
            producer: Some(tuple.producer.clone()),
            tuple_id: Some(tuple.id),
            tag: Some(tuple.tag.clone()),
            values: tuple.values.clone(),
            error: None,
        });
    }

    fn record_failure(
        &mut self,
        op: &str,
        producer: Option<ComponentId>,
        tuple_id: Option<TupleId>,
        tag: Option<&str>,
        values: &[Value],
        err: &SpaceError,
    ) {
        self.log.push(OpRecord {
            time: self.now,
            op: op.to_string(),
            producer,
            tuple_id,
            tag: tag.map(str::to_string),
            values: values.to_vec(),
            error: Some(err.to_string()),
        });
    }
}

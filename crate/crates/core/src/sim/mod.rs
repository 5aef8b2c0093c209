//! Deterministic discrete-event simulation of a small network of stations.
//!
//! Each station has a basic services layer (connectionless group messaging
//! and a heartbeat failure detector that also watches the local TSM and ASI
//! agents) plus change detectors publishing QoS metrics as live tuples. One
//! logical tuple space and one scenario manager serve the whole network.
//! Events run in `(time, seq)` order and all randomness comes from a
//! ChaCha generator seeded by the config, so a config reproduces its trace
//! byte for byte.

mod config;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    timeline_value, Agent, DelayRange, Fault, FaultSpec, ScenarioSpec, ScriptedEmission, SimConfig, TaskSpec, Timeline,
};

use crate::ariel::Bundle;
use crate::asi::{EffectKind, Snapshot};
use crate::scenario::{scenarios_from_bundle, Scenario, ScenarioError, ScenarioManager, ScenarioRecord, TraceEvent};
use crate::tuple_space::{
    EntityRef, InsertionSignal, OpRecord, SimTime, Template, Thunk, TupleId, TupleSpace, Value, TAG_NODE_DOWN,
    TAG_NODE_UP,
};

pub const TAG_HEARTBEAT: &str = "heartbeat";
pub const TAG_SUSPECT: &str = "suspect";
pub const TAG_COMPONENT_DOWN: &str = "component_down";
/// Producer of failure-detector verdict tuples.
pub const FD: &str = "FD";
/// Producer of local-agent monitoring tuples.
pub const BSL: &str = "BSL";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown station {0}")]
    UnknownStation(u32),
    #[error("time {requested} is before the current time {now}")]
    TimeInPast { now: SimTime, requested: SimTime },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Load(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Trusted,
    Suspected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    SenderDown,
    ReceiverDown,
    Partition,
}

/// Effect as it appears in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRecord {
    pub time: SimTime,
    pub program: String,
    pub triplet_index: usize,
    pub effect: EffectKind,
}

/// One line of the simulation trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceEntry {
    Op(OpRecord),
    Scenario(ScenarioRecord),
    Effect(EffectRecord),
    Heartbeat {
        time: SimTime,
        station: u32,
    },
    Send {
        time: SimTime,
        from: u32,
        to: u32,
        tag: String,
        deliver_at: SimTime,
    },
    Deliver {
        time: SimTime,
        from: u32,
        to: u32,
        tag: String,
    },
    Drop {
        time: SimTime,
        from: u32,
        to: Option<u32>,
        tag: String,
        reason: DropReason,
    },
    Verdict {
        time: SimTime,
        observer: u32,
        target: u32,
        verdict: Verdict,
    },
    ComponentDown {
        time: SimTime,
        station: u32,
        agent: Agent,
    },
    Fault {
        time: SimTime,
        fault: Fault,
    },
    Halt {
        time: SimTime,
        message: String,
    },
}

impl TraceEntry {
    pub fn time(&self) -> SimTime {
        match self {
            TraceEntry::Op(r) => r.time,
            TraceEntry::Scenario(r) => r.time,
            TraceEntry::Effect(r) => r.time,
            TraceEntry::Heartbeat { time, .. }
            | TraceEntry::Send { time, .. }
            | TraceEntry::Deliver { time, .. }
            | TraceEntry::Drop { time, .. }
            | TraceEntry::Verdict { time, .. }
            | TraceEntry::ComponentDown { time, .. }
            | TraceEntry::Fault { time, .. }
            | TraceEntry::Halt { time, .. } => *time,
        }
    }
}

#[derive(Debug)]
enum EventKind {
    Deliver {
        from: u32,
        to: u32,
        tag: String,
        values: Vec<Value>,
    },
    Sample {
        tuple: TupleId,
        station: u32,
    },
    Heartbeat,
    TimeoutCheck,
    AgentWatchdog {
        station: u32,
        agent: Agent,
        heard_at: SimTime,
    },
    Fault(Fault),
    Emit {
        producer: String,
        tag: String,
        values: Vec<Value>,
    },
    Materialize {
        tuple: TupleId,
    },
    Signal {
        signal: InsertionSignal,
        root: u64,
        from_effect: bool,
    },
}

#[derive(Debug, Clone, Copy)]
struct PeerView {
    last_heard: SimTime,
    verdict: Verdict,
}

#[derive(Debug, Clone, Copy)]
struct AgentView {
    alive: bool,
    last_heard: SimTime,
    reported: bool,
}

#[derive(Debug, Clone)]
struct Station {
    up: bool,
    peers: BTreeMap<u32, PeerView>,
    agents: BTreeMap<Agent, AgentView>,
}

pub struct Simulation {
    config: SimConfig,
    now: SimTime,
    seq: u64,
    queue: BinaryHeap<Reverse<(SimTime, u64)>>,
    events: BTreeMap<u64, EventKind>,
    rng: ChaCha8Rng,
    space: TupleSpace,
    manager: ScenarioManager,
    stations: BTreeMap<u32, Station>,
    partition: Option<(BTreeSet<u32>, BTreeSet<u32>)>,
    detectors: BTreeMap<(u32, String), TupleId>,
    cascade: BTreeMap<u64, usize>,
    trace: Vec<TraceEntry>,
    tracing: bool,
    halted: Option<SimError>,
    processed: u64,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("now", &self.now)
            .field("queued", &self.events.len())
            .field("processed", &self.processed)
            .finish()
    }
}

impl Simulation {
    /// Builds the network. With `scenarios == None` the scenario list comes
    /// from the bundle's predicates.
    pub fn build(config: SimConfig, bundle: Bundle, scenarios: Option<Vec<Scenario>>) -> Result<Self, SimError> {
        config.validate()?;
        let vocab = config.vocabulary();
        let scenarios = match scenarios {
            Some(s) => s,
            None => scenarios_from_bundle(&bundle, &vocab)?,
        };
        let mut space = TupleSpace::new();
        for m in config.detector_periods.keys().chain(&config.extra_metrics) {
            space.register_metric(m.clone());
        }
        for p in [FD, BSL] {
            space.register_producer(p);
        }
        for e in &config.emissions {
            space.register_producer(e.producer.as_str());
        }
        let mut stations = BTreeMap::new();
        for id in 1..=config.stations {
            space.entities_mut().add_station(id);
            space.register_producer(format!("CD{id}").as_str());
            let peers = (1..=config.stations)
                .filter(|p| *p != id)
                .map(|p| {
                    (
                        p,
                        PeerView {
                            last_heard: 0,
                            verdict: Verdict::Trusted,
                        },
                    )
                })
                .collect();
            let agents = Agent::ALL
                .into_iter()
                .map(|a| {
                    (
                        a,
                        AgentView {
                            alive: true,
                            last_heard: 0,
                            reported: false,
                        },
                    )
                })
                .collect();
            stations.insert(
                id,
                Station {
                    up: true,
                    peers,
                    agents,
                },
            );
        }
        for ap in 1..=config.access_points {
            space.entities_mut().add_access_point(ap);
        }
        for t in &config.tasks {
            space
                .entities_mut()
                .add_task(t.id, t.host, t.priority, t.uses_bsl_or_linda)
                .map_err(|e| SimError::Config(e.to_string()))?;
        }

        // Change detectors: one live tuple per (station, metric) with a source.
        let mut timelines: BTreeMap<(u32, String), Vec<(SimTime, f64)>> = BTreeMap::new();
        for t in &config.timelines {
            let mut pts = t.points.clone();
            pts.sort_by_key(|(at, _)| *at);
            timelines.insert((t.station, t.metric.clone()), pts);
        }
        let mut detectors = BTreeMap::new();
        let mut first_samples = Vec::new();
        for (metric, &period) in &config.detector_periods {
            for id in 1..=config.stations {
                let points = match timelines.get(&(id, metric.clone())) {
                    Some(p) => p.clone(),
                    None => match config.metric_defaults.get(metric) {
                        Some(v) => vec![(0, *v)],
                        None => continue,
                    },
                };
                let subject: Value = EntityRef::station(id).into();
                let generator =
                    Box::new(move |t: SimTime| vec![subject.clone(), Value::Real(timeline_value(&points, t))]);
                let tuple = space
                    .evalp(format!("CD{id}").as_str(), metric, generator, period)
                    .map_err(|e| SimError::Config(format!("detector {metric} on station {id}: {e}")))?;
                detectors.insert((id, metric.clone()), tuple);
                first_samples.push((period, tuple, id));
            }
        }

        let manager = ScenarioManager::register(bundle, scenarios, &Snapshot::of(&space))?
            .with_mode(config.metric_mode)
            .with_policy(config.trigger);

        let mut sim = Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            events: BTreeMap::new(),
            space,
            manager,
            stations,
            partition: None,
            detectors,
            cascade: BTreeMap::new(),
            trace: Vec::new(),
            tracing: true,
            halted: None,
            processed: 0,
            config,
        };
        // Scripted faults first so that, at equal times, they precede
        // periodic activity.
        for f in sim.config.faults.clone() {
            sim.schedule(f.time, EventKind::Fault(f.fault));
        }
        for e in sim.config.emissions.clone() {
            sim.schedule(
                e.time,
                EventKind::Emit {
                    producer: e.producer,
                    tag: e.tag,
                    values: e.values,
                },
            );
        }
        let p = sim.config.heartbeat_period;
        sim.schedule(p, EventKind::Heartbeat);
        sim.schedule(p, EventKind::TimeoutCheck);
        for (period, tuple, station) in first_samples {
            sim.schedule(period, EventKind::Sample { tuple, station });
        }
        sim.flush_logs();
        sim.queue_signals(0, false);
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn space(&self) -> &TupleSpace {
        &self.space
    }

    pub fn manager(&self) -> &ScenarioManager {
        &self.manager
    }

    pub fn manager_mut(&mut self) -> &mut ScenarioManager {
        &mut self.manager
    }

    pub fn events_processed(&self) -> u64 {
        self.processed
    }

    /// Number of live tuples fed by change detectors.
    pub fn detector_count(&self) -> usize {
        self.detectors.len()
    }

    pub fn detector(&self, station: u32, metric: &str) -> Option<TupleId> {
        self.detectors.get(&(station, metric.to_string())).copied()
    }

    pub fn is_up(&self, station: u32) -> bool {
        self.stations.get(&station).is_some_and(|s| s.up)
    }

    /// `observer`'s current opinion of `target`.
    pub fn verdict(&self, observer: u32, target: u32) -> Option<Verdict> {
        self.stations.get(&observer)?.peers.get(&target).map(|p| p.verdict)
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceEntry> {
        std::mem::take(&mut self.trace)
    }

    /// Writes the trace as line-delimited JSON.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.trace {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn trace_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_trace(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    fn schedule(&mut self, time: SimTime, kind: EventKind) -> u64 {
        self.seq += 1;
        let seq = self.seq;
        self.queue.push(Reverse((time, seq)));
        self.events.insert(seq, kind);
        seq
    }

    fn check_time(&self, time: SimTime) -> Result<(), SimError> {
        if time < self.now {
            return Err(SimError::TimeInPast {
                now: self.now,
                requested: time,
            });
        }
        Ok(())
    }

    fn check_station(&self, id: u32) -> Result<(), SimError> {
        if self.stations.contains_key(&id) {
            Ok(())
        } else {
            Err(SimError::UnknownStation(id))
        }
    }

    pub fn inject_fault(&mut self, time: SimTime, fault: Fault) -> Result<(), SimError> {
        self.check_time(time)?;
        match &fault {
            Fault::StationDown { station } | Fault::StationUp { station } | Fault::AgentDown { station, .. } => {
                self.check_station(*station)?
            }
            Fault::Partition { a, b } => {
                for s in a.iter().chain(b) {
                    self.check_station(*s)?;
                }
            }
            Fault::Heal => {}
        }
        self.schedule(time, EventKind::Fault(fault));
        Ok(())
    }

    /// Schedules a tuple emission by `producer`, registering it if needed.
    pub fn emit_at(&mut self, time: SimTime, producer: &str, tag: &str, values: Vec<Value>) -> Result<(), SimError> {
        self.check_time(time)?;
        self.space.register_producer(producer);
        self.schedule(
            time,
            EventKind::Emit {
                producer: producer.to_string(),
                tag: tag.to_string(),
                values,
            },
        );
        Ok(())
    }

    /// `eval` whose thunk completes `delay` ticks from now.
    pub fn eval(&mut self, producer: &str, tag: &str, delay: SimTime, thunk: Thunk) -> Result<TupleId, SimError> {
        self.space.register_producer(producer);
        let id = self
            .space
            .eval(producer, tag, self.now + delay, thunk)
            .map_err(|e| SimError::Config(e.to_string()))?;
        self.schedule(self.now + delay, EventKind::Materialize { tuple: id });
        self.flush_logs();
        Ok(id)
    }

    /// Runs every event with `time <= t_end` and returns the trace produced.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<&[TraceEntry], SimError> {
        if let Some(e) = &self.halted {
            return Err(e.clone());
        }
        self.check_time(t_end)?;
        let start = self.trace.len();
        while let Some(&Reverse((time, seq))) = self.queue.peek() {
            if time > t_end {
                break;
            }
            self.queue.pop();
            let kind = self.events.remove(&seq).expect("queued events are stored");
            if time > self.now {
                self.cascade.clear();
            }
            self.now = time;
            self.space.set_time(time);
            self.processed += 1;
            let is_signal = matches!(kind, EventKind::Signal { .. });
            let (root, from_effect) = match &kind {
                EventKind::Signal { root, .. } => (*root, true),
                _ => (seq, false),
            };
            if let Err(e) = self.handle(kind) {
                self.note(TraceEntry::Halt {
                    time,
                    message: e.to_string(),
                });
                self.halted = Some(e.clone());
                return Err(e);
            }
            self.flush_logs();
            self.queue_signals(root, from_effect || is_signal);
        }
        self.now = self.now.max(t_end);
        self.space.set_time(self.now);
        Ok(&self.trace[start..])
    }

    fn queue_signals(&mut self, root: u64, from_effect: bool) {
        for signal in self.space.take_signals() {
            let t = self.now;
            self.schedule(
                t,
                EventKind::Signal {
                    signal,
                    root,
                    from_effect,
                },
            );
        }
    }

    fn flush_logs(&mut self) {
        let ops = self.space.take_log();
        let records = self.manager.take_trace();
        if !self.tracing {
            return;
        }
        for r in records {
            if r.event == TraceEvent::Execute {
                let effects: Vec<TraceEntry> = r
                    .effects
                    .iter()
                    .map(|e| {
                        TraceEntry::Effect(EffectRecord {
                            time: r.time,
                            program: e.program.clone(),
                            triplet_index: e.triplet_index,
                            effect: e.kind.clone(),
                        })
                    })
                    .collect();
                self.trace.push(TraceEntry::Scenario(r));
                self.trace.extend(effects);
            } else {
                self.trace.push(TraceEntry::Scenario(r));
            }
        }
        self.trace.extend(ops.into_iter().map(TraceEntry::Op));
    }

    fn note(&mut self, entry: TraceEntry) {
        self.flush_logs();
        if self.tracing {
            self.trace.push(entry);
        }
    }

    fn handle(&mut self, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::Deliver { from, to, tag, values } => self.deliver(from, to, tag, values),
            EventKind::Sample { tuple, station } => {
                if self.is_up(station) {
                    // Failures are logged by the space.
                    let _ = self.space.sample(tuple);
                }
                let period = self.space.live_period(tuple).unwrap_or(self.config.heartbeat_period);
                self.schedule(self.now + period, EventKind::Sample { tuple, station });
            }
            EventKind::Heartbeat => self.heartbeat(),
            EventKind::TimeoutCheck => self.timeout_check(),
            EventKind::AgentWatchdog {
                station,
                agent,
                heard_at,
            } => self.agent_watchdog(station, agent, heard_at),
            EventKind::Fault(f) => self.apply_fault(f),
            EventKind::Emit { producer, tag, values } => {
                let _ = self.space.out(producer.as_str(), &tag, values);
            }
            EventKind::Materialize { tuple } => {
                let _ = self.space.materialize(tuple);
            }
            EventKind::Signal {
                signal,
                root,
                from_effect,
            } => {
                if from_effect {
                    let n = self.cascade.entry(root).or_insert(0);
                    *n += 1;
                    if *n > self.config.cascade_cap {
                        return Err(ScenarioError::CascadeCapExceeded {
                            time: self.now,
                            cap: self.config.cascade_cap,
                            signals: *n,
                        }
                        .into());
                    }
                }
                self.manager.on_insertion(&mut self.space, &signal);
            }
        }
        Ok(())
    }

    fn separated(&self, a: u32, b: u32) -> bool {
        match &self.partition {
            Some((x, y)) => (x.contains(&a) && y.contains(&b)) || (y.contains(&a) && x.contains(&b)),
            None => false,
        }
    }

    /// Connectionless group send: one delivery per other station that is
    /// reachable now, each after an independent uniform delay.
    pub fn group_send(&mut self, from: u32, tag: &str, values: Vec<Value>) -> Result<(), SimError> {
        self.check_station(from)?;
        if !self.is_up(from) {
            self.note(TraceEntry::Drop {
                time: self.now,
                from,
                to: None,
                tag: tag.to_string(),
                reason: DropReason::SenderDown,
            });
            return Ok(());
        }
        let peers: Vec<u32> = self.stations.keys().copied().filter(|p| *p != from).collect();
        let DelayRange { min, max } = self.config.message_delay;
        for to in peers {
            if self.separated(from, to) {
                self.note(TraceEntry::Drop {
                    time: self.now,
                    from,
                    to: Some(to),
                    tag: tag.to_string(),
                    reason: DropReason::Partition,
                });
                continue;
            }
            let deliver_at = self.now + self.rng.gen_range(min..=max);
            self.note(TraceEntry::Send {
                time: self.now,
                from,
                to,
                tag: tag.to_string(),
                deliver_at,
            });
            self.schedule(
                deliver_at,
                EventKind::Deliver {
                    from,
                    to,
                    tag: tag.to_string(),
                    values: values.clone(),
                },
            );
        }
        Ok(())
    }

    fn deliver(&mut self, from: u32, to: u32, tag: String, _values: Vec<Value>) {
        let reason = if !self.is_up(to) {
            Some(DropReason::ReceiverDown)
        } else if self.separated(from, to) {
            Some(DropReason::Partition)
        } else {
            None
        };
        if let Some(reason) = reason {
            self.note(TraceEntry::Drop {
                time: self.now,
                from,
                to: Some(to),
                tag,
                reason,
            });
            return;
        }
        self.note(TraceEntry::Deliver {
            time: self.now,
            from,
            to,
            tag: tag.clone(),
        });
        if tag == TAG_HEARTBEAT {
            let now = self.now;
            let was = {
                let view = self
                    .stations
                    .get_mut(&to)
                    .and_then(|s| s.peers.get_mut(&from))
                    .expect("peers are registered at build");
                view.last_heard = now;
                std::mem::replace(&mut view.verdict, Verdict::Trusted)
            };
            if was == Verdict::Suspected {
                self.trust(to, from);
            }
        }
    }

    fn heartbeat(&mut self) {
        let now = self.now;
        let timeout = self.config.failure_timeout;
        let ids: Vec<u32> = self.stations.keys().copied().collect();
        for id in ids {
            if !self.is_up(id) {
                continue;
            }
            self.note(TraceEntry::Heartbeat { time: now, station: id });
            let _ = self.group_send(id, TAG_HEARTBEAT, vec![EntityRef::station(id).into()]);
            for agent in Agent::ALL {
                let st = self.stations.get_mut(&id).expect("known station");
                let view = st.agents.get_mut(&agent).expect("agents registered");
                if view.alive {
                    view.last_heard = now;
                    self.schedule(
                        now + timeout + 1,
                        EventKind::AgentWatchdog {
                            station: id,
                            agent,
                            heard_at: now,
                        },
                    );
                }
            }
        }
        self.schedule(now + self.config.heartbeat_period, EventKind::Heartbeat);
    }

    fn timeout_check(&mut self) {
        let now = self.now;
        let timeout = self.config.failure_timeout;
        let mut newly = Vec::new();
        for (&observer, st) in self.stations.iter_mut() {
            if !st.up {
                continue;
            }
            for (&target, view) in st.peers.iter_mut() {
                if view.verdict == Verdict::Trusted && now.saturating_sub(view.last_heard) > timeout {
                    view.verdict = Verdict::Suspected;
                    newly.push((observer, target));
                }
            }
        }
        for (observer, target) in newly {
            self.suspect(observer, target);
        }
        self.schedule(now + self.config.heartbeat_period, EventKind::TimeoutCheck);
    }

    fn suspect(&mut self, observer: u32, target: u32) {
        self.note(TraceEntry::Verdict {
            time: self.now,
            observer,
            target,
            verdict: Verdict::Suspected,
        });
        let pair = vec![EntityRef::station(observer).into(), EntityRef::station(target).into()];
        let _ = self.space.out(FD, TAG_SUSPECT, pair);
        let t = EntityRef::station(target);
        if self.space.entities().status(t) == Some(crate::tuple_space::Status::Up) {
            let _ = self.space.out(FD, TAG_NODE_DOWN, vec![t.into()]);
        }
    }

    fn trust(&mut self, observer: u32, target: u32) {
        self.note(TraceEntry::Verdict {
            time: self.now,
            observer,
            target,
            verdict: Verdict::Trusted,
        });
        let t = EntityRef::station(target);
        let pair = [EntityRef::station(observer).into(), t.into()];
        let _ = self.space.take(FD, &Template::of(TAG_SUSPECT, &pair));
        let still = Template::new(TAG_SUSPECT).any().exact(t);
        let suspected = self.space.rd(&still).is_some();
        if !suspected && self.space.entities().status(t) == Some(crate::tuple_space::Status::Down) {
            let _ = self.space.out(FD, TAG_NODE_UP, vec![t.into()]);
        }
    }

    fn agent_watchdog(&mut self, station: u32, agent: Agent, heard_at: SimTime) {
        let Some(st) = self.stations.get_mut(&station) else {
            return;
        };
        if !st.up {
            return;
        }
        let view = st.agents.get_mut(&agent).expect("agents registered");
        if view.last_heard != heard_at || view.reported {
            return;
        }
        view.reported = true;
        self.note(TraceEntry::ComponentDown {
            time: self.now,
            station,
            agent,
        });
        let _ = self.space.out(
            BSL,
            TAG_COMPONENT_DOWN,
            vec![EntityRef::station(station).into(), Value::text(agent.as_str())],
        );
    }

    fn apply_fault(&mut self, fault: Fault) {
        self.note(TraceEntry::Fault {
            time: self.now,
            fault: fault.clone(),
        });
        let now = self.now;
        match fault {
            Fault::StationDown { station } => {
                if let Some(s) = self.stations.get_mut(&station) {
                    s.up = false;
                }
            }
            Fault::StationUp { station } => {
                let mut restored = Vec::new();
                if let Some(s) = self.stations.get_mut(&station) {
                    if s.up {
                        return;
                    }
                    s.up = true;
                    for (&target, view) in s.peers.iter_mut() {
                        view.last_heard = now;
                        if view.verdict == Verdict::Suspected {
                            view.verdict = Verdict::Trusted;
                            restored.push(target);
                        }
                    }
                    for view in s.agents.values_mut() {
                        *view = AgentView {
                            alive: true,
                            last_heard: now,
                            reported: false,
                        };
                    }
                }
                for target in restored {
                    self.trust(station, target);
                }
            }
            Fault::Partition { a, b } => self.partition = Some((a, b)),
            Fault::Heal => self.partition = None,
            Fault::AgentDown { station, agent } => {
                if let Some(v) = self.stations.get_mut(&station).and_then(|s| s.agents.get_mut(&agent)) {
                    v.alive = false;
                }
            }
        }
    }
}

/// Builds and runs a simulation to `until`, returning it for inspection.
pub fn run(config: SimConfig, bundle: Bundle, until: SimTime) -> Result<Simulation, SimError> {
    let mut sim = Simulation::build(config, bundle, None)?;
    sim.run_until(until)?;
    Ok(sim)
}

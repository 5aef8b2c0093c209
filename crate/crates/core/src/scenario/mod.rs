//! Scenario detection and adaptation triggering.
//!
//! After every insertion signal the manager snapshots the entity model,
//! picks the first scenario (by rank) whose predicate holds, records a switch
//! when that differs from the current one, runs the current scenario's
//! program once and applies the resulting effects through the TSM.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ariel::{compile_guard, parse_guard, ACodeProgram, Bundle, GuardExpr, Scope, Vocabulary, OTHERWISE};
use crate::asi::{self, Effect, EffectKind, MetricMode, Snapshot};
use crate::tuple_space::{
    EntityKind, EntityRef, InsertionSignal, SimTime, Status, Template, TupleSpace, Value, TAG_ISOLATED, TSM,
};

pub const TAG_SYSTEM_ALARM: &str = "system_alarm";
pub const TAG_ASI_ERROR: &str = "asi_error";
/// Parameter written by `SET_VOTE_THRESHOLD`.
pub const PARAM_VOTE_THRESHOLD: &str = "vote_threshold";
pub const DEFAULT_CASCADE_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario `{scenario}`: {msg}")]
    Predicate { scenario: String, msg: String },
    #[error("scenario `{scenario}` refers to program `{program}` which is not in the bundle")]
    DanglingProgram { scenario: String, program: String },
    #[error("no `{OTHERWISE}` scenario registered")]
    MissingOtherwise,
    #[error("duplicate scenario `{0}`")]
    Duplicate(String),
    #[error("cascade cap {cap} exceeded at t={time}: {signals} signals in one step")]
    CascadeCapExceeded { time: SimTime, cap: usize, signals: usize },
}

/// A named quasi-stable operating regime.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Predicate in guard syntax.
    pub predicate_source: String,
    pub predicate: GuardExpr,
    predicate_code: ACodeProgram,
    /// Bundle entry holding the scenario's program.
    pub program: String,
    /// Lower ranks are checked first.
    pub rank: u32,
}

impl Scenario {
    pub fn new(
        name: &str,
        predicate: &str,
        program: &str,
        rank: u32,
        vocab: &Vocabulary,
    ) -> Result<Self, ScenarioError> {
        let err = |msg: String| ScenarioError::Predicate {
            scenario: name.to_string(),
            msg,
        };
        let expr = parse_guard(predicate, vocab).map_err(|e| err(e.to_string()))?;
        let code = compile_guard(&expr, &format!("{name}_predicate")).map_err(|e| err(e.to_string()))?;
        Ok(Self {
            name: name.to_string(),
            predicate_source: predicate.to_string(),
            predicate: expr,
            predicate_code: code,
            program: program.to_string(),
            rank,
        })
    }

    /// The default scenario, whose predicate is always true.
    pub fn otherwise(program: &str) -> Self {
        Self::new(OTHERWISE, "TRUE", program, u32::MAX, &Vocabulary::default()).expect("TRUE is a valid predicate")
    }

    pub fn holds(&self, snapshot: &Snapshot) -> bool {
        self.name == OTHERWISE
            || asi::eval_predicate(&self.predicate_code, snapshot, MetricMode::Lenient).unwrap_or(false)
    }
}

/// Builds the scenario list from a bundle's predicate strings, in bundle
/// order. Entries without a predicate other than `Otherwise` are rejected.
pub fn scenarios_from_bundle(bundle: &Bundle, vocab: &Vocabulary) -> Result<Vec<Scenario>, ScenarioError> {
    bundle
        .iter()
        .enumerate()
        .map(|(rank, (name, entry))| {
            if name == OTHERWISE {
                return Ok(Scenario::otherwise(name));
            }
            let pred = entry.predicate.as_deref().ok_or_else(|| ScenarioError::Predicate {
                scenario: name.to_string(),
                msg: "bundle entry has no predicate".into(),
            })?;
            Scenario::new(name, pred, name, rank as u32, vocab)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioState {
    pub current: String,
    pub entered_at: SimTime,
    pub switch_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Switch,
    Execute,
}

/// One line of the scenario trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub time: SimTime,
    pub event: TraceEvent,
    pub from: Option<String>,
    pub to: String,
    pub program: String,
    pub effects: Vec<Effect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// When the current program runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerPolicy {
    #[default]
    EveryInsertion,
    /// Only right after a scenario switch.
    OnSwitch,
}

/// User method reachable through `CALL`.
pub type Method = Box<dyn FnMut(&mut TupleSpace) -> Result<(), String> + Send>;

/// What one `on_insertion` call did.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub switched: Option<(String, String)>,
    pub executed: bool,
    pub effects: Vec<Effect>,
}

pub struct ScenarioManager {
    bundle: Bundle,
    scenarios: Vec<Scenario>,
    state: ScenarioState,
    mode: MetricMode,
    policy: TriggerPolicy,
    methods: BTreeMap<String, Method>,
    trace: Vec<ScenarioRecord>,
    executions: u64,
}

impl std::fmt::Debug for ScenarioManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioManager")
            .field("scenarios", &self.order())
            .field("state", &self.state)
            .field("executions", &self.executions)
            .finish()
    }
}

impl ScenarioManager {
    /// Registers scenarios against a bundle and runs one detection pass on
    /// `initial`. `Otherwise` is moved last whatever its rank.
    pub fn register(bundle: Bundle, mut scenarios: Vec<Scenario>, initial: &Snapshot) -> Result<Self, ScenarioError> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &scenarios {
            if !seen.insert(s.name.clone()) {
                return Err(ScenarioError::Duplicate(s.name.clone()));
            }
            if bundle.program(&s.program).is_none() {
                return Err(ScenarioError::DanglingProgram {
                    scenario: s.name.clone(),
                    program: s.program.clone(),
                });
            }
        }
        if !seen.contains(OTHERWISE) {
            return Err(ScenarioError::MissingOtherwise);
        }
        scenarios.sort_by_key(|s| (s.name == OTHERWISE, s.rank));
        let mut m = Self {
            bundle,
            scenarios,
            state: ScenarioState {
                current: OTHERWISE.to_string(),
                entered_at: 0,
                switch_count: 0,
            },
            mode: MetricMode::Lenient,
            policy: TriggerPolicy::EveryInsertion,
            methods: BTreeMap::new(),
            trace: Vec::new(),
            executions: 0,
        };
        m.state.current = m.detect(initial).to_string();
        Ok(m)
    }

    /// Registers using the predicates stored in the bundle.
    pub fn from_bundle(bundle: Bundle, vocab: &Vocabulary, initial: &Snapshot) -> Result<Self, ScenarioError> {
        let scenarios = scenarios_from_bundle(&bundle, vocab)?;
        Self::register(bundle, scenarios, initial)
    }

    pub fn with_mode(mut self, mode: MetricMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_policy(mut self, policy: TriggerPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn register_method(&mut self, name: impl Into<String>, method: Method) {
        self.methods.insert(name.into(), method);
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn order(&self) -> Vec<&str> {
        self.scenarios.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn bundle(&self) -> &Bundle {
        &self.bundle
    }

    pub fn state(&self) -> &ScenarioState {
        &self.state
    }

    pub fn current(&self) -> &str {
        &self.state.current
    }

    pub fn executions(&self) -> u64 {
        self.executions
    }

    pub fn trace(&self) -> &[ScenarioRecord] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<ScenarioRecord> {
        std::mem::take(&mut self.trace)
    }

    /// First scenario in rank order whose predicate holds.
    pub fn detect(&self, snapshot: &Snapshot) -> &str {
        self.scenarios
            .iter()
            .find(|s| s.holds(snapshot))
            .map(|s| s.name.as_str())
            .unwrap_or(OTHERWISE)
    }

    fn scenario(&self, name: &str) -> &Scenario {
        self.scenarios
            .iter()
            .find(|s| s.name == name)
            .expect("current scenario is registered")
    }

    pub fn on_insertion(&mut self, space: &mut TupleSpace, signal: &InsertionSignal) -> Outcome {
        let now = space.now();
        let snapshot = Snapshot::of(space);
        let detected = self.detect(&snapshot).to_string();
        let mut switched = None;
        if detected != self.state.current {
            let from = std::mem::replace(&mut self.state.current, detected.clone());
            self.state.entered_at = now;
            self.state.switch_count += 1;
            self.trace.push(ScenarioRecord {
                time: now,
                event: TraceEvent::Switch,
                from: Some(from.clone()),
                to: detected.clone(),
                program: self.scenario(&detected).program.clone(),
                effects: Vec::new(),
                signal: Some(signal.seq),
                error: None,
            });
            switched = Some((from, detected.clone()));
        }
        if self.policy == TriggerPolicy::OnSwitch && switched.is_none() {
            return Outcome {
                switched,
                executed: false,
                effects: Vec::new(),
            };
        }
        let program_name = self.scenario(&self.state.current).program.clone();
        let program = self
            .bundle
            .program(&program_name)
            .expect("registration checked every program")
            .clone();
        self.executions += 1;
        let (effects, error) = match asi::execute(&program, &snapshot, self.mode) {
            Ok(effects) => (effects, None),
            Err(e) => {
                let msg = e.to_string();
                emit_once(
                    space,
                    TAG_ASI_ERROR,
                    vec![Value::text(&program.name), Value::text(&msg)],
                );
                (Vec::new(), Some(msg))
            }
        };
        self.trace.push(ScenarioRecord {
            time: now,
            event: TraceEvent::Execute,
            from: None,
            to: self.state.current.clone(),
            program: program.name.clone(),
            effects: effects.clone(),
            signal: Some(signal.seq),
            error,
        });
        self.apply_effects(space, &effects);
        Outcome {
            switched,
            executed: true,
            effects,
        }
    }

    /// Handles every queued signal, including the ones raised by effects,
    /// and fails once more than `cap` signals occur in the same call.
    pub fn process_pending(&mut self, space: &mut TupleSpace, cap: usize) -> Result<usize, ScenarioError> {
        let mut handled = 0;
        while let Some(sig) = space.next_signal() {
            handled += 1;
            if handled > cap {
                return Err(ScenarioError::CascadeCapExceeded {
                    time: space.now(),
                    cap,
                    signals: handled,
                });
            }
            self.on_insertion(space, &sig);
        }
        Ok(handled)
    }

    /// Applies effects in order. Failures become `asi_error` tuples.
    pub fn apply_effects(&mut self, space: &mut TupleSpace, effects: &[Effect]) {
        for effect in effects {
            if let Err(msg) = self.apply(space, effect) {
                emit_once(
                    space,
                    TAG_ASI_ERROR,
                    vec![Value::text(&effect.program), Value::text(msg)],
                );
            }
        }
    }

    fn apply(&mut self, space: &mut TupleSpace, effect: &Effect) -> Result<(), String> {
        match &effect.kind {
            EffectKind::EmitTuple { tag, values } => {
                space.out(TSM, tag, values.clone()).map_err(|e| e.to_string())?;
            }
            EffectKind::Alarm { scope } => {
                // An alarm stays raised once broadcast; re-raising is a no-op.
                emit_once(space, TAG_SYSTEM_ALARM, vec![Value::text(scope.to_string())]);
                if *scope == Scope::Global {
                    space.set_param("alarm", Value::Bool(true));
                }
            }
            EffectKind::Isolate { entity } => isolate(space, *entity)?,
            EffectKind::SetPriority { task, level } => {
                if task.kind != EntityKind::Task {
                    return Err(format!("SET_PRIORITY needs a task, got {task}"));
                }
                let rec = space
                    .entities_mut()
                    .task_mut(task.id)
                    .ok_or_else(|| format!("unknown task {task}"))?;
                rec.priority = *level;
            }
            EffectKind::SetParam { name, value } => space.set_param(name.clone(), value.clone()),
            EffectKind::SetVoteThreshold { m } => space.set_param(PARAM_VOTE_THRESHOLD, Value::Int(*m)),
            EffectKind::Call { method } => {
                let f = self
                    .methods
                    .get_mut(method)
                    .ok_or_else(|| format!("no method `{method}` registered"))?;
                f(space)?;
            }
        }
        Ok(())
    }
}

/// Emits a TSM tuple unless an identical one is already present.
fn emit_once(space: &mut TupleSpace, tag: &str, values: Vec<Value>) {
    if space.rd(&Template::of(tag, &values)).is_none() {
        let _ = space.out(TSM, tag, values);
    }
}

fn isolate(space: &mut TupleSpace, entity: EntityRef) -> Result<(), String> {
    let targets: Vec<EntityRef> = match entity.kind {
        EntityKind::Station | EntityKind::AccessPoint => vec![entity],
        EntityKind::Task => {
            let t = space
                .entities()
                .task(entity.id)
                .ok_or_else(|| format!("unknown task {entity}"))?;
            if !t.uses_bsl_or_linda {
                return Err(format!("{entity} does not use BSL or Linda and cannot be isolated"));
            }
            vec![entity]
        }
        EntityKind::Group => {
            let g = space
                .entities()
                .group(entity.id)
                .ok_or_else(|| format!("unknown group {entity}"))?;
            let members: Vec<u32> = g.members.iter().copied().collect();
            let blocked: Vec<String> = members
                .iter()
                .filter(|id| space.entities().task(**id).is_some_and(|t| !t.uses_bsl_or_linda))
                .map(|id| EntityRef::task(*id).to_string())
                .collect();
            if !blocked.is_empty() {
                return Err(format!("{entity} has non-isolable tasks: {}", blocked.join(", ")));
            }
            members.into_iter().map(EntityRef::task).collect()
        }
    };
    for e in targets {
        match space.entities().status(e) {
            None => return Err(format!("unknown entity {e}")),
            Some(Status::Isolated) => {}
            Some(_) => {
                space
                    .out(TSM, TAG_ISOLATED, vec![e.into()])
                    .map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(())
}

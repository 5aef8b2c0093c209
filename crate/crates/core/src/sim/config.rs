use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::ariel::{compile_source, read_acode, Bundle, Vocabulary, OTHERWISE};
use crate::asi::MetricMode;
use crate::scenario::{TriggerPolicy, DEFAULT_CASCADE_CAP};
use crate::tuple_space::{SimTime, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayRange {
    pub min: SimTime,
    pub max: SimTime,
}

impl Default for DelayRange {
    fn default() -> Self {
        Self { min: 1, max: 5 }
    }
}

/// Piecewise-constant metric source: `points` are `(time, value)` pairs and
/// the value holds until the next point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub station: u32,
    pub metric: String,
    pub points: Vec<(SimTime, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: u32,
    pub host: u32,
    #[serde(default)]
    pub priority: i64,
    #[serde(default)]
    pub uses_bsl_or_linda: bool,
}

/// A tuple emitted by a scripted component at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEmission {
    pub time: SimTime,
    pub producer: String,
    pub tag: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Tsm,
    Asi,
}

impl Agent {
    pub const ALL: [Agent; 2] = [Agent::Tsm, Agent::Asi];

    pub fn as_str(self) -> &'static str {
        match self {
            Agent::Tsm => "tsm",
            Agent::Asi => "asi",
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    StationDown {
        station: u32,
    },
    StationUp {
        station: u32,
    },
    /// Drops every message between `a` and `b` until `heal`.
    Partition {
        a: BTreeSet<u32>,
        b: BTreeSet<u32>,
    },
    Heal,
    AgentDown {
        station: u32,
        agent: Agent,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub time: SimTime,
    #[serde(flatten)]
    pub fault: Fault,
}

/// How a scenario is declared in a config file. `source` is inline Ariel;
/// `file` points at a `.ariel` or `.acode` file relative to the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub predicate: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

fn default_heartbeat() -> SimTime {
    10
}

fn default_timeout() -> SimTime {
    30
}

fn default_cap() -> usize {
    DEFAULT_CASCADE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub stations: u32,
    #[serde(default)]
    pub access_points: u32,
    #[serde(default)]
    pub message_delay: DelayRange,
    #[serde(default = "default_heartbeat")]
    pub heartbeat_period: SimTime,
    #[serde(default = "default_timeout")]
    pub failure_timeout: SimTime,
    #[serde(default)]
    pub detector_periods: BTreeMap<String, SimTime>,
    /// Value reported by a detector when its station has no timeline.
    #[serde(default)]
    pub metric_defaults: BTreeMap<String, f64>,
    #[serde(default)]
    pub timelines: Vec<Timeline>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub emissions: Vec<ScriptedEmission>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default = "default_cap")]
    pub cascade_cap: usize,
    #[serde(default)]
    pub metric_mode: MetricMode,
    #[serde(default)]
    pub trigger: TriggerPolicy,
    /// Metric names beyond the built-in QoS vocabulary.
    #[serde(default)]
    pub extra_metrics: Vec<String>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
    /// Bundle file, used instead of `scenarios`.
    #[serde(default)]
    pub bundle: Option<PathBuf>,
    #[serde(default)]
    pub until: Option<SimTime>,
}

impl SimConfig {
    /// Minimal valid configuration with `stations` stations and no scripts.
    pub fn new(seed: u64, stations: u32) -> Self {
        Self {
            seed,
            stations,
            access_points: 0,
            message_delay: DelayRange::default(),
            heartbeat_period: default_heartbeat(),
            failure_timeout: default_timeout(),
            detector_periods: BTreeMap::new(),
            metric_defaults: BTreeMap::new(),
            timelines: Vec::new(),
            tasks: Vec::new(),
            emissions: Vec::new(),
            faults: Vec::new(),
            cascade_cap: default_cap(),
            metric_mode: MetricMode::Lenient,
            trigger: TriggerPolicy::EveryInsertion,
            extra_metrics: Vec::new(),
            scenarios: Vec::new(),
            bundle: None,
            until: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn has_station(&self, id: u32) -> bool {
        (1..=self.stations).contains(&id)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.stations == 0 {
            return bad("at least one station is required".into());
        }
        if self.heartbeat_period == 0 {
            return bad("heartbeat_period must be positive".into());
        }
        if self.failure_timeout <= self.heartbeat_period {
            return bad("failure_timeout must exceed heartbeat_period".into());
        }
        if self.message_delay.min > self.message_delay.max {
            return bad("message_delay.min exceeds message_delay.max".into());
        }
        if self.cascade_cap == 0 {
            return bad("cascade_cap must be positive".into());
        }
        if let Some((m, _)) = self.detector_periods.iter().find(|(_, p)| **p == 0) {
            return bad(format!("detector period for `{m}` must be positive"));
        }
        for t in &self.timelines {
            if !self.has_station(t.station) {
                return Err(SimError::UnknownStation(t.station));
            }
            if !self.detector_periods.contains_key(&t.metric) {
                return bad(format!("timeline for `{}` has no detector period", t.metric));
            }
            if t.points.is_empty() {
                return bad(format!("timeline for station {} `{}` is empty", t.station, t.metric));
            }
            if t.points.iter().any(|(_, v)| !v.is_finite()) {
                return bad(format!(
                    "timeline for station {} `{}` has a non-finite value",
                    t.station, t.metric
                ));
            }
        }
        for task in &self.tasks {
            if !self.has_station(task.host) {
                return Err(SimError::UnknownStation(task.host));
            }
        }
        for f in &self.faults {
            let stations: Vec<u32> = match &f.fault {
                Fault::StationDown { station } | Fault::StationUp { station } | Fault::AgentDown { station, .. } => {
                    vec![*station]
                }
                Fault::Partition { a, b } => {
                    if !a.is_disjoint(b) {
                        return bad("partition sides overlap".into());
                    }
                    a.iter().chain(b).copied().collect()
                }
                Fault::Heal => vec![],
            };
            if let Some(s) = stations.into_iter().find(|s| !self.has_station(*s)) {
                return Err(SimError::UnknownStation(s));
            }
        }
        Ok(())
    }

    /// Built-in metrics plus every metric the config mentions.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut v = Vocabulary::default();
        v.extend(self.extra_metrics.iter().cloned());
        v.extend(self.detector_periods.keys().cloned());
        v
    }

    /// Loads the bundle named by `bundle`, or builds one from `scenarios`.
    /// Relative paths resolve against `base`.
    pub fn load_bundle(&self, base: &Path) -> Result<Bundle, SimError> {
        let read = |p: &Path| {
            let full = base.join(p);
            std::fs::read_to_string(&full).map_err(|e| SimError::Io(format!("{}: {e}", full.display())))
        };
        if let Some(path) = &self.bundle {
            return Bundle::from_text(&read(path)?).map_err(|e| SimError::Load(e.to_string()));
        }
        if self.scenarios.is_empty() {
            return Err(SimError::Load(
                "config declares neither `bundle` nor `scenarios`".into(),
            ));
        }
        let vocab = self.vocabulary();
        let mut items = Vec::new();
        for s in &self.scenarios {
            let program = match (&s.source, &s.file) {
                (Some(src), None) => compile_source(src, &format!("{}_program", s.name), &vocab)
                    .map_err(|e| SimError::Load(format!("scenario `{}`: {e}", s.name)))?,
                (None, Some(file)) => {
                    let text = read(file)?;
                    if file.extension().is_some_and(|e| e == "acode") {
                        read_acode(&text).map_err(|e| SimError::Load(format!("{}: {e}", file.display())))?
                    } else {
                        let name = file
                            .file_stem()
                            .and_then(|s| s.to_str())
                            .unwrap_or("program")
                            .to_string();
                        compile_source(&text, &name, &vocab)
                            .map_err(|e| SimError::Load(format!("{}: {e}", file.display())))?
                    }
                }
                _ => {
                    return Err(SimError::Load(format!(
                        "scenario `{}` needs exactly one of `source` and `file`",
                        s.name
                    )))
                }
            };
            if s.predicate.is_none() && s.name != OTHERWISE {
                return Err(SimError::Load(format!("scenario `{}` has no predicate", s.name)));
            }
            items.push((s.name.clone(), program, s.predicate.clone()));
        }
        Bundle::new(items).map_err(|e| SimError::Load(e.to_string()))
    }
}

/// Value of a piecewise-constant timeline at `t`; before the first point the
/// first value applies.
pub fn timeline_value(points: &[(SimTime, f64)], t: SimTime) -> f64 {
    points
        .iter()
        .take_while(|(at, _)| *at <= t)
        .last()
        .or_else(|| points.first())
        .map(|(_, v)| *v)
        .unwrap_or(0.0)
}

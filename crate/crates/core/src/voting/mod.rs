//! Adaptive m-out-of-n alarm voting for a body-area sensor network.
//!
//! A hub (access point #1) classifies the patient's vitals into a severity
//! class and publishes it as a `severity` metric. Each class is a scenario
//! whose Ariel program sets the vote threshold with `SET_VOTE_THRESHOLD`,
//! so the threshold in force follows the symptoms. Trials run inside the
//! node simulator against a Bernoulli sensor model with known ground truth.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ariel::{compile_source, Bundle, Vocabulary, OTHERWISE};
use crate::scenario::{ScenarioError, PARAM_VOTE_THRESHOLD};
use crate::sim::{SimConfig, SimError, Simulation};
use crate::tuple_space::{EntityRef, SimTime, Value};

pub const SENSOR_FAULT: &str = "sensor_fault";
pub const METRIC_SEVERITY: &str = "severity";
const HUB: &str = "HUB";
const INTERVAL_TICKS: SimTime = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorState {
    Normal,
    Alerting,
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vitals {
    pub heartbeat_bpm: f64,
    pub temperature_c: f64,
    pub arterial_pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor: u32,
    pub state: SensorState,
    /// Absent for unreachable sensors.
    pub vitals: Option<Vitals>,
}

/// Alarm iff at least `min(m, n)` of the `n` reachable sensors alert; with
/// no reachable sensor the alarm is raised.
pub fn vote(readings: &[SensorReading], m: u32) -> bool {
    vote_with(readings, m, false)
}

/// Like [`vote`]; with `disconnect_counts_as_alert` every sensor counts
/// towards `n` and unreachable ones count as alerting.
pub fn vote_with(readings: &[SensorReading], m: u32, disconnect_counts_as_alert: bool) -> bool {
    let m = m.max(1) as usize;
    let (n, a) = if disconnect_counts_as_alert {
        let a = readings.iter().filter(|r| r.state != SensorState::Normal).count();
        (readings.len(), a)
    } else {
        let reachable = readings.iter().filter(|r| r.state != SensorState::Unreachable);
        let n = reachable.clone().count();
        (n, reachable.filter(|r| r.state == SensorState::Alerting).count())
    };
    n == 0 || a >= m.min(n)
}

/// Inclusive `[lo, hi]` ranges over the three vitals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub heartbeat_bpm: (f64, f64),
    pub temperature_c: (f64, f64),
    pub arterial_pressure: (f64, f64),
}

impl Bands {
    pub fn contains(&self, v: &Vitals) -> bool {
        let within = |(lo, hi): (f64, f64), x: f64| lo <= x && x <= hi;
        within(self.heartbeat_bpm, v.heartbeat_bpm)
            && within(self.temperature_c, v.temperature_c)
            && within(self.arterial_pressure, v.arterial_pressure)
    }
}

/// A severity class and the threshold its program sets. `bands: None`
/// accepts anything and must come last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub m: u32,
    #[serde(default)]
    pub bands: Option<Bands>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    /// Physically plausible readings; anything outside is a sensor fault.
    pub sanity: Bands,
    /// Least serious first; the first class containing the vitals wins.
    pub classes: Vec<ClassSpec>,
    /// Threshold used for `sensor_fault`.
    pub fault_m: u32,
}

impl Default for Classifier {
    fn default() -> Self {
        Self {
            sanity: Bands {
                heartbeat_bpm: (20.0, 250.0),
                temperature_c: (30.0, 45.0),
                arterial_pressure: (40.0, 260.0),
            },
            classes: vec![
                ClassSpec {
                    name: "mild".into(),
                    m: 3,
                    bands: Some(Bands {
                        heartbeat_bpm: (50.0, 110.0),
                        temperature_c: (35.5, 38.5),
                        arterial_pressure: (90.0, 140.0),
                    }),
                },
                ClassSpec {
                    name: "elevated".into(),
                    m: 2,
                    bands: Some(Bands {
                        heartbeat_bpm: (40.0, 140.0),
                        temperature_c: (35.0, 39.5),
                        arterial_pressure: (70.0, 180.0),
                    }),
                },
                ClassSpec {
                    name: "critical".into(),
                    m: 1,
                    bands: None,
                },
            ],
            fault_m: 1,
        }
    }
}

impl Classifier {
    pub fn classify(&self, v: &Vitals) -> &str {
        if !self.sanity.contains(v) {
            return SENSOR_FAULT;
        }
        self.classes
            .iter()
            .find(|c| c.bands.is_none_or(|b| b.contains(v)))
            .map(|c| c.name.as_str())
            .unwrap_or(SENSOR_FAULT)
    }

    /// Every class name with its code (1-based, `sensor_fault` last) and m.
    pub fn table(&self) -> Vec<(String, i64, u32)> {
        let mut t: Vec<(String, i64, u32)> = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), i as i64 + 1, c.m))
            .collect();
        t.push((SENSOR_FAULT.to_string(), t.len() as i64 + 1, self.fault_m));
        t
    }

    fn code(&self, class: &str) -> i64 {
        self.table()
            .into_iter()
            .find(|(n, _, _)| n == class)
            .map(|(_, c, _)| c)
            .expect("classify returns a tabled class")
    }

    pub fn validate(&self) -> Result<(), VotingError> {
        if self.classes.is_empty() {
            return Err(VotingError::Config("at least one severity class is required".into()));
        }
        if let Some(c) = self.classes.iter().find(|c| c.m == 0) {
            return Err(VotingError::Config(format!("class `{}` has m = 0", c.name)));
        }
        if self.fault_m == 0 {
            return Err(VotingError::Config("fault_m must be at least 1".into()));
        }
        let n = self.classes.len();
        if self.classes[..n - 1].iter().any(|c| c.bands.is_none()) {
            return Err(VotingError::Config("only the last class may omit bands".into()));
        }
        Ok(())
    }
}

/// Classifies with the default bands.
pub fn classify_scenario(v: &Vitals) -> String {
    Classifier::default().classify(v).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Healthy,
    Emergency,
}

/// A stretch of identical ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub length: u32,
    pub truth: Truth,
    pub vitals: Vitals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatientModel {
    pub sensors: u32,
    pub p_alert_when_emergency: f64,
    pub p_alert_when_healthy: f64,
    pub p_unreachable: f64,
    pub seed: u64,
    /// Repeated cyclically for the length of the trial.
    pub timeline: Vec<Phase>,
}

impl Default for PatientModel {
    fn default() -> Self {
        let vit = |h, t, p| Vitals {
            heartbeat_bpm: h,
            temperature_c: t,
            arterial_pressure: p,
        };
        Self {
            sensors: 5,
            p_alert_when_emergency: 0.6,
            p_alert_when_healthy: 0.15,
            p_unreachable: 0.05,
            seed: 2024,
            timeline: vec![
                Phase {
                    length: 40,
                    truth: Truth::Healthy,
                    vitals: vit(70.0, 37.0, 120.0),
                },
                Phase {
                    length: 20,
                    truth: Truth::Healthy,
                    vitals: vit(120.0, 38.0, 150.0),
                },
                Phase {
                    length: 10,
                    truth: Truth::Emergency,
                    vitals: vit(130.0, 39.0, 160.0),
                },
                Phase {
                    length: 10,
                    truth: Truth::Emergency,
                    vitals: vit(160.0, 40.0, 200.0),
                },
                Phase {
                    length: 20,
                    truth: Truth::Healthy,
                    vitals: vit(70.0, 38.0, 120.0),
                },
            ],
        }
    }
}

impl PatientModel {
    pub fn validate(&self) -> Result<(), VotingError> {
        let probs = [
            ("p_alert_when_emergency", self.p_alert_when_emergency),
            ("p_alert_when_healthy", self.p_alert_when_healthy),
            ("p_unreachable", self.p_unreachable),
        ];
        if let Some((name, _)) = probs.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(VotingError::Config(format!("{name} must lie in [0, 1]")));
        }
        if self.sensors == 0 {
            return Err(VotingError::Config("at least one sensor is required".into()));
        }
        if self.timeline.is_empty() || self.timeline.iter().all(|p| p.length == 0) {
            return Err(VotingError::Config("timeline must cover at least one interval".into()));
        }
        Ok(())
    }

    fn phase_at(&self, interval: u32) -> &Phase {
        let cycle: u32 = self.timeline.iter().map(|p| p.length).sum();
        let mut k = interval % cycle;
        for p in &self.timeline {
            if k < p.length {
                return p;
            }
            k -= p.length;
        }
        unreachable!("k is below the cycle length")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "m")]
pub enum Policy {
    Fixed(u32),
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub interval: u32,
    pub truth: Truth,
    pub class: Option<String>,
    pub scenario: String,
    pub reachable: u32,
    pub alerting: u32,
    pub m: u32,
    pub alarm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub policy: Policy,
    pub intervals: u32,
    pub emergencies: u32,
    pub healthy: u32,
    pub misses: u32,
    pub false_alarms: u32,
    pub miss_rate: f64,
    pub false_alarm_rate: f64,
    pub switches: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<IntervalRecord>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VotingError {
    #[error("invalid voting config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VotingConfig {
    pub model: PatientModel,
    pub classifier: Classifier,
    pub intervals: u32,
    pub disconnect_counts_as_alert: bool,
    /// Threshold before any class has been published.
    pub initial_m: u32,
    /// Keep one record per interval in the result.
    pub record_intervals: bool,
}

impl Default for VotingConfig {
    fn default() -> Self {
        Self {
            model: PatientModel::default(),
            classifier: Classifier::default(),
            intervals: 10_000,
            disconnect_counts_as_alert: false,
            initial_m: 1,
            record_intervals: false,
        }
    }
}

impl VotingConfig {
    pub fn validate(&self) -> Result<(), VotingError> {
        self.model.validate()?;
        self.classifier.validate()?;
        if self.intervals == 0 {
            return Err(VotingError::Config("intervals must be positive".into()));
        }
        if self.initial_m == 0 {
            return Err(VotingError::Config("initial_m must be at least 1".into()));
        }
        Ok(())
    }
}

fn scenario_name(class: &str) -> String {
    class.to_ascii_uppercase()
}

/// One scenario per class, each setting that class's threshold; fixed
/// policies get a single `Otherwise` program.
pub fn voting_bundle(classifier: &Classifier, policy: Policy, initial_m: u32) -> Result<Bundle, VotingError> {
    let vocab = Vocabulary::default().with(METRIC_SEVERITY);
    let program = |name: &str, m: u32| {
        compile_source(&format!("IF TRUE THEN SET_VOTE_THRESHOLD {m} FI"), name, &vocab)
            .map_err(|e| VotingError::Config(e.to_string()))
    };
    let mut items = Vec::new();
    let fallback = match policy {
        Policy::Fixed(m) => m,
        Policy::Adaptive => {
            for (class, code, m) in classifier.table() {
                let name = scenario_name(&class);
                let pred = format!("EXISTS ACCESSPOINT: {METRIC_SEVERITY} = {code}");
                items.push((name.clone(), program(&format!("vote_{class}"), m)?, Some(pred)));
            }
            initial_m
        }
    };
    items.push((OTHERWISE.to_string(), program("vote_default", fallback)?, None));
    Bundle::new(items).map_err(|e| VotingError::Config(e.to_string()))
}

/// Runs `cfg.intervals` voting rounds of the patient model under `policy`.
/// The sensor draws depend only on the model seed, so trials under
/// different policies see identical readings.
pub fn run_trial(cfg: &VotingConfig, policy: Policy) -> Result<TrialResult, VotingError> {
    cfg.validate()?;
    if let Policy::Fixed(0) = policy {
        return Err(VotingError::Config("m must be at least 1".into()));
    }
    let model = &cfg.model;
    let classifier = &cfg.classifier;
    let bundle = voting_bundle(classifier, policy, cfg.initial_m)?;
    let mut sc = SimConfig::new(model.seed, model.sensors);
    sc.access_points = 1;
    sc.extra_metrics.push(METRIC_SEVERITY.to_string());
    // Failure detection plays no part in the vote.
    sc.heartbeat_period = SimTime::MAX / 4;
    sc.failure_timeout = SimTime::MAX / 2;
    let mut sim = Simulation::build(sc, bundle, None)?;
    sim.set_tracing(false);

    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let hub: Value = EntityRef::access_point(1).into();
    let mut published: Option<i64> = None;
    let fallback = match policy {
        Policy::Fixed(m) => m,
        Policy::Adaptive => cfg.initial_m,
    };
    let mut res = TrialResult {
        policy,
        intervals: cfg.intervals,
        emergencies: 0,
        healthy: 0,
        misses: 0,
        false_alarms: 0,
        miss_rate: 0.0,
        false_alarm_rate: 0.0,
        switches: 0,
        records: Vec::new(),
    };
    let mut readings = Vec::with_capacity(model.sensors as usize);
    for k in 0..cfg.intervals {
        let phase = model.phase_at(k);
        let p_alert = match phase.truth {
            Truth::Emergency => model.p_alert_when_emergency,
            Truth::Healthy => model.p_alert_when_healthy,
        };
        readings.clear();
        for s in 1..=model.sensors {
            let (u_reach, u_alert): (f64, f64) = (rng.gen(), rng.gen());
            let state = if u_reach < model.p_unreachable {
                SensorState::Unreachable
            } else if u_alert < p_alert {
                SensorState::Alerting
            } else {
                SensorState::Normal
            };
            readings.push(SensorReading {
                sensor: s,
                state,
                vitals: (state != SensorState::Unreachable).then_some(phase.vitals),
            });
        }
        let t = (k as SimTime + 1) * INTERVAL_TICKS;
        let class = readings
            .iter()
            .find_map(|r| r.vitals)
            .map(|v| classifier.classify(&v).to_string());
        if let Some(c) = &class {
            let code = classifier.code(c);
            if published != Some(code) {
                sim.emit_at(t, HUB, METRIC_SEVERITY, vec![hub.clone(), Value::Int(code)])?;
                published = Some(code);
            }
        }
        sim.run_until(t)?;
        let m = match sim.space().param(PARAM_VOTE_THRESHOLD) {
            Some(Value::Int(m)) if *m >= 1 => *m as u32,
            _ => fallback,
        };
        let alarm = vote_with(&readings, m, cfg.disconnect_counts_as_alert);
        match phase.truth {
            Truth::Emergency => {
                res.emergencies += 1;
                res.misses += u32::from(!alarm);
            }
            Truth::Healthy => {
                res.healthy += 1;
                res.false_alarms += u32::from(alarm);
            }
        }
        if cfg.record_intervals {
            res.records.push(IntervalRecord {
                interval: k,
                truth: phase.truth,
                class,
                scenario: sim.manager().current().to_string(),
                reachable: readings.iter().filter(|r| r.state != SensorState::Unreachable).count() as u32,
                alerting: readings.iter().filter(|r| r.state == SensorState::Alerting).count() as u32,
                m,
                alarm,
            });
        }
    }
    res.switches = sim.manager().state().switch_count;
    let rate = |num: u32, den: u32| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    res.miss_rate = rate(res.misses, res.emergencies);
    res.false_alarm_rate = rate(res.false_alarms, res.healthy);
    Ok(res)
}

/// Fixed m = 1..=n followed by the adaptive policy.
pub fn sweep(cfg: &VotingConfig) -> Result<Vec<TrialResult>, VotingError> {
    let mut out = Vec::new();
    for m in 1..=cfg.model.sensors {
        out.push(run_trial(cfg, Policy::Fixed(m))?);
    }
    out.push(run_trial(cfg, Policy::Adaptive)?);
    Ok(out)
}

/// True when miss rates never decrease and false-alarm rates never
/// increase across the fixed-m rows, taken in increasing m.
pub fn is_monotone(rows: &[TrialResult]) -> bool {
    let mut fixed: Vec<(u32, f64, f64)> = rows
        .iter()
        .filter_map(|r| match r.policy {
            Policy::Fixed(m) => Some((m, r.miss_rate, r.false_alarm_rate)),
            Policy::Adaptive => None,
        })
        .collect();
    fixed.sort_by_key(|r| r.0);
    fixed.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].2 >= w[1].2)
}

pub const SWEEP_CSV_HEADER: &str = "policy,m,miss_rate,false_alarm_rate";

pub fn sweep_csv(rows: &[TrialResult]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let (policy, m) = match r.policy {
            Policy::Fixed(m) => ("fixed", m.to_string()),
            Policy::Adaptive => ("adaptive", "scenario".to_string()),
        };
        s.push_str(&format!("{policy},{m},{:.6},{:.6}\n", r.miss_rate, r.false_alarm_rate));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sensors: u32,
    pub intervals: u32,
    pub seed: u64,
    pub monotone: bool,
    pub thresholds: BTreeMap<String, u32>,
    pub rows: Vec<TrialResult>,
}

pub fn summarize(cfg: &VotingConfig, rows: Vec<TrialResult>) -> SweepSummary {
    SweepSummary {
        sensors: cfg.model.sensors,
        intervals: cfg.intervals,
        seed: cfg.model.seed,
        monotone: is_monotone(&rows),
        thresholds: cfg.classifier.table().into_iter().map(|(n, _, m)| (n, m)).collect(),
        rows,
    }
}

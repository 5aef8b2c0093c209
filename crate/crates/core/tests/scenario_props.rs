mod common;

use ariel_adapt::ariel::{compile_source, parse_guard, render_guard, Bundle, Vocabulary, OTHERWISE};
use ariel_adapt::asi::MetricMode;
use ariel_adapt::scenario::{ScenarioManager, TraceEvent, TAG_SYSTEM_ALARM};
use ariel_adapt::tuple_space::{EntityRef, Template, TupleSpace, Value, TAG_NODE_DOWN};
use common::{random_guard, random_snapshot, rng, Oracle};
use proptest::prelude::*;
use rand::Rng;

fn vocab() -> Vocabulary {
    Vocabulary::default().with("throughput")
}

fn noop(name: &str) -> ariel_adapt::ariel::ACodeProgram {
    compile_source("IF FALSE THEN ALARM FI", name, &vocab()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn detection_picks_first_true_predicate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = r.gen_range(1..=4);
        let guards: Vec<_> = (0..k).map(|_| random_guard(&mut r, 0, 3)).collect();
        let mut items: Vec<_> = guards
            .iter()
            .enumerate()
            .map(|(i, g)| (format!("S{i}"), noop(&format!("p{i}")), Some(render_guard(g))))
            .collect();
        items.push((OTHERWISE.to_string(), noop("fallback"), None));
        let bundle = Bundle::new(items).unwrap();
        let snap = random_snapshot(&mut r);
        let mgr = ScenarioManager::from_bundle(bundle, &vocab(), &snap).unwrap();
        let oracle = Oracle { snapshot: &snap, mode: MetricMode::Lenient };
        for g in &guards {
            prop_assert_eq!(&parse_guard(&render_guard(g), &vocab()).unwrap(), g);
        }
        let want = guards
            .iter()
            .position(|g| oracle.guard(g, &mut Vec::new()).unwrap())
            .map(|i| format!("S{i}"))
            .unwrap_or_else(|| OTHERWISE.to_string());
        prop_assert_eq!(mgr.detect(&snap), want.as_str());
        prop_assert_eq!(mgr.current(), want.as_str());
    }
}

fn two_station_space() -> TupleSpace {
    let mut s = TupleSpace::new();
    s.register_producer("LM");
    s.entities_mut().add_station(1);
    s.entities_mut().add_station(2);
    s
}

fn alarm_manager(space: &TupleSpace) -> ScenarioManager {
    let alarm = |n: &str| compile_source("IF [STATION s: DOWN s] THEN ALARM GLOBAL FI", n, &vocab()).unwrap();
    let bundle = Bundle::new(vec![
        (
            "CPU_OK".into(),
            alarm("program0"),
            Some("FORALL STATION CPU < 75".into()),
        ),
        (OTHERWISE.into(), alarm("program1"), None),
    ])
    .unwrap();
    ScenarioManager::from_bundle(bundle, &vocab(), &ariel_adapt::asi::Snapshot::of(space)).unwrap()
}

#[test]
fn every_insertion_runs_the_current_program() {
    let mut space = two_station_space();
    let mut mgr = alarm_manager(&space);
    for i in 0..5 {
        space.out("LM", "note", vec![Value::Int(i)]).unwrap();
    }
    assert_eq!(mgr.process_pending(&mut space, 100).unwrap(), 5);
    assert_eq!(mgr.executions(), 5);
    assert!(mgr.trace().iter().all(|r| r.event == TraceEvent::Execute));
}

#[test]
fn repeated_down_reports_latch_one_alarm() {
    let mut space = two_station_space();
    let mut mgr = alarm_manager(&space);
    for _ in 0..3 {
        space
            .out("LM", TAG_NODE_DOWN, vec![EntityRef::station(2).into()])
            .unwrap();
        mgr.process_pending(&mut space, 100).unwrap();
    }
    let alarms = space.rd_all(&Template::new(TAG_SYSTEM_ALARM).any()).count();
    assert_eq!(alarms, 1);
    assert_eq!(space.param("alarm"), Some(&Value::Bool(true)));
}

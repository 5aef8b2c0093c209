mod common;

use std::collections::BTreeSet;

use ariel_adapt::sim::{DropReason, Fault, SimConfig, SimError, Simulation, TraceEntry, Verdict};
use ariel_adapt::tuple_space::Value;
use common::{alarm_bundle, detection_trial, fixture};
use proptest::prelude::*;

fn cpu_config(seed: u64, stations: u32) -> SimConfig {
    let mut c = SimConfig::new(seed, stations);
    c.detector_periods.insert("cpu_usage_pct".into(), 10);
    c.metric_defaults.insert("cpu_usage_pct".into(), 50.0);
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn detection_bound_holds(seed in any::<u64>()) {
        let run = detection_trial(seed);
        prop_assert!(run.within_bound(), "{:?}", run);
    }

    #[test]
    fn identical_seed_identical_trace(seed in any::<u64>(), stations in 1u32..6) {
        let once = || {
            let mut c = cpu_config(seed, stations);
            c.faults.push(ariel_adapt::sim::FaultSpec { time: 55, fault: Fault::StationDown { station: 1 } });
            let mut sim = Simulation::build(c, alarm_bundle(), None).unwrap();
            sim.run_until(150).unwrap();
            sim.trace_jsonl()
        };
        prop_assert_eq!(once(), once());
    }

    #[test]
    fn trace_time_never_decreases(seed in any::<u64>()) {
        let mut sim = Simulation::build(cpu_config(seed, 4), alarm_bundle(), None).unwrap();
        sim.run_until(120).unwrap();
        let times: Vec<u64> = sim.trace().iter().map(TraceEntry::time).collect();
        prop_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn partition_blocks_cross_group_broadcast() {
    let mut sim = Simulation::build(SimConfig::new(9, 3), alarm_bundle(), None).unwrap();
    sim.inject_fault(
        0,
        Fault::Partition {
            a: BTreeSet::from([1]),
            b: BTreeSet::from([2, 3]),
        },
    )
    .unwrap();
    sim.run_until(1).unwrap();
    sim.take_trace();
    sim.group_send(1, "probe", vec![Value::Int(1)]).unwrap();
    sim.run_until(20).unwrap();
    let trace = sim.take_trace();
    let drops = trace
        .iter()
        .filter(|e| matches!(e, TraceEntry::Drop { from: 1, tag, reason: DropReason::Partition, .. } if tag == "probe"))
        .count();
    assert_eq!(drops, 2);
    assert!(!trace
        .iter()
        .any(|e| matches!(e, TraceEntry::Deliver { from: 1, tag, .. } if tag == "probe")));
}

#[test]
fn healed_partition_restores_trust() {
    let mut sim = Simulation::build(SimConfig::new(4, 3), alarm_bundle(), None).unwrap();
    sim.inject_fault(
        20,
        Fault::Partition {
            a: BTreeSet::from([1]),
            b: BTreeSet::from([2, 3]),
        },
    )
    .unwrap();
    sim.inject_fault(120, Fault::Heal).unwrap();
    sim.run_until(110).unwrap();
    assert_eq!(sim.verdict(2, 1), Some(Verdict::Suspected));
    assert_eq!(sim.verdict(1, 3), Some(Verdict::Suspected));
    assert_eq!(sim.verdict(2, 3), Some(Verdict::Trusted));
    sim.run_until(140).unwrap();
    for (o, t) in [(2, 1), (3, 1), (1, 2), (1, 3)] {
        assert_eq!(sim.verdict(o, t), Some(Verdict::Trusted), "{o} -> {t}");
    }
}

#[test]
fn down_sender_is_dropped_silently() {
    let mut sim = Simulation::build(SimConfig::new(1, 2), alarm_bundle(), None).unwrap();
    sim.inject_fault(0, Fault::StationDown { station: 2 }).unwrap();
    sim.run_until(1).unwrap();
    sim.group_send(2, "probe", vec![Value::Int(0)]).unwrap();
    assert!(sim.trace().iter().any(|e| matches!(
        e,
        TraceEntry::Drop {
            from: 2,
            to: None,
            reason: DropReason::SenderDown,
            ..
        }
    )));
}

#[test]
fn unknown_station_and_past_times_rejected() {
    let mut sim = Simulation::build(SimConfig::new(1, 2), alarm_bundle(), None).unwrap();
    assert!(matches!(
        sim.inject_fault(5, Fault::StationDown { station: 9 }),
        Err(SimError::UnknownStation(9))
    ));
    sim.run_until(50).unwrap();
    assert!(matches!(
        sim.inject_fault(10, Fault::Heal),
        Err(SimError::TimeInPast { .. })
    ));
}

#[test]
fn sixteen_cpu_detectors_register_sixteen_live_tuples() {
    let sim = Simulation::build(cpu_config(42, 16), alarm_bundle(), None).unwrap();
    assert_eq!(sim.detector_count(), 16);
    assert_eq!(sim.space().live_ids().len(), 16);
}

#[test]
fn fixture_config_loads_with_its_bundle() {
    let path = fixture("two_scenarios.json");
    let c = SimConfig::from_path(&path).unwrap();
    let b = c.load_bundle(path.parent().unwrap()).unwrap();
    assert_eq!(b.order(), ["CPU_OK", "Otherwise"]);
    assert_eq!(b.program("CPU_OK").unwrap().triplets.len(), 15);
}

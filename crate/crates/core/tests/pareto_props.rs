mod common;

use ariel_adapt::ariel::{compile_guard, parse_guard, Vocabulary};
use ariel_adapt::asi::{eval_predicate, MetricMode, Snapshot};
use ariel_adapt::pareto::{derive_scenarios, pareto_front, Orientation, QoSPoint};
use ariel_adapt::tuple_space::{Attribute, EntityModel, EntityRef, TupleId, Value};
use common::{pareto_trial, random_points, rng};
use proptest::prelude::*;
use std::collections::BTreeMap;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn front_matches_quadratic_oracle(seed in any::<u64>()) {
        if let Err(e) = pareto_trial(seed) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn flipping_direction_and_sign_keeps_front(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pts = random_points(&mut r, 60, 3);
        let max = Orientation::new().maximize("d0").maximize("d1").maximize("d2");
        let min = Orientation::new().minimize("d0").minimize("d1").minimize("d2");
        let negated: Vec<QoSPoint> = pts
            .iter()
            .map(|p| QoSPoint::new(p.label.clone(), p.coords.iter().map(|(k, v)| (k.clone(), -v))))
            .collect();
        let a: Vec<_> = pareto_front(&pts, &max).unwrap().into_iter().map(|p| p.label).collect();
        let b: Vec<_> = pareto_front(&negated, &min).unwrap().into_iter().map(|p| p.label).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn derived_predicates_hold_at_their_point(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pts = random_points(&mut r, 30, 2);
        let orient = Orientation::new().maximize("d0").minimize("d1");
        let front = pareto_front(&pts, &orient).unwrap();
        let margins = BTreeMap::from([("d0".to_string(), 0.5), ("d1".to_string(), 0.5)]);
        let derived = derive_scenarios(&front, &orient, &margins).unwrap();
        prop_assert_eq!(derived.scenarios.len(), front.len() + 1);
        prop_assert_eq!(derived.scenarios.last().unwrap().name.as_str(), "Otherwise");
        let vocab = Vocabulary::default().with("d0").with("d1");
        for s in &derived.scenarios[..front.len()] {
            let program = compile_guard(&parse_guard(&s.predicate, &vocab).unwrap(), "p").unwrap();
            for q in &front {
                let inside = q.coords.iter().all(|(d, v)| {
                    let c = front.iter().find(|p| Some(&p.label) == s.label.as_ref()).unwrap().coords[d];
                    *v >= c - 0.5 && *v < c + 0.5
                });
                let got = eval_predicate(&program, &at_point(q), MetricMode::Lenient).unwrap();
                prop_assert_eq!(got, inside, "{} at {:?}", s.predicate, q);
            }
        }
    }
}

/// Two stations both reporting the point's coordinates.
fn at_point(p: &QoSPoint) -> Snapshot {
    let mut m = EntityModel::new();
    for id in 1..=2 {
        m.add_station(id);
        let rec = m.record_mut(EntityRef::station(id)).unwrap();
        for (d, v) in &p.coords {
            rec.attrs.insert(
                d.clone(),
                Attribute {
                    value: Value::Real(*v),
                    tuple: TupleId(0),
                },
            );
        }
    }
    Snapshot::from_model(m)
}

#[test]
fn duplicates_on_the_front_are_all_kept() {
    let o = Orientation::new().maximize("a").maximize("b");
    let pts = vec![
        QoSPoint::new("x", [("a", 1.0), ("b", 2.0)]),
        QoSPoint::new("y", [("a", 1.0), ("b", 2.0)]),
        QoSPoint::new("z", [("a", 0.5), ("b", 1.0)]),
    ];
    let f: Vec<_> = pareto_front(&pts, &o).unwrap().into_iter().map(|p| p.label).collect();
    assert_eq!(f, ["x", "y"]);
}

//! Integration tests over the shipped fixtures (reference platforms,
//! reference mapping files, the illustrative task-graph document) and
//! property tests for the model-layer invariants.

use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;

use taskmapper_core::appmodel::{
    normalize_application, parse_application, serialize_application, Instruction,
};
use taskmapper_core::escience::{generate_escience, ms2_runnable_ids, EscienceProfile};
use taskmapper_core::mapping::{
    map_greedy_load, map_random, map_round_robin, parse_mapping, serialize_mapping,
};
use taskmapper_core::platform::{parse_platform, power_at, serialize_platform, parse_platform_str};

fn root(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(path)
}

#[test]
fn illustrative_task_graph_parses_with_expected_shape() {
    let app = parse_application(fixture("fig1_app.json")).unwrap();
    assert_eq!(app.task_count(), 7);
    assert_eq!(app.labels.len(), 3);

    // T1 talks to T3 through L3: T1 writes it, T3 reads it.
    let t1 = app.tasks.iter().find(|t| t.id == "T1").unwrap();
    assert!(t1.runnables.iter().any(|r| {
        r.instructions
            .iter()
            .any(|i| matches!(i, Instruction::Write { label } if label == "L3"))
    }));
    let t3 = app.tasks.iter().find(|t| t.id == "T3").unwrap();
    assert!(t3.runnables.iter().any(|r| {
        r.instructions
            .iter()
            .any(|i| matches!(i, Instruction::Read { label } if label == "L3"))
    }));

    let t4 = app.tasks.iter().find(|t| t.id == "T4").unwrap();
    assert_eq!(t4.runnables.len(), 8);

    // Round trip.
    let text = serialize_application(&app);
    let reparsed = taskmapper_core::parse_application_str(&text).unwrap();
    assert_eq!(app, reparsed);
}

#[test]
fn reference_heterogeneous_platform_matches_description() {
    let p = parse_platform(root("platforms/hlrs-heterogeneous.json")).unwrap();
    assert_eq!(p.hosts.len(), 6);
    for id in ["HOST_0_0", "HOST_0_1", "HOST_0_2", "HOST_1_0", "HOST_1_1"] {
        assert!(p.host(id).is_some(), "missing {id}");
    }
    assert_eq!(p.frontend().id, "FRONTEND");
    let fast = p.host("HOST_0_2").unwrap();
    let slow = p.host("HOST_0_0").unwrap();
    assert_eq!(fast.speed / slow.speed, 100.0);

    // Crossing nodes uses the backbone link.
    let route = p.route_between("HOST_0_0", "HOST_1_1").unwrap();
    assert!(!route.links.is_empty());
    assert!(route.links.iter().any(|&l| p.links[l].id == "lnk_backbone"));
    // And the reverse resolves too.
    assert!(p.route_between("HOST_1_1", "HOST_0_0").is_ok());

    let text = serialize_platform(&p);
    assert_eq!(parse_platform_str(&text).unwrap(), p);
}

#[test]
fn reference_homogeneous_platform_drops_the_gpu_host() {
    let p = parse_platform(root("platforms/hlrs-homogeneous.json")).unwrap();
    assert_eq!(p.hosts.len(), 5);
    assert!(p.host("HOST_0_2").is_none());
    let speeds: Vec<f64> = p
        .hosts
        .iter()
        .filter(|h| !h.frontend)
        .map(|h| h.speed)
        .collect();
    assert!(speeds.windows(2).all(|w| w[0] == w[1]));
}

fn ms2_counts(mapping: &taskmapper_core::Mapping) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for r in ms2_runnable_ids(32) {
        *counts.entry(mapping.runnable_to_host[&r].clone()).or_insert(0) += 1;
    }
    counts
}

#[test]
fn shipped_best_and_worst_sweep_mappings_match_their_percentages() {
    let app =
        normalize_application(generate_escience(32, &EscienceProfile::default()).unwrap()).unwrap();
    let p = parse_platform(root("platforms/hlrs-heterogeneous.json")).unwrap();

    let m_good = parse_mapping(root("mappings/m_good.json"), &app, &p).unwrap();
    let counts = ms2_counts(&m_good);
    assert_eq!(counts["HOST_0_0"], 17); // 53%
    assert_eq!(counts["HOST_0_1"], 2); // 6.3%
    assert_eq!(counts["HOST_0_2"], 6); // 18.8%
    assert_eq!(counts["HOST_1_0"], 3); // 9.4%
    assert_eq!(counts["HOST_1_1"], 4); // 12.5%

    let m_bad = parse_mapping(root("mappings/m_bad.json"), &app, &p).unwrap();
    let counts = ms2_counts(&m_bad);
    assert_eq!(counts["HOST_0_0"], 8); // 25%
    assert_eq!(counts["HOST_0_1"], 4); // 12.5%
    assert_eq!(counts["HOST_0_2"], 11); // 34.4%
    assert_eq!(counts["HOST_1_0"], 3); // 9.4%
    assert_eq!(counts["HOST_1_1"], 6); // 18.7%
}

#[test]
fn random_seed_sweep_produces_distinct_mappings() {
    let app = generate_escience(32, &EscienceProfile::default()).unwrap();
    let p = parse_platform(root("platforms/hlrs-heterogeneous.json")).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..100 {
        let m = map_random(&app, &p, seed, false).unwrap();
        seen.insert(serialize_mapping(&m));
    }
    assert!(seen.len() >= 95, "only {} distinct mappings", seen.len());
}

#[test]
fn round_robin_spreads_ms2_evenly_on_reference_platform() {
    let app = generate_escience(32, &EscienceProfile::default()).unwrap();
    let p = parse_platform(root("platforms/hlrs-heterogeneous.json")).unwrap();
    let m = map_round_robin(&app, &p, false).unwrap();
    let counts = ms2_counts(&m);
    let max = counts.values().max().unwrap();
    let min = counts.values().min().unwrap();
    assert!(max - min <= 1, "MS2 spread {counts:?}");
}

#[test]
fn every_builtin_strategy_returns_a_total_valid_mapping() {
    use taskmapper_core::mapping::{map_all_on, validate_mapping, StrategySpec};
    let app =
        normalize_application(generate_escience(16, &EscienceProfile::default()).unwrap()).unwrap();
    let p = parse_platform(root("platforms/hlrs-heterogeneous.json")).unwrap();
    let mappings = vec![
        map_random(&app, &p, 3, false).unwrap(),
        map_round_robin(&app, &p, false).unwrap(),
        map_greedy_load(&app, &p, false).unwrap(),
        map_all_on(&app, &p, "HOST_1_0").unwrap(),
        StrategySpec::Random.resolve(&app, &p, 99, true).unwrap(),
    ];
    for m in &mappings {
        validate_mapping(m, &app, &p).unwrap();
        assert_eq!(m.runnable_to_host.len(), app.runnable_count());
        assert_eq!(m.label_to_host.len(), app.labels.len());
    }
}

#[test]
fn greedy_assignments_replay_the_stepwise_rule() {
    // Each runnable, taken in descending work (ties by id), must have
    // landed on a host whose accumulated work/speed was minimal at that
    // step (platform file order breaking ties).
    let app = generate_escience(32, &EscienceProfile::default()).unwrap();
    let p = parse_platform(root("platforms/hlrs-heterogeneous.json")).unwrap();
    let m = map_greedy_load(&app, &p, false).unwrap();

    let mut order: Vec<(&str, f64)> = app
        .runnables()
        .map(|r| (r.id.as_str(), r.total_compute_work()))
        .collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));

    let hosts: Vec<&taskmapper_core::platform::Host> = p.mappable_hosts(false);
    let mut load = vec![0.0f64; hosts.len()];
    for (rid, work) in order {
        let chosen = hosts
            .iter()
            .position(|h| h.id == m.runnable_to_host[rid])
            .expect("mapped to an eligible host");
        let best = (0..hosts.len())
            .map(|i| load[i] / hosts[i].speed)
            .fold(f64::INFINITY, f64::min);
        let chosen_metric = load[chosen] / hosts[chosen].speed;
        assert!(
            chosen_metric <= best,
            "runnable {rid} landed on {} (load/speed {chosen_metric}), better host existed ({best})",
            hosts[chosen].id
        );
        load[chosen] += work;
    }
}

#[test]
fn greedy_load_sends_most_work_to_the_fast_host() {
    let app = generate_escience(32, &EscienceProfile::default()).unwrap();
    let p = parse_platform(root("platforms/hlrs-heterogeneous.json")).unwrap();
    let m = map_greedy_load(&app, &p, false).unwrap();
    let counts = ms2_counts(&m);
    assert!(
        counts.get("HOST_0_2").copied().unwrap_or(0) > 16,
        "fast host got {counts:?}"
    );
}

// ---------------------------------------------------------------------
// Property tests.
// ---------------------------------------------------------------------

fn arb_instructions() -> impl Strategy<Value = Vec<Instruction>> {
    prop::collection::vec(
        prop_oneof![
            (0.0f64..1e6).prop_map(|work| Instruction::Compute { work }),
            prop_oneof![Just("LA"), Just("LB")]
                .prop_map(|l| Instruction::Read { label: l.to_string() }),
            prop_oneof![Just("LA"), Just("LB")]
                .prop_map(|l| Instruction::Write { label: l.to_string() }),
        ],
        0..12,
    )
}

proptest! {
    #[test]
    fn normalization_aggregates_exactly(instructions in arb_instructions()) {
        use taskmapper_core::appmodel::{ApplicationModel, Label, Runnable, Task};
        let app = ApplicationModel {
            labels: vec![
                Label { name: "LA".into(), size_bytes: 8 },
                Label { name: "LB".into(), size_bytes: 16 },
            ],
            tasks: vec![Task {
                id: "T".into(),
                runnables: vec![Runnable::new("R", instructions.clone())],
                precedence: vec![],
            }],
            activations: vec![],
        };
        let normalized = normalize_application(app).unwrap();
        let n = normalized.find_runnable("R").unwrap().normalized.clone().unwrap();

        let expected_work: f64 = instructions
            .iter()
            .map(|i| if let Instruction::Compute { work } = i { *work } else { 0.0 })
            .sum();
        let tol = expected_work.abs() * 1e-12;
        prop_assert!((n.compute_work - expected_work).abs() <= tol);

        let expected_reads: Vec<String> = instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Read { label } => Some(label.clone()),
                _ => None,
            })
            .collect();
        prop_assert_eq!(&n.reads, &expected_reads);
        let expected_writes: Vec<String> = instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Write { label } => Some(label.clone()),
                _ => None,
            })
            .collect();
        prop_assert_eq!(&n.writes, &expected_writes);

        // Idempotent.
        let again = normalize_application(normalized.clone()).unwrap();
        prop_assert_eq!(normalized, again);
    }

    #[test]
    fn power_is_monotone_and_exact_at_endpoints(
        p_idle in 0.0f64..500.0,
        span in 0.0f64..500.0,
        u1 in 0.0f64..=1.0,
        u2 in 0.0f64..=1.0,
    ) {
        let host = taskmapper_core::platform::Host {
            id: "H".into(),
            node: "n".into(),
            speed: 1.0,
            p_idle,
            p_full: p_idle + span,
            frontend: true,
        };
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        prop_assert!(power_at(&host, lo).unwrap() <= power_at(&host, hi).unwrap());
        prop_assert_eq!(power_at(&host, 0.0).unwrap(), p_idle);
        prop_assert_eq!(power_at(&host, 1.0).unwrap(), p_idle + span);
    }

    #[test]
    fn escience_generator_round_trips(n in 1usize..20) {
        let app = generate_escience(n, &EscienceProfile::default()).unwrap();
        let text = serialize_application(&app);
        let reparsed = taskmapper_core::parse_application_str(&text).unwrap();
        prop_assert_eq!(app, reparsed);
    }
}

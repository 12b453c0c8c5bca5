use super::*;
use crate::arch::Role;

fn record(id: u32, submit: f64, start: Option<f64>, complete: Option<f64>) -> RequestRecord {
    let ns = |s: f64| (s * NS_PER_S) as u64;
    RequestRecord {
        request_id: id,
        src: 1,
        dst: 2,
        submit_ns: ns(submit),
        start_ns: start.map(ns),
        complete_ns: complete.map(ns),
    }
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "topology": {"kind": "hub_and_spoke", "end_nodes": 4, "km": 5.0, "units": 1},
            "demand": {"rate": 40.0, "duration_s": 0.2, "window_s": [0.1, 0.2], "repetitions": 2},
            "seed": 7,
            "drain": true,
            "sweep": {"units": [1, 2], "rates": [40.0]}
        }"#,
    )
    .unwrap()
}

#[test]
fn device_and_fibre_counts() {
    let n = Network::build(&TopologySpec::hub_and_spoke(2, 1.0, 1)).unwrap();
    assert_eq!((n.device_count(), n.fibre_count()), (3, 2));
    let n = Network::build(&TopologySpec::hub_and_spoke(16, 5.0, 8)).unwrap();
    assert_eq!(n.device_count(), 17);
    assert_eq!(n.end_nodes.len(), 16);
    let n = Network::build(&TopologySpec::chain(5.0, 1)).unwrap();
    assert_eq!(n.device_count(), 5);
    assert_eq!(n.roles[&20], Role::Router);
    assert_eq!(n.controller, 10);
}

#[test]
fn invalid_topologies() {
    let bad = |t: TopologySpec| matches!(Network::build(&t), Err(NetError::InvalidTopology(_)));
    assert!(bad(TopologySpec::hub_and_spoke(2, 1.0, 0)));

    let mut t = TopologySpec::hub_and_spoke(3, 1.0, 1);
    t.links.pop();
    assert!(bad(t), "disconnected end node");

    let mut t = TopologySpec::hub_and_spoke(2, 1.0, 1);
    t.nodes.push(NodeSpec {
        id: 1,
        role: Role::EndNode,
        units: 0,
    });
    assert!(bad(t), "duplicate id");

    let mut t = TopologySpec::hub_and_spoke(2, 1.0, 1);
    t.nodes[1].units = 2;
    assert!(bad(t), "units on an end node");

    let mut t = TopologySpec::hub_and_spoke(2, 1.0, 1);
    t.links.push(LinkSpec {
        a: 1,
        b: 99,
        km: 1.0,
    });
    assert!(bad(t), "link to an unknown node");

    let t = TopologySpec {
        nodes: vec![NodeSpec {
            id: 1,
            role: Role::EndNode,
            units: 0,
        }],
        links: vec![],
        physics: Default::default(),
    };
    assert!(bad(t), "no hub");
}

#[test]
fn zero_rate_gives_no_demand() {
    let d = DemandSpec {
        rate: 0.0,
        ..Default::default()
    };
    assert!(generate_demand(&d, &[1, 2, 3], 1).is_empty());
}

#[test]
fn demand_count_matches_poisson_mean() {
    let d = DemandSpec {
        rate: 100.0,
        duration_s: 2.0,
        ..Default::default()
    };
    let seeds = 1000;
    let total: usize = (0..seeds)
        .map(|s| generate_demand(&d, &[1, 2, 3, 4], s).len())
        .sum();
    let mean = total as f64 / seeds as f64;
    let expect = d.rate * d.duration_s;
    let sigma = (expect / seeds as f64).sqrt();
    assert!(
        (mean - expect).abs() < 3.0 * sigma,
        "mean {mean}, expected {expect} +- {}",
        3.0 * sigma
    );
}

#[test]
fn demand_is_deterministic_and_well_formed() {
    let d = DemandSpec {
        rate: 500.0,
        ..Default::default()
    };
    let nodes = [1, 2, 3, 4, 5];
    let a = generate_demand(&d, &nodes, 42);
    assert_eq!(a, generate_demand(&d, &nodes, 42));
    assert_ne!(a, generate_demand(&d, &nodes, 43));
    assert!(a.windows(2).all(|w| w[0].time_ns <= w[1].time_ns));
    assert!(a
        .iter()
        .all(|i| i.src != i.dst && nodes.contains(&i.src) && nodes.contains(&i.dst)));
    assert!(a
        .iter()
        .all(|i| i.time_ns < d.duration_ns() && i.num_pairs == 50));
    assert!(a.iter().enumerate().all(|(k, i)| i.id == k as u32));
}

#[test]
fn demand_pairs_are_roughly_uniform() {
    let d = DemandSpec {
        rate: 2000.0,
        duration_s: 10.0,
        ..Default::default()
    };
    let inj = generate_demand(&d, &[1, 2, 3], 5);
    let mut counts = std::collections::BTreeMap::new();
    for i in &inj {
        *counts.entry((i.src, i.dst)).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 6);
    let expect = inj.len() as f64 / 6.0;
    let chi2: f64 = counts
        .values()
        .map(|&c| (c as f64 - expect).powi(2) / expect)
        .sum();
    // 5 degrees of freedom; 20.5 is the 0.999 quantile.
    assert!(chi2 < 20.5, "chi2 {chi2}");
}

#[test]
fn demand_spec_validation() {
    assert!(DemandSpec::default().validate().is_ok());
    assert!(DemandSpec {
        rate: -1.0,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(DemandSpec {
        rate: f64::NAN,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(DemandSpec {
        window_s: [1.0, 3.0],
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(DemandSpec {
        window_s: [1.5, 1.0],
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(DemandSpec {
        num_pairs: 0,
        ..Default::default()
    }
    .validate()
    .is_err());
}

#[test]
fn throughput_counts_completions_per_window_second() {
    let recs: Vec<_> = (0..30)
        .map(|i| {
            let t = 1.0 + i as f64 * 0.03;
            record(i, t - 0.01, Some(t), Some(t + 0.015))
        })
        .collect();
    let m = compute_metrics(&recs, (1_000_000_000, 2_000_000_000));
    assert_eq!(m.count, 30);
    assert!((m.throughput - 30.0).abs() < 1e-9);
    assert!((m.mean_latency - 0.01).abs() < 1e-6);
    assert!((m.mean_execution - 0.015).abs() < 1e-6);
    assert!(!m.empty);
}

#[test]
fn window_requires_start_and_complete_inside() {
    let recs = vec![
        record(0, 0.9, Some(0.99), Some(1.005)),
        record(1, 1.0, Some(1.2), Some(1.215)),
        record(2, 1.9, Some(1.99), Some(2.005)),
        record(3, 1.5, None, None),
        record(4, 1.5, Some(1.6), None),
    ];
    let m = compute_metrics(&recs, (1_000_000_000, 2_000_000_000));
    assert_eq!(m.count, 1);
    assert!((m.mean_latency - 0.2).abs() < 1e-6);
}

#[test]
fn empty_window_is_flagged() {
    let m = compute_metrics(&[], (0, 1_000_000_000));
    assert!(m.empty);
    assert_eq!(
        (m.count, m.throughput, m.mean_latency, m.p95),
        (0, 0.0, 0.0, 0.0)
    );
}

#[test]
fn percentile_and_cdf() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(percentile(&v, 0.5), 2.0);
    assert_eq!(percentile(&v, 0.95), 4.0);
    assert_eq!(percentile(&v, 0.0), 1.0);
    assert_eq!(cdf_at(&v, 2.0), 0.5);
    assert_eq!(cdf_at(&v, 1.999), 0.25);
    assert_eq!(cdf_at(&v, 0.5), 0.0);
    assert_eq!(cdf_at(&v, 4.0), 1.0);
}

#[test]
fn mean_execution_ignores_incomplete() {
    let recs = vec![
        record(0, 0.0, Some(0.1), Some(0.12)),
        record(1, 0.0, Some(0.1), None),
    ];
    assert!((mean_execution_time(&recs).unwrap() - 0.02).abs() < 1e-9);
    assert_eq!(mean_execution_time(&recs[1..]), None);
}

#[test]
fn idle_run_has_no_records_and_a_stable_hash() {
    let d = DemandSpec {
        rate: 0.0,
        duration_s: 0.01,
        window_s: [0.0, 0.01],
        ..Default::default()
    };
    let topo = TopologySpec::hub_and_spoke(2, 5.0, 1);
    let a = run_experiment(&topo, &d, 3, true, false).unwrap();
    assert!(a.records.is_empty());
    assert_eq!(a.trace_hash.len(), 64);
    assert_ne!(a.trace_hash, "0".repeat(64));
    assert_eq!(
        a.trace_hash,
        run_experiment(&topo, &d, 3, true, false)
            .unwrap()
            .trace_hash
    );
}

#[test]
fn single_request_timeline() {
    let topo = TopologySpec::hub_and_spoke(2, 5.0, 1);
    let net = Network::build(&topo).unwrap();
    let inj = vec![Injection {
        id: 0,
        time_ns: 1_000_000,
        src: 1,
        dst: 2,
        num_pairs: 50,
    }];
    let sim = Simulation::new(net, &Programs::builtin(), inj, 11).unwrap();
    let r = sim.run(RunOptions {
        drain: true,
        stop_ns: 2_000_000,
        drain_limit_ns: 10_000_000_000,
        keep_trace: false,
    });
    assert!(r.aborted.is_none());
    let rec = &r.records[0];
    let (start, complete) = (rec.start_ns.unwrap(), rec.complete_ns.unwrap());
    // 5 km of fibre is 25 us one way; the request reaches the controller in one hop.
    assert!(start - rec.submit_ns >= 24_000 && start - rec.submit_ns < 100_000);
    let exec = (complete - start) as f64 / NS_PER_S;
    assert!((0.005..0.05).contains(&exec), "exec {exec}");
    assert!(r.audit.clean());
    assert_eq!(r.audit.deliveries, 100);
    assert_eq!(r.stats.ledger_violations, 0);
}

#[test]
fn drained_run_completes_every_request() {
    let cfg = small_config();
    let r = run_cell(&cfg, None, None, 7, false).unwrap();
    assert!(!r.records.is_empty());
    assert!(r.aborted.is_none());
    for rec in &r.records {
        let (s, c) = (rec.start_ns.unwrap(), rec.complete_ns.unwrap());
        assert!(rec.submit_ns <= s && s <= c);
    }
    assert!(r.audit.clean());
}

#[test]
fn config_errors_are_path_anchored() {
    let err = |text: &str| match ExperimentConfig::from_json(text) {
        Err(NetError::Config { path, .. }) => path,
        other => panic!("expected a config error, got {other:?}"),
    };
    assert_eq!(
        err(
            r#"{"topology": {"kind": "chain", "km": 1.0, "units": 1}, "demand": {"window_s": [1.0, "x"]}}"#
        ),
        "demand.window_s[1]"
    );
    // Tagged topology variants are buffered, so errors inside stop at the variant.
    assert_eq!(
        err(r#"{"topology": {"kind": "chain", "km": "far", "units": 1}}"#),
        "topology"
    );
    assert_eq!(
        err(
            r#"{"topology": {"kind": "chain", "km": 1.0, "units": 1}, "demand": {"rate": 1, "colour": 2}}"#
        ),
        "demand.colour"
    );
    assert_eq!(
        err(r#"{"topology": {"kind": "chain", "km": 1.0, "units": 1}, "demand": {"rate": -5}}"#),
        "demand"
    );
    assert_eq!(
        err(r#"{"topology": {"kind": "chain", "km": 1.0, "units": 0}}"#),
        "topology"
    );
    assert_eq!(
        err(
            r#"{"topology": {"kind": "chain", "km": 1.0, "units": 1}, "sweep": {"units": [], "rates": [1]}}"#
        ),
        "sweep.units"
    );
}

#[test]
fn config_round_trips_through_json() {
    let cfg = small_config();
    assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn seed_resolution() {
    let mut cfg = small_config();
    assert_eq!(cfg.resolve_seed(Some(3)).unwrap(), 3);
    assert_eq!(cfg.resolve_seed(None).unwrap(), 7);
    cfg.seed = None;
    assert!(matches!(
        cfg.resolve_seed(None),
        Err(NetError::Config { .. })
    ));
}

#[test]
fn run_output_replays() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let r = run_cell(&cfg, None, None, 7, false).unwrap();
    write_run(dir.path(), &cfg, None, None, &r).unwrap();
    for f in ["requests.csv", "summary.csv", "cdf.csv", "run.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let rep = replay(dir.path()).unwrap();
    assert!(rep.matches(), "{rep:?}");

    let csv = dir.path().join("requests.csv");
    let mut text = std::fs::read_to_string(&csv).unwrap();
    text.push_str("999,1,2,0,,\n");
    std::fs::write(&csv, text).unwrap();
    assert!(!replay(dir.path()).unwrap().csv_identical);
}

#[test]
fn sweep_is_worker_independent_and_resumes() {
    let cfg = small_config();
    let one = tempfile::tempdir().unwrap();
    let many = tempfile::tempdir().unwrap();
    let a = sweep(&cfg, 7, one.path(), 1).unwrap();
    let b = sweep(&cfg, 7, many.path(), 3).unwrap();
    assert_eq!((a.ran, a.resumed, a.rows.len()), (4, 0, 4));
    assert!(a.failures.is_empty());
    let summary = |d: &std::path::Path| std::fs::read(d.join("summary.csv")).unwrap();
    assert_eq!(summary(one.path()), summary(many.path()));
    assert_eq!(a.rows, b.rows);
    assert!(one.path().join("cdf/u1_r40.csv").exists());
    assert!(one.path().join("cdf/u2_r40.csv").exists());

    // Drop one cell and resume: only it is re-run.
    std::fs::remove_file(one.path().join("cells/u2_r40_s8.json")).unwrap();
    let c = sweep(&cfg, 7, one.path(), 1).unwrap();
    assert_eq!((c.ran, c.resumed), (1, 3));
    assert_eq!(summary(one.path()), summary(many.path()));
    assert_eq!(read_cells(one.path()).unwrap().len(), 4);
}

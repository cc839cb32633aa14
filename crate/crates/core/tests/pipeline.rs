//! Generate, store, reload, simulate, log, and audit through the public API.

use std::fs;

use vne_core::sim::{parse_mappings, read_decisions, read_metrics, replay_audit, simulate_workload, timeline_from_log, write_run};
use vne_core::workload::{generate_workload, read_workload, write_workload};
use vne_core::{Accrual, Algorithm, SimConfig, WorkloadConfig};

fn small() -> WorkloadConfig {
    WorkloadConfig { seed: 17, sn_nodes: 40, sn_links: 120, vn_count: 120, ..WorkloadConfig::default() }
}

#[test]
fn stored_workload_simulates_like_the_generated_one() {
    let tmp = tempfile::tempdir().unwrap();
    let generated = generate_workload(&small()).unwrap();
    write_workload(tmp.path(), &generated).unwrap();
    let loaded = read_workload(tmp.path()).unwrap();
    assert_eq!(loaded, generated.load());

    for algorithm in Algorithm::ALL {
        let cfg = SimConfig { algorithm, horizon: 1500, sample_every: 50, ..SimConfig::default() };
        let a = simulate_workload(&loaded, &cfg);
        let b = simulate_workload(&generated.load(), &cfg);
        assert_eq!(a.decisions, b.decisions);
        assert_eq!(a.mappings, b.mappings);
    }
}

#[test]
fn logs_round_trip_and_audit_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let w = generate_workload(&small()).unwrap().load();
    for algorithm in Algorithm::ALL {
        for accrual in [Accrual::DiscreteUnits, Accrual::Continuous] {
            let cfg = SimConfig { algorithm, accrual, horizon: 1500, sample_every: 50, ..SimConfig::default() };
            let result = simulate_workload(&w, &cfg);
            let prefix = tmp.path().join(format!("{algorithm}-{}", accrual.name()));
            write_run(&prefix, &cfg, &result).unwrap();

            let read = |ext: &str| fs::File::open(format!("{}{ext}", prefix.display())).unwrap();
            let log = read_decisions(read(".decisions.csv")).unwrap();
            assert_eq!(log, result.decisions);
            let metrics = read_metrics(read(".metrics.csv")).unwrap();
            assert_eq!(metrics, result.timeline);
            assert_eq!(timeline_from_log(&log, cfg.horizon, cfg.sample_every, accrual), result.timeline);

            let text = fs::read_to_string(format!("{}.mappings.txt", prefix.display())).unwrap();
            let file = parse_mappings(&text).unwrap();
            let summary = replay_audit(&w, &log, &file, cfg.max_hops).unwrap();
            assert_eq!(summary.accepted, result.mappings.len());
            assert_eq!(summary.accepted + summary.rejected, w.requests.len());
        }
    }
}

#[test]
fn algorithms_keep_their_relative_order_on_a_small_workload() {
    let w = generate_workload(&small()).unwrap().load();
    let accepted = |algorithm| {
        let cfg = SimConfig { algorithm, horizon: 1500, ..SimConfig::default() };
        simulate_workload(&w, &cfg).mappings.len()
    };
    assert!(accepted(Algorithm::Bfsn) > accepted(Algorithm::Greedy));
    assert!(accepted(Algorithm::BfsnHem) > accepted(Algorithm::Greedy));
}

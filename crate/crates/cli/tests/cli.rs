use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vne_core::graph::{Mapping, Path as SubPath};
use vne_core::reference::{oracle_embed, Objective};
use vne_core::sim::{parse_mappings, read_decisions, read_metrics};

const FIXTURE_RUN: [&str; 6] = ["--horizon", "400", "--sample-every", "50", "--algorithm", "bfsn"];

fn vne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vne")).args(args).output().expect("binary runs")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Runs the fixture with `overrides` replacing the matching default flags.
fn run_fixture(dir: &Path, name: &str, overrides: &[&str]) -> PathBuf {
    let prefix = dir.join(name);
    let tiny = fixtures().join("tiny");
    let mut args = vec!["run", "--workload", s(&tiny), "--out", s(&prefix)];
    for pair in FIXTURE_RUN.chunks(2) {
        if !overrides.contains(&pair[0]) {
            args.extend_from_slice(pair);
        }
    }
    args.extend_from_slice(overrides);
    ok(&vne(&args));
    prefix
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    PathBuf::from(format!("{}{ext}", prefix.display()))
}

#[test]
fn tiny_workload_matches_the_golden_log() {
    let tmp = tempfile::tempdir().unwrap();
    let prefix = run_fixture(tmp.path(), "bfsn", &[]);
    for ext in [".decisions.csv", ".mappings.txt"] {
        let got = fs::read_to_string(with_ext(&prefix, ext)).unwrap();
        let want = fs::read_to_string(fixtures().join(format!("tiny_bfsn{ext}"))).unwrap();
        assert_eq!(got, want, "{ext} differs from the golden copy");
    }
}

#[test]
fn golden_log_audits_clean_and_rejections_are_explained() {
    let tiny = fixtures().join("tiny");
    let decisions = fixtures().join("tiny_bfsn.decisions.csv");
    let out = ok(&vne(&["validate", "--workload", s(&tiny), "--decisions", s(&decisions)]));
    assert!(out.starts_with("ok: 7 accepted, 3 rejected"), "{out}");

    // Rebuild the residual state at each rejection and ask the exhaustive
    // search whether anything would have fit. Request 7 would: its only
    // pocket {3,5,7} is joined through node 1, which is too small to host,
    // so the bandwidth inside the pocket is a single link and the aggregate
    // check culls it before the search starts.
    let w = vne_core::read_workload(&tiny).unwrap();
    let log = read_decisions(fs::File::open(&decisions).unwrap()).unwrap();
    let file = parse_mappings(&fs::read_to_string(fixtures().join("tiny_bfsn.mappings.txt")).unwrap()).unwrap();
    let mut verdicts = Vec::new();
    for r in log.iter().filter(|r| !r.accepted) {
        let mut state = w.substrate.clone();
        for prior in log.iter().filter(|p| p.accepted && p.arrival < r.arrival) {
            let req = &w.requests[prior.id];
            if req.departure() <= r.arrival {
                continue;
            }
            let (hosts, paths) = &file.mappings[&prior.id];
            let links = paths.iter().map(|p| SubPath::from_nodes(&state, p.clone()).unwrap()).collect();
            state.allocate(&req.vn, &Mapping { nodes: hosts.clone(), links }).unwrap();
        }
        let vn = &w.requests[r.id].vn;
        let found = oracle_embed(vn, &state, 2, Objective::Feasibility, None).unwrap();
        if found.is_some() {
            assert!(vne_core::candidate_subnetworks(&state, vn, 2).is_empty());
            assert_eq!(r.subnets_tried, 0);
        }
        verdicts.push((r.id, found.is_some()));
    }
    assert_eq!(verdicts, [(6, false), (7, true), (8, false)]);
}

#[test]
fn every_algorithm_passes_the_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let tiny = fixtures().join("tiny");
    for alg in ["bfsn", "bfsn-hem", "greedy"] {
        let prefix = run_fixture(tmp.path(), alg, &["--algorithm", alg]);
        let decisions = with_ext(&prefix, ".decisions.csv");
        ok(&vne(&["validate", "--workload", s(&tiny), "--decisions", s(&decisions)]));
    }
}

#[test]
fn zero_hops_only_accepts_full_colocation() {
    let tmp = tempfile::tempdir().unwrap();
    for alg in ["bfsn", "bfsn-hem", "greedy"] {
        let prefix = run_fixture(tmp.path(), alg, &["--algorithm", alg, "--max-hops", "0"]);
        let file = parse_mappings(&fs::read_to_string(with_ext(&prefix, ".mappings.txt")).unwrap()).unwrap();
        assert_eq!(file.max_hops, Some(0));
        for (hosts, paths) in file.mappings.values() {
            assert!(hosts.iter().all(|&h| h == hosts[0]), "{alg}: {hosts:?}");
            assert!(paths.iter().all(|p| p.len() == 1));
        }
    }
}

#[test]
fn run_prints_the_final_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let prefix = tmp.path().join("r");
    let tiny = fixtures().join("tiny");
    let mut args = vec!["run", "--workload", s(&tiny), "--out", s(&prefix)];
    args.extend_from_slice(&FIXTURE_RUN);
    let out = ok(&vne(&args));
    assert!(out.contains("acceptance ratio  0.7000"), "{out}");
    assert!(out.contains("avg revenue"));
    assert!(out.contains("revenue/cost"));
    let metrics = read_metrics(fs::File::open(with_ext(&prefix, ".metrics.csv")).unwrap()).unwrap();
    assert_eq!(metrics.iter().map(|m| m.time).collect::<Vec<_>>(), (1..=8).map(|k| k * 50).collect::<Vec<_>>());
}

#[test]
fn run_fails_on_a_missing_workload() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vne(&["run", "--workload", s(&tmp.path().join("nope")), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let out = vne(&["run", "--workload", "w", "--out", "o", "--algorithm", "rw-maxmatch"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown algorithm"));
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&vne(&["generate", "--seed", "1", "--out-dir", s(dir), "--sn-nodes", "40", "--sn-links", "120", "--vn-count", "50"]));
    }
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert_eq!(ta.len(), 52);
    assert_eq!(ta, tb);
}

#[test]
fn generate_defaults_give_the_full_protocol_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("w");
    let out = ok(&vne(&["generate", "--out-dir", s(&dir)]));
    assert!(out.contains("200-node/1000-link substrate and 3000 requests"), "{out}");
    let w = vne_core::read_workload(&dir).unwrap();
    assert_eq!(w.substrate.node_count(), 200);
    assert_eq!(w.substrate.link_count(), 1000);
    assert_eq!(w.requests.len(), 3000);
}

#[test]
fn generate_rejects_a_substrate_that_cannot_be_connected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vne(&["generate", "--out-dir", s(&tmp.path().join("w")), "--sn-nodes", "20", "--sn-links", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot connect"));
}

fn forge(tmp: &Path, edit: impl Fn(&str, &str) -> (String, String)) -> Output {
    let decisions = fs::read_to_string(fixtures().join("tiny_bfsn.decisions.csv")).unwrap();
    let mappings = fs::read_to_string(fixtures().join("tiny_bfsn.mappings.txt")).unwrap();
    let (d, m) = edit(&decisions, &mappings);
    let prefix = tmp.join("forged");
    fs::write(with_ext(&prefix, ".decisions.csv"), d).unwrap();
    fs::write(with_ext(&prefix, ".mappings.txt"), m).unwrap();
    let tiny = fixtures().join("tiny");
    vne(&["validate", "--workload", s(&tiny), "--decisions", s(&with_ext(&prefix, ".decisions.csv"))])
}

#[test]
fn validate_rejects_a_forged_acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    // Request 6 was rejected; claim it was accepted on a host with no room left.
    let out = forge(tmp.path(), |d, m| {
        let line = d.lines().find(|l| l.starts_with("6,")).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        let forged = format!("6,{},{},accepted,1.0,1.0,1,0", fields[1], fields[2]);
        (d.replace(line, &forged), format!("{m}6 0,0,0 0;0\n"))
    });
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("request 6"), "{err}");
}

#[test]
fn validate_rejects_an_unknown_request() {
    let tmp = tempfile::tempdir().unwrap();
    let out = forge(tmp.path(), |d, m| (format!("{d}42,500.0,10.0,rejected,0.0,0.0,0,0\n"), m.to_string()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown request 42"));
}

#[test]
fn validate_rejects_a_tampered_cost() {
    let tmp = tempfile::tempdir().unwrap();
    let out = forge(tmp.path(), |d, m| (d.replace(",4500.0,", ",4400.0,"), m.to_string()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cost"));
}

#[test]
fn report_aligns_two_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_fixture(tmp.path(), "bfsn", &[]);
    let b = run_fixture(tmp.path(), "greedy", &["--algorithm", "greedy"]);
    let out_dir = tmp.path().join("report");
    let out = ok(&vne(&[
        "report",
        "--metrics",
        s(&with_ext(&a, ".metrics.csv")),
        s(&with_ext(&b, ".metrics.csv")),
        "--out",
        s(&out_dir),
    ]));
    assert!(out.contains("bfsn") && out.contains("greedy"));
    for name in ["acceptance_ratio.dat", "avg_revenue.dat", "revenue_cost_ratio.dat"] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.split_whitespace().count() == 3), "{name}");
    }
    assert!(out_dir.join("summary.txt").exists());
    assert!(out_dir.join("plot.gp").exists());
}

#[test]
fn report_passes_a_single_run_through() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_fixture(tmp.path(), "bfsn", &[]);
    let metrics_path = with_ext(&a, ".metrics.csv");
    let out_dir = tmp.path().join("report");
    ok(&vne(&["report", "--metrics", s(&metrics_path), "--out", s(&out_dir)]));
    let metrics = read_metrics(fs::File::open(&metrics_path).unwrap()).unwrap();
    let text = fs::read_to_string(out_dir.join("avg_revenue.dat")).unwrap();
    let rows: Vec<(u64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let mut f = l.split_whitespace();
            (f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap())
        })
        .collect();
    let want: Vec<(u64, f64)> = metrics.iter().map(|m| (m.time, m.avg_revenue)).collect();
    assert_eq!(rows, want);
}

#[test]
fn report_resamples_mismatched_grids_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_fixture(tmp.path(), "fine", &[]);
    let b = run_fixture(tmp.path(), "coarse", &["--sample-every", "100"]);
    let out_dir = tmp.path().join("report");
    let out = vne(&[
        "report",
        "--metrics",
        s(&with_ext(&a, ".metrics.csv")),
        s(&with_ext(&b, ".metrics.csv")),
        "--out",
        s(&out_dir),
    ]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let text = fs::read_to_string(out_dir.join("acceptance_ratio.dat")).unwrap();
    let times: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(times, ["100", "200", "300", "400"]);
}

#[test]
fn report_rejects_an_empty_metrics_file() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.metrics.csv");
    fs::write(&empty, "").unwrap();
    let out = vne(&["report", "--metrics", s(&empty), "--out", s(&tmp.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
}

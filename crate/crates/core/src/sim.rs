//! Online admission simulation: arrivals are embedded or rejected, accepted
//! requests hold their resources until departure, and the decision log is
//! turned into time-averaged revenue, cost and acceptance metrics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path as FsPath;
use std::str::FromStr;

use thiserror::Error;

use crate::amount::Amount;
use crate::bfsn::{bfsn_embed, BacktrackCounting, BfsnConfig, EmbedOutcome};
use crate::graph::{cost, revenue, validate_mapping, Mapping, Path, SubstrateNetwork, VnRequest};
use crate::hem::{bfsn_hem_embed_with, MergeScan};
use crate::reference::greedy_embed;
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Bfsn,
    BfsnHem,
    Greedy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Bfsn, Algorithm::BfsnHem, Algorithm::Greedy];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bfsn => "bfsn",
            Algorithm::BfsnHem => "bfsn-hem",
            Algorithm::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown algorithm {0:?} (expected bfsn, bfsn-hem or greedy)")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownAlgorithm(s.to_string()))
    }
}

/// How revenue and cost accrue over a request's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accrual {
    /// Sampled once per integer time unit `t` with `arrival <= t < arrival + lifetime`.
    #[default]
    DiscreteUnits,
    /// Integrated over the real interval `[arrival, arrival + lifetime)`.
    Continuous,
}

impl Accrual {
    pub fn name(self) -> &'static str {
        match self {
            Accrual::DiscreteUnits => "discrete-units",
            Accrual::Continuous => "continuous",
        }
    }

    /// Time the request contributes within `[0, horizon]`.
    pub fn active_time(self, arrival: f64, lifetime: f64, horizon: u64) -> f64 {
        let end = arrival + lifetime;
        match self {
            Accrual::DiscreteUnits => {
                let first = arrival.max(0.0).ceil();
                let last = ((end.ceil() - 1.0).min(horizon as f64)).floor();
                (last - first + 1.0).max(0.0)
            }
            Accrual::Continuous => (end.min(horizon as f64) - arrival.max(0.0)).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    pub max_hops: usize,
    /// Budget per request is this times the request's node count; `None`
    /// searches without a bound.
    pub backtrack_factor: Option<usize>,
    pub horizon: u64,
    pub sample_every: u64,
    pub accrual: Accrual,
    pub counting: BacktrackCounting,
    pub merge_scan: MergeScan,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            algorithm: Algorithm::Bfsn,
            max_hops: 2,
            backtrack_factor: Some(3),
            horizon: 30_000,
            sample_every: 100,
            accrual: Accrual::default(),
            counting: BacktrackCounting::default(),
            merge_scan: MergeScan::default(),
        }
    }
}

/// Runs the configured algorithm on one request without touching `sn`.
pub fn embed_request(cfg: &SimConfig, req: &VnRequest, sn: &SubstrateNetwork) -> EmbedOutcome {
    let bfsn_cfg = BfsnConfig {
        max_hops: cfg.max_hops,
        max_backtrack: cfg.backtrack_factor.map(|f| f * req.vn.node_count()),
        counting: cfg.counting,
    };
    match cfg.algorithm {
        Algorithm::Bfsn => bfsn_embed(&req.vn, sn, &bfsn_cfg),
        Algorithm::BfsnHem => bfsn_hem_embed_with(&req.vn, sn, &bfsn_cfg, cfg.merge_scan),
        Algorithm::Greedy => {
            let mapping = greedy_embed(&req.vn, sn, cfg.max_hops);
            EmbedOutcome {
                subnet_index: mapping.as_ref().map(|_| 0),
                mapping,
                subnets_tried: 0,
                backtracks: 0,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub id: usize,
    pub arrival: f64,
    pub lifetime: f64,
    pub accepted: bool,
    /// Zero when rejected.
    pub revenue: Amount,
    /// Zero when rejected.
    pub cost: Amount,
    pub subnets_tried: usize,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub time: u64,
    pub accepted: usize,
    pub rejected: usize,
    pub acceptance_ratio: Option<f64>,
    pub avg_revenue: f64,
    pub avg_cost: f64,
    pub revenue_cost_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    /// In arrival order.
    pub decisions: Vec<DecisionRecord>,
    /// Request id → mapping, for accepted requests.
    pub mappings: BTreeMap<usize, Mapping>,
    pub timeline: Vec<MetricSample>,
    /// Substrate state after every departure has been processed.
    pub final_substrate: SubstrateNetwork,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Departure {
    time: f64,
    id: usize,
}

impl Eq for Departure {}

impl Ord for Departure {
    // reversed: BinaryHeap pops the earliest departure, ties by smaller id
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Processes arrivals up to the horizon in order, releasing departures
/// first at equal times, then drains every remaining departure.
pub fn run_simulation(sn: &SubstrateNetwork, requests: &[VnRequest], cfg: &SimConfig) -> SimResult {
    let mut state = sn.clone();
    let mut pending: BinaryHeap<Departure> = BinaryHeap::new();
    let mut decisions = Vec::new();
    let mut mappings = BTreeMap::new();
    let by_id: BTreeMap<usize, &VnRequest> = requests.iter().map(|r| (r.id, r)).collect();

    let release_until = |state: &mut SubstrateNetwork, pending: &mut BinaryHeap<Departure>, mappings: &BTreeMap<usize, Mapping>, t: f64| {
        while pending.peek().is_some_and(|d| d.time <= t) {
            let d = pending.pop().unwrap();
            state
                .release(&by_id[&d.id].vn, &mappings[&d.id])
                .expect("released mapping was allocated");
        }
    };

    let mut order: Vec<&VnRequest> = requests.iter().collect();
    order.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.id.cmp(&b.id)));
    for req in order {
        if req.arrival > cfg.horizon as f64 {
            break;
        }
        release_until(&mut state, &mut pending, &mappings, req.arrival);
        let outcome = embed_request(cfg, req, &state);
        let mut record = DecisionRecord {
            id: req.id,
            arrival: req.arrival,
            lifetime: req.lifetime,
            accepted: false,
            revenue: Amount::ZERO,
            cost: Amount::ZERO,
            subnets_tried: outcome.subnets_tried,
            backtracks: outcome.backtracks,
        };
        if let Some(m) = outcome.mapping {
            debug_assert!(validate_mapping(&state, &req.vn, &m, cfg.max_hops).is_clean());
            state.allocate(&req.vn, &m).expect("embedders return feasible mappings");
            record.accepted = true;
            record.revenue = revenue(&req.vn);
            record.cost = cost(&req.vn, &m);
            pending.push(Departure { time: req.departure(), id: req.id });
            mappings.insert(req.id, m);
        }
        decisions.push(record);
    }
    release_until(&mut state, &mut pending, &mappings, f64::INFINITY);

    let timeline = timeline_from_log(&decisions, cfg.horizon, cfg.sample_every, cfg.accrual);
    SimResult { decisions, mappings, timeline, final_substrate: state }
}

pub fn simulate_workload(w: &Workload, cfg: &SimConfig) -> SimResult {
    run_simulation(&w.substrate, &w.requests, cfg)
}

/// Σ amount·active_time over accepted requests, exact until the final
/// conversion.
fn accrued(log: &[DecisionRecord], horizon: u64, accrual: Accrual, pick: fn(&DecisionRecord) -> Amount) -> f64 {
    match accrual {
        Accrual::DiscreteUnits => {
            let micros: i128 = log
                .iter()
                .filter(|r| r.accepted)
                .map(|r| pick(r).micros() as i128 * accrual.active_time(r.arrival, r.lifetime, horizon) as i128)
                .sum();
            micros as f64 / crate::amount::UNITS_PER_WHOLE as f64
        }
        Accrual::Continuous => log
            .iter()
            .filter(|r| r.accepted)
            .map(|r| pick(r).as_f64() * accrual.active_time(r.arrival, r.lifetime, horizon))
            .sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("horizon must be positive")]
pub struct ZeroHorizon;

/// Time-averaged revenue of the accepted requests over `[0, horizon]`.
pub fn long_term_avg_revenue(log: &[DecisionRecord], horizon: u64, accrual: Accrual) -> Result<f64, ZeroHorizon> {
    if horizon == 0 {
        return Err(ZeroHorizon);
    }
    Ok(accrued(log, horizon, accrual, |r| r.revenue) / horizon as f64)
}

pub fn long_term_avg_cost(log: &[DecisionRecord], horizon: u64, accrual: Accrual) -> Result<f64, ZeroHorizon> {
    if horizon == 0 {
        return Err(ZeroHorizon);
    }
    Ok(accrued(log, horizon, accrual, |r| r.cost) / horizon as f64)
}

/// Accepted over arrived; absent for an empty log.
pub fn acceptance_ratio(log: &[DecisionRecord]) -> Option<f64> {
    if log.is_empty() {
        return None;
    }
    Some(log.iter().filter(|r| r.accepted).count() as f64 / log.len() as f64)
}

/// Time-summed revenue over time-summed cost; absent when nothing accrued.
pub fn revenue_cost_ratio(log: &[DecisionRecord], horizon: u64, accrual: Accrual) -> Option<f64> {
    let c = accrued(log, horizon, accrual, |r| r.cost);
    (c > 0.0).then(|| accrued(log, horizon, accrual, |r| r.revenue) / c)
}

/// Sample times `sample_every, 2·sample_every, …` plus the horizon itself.
pub fn sample_times(horizon: u64, sample_every: u64) -> Vec<u64> {
    let mut times: Vec<u64> = if sample_every == 0 {
        Vec::new()
    } else {
        (1..=horizon / sample_every).map(|k| k * sample_every).collect()
    };
    if times.last() != Some(&horizon) && horizon > 0 {
        times.push(horizon);
    }
    times
}

/// Rebuilds the metrics timeline from a decision log alone.
pub fn timeline_from_log(log: &[DecisionRecord], horizon: u64, sample_every: u64, accrual: Accrual) -> Vec<MetricSample> {
    sample_times(horizon, sample_every)
        .into_iter()
        .map(|t| {
            let arrived: Vec<DecisionRecord> = log.iter().filter(|r| r.arrival <= t as f64).cloned().collect();
            let accepted = arrived.iter().filter(|r| r.accepted).count();
            MetricSample {
                time: t,
                accepted,
                rejected: arrived.len() - accepted,
                acceptance_ratio: acceptance_ratio(&arrived),
                avg_revenue: long_term_avg_revenue(log, t, accrual).expect("sample times are positive"),
                avg_cost: long_term_avg_cost(log, t, accrual).expect("sample times are positive"),
                revenue_cost_ratio: revenue_cost_ratio(log, t, accrual),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// CSV and mapping files

pub const DECISIONS_HEADER: [&str; 8] = [
    "id",
    "arrival",
    "lifetime",
    "decision",
    "revenue",
    "cost",
    "n_subnets_tried",
    "backtracks_used",
];

pub const METRICS_HEADER: [&str; 7] = [
    "time",
    "accepted",
    "rejected",
    "acceptance_ratio",
    "avg_revenue",
    "avg_cost",
    "revenue_cost_ratio",
];

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unexpected header {found:?}")]
    Header { found: Vec<String> },
    #[error("record {record}: {msg}")]
    Field { record: usize, msg: String },
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn write_decisions<W: Write>(out: W, log: &[DecisionRecord]) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DECISIONS_HEADER)?;
    for r in log {
        w.write_record([
            r.id.to_string(),
            format!("{:?}", r.arrival),
            format!("{:?}", r.lifetime),
            if r.accepted { "accepted" } else { "rejected" }.to_string(),
            format!("{:?}", r.revenue),
            format!("{:?}", r.cost),
            r.subnets_tried.to_string(),
            r.backtracks.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, i: usize, n: usize) -> Result<T, LogError> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| LogError::Field {
        record: n,
        msg: format!("bad {} {raw:?}", DECISIONS_HEADER.get(i).copied().unwrap_or("field")),
    })
}

fn check_header<R: Read>(r: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), LogError> {
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(LogError::Header { found });
    }
    Ok(())
}

pub fn read_decisions<R: Read>(input: R) -> Result<Vec<DecisionRecord>, LogError> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &DECISIONS_HEADER)?;
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let n = n + 1;
        let accepted = match rec.get(3) {
            Some("accepted") => true,
            Some("rejected") => false,
            other => {
                return Err(LogError::Field { record: n, msg: format!("bad decision {other:?}") });
            }
        };
        let amount = |i| parse_field::<f64>(&rec, i, n).map(Amount::from_f64);
        out.push(DecisionRecord {
            id: parse_field(&rec, 0, n)?,
            arrival: parse_field(&rec, 1, n)?,
            lifetime: parse_field(&rec, 2, n)?,
            accepted,
            revenue: amount(4)?,
            cost: amount(5)?,
            subnets_tried: parse_field(&rec, 6, n)?,
            backtracks: parse_field(&rec, 7, n)?,
        });
    }
    Ok(out)
}

pub fn write_metrics<W: Write>(out: W, timeline: &[MetricSample]) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for s in timeline {
        w.write_record([
            s.time.to_string(),
            s.accepted.to_string(),
            s.rejected.to_string(),
            opt(s.acceptance_ratio),
            format!("{:?}", s.avg_revenue),
            format!("{:?}", s.avg_cost),
            opt(s.revenue_cost_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricSample>, LogError> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &METRICS_HEADER)?;
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let n = n + 1;
        let get = |i: usize| -> Result<Option<f64>, LogError> {
            match rec.get(i).unwrap_or("") {
                "" => Ok(None),
                raw => raw.parse().map(Some).map_err(|_| LogError::Field {
                    record: n,
                    msg: format!("bad {} {raw:?}", METRICS_HEADER[i]),
                }),
            }
        };
        let count = |i: usize| -> Result<usize, LogError> {
            rec.get(i).unwrap_or("").parse().map_err(|_| LogError::Field {
                record: n,
                msg: format!("bad {}", METRICS_HEADER[i]),
            })
        };
        let required = |i: usize| get(i)?.ok_or_else(|| LogError::Field { record: n, msg: format!("missing {}", METRICS_HEADER[i]) });
        out.push(MetricSample {
            time: rec.get(0).unwrap_or("").parse().map_err(|_| LogError::Field { record: n, msg: "bad time".into() })?,
            accepted: count(1)?,
            rejected: count(2)?,
            acceptance_ratio: get(3)?,
            avg_revenue: required(4)?,
            avg_cost: required(5)?,
            revenue_cost_ratio: get(6)?,
        });
    }
    Ok(out)
}

/// Sidecar describing a run and holding every accepted mapping, one line per
/// request: `<id> <host,host,…> <path;path;…>` with paths as node sequences
/// (`-` when the request has no links).
pub fn write_mappings<W: Write>(mut out: W, cfg: &SimConfig, mappings: &BTreeMap<usize, Mapping>) -> std::io::Result<()> {
    writeln!(out, "# algorithm {}", cfg.algorithm)?;
    if cfg.algorithm == Algorithm::Greedy {
        writeln!(out, "# baseline {}", crate::reference::GREEDY_LABEL)?;
    }
    writeln!(out, "# max_hops {}", cfg.max_hops)?;
    match cfg.backtrack_factor {
        Some(f) => writeln!(out, "# backtrack_factor {f}")?,
        None => writeln!(out, "# backtrack_factor unbounded")?,
    }
    writeln!(out, "# horizon {}", cfg.horizon)?;
    writeln!(out, "# accrual {}", cfg.accrual.name())?;
    for (id, m) in mappings {
        let hosts: Vec<String> = m.nodes.iter().map(|h| h.to_string()).collect();
        let paths: Vec<String> = m.links.iter().map(|p| p.to_string()).collect();
        let paths = if paths.is_empty() { "-".to_string() } else { paths.join(";") };
        writeln!(out, "{id} {} {paths}", hosts.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MappingFile {
    pub max_hops: Option<usize>,
    /// Paths are kept as node sequences; they are resolved against a
    /// substrate during replay.
    pub mappings: BTreeMap<usize, (Vec<usize>, Vec<Vec<usize>>)>,
}

pub fn parse_mappings(text: &str) -> Result<MappingFile, LogError> {
    let mut file = MappingFile::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let bad = |msg: String| LogError::Field { record: line, msg };
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            if parts.next() == Some("max_hops") {
                let v = parts.next().unwrap_or("");
                file.max_hops = Some(v.parse().map_err(|_| bad(format!("bad max_hops {v:?}")))?);
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let [id, hosts, paths] = fields[..] else {
            return Err(bad("expected `<id> <hosts> <paths>`".into()));
        };
        let id: usize = id.parse().map_err(|_| bad(format!("bad id {id:?}")))?;
        let nums = |s: &str, sep: char| -> Result<Vec<usize>, LogError> {
            s.split(sep)
                .map(|t| t.parse().map_err(|_| bad(format!("bad node {t:?}"))))
                .collect()
        };
        let hosts = nums(hosts, ',')?;
        let paths = if paths == "-" {
            Vec::new()
        } else {
            paths.split(';').map(|p| nums(p, '-')).collect::<Result<_, _>>()?
        };
        if file.mappings.insert(id, (hosts, paths)).is_some() {
            return Err(bad(format!("duplicate request {id}")));
        }
    }
    Ok(file)
}

// ---------------------------------------------------------------------------
// Replay audit

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("decision for unknown request {0}")]
    UnknownRequest(usize),
    #[error("request {0} appears more than once")]
    DuplicateDecision(usize),
    #[error("request {id}: logged {field} {logged} differs from workload value {expected}")]
    Mismatch { id: usize, field: &'static str, logged: String, expected: String },
    #[error("request {0} is logged as accepted but has no mapping")]
    MissingMapping(usize),
    #[error("request {0} has a mapping but is not logged as accepted")]
    UnexpectedMapping(usize),
    #[error("mapping for request {0} has no such substrate link")]
    BrokenPath(usize),
    #[error("request {id}: {report}")]
    Invalid { id: usize, report: String },
    #[error("decisions are not in arrival order at request {0}")]
    Order(usize),
    #[error("release accounting failed for request {id}: {msg}")]
    Release { id: usize, msg: String },
    #[error("residuals not restored after the last departure: {0}")]
    NotRestored(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditSummary {
    pub accepted: usize,
    pub rejected: usize,
}

/// Replays a decision log against its workload: every accepted mapping must
/// validate against the residual state at its arrival, the logged revenue
/// and cost must match, and after the last departure the substrate must be
/// back at its initial residuals.
pub fn replay_audit(
    w: &Workload,
    log: &[DecisionRecord],
    file: &MappingFile,
    max_hops: usize,
) -> Result<AuditSummary, AuditError> {
    let initial = w.substrate.clone();
    let mut state = w.substrate.clone();
    let mut pending: BinaryHeap<Departure> = BinaryHeap::new();
    let mut resolved: BTreeMap<usize, Mapping> = BTreeMap::new();
    let mut seen = vec![false; w.requests.len()];
    let mut last_arrival = f64::NEG_INFINITY;

    let release = |state: &mut SubstrateNetwork, pending: &mut BinaryHeap<Departure>, resolved: &BTreeMap<usize, Mapping>, t: f64| {
        while pending.peek().is_some_and(|d| d.time <= t) {
            let d = pending.pop().unwrap();
            state
                .release(&w.requests[d.id].vn, &resolved[&d.id])
                .map_err(|e| AuditError::Release { id: d.id, msg: e.overflows.join("; ") })?;
        }
        Ok::<(), AuditError>(())
    };

    let mut summary = AuditSummary { accepted: 0, rejected: 0 };
    for r in log {
        let req = w.requests.get(r.id).ok_or(AuditError::UnknownRequest(r.id))?;
        if std::mem::replace(&mut seen[r.id], true) {
            return Err(AuditError::DuplicateDecision(r.id));
        }
        let mismatch = |field, logged: String, expected: String| AuditError::Mismatch { id: r.id, field, logged, expected };
        if r.arrival != req.arrival {
            return Err(mismatch("arrival", format!("{:?}", r.arrival), format!("{:?}", req.arrival)));
        }
        if r.lifetime != req.lifetime {
            return Err(mismatch("lifetime", format!("{:?}", r.lifetime), format!("{:?}", req.lifetime)));
        }
        if r.arrival < last_arrival {
            return Err(AuditError::Order(r.id));
        }
        last_arrival = r.arrival;
        release(&mut state, &mut pending, &resolved, r.arrival)?;

        let entry = file.mappings.get(&r.id);
        if !r.accepted {
            if entry.is_some() {
                return Err(AuditError::UnexpectedMapping(r.id));
            }
            if r.revenue != Amount::ZERO || r.cost != Amount::ZERO {
                return Err(mismatch("revenue/cost", format!("{:?}/{:?}", r.revenue, r.cost), "0/0".into()));
            }
            summary.rejected += 1;
            continue;
        }
        let (hosts, paths) = entry.ok_or(AuditError::MissingMapping(r.id))?;
        let links = paths
            .iter()
            .map(|p| Path::from_nodes(&state, p.clone()).ok_or(AuditError::BrokenPath(r.id)))
            .collect::<Result<Vec<_>, _>>()?;
        let m = Mapping { nodes: hosts.clone(), links };
        let report = validate_mapping(&state, &req.vn, &m, max_hops);
        if !report.is_clean() {
            return Err(AuditError::Invalid { id: r.id, report: report.to_string() });
        }
        if r.revenue != revenue(&req.vn) {
            return Err(mismatch("revenue", format!("{:?}", r.revenue), format!("{:?}", revenue(&req.vn))));
        }
        if r.cost != cost(&req.vn, &m) {
            return Err(mismatch("cost", format!("{:?}", r.cost), format!("{:?}", cost(&req.vn, &m))));
        }
        state
            .allocate(&req.vn, &m)
            .map_err(|e| AuditError::Invalid { id: r.id, report: e.to_string() })?;
        pending.push(Departure { time: req.departure(), id: r.id });
        resolved.insert(r.id, m);
        summary.accepted += 1;
    }
    if let Some(&id) = file.mappings.keys().find(|id| !resolved.contains_key(id)) {
        return Err(AuditError::UnexpectedMapping(id));
    }
    release(&mut state, &mut pending, &resolved, f64::INFINITY)?;
    if let Some(diff) = residual_difference(&initial, &state) {
        return Err(AuditError::NotRestored(diff));
    }
    Ok(summary)
}

/// First residual that differs between two copies of one substrate.
pub fn residual_difference(a: &SubstrateNetwork, b: &SubstrateNetwork) -> Option<String> {
    for (x, y) in a.nodes().iter().zip(b.nodes()) {
        if x.cpu_residual != y.cpu_residual {
            return Some(format!("node {} cpu {:?} vs {:?}", x.id, x.cpu_residual, y.cpu_residual));
        }
    }
    for (x, y) in a.links().iter().zip(b.links()) {
        if x.bw_residual != y.bw_residual {
            return Some(format!("link {} bandwidth {:?} vs {:?}", x.id, x.bw_residual, y.bw_residual));
        }
    }
    None
}

/// Writes `<prefix>.metrics.csv`, `<prefix>.decisions.csv` and
/// `<prefix>.mappings.txt`.
pub fn write_run(prefix: &FsPath, cfg: &SimConfig, result: &SimResult) -> Result<(), LogError> {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        std::path::PathBuf::from(s)
    };
    if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_metrics(fs::File::create(with(".metrics.csv"))?, &result.timeline)?;
    write_decisions(fs::File::create(with(".decisions.csv"))?, &result.decisions)?;
    let mut buf = Vec::new();
    write_mappings(&mut buf, cfg, &result.mappings)?;
    fs::write(with(".mappings.txt"), buf)?;
    Ok(())
}

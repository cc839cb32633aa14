//! Waxman substrates, request streams, and the on-disk workload layout.
//!
//! A workload directory holds `substrate.brite`, one `vnr/NNNNN.brite` file
//! per request and a `manifest.txt` listing `<relative-path> <arrival>
//! <lifetime>` per line in arrival order. A request's id is its manifest line
//! index.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::amount::Amount;
use crate::brite::{parse_brite, to_brite_string, BriteError, BriteMeta, TopoEdge, TopoNode, Topology};
use crate::graph::{GraphError, SubstrateNetwork, VnRequest};

#[derive(Debug, Clone, PartialEq)]
pub struct ServerProfile {
    pub name: String,
    pub cpu_capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub seed: u64,
    pub sn_nodes: usize,
    pub sn_links: usize,
    pub sn_bw_range: (f64, f64),
    pub server_profiles: Vec<ServerProfile>,
    pub vn_count: usize,
    pub vn_size_range: (usize, usize),
    pub vn_connectivity: f64,
    pub vn_cpu_choices: Vec<f64>,
    pub vn_bw_range: (f64, f64),
    /// Requests per time unit.
    pub arrival_rate: f64,
    pub lifetime_range: (f64, f64),
    pub waxman_alpha: f64,
    pub waxman_beta: f64,
    pub plane_size: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            seed: 1,
            sn_nodes: 200,
            sn_links: 1000,
            sn_bw_range: (50.0, 100.0),
            server_profiles: vec![
                ServerProfile { name: "2x1860MHz".into(), cpu_capacity: 3720.0 },
                ServerProfile { name: "2x2660MHz".into(), cpu_capacity: 5320.0 },
            ],
            vn_count: 3000,
            vn_size_range: (2, 20),
            vn_connectivity: 0.5,
            vn_cpu_choices: vec![2500.0, 2000.0, 1000.0, 500.0],
            vn_bw_range: (1.0, 50.0),
            arrival_rate: 0.1,
            lifetime_range: (300.0, 700.0),
            waxman_alpha: 0.5,
            waxman_beta: 0.2,
            plane_size: 1000.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Brite {
        path: String,
        #[source]
        source: BriteError,
    },
    #[error("{path}: {source}")]
    Graph {
        path: String,
        #[source]
        source: GraphError,
    },
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &FsPath) -> impl FnOnce(std::io::Error) -> WorkloadError + '_ {
    move |source| WorkloadError::Io { path: path.display().to_string(), source }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, strict: bool) -> Result<(), WorkloadError> {
    let ok_lo = if strict { lo > min } else { lo >= min };
    if !(lo.is_finite() && hi.is_finite() && ok_lo && lo <= hi) {
        return Err(WorkloadError::InvalidConfig(format!("{name} [{lo}, {hi}] is empty or out of bounds")));
    }
    Ok(())
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::InvalidConfig(msg));
        let n = self.sn_nodes;
        if n == 0 {
            return bad("sn_nodes must be positive".into());
        }
        if self.sn_links + 1 < n {
            return bad(format!("{} links cannot connect {n} nodes", self.sn_links));
        }
        if self.sn_links > n * (n - 1) / 2 {
            return bad(format!("{} links exceed the {} node pairs", self.sn_links, n * (n - 1) / 2));
        }
        check_range("sn_bw_range", self.sn_bw_range, 0.0, false)?;
        check_range("vn_bw_range", self.vn_bw_range, 0.0, true)?;
        check_range("lifetime_range", self.lifetime_range, 0.0, false)?;
        if self.server_profiles.is_empty() || self.server_profiles.iter().any(|p| !(p.cpu_capacity >= 0.0)) {
            return bad("server_profiles must be nonempty with nonnegative capacities".into());
        }
        if self.vn_cpu_choices.is_empty() || self.vn_cpu_choices.iter().any(|&c| !(c > 0.0)) {
            return bad("vn_cpu_choices must be nonempty and positive".into());
        }
        let (lo, hi) = self.vn_size_range;
        if lo == 0 || lo > hi {
            return bad(format!("vn_size_range [{lo}, {hi}] is empty"));
        }
        if !(self.vn_connectivity > 0.0 && self.vn_connectivity <= 1.0) {
            return bad("vn_connectivity must lie in (0, 1]".into());
        }
        if !(self.arrival_rate > 0.0 && self.arrival_rate.is_finite()) {
            return bad("arrival_rate must be positive".into());
        }
        if !(self.waxman_alpha > 0.0 && self.waxman_alpha <= 1.0) {
            return bad("waxman_alpha must lie in (0, 1]".into());
        }
        if !(self.waxman_beta > 0.0) || !(self.plane_size > 0.0) {
            return bad("waxman_beta and plane_size must be positive".into());
        }
        Ok(())
    }
}

fn place_nodes<R: Rng>(rng: &mut R, n: usize, plane: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.random_range(0.0..plane), rng.random_range(0.0..plane)))
        .collect()
}

fn dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).hypot(p.1 - q.1)
}

fn max_distance(pos: &[(f64, f64)]) -> f64 {
    let mut l: f64 = 0.0;
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            l = l.max(dist(pos[i], pos[j]));
        }
    }
    l
}

/// Waxman link weight `exp(-d / (beta * L))`, 1 for coincident layouts.
fn waxman_weight(d: f64, beta: f64, l: f64) -> f64 {
    if l > 0.0 {
        (-d / (beta * l)).exp()
    } else {
        1.0
    }
}

/// Union-find component labels of an edge set.
fn components(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<usize> {
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n).map(|x| find(&mut parent, x)).collect()
}

fn is_connected(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    components(n, edges).iter().all(|&c| c == 0)
}

/// Joins components by repeatedly adding the shortest edge between two of
/// them, Kruskal style.
fn bridge_components(pos: &[(f64, f64)], edges: &mut BTreeSet<(usize, usize)>) {
    let n = pos.len();
    let label = components(n, edges);
    if label.iter().all(|&c| c == 0) {
        return;
    }
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if label[i] != label[j] {
                candidates.push((dist(pos[i], pos[j]), i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut parent = label;
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for (_, i, j) in candidates {
        let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
            edges.insert((i, j));
        }
    }
}

/// Waxman substrate with exactly `sn_links` links, connected, with uniform
/// bandwidth and CPU drawn from the server profiles.
pub fn generate_substrate_topology<R: Rng>(cfg: &WorkloadConfig, rng: &mut R) -> Result<Topology, WorkloadError> {
    cfg.validate()?;
    let n = cfg.sn_nodes;
    let pos = place_nodes(rng, n, cfg.plane_size);
    let l = max_distance(&pos);
    let accept = |rng: &mut R, i: usize, j: usize| {
        rng.random::<f64>() < cfg.waxman_alpha * waxman_weight(dist(pos[i], pos[j]), cfg.waxman_beta, l)
    };

    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if accept(rng, i, j) {
                edges.insert((i, j));
            }
        }
    }
    bridge_components(&pos, &mut edges);

    while edges.len() < cfg.sn_links {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let e = (i.min(j), i.max(j));
        if i != j && !edges.contains(&e) && accept(rng, e.0, e.1) {
            edges.insert(e);
        }
    }
    while edges.len() > cfg.sn_links {
        let mut order: Vec<(usize, usize)> = edges.iter().copied().collect();
        order.shuffle(rng);
        let removed = order.into_iter().find(|e| {
            edges.remove(e);
            let ok = is_connected(n, &edges);
            if !ok {
                edges.insert(*e);
            }
            ok
        });
        debug_assert!(removed.is_some(), "more links than a spanning tree always leaves a removable one");
    }

    let nodes = pos
        .iter()
        .map(|&(x, y)| {
            let p = &cfg.server_profiles[rng.random_range(0..cfg.server_profiles.len())];
            TopoNode { x, y, cpu: Amount::from_f64(p.cpu_capacity) }
        })
        .collect();
    let (lo, hi) = cfg.sn_bw_range;
    let edges = edges
        .into_iter()
        .map(|(from, to)| TopoEdge { from, to, bw: Amount::from_f64(rng.random_range(lo..=hi)) })
        .collect();
    Ok(Topology { nodes, edges })
}

pub fn generate_substrate(cfg: &WorkloadConfig) -> Result<SubstrateNetwork, WorkloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let topo = generate_substrate_topology(cfg, &mut rng)?;
    Ok(topo.to_substrate().expect("generated substrate is well formed"))
}

/// Scale for Waxman weights so that the expected fraction of accepted pairs
/// is `target`.
fn density_alpha(weights: &[f64], target: f64) -> f64 {
    let density = |a: f64| weights.iter().map(|&w| (a * w).min(1.0)).sum::<f64>() / weights.len() as f64;
    let min_w = weights.iter().copied().fold(f64::INFINITY, f64::min).max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = (0.0, 1.0 / min_w);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if density(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// One virtual network: Waxman acceptance scaled to the target density,
/// then minimum-distance repair.
fn generate_vn_topology<R: Rng>(cfg: &WorkloadConfig, rng: &mut R) -> Topology {
    let n = rng.random_range(cfg.vn_size_range.0..=cfg.vn_size_range.1);
    let pos = place_nodes(rng, n, cfg.plane_size);
    let l = max_distance(&pos);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let weights: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| waxman_weight(dist(pos[i], pos[j]), cfg.waxman_beta, l))
        .collect();
    let mut edges = BTreeSet::new();
    if !pairs.is_empty() {
        let alpha = density_alpha(&weights, cfg.vn_connectivity);
        for (&e, &w) in pairs.iter().zip(&weights) {
            if rng.random::<f64>() < (alpha * w).min(1.0) {
                edges.insert(e);
            }
        }
    }
    bridge_components(&pos, &mut edges);
    let nodes = pos
        .iter()
        .map(|&(x, y)| {
            let c = cfg.vn_cpu_choices[rng.random_range(0..cfg.vn_cpu_choices.len())];
            TopoNode { x, y, cpu: Amount::from_f64(c) }
        })
        .collect();
    let (lo, hi) = cfg.vn_bw_range;
    let edges = edges
        .into_iter()
        .map(|(from, to)| TopoEdge { from, to, bw: Amount::from_f64(rng.random_range(lo..=hi)) })
        .collect();
    Topology { nodes, edges }
}

/// A request in file form.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestSpec {
    pub topology: Topology,
    pub arrival: f64,
    pub lifetime: f64,
}

/// Poisson arrivals with uniform lifetimes, in arrival order.
pub fn generate_request_specs<R: Rng>(cfg: &WorkloadConfig, rng: &mut R) -> Result<Vec<RequestSpec>, WorkloadError> {
    cfg.validate()?;
    let gap = Exp::new(cfg.arrival_rate).map_err(|e| WorkloadError::InvalidConfig(e.to_string()))?;
    let (lo, hi) = cfg.lifetime_range;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(cfg.vn_count);
    for _ in 0..cfg.vn_count {
        t += gap.sample(rng);
        let lifetime = rng.random_range(lo..=hi);
        let topology = generate_vn_topology(cfg, rng);
        out.push(RequestSpec { topology, arrival: t, lifetime });
    }
    Ok(out)
}

fn to_request(id: usize, spec: &RequestSpec) -> VnRequest {
    VnRequest {
        id,
        vn: spec.topology.to_virtual().expect("generated request is well formed"),
        arrival: spec.arrival,
        lifetime: spec.lifetime,
    }
}

pub fn generate_vnr_stream(cfg: &WorkloadConfig) -> Result<Vec<VnRequest>, WorkloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let specs = generate_request_specs(cfg, &mut rng)?;
    Ok(specs.iter().enumerate().map(|(i, s)| to_request(i, s)).collect())
}

/// A generated workload: substrate first, then the request stream, both
/// drawn from one generator seeded with `cfg.seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedWorkload {
    pub substrate: Topology,
    pub requests: Vec<RequestSpec>,
}

pub fn generate_workload(cfg: &WorkloadConfig) -> Result<GeneratedWorkload, WorkloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let substrate = generate_substrate_topology(cfg, &mut rng)?;
    let requests = generate_request_specs(cfg, &mut rng)?;
    Ok(GeneratedWorkload { substrate, requests })
}

/// A workload loaded for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub substrate: SubstrateNetwork,
    /// Sorted by arrival; `requests[i].id == i`.
    pub requests: Vec<VnRequest>,
}

impl GeneratedWorkload {
    pub fn load(&self) -> Workload {
        Workload {
            substrate: self.substrate.to_substrate().expect("generated substrate is well formed"),
            requests: self.requests.iter().enumerate().map(|(i, s)| to_request(i, s)).collect(),
        }
    }
}

pub const SUBSTRATE_FILE: &str = "substrate.brite";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const REQUEST_DIR: &str = "vnr";

fn write_file(path: &FsPath, text: &str) -> Result<(), WorkloadError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_workload(dir: &FsPath, w: &GeneratedWorkload) -> Result<(), WorkloadError> {
    let vnr_dir = dir.join(REQUEST_DIR);
    fs::create_dir_all(&vnr_dir).map_err(io_err(&vnr_dir))?;
    write_file(&dir.join(SUBSTRATE_FILE), &to_brite_string(&w.substrate, &BriteMeta::default()))?;

    let mut order: Vec<usize> = (0..w.requests.len()).collect();
    order.sort_by(|&a, &b| w.requests[a].arrival.total_cmp(&w.requests[b].arrival).then(a.cmp(&b)));
    let mut manifest = String::new();
    for (line, &i) in order.iter().enumerate() {
        let r = &w.requests[i];
        let rel = format!("{REQUEST_DIR}/{line:05}.brite");
        let meta = BriteMeta { arrival: Some(r.arrival), lifetime: Some(r.lifetime) };
        write_file(&dir.join(&rel), &to_brite_string(&r.topology, &meta))?;
        let _ = writeln!(manifest, "{rel} {:?} {:?}", r.arrival, r.lifetime);
    }
    write_file(&dir.join(MANIFEST_FILE), &manifest)
}

fn read_topology(path: &FsPath) -> Result<(Topology, BriteMeta), WorkloadError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_brite(&text).map_err(|source| WorkloadError::Brite {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_workload(dir: &FsPath) -> Result<Workload, WorkloadError> {
    let sn_path = dir.join(SUBSTRATE_FILE);
    let (topo, _) = read_topology(&sn_path)?;
    let substrate = topo.to_substrate().map_err(|source| WorkloadError::Graph {
        path: sn_path.display().to_string(),
        source,
    })?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let mut requests: Vec<VnRequest> = Vec::new();
    for (idx, raw) in manifest.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| WorkloadError::Manifest { line, msg };
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let [rel, arrival, lifetime] = fields[..] else {
            return Err(bad("expected `<path> <arrival> <lifetime>`".into()));
        };
        let arrival: f64 = arrival.parse().map_err(|_| bad(format!("bad arrival {arrival:?}")))?;
        let lifetime: f64 = lifetime.parse().map_err(|_| bad(format!("bad lifetime {lifetime:?}")))?;
        if !(arrival.is_finite() && lifetime.is_finite() && lifetime >= 0.0) {
            return Err(bad("arrival and lifetime must be finite, lifetime nonnegative".into()));
        }
        if requests.last().is_some_and(|r| r.arrival > arrival) {
            return Err(bad("manifest is not sorted by arrival".into()));
        }
        let path: PathBuf = dir.join(rel);
        let (topo, meta) = read_topology(&path)?;
        if meta.arrival.is_some_and(|a| a != arrival) || meta.lifetime.is_some_and(|l| l != lifetime) {
            return Err(bad(format!("{rel} headers disagree with the manifest")));
        }
        let vn = topo.to_virtual().map_err(|source| WorkloadError::Graph {
            path: path.display().to_string(),
            source,
        })?;
        requests.push(VnRequest { id: requests.len(), vn, arrival, lifetime });
    }
    Ok(Workload { substrate, requests })
}

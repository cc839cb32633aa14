//! A small BRITE dialect: node lines carry an extra trailing CPU field, and
//! request files carry `# arrival` / `# lifetime` comment headers.
//!
//! ```text
//! Topology: ( 2 Nodes, 1 Edges )
//! # arrival 120.5
//! # lifetime 433.0
//!
//! Nodes: ( 2 )
//! 0 10.0 20.0 1 1 -1 RT_NODE 2500.0
//! 1 30.0 20.0 1 1 -1 RT_NODE 500.0
//!
//! Edges: ( 1 )
//! 0 0 1 20.0 0.0667 17.25 -1 -1 E_RT
//! ```
//!
//! Reals are written with Rust's shortest round-trip formatting, so reading
//! a written file gives back exactly the same values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path as FsPath;
use std::str::FromStr;

use thiserror::Error;

use crate::amount::Amount;
use crate::graph::{GraphError, SubstrateNetwork, VirtualNetwork};

/// Propagation speed used for the informational delay column, in distance
/// units per delay unit.
const SIGNAL_SPEED: f64 = 299.792458;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopoNode {
    pub x: f64,
    pub y: f64,
    pub cpu: Amount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopoEdge {
    pub from: usize,
    pub to: usize,
    pub bw: Amount,
}

/// A placed graph as stored on disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Topology {
    pub nodes: Vec<TopoNode>,
    pub edges: Vec<TopoEdge>,
}

/// Request timing carried in a file's comment headers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BriteMeta {
    pub arrival: Option<f64>,
    pub lifetime: Option<f64>,
}

#[derive(Debug, Error)]
pub enum BriteError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_err(line: usize, msg: impl Into<String>) -> BriteError {
    BriteError::Parse { line, msg: msg.into() }
}

impl Topology {
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (&self.nodes[a], &self.nodes[b]);
        (p.x - q.x).hypot(p.y - q.y)
    }

    fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.from] += 1;
            deg[e.to] += 1;
        }
        deg
    }

    pub fn to_substrate(&self) -> Result<SubstrateNetwork, GraphError> {
        let cpu: Vec<Amount> = self.nodes.iter().map(|n| n.cpu).collect();
        let links: Vec<_> = self.edges.iter().map(|e| (e.from, e.to, e.bw)).collect();
        SubstrateNetwork::from_parts(&cpu, &links)
    }

    pub fn to_virtual(&self) -> Result<VirtualNetwork, GraphError> {
        let cpu: Vec<Amount> = self.nodes.iter().map(|n| n.cpu).collect();
        let links: Vec<_> = self.edges.iter().map(|e| (e.from, e.to, e.bw)).collect();
        VirtualNetwork::new(&cpu, &links)
    }

    /// Capacities of `sn` with every node at the origin.
    pub fn from_substrate(sn: &SubstrateNetwork) -> Topology {
        Topology {
            nodes: sn.nodes().iter().map(|n| TopoNode { x: 0.0, y: 0.0, cpu: n.cpu_capacity }).collect(),
            edges: sn
                .links()
                .iter()
                .map(|l| TopoEdge { from: l.ends.0, to: l.ends.1, bw: l.bw_capacity })
                .collect(),
        }
    }

    pub fn from_virtual(vn: &VirtualNetwork) -> Topology {
        Topology {
            nodes: vn.nodes().iter().map(|n| TopoNode { x: 0.0, y: 0.0, cpu: n.cpu_demand }).collect(),
            edges: vn
                .links()
                .iter()
                .map(|l| TopoEdge { from: l.ends.0, to: l.ends.1, bw: l.bw_demand })
                .collect(),
        }
    }
}

pub fn to_brite_string(topo: &Topology, meta: &BriteMeta) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Topology: ( {} Nodes, {} Edges )", topo.nodes.len(), topo.edges.len());
    if let Some(a) = meta.arrival {
        let _ = writeln!(s, "# arrival {a:?}");
    }
    if let Some(l) = meta.lifetime {
        let _ = writeln!(s, "# lifetime {l:?}");
    }
    let deg = topo.degrees();
    let _ = writeln!(s, "\nNodes: ( {} )", topo.nodes.len());
    for (i, n) in topo.nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {:?} {:?} {} {} -1 RT_NODE {:?}", n.x, n.y, deg[i], deg[i], n.cpu);
    }
    let _ = writeln!(s, "\nEdges: ( {} )", topo.edges.len());
    for (i, e) in topo.edges.iter().enumerate() {
        let len = topo.distance(e.from, e.to);
        let _ = writeln!(
            s,
            "{i} {} {} {len:?} {:?} {:?} -1 -1 E_RT",
            e.from,
            e.to,
            len / SIGNAL_SPEED,
            e.bw
        );
    }
    s
}

/// Parses `( <n> )` or `( <n> Nodes, <m> Edges )` style counts.
fn counts(rest: &str, line: usize) -> Result<Vec<usize>, BriteError> {
    rest.split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| parse_err(line, format!("bad count {t:?}"))))
        .collect()
}

fn field<T: FromStr>(fields: &[&str], i: usize, what: &str, line: usize) -> Result<T, BriteError> {
    let raw = fields.get(i).ok_or_else(|| parse_err(line, format!("missing {what} field")))?;
    raw.parse().map_err(|_| parse_err(line, format!("bad {what} {raw:?}")))
}

fn amount(fields: &[&str], i: usize, what: &str, line: usize) -> Result<Amount, BriteError> {
    let v: f64 = field(fields, i, what, line)?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} is not finite")));
    }
    Ok(Amount::from_f64(v))
}

pub fn parse_brite(text: &str) -> Result<(Topology, BriteMeta), BriteError> {
    enum Section {
        Header,
        Nodes,
        Edges,
    }
    let mut meta = BriteMeta::default();
    let mut declared: Option<(usize, usize)> = None;
    let mut nodes: Vec<Option<TopoNode>> = Vec::new();
    let mut edges: Vec<Option<TopoEdge>> = Vec::new();
    let mut section = Section::Header;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("arrival"), Some(v), None) => {
                    meta.arrival = Some(v.parse().map_err(|_| parse_err(line, format!("bad arrival {v:?}")))?)
                }
                (Some("lifetime"), Some(v), None) => {
                    meta.lifetime = Some(v.parse().map_err(|_| parse_err(line, format!("bad lifetime {v:?}")))?)
                }
                _ => {}
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("Topology:") {
            match counts(rest, line)?[..] {
                [n, m] => declared = Some((n, m)),
                _ => return Err(parse_err(line, "expected node and edge counts")),
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("Nodes:") {
            let n = match counts(rest, line)?[..] {
                [n] => n,
                _ => return Err(parse_err(line, "expected a node count")),
            };
            nodes = vec![None; n];
            section = Section::Nodes;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("Edges:") {
            let m = match counts(rest, line)?[..] {
                [m] => m,
                _ => return Err(parse_err(line, "expected an edge count")),
            };
            edges = vec![None; m];
            section = Section::Edges;
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match section {
            Section::Header => {
                if declared.is_none() {
                    return Err(parse_err(line, "expected a Topology header"));
                }
                // other BRITE header lines (Model ...) are ignored
            }
            Section::Nodes => {
                let id: usize = field(&fields, 0, "node id", line)?;
                let x: f64 = field(&fields, 1, "x", line)?;
                let y: f64 = field(&fields, 2, "y", line)?;
                if fields.len() < 8 {
                    return Err(parse_err(line, "missing cpu field"));
                }
                let cpu = amount(&fields, 7, "cpu", line)?;
                let slot = nodes
                    .get_mut(id)
                    .ok_or_else(|| parse_err(line, format!("node id {id} out of range")))?;
                if slot.is_some() {
                    return Err(parse_err(line, format!("duplicate node id {id}")));
                }
                *slot = Some(TopoNode { x, y, cpu });
            }
            Section::Edges => {
                let id: usize = field(&fields, 0, "edge id", line)?;
                let from: usize = field(&fields, 1, "from", line)?;
                let to: usize = field(&fields, 2, "to", line)?;
                let _length: f64 = field(&fields, 3, "length", line)?;
                let _delay: f64 = field(&fields, 4, "delay", line)?;
                let bw = amount(&fields, 5, "bandwidth", line)?;
                if from >= nodes.len() || to >= nodes.len() {
                    return Err(parse_err(line, format!("edge {id} names an unknown node")));
                }
                let slot = edges
                    .get_mut(id)
                    .ok_or_else(|| parse_err(line, format!("edge id {id} out of range")))?;
                if slot.is_some() {
                    return Err(parse_err(line, format!("duplicate edge id {id}")));
                }
                *slot = Some(TopoEdge { from, to, bw });
            }
        }
    }

    let last = text.lines().count();
    let (n, m) = declared.ok_or_else(|| parse_err(1, "missing Topology header"))?;
    if n != nodes.len() || m != edges.len() {
        return Err(parse_err(last, "section sizes disagree with the Topology header"));
    }
    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(i, n)| n.ok_or_else(|| parse_err(last, format!("node {i} missing"))))
        .collect::<Result<_, _>>()?;
    let edges = edges
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.ok_or_else(|| parse_err(last, format!("edge {i} missing"))))
        .collect::<Result<_, _>>()?;
    Ok((Topology { nodes, edges }, meta))
}

pub fn write_brite(topo: &Topology, meta: &BriteMeta, path: &FsPath) -> Result<(), BriteError> {
    fs::write(path, to_brite_string(topo, meta)).map_err(|source| BriteError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_brite(path: &FsPath) -> Result<(Topology, BriteMeta), BriteError> {
    let text = fs::read_to_string(path).map_err(|source| BriteError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_brite(&text)
}

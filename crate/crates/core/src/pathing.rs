//! Candidate path enumeration for the link-path routing model.
//!
//! Paths start at a base station and end at an OEN or at the EEN. An OEN is
//! a terminal: a path may only continue past it with the single final hop
//! OEN -> EEN, which makes that OEN the anchoring node of the path. The EEN is
//! never an intermediate node.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{Latency, LinkId, NodeId, NodeKind, PathId, Scenario, Topology};

pub const DEFAULT_CUTOFF: u32 = 6;
pub const DEFAULT_MAX_PATHS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub id: PathId,
    pub source: NodeId,
    pub destination: NodeId,
    pub links: Vec<LinkId>,
    pub hop_count: u32,
    pub total_latency: Latency,
    /// Set iff the destination is the EEN and the penultimate node is an OEN.
    pub last_hop_oen: Option<NodeId>,
}

impl Path {
    /// Path-link incidence, 1 iff `link` is on the path.
    pub fn incidence(&self, link: LinkId) -> u8 {
        u8::from(self.links.contains(&link))
    }
}

/// Sum of link latencies along `links`.
pub fn path_latency(topology: &Topology, links: &[LinkId]) -> Latency {
    links.iter().map(|&l| topology.links[l.index()].latency).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path enumeration exceeded {limit} paths at cutoff {cutoff}; lower the cutoff")]
    TooManyPaths { limit: usize, cutoff: u32 },
}

/// All enumerated paths, grouped by `(source, destination)`.
///
/// Path ids are positions in `paths()`. Groups are laid out in ascending
/// `(source, destination)` order and, within a group, by hop count then by
/// link-id sequence.
#[derive(Debug, Clone, Default)]
pub struct PathSet {
    paths: Vec<Path>,
    groups: BTreeMap<(NodeId, NodeId), Vec<PathId>>,
}

impl PathSet {
    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn get(&self, id: PathId) -> Option<&Path> {
        self.paths.get(id.index())
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn group(&self, source: NodeId, destination: NodeId) -> &[PathId] {
        self.groups
            .get(&(source, destination))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn groups(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &Vec<PathId>)> {
        self.groups.iter()
    }

    /// One line per path: `src dst hops latency link-ids`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.paths {
            let links: Vec<String> = p.links.iter().map(|l| l.to_string()).collect();
            writeln!(
                out,
                "{} {} {} {} {}",
                p.source,
                p.destination,
                p.hop_count,
                p.total_latency,
                links.join(",")
            )
            .unwrap();
        }
        out
    }
}

/// Enumerates every simple BS->OEN and BS->EEN path of at most `cutoff` hops.
pub fn enumerate_paths(topology: &Topology, cutoff: u32) -> Result<PathSet, PathError> {
    enumerate_paths_capped(topology, cutoff, DEFAULT_MAX_PATHS)
}

pub fn enumerate_paths_capped(topology: &Topology, cutoff: u32, max_paths: usize) -> Result<PathSet, PathError> {
    let adjacency = topology.adjacency();
    let counter = AtomicUsize::new(0);
    let sources = topology.base_stations();

    let per_source: Vec<Option<Vec<RawPath>>> = sources
        .par_iter()
        .map(|&bs| {
            let mut walker = Walker {
                topology,
                adjacency: &adjacency,
                cutoff,
                max_paths,
                counter: &counter,
                visited: vec![false; topology.nodes.len()],
                links: Vec::new(),
                found: Vec::new(),
                overflow: false,
            };
            walker.visited[bs.index()] = true;
            walker.extend(bs, bs);
            (!walker.overflow).then_some(walker.found)
        })
        .collect();

    let mut grouped: BTreeMap<(NodeId, NodeId), Vec<RawPath>> = BTreeMap::new();
    for found in per_source {
        let Some(found) = found else {
            return Err(PathError::TooManyPaths {
                limit: max_paths,
                cutoff,
            });
        };
        for raw in found {
            grouped.entry((raw.source, raw.destination)).or_default().push(raw);
        }
    }

    let mut set = PathSet::default();
    for (key, mut raws) in grouped {
        raws.sort_by(|a, b| (a.links.len(), &a.links).cmp(&(b.links.len(), &b.links)));
        let ids = raws
            .into_iter()
            .map(|raw| {
                let id = PathId(set.paths.len() as u32);
                set.paths.push(Path {
                    id,
                    source: raw.source,
                    destination: raw.destination,
                    hop_count: raw.links.len() as u32,
                    total_latency: path_latency(topology, &raw.links),
                    links: raw.links,
                    last_hop_oen: raw.last_hop_oen,
                });
                id
            })
            .collect();
        set.groups.insert(key, ids);
    }
    Ok(set)
}

struct RawPath {
    source: NodeId,
    destination: NodeId,
    links: Vec<LinkId>,
    last_hop_oen: Option<NodeId>,
}

struct Walker<'a> {
    topology: &'a Topology,
    adjacency: &'a [Vec<LinkId>],
    cutoff: u32,
    max_paths: usize,
    counter: &'a AtomicUsize,
    visited: Vec<bool>,
    links: Vec<LinkId>,
    found: Vec<RawPath>,
    overflow: bool,
}

impl Walker<'_> {
    fn record(&mut self, source: NodeId, destination: NodeId, last_hop_oen: Option<NodeId>) {
        if self.counter.fetch_add(1, Ordering::Relaxed) >= self.max_paths {
            self.overflow = true;
            return;
        }
        self.found.push(RawPath {
            source,
            destination,
            links: self.links.clone(),
            last_hop_oen,
        });
    }

    fn extend(&mut self, source: NodeId, at: NodeId) {
        if self.overflow || self.links.len() as u32 >= self.cutoff {
            return;
        }
        for &lid in &self.adjacency[at.index()] {
            let next = self.topology.links[lid.index()].dst;
            if self.visited[next.index()] {
                continue;
            }
            self.links.push(lid);
            match self.topology.nodes[next.index()].kind {
                NodeKind::Oen => {
                    self.record(source, next, None);
                    if (self.links.len() as u32) < self.cutoff {
                        for &out in &self.adjacency[next.index()] {
                            let een = self.topology.links[out.index()].dst;
                            if self.topology.nodes[een.index()].kind == NodeKind::Een && !self.visited[een.index()] {
                                self.links.push(out);
                                self.record(source, een, Some(next));
                                self.links.pop();
                            }
                        }
                    }
                }
                NodeKind::Een => self.record(source, next, None),
                NodeKind::Bs | NodeKind::Switch => {
                    self.visited[next.index()] = true;
                    self.extend(source, next);
                    self.visited[next.index()] = false;
                }
            }
            self.links.pop();
            if self.overflow {
                return;
            }
        }
    }
}

/// Latency-feasible candidate paths per demand, in path-set order.
///
/// `place[d][e]` lists paths from demand `d`'s BS to OEN `e`;
/// `offload[d][e]` lists EEN paths whose last hop leaves OEN `e`.
#[derive(Debug, Clone)]
pub struct Candidates {
    pub place: Vec<Vec<Vec<PathId>>>,
    pub offload: Vec<Vec<Vec<PathId>>>,
}

impl Candidates {
    pub fn new(scenario: &Scenario, paths: &PathSet) -> Self {
        let een = scenario.een();
        let lookup = scenario.oen_lookup();
        let mut place = Vec::with_capacity(scenario.demands.len());
        let mut offload = Vec::with_capacity(scenario.demands.len());
        for d in &scenario.demands {
            let fits = |id: &&PathId| paths.paths[id.index()].total_latency <= d.delay_budget;
            let per_oen: Vec<Vec<PathId>> = scenario
                .oens
                .iter()
                .map(|o| paths.group(d.bs, o.node).iter().filter(fits).copied().collect())
                .collect();
            let mut via = vec![Vec::new(); scenario.oens.len()];
            for id in paths.group(d.bs, een).iter().filter(fits) {
                if let Some(e) = paths.paths[id.index()].last_hop_oen.and_then(|n| lookup.get(&n)) {
                    via[*e].push(*id);
                }
            }
            place.push(per_oen);
            offload.push(via);
        }
        Candidates { place, offload }
    }
}

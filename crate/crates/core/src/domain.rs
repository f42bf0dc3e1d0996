//! Value types shared by every other module: topology, edge nodes, edge
//! application catalog, demands, UPF scaling policy, scenarios and solutions.
//!
//! Units are fixed across the crate: CPU in mCPU, bandwidth in Mbps, storage
//! in GB, latency in tenths of a millisecond and money in integer profit
//! units. Everything is integral so the model builder and the checker agree
//! exactly.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version written into every scenario and solution file.
pub const FORMAT_VERSION: u32 = 1;

/// Where each symbol of the mathematical model lives in this crate.
pub const NOTATION: &[(&str, &str)] = &[
    ("j", "NodeId (kind Bs) / Demand::bs"),
    ("i", "EaType::id / Demand::ea"),
    ("l", "Demand::index"),
    ("e", "Scenario::oens position"),
    ("e*", "NodeKind::Een"),
    ("k", "NodeKind::Switch"),
    ("v", "Link / LinkId"),
    ("n", "Path / PathId"),
    ("r", "UpfScalePolicy replica count"),
    ("U_{j,i,l}", "Demand::utility"),
    ("C_{j,i,l}", "Demand::offload_cost"),
    ("C_e", "Oen::on_cost"),
    ("P_e", "Oen::cpu_capacity"),
    ("p_i", "EaType::idle_cpu"),
    ("p_{j,i,l}", "Demand::cpu_req"),
    ("p_r", "UpfScalePolicy::cpu_per_replicas"),
    ("S_e", "Oen::storage_capacity"),
    ("s_i", "EaType::storage_req"),
    ("B_v", "Link::bandwidth_mbps"),
    ("B_r", "UpfScalePolicy::bw_per_replicas"),
    ("b_{j,i,l}", "Demand::bw_req"),
    ("t_{j,i,l}", "Demand::delay_budget"),
    ("t^v", "Link::latency"),
    ("z_e", "Solution::oen_on"),
    ("d_{j,i,l,e}", "Solution::disposition (Placed)"),
    ("T_{j,i,l}", "Solution::disposition (Offloaded)"),
    ("F_{j,i,l}", "Solution::disposition (Rejected)"),
    ("x_{i,e}", "Solution::ea_deployed"),
    ("w_{r,e}", "Solution::upf_scale"),
    ("w_{j,i,l,e}", "Solution::anchor"),
    ("theta^n_{j,i,l}", "Solution::route"),
    ("delta^{n,v}_{j,i,l}", "Path::links (incidence of the routed path)"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EaId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PathId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Latency in tenths of a millisecond.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Latency(pub u32);

impl Latency {
    pub const ZERO: Latency = Latency(0);

    pub fn from_ms(ms: u32) -> Self {
        Latency(ms * 10)
    }

    pub fn from_tenths(tenths: u32) -> Self {
        Latency(tenths)
    }

    pub fn tenths(self) -> u32 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl std::ops::Add for Latency {
    type Output = Latency;
    fn add(self, rhs: Latency) -> Latency {
        Latency(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Latency {
    fn sum<I: Iterator<Item = Latency>>(iter: I) -> Latency {
        iter.fold(Latency::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Bs,
    Switch,
    Oen,
    Een,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    pub bandwidth_mbps: u64,
    #[serde(rename = "latency_tenth_ms")]
    pub latency: Latency,
}

/// Directed graph of base stations, switches, OENs and the single EEN.
///
/// Node and link ids are dense: `nodes[k].id == NodeId(k)` and likewise for
/// links. [`validate_topology`] reports any mismatch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

impl Topology {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index()).filter(|n| n.id == id)
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.links.get(id.index()).filter(|l| l.id == id)
    }

    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        self.node(id).map(|n| n.kind)
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(move |n| n.kind == kind).map(|n| n.id)
    }

    pub fn base_stations(&self) -> Vec<NodeId> {
        self.nodes_of_kind(NodeKind::Bs).collect()
    }

    /// The first EEN node, if any.
    pub fn een(&self) -> Option<NodeId> {
        self.nodes_of_kind(NodeKind::Een).next()
    }

    /// Outgoing links per node, each list sorted by link id.
    pub fn adjacency(&self) -> Vec<Vec<LinkId>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for link in &self.links {
            if let Some(slot) = out.get_mut(link.src.index()) {
                slot.push(link.id);
            }
        }
        for list in &mut out {
            list.sort();
        }
        out
    }

    /// Adds `a -> b` and `b -> a` with identical attributes.
    pub fn add_bidirectional(&mut self, a: NodeId, b: NodeId, bandwidth_mbps: u64, latency: Latency) {
        for (src, dst) in [(a, b), (b, a)] {
            let id = LinkId(self.links.len() as u32);
            self.links.push(Link {
                id,
                src,
                dst,
                bandwidth_mbps,
                latency,
            });
        }
    }

    pub fn add_node(&mut self, kind: NodeKind, name: impl Into<String>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            kind,
            name: Some(name.into()),
        });
        id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("node at position {position} has id {id} (ids must be dense)")]
    NodeIdMismatch { position: usize, id: NodeId },
    #[error("link at position {position} has id {id} (ids must be dense)")]
    LinkIdMismatch { position: usize, id: LinkId },
    #[error("multiple EEN nodes ({count})")]
    MultipleEen { count: usize },
    #[error("missing EEN node")]
    MissingEen,
    #[error("link {link} references unknown node {node}")]
    UnknownEndpoint { link: LinkId, node: NodeId },
    #[error("link {link} is a self loop")]
    SelfLoop { link: LinkId },
    #[error("non-positive latency on link {link}")]
    NonPositiveLatency { link: LinkId },
    #[error("non-positive bandwidth on link {link}")]
    NonPositiveBandwidth { link: LinkId },
}

/// Structural check of a topology. An empty list means the topology is valid.
pub fn validate_topology(topology: &Topology) -> Vec<TopologyError> {
    let mut errors = Vec::new();
    for (position, node) in topology.nodes.iter().enumerate() {
        if node.id.index() != position {
            errors.push(TopologyError::NodeIdMismatch { position, id: node.id });
        }
    }
    let eens = topology.nodes.iter().filter(|n| n.kind == NodeKind::Een).count();
    match eens {
        0 => errors.push(TopologyError::MissingEen),
        1 => {}
        count => errors.push(TopologyError::MultipleEen { count }),
    }
    for (position, link) in topology.links.iter().enumerate() {
        if link.id.index() != position {
            errors.push(TopologyError::LinkIdMismatch { position, id: link.id });
        }
        for node in [link.src, link.dst] {
            if topology.node(node).is_none() {
                errors.push(TopologyError::UnknownEndpoint { link: link.id, node });
            }
        }
        if link.src == link.dst {
            errors.push(TopologyError::SelfLoop { link: link.id });
        }
        if link.latency.tenths() == 0 {
            errors.push(TopologyError::NonPositiveLatency { link: link.id });
        }
        if link.bandwidth_mbps == 0 {
            errors.push(TopologyError::NonPositiveBandwidth { link: link.id });
        }
    }
    errors
}

/// Operator edge node resources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Oen {
    pub node: NodeId,
    pub cpu_capacity: u64,
    pub storage_capacity: u64,
    pub on_cost: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EaType {
    pub id: EaId,
    pub idle_cpu: u64,
    pub storage_req: u64,
}

/// A PDU-session request, keyed by `(bs, ea, index)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub bs: NodeId,
    pub ea: EaId,
    pub index: u32,
    pub cpu_req: u64,
    pub bw_req: u64,
    #[serde(rename = "delay_budget_tenth_ms")]
    pub delay_budget: Latency,
    pub utility: i64,
    pub offload_cost: i64,
}

impl Demand {
    /// Profit of serving the demand on the EEN, `U - C`.
    pub fn offload_margin(&self) -> i64 {
        self.utility - self.offload_cost
    }

    /// Returns true when both demands are interchangeable: same origin, type
    /// and every numeric attribute equal.
    pub fn same_attributes(&self, other: &Demand) -> bool {
        self.bs == other.bs
            && self.ea == other.ea
            && self.cpu_req == other.cpu_req
            && self.bw_req == other.bw_req
            && self.delay_budget == other.delay_budget
            && self.utility == other.utility
            && self.offload_cost == other.offload_cost
    }
}

/// CPU and processing bandwidth of a UPF cluster per replica count.
///
/// `cpu_per_replicas[r - 1]` is the CPU reserved by a cluster of `r`
/// replicas; scale 0 means no cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpfScalePolicy {
    pub max_replicas: u32,
    pub cpu_per_replicas: Vec<u64>,
    pub bw_per_replicas: Vec<u64>,
}

impl Default for UpfScalePolicy {
    fn default() -> Self {
        UpfScalePolicy::linear(8, 2000, 1000)
    }
}

impl UpfScalePolicy {
    pub fn linear(max_replicas: u32, cpu_per_replica: u64, bw_per_replica: u64) -> Self {
        let r = 1..=u64::from(max_replicas);
        UpfScalePolicy {
            max_replicas,
            cpu_per_replicas: r.clone().map(|r| r * cpu_per_replica).collect(),
            bw_per_replicas: r.map(|r| r * bw_per_replica).collect(),
        }
    }

    /// CPU reserved at `scale` replicas (0 when no cluster).
    pub fn cpu(&self, scale: u32) -> u64 {
        if scale == 0 {
            0
        } else {
            self.cpu_per_replicas[scale as usize - 1]
        }
    }

    /// Processing bandwidth at `scale` replicas (0 when no cluster).
    pub fn bw(&self, scale: u32) -> u64 {
        if scale == 0 {
            0
        } else {
            self.bw_per_replicas[scale as usize - 1]
        }
    }

    /// Smallest scale whose bandwidth covers `bw`; 0 for zero bandwidth and
    /// `None` when even the largest cluster is too small.
    pub fn min_scale_for(&self, bw: u64) -> Option<u32> {
        if bw == 0 {
            return Some(0);
        }
        self.bw_per_replicas
            .iter()
            .position(|&cap| cap >= bw)
            .map(|p| p as u32 + 1)
    }

    pub fn validate(&self) -> Result<(), String> {
        let r = self.max_replicas as usize;
        if r == 0 {
            return Err("upf policy needs at least one replica".into());
        }
        if self.cpu_per_replicas.len() != r || self.bw_per_replicas.len() != r {
            return Err(format!("upf policy tables must have exactly {r} entries"));
        }
        let increasing = |v: &[u64]| v[0] > 0 && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.cpu_per_replicas) || !increasing(&self.bw_per_replicas) {
            return Err("upf policy tables must be positive and strictly increasing".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Everything an algorithm needs to solve one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub format_version: u32,
    pub topology: Topology,
    pub oens: Vec<Oen>,
    pub ea_catalog: Vec<EaType>,
    #[serde(default)]
    pub upf_policy: UpfScalePolicy,
    pub demands: Vec<Demand>,
    pub path_cutoff: u32,
}

impl Scenario {
    /// Checks every structural invariant and reports the first one broken.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(err) = validate_topology(&self.topology).into_iter().next() {
            return Err(err.to_string());
        }
        self.upf_policy.validate()?;
        let oen_nodes: Vec<NodeId> = self.topology.nodes_of_kind(NodeKind::Oen).collect();
        let mut seen = HashSet::new();
        for oen in &self.oens {
            if self.topology.kind(oen.node) != Some(NodeKind::Oen) {
                return Err(format!("oen record references non-OEN node {}", oen.node));
            }
            if !seen.insert(oen.node) {
                return Err(format!("duplicate oen record for node {}", oen.node));
            }
            if oen.cpu_capacity == 0 || oen.storage_capacity == 0 || oen.on_cost <= 0 {
                return Err(format!("oen {} has a non-positive attribute", oen.node));
            }
        }
        if let Some(missing) = oen_nodes.iter().find(|n| !seen.contains(n)) {
            return Err(format!("OEN node {missing} has no oen record"));
        }
        let mut ea_ids = HashSet::new();
        for ea in &self.ea_catalog {
            if !ea_ids.insert(ea.id) {
                return Err(format!("duplicate EA type {}", ea.id));
            }
        }
        let mut keys = HashSet::new();
        for (pos, d) in self.demands.iter().enumerate() {
            if self.topology.kind(d.bs) != Some(NodeKind::Bs) {
                return Err(format!("demand {pos} originates at non-BS node {}", d.bs));
            }
            if !ea_ids.contains(&d.ea) {
                return Err(format!("demand {pos} references unknown EA type {}", d.ea));
            }
            if d.cpu_req == 0 || d.bw_req == 0 || d.delay_budget.tenths() == 0 {
                return Err(format!("demand {pos} has a non-positive requirement"));
            }
            if d.utility < 0 || d.offload_cost < 0 {
                return Err(format!("demand {pos} has a negative utility or cost"));
            }
            if !keys.insert((d.bs, d.ea, d.index)) {
                return Err(format!(
                    "demand {pos} duplicates key (bs {}, ea {}, index {})",
                    d.bs, d.ea, d.index
                ));
            }
        }
        Ok(())
    }

    pub fn een(&self) -> NodeId {
        self.topology.een().expect("validated scenario has an EEN")
    }

    pub fn oen_index(&self, node: NodeId) -> Option<usize> {
        self.oens.iter().position(|o| o.node == node)
    }

    /// Map from OEN node to its position in `oens`.
    pub fn oen_lookup(&self) -> HashMap<NodeId, usize> {
        self.oens.iter().enumerate().map(|(e, o)| (o.node, e)).collect()
    }

    pub fn ea(&self, id: EaId) -> Option<&EaType> {
        self.ea_catalog.iter().find(|ea| ea.id == id)
    }

    pub fn ea_index(&self, id: EaId) -> Option<usize> {
        self.ea_catalog.iter().position(|ea| ea.id == id)
    }

    pub fn total_cpu_capacity(&self) -> u64 {
        self.oens.iter().map(|o| o.cpu_capacity).sum()
    }

    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        check_version(scenario.format_version)?;
        scenario.validate().map_err(FormatError::Invalid)?;
        Ok(scenario)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// A topology with its OEN parameters, as stored in the preset files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub format_version: u32,
    pub topology: Topology,
    pub oens: Vec<Oen>,
}

impl TopologyFile {
    pub fn new(topology: Topology, oens: Vec<Oen>) -> Self {
        TopologyFile {
            format_version: FORMAT_VERSION,
            topology,
            oens,
        }
    }

    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let file: TopologyFile = serde_json::from_str(text)?;
        check_version(file.format_version)?;
        let probe = Scenario {
            format_version: FORMAT_VERSION,
            topology: file.topology.clone(),
            oens: file.oens.clone(),
            ea_catalog: Vec::new(),
            upf_policy: UpfScalePolicy::default(),
            demands: Vec::new(),
            path_cutoff: 1,
        };
        probe.validate().map_err(FormatError::Invalid)?;
        Ok(file)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    Rejected,
    Offloaded,
    /// Served on the OEN at this position of `Scenario::oens`.
    Placed(usize),
}

/// A complete assignment. All per-OEN vectors are indexed by position in
/// `Scenario::oens`, all per-demand vectors by position in
/// `Scenario::demands`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub format_version: u32,
    pub oen_on: Vec<bool>,
    pub upf_scale: Vec<u32>,
    pub ea_deployed: Vec<BTreeSet<EaId>>,
    pub disposition: Vec<Disposition>,
    pub anchor: Vec<Option<usize>>,
    pub route: Vec<Option<PathId>>,
}

impl Solution {
    /// Everything off, every demand rejected.
    pub fn all_rejected(scenario: &Scenario) -> Self {
        let e = scenario.oens.len();
        let d = scenario.demands.len();
        Solution {
            format_version: FORMAT_VERSION,
            oen_on: vec![false; e],
            upf_scale: vec![0; e],
            ea_deployed: vec![BTreeSet::new(); e],
            disposition: vec![Disposition::Rejected; d],
            anchor: vec![None; d],
            route: vec![None; d],
        }
    }

    pub fn placed_count(&self) -> usize {
        self.disposition
            .iter()
            .filter(|d| matches!(d, Disposition::Placed(_)))
            .count()
    }

    pub fn offloaded_count(&self) -> usize {
        self.disposition
            .iter()
            .filter(|d| **d == Disposition::Offloaded)
            .count()
    }

    pub fn rejected_count(&self) -> usize {
        self.disposition.iter().filter(|d| **d == Disposition::Rejected).count()
    }

    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let solution: Solution = serde_json::from_str(text)?;
        check_version(solution.format_version)?;
        Ok(solution)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn check_version(found: u32) -> Result<(), FormatError> {
    if found == FORMAT_VERSION {
        Ok(())
    } else {
        Err(FormatError::Version {
            found,
            expected: FORMAT_VERSION,
        })
    }
}

fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("domain values always serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Topology {
        let mut t = Topology::default();
        let bs = t.add_node(NodeKind::Bs, "bs0");
        let sw = t.add_node(NodeKind::Switch, "sw0");
        let oen = t.add_node(NodeKind::Oen, "oen0");
        let een = t.add_node(NodeKind::Een, "een");
        t.add_bidirectional(bs, sw, 10_000, Latency::from_ms(1));
        t.add_bidirectional(sw, oen, 10_000, Latency::from_ms(1));
        t.add_bidirectional(oen, een, 10_000, Latency::from_tenths(15));
        t
    }

    #[test]
    fn valid_topology_has_no_errors() {
        assert!(validate_topology(&tiny()).is_empty());
    }

    #[test]
    fn second_een_is_reported() {
        let mut t = tiny();
        t.add_node(NodeKind::Een, "een2");
        let errs = validate_topology(&t);
        assert_eq!(errs, vec![TopologyError::MultipleEen { count: 2 }]);
        assert!(errs[0].to_string().contains("multiple EEN"));
    }

    #[test]
    fn zero_latency_is_reported() {
        let mut t = tiny();
        t.links[2].latency = Latency::ZERO;
        let errs = validate_topology(&t);
        assert_eq!(errs, vec![TopologyError::NonPositiveLatency { link: LinkId(2) }]);
        assert!(errs[0].to_string().contains("non-positive latency"));
    }

    #[test]
    fn self_loops_and_dangling_endpoints() {
        let mut t = tiny();
        t.links.push(Link {
            id: LinkId(6),
            src: NodeId(1),
            dst: NodeId(1),
            bandwidth_mbps: 1,
            latency: Latency(1),
        });
        t.links.push(Link {
            id: LinkId(7),
            src: NodeId(1),
            dst: NodeId(42),
            bandwidth_mbps: 1,
            latency: Latency(1),
        });
        let errs = validate_topology(&t);
        assert!(errs.contains(&TopologyError::SelfLoop { link: LinkId(6) }));
        assert!(errs.contains(&TopologyError::UnknownEndpoint {
            link: LinkId(7),
            node: NodeId(42)
        }));
    }

    #[test]
    fn upf_policy_default_is_linear() {
        let p = UpfScalePolicy::default();
        assert_eq!(p.max_replicas, 8);
        assert_eq!(p.cpu(0), 0);
        assert_eq!(p.cpu(3), 6000);
        assert_eq!(p.bw(8), 8000);
        assert_eq!(p.min_scale_for(0), Some(0));
        assert_eq!(p.min_scale_for(1000), Some(1));
        assert_eq!(p.min_scale_for(1001), Some(2));
        assert_eq!(p.min_scale_for(8001), None);
        assert!(p.validate().is_ok());
        let bad = UpfScalePolicy {
            max_replicas: 2,
            cpu_per_replicas: vec![10, 10],
            bw_per_replicas: vec![1, 2],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn latency_display() {
        assert_eq!(Latency::from_tenths(45).to_string(), "4.5");
        assert_eq!(Latency::from_ms(3).as_ms(), 3.0);
    }

    #[test]
    fn notation_table_has_unique_homes() {
        let symbols: HashSet<_> = NOTATION.iter().map(|(s, _)| *s).collect();
        assert_eq!(symbols.len(), NOTATION.len());
        let homes: HashSet<_> = NOTATION.iter().map(|(_, h)| *h).collect();
        assert_eq!(homes.len(), NOTATION.len());
        for required in ["z_e", "w_{r,e}", "x_{i,e}", "theta^n_{j,i,l}", "B_r", "p_r"] {
            assert!(symbols.contains(required), "{required}");
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = r#"{"format_version":2,"oen_on":[],"upf_scale":[],"ea_deployed":[],"disposition":[],"anchor":[],"route":[]}"#;
        assert!(matches!(
            Solution::from_json(text),
            Err(FormatError::Version { found: 2, .. })
        ));
    }
}

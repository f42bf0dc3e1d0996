//! Evaluation inputs: preset topologies and seeded random demand sets.
//!
//! Randomness comes from ChaCha8 keyed by the 64-bit seed. Each demand
//! attribute draws from its own ChaCha stream (stream ids in
//! [`Stream`]), so adding an attribute never perturbs the draws of the
//! existing ones.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    Demand, EaId, EaType, Latency, NodeId, NodeKind, Oen, Scenario, Topology, UpfScalePolicy, FORMAT_VERSION,
};
use crate::pathing::DEFAULT_CUTOFF;

pub const OEN_CPU: u64 = 32_000;
pub const OEN_STORAGE: u64 = 250;
pub const OEN_ON_COST: i64 = 200;
pub const LINK_BANDWIDTH: u64 = 10_000;
pub const TRANSPORT_LATENCY: Latency = Latency(10);
pub const EEN_LATENCY: Latency = Latency(15);
pub const EA_IDLE_CPU: u64 = 500;
pub const EA_STORAGE: u64 = 10;

pub const LOAD_LEVELS: [u32; 6] = [30, 60, 100, 150, 200, 300];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PresetSize {
    Small,
    Medium,
    Large,
}

impl PresetSize {
    pub const ALL: [PresetSize; 3] = [PresetSize::Small, PresetSize::Medium, PresetSize::Large];

    /// `(base stations, switches, OENs)`.
    pub fn counts(self) -> (usize, usize, usize) {
        match self {
            PresetSize::Small => (4, 6, 2),
            PresetSize::Medium => (8, 8, 4),
            PresetSize::Large => (12, 10, 6),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PresetSize::Small => "small",
            PresetSize::Medium => "medium",
            PresetSize::Large => "large",
        }
    }
}

impl fmt::Display for PresetSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "small" => Ok(PresetSize::Small),
            "medium" => Ok(PresetSize::Medium),
            "large" => Ok(PresetSize::Large),
            other => Err(format!("unknown topology preset '{other}' (small|medium|large)")),
        }
    }
}

/// Builds a preset: switches on a ring, base station `b` on switch
/// `b mod K`, OEN `e` on switch `floor(e * K / E)`, every OEN linked to the
/// EEN. All links are bidirectional.
pub fn make_preset_topology(size: PresetSize) -> (Topology, Vec<Oen>) {
    let (n_bs, n_sw, n_oen) = size.counts();
    let mut t = Topology::default();
    let bs: Vec<NodeId> = (0..n_bs).map(|k| t.add_node(NodeKind::Bs, format!("bs{k}"))).collect();
    let sw: Vec<NodeId> = (0..n_sw)
        .map(|k| t.add_node(NodeKind::Switch, format!("sw{k}")))
        .collect();
    let oen: Vec<NodeId> = (0..n_oen)
        .map(|k| t.add_node(NodeKind::Oen, format!("oen{k}")))
        .collect();
    let een = t.add_node(NodeKind::Een, "een");

    for k in 0..n_sw {
        t.add_bidirectional(sw[k], sw[(k + 1) % n_sw], LINK_BANDWIDTH, TRANSPORT_LATENCY);
    }
    for (k, &b) in bs.iter().enumerate() {
        t.add_bidirectional(b, sw[k % n_sw], LINK_BANDWIDTH, TRANSPORT_LATENCY);
    }
    for (e, &o) in oen.iter().enumerate() {
        t.add_bidirectional(o, sw[e * n_sw / n_oen], LINK_BANDWIDTH, TRANSPORT_LATENCY);
    }
    for &o in &oen {
        t.add_bidirectional(o, een, LINK_BANDWIDTH, EEN_LATENCY);
    }

    let oens = oen
        .into_iter()
        .map(|node| Oen {
            node,
            cpu_capacity: OEN_CPU,
            storage_capacity: OEN_STORAGE,
            on_cost: OEN_ON_COST,
        })
        .collect();
    (t, oens)
}

/// Five EA types with identical idle CPU and storage.
pub fn default_ea_catalog() -> Vec<EaType> {
    (1..=5)
        .map(|id| EaType {
            id: EaId(id),
            idle_cpu: EA_IDLE_CPU,
            storage_req: EA_STORAGE,
        })
        .collect()
}

/// Choice sets demands are drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandParamTable {
    pub ea_types: Vec<EaId>,
    pub cpu_choices: Vec<u64>,
    pub bw_choices: Vec<u64>,
    pub delay_choices: Vec<Latency>,
    pub cost_choices: Vec<i64>,
    /// Inclusive integer range.
    pub utility_range: (i64, i64),
}

impl Default for DemandParamTable {
    fn default() -> Self {
        DemandParamTable {
            ea_types: (1..=5).map(EaId).collect(),
            cpu_choices: vec![750, 1000, 1250, 1500],
            bw_choices: vec![30, 40, 50, 60],
            delay_choices: vec![Latency::from_ms(3), Latency::from_ms(4), Latency::from_ms(5)],
            cost_choices: vec![40, 50, 60, 70],
            utility_range: (44, 91),
        }
    }
}

impl DemandParamTable {
    pub fn validate(&self) -> Result<(), String> {
        if self.ea_types.is_empty()
            || self.cpu_choices.is_empty()
            || self.bw_choices.is_empty()
            || self.delay_choices.is_empty()
            || self.cost_choices.is_empty()
        {
            return Err("every choice set must be non-empty".into());
        }
        if self.utility_range.0 > self.utility_range.1 {
            return Err("utility range is empty".into());
        }
        Ok(())
    }

    pub fn max_cpu(&self) -> u64 {
        self.cpu_choices.iter().copied().max().unwrap_or(0)
    }
}

/// ChaCha stream assigned to each drawn attribute.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    BaseStation = 0,
    EaType = 1,
    Cpu = 2,
    Bandwidth = 3,
    Delay = 4,
    Cost = 5,
    Utility = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Draws demands until their total CPU reaches `load_pct` percent of the
/// OENs' combined capacity; the demand that crosses the target is kept.
pub fn generate_demands(
    base_stations: &[NodeId],
    oens: &[Oen],
    load_pct: u32,
    seed: u64,
    table: &DemandParamTable,
) -> Vec<Demand> {
    assert!(table.validate().is_ok(), "invalid demand table");
    assert!(!base_stations.is_empty(), "no base stations");
    let capacity: u64 = oens.iter().map(|o| o.cpu_capacity).sum();
    let target = u128::from(capacity) * u128::from(load_pct);

    let mut bs_rng = stream_rng(seed, Stream::BaseStation);
    let mut ea_rng = stream_rng(seed, Stream::EaType);
    let mut cpu_rng = stream_rng(seed, Stream::Cpu);
    let mut bw_rng = stream_rng(seed, Stream::Bandwidth);
    let mut delay_rng = stream_rng(seed, Stream::Delay);
    let mut cost_rng = stream_rng(seed, Stream::Cost);
    let mut utility_rng = stream_rng(seed, Stream::Utility);

    let mut demands = Vec::new();
    let mut next_index: HashMap<(NodeId, EaId), u32> = HashMap::new();
    let mut total: u128 = 0;
    while total * 100 < target {
        let bs = *base_stations.choose(&mut bs_rng).unwrap();
        let ea = *table.ea_types.choose(&mut ea_rng).unwrap();
        let cpu_req = *table.cpu_choices.choose(&mut cpu_rng).unwrap();
        let bw_req = *table.bw_choices.choose(&mut bw_rng).unwrap();
        let delay_budget = *table.delay_choices.choose(&mut delay_rng).unwrap();
        let offload_cost = *table.cost_choices.choose(&mut cost_rng).unwrap();
        let utility = utility_rng.gen_range(table.utility_range.0..=table.utility_range.1);
        let slot = next_index.entry((bs, ea)).or_insert(0);
        *slot += 1;
        demands.push(Demand {
            bs,
            ea,
            index: *slot,
            cpu_req,
            bw_req,
            delay_budget,
            utility,
            offload_cost,
        });
        total += u128::from(cpu_req);
    }
    demands
}

/// Preset topology plus a generated demand set with the default catalog,
/// UPF policy and path cutoff.
pub fn make_scenario(size: PresetSize, load_pct: u32, seed: u64) -> Scenario {
    let (topology, oens) = make_preset_topology(size);
    scenario_on(topology, oens, load_pct, seed)
}

/// Like [`make_scenario`] on a caller-supplied topology and OEN set.
pub fn scenario_on(topology: Topology, oens: Vec<Oen>, load_pct: u32, seed: u64) -> Scenario {
    let demands = generate_demands(
        &topology.base_stations(),
        &oens,
        load_pct,
        seed,
        &DemandParamTable::default(),
    );
    Scenario {
        format_version: FORMAT_VERSION,
        topology,
        oens,
        ea_catalog: default_ea_catalog(),
        upf_policy: UpfScalePolicy::default(),
        demands,
        path_cutoff: DEFAULT_CUTOFF,
    }
}

/// Shape of the tiny instances used to cross-check exact solvers.
#[derive(Debug, Clone)]
pub struct MicroConfig {
    pub oens: usize,
    pub min_bs: usize,
    pub max_bs: usize,
    pub max_demands: usize,
    pub replicas: u32,
    pub cutoff: u32,
}

impl Default for MicroConfig {
    fn default() -> Self {
        MicroConfig {
            oens: 2,
            min_bs: 2,
            max_bs: 4,
            max_demands: 6,
            replicas: 2,
            cutoff: 4,
        }
    }
}

/// Random micro-instance with tight resources so that every constraint
/// family can bind: a short switch line, small OENs, a two-replica UPF
/// policy and thin links.
pub fn generate_micro(seed: u64, cfg: &MicroConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bs = rng.gen_range(cfg.min_bs..=cfg.max_bs);
    let n_sw = rng.gen_range(1..=3usize);

    let mut t = Topology::default();
    let bs: Vec<NodeId> = (0..n_bs).map(|k| t.add_node(NodeKind::Bs, format!("bs{k}"))).collect();
    let sw: Vec<NodeId> = (0..n_sw)
        .map(|k| t.add_node(NodeKind::Switch, format!("sw{k}")))
        .collect();
    let oen: Vec<NodeId> = (0..cfg.oens)
        .map(|k| t.add_node(NodeKind::Oen, format!("oen{k}")))
        .collect();
    let een = t.add_node(NodeKind::Een, "een");

    let link_bw = |rng: &mut ChaCha8Rng| [90u64, 120, 200, 1000][rng.gen_range(0..4)];
    for k in 1..n_sw {
        let bw = link_bw(&mut rng);
        t.add_bidirectional(sw[k - 1], sw[k], bw, TRANSPORT_LATENCY);
    }
    for &b in &bs {
        let s = sw[rng.gen_range(0..n_sw)];
        let bw = link_bw(&mut rng);
        t.add_bidirectional(b, s, bw, TRANSPORT_LATENCY);
    }
    for (e, &o) in oen.iter().enumerate() {
        let s = sw[(e * n_sw) / cfg.oens.max(1)];
        let bw = link_bw(&mut rng);
        t.add_bidirectional(o, s, bw, TRANSPORT_LATENCY);
    }
    for &o in &oen {
        let bw = link_bw(&mut rng);
        t.add_bidirectional(o, een, bw, EEN_LATENCY);
    }

    let oens = oen
        .iter()
        .map(|&node| Oen {
            node,
            cpu_capacity: [2500u64, 3500, 5000][rng.gen_range(0..3)],
            storage_capacity: [10u64, 20, 30][rng.gen_range(0..3)],
            on_cost: [20i64, 60, 120][rng.gen_range(0..3)],
        })
        .collect::<Vec<_>>();
    let ea_catalog = vec![
        EaType {
            id: EaId(1),
            idle_cpu: 250,
            storage_req: 10,
        },
        EaType {
            id: EaId(2),
            idle_cpu: 400,
            storage_req: 10,
        },
    ];
    let table = DemandParamTable {
        ea_types: vec![EaId(1), EaId(2)],
        ..DemandParamTable::default()
    };
    let count = rng.gen_range(0..=cfg.max_demands);
    let mut next_index: HashMap<(NodeId, EaId), u32> = HashMap::new();
    let demands = (0..count)
        .map(|_| {
            let b = *bs.choose(&mut rng).unwrap();
            let ea = *table.ea_types.choose(&mut rng).unwrap();
            let slot = next_index.entry((b, ea)).or_insert(0);
            *slot += 1;
            Demand {
                bs: b,
                ea,
                index: *slot,
                cpu_req: *table.cpu_choices.choose(&mut rng).unwrap(),
                bw_req: *table.bw_choices.choose(&mut rng).unwrap(),
                delay_budget: *table.delay_choices.choose(&mut rng).unwrap(),
                utility: rng.gen_range(table.utility_range.0..=table.utility_range.1),
                offload_cost: *table.cost_choices.choose(&mut rng).unwrap(),
            }
        })
        .collect();

    Scenario {
        format_version: FORMAT_VERSION,
        topology: t,
        oens,
        ea_catalog,
        upf_policy: UpfScalePolicy::linear(cfg.replicas, 300, 100),
        demands,
        path_cutoff: cfg.cutoff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_topology;

    #[test]
    fn preset_node_counts() {
        for size in PresetSize::ALL {
            let (t, oens) = make_preset_topology(size);
            let (b, s, e) = size.counts();
            assert_eq!(t.nodes.len(), b + s + e + 1);
            assert_eq!(t.nodes_of_kind(NodeKind::Bs).count(), b);
            assert_eq!(t.nodes_of_kind(NodeKind::Switch).count(), s);
            assert_eq!(oens.len(), e);
            assert!(validate_topology(&t).is_empty());
            assert!(oens
                .iter()
                .all(|o| o.cpu_capacity == 32_000 && o.storage_capacity == 250 && o.on_cost == 200));
        }
        assert_eq!(make_preset_topology(PresetSize::Small).0.nodes.len(), 13);
    }

    #[test]
    fn preset_link_attributes() {
        let (t, _) = make_preset_topology(PresetSize::Medium);
        for l in &t.links {
            assert_eq!(l.bandwidth_mbps, 10_000);
            let een_link = t.kind(l.src) == Some(NodeKind::Een) || t.kind(l.dst) == Some(NodeKind::Een);
            let want = if een_link { Latency(15) } else { Latency(10) };
            assert_eq!(l.latency, want);
        }
    }

    #[test]
    fn small_load_30_stopping_bounds() {
        let (t, oens) = make_preset_topology(PresetSize::Small);
        for seed in 0..50 {
            let ds = generate_demands(&t.base_stations(), &oens, 30, seed, &DemandParamTable::default());
            let total: u64 = ds.iter().map(|d| d.cpu_req).sum();
            assert!((19_200..20_700).contains(&total), "seed {seed}: {total}");
            let without_last = total - ds.last().unwrap().cpu_req;
            assert!(without_last < 19_200);
        }
    }

    #[test]
    fn same_seed_same_demands() {
        let a = make_scenario(PresetSize::Large, 150, 7);
        let b = make_scenario(PresetSize::Large, 150, 7);
        assert_eq!(a, b);
        let c = make_scenario(PresetSize::Large, 150, 8);
        assert_ne!(a.demands, c.demands);
    }

    #[test]
    fn generated_scenarios_validate() {
        for size in PresetSize::ALL {
            for load in LOAD_LEVELS {
                make_scenario(size, load, 3).validate().unwrap();
            }
        }
        for seed in 0..100 {
            generate_micro(seed, &MicroConfig::default()).validate().unwrap();
        }
    }

    #[test]
    fn demand_indices_count_per_bs_and_type() {
        let s = make_scenario(PresetSize::Small, 100, 1);
        let mut seen: HashMap<(NodeId, EaId), u32> = HashMap::new();
        for d in &s.demands {
            let n = seen.entry((d.bs, d.ea)).or_insert(0);
            *n += 1;
            assert_eq!(d.index, *n);
        }
    }

    #[test]
    fn attribute_streams_are_independent() {
        // Extending the utility range changes utilities only.
        let (t, oens) = make_preset_topology(PresetSize::Small);
        let base = DemandParamTable::default();
        let wider = DemandParamTable {
            utility_range: (0, 1000),
            ..base.clone()
        };
        let a = generate_demands(&t.base_stations(), &oens, 60, 11, &base);
        let b = generate_demands(&t.base_stations(), &oens, 60, 11, &wider);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.bs, x.ea, x.cpu_req, x.bw_req), (y.bs, y.ea, y.cpu_req, y.bw_req));
        }
    }
}

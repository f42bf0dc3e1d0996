//! Mutable resource ledger used by the constructive heuristics.
//!
//! Tracks per-OEN CPU, storage, UPF cluster scale and anchored bandwidth,
//! residual link bandwidth, and the per-demand decisions taken so far.
//! Every mutation has an exact inverse so demands can be released again.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{Demand, Disposition, EaId, PathId, Scenario, Solution, FORMAT_VERSION};
use crate::pathing::PathSet;

/// Running state of one OEN.
#[derive(Debug, Clone, Default)]
pub struct OenState {
    pub upf_scale: u32,
    /// UPF reservation + idle CPU of deployed EAs + placed demands.
    pub cpu_used: u64,
    pub storage_used: u64,
    pub anchored_bw: u64,
    pub anchored: BTreeSet<usize>,
    /// Placed demands per EA type; an EA is deployed while its count is > 0.
    pub ea_placed: BTreeMap<EaId, u32>,
    /// UPF scale frozen by a pre-initialization plan.
    pub fixed_scale: bool,
    /// Switched off for good; never offered to new demands.
    pub excluded: bool,
}

impl OenState {
    pub fn is_on(&self) -> bool {
        !self.anchored.is_empty()
    }

    pub fn ea_deployed(&self, ea: EaId) -> bool {
        self.ea_placed.get(&ea).is_some_and(|&n| n > 0)
    }
}

#[derive(Debug, Clone)]
pub struct NetworkState<'a> {
    pub scenario: &'a Scenario,
    pub paths: &'a PathSet,
    pub oens: Vec<OenState>,
    pub link_residual: Vec<u64>,
    pub disposition: Vec<Disposition>,
    pub anchor: Vec<Option<usize>>,
    pub route: Vec<Option<PathId>>,
}

impl<'a> NetworkState<'a> {
    pub fn new(scenario: &'a Scenario, paths: &'a PathSet) -> Self {
        let n = scenario.demands.len();
        NetworkState {
            scenario,
            paths,
            oens: vec![OenState::default(); scenario.oens.len()],
            link_residual: scenario.topology.links.iter().map(|l| l.bandwidth_mbps).collect(),
            disposition: vec![Disposition::Rejected; n],
            anchor: vec![None; n],
            route: vec![None; n],
        }
    }

    /// Freezes OEN `e` at `scale` replicas and reserves their CPU up front.
    pub fn fix_scale(&mut self, e: usize, scale: u32) {
        let cpu = self.scenario.upf_policy.cpu(scale);
        let st = &mut self.oens[e];
        st.cpu_used = st.cpu_used - self.scenario.upf_policy.cpu(st.upf_scale) + cpu;
        st.upf_scale = scale;
        st.fixed_scale = true;
    }

    pub fn demand(&self, d: usize) -> &'a Demand {
        &self.scenario.demands[d]
    }

    pub fn cpu_free(&self, e: usize) -> i64 {
        self.scenario.oens[e].cpu_capacity as i64 - self.oens[e].cpu_used as i64
    }

    /// Cluster scale needed at `e` after anchoring `extra_bw` more, or `None`
    /// if no admissible cluster covers it.
    pub fn scale_for(&self, e: usize, extra_bw: u64) -> Option<u32> {
        let st = &self.oens[e];
        let bw = st.anchored_bw + extra_bw;
        let policy = &self.scenario.upf_policy;
        if st.fixed_scale {
            (bw <= policy.bw(st.upf_scale)).then_some(st.upf_scale)
        } else {
            policy.min_scale_for(bw)
        }
    }

    /// Extra UPF CPU that anchoring `extra_bw` at `e` would reserve.
    pub fn upscale_cpu(&self, e: usize, extra_bw: u64) -> Option<u64> {
        let policy = &self.scenario.upf_policy;
        let current = self.oens[e].upf_scale;
        self.scale_for(e, extra_bw)
            .map(|r| policy.cpu(r.max(current)) - policy.cpu(current))
    }

    /// CPU and storage a placement of `d` at `e` adds on top of what is
    /// already used: demand CPU plus the EA's idle CPU on first occurrence.
    pub fn placement_cost(&self, d: usize, e: usize) -> (u64, u64) {
        let demand = self.demand(d);
        if self.oens[e].ea_deployed(demand.ea) {
            (demand.cpu_req, 0)
        } else {
            let ea = self.scenario.ea(demand.ea).expect("validated scenario");
            (demand.cpu_req + ea.idle_cpu, ea.storage_req)
        }
    }

    pub fn path_fits(&self, path: PathId, d: usize) -> bool {
        let demand = self.demand(d);
        let p = &self.paths.paths()[path.index()];
        p.total_latency <= demand.delay_budget && p.links.iter().all(|l| self.link_residual[l.index()] >= demand.bw_req)
    }

    /// First path to OEN `e` (fewest hops first) that meets the delay budget
    /// and has residual bandwidth on every link.
    pub fn find_place_path(&self, d: usize, e: usize) -> Option<PathId> {
        let bs = self.demand(d).bs;
        let node = self.scenario.oens[e].node;
        self.paths
            .group(bs, node)
            .iter()
            .copied()
            .find(|&p| self.path_fits(p, d))
    }

    /// First EEN path whose last hop leaves OEN `e`.
    pub fn find_offload_path(&self, d: usize, e: usize) -> Option<PathId> {
        let bs = self.demand(d).bs;
        let oen = self.scenario.oens[e].node;
        let een = self.scenario.een();
        self.paths
            .group(bs, een)
            .iter()
            .copied()
            .find(|&p| self.paths.paths()[p.index()].last_hop_oen == Some(oen) && self.path_fits(p, d))
    }

    fn reserve_links(&mut self, path: PathId, bw: u64) {
        for l in &self.paths.paths()[path.index()].links {
            self.link_residual[l.index()] -= bw;
        }
    }

    fn release_links(&mut self, path: PathId, bw: u64) {
        for l in &self.paths.paths()[path.index()].links {
            self.link_residual[l.index()] += bw;
        }
    }

    /// Anchors `d` on `e` and routes it over `path`, upscaling the cluster
    /// as needed. The caller has checked feasibility.
    pub fn anchor(&mut self, d: usize, e: usize, path: PathId) {
        let bw = self.demand(d).bw_req;
        let scale = self.scale_for(e, bw).expect("anchor feasibility checked by caller");
        let policy = &self.scenario.upf_policy;
        let st = &mut self.oens[e];
        let scale = scale.max(st.upf_scale);
        st.cpu_used += policy.cpu(scale) - policy.cpu(st.upf_scale);
        st.upf_scale = scale;
        st.anchored_bw += bw;
        st.anchored.insert(d);
        self.reserve_links(path, bw);
        self.anchor[d] = Some(e);
        self.route[d] = Some(path);
    }

    /// Swaps the reserved route of an anchored demand.
    pub fn reroute(&mut self, d: usize, path: PathId) {
        let bw = self.demand(d).bw_req;
        if let Some(old) = self.route[d] {
            self.release_links(old, bw);
        }
        self.reserve_links(path, bw);
        self.route[d] = Some(path);
    }

    /// Releases the links of `d`'s route without dropping the anchor.
    pub fn drop_route(&mut self, d: usize) {
        if let Some(old) = self.route[d].take() {
            let bw = self.demand(d).bw_req;
            self.release_links(old, bw);
        }
    }

    /// Places an anchored demand on its anchor OEN.
    pub fn place(&mut self, d: usize) {
        let e = self.anchor[d].expect("placed demands are anchored");
        let (cpu, storage) = self.placement_cost(d, e);
        let ea = self.demand(d).ea;
        let st = &mut self.oens[e];
        st.cpu_used += cpu;
        st.storage_used += storage;
        *st.ea_placed.entry(ea).or_insert(0) += 1;
        self.disposition[d] = Disposition::Placed(e);
    }

    pub fn mark_offloaded(&mut self, d: usize) {
        self.disposition[d] = Disposition::Offloaded;
    }

    /// Undoes every decision taken for `d`, leaving it rejected. The UPF
    /// cluster shrinks to the smallest scale covering what stays anchored.
    pub fn release(&mut self, d: usize) {
        let demand = self.demand(d);
        if let Disposition::Placed(e) = self.disposition[d] {
            let ea = self.scenario.ea(demand.ea).expect("validated scenario");
            let st = &mut self.oens[e];
            let count = st.ea_placed.get_mut(&demand.ea).expect("placed EA is counted");
            *count -= 1;
            st.cpu_used -= demand.cpu_req;
            if *count == 0 {
                st.ea_placed.remove(&demand.ea);
                st.cpu_used -= ea.idle_cpu;
                st.storage_used -= ea.storage_req;
            }
        }
        if let Some(e) = self.anchor[d].take() {
            let policy = &self.scenario.upf_policy;
            let st = &mut self.oens[e];
            st.anchored.remove(&d);
            st.anchored_bw -= demand.bw_req;
            if !st.fixed_scale {
                let scale = policy.min_scale_for(st.anchored_bw).expect("smaller load always fits");
                st.cpu_used = st.cpu_used - policy.cpu(st.upf_scale) + policy.cpu(scale);
                st.upf_scale = scale;
            }
        }
        self.drop_route(d);
        self.disposition[d] = Disposition::Rejected;
    }

    /// Profit attributable to `e`: utility of demands placed there plus the
    /// offload margin of demands anchored there but served on the EEN.
    pub fn attributed_profit(&self, e: usize) -> i64 {
        self.oens[e]
            .anchored
            .iter()
            .map(|&d| match self.disposition[d] {
                Disposition::Placed(_) => self.demand(d).utility,
                Disposition::Offloaded => self.demand(d).offload_margin(),
                Disposition::Rejected => 0,
            })
            .sum()
    }

    /// Emits the solution. OENs without anchored demands are reported off
    /// with no UPF cluster.
    pub fn to_solution(&self) -> Solution {
        let mut oen_on = Vec::with_capacity(self.oens.len());
        let mut upf_scale = Vec::with_capacity(self.oens.len());
        let mut ea_deployed = Vec::with_capacity(self.oens.len());
        for st in &self.oens {
            let on = st.is_on();
            oen_on.push(on);
            upf_scale.push(if on { st.upf_scale } else { 0 });
            ea_deployed.push(st.ea_placed.iter().filter(|(_, &n)| n > 0).map(|(&ea, _)| ea).collect());
        }
        Solution {
            format_version: FORMAT_VERSION,
            oen_on,
            upf_scale,
            ea_deployed,
            disposition: self.disposition.clone(),
            anchor: self.anchor.clone(),
            route: self.route.clone(),
        }
    }
}

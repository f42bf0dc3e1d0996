//! RanGr: ranked greedy anchoring and placement with one reallocation round.
//!
//! Demands are ranked by normalized utility per CPU, ties broken by the
//! smaller offload margin. Each demand is then anchored best-fit: the OEN
//! that keeps the most CPU after placing it is tried for placement, and if
//! that fails the OEN that keeps the most CPU after anchoring alone takes it
//! for EEN offload. Placements are only committed after every demand has been
//! anchored, because later anchors may grow UPF clusters and eat the CPU an
//! earlier placement counted on.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::domain::{Demand, Disposition, EaId, PathId, Scenario, Solution};
use crate::pathing::PathSet;
use crate::verifier::objective;

pub use crate::state::{NetworkState, OenState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RanGrError {
    #[error("cannot normalize an empty demand batch")]
    EmptyBatch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RanGrOptions {
    /// Reject instead of offloading demands whose offload margin `U - C` is
    /// negative.
    pub reject_negative_margin_offload: bool,
}

/// Batch maxima used to normalize utility, offload cost and CPU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub utility_max: f64,
    pub cost_max: f64,
    pub cpu_max: f64,
}

pub fn normalize_batch(demands: &[Demand]) -> Result<Norms, RanGrError> {
    if demands.is_empty() {
        return Err(RanGrError::EmptyBatch);
    }
    let max = |f: fn(&Demand) -> i64| demands.iter().map(f).max().unwrap().max(1) as f64;
    Ok(Norms {
        utility_max: max(|d| d.utility),
        cost_max: max(|d| d.offload_cost),
        cpu_max: max(|d| d.cpu_req as i64),
    })
}

/// `(U / CPU, -(U - C))` on normalized values; larger is better,
/// compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank(pub f64, pub f64);

impl Rank {
    fn cmp_desc(&self, other: &Rank) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.total_cmp(&self.1))
    }
}

pub fn rank_demand(demand: &Demand, norms: &Norms) -> Rank {
    let u = demand.utility as f64 / norms.utility_max;
    let c = demand.offload_cost as f64 / norms.cost_max;
    let cpu = demand.cpu_req as f64 / norms.cpu_max;
    Rank(u / cpu, -(u - c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedDemand {
    pub demand: usize,
    pub rank: Rank,
}

/// Sorts by rank descending; equal ranks keep ascending demand id.
pub fn sort_ranked(ranked: &mut [RankedDemand]) {
    ranked.sort_by(|a, b| a.rank.cmp_desc(&b.rank).then(a.demand.cmp(&b.demand)));
}

/// Ranks every demand of `scenario` and returns ids in processing order.
pub fn ranked_order(scenario: &Scenario) -> Vec<RankedDemand> {
    let Ok(norms) = normalize_batch(&scenario.demands) else {
        return Vec::new();
    };
    let mut ranked: Vec<RankedDemand> = scenario
        .demands
        .iter()
        .enumerate()
        .map(|(demand, d)| RankedDemand {
            demand,
            rank: rank_demand(d, &norms),
        })
        .collect();
    sort_ranked(&mut ranked);
    ranked
}

/// Placements promised during the anchoring phase but not yet committed.
#[derive(Debug, Clone, Default)]
pub struct Tentative {
    cpu: Vec<u64>,
    storage: Vec<u64>,
    eas: Vec<BTreeSet<EaId>>,
    list: Vec<(usize, usize)>,
}

impl Tentative {
    pub fn new(oens: usize) -> Self {
        Tentative {
            cpu: vec![0; oens],
            storage: vec![0; oens],
            eas: vec![BTreeSet::new(); oens],
            list: Vec::new(),
        }
    }

    /// Demands promised to OENs, in anchoring order.
    pub fn placements(&self) -> &[(usize, usize)] {
        &self.list
    }

    /// Idle CPU and storage of `ea` if it would be new at `e`.
    fn ea_cost(&self, state: &NetworkState<'_>, e: usize, ea: EaId) -> (u64, u64) {
        if state.oens[e].ea_deployed(ea) || self.eas[e].contains(&ea) {
            (0, 0)
        } else {
            let t = state.scenario.ea(ea).expect("validated scenario");
            (t.idle_cpu, t.storage_req)
        }
    }

    fn promise(&mut self, state: &NetworkState<'_>, d: usize, e: usize) {
        let demand = state.demand(d);
        let (cpu, storage) = self.ea_cost(state, e, demand.ea);
        self.cpu[e] += demand.cpu_req + cpu;
        self.storage[e] += storage;
        self.eas[e].insert(demand.ea);
        self.list.push((d, e));
    }
}

/// Remaining CPU at an OEN after anchoring (`ra`) and after anchoring and
/// placing (`rp`) a demand. Both are `i64::MIN` when the UPF cluster cannot
/// grow to carry the demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OenRank {
    pub ra: i64,
    pub rp: i64,
}

pub fn rank_oen(state: &NetworkState<'_>, tentative: &Tentative, e: usize, d: usize) -> OenRank {
    let demand = state.demand(d);
    let Some(upscale) = state.upscale_cpu(e, demand.bw_req) else {
        return OenRank {
            ra: i64::MIN,
            rp: i64::MIN,
        };
    };
    let free = state.cpu_free(e);
    let (ea_cpu, _) = tentative.ea_cost(state, e, demand.ea);
    let ra = free - upscale as i64;
    let rp = free - tentative.cpu[e] as i64 - upscale as i64 - ea_cpu as i64 - demand.cpu_req as i64;
    OenRank { ra, rp }
}

/// Anchoring phase then placement phase over `order` (already sorted).
pub fn anchor_and_place(state: &mut NetworkState<'_>, order: &[usize], opts: RanGrOptions) {
    let n_oen = state.oens.len();
    let mut tentative = Tentative::new(n_oen);

    for &d in order {
        let demand = state.demand(d);
        let candidates: Vec<usize> = (0..n_oen).filter(|&e| !state.oens[e].excluded).collect();
        if candidates.is_empty() {
            continue;
        }
        let ranks: Vec<OenRank> = (0..n_oen).map(|e| rank_oen(state, &tentative, e, d)).collect();

        // Only OENs the demand can reach in time compete for its placement.
        let mut by_rp: Vec<(usize, PathId)> = candidates
            .iter()
            .filter_map(|&e| state.find_place_path(d, e).map(|p| (e, p)))
            .collect();
        by_rp.sort_by(|&(a, _), &(b, _)| ranks[b].rp.cmp(&ranks[a].rp).then(a.cmp(&b)));
        if let Some(&(top, path)) = by_rp.first() {
            if can_place_tentatively(state, &tentative, &ranks[top], top, d) {
                state.anchor(d, top, path);
                tentative.promise(state, d, top);
                continue;
            }
        }

        if opts.reject_negative_margin_offload && demand.offload_margin() < 0 {
            continue;
        }
        let mut by_ra = candidates;
        by_ra.sort_by(|&a, &b| ranks[b].ra.cmp(&ranks[a].ra).then(a.cmp(&b)));
        for e in by_ra {
            if ranks[e].ra < 0 {
                break;
            }
            if let Some(path) = state.find_offload_path(d, e) {
                state.anchor(d, e, path);
                state.mark_offloaded(d);
                break;
            }
        }
    }

    for &(d, e) in tentative.placements() {
        let (cpu, storage) = state.placement_cost(d, e);
        let fits = state.cpu_free(e) >= cpu as i64
            && state.oens[e].storage_used + storage <= state.scenario.oens[e].storage_capacity;
        if fits {
            state.place(d);
            continue;
        }
        let margin_ok = !opts.reject_negative_margin_offload || state.demand(d).offload_margin() >= 0;
        if margin_ok {
            state.drop_route(d);
            if let Some(path) = state.find_offload_path(d, e) {
                state.reroute(d, path);
                state.mark_offloaded(d);
                continue;
            }
        }
        state.release(d);
    }
}

fn can_place_tentatively(state: &NetworkState<'_>, tentative: &Tentative, rank: &OenRank, e: usize, d: usize) -> bool {
    if rank.rp < 0 {
        return false;
    }
    let (_, storage) = tentative.ea_cost(state, e, state.demand(d).ea);
    state.oens[e].storage_used + tentative.storage[e] + storage <= state.scenario.oens[e].storage_capacity
}

/// Result of a run with the intermediate state exposed for inspection.
#[derive(Debug, Clone)]
pub struct RanGrOutcome {
    pub solution: Solution,
    /// Solution after the first anchoring and placement pass.
    pub first_pass: Solution,
    /// Attributed profit of every OEN at the reallocation check.
    pub attributed_profit: Vec<i64>,
    /// OENs switched off by the reallocation check.
    pub switched_off: Vec<usize>,
}

pub fn run_rangr(scenario: &Scenario, paths: &PathSet) -> Solution {
    run_rangr_with(scenario, paths, RanGrOptions::default()).solution
}

pub fn run_rangr_with(scenario: &Scenario, paths: &PathSet, opts: RanGrOptions) -> RanGrOutcome {
    let ranked = ranked_order(scenario);
    let position: Vec<usize> = {
        let mut pos = vec![0; ranked.len()];
        for (k, r) in ranked.iter().enumerate() {
            pos[r.demand] = k;
        }
        pos
    };
    let order: Vec<usize> = ranked.iter().map(|r| r.demand).collect();

    let mut state = NetworkState::new(scenario, paths);
    anchor_and_place(&mut state, &order, opts);
    let first_pass = state.to_solution();

    let mut retry: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&d| state.disposition[d] == Disposition::Rejected)
        .collect();
    let attributed_profit: Vec<i64> = (0..scenario.oens.len()).map(|e| state.attributed_profit(e)).collect();
    let mut switched_off = Vec::new();
    for (e, oen) in scenario.oens.iter().enumerate() {
        if attributed_profit[e] > oen.on_cost {
            continue;
        }
        let anchored: Vec<usize> = state.oens[e].anchored.iter().copied().collect();
        for d in anchored {
            state.release(d);
            retry.push(d);
        }
        state.oens[e].excluded = true;
        if !anchored_is_empty(&first_pass, e) {
            switched_off.push(e);
        }
    }
    retry.sort_by_key(|&d| position[d]);
    anchor_and_place(&mut state, &retry, opts);

    RanGrOutcome {
        solution: state.to_solution(),
        first_pass,
        attributed_profit,
        switched_off,
    }
}

fn anchored_is_empty(solution: &Solution, e: usize) -> bool {
    !solution.oen_on[e]
}

/// Profit of the first pass and of the final solution.
pub fn pass_profits(scenario: &Scenario, outcome: &RanGrOutcome) -> (i64, i64) {
    (
        objective(scenario, &outcome.first_pass),
        objective(scenario, &outcome.solution),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::*;
    use crate::pathing::enumerate_paths;
    use crate::verifier::check_solution;

    fn demand(cpu: u64, u: i64, c: i64) -> Demand {
        Demand {
            bs: NodeId(0),
            ea: EaId(1),
            index: 1,
            cpu_req: cpu,
            bw_req: 50,
            delay_budget: Latency::from_ms(3),
            utility: u,
            offload_cost: c,
        }
    }

    #[test]
    fn normalization_divides_by_batch_max() {
        let ds = vec![demand(750, 50, 40), demand(1500, 80, 70)];
        let n = normalize_batch(&ds).unwrap();
        assert_eq!(n.cpu_max, 1500.0);
        assert_eq!(ds[0].cpu_req as f64 / n.cpu_max, 0.5);
        assert_eq!(ds[1].cpu_req as f64 / n.cpu_max, 1.0);
        assert_eq!(normalize_batch(&[]), Err(RanGrError::EmptyBatch));
    }

    #[test]
    fn single_demand_normalizes_to_one() {
        let ds = vec![demand(1000, 60, 50)];
        let n = normalize_batch(&ds).unwrap();
        assert_eq!(rank_demand(&ds[0], &n), Rank(1.0, -(1.0 - 1.0)));
    }

    #[test]
    fn zero_utility_batch_clamps_max() {
        let ds = vec![demand(1000, 0, 0)];
        let n = normalize_batch(&ds).unwrap();
        assert_eq!((n.utility_max, n.cost_max), (1.0, 1.0));
        let r = rank_demand(&ds[0], &n);
        assert!(r.0.is_finite() && r.1.is_finite());
    }

    #[test]
    fn rank_formula() {
        let norms = Norms {
            utility_max: 100.0,
            cost_max: 100.0,
            cpu_max: 1000.0,
        };
        let d = demand(500, 80, 30);
        let r = rank_demand(&d, &norms);
        assert!((r.0 - 1.6).abs() < 1e-12);
        assert!((r.1 + 0.5).abs() < 1e-12);
    }

    #[test]
    fn smaller_margin_ranks_higher_on_equal_ratio() {
        let norms = Norms {
            utility_max: 100.0,
            cost_max: 100.0,
            cpu_max: 1000.0,
        };
        let a = demand(1000, 60, 90);
        let b = demand(1000, 60, 50);
        let mut ranked = vec![
            RankedDemand {
                demand: 0,
                rank: rank_demand(&b, &norms),
            },
            RankedDemand {
                demand: 1,
                rank: rank_demand(&a, &norms),
            },
        ];
        sort_ranked(&mut ranked);
        assert_eq!(ranked[0].demand, 1);
    }

    #[test]
    fn equal_ranks_fall_back_to_id() {
        let r = Rank(1.0, 0.0);
        let mut ranked = vec![
            RankedDemand { demand: 3, rank: r },
            RankedDemand { demand: 1, rank: r },
            RankedDemand { demand: 2, rank: r },
        ];
        sort_ranked(&mut ranked);
        let ids: Vec<_> = ranked.iter().map(|r| r.demand).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    /// bs - sw - oen - een with roomy links.
    fn single_oen(cpu: u64, demands: Vec<Demand>) -> Scenario {
        let mut t = Topology::default();
        let bs = t.add_node(NodeKind::Bs, "bs");
        let sw = t.add_node(NodeKind::Switch, "sw");
        let oen = t.add_node(NodeKind::Oen, "oen");
        let een = t.add_node(NodeKind::Een, "een");
        t.add_bidirectional(bs, sw, 10_000, Latency::from_ms(1));
        t.add_bidirectional(sw, oen, 10_000, Latency::from_ms(1));
        t.add_bidirectional(oen, een, 10_000, Latency::from_tenths(15));
        Scenario {
            format_version: FORMAT_VERSION,
            topology: t,
            oens: vec![Oen {
                node: oen,
                cpu_capacity: cpu,
                storage_capacity: 250,
                on_cost: 200,
            }],
            ea_catalog: vec![EaType {
                id: EaId(1),
                idle_cpu: 500,
                storage_req: 10,
            }],
            upf_policy: UpfScalePolicy::default(),
            demands,
            path_cutoff: 6,
        }
    }

    #[test]
    fn rank_oen_direct_formula() {
        let s = single_oen(32_000, vec![demand(1000, 60, 50), demand(1000, 60, 50)]);
        let p = enumerate_paths(&s.topology, 6).unwrap();
        let mut st = NetworkState::new(&s, &p);
        // Put a cluster and an EA in place so that no upscale and no EA cost apply.
        st.anchor(1, 0, PathId(0));
        st.place(1);
        let free = st.cpu_free(0);
        let r = rank_oen(&st, &Tentative::new(1), 0, 0);
        assert_eq!(r.ra, free);
        assert_eq!(r.rp, free - 1000);
    }

    #[test]
    fn rank_oen_accounts_for_upscale() {
        let s = single_oen(32_000, vec![demand(1000, 60, 50)]);
        let p = enumerate_paths(&s.topology, 6).unwrap();
        let mut st = NetworkState::new(&s, &p);
        st.anchor(0, 0, PathId(0));
        // Fill the one-replica cluster to exactly B_1.
        st.oens[0].anchored_bw = 1000;
        let free = st.cpu_free(0);
        let r = rank_oen(&st, &Tentative::new(1), 0, 0);
        assert_eq!(r.ra, free - 2000);
        assert_eq!(r.rp, free - 2000 - 500 - 1000);
    }

    #[test]
    fn rank_oen_negative_when_too_small() {
        let s = single_oen(2_400, vec![demand(1000, 60, 50)]);
        let p = enumerate_paths(&s.topology, 6).unwrap();
        let st = NetworkState::new(&s, &p);
        let r = rank_oen(&st, &Tentative::new(1), 0, 0);
        assert_eq!(r.ra, 400);
        assert!(r.rp < 0);
    }

    #[test]
    fn single_demand_is_placed() {
        let s = single_oen(32_000, vec![demand(1000, 91, 40)]);
        let p = enumerate_paths(&s.topology, 6).unwrap();
        let sol = run_rangr(&s, &p);
        // U = 91 < C_e = 200 so reallocation switches the OEN off for good.
        assert_eq!(sol.disposition[0], Disposition::Rejected);
        assert!(check_solution(&s, &p, &sol).is_empty());

        let out = run_rangr_with(&s, &p, RanGrOptions::default());
        assert_eq!(out.first_pass.disposition[0], Disposition::Placed(0));
        assert_eq!(out.first_pass.upf_scale[0], 1);
        assert!(out.first_pass.oen_on[0]);
        assert_eq!(out.switched_off, vec![0]);
    }

    #[test]
    fn profitable_oen_keeps_its_demands() {
        let ds: Vec<Demand> = (1..=4)
            .map(|l| Demand {
                index: l,
                ..demand(1000, 91, 40)
            })
            .collect();
        let s = single_oen(32_000, ds);
        let p = enumerate_paths(&s.topology, 6).unwrap();
        let sol = run_rangr(&s, &p);
        assert!(sol.disposition.iter().all(|d| *d == Disposition::Placed(0)));
        assert_eq!(sol.upf_scale[0], 1);
        assert_eq!(objective(&s, &sol), 4 * 91 - 200);
    }

    #[test]
    fn latency_infeasible_demand_is_rejected() {
        let mut d = demand(1000, 91, 40);
        d.delay_budget = Latency::from_ms(1);
        let s = single_oen(32_000, vec![d]);
        let p = enumerate_paths(&s.topology, 6).unwrap();
        let out = run_rangr_with(&s, &p, RanGrOptions::default());
        assert_eq!(out.first_pass.disposition[0], Disposition::Rejected);
        assert_eq!(out.solution.disposition[0], Disposition::Rejected);
    }
}

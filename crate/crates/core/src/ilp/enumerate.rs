//! Exhaustive optimum for tiny instances, used as a reference for the
//! branch-and-bound solver.

use std::collections::BTreeSet;

use crate::domain::{Disposition, PathId, Scenario, Solution, FORMAT_VERSION};
use crate::pathing::PathSet;
use crate::verifier::check_solution;

use super::IlpError;

pub const MAX_ENUM_DEMANDS: usize = 8;
pub const MAX_ENUM_OENS: usize = 2;

#[derive(Debug, Clone, Copy)]
enum Option_ {
    Reject,
    Place(usize, PathId),
    Offload(usize, PathId),
}

/// Every route from the demand's BS: to each OEN for placement, and to the
/// EEN anchored on the OEN the route leaves last.
fn options(scenario: &Scenario, paths: &PathSet, d: usize) -> Vec<Option_> {
    let dm = &scenario.demands[d];
    let mut out = vec![Option_::Reject];
    for (e, oen) in scenario.oens.iter().enumerate() {
        out.extend(paths.group(dm.bs, oen.node).iter().map(|&p| Option_::Place(e, p)));
    }
    for (e, oen) in scenario.oens.iter().enumerate() {
        out.extend(
            paths
                .group(dm.bs, scenario.een())
                .iter()
                .filter(|p| paths.paths()[p.index()].last_hop_oen == Some(oen.node))
                .map(|&p| Option_::Offload(e, p)),
        );
    }
    out
}

fn build(scenario: &Scenario, choice: &[Option_], scales: &[u32]) -> Solution {
    let n_oen = scenario.oens.len();
    let mut sol = Solution {
        format_version: FORMAT_VERSION,
        oen_on: scales.iter().map(|&r| r > 0).collect(),
        upf_scale: scales.to_vec(),
        ea_deployed: vec![BTreeSet::new(); n_oen],
        disposition: Vec::with_capacity(choice.len()),
        anchor: Vec::with_capacity(choice.len()),
        route: Vec::with_capacity(choice.len()),
    };
    for (d, c) in choice.iter().enumerate() {
        let (disp, anchor, route) = match *c {
            Option_::Reject => (Disposition::Rejected, None, None),
            Option_::Place(e, p) => {
                sol.ea_deployed[e].insert(scenario.demands[d].ea);
                sol.oen_on[e] = true;
                (Disposition::Placed(e), Some(e), Some(p))
            }
            Option_::Offload(e, p) => (Disposition::Offloaded, Some(e), Some(p)),
        };
        sol.disposition.push(disp);
        sol.anchor.push(anchor);
        sol.route.push(route);
    }
    sol
}

/// Tries every disposition, anchor, route and cluster scale and keeps the
/// first feasible solution of highest profit in enumeration order. Refuses
/// inputs above [`MAX_ENUM_DEMANDS`] demands or [`MAX_ENUM_OENS`] OENs.
pub fn enumerate_optimum(scenario: &Scenario, paths: &PathSet) -> Result<Solution, IlpError> {
    let n = scenario.demands.len();
    let n_oen = scenario.oens.len();
    if n > MAX_ENUM_DEMANDS || n_oen > MAX_ENUM_OENS {
        return Err(IlpError::TooLarge {
            demands: n,
            oens: n_oen,
        });
    }
    let r_max = scenario.upf_policy.max_replicas;
    let opts: Vec<Vec<Option_>> = (0..n).map(|d| options(scenario, paths, d)).collect();

    let mut best = Solution::all_rejected(scenario);
    let mut best_value = 0i64;
    let mut digits = vec![0usize; n];
    let mut choice: Vec<Option_> = vec![Option_::Reject; n];
    let mut scales = vec![0u32; n_oen];
    loop {
        for d in 0..n {
            choice[d] = opts[d][digits[d]];
        }
        let mut served = 0i64;
        let mut touched = vec![false; n_oen];
        let mut placed_on = vec![false; n_oen];
        for (d, c) in choice.iter().enumerate() {
            let dm = &scenario.demands[d];
            match *c {
                Option_::Reject => {}
                Option_::Place(e, _) => {
                    served += dm.utility;
                    touched[e] = true;
                    placed_on[e] = true;
                }
                Option_::Offload(e, _) => {
                    served += dm.offload_margin();
                    touched[e] = true;
                }
            }
        }
        // Anchoring needs a cluster and a cluster needs the OEN on, so every
        // touched OEN pays its cost in any feasible variant.
        let floor_cost: i64 = (0..n_oen)
            .filter(|&e| touched[e])
            .map(|e| scenario.oens[e].on_cost)
            .sum();
        if served - floor_cost > best_value {
            scales.iter_mut().for_each(|r| *r = 0);
            loop {
                let cost: i64 = (0..n_oen)
                    .filter(|&e| scales[e] > 0 || placed_on[e])
                    .map(|e| scenario.oens[e].on_cost)
                    .sum();
                if served - cost > best_value {
                    let sol = build(scenario, &choice, &scales);
                    if check_solution(scenario, paths, &sol).is_empty() {
                        best_value = served - cost;
                        best = sol;
                    }
                }
                if !advance_scales(&mut scales, r_max) {
                    break;
                }
            }
        }
        if !advance(&mut digits, &opts) {
            break;
        }
    }
    Ok(best)
}

/// Odometer step with the last position moving fastest.
fn advance(digits: &mut [usize], opts: &[Vec<Option_>]) -> bool {
    for d in (0..digits.len()).rev() {
        digits[d] += 1;
        if digits[d] < opts[d].len() {
            return true;
        }
        digits[d] = 0;
    }
    false
}

fn advance_scales(scales: &mut [u32], r_max: u32) -> bool {
    for e in (0..scales.len()).rev() {
        scales[e] += 1;
        if scales[e] <= r_max {
            return true;
        }
        scales[e] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::*;
    use crate::pathing::enumerate_paths;
    use crate::scenario::{generate_micro, MicroConfig};
    use crate::verifier::objective;

    /// bs - oen - een with one demand (U 91, C 40) and a 200 switch-on cost.
    fn single(cpu: u64) -> Scenario {
        let mut t = Topology::default();
        let bs = t.add_node(NodeKind::Bs, "bs");
        let oen = t.add_node(NodeKind::Oen, "oen");
        let een = t.add_node(NodeKind::Een, "een");
        t.add_bidirectional(bs, oen, 1000, Latency::from_ms(1));
        t.add_bidirectional(oen, een, 1000, Latency::from_tenths(15));
        Scenario {
            format_version: FORMAT_VERSION,
            topology: t,
            oens: vec![Oen {
                node: oen,
                cpu_capacity: 4000,
                storage_capacity: 20,
                on_cost: 200,
            }],
            ea_catalog: vec![EaType {
                id: EaId(1),
                idle_cpu: 500,
                storage_req: 10,
            }],
            upf_policy: UpfScalePolicy::linear(2, 1000, 100),
            demands: vec![Demand {
                bs,
                ea: EaId(1),
                index: 1,
                cpu_req: cpu,
                bw_req: 50,
                delay_budget: Latency::from_ms(5),
                utility: 91,
                offload_cost: 40,
            }],
            path_cutoff: 4,
        }
    }

    #[test]
    fn switch_on_cost_dominates_a_single_demand() {
        // Place: 91 - 200, offload: 51 - 200, reject: 0.
        let s = single(1000);
        let p = enumerate_paths(&s.topology, 4).unwrap();
        let best = enumerate_optimum(&s, &p).unwrap();
        assert_eq!(objective(&s, &best), 0);
        assert_eq!(best.rejected_count(), 1);

        let mut cheap = single(1000);
        cheap.oens[0].on_cost = 0;
        let best = enumerate_optimum(&cheap, &p).unwrap();
        assert_eq!(objective(&cheap, &best), 91);
        assert_eq!(best.placed_count(), 1);

        let mut offload_only = single(3500);
        offload_only.oens[0].on_cost = 0;
        let best = enumerate_optimum(&offload_only, &p).unwrap();
        assert_eq!(objective(&offload_only, &best), 51);
        assert_eq!(best.offloaded_count(), 1);
    }

    #[test]
    fn empty_scenario_scores_zero() {
        let mut s = single(1000);
        s.demands.clear();
        let p = enumerate_paths(&s.topology, 4).unwrap();
        assert_eq!(objective(&s, &enumerate_optimum(&s, &p).unwrap()), 0);
    }

    #[test]
    fn refuses_large_inputs() {
        let mut s = generate_micro(1, &MicroConfig::default());
        let d = s.demands.first().cloned().unwrap_or(single(1000).demands[0].clone());
        let bs = s.topology.base_stations()[0];
        s.demands = (0..9)
            .map(|k| Demand {
                bs,
                index: k + 1,
                ..d.clone()
            })
            .collect();
        let p = enumerate_paths(&s.topology, s.path_cutoff).unwrap();
        assert!(matches!(
            enumerate_optimum(&s, &p),
            Err(IlpError::TooLarge { demands: 9, .. })
        ));
    }
}

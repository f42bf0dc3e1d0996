//! Independent feasibility check and profit evaluation of a [`Solution`].
//!
//! Every algorithm in the crate is tested against this module, so it works
//! straight from the scenario and the path set and shares no bookkeeping with
//! the solvers.

use std::fmt;

use serde::Serialize;

use crate::domain::{Disposition, NodeKind, Scenario, Solution};
use crate::pathing::PathSet;

/// Constraint identifiers. `C*` are the model constraints, `S*` are
/// structural invariants of the solution encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ConstraintId {
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
    C11,
    C12,
    C13,
    C14,
    C15,
    C16,
    C17,
    C18,
    /// Vector lengths do not match the scenario.
    S1,
    /// Reference to an OEN, path or EA type that does not exist.
    S2,
    /// Route does not start at the demand's base station.
    S3,
    /// Route destination disagrees with the disposition.
    S4,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub entity: String,
    pub measured: i64,
    pub allowed: i64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {}, allowed {}",
            self.constraint, self.entity, self.measured, self.allowed
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn contains(&self, id: ConstraintId) -> bool {
        self.violations.iter().any(|v| v.constraint == id)
    }

    fn push(&mut self, constraint: ConstraintId, entity: String, measured: i64, allowed: i64) {
        self.violations.push(Violation {
            constraint,
            entity,
            measured,
            allowed,
        });
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return writeln!(f, "feasible: no violations");
        }
        writeln!(f, "infeasible: {} violation(s)", self.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

fn as_i64(v: u64) -> i64 {
    i64::try_from(v).unwrap_or(i64::MAX)
}

/// Evaluates every constraint of the model against `solution`.
pub fn check_solution(scenario: &Scenario, paths: &PathSet, solution: &Solution) -> ViolationReport {
    use ConstraintId::*;
    let mut report = ViolationReport::default();
    let n_oen = scenario.oens.len();
    let n_dem = scenario.demands.len();

    let shape = [
        ("oen_on", solution.oen_on.len(), n_oen),
        ("upf_scale", solution.upf_scale.len(), n_oen),
        ("ea_deployed", solution.ea_deployed.len(), n_oen),
        ("disposition", solution.disposition.len(), n_dem),
        ("anchor", solution.anchor.len(), n_dem),
        ("route", solution.route.len(), n_dem),
    ];
    for (field, got, want) in shape {
        if got != want {
            report.push(S1, field.to_string(), got as i64, want as i64);
        }
    }
    if !report.is_empty() {
        return report;
    }

    // Dangling references make the remaining checks meaningless.
    let max_scale = scenario.upf_policy.max_replicas;
    for (e, &scale) in solution.upf_scale.iter().enumerate() {
        if scale > max_scale {
            report.push(
                S2,
                format!("upf_scale of oen {e}"),
                i64::from(scale),
                i64::from(max_scale),
            );
        }
    }
    for (e, eas) in solution.ea_deployed.iter().enumerate() {
        for ea in eas {
            if scenario.ea(*ea).is_none() {
                report.push(S2, format!("ea {ea} on oen {e}"), 1, 0);
            }
        }
    }
    for k in 0..n_dem {
        if let Disposition::Placed(e) = solution.disposition[k] {
            if e >= n_oen {
                report.push(S2, format!("placement of demand {k}"), e as i64, n_oen as i64 - 1);
            }
        }
        if let Some(e) = solution.anchor[k] {
            if e >= n_oen {
                report.push(S2, format!("anchor of demand {k}"), e as i64, n_oen as i64 - 1);
            }
        }
        if let Some(p) = solution.route[k] {
            if paths.get(p).is_none() {
                report.push(
                    S2,
                    format!("route of demand {k}"),
                    i64::from(p.0),
                    paths.len() as i64 - 1,
                );
            }
        }
    }
    if !report.is_empty() {
        return report;
    }

    let een = scenario.een();
    let policy = &scenario.upf_policy;
    let mut cpu = vec![0u64; n_oen];
    let mut anchored_bw = vec![0u64; n_oen];
    let mut anchored_count = vec![0usize; n_oen];
    let mut link_load = vec![0u64; scenario.topology.links.len()];

    for (k, d) in scenario.demands.iter().enumerate() {
        let disposition = solution.disposition[k];
        let accepted = i64::from(disposition != Disposition::Rejected);
        let entity = || format!("demand {k}");

        let anchors = i64::from(solution.anchor[k].is_some());
        if anchors != accepted {
            report.push(C10, entity(), anchors, accepted);
        }
        let routes = i64::from(solution.route[k].is_some());
        if routes != accepted {
            report.push(C14, entity(), routes, accepted);
        }

        if let Disposition::Placed(e) = disposition {
            cpu[e] += d.cpu_req;
            if !solution.ea_deployed[e].contains(&d.ea) {
                report.push(C7, format!("demand {k} on oen {e} (ea {})", d.ea), 1, 0);
            }
        }
        if let Some(e) = solution.anchor[k] {
            anchored_bw[e] += d.bw_req;
            anchored_count[e] += 1;
        }

        let Some(path) = solution.route[k].and_then(|p| paths.get(p)) else {
            continue;
        };
        for l in &path.links {
            link_load[l.index()] += d.bw_req;
        }
        if path.source != d.bs {
            report.push(S3, entity(), i64::from(path.source.0), i64::from(d.bs.0));
        }
        if path.total_latency > d.delay_budget {
            report.push(
                C16,
                entity(),
                i64::from(path.total_latency.tenths()),
                i64::from(d.delay_budget.tenths()),
            );
        }
        match disposition {
            Disposition::Placed(e) => {
                let want = scenario.oens[e].node;
                if path.destination != want {
                    report.push(S4, entity(), i64::from(path.destination.0), i64::from(want.0));
                }
                if solution.anchor[k].is_some_and(|a| a != e) {
                    report.push(C11, entity(), solution.anchor[k].unwrap() as i64, e as i64);
                }
            }
            Disposition::Offloaded => {
                if path.destination != een {
                    report.push(S4, entity(), i64::from(path.destination.0), i64::from(een.0));
                }
                let via = path.last_hop_oen.and_then(|n| scenario.oen_index(n));
                if let Some(a) = solution.anchor[k] {
                    if via != Some(a) {
                        report.push(C11, entity(), via.map_or(-1, |v| v as i64), a as i64);
                    }
                }
            }
            Disposition::Rejected => {}
        }
    }

    for (e, oen) in scenario.oens.iter().enumerate() {
        let on = solution.oen_on[e];
        let scale = solution.upf_scale[e];
        let eas = &solution.ea_deployed[e];
        let entity = || format!("oen {e}");

        let mut used = cpu[e] + policy.cpu(scale);
        let mut storage = 0u64;
        for ea in eas {
            let t = scenario.ea(*ea).expect("checked above");
            used += t.idle_cpu;
            storage += t.storage_req;
            if !on {
                report.push(C4, format!("ea {ea} on oen {e}"), 1, 0);
            }
            let serving = scenario
                .demands
                .iter()
                .zip(&solution.disposition)
                .any(|(d, disp)| d.ea == *ea && *disp == Disposition::Placed(e));
            if !serving {
                report.push(C8, format!("ea {ea} on oen {e}"), 0, 1);
            }
        }
        if used > oen.cpu_capacity {
            report.push(C2, entity(), as_i64(used), as_i64(oen.cpu_capacity));
        }
        if storage > oen.storage_capacity {
            report.push(C3, entity(), as_i64(storage), as_i64(oen.storage_capacity));
        }
        if scale > 0 && !on {
            report.push(C5, entity(), 1, 0);
        }
        if anchored_count[e] > 0 && scale == 0 {
            report.push(C12, entity(), anchored_count[e] as i64, 0);
        }
        if scale > 0 && anchored_count[e] == 0 {
            report.push(C13, entity(), 0, 1);
        }
        if anchored_bw[e] > policy.bw(scale) {
            report.push(C17, entity(), as_i64(anchored_bw[e]), as_i64(policy.bw(scale)));
        }
    }

    for (l, &load) in link_load.iter().enumerate() {
        let cap = scenario.topology.links[l].bandwidth_mbps;
        if load > cap {
            report.push(C18, format!("link {l}"), as_i64(load), as_i64(cap));
        }
    }

    debug_assert!(scenario.topology.kind(een) == Some(NodeKind::Een));
    report
}

/// Operator profit: accepted utility minus offload rent minus switch-on costs.
pub fn objective(scenario: &Scenario, solution: &Solution) -> i64 {
    let served: i64 = scenario
        .demands
        .iter()
        .zip(&solution.disposition)
        .map(|(d, disp)| match disp {
            Disposition::Rejected => 0,
            Disposition::Offloaded => d.utility - d.offload_cost,
            Disposition::Placed(_) => d.utility,
        })
        .sum();
    let on_costs: i64 = scenario
        .oens
        .iter()
        .zip(&solution.oen_on)
        .filter(|(_, on)| **on)
        .map(|(o, _)| o.on_cost)
        .sum();
    served - on_costs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::*;
    use crate::pathing::enumerate_paths;
    use std::collections::BTreeSet;

    /// bs - sw - oen - een, one EA type.
    fn micro(demands: Vec<Demand>) -> Scenario {
        let mut t = Topology::default();
        let bs = t.add_node(NodeKind::Bs, "bs");
        let sw = t.add_node(NodeKind::Switch, "sw");
        let oen = t.add_node(NodeKind::Oen, "oen");
        let een = t.add_node(NodeKind::Een, "een");
        t.add_bidirectional(bs, sw, 100, Latency::from_ms(1));
        t.add_bidirectional(sw, oen, 100, Latency::from_ms(1));
        t.add_bidirectional(oen, een, 100, Latency::from_tenths(15));
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
            demands,
            path_cutoff: 4,
        }
    }

    fn demand(index: u32, cpu: u64, bw: u64, u: i64, c: i64) -> Demand {
        Demand {
            bs: NodeId(0),
            ea: EaId(1),
            index,
            cpu_req: cpu,
            bw_req: bw,
            delay_budget: Latency::from_ms(5),
            utility: u,
            offload_cost: c,
        }
    }

    fn placed(s: &Scenario) -> Solution {
        let mut sol = Solution::all_rejected(s);
        sol.oen_on[0] = true;
        sol.upf_scale[0] = 1;
        sol.ea_deployed[0] = BTreeSet::from([EaId(1)]);
        sol.disposition[0] = Disposition::Placed(0);
        sol.anchor[0] = Some(0);
        sol.route[0] = Some(PathId(0));
        sol
    }

    #[test]
    fn all_rejected_is_feasible_with_zero_profit() {
        let s = micro(vec![demand(1, 1000, 50, 50, 40)]);
        let p = enumerate_paths(&s.topology, 4).unwrap();
        let sol = Solution::all_rejected(&s);
        assert!(check_solution(&s, &p, &sol).is_empty());
        assert_eq!(objective(&s, &sol), 0);
    }

    #[test]
    fn offloaded_demand_profit() {
        let s = micro(vec![demand(1, 1000, 50, 50, 40)]);
        let p = enumerate_paths(&s.topology, 4).unwrap();
        let mut sol = Solution::all_rejected(&s);
        sol.oen_on[0] = true;
        sol.upf_scale[0] = 1;
        sol.disposition[0] = Disposition::Offloaded;
        sol.anchor[0] = Some(0);
        sol.route[0] = Some(PathId(1));
        assert!(
            check_solution(&s, &p, &sol).is_empty(),
            "{}",
            check_solution(&s, &p, &sol)
        );
        assert_eq!(objective(&s, &sol), 50 - 40 - 200);
    }

    #[test]
    fn placement_without_ea_breaks_c7_and_c8() {
        let s = micro(vec![demand(1, 1000, 50, 50, 40)]);
        let p = enumerate_paths(&s.topology, 4).unwrap();
        let mut sol = placed(&s);
        assert!(check_solution(&s, &p, &sol).is_empty());
        sol.ea_deployed[0].clear();
        let r = check_solution(&s, &p, &sol);
        assert!(r.contains(ConstraintId::C7));
        assert_eq!(r.len(), 1);
        // An EA with nothing to serve.
        let mut idle = Solution::all_rejected(&s);
        idle.oen_on[0] = true;
        idle.ea_deployed[0].insert(EaId(1));
        let r = check_solution(&s, &p, &idle);
        assert!(r.contains(ConstraintId::C8));
    }

    #[test]
    fn capacity_violations_carry_values() {
        let s = micro(vec![demand(1, 3000, 50, 50, 40), demand(2, 1000, 60, 50, 40)]);
        let p = enumerate_paths(&s.topology, 4).unwrap();
        let mut sol = placed(&s);
        sol.disposition[1] = Disposition::Placed(0);
        sol.anchor[1] = Some(0);
        sol.route[1] = Some(PathId(0));
        let r = check_solution(&s, &p, &sol);
        let c2 = r.violations.iter().find(|v| v.constraint == ConstraintId::C2).unwrap();
        assert_eq!((c2.measured, c2.allowed), (1000 + 500 + 4000, 4000));
        let c17 = r.violations.iter().find(|v| v.constraint == ConstraintId::C17).unwrap();
        assert_eq!((c17.measured, c17.allowed), (110, 100));
        let c18 = r.violations.iter().find(|v| v.constraint == ConstraintId::C18).unwrap();
        assert_eq!((c18.measured, c18.allowed), (110, 100));
        assert!(r.to_string().starts_with("infeasible"));
    }

    #[test]
    fn structural_checks() {
        let s = micro(vec![demand(1, 1000, 50, 50, 40)]);
        let p = enumerate_paths(&s.topology, 4).unwrap();

        let mut sol = placed(&s);
        sol.anchor[0] = None;
        assert!(check_solution(&s, &p, &sol).contains(ConstraintId::C10));

        let mut sol = placed(&s);
        sol.route[0] = Some(PathId(1));
        assert!(check_solution(&s, &p, &sol).contains(ConstraintId::S4));

        let mut sol = placed(&s);
        sol.route[0] = Some(PathId(9));
        assert!(check_solution(&s, &p, &sol).contains(ConstraintId::S2));

        let mut sol = placed(&s);
        sol.oen_on.push(true);
        assert!(check_solution(&s, &p, &sol).contains(ConstraintId::S1));

        let mut sol = placed(&s);
        sol.oen_on[0] = false;
        let r = check_solution(&s, &p, &sol);
        assert!(r.contains(ConstraintId::C4) && r.contains(ConstraintId::C5));

        let mut sol = Solution::all_rejected(&s);
        sol.route[0] = Some(PathId(0));
        assert!(check_solution(&s, &p, &sol).contains(ConstraintId::C14));

        let mut sol = placed(&s);
        sol.upf_scale[0] = 0;
        let r = check_solution(&s, &p, &sol);
        assert!(r.contains(ConstraintId::C12) && r.contains(ConstraintId::C17));

        let mut sol = Solution::all_rejected(&s);
        sol.oen_on[0] = true;
        sol.upf_scale[0] = 1;
        assert!(check_solution(&s, &p, &sol).contains(ConstraintId::C13));
    }

    #[test]
    fn latency_and_anchor_mismatch() {
        let mut d = demand(1, 1000, 50, 50, 40);
        d.delay_budget = Latency::from_ms(3);
        let s = micro(vec![d]);
        let p = enumerate_paths(&s.topology, 4).unwrap();
        let mut sol = Solution::all_rejected(&s);
        sol.oen_on[0] = true;
        sol.upf_scale[0] = 1;
        sol.disposition[0] = Disposition::Offloaded;
        sol.anchor[0] = Some(0);
        sol.route[0] = Some(PathId(1));
        let r = check_solution(&s, &p, &sol);
        let c16 = r.violations.iter().find(|v| v.constraint == ConstraintId::C16).unwrap();
        assert_eq!((c16.measured, c16.allowed), (35, 30));
    }
}

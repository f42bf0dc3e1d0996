//! Comparison algorithms: utility-ordered first-fit Greedy and Top-K.
//!
//! Both fix the set of ON OENs and their UPF cluster sizes before looking at
//! any individual demand, then never scale clusters afterwards.

use crate::domain::{Scenario, Solution};
use crate::pathing::PathSet;
use crate::state::NetworkState;

/// OENs switched on up front and the UPF scale of each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreInitPlan {
    /// `(oen position, replicas)` in ascending OEN order.
    pub on: Vec<(usize, u32)>,
}

impl PreInitPlan {
    /// Every OEN on at the largest scale.
    pub fn all_on_max(scenario: &Scenario) -> Self {
        let r = scenario.upf_policy.max_replicas;
        PreInitPlan {
            on: (0..scenario.oens.len()).map(|e| (e, r)).collect(),
        }
    }

    pub fn total_cpu(&self, scenario: &Scenario) -> u64 {
        self.on.iter().map(|&(e, _)| scenario.oens[e].cpu_capacity).sum()
    }
}

/// Sizes the plan from aggregate demand: enough of the lowest-id OENs to
/// cover the total CPU requirement, each with a cluster sized for an even
/// share of the total bandwidth.
pub fn preinit(scenario: &Scenario) -> PreInitPlan {
    if scenario.demands.is_empty() || scenario.oens.is_empty() {
        return PreInitPlan { on: Vec::new() };
    }
    let cpu: u64 = scenario.demands.iter().map(|d| d.cpu_req).sum();
    let bw: u64 = scenario.demands.iter().map(|d| d.bw_req).sum();

    let mut m = 0;
    let mut covered = 0u64;
    while m < scenario.oens.len() && covered < cpu {
        covered += scenario.oens[m].cpu_capacity;
        m += 1;
    }
    let policy = &scenario.upf_policy;
    let per_oen = bw.div_ceil(m as u64);
    let wanted = per_oen.div_ceil(policy.bw(1)).clamp(1, u64::from(policy.max_replicas)) as u32;
    let on = (0..m)
        .map(|e| {
            // Never reserve more UPF CPU than the node has.
            let mut scale = wanted;
            while scale > 1 && policy.cpu(scale) > scenario.oens[e].cpu_capacity {
                scale -= 1;
            }
            (e, scale)
        })
        .collect();
    PreInitPlan { on }
}

/// Demand ids by utility descending, ties by id.
pub fn utility_order(scenario: &Scenario) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scenario.demands.len()).collect();
    order.sort_by(|&a, &b| {
        scenario.demands[b]
            .utility
            .cmp(&scenario.demands[a].utility)
            .then(a.cmp(&b))
    });
    order
}

/// Largest prefix of `order` whose cumulative CPU fits in the plan's OENs.
pub fn topk_k(scenario: &Scenario, plan: &PreInitPlan, order: &[usize]) -> usize {
    let budget = plan.total_cpu(scenario);
    let mut used = 0u64;
    order
        .iter()
        .take_while(|&&d| {
            used += scenario.demands[d].cpu_req;
            used <= budget
        })
        .count()
}

fn planned_state<'a>(scenario: &'a Scenario, paths: &'a PathSet, plan: &PreInitPlan) -> NetworkState<'a> {
    let mut state = NetworkState::new(scenario, paths);
    for st in state.oens.iter_mut() {
        st.excluded = true;
    }
    for &(e, scale) in &plan.on {
        state.oens[e].excluded = false;
        state.fix_scale(e, scale);
    }
    state
}

fn try_place_first_fit(state: &mut NetworkState<'_>, d: usize) -> bool {
    let bw = state.demand(d).bw_req;
    for e in 0..state.oens.len() {
        if state.oens[e].excluded || state.scale_for(e, bw).is_none() {
            continue;
        }
        let (cpu, storage) = state.placement_cost(d, e);
        if state.cpu_free(e) < cpu as i64
            || state.oens[e].storage_used + storage > state.scenario.oens[e].storage_capacity
        {
            continue;
        }
        if let Some(path) = state.find_place_path(d, e) {
            state.anchor(d, e, path);
            state.place(d);
            return true;
        }
    }
    false
}

fn try_offload_first_fit(state: &mut NetworkState<'_>, d: usize) -> bool {
    let bw = state.demand(d).bw_req;
    for e in 0..state.oens.len() {
        if state.oens[e].excluded || state.scale_for(e, bw).is_none() {
            continue;
        }
        if let Some(path) = state.find_offload_path(d, e) {
            state.anchor(d, e, path);
            state.mark_offloaded(d);
            return true;
        }
    }
    false
}

pub fn run_greedy(scenario: &Scenario, paths: &PathSet) -> Solution {
    run_greedy_with_plan(scenario, paths, &preinit(scenario))
}

pub fn run_greedy_with_plan(scenario: &Scenario, paths: &PathSet, plan: &PreInitPlan) -> Solution {
    let order = utility_order(scenario);
    run_prefix(scenario, paths, plan, &order, order.len())
}

pub fn run_topk(scenario: &Scenario, paths: &PathSet) -> Solution {
    let plan = preinit(scenario);
    let order = utility_order(scenario);
    let k = topk_k(scenario, &plan, &order);
    run_prefix(scenario, paths, &plan, &order, k)
}

pub fn run_topk_with(scenario: &Scenario, paths: &PathSet, plan: &PreInitPlan, k: usize) -> Solution {
    let order = utility_order(scenario);
    run_prefix(scenario, paths, plan, &order, k)
}

/// First-fit over `order`: the first `k` demands may be placed on OENs, the
/// rest can only be offloaded.
fn run_prefix(scenario: &Scenario, paths: &PathSet, plan: &PreInitPlan, order: &[usize], k: usize) -> Solution {
    let mut state = planned_state(scenario, paths, plan);
    for (pos, &d) in order.iter().enumerate() {
        if pos < k && try_place_first_fit(&mut state, d) {
            continue;
        }
        try_offload_first_fit(&mut state, d);
    }
    state.to_solution()
}

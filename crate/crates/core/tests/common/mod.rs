#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use upf_edge::domain::{Disposition, Scenario, Solution};
use upf_edge::ilp::{build_model, ModelOptions};
use upf_edge::pathing::PathSet;
use upf_edge::verifier::{check_solution, objective};

/// Uniformly random values for every field, mostly within range.
pub fn random_assignment(scenario: &Scenario, paths: &PathSet, rng: &mut ChaCha8Rng) -> Solution {
    let n_oen = scenario.oens.len();
    let max_r = scenario.upf_policy.max_replicas;
    let mut sol = Solution::all_rejected(scenario);
    for e in 0..n_oen {
        sol.oen_on[e] = rng.gen_bool(0.7);
        sol.upf_scale[e] = rng.gen_range(0..=max_r);
        sol.ea_deployed[e] = scenario
            .ea_catalog
            .iter()
            .filter(|_| rng.gen_bool(0.4))
            .map(|ea| ea.id)
            .collect();
    }
    for d in 0..scenario.demands.len() {
        sol.disposition[d] = match rng.gen_range(0..3) {
            0 => Disposition::Rejected,
            1 => Disposition::Offloaded,
            _ => Disposition::Placed(rng.gen_range(0..n_oen)),
        };
        if sol.disposition[d] != Disposition::Rejected || rng.gen_bool(0.1) {
            sol.anchor[d] = Some(rng.gen_range(0..n_oen));
            sol.route[d] = random_route(scenario, paths, &sol, d, rng);
        }
    }
    sol
}

fn random_route(
    scenario: &Scenario,
    paths: &PathSet,
    sol: &Solution,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Option<upf_edge::domain::PathId> {
    if paths.is_empty() || rng.gen_bool(0.05) {
        return None;
    }
    if rng.gen_bool(0.15) {
        return paths.paths().choose(rng).map(|p| p.id);
    }
    let bs = scenario.demands[d].bs;
    let dst = match sol.disposition[d] {
        Disposition::Placed(e) => scenario.oens[e].node,
        _ => scenario.een(),
    };
    paths.group(bs, dst).choose(rng).copied()
}

/// Changes one field of `sol` at random.
pub fn perturb(scenario: &Scenario, paths: &PathSet, sol: &mut Solution, rng: &mut ChaCha8Rng) {
    let n_oen = scenario.oens.len();
    let n_dem = scenario.demands.len();
    let e = rng.gen_range(0..n_oen);
    match rng.gen_range(0..6) {
        0 => sol.oen_on[e] = !sol.oen_on[e],
        1 => {
            let max_r = scenario.upf_policy.max_replicas;
            sol.upf_scale[e] = rng.gen_range(0..=max_r);
        }
        2 => {
            let ea = scenario.ea_catalog.choose(rng).unwrap().id;
            if !sol.ea_deployed[e].remove(&ea) {
                sol.ea_deployed[e].insert(ea);
            }
        }
        _ if n_dem == 0 => {}
        3 => {
            let d = rng.gen_range(0..n_dem);
            sol.disposition[d] = match rng.gen_range(0..3) {
                0 => Disposition::Rejected,
                1 => Disposition::Offloaded,
                _ => Disposition::Placed(e),
            };
        }
        4 => {
            let d = rng.gen_range(0..n_dem);
            sol.anchor[d] = if rng.gen_bool(0.2) { None } else { Some(e) };
        }
        _ => {
            let d = rng.gen_range(0..n_dem);
            sol.route[d] = random_route(scenario, paths, sol, d, rng);
        }
    }
}

/// Classification of one assignment by the model rows and by the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub feasible: bool,
    pub objective: Option<i64>,
}

pub fn model_verdict(scenario: &Scenario, paths: &PathSet, sol: &Solution) -> Verdict {
    let model = build_model(scenario, paths, ModelOptions::default()).expect("model builds");
    match model.encode(scenario, sol) {
        Some(x) if model.is_feasible(&x) => Verdict {
            feasible: true,
            objective: Some(model.objective_value(&x)),
        },
        _ => Verdict {
            feasible: false,
            objective: None,
        },
    }
}

pub fn verifier_verdict(scenario: &Scenario, paths: &PathSet, sol: &Solution) -> Verdict {
    let feasible = check_solution(scenario, paths, sol).is_empty();
    Verdict {
        feasible,
        objective: feasible.then(|| objective(scenario, sol)),
    }
}

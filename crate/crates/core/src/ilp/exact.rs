//! Depth-first branch and bound over per-demand decisions.
//!
//! Demands are branched grouped by EA type, by utility within a group, with
//! the options place (per OEN and route), offload (per anchor OEN and route)
//! and reject. EAs exist exactly where a demand of their type is placed.
//!
//! With few OENs the search runs once per assignment of final UPF scales to
//! OENs, most promising assignment first, and stops when no remaining one can
//! beat the incumbent. With more OENs clusters grow with the anchored
//! traffic and a single search covers everything.
//!
//! Searches run in passes against a target just below the upper bound, so
//! that nodes which cannot reach the target are cut long before a good
//! incumbent is known.

use std::time::{Duration, Instant};

use crate::baselines::{run_greedy, run_topk};
use crate::domain::{Disposition, Scenario, Solution};
use crate::pathing::{Candidates, PathSet};
use crate::rangr::run_rangr;
use crate::state::NetworkState;
use crate::verifier::{check_solution, objective};

use super::bound::{tune_prices, FixedScaleBound, GrowingBound, PricedBound, MAX_FIXED_SCALE_OENS};
use super::IlpError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactLimits {
    pub time: Duration,
    pub nodes: Option<u64>,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            time: Duration::from_secs(300),
            nodes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactStatus {
    Optimal,
    /// Search stopped at a limit. `gap` is relative to the upper bound.
    Bounded {
        best: i64,
        gap: f64,
    },
}

impl ExactStatus {
    pub fn label(&self) -> &'static str {
        match self {
            ExactStatus::Optimal => "optimal",
            ExactStatus::Bounded { .. } => "bounded",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactOutcome {
    pub solution: Solution,
    pub objective: i64,
    pub status: ExactStatus,
    pub upper_bound: i64,
    pub nodes: u64,
}

#[derive(Debug, Clone, Copy)]
enum Choice {
    Place(usize, crate::domain::PathId),
    Offload(usize, crate::domain::PathId),
}

struct Config {
    scales: Vec<u32>,
    root: i64,
    /// Tuned bandwidth prices and the root bound they give, once computed.
    priced: Option<(Vec<i64>, i64)>,
}

impl Config {
    fn bound(&self) -> i64 {
        self.priced.as_ref().map_or(self.root, |p| p.1.min(self.root))
    }
}

enum Mode {
    Growing(GrowingBound),
    /// Scales are frozen; OENs outside `mask` are excluded and every OEN in
    /// it is charged whether used or not.
    Fixed {
        bound: FixedScaleBound,
        /// Scale assignments by root bound, best first.
        configs: Vec<Config>,
        /// Bound specific to the configuration being searched.
        priced: Option<PricedBound>,
        mask: usize,
        cost: i64,
    },
}

struct Search<'a> {
    state: NetworkState<'a>,
    cand: Candidates,
    order: Vec<usize>,
    /// Earlier positions whose demand dominates the one at each position.
    /// A demand never gets a better disposition than its dominators.
    dominators: Vec<Vec<usize>>,
    links_bind: bool,
    mode: Mode,
    committed: i64,
    best_value: i64,
    best: Solution,
    /// Nodes whose bound does not exceed this are pruned even when the
    /// incumbent is worse.
    target_floor: i64,
    nodes: u64,
    deadline: Instant,
    node_limit: u64,
    aborted: bool,
    open_bound: i64,
    /// Test hook: check the bound against exhaustive completion at every node.
    audit: bool,
}

impl<'a> Search<'a> {
    fn choices(&self, d: usize) -> Vec<Choice> {
        let st = &self.state;
        let dm = st.demand(d);
        let mut out = Vec::new();
        if dm.utility > 0 {
            for e in 0..st.oens.len() {
                if st.oens[e].excluded {
                    continue;
                }
                let Some(extra_upf) = st.upscale_cpu(e, dm.bw_req) else {
                    continue;
                };
                let (cpu, storage) = st.placement_cost(d, e);
                if st.cpu_free(e) < (cpu + extra_upf) as i64
                    || st.oens[e].storage_used + storage > st.scenario.oens[e].storage_capacity
                {
                    continue;
                }
                for &p in &self.cand.place[d][e] {
                    if st.path_fits(p, d) {
                        out.push(Choice::Place(e, p));
                        if !self.links_bind {
                            break;
                        }
                    }
                }
            }
        }
        if dm.offload_margin() > 0 {
            for e in 0..st.oens.len() {
                if st.oens[e].excluded {
                    continue;
                }
                let Some(extra_upf) = st.upscale_cpu(e, dm.bw_req) else {
                    continue;
                };
                if st.cpu_free(e) < extra_upf as i64 {
                    continue;
                }
                for &p in &self.cand.offload[d][e] {
                    if st.path_fits(p, d) {
                        out.push(Choice::Offload(e, p));
                        if !self.links_bind {
                            break;
                        }
                    }
                }
            }
        }
        out
    }

    fn apply(&mut self, d: usize, choice: Choice) -> i64 {
        let dm = self.state.demand(d);
        match choice {
            Choice::Place(e, p) => {
                self.state.anchor(d, e, p);
                self.state.place(d);
                dm.utility
            }
            Choice::Offload(e, p) => {
                self.state.anchor(d, e, p);
                self.state.mark_offloaded(d);
                dm.offload_margin()
            }
        }
    }

    fn value(&self) -> i64 {
        if let Mode::Fixed { cost, .. } = self.mode {
            return self.committed - cost;
        }
        let on_cost: i64 = (0..self.state.oens.len())
            .filter(|&e| self.state.oens[e].is_on())
            .map(|e| self.state.scenario.oens[e].on_cost)
            .sum();
        self.committed - on_cost
    }

    fn bound_at(&self, k: usize) -> i64 {
        let ea = self.order.get(k).map(|&d| self.state.demand(d).ea);
        match &self.mode {
            Mode::Growing(bound) => {
                let paid = ea.is_some_and(|ea| self.state.oens.iter().any(|st| st.ea_deployed(ea)));
                bound.at(&self.state, k, self.committed, paid)
            }
            Mode::Fixed {
                bound, priced, mask, ..
            } => {
                let ub = bound.at(&self.state, *mask, k, ea, self.committed);
                priced
                    .as_ref()
                    .map_or(ub, |p| ub.min(p.at(&self.state, k, ea, self.committed)))
            }
        }
    }

    fn floor(&self) -> i64 {
        self.best_value.max(self.target_floor)
    }

    fn out_of_budget(&mut self) -> bool {
        if self.nodes >= self.node_limit {
            return true;
        }
        self.nodes.is_multiple_of(256) && Instant::now() >= self.deadline
    }

    /// Best disposition the demand at depth `k` may take: 2 placed,
    /// 1 offloaded, 0 rejected.
    fn level_cap(&self, k: usize) -> u8 {
        self.dominators[k]
            .iter()
            .map(|&t| level(self.state.disposition[self.order[t]]))
            .min()
            .unwrap_or(2)
    }

    fn dfs(&mut self, k: usize) {
        self.nodes += 1;
        if k == self.order.len() {
            if self.value() > self.floor() {
                // Unused OENs of a fixed configuration are reported off, so
                // the solution may be worth more than the search charged.
                let sol = self.state.to_solution();
                self.best_value = objective(self.state.scenario, &sol);
                self.best = sol;
            }
            return;
        }
        let ub = self.bound_at(k);
        if self.audit {
            let exact = self.completion(k);
            assert!(ub >= exact, "bound {ub} below best completion {exact} at depth {k}");
        }
        if ub <= self.floor() {
            return;
        }
        if self.aborted || self.out_of_budget() {
            self.aborted = true;
            self.open_bound = self.open_bound.max(ub);
            return;
        }
        let d = self.order[k];
        // Children are explored by their own bound, best first, so the first
        // dive follows the relaxation and finds a strong incumbent early.
        let mut children = vec![(self.bound_at(k + 1), None)];
        let cap = self.level_cap(k);
        let choices = if cap > 0 { self.choices(d) } else { Vec::new() };
        for choice in choices {
            if cap < 2 && matches!(choice, Choice::Place(..)) {
                continue;
            }
            let gain = self.apply(d, choice);
            self.committed += gain;
            children.push((self.bound_at(k + 1), Some(choice)));
            self.committed -= gain;
            self.state.release(d);
        }
        children.sort_by_key(|c| std::cmp::Reverse(c.0));
        for (child_ub, choice) in children {
            if child_ub <= self.floor() {
                break;
            }
            match choice {
                Some(choice) => {
                    let gain = self.apply(d, choice);
                    self.committed += gain;
                    self.dfs(k + 1);
                    self.committed -= gain;
                    self.state.release(d);
                }
                None => self.dfs(k + 1),
            }
            if self.aborted {
                self.open_bound = self.open_bound.max(ub);
                return;
            }
        }
    }

    /// Best final profit reachable from the current node, by plain
    /// enumeration of every remaining choice.
    fn completion(&mut self, k: usize) -> i64 {
        if k == self.order.len() {
            return self.value();
        }
        let d = self.order[k];
        let mut best = self.completion(k + 1);
        for choice in self.choices(d) {
            let gain = self.apply(d, choice);
            self.committed += gain;
            best = best.max(self.completion(k + 1));
            self.committed -= gain;
            self.state.release(d);
        }
        best
    }

    /// Searches every fixed scale assignment whose root bound beats the
    /// floor, best first.
    fn fixed_pass(&mut self) {
        let scenario = self.state.scenario;
        let n_configs = match &self.mode {
            Mode::Fixed { configs, .. } => configs.len(),
            Mode::Growing(_) => unreachable!("fixed-scale pass in growing mode"),
        };
        for i in 0..n_configs {
            let floor = self.floor();
            let Mode::Fixed { configs, .. } = &mut self.mode else {
                unreachable!()
            };
            let config = &mut configs[i];
            if config.root <= floor {
                break;
            }
            if self.aborted {
                self.open_bound = self.open_bound.max(config.bound());
                break;
            }
            let (price, priced_root) = config
                .priced
                .get_or_insert_with(|| tune_prices(scenario, &self.cand, &self.order, &config.scales))
                .clone();
            if priced_root <= floor {
                continue;
            }
            let scales = config.scales.clone();
            let priced = PricedBound::new(scenario, &self.cand, &self.order, &scales, price);
            let mut state = NetworkState::new(scenario, self.state.paths);
            let mut on = 0;
            let mut on_cost = 0;
            for (e, &r) in scales.iter().enumerate() {
                if r == 0 {
                    state.oens[e].excluded = true;
                } else {
                    state.fix_scale(e, r);
                    on |= 1 << e;
                    on_cost += scenario.oens[e].on_cost;
                }
            }
            if let Mode::Fixed {
                priced: p, mask, cost, ..
            } = &mut self.mode
            {
                *p = Some(priced);
                *mask = on;
                *cost = on_cost;
            }
            self.state = state;
            self.committed = 0;
            self.dfs(0);
        }
    }

    fn pass(&mut self) {
        match self.mode {
            Mode::Fixed { .. } => self.fixed_pass(),
            Mode::Growing(_) => {
                self.state = NetworkState::new(self.state.scenario, self.state.paths);
                self.committed = 0;
                self.dfs(0);
            }
        }
    }

    /// Bound on the optimum before any decision.
    fn root_bound(&mut self) -> i64 {
        let scenario = self.state.scenario;
        match &mut self.mode {
            Mode::Fixed { bound, configs, .. } => {
                *configs = scale_assignments(scenario)
                    .into_iter()
                    .map(|scales| Config {
                        root: bound.root(scenario, &scales),
                        scales,
                        priced: None,
                    })
                    .collect();
                configs.sort_by(|a, b| b.root.cmp(&a.root).then_with(|| a.scales.cmp(&b.scales)));
                configs.first().map_or(0, |c| c.root).max(0)
            }
            Mode::Growing(_) => self.bound_at(0).max(0),
        }
    }

    /// Searches for solutions reaching a target just below the upper bound,
    /// lowering the target by growing steps while none exists. A pass that
    /// ends without reaching its target proves a smaller upper bound; one
    /// that reaches it proves the incumbent optimal. Returns the best proven
    /// upper bound.
    fn run(&mut self) -> i64 {
        let mut upper = self.root_bound();
        let mut step = 1;
        loop {
            if upper <= self.best_value {
                return self.best_value;
            }
            let target = (upper - step + 1).max(self.best_value + 1);
            self.target_floor = target - 1;
            self.pass();
            if self.aborted {
                let open = self.open_bound.max(self.target_floor).max(self.best_value);
                return open.min(upper);
            }
            if self.best_value >= target {
                return self.best_value;
            }
            upper = target - 1;
            step *= 2;
        }
    }
}

/// Every assignment of a UPF scale to each OEN that fits its CPU, except
/// the all-off one.
fn scale_assignments(scenario: &Scenario) -> Vec<Vec<u32>> {
    let policy = &scenario.upf_policy;
    let mut out = vec![Vec::new()];
    for oen in &scenario.oens {
        let fitting: Vec<u32> = (0..=policy.max_replicas)
            .filter(|&r| r == 0 || policy.cpu(r) <= oen.cpu_capacity)
            .collect();
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                fitting.iter().map(move |&r| {
                    let mut next = prefix.clone();
                    next.push(r);
                    next
                })
            })
            .collect();
    }
    out.retain(|r| r.iter().any(|&x| x > 0));
    out
}
/// Demand ids grouped by EA type, by utility descending within a group,
/// ties by id.
fn branching_order(scenario: &Scenario) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scenario.demands.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&scenario.demands[a], &scenario.demands[b]);
        da.ea.cmp(&db.ea).then(db.utility.cmp(&da.utility)).then(a.cmp(&b))
    });
    order
}

/// True if some link could be asked for more than its bandwidth by the
/// demands that have a candidate route over it.
fn links_can_bind(scenario: &Scenario, paths: &PathSet, cand: &Candidates) -> bool {
    let mut demand_on_link = vec![0u64; scenario.topology.links.len()];
    for (d, dm) in scenario.demands.iter().enumerate() {
        let mut touched = vec![false; demand_on_link.len()];
        for p in cand.place[d].iter().chain(&cand.offload[d]).flatten() {
            for l in &paths.paths()[p.index()].links {
                touched[l.index()] = true;
            }
        }
        for (l, t) in touched.into_iter().enumerate() {
            if t {
                demand_on_link[l] += dm.bw_req;
            }
        }
    }
    scenario
        .topology
        .links
        .iter()
        .zip(&demand_on_link)
        .any(|(link, &load)| load > link.bandwidth_mbps)
}

fn incumbent(scenario: &Scenario, paths: &PathSet) -> (Solution, i64) {
    let mut best = Solution::all_rejected(scenario);
    let mut best_value = 0;
    for sol in [
        run_rangr(scenario, paths),
        run_greedy(scenario, paths),
        run_topk(scenario, paths),
    ] {
        let v = objective(scenario, &sol);
        if v > best_value && check_solution(scenario, paths, &sol).is_empty() {
            best = sol;
            best_value = v;
        }
    }
    (best, best_value)
}

fn level(disposition: Disposition) -> u8 {
    match disposition {
        Disposition::Placed(_) => 2,
        Disposition::Offloaded => 1,
        Disposition::Rejected => 0,
    }
}

/// True if `a` can always take over `b`'s disposition without losing
/// profit: same EA type and bandwidth, the same reachable OENs, no more CPU,
/// and at least the value of `b` in every exchange of their dispositions.
fn dominates(scenario: &Scenario, cand: &Candidates, links_bind: bool, a: usize, b: usize) -> bool {
    let (da, db) = (&scenario.demands[a], &scenario.demands[b]);
    let reach = |d: usize, e: usize| (!cand.place[d][e].is_empty(), !cand.offload[d][e].is_empty());
    let (ma, mb) = (da.offload_margin(), db.offload_margin());
    da.ea == db.ea
        && da.bw_req == db.bw_req
        && (da.bs == db.bs || !links_bind)
        && (0..scenario.oens.len()).all(|e| reach(a, e) == reach(b, e))
        && da.cpu_req <= db.cpu_req
        && da.utility >= db.utility
        && ma >= mb
        && da.utility + mb.max(0) >= db.utility + ma.max(0)
}

fn dominators(scenario: &Scenario, cand: &Candidates, links_bind: bool, order: &[usize]) -> Vec<Vec<usize>> {
    (0..order.len())
        .map(|k| {
            (0..k)
                .filter(|&t| dominates(scenario, cand, links_bind, order[t], order[k]))
                .collect()
        })
        .collect()
}

fn search<'a>(scenario: &'a Scenario, paths: &'a PathSet, limits: ExactLimits, audit: bool) -> Search<'a> {
    let cand = Candidates::new(scenario, paths);
    let order = branching_order(scenario);
    let mode = if scenario.oens.len() <= MAX_FIXED_SCALE_OENS {
        Mode::Fixed {
            bound: FixedScaleBound::new(scenario, &cand, &order),
            configs: Vec::new(),
            priced: None,
            mask: 0,
            cost: 0,
        }
    } else {
        Mode::Growing(GrowingBound::new(scenario, &cand, &order))
    };
    let (best, best_value) = incumbent(scenario, paths);
    let links_bind = links_can_bind(scenario, paths, &cand);
    Search {
        state: NetworkState::new(scenario, paths),
        links_bind,
        dominators: dominators(scenario, &cand, links_bind, &order),
        cand,
        order,
        mode,
        committed: 0,
        best_value,
        best,
        target_floor: i64::MIN,
        nodes: 0,
        deadline: Instant::now() + limits.time,
        node_limit: limits.nodes.unwrap_or(u64::MAX),
        aborted: false,
        open_bound: i64::MIN,
        audit,
    }
}

/// Shrinks every UPF cluster to the smallest scale covering its traffic.
fn shrink_scales(scenario: &Scenario, sol: &mut Solution) {
    let mut anchored = vec![0u64; scenario.oens.len()];
    for (d, a) in sol.anchor.iter().enumerate() {
        if let Some(e) = a {
            anchored[*e] += scenario.demands[d].bw_req;
        }
    }
    for (e, bw) in anchored.into_iter().enumerate() {
        if sol.oen_on[e] {
            if let Some(r) = scenario.upf_policy.min_scale_for(bw) {
                sol.upf_scale[e] = r.max(1);
            }
        }
    }
}

/// Proven-optimal solution, or the best one found when a limit stops the
/// search first. Deterministic unless the time limit is hit.
pub fn solve_exact(scenario: &Scenario, paths: &PathSet, limits: ExactLimits) -> Result<ExactOutcome, IlpError> {
    scenario.validate().map_err(IlpError::InvalidScenario)?;
    let mut s = search(scenario, paths, limits, false);
    let upper = s.run();
    let mut best = s.best;
    shrink_scales(scenario, &mut best);

    let report = check_solution(scenario, paths, &best);
    if !report.is_empty() {
        return Err(IlpError::Infeasible(report.to_string()));
    }
    let value = objective(scenario, &best);
    debug_assert_eq!(value, s.best_value);
    let (status, upper_bound) = if s.aborted {
        let ub = upper.max(value);
        let gap = (ub - value) as f64 / (ub.unsigned_abs().max(1)) as f64;
        (ExactStatus::Bounded { best: value, gap }, ub)
    } else {
        (ExactStatus::Optimal, value)
    };
    Ok(ExactOutcome {
        solution: best,
        objective: value,
        status,
        upper_bound,
        nodes: s.nodes,
    })
}

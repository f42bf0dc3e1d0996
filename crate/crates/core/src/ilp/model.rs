//! Binary integer program for a scenario in link-path form.
//!
//! Path-link usage is data (`incidence * theta`), path latencies are checked
//! before any `theta` variable is created, and an offloaded demand is tied to
//! its anchor through the last OEN on its EEN path.

use std::collections::{BTreeMap, HashMap};

use crate::domain::{Disposition, EaId, NodeKind, PathId, Scenario, Solution};
use crate::pathing::PathSet;
use crate::verifier::ConstraintId;

use super::IlpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    /// OEN switched on.
    On { e: usize },
    /// UPF cluster of `r` replicas on OEN `e`.
    Scale { r: u32, e: usize },
    /// EA type deployed on OEN `e`.
    Ea { ea: EaId, e: usize },
    /// Demand placed on OEN `e`.
    Place { d: usize, e: usize },
    /// Demand offloaded to the EEN.
    Offload { d: usize },
    /// Demand rejected.
    Reject { d: usize },
    /// Demand anchored on OEN `e`.
    Anchor { d: usize, e: usize },
    /// Demand routed over path `path`.
    Route { d: usize, path: PathId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub key: VarKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Model(ConstraintId),
    /// Optional ordering of interchangeable demands.
    Symmetry,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    pub terms: Vec<(usize, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

impl Row {
    pub fn lhs(&self, x: &[bool]) -> i64 {
        self.terms.iter().filter(|(v, _)| x[*v]).map(|(_, c)| c).sum()
    }

    pub fn satisfied(&self, x: &[bool]) -> bool {
        let lhs = self.lhs(x);
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ModelOptions {
    /// Fail when a demand has no latency-feasible path instead of letting
    /// the routing row force its rejection.
    pub strict: bool,
    pub symmetry_rows: bool,
}

/// All variables are binary.
#[derive(Debug, Clone)]
pub struct IlpModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Maximized. Equal to the profit of any assignment meeting the
    /// disposition rows, with `U (1 - F)` written as `U (sum d + T)`.
    pub objective: Vec<(usize, i64)>,
    index: HashMap<VarKey, usize>,
}

fn v_name(scenario: &Scenario, d: usize) -> String {
    let dm = &scenario.demands[d];
    format!("j{}_i{}_l{}", dm.bs, dm.ea, dm.index)
}

struct Builder<'a> {
    scenario: &'a Scenario,
    vars: Vec<Variable>,
    rows: Vec<Row>,
    index: HashMap<VarKey, usize>,
}

impl Builder<'_> {
    fn var(&mut self, key: VarKey, name: String) -> usize {
        let id = self.vars.len();
        self.vars.push(Variable { name, key });
        self.index.insert(key, id);
        id
    }

    fn row(&mut self, kind: RowKind, name: String, terms: Vec<(usize, i64)>, sense: Sense, rhs: i64) {
        self.rows.push(Row {
            name,
            kind,
            terms,
            sense,
            rhs,
        });
    }

    fn get(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    fn demand(&self, d: usize) -> String {
        v_name(self.scenario, d)
    }
}

pub fn build_model(scenario: &Scenario, paths: &PathSet, options: ModelOptions) -> Result<IlpModel, IlpError> {
    use ConstraintId::*;
    let n_oen = scenario.oens.len();
    let n_dem = scenario.demands.len();
    let policy = &scenario.upf_policy;
    let r_max = policy.max_replicas;
    let een = scenario.een();
    let oen_of = scenario.oen_lookup();

    // EA types nobody asks for can never be deployed, so they get no column.
    let mut ea_types: Vec<EaId> = scenario.demands.iter().map(|d| d.ea).collect();
    ea_types.sort();
    ea_types.dedup();

    let mut b = Builder {
        scenario,
        vars: Vec::new(),
        rows: Vec::new(),
        index: HashMap::new(),
    };

    for e in 0..n_oen {
        b.var(VarKey::On { e }, format!("z_e{e}"));
    }
    for e in 0..n_oen {
        for r in 1..=r_max {
            b.var(VarKey::Scale { r, e }, format!("w_r{r}_e{e}"));
        }
    }
    for e in 0..n_oen {
        for &ea in &ea_types {
            b.var(VarKey::Ea { ea, e }, format!("x_i{ea}_e{e}"));
        }
    }

    // Candidate routes per demand: matching source, within the delay budget.
    let mut candidates: Vec<Vec<PathId>> = Vec::with_capacity(n_dem);
    for (d, dm) in scenario.demands.iter().enumerate() {
        let mut list = Vec::new();
        for (&(src, _), ids) in paths.groups() {
            if src != dm.bs {
                continue;
            }
            list.extend(
                ids.iter()
                    .copied()
                    .filter(|p| paths.paths()[p.index()].total_latency <= dm.delay_budget),
            );
        }
        list.sort();
        if list.is_empty() && options.strict {
            return Err(IlpError::NoCandidatePath { demand: d });
        }
        candidates.push(list);
    }

    for d in 0..n_dem {
        let name = b.demand(d);
        for e in 0..n_oen {
            b.var(VarKey::Place { d, e }, format!("d_{name}_e{e}"));
        }
        b.var(VarKey::Offload { d }, format!("t_{name}"));
        b.var(VarKey::Reject { d }, format!("f_{name}"));
        for e in 0..n_oen {
            b.var(VarKey::Anchor { d, e }, format!("a_{name}_e{e}"));
        }
        for &path in &candidates[d] {
            b.var(VarKey::Route { d, path }, format!("th_{name}_n{path}"));
        }
    }

    let on = |b: &Builder, e| b.get(VarKey::On { e }).unwrap();
    let scale = |b: &Builder, r, e| b.get(VarKey::Scale { r, e }).unwrap();
    let place = |b: &Builder, d, e| b.get(VarKey::Place { d, e }).unwrap();
    let anchor = |b: &Builder, d, e| b.get(VarKey::Anchor { d, e }).unwrap();
    let offload = |b: &Builder, d| b.get(VarKey::Offload { d }).unwrap();
    let reject = |b: &Builder, d| b.get(VarKey::Reject { d }).unwrap();
    let route = |b: &Builder, d, path| b.get(VarKey::Route { d, path }).unwrap();

    for (e, oen) in scenario.oens.iter().enumerate() {
        let mut cpu = Vec::new();
        for r in 1..=r_max {
            cpu.push((scale(&b, r, e), policy.cpu(r) as i64));
        }
        let mut storage = Vec::new();
        for &ea in &ea_types {
            let t = scenario.ea(ea).expect("validated scenario");
            let x = b.get(VarKey::Ea { ea, e }).unwrap();
            cpu.push((x, t.idle_cpu as i64));
            storage.push((x, t.storage_req as i64));
        }
        for (d, dm) in scenario.demands.iter().enumerate() {
            cpu.push((place(&b, d, e), dm.cpu_req as i64));
        }
        b.row(
            RowKind::Model(C2),
            format!("c2_e{e}"),
            cpu,
            Sense::Le,
            oen.cpu_capacity as i64,
        );
        b.row(
            RowKind::Model(C3),
            format!("c3_e{e}"),
            storage,
            Sense::Le,
            oen.storage_capacity as i64,
        );

        let z = on(&b, e);
        for &ea in &ea_types {
            let x = b.get(VarKey::Ea { ea, e }).unwrap();
            b.row(
                RowKind::Model(C4),
                format!("c4_i{ea}_e{e}"),
                vec![(x, 1), (z, -1)],
                Sense::Le,
                0,
            );
        }
        for r in 1..=r_max {
            let w = scale(&b, r, e);
            b.row(
                RowKind::Model(C5),
                format!("c5_r{r}_e{e}"),
                vec![(w, 1), (z, -1)],
                Sense::Le,
                0,
            );
        }
        let ws: Vec<(usize, i64)> = (1..=r_max).map(|r| (scale(&b, r, e), 1)).collect();
        b.row(RowKind::Model(C6), format!("c6_e{e}"), ws.clone(), Sense::Le, 1);

        for &ea in &ea_types {
            let x = b.get(VarKey::Ea { ea, e }).unwrap();
            let mut terms = vec![(x, 1)];
            for (d, dm) in scenario.demands.iter().enumerate() {
                if dm.ea == ea {
                    terms.push((place(&b, d, e), -1));
                }
            }
            b.row(RowKind::Model(C8), format!("c8_i{ea}_e{e}"), terms, Sense::Le, 0);
        }

        let mut terms = ws.clone();
        for d in 0..n_dem {
            terms.push((anchor(&b, d, e), -1));
        }
        b.row(RowKind::Model(C13), format!("c13_e{e}"), terms, Sense::Le, 0);

        let mut terms: Vec<(usize, i64)> = scenario
            .demands
            .iter()
            .enumerate()
            .map(|(d, dm)| (anchor(&b, d, e), dm.bw_req as i64))
            .collect();
        for r in 1..=r_max {
            terms.push((scale(&b, r, e), -(policy.bw(r) as i64)));
        }
        b.row(RowKind::Model(C17), format!("c17_e{e}"), terms, Sense::Le, 0);
    }

    for (d, dm) in scenario.demands.iter().enumerate() {
        let name = b.demand(d);
        let (t, f) = (offload(&b, d), reject(&b, d));

        for e in 0..n_oen {
            let x = b.get(VarKey::Ea { ea: dm.ea, e }).unwrap();
            b.row(
                RowKind::Model(C7),
                format!("c7_{name}_e{e}"),
                vec![(place(&b, d, e), 1), (x, -1)],
                Sense::Le,
                0,
            );
        }

        let mut terms: Vec<(usize, i64)> = (0..n_oen).map(|e| (place(&b, d, e), 1)).collect();
        terms.push((t, 1));
        terms.push((f, 1));
        b.row(RowKind::Model(C9), format!("c9_{name}"), terms, Sense::Eq, 1);

        let mut terms: Vec<(usize, i64)> = (0..n_oen).map(|e| (anchor(&b, d, e), 1)).collect();
        terms.push((f, 1));
        b.row(RowKind::Model(C10), format!("c10_{name}"), terms, Sense::Eq, 1);

        // Routes grouped by where they end and, for EEN routes, which OEN
        // they leave last.
        let mut to_oen: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut via_oen: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut to_een = Vec::new();
        for &path in &candidates[d] {
            let p = &paths.paths()[path.index()];
            let th = route(&b, d, path);
            if p.destination == een {
                to_een.push(th);
                if let Some(&e) = p.last_hop_oen.and_then(|n| oen_of.get(&n)) {
                    via_oen.entry(e).or_default().push(th);
                }
            } else if let Some(&e) = oen_of.get(&p.destination) {
                to_oen.entry(e).or_default().push(th);
            }
        }

        for e in 0..n_oen {
            let mut terms = vec![(anchor(&b, d, e), 1), (place(&b, d, e), -1)];
            terms.extend(via_oen.get(&e).into_iter().flatten().map(|&th| (th, -1)));
            b.row(RowKind::Model(C11), format!("c11_{name}_e{e}"), terms, Sense::Eq, 0);

            let mut terms = vec![(anchor(&b, d, e), 1)];
            terms.extend((1..=r_max).map(|r| (scale(&b, r, e), -1)));
            b.row(RowKind::Model(C12), format!("c12_{name}_e{e}"), terms, Sense::Le, 0);
        }

        let mut terms: Vec<(usize, i64)> = candidates[d].iter().map(|&p| (route(&b, d, p), 1)).collect();
        terms.push((f, 1));
        b.row(RowKind::Model(C14), format!("c14_{name}"), terms, Sense::Eq, 1);
        for e in 0..n_oen {
            let mut terms: Vec<(usize, i64)> = to_oen.get(&e).into_iter().flatten().map(|&th| (th, 1)).collect();
            terms.push((place(&b, d, e), -1));
            b.row(
                RowKind::Model(C14),
                format!("c14_{name}_dest_e{e}"),
                terms,
                Sense::Eq,
                0,
            );
        }
        let mut terms: Vec<(usize, i64)> = to_een.iter().map(|&th| (th, 1)).collect();
        terms.push((t, -1));
        b.row(RowKind::Model(C14), format!("c14_{name}_dest_een"), terms, Sense::Eq, 0);
    }

    let mut link_terms: Vec<Vec<(usize, i64)>> = vec![Vec::new(); scenario.topology.links.len()];
    for (d, dm) in scenario.demands.iter().enumerate() {
        for &path in &candidates[d] {
            let th = route(&b, d, path);
            for l in &paths.paths()[path.index()].links {
                link_terms[l.index()].push((th, dm.bw_req as i64));
            }
        }
    }
    for (l, terms) in link_terms.into_iter().enumerate() {
        if terms.is_empty() {
            continue;
        }
        let cap = scenario.topology.links[l].bandwidth_mbps as i64;
        b.row(RowKind::Model(C18), format!("c18_v{l}"), terms, Sense::Le, cap);
    }

    if options.symmetry_rows {
        for (a, da) in scenario.demands.iter().enumerate() {
            let twin = scenario
                .demands
                .iter()
                .enumerate()
                .skip(a + 1)
                .find(|(_, db)| db.bs == da.bs && da.same_attributes(db));
            if let Some((bi, _)) = twin {
                let name = format!("sym_{}_{}", b.demand(a), b.demand(bi));
                b.row(
                    RowKind::Symmetry,
                    name,
                    vec![(reject(&b, a), 1), (reject(&b, bi), -1)],
                    Sense::Le,
                    0,
                );
            }
        }
    }

    let mut objective = Vec::new();
    for e in 0..n_oen {
        objective.push((on(&b, e), -scenario.oens[e].on_cost));
    }
    for (d, dm) in scenario.demands.iter().enumerate() {
        for e in 0..n_oen {
            objective.push((place(&b, d, e), dm.utility));
        }
        objective.push((offload(&b, d), dm.utility - dm.offload_cost));
    }

    debug_assert!(scenario.topology.kind(een) == Some(NodeKind::Een));
    Ok(IlpModel {
        vars: b.vars,
        rows: b.rows,
        objective,
        index: b.index,
    })
}

impl IlpModel {
    pub fn var(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, x: &[bool]) -> i64 {
        self.objective.iter().filter(|(v, _)| x[*v]).map(|(_, c)| c).sum()
    }

    /// Indices of the rows `x` violates.
    pub fn violated_rows(&self, x: &[bool]) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| !self.rows[i].satisfied(x)).collect()
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        self.rows.iter().all(|r| r.satisfied(x))
    }

    /// Writes `solution` as a 0/1 assignment. Returns `None` when the
    /// solution uses something the model has no column for (a route outside
    /// the candidate set, an unknown entity, a scale above the maximum); such
    /// a solution cannot satisfy the model.
    pub fn encode(&self, scenario: &Scenario, solution: &Solution) -> Option<Vec<bool>> {
        let n_oen = scenario.oens.len();
        let n_dem = scenario.demands.len();
        if solution.oen_on.len() != n_oen
            || solution.upf_scale.len() != n_oen
            || solution.ea_deployed.len() != n_oen
            || solution.disposition.len() != n_dem
            || solution.anchor.len() != n_dem
            || solution.route.len() != n_dem
        {
            return None;
        }
        let mut x = vec![false; self.vars.len()];
        let mut set = |key: VarKey| -> Option<()> {
            x[self.var(key)?] = true;
            Some(())
        };
        for e in 0..n_oen {
            if solution.oen_on[e] {
                set(VarKey::On { e })?;
            }
            let r = solution.upf_scale[e];
            if r > 0 {
                set(VarKey::Scale { r, e })?;
            }
            for &ea in &solution.ea_deployed[e] {
                set(VarKey::Ea { ea, e })?;
            }
        }
        for d in 0..n_dem {
            match solution.disposition[d] {
                Disposition::Placed(e) => set(VarKey::Place { d, e })?,
                Disposition::Offloaded => set(VarKey::Offload { d })?,
                Disposition::Rejected => set(VarKey::Reject { d })?,
            }
            if let Some(e) = solution.anchor[d] {
                set(VarKey::Anchor { d, e })?;
            }
            if let Some(path) = solution.route[d] {
                set(VarKey::Route { d, path })?;
            }
        }
        Some(x)
    }
}

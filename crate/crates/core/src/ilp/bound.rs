//! Upper bounds for the branch-and-bound search.
//!
//! Every bound is a knapsack over the undecided demands, solved exactly by
//! dynamic programming over suffixes of the branching order, so a node's
//! bound is a table lookup. Demands are branched grouped by EA type, which
//! lets the tables charge an EA's idle CPU when its group first places a
//! demand.

use crate::domain::{EaId, Scenario};
use crate::pathing::Candidates;
use crate::state::NetworkState;

/// Most DP cells kept by one table.
const MAX_CELLS: usize = 1 << 24;

pub(super) fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Lowest CPU per unit of bandwidth over all cluster sizes, as `num / den`.
/// Any cluster covering `b` Mbps reserves at least `b * num / den` CPU.
pub(super) fn upf_rate(scenario: &Scenario) -> (u128, u128) {
    let policy = &scenario.upf_policy;
    let mut best = (u128::from(policy.cpu(1)), u128::from(policy.bw(1)));
    for r in 2..=policy.max_replicas {
        let (c, b) = (u128::from(policy.cpu(r)), u128::from(policy.bw(r)));
        if c * best.1 < best.0 * b {
            best = (c, b);
        }
    }
    let g = gcd(best.0, best.1).max(1);
    (best.0 / g, best.1 / g)
}

/// Quantum and table width for capacities up to `total`, given item sizes
/// with common divisor `g` and a cell budget per capacity column.
fn grid(total: u128, g: u128, columns: usize) -> (u128, usize) {
    let max_width = ((MAX_CELLS >> 2) / columns.max(1)).max(2) as u128;
    let mut quantum = g.max(1);
    if total / quantum + 1 > max_width {
        quantum = total.div_ceil(max_width - 1);
    }
    (quantum, (total / quantum + 1) as usize)
}

fn group_ends(scenario: &Scenario, order: &[usize], k: usize) -> bool {
    k + 1 == order.len() || scenario.demands[order[k + 1]].ea != scenario.demands[order[k]].ea
}

fn quanta(capacity: u128, quantum: u128, width: usize) -> usize {
    ((capacity / quantum) as usize).min(width - 1)
}

/// Bound for a search where UPF clusters grow with the anchored traffic.
///
/// Each OEN contributes its free CPU minus the cheapest possible UPF cost of
/// the bandwidth already anchored there, and every demand is charged its own
/// CPU plus that same cheapest UPF cost of its bandwidth. Evaluated for every
/// set of OENs that could end up on when there are few OENs.
pub(super) struct GrowingBound {
    num: u128,
    den: u128,
    quantum: u128,
    width: usize,
    /// `fresh[mask][k * width + c]`: best value of `order[k..]` with `c`
    /// quanta when the EA of `order[k]` is not deployed yet.
    fresh: Vec<Vec<i64>>,
    /// Same, with that EA already deployed somewhere.
    paid: Vec<Vec<i64>>,
    masked: bool,
}

/// OEN count up to which [`GrowingBound`] is split by candidate ON set.
const MAX_MASK_OENS: usize = 4;

impl GrowingBound {
    pub(super) fn new(scenario: &Scenario, cand: &Candidates, order: &[usize]) -> Self {
        let (num, den) = upf_rate(scenario);
        let n_oen = scenario.oens.len();
        let masked = n_oen <= MAX_MASK_OENS;
        let n_masks = if masked { 1usize << n_oen } else { 1 };
        let n = order.len();

        let place_size = |d: usize| {
            let dm = &scenario.demands[d];
            u128::from(dm.cpu_req) * den + u128::from(dm.bw_req) * num
        };
        let offload_size = |d: usize| u128::from(scenario.demands[d].bw_req) * num;
        let idle_size = |d: usize| {
            let ea = scenario.ea(scenario.demands[d].ea).expect("validated scenario");
            u128::from(ea.idle_cpu) * den
        };

        let mut g = 0u128;
        for &d in order {
            g = gcd(g, place_size(d));
            g = gcd(g, offload_size(d));
            g = gcd(g, idle_size(d));
        }
        let total: u128 = scenario.oens.iter().map(|o| u128::from(o.cpu_capacity) * den).sum();
        let used_masks = if masked { n_masks - 1 } else { 1 };
        let (quantum, width) = grid(total, g, 2 * used_masks * (n + 1));

        let mut fresh = vec![Vec::new(); n_masks];
        let mut paid = vec![Vec::new(); n_masks];
        for mask in 0..n_masks {
            if masked && mask == 0 {
                continue;
            }
            let in_mask = |e: usize| !masked || mask & (1 << e) != 0;
            let mut f = vec![0i64; (n + 1) * width];
            let mut p = vec![0i64; (n + 1) * width];
            for k in (0..n).rev() {
                let d = order[k];
                let dm = &scenario.demands[d];
                let placeable = dm.utility > 0 && (0..n_oen).any(|e| in_mask(e) && !cand.place[d][e].is_empty());
                let offloadable =
                    dm.offload_margin() > 0 && (0..n_oen).any(|e| in_mask(e) && !cand.offload[d][e].is_empty());
                let sp = (place_size(d) / quantum) as usize;
                let spi = ((place_size(d) + idle_size(d)) / quantum) as usize;
                let so = (offload_size(d) / quantum) as usize;
                let next = (k + 1) * width;
                // The next group starts with its EA undeployed.
                let (next_f, next_p) = if group_ends(scenario, order, k) {
                    let row = f[next..next + width].to_vec();
                    (row.clone(), row)
                } else {
                    (f[next..next + width].to_vec(), p[next..next + width].to_vec())
                };
                for c in 0..width {
                    let mut vf = next_f[c];
                    let mut vp = next_p[c];
                    if placeable {
                        if spi <= c {
                            vf = vf.max(dm.utility + next_p[c - spi]);
                        }
                        if sp <= c {
                            vp = vp.max(dm.utility + next_p[c - sp]);
                        }
                    }
                    if offloadable && so <= c {
                        vf = vf.max(dm.offload_margin() + next_f[c - so]);
                        vp = vp.max(dm.offload_margin() + next_p[c - so]);
                    }
                    f[k * width + c] = vf;
                    p[k * width + c] = vp;
                }
            }
            fresh[mask] = f;
            paid[mask] = p;
        }
        GrowingBound {
            num,
            den,
            quantum,
            width,
            fresh,
            paid,
            masked,
        }
    }

    fn capacity(&self, state: &NetworkState<'_>, e: usize) -> u128 {
        let st = &state.oens[e];
        let policy = &state.scenario.upf_policy;
        let non_upf = st.cpu_used - policy.cpu(st.upf_scale);
        let free = u128::from(state.scenario.oens[e].cpu_capacity - non_upf) * self.den;
        free.saturating_sub(u128::from(st.anchored_bw) * self.num)
    }

    fn lookup(&self, paid: bool, mask: usize, k: usize, capacity: u128) -> i64 {
        let table = if paid { &self.paid[mask] } else { &self.fresh[mask] };
        table[k * self.width + quanta(capacity, self.quantum, self.width)]
    }

    /// Bound on the final profit of any completion of the node at depth `k`.
    /// `paid` tells whether the EA of `order[k]` is deployed on some OEN.
    pub(super) fn at(&self, state: &NetworkState<'_>, k: usize, committed: i64, paid: bool) -> i64 {
        let scenario = state.scenario;
        let n_oen = scenario.oens.len();
        let on_mask = (0..n_oen)
            .filter(|&e| state.oens[e].is_on())
            .fold(0usize, |m, e| m | 1 << e);
        if !self.masked {
            let on_cost: i64 = (0..n_oen)
                .filter(|&e| on_mask & (1 << e) != 0)
                .map(|e| scenario.oens[e].on_cost)
                .sum();
            let cap = (0..n_oen).map(|e| self.capacity(state, e)).sum();
            return committed - on_cost + self.lookup(paid, 0, k, cap);
        }
        let caps: Vec<u128> = (0..n_oen).map(|e| self.capacity(state, e)).collect();
        let mut best = if on_mask == 0 { committed } else { i64::MIN };
        for mask in 1..(1usize << n_oen) {
            if mask & on_mask != on_mask {
                continue;
            }
            let mut cap = 0u128;
            let mut cost = 0i64;
            for e in 0..n_oen {
                if mask & (1 << e) != 0 {
                    cap += caps[e];
                    cost += scenario.oens[e].on_cost;
                }
            }
            best = best.max(committed - cost + self.lookup(paid, mask, k, cap));
        }
        best
    }
}

/// Bound for a search where every OEN's final UPF scale is fixed up front.
///
/// With the cluster sizes known, CPU and UPF bandwidth are two separate
/// knapsacks; the bound is the smaller of the two optima. When at most two
/// OENs are on each keeps its own capacity, otherwise their capacities are
/// pooled. The CPU tables track on which OENs the current group's EA is
/// already deployed, so its idle CPU is charged once per hosting OEN.
pub(super) struct FixedScaleBound {
    n_oen: usize,
    rows: usize,
    /// Indexed by ON mask; empty for the all-off mask.
    cpu: Vec<Table>,
    bw: Vec<Table>,
}

/// OEN count up to which the search fixes UPF scales up front.
pub(super) const MAX_FIXED_SCALE_OENS: usize = 3;
/// ON OENs up to which each OEN keeps its own capacity dimension.
const MAX_SPLIT_OENS: usize = 2;

/// One option in a table row: dimension stride and extent, size in quanta,
/// value, and the deployment set it leads to.
type Move = (usize, usize, usize, i32, usize);

/// Suffix knapsack over a grid of capacity dimensions, optionally tracking
/// on which OENs the current EA group is deployed.
#[derive(Default)]
struct Table {
    quantum: u128,
    /// Dimension of each OEN; `None` when the OEN is off.
    dim: Vec<Option<usize>>,
    extent: Vec<usize>,
    stride: Vec<usize>,
    cells: usize,
    sets: usize,
    rows: usize,
    /// `values[(set * rows + k) * cells + cell]`.
    values: Vec<i32>,
}

impl Table {
    fn layout(mask: usize, n_oen: usize, capacity: impl Fn(usize) -> u128, g: u128, sets: usize, rows: usize) -> Table {
        let on: Vec<usize> = (0..n_oen).filter(|&e| mask & (1 << e) != 0).collect();
        let split = on.len() <= MAX_SPLIT_OENS;
        let mut dim = vec![None; n_oen];
        let mut caps = Vec::new();
        for (i, &e) in on.iter().enumerate() {
            if split {
                dim[e] = Some(i);
                caps.push(capacity(e));
            } else {
                dim[e] = Some(0);
                if caps.is_empty() {
                    caps.push(0);
                }
                caps[0] += capacity(e);
            }
        }
        let budget = (MAX_CELLS / (sets * rows)).max(2) as u128;
        let mut quantum = g.max(1);
        let count = |q: u128| caps.iter().map(|&c| c / q + 1).product::<u128>();
        while count(quantum) > budget {
            quantum *= 2;
        }
        let extent: Vec<usize> = caps.iter().map(|&c| (c / quantum + 1) as usize).collect();
        let mut stride = vec![1; extent.len()];
        for i in 1..extent.len() {
            stride[i] = stride[i - 1] * extent[i - 1];
        }
        Table {
            quantum,
            dim,
            cells: extent.iter().product(),
            extent,
            stride,
            sets,
            rows,
            values: Vec::new(),
        }
    }

    fn cell(&self, free: &[u128]) -> usize {
        let mut per_dim = [0u128; MAX_FIXED_SCALE_OENS];
        for (e, &f) in free.iter().enumerate() {
            if let Some(dim) = self.dim[e] {
                per_dim[dim] += f;
            }
        }
        (0..self.extent.len())
            .map(|i| ((per_dim[i] / self.quantum) as usize).min(self.extent[i] - 1) * self.stride[i])
            .sum()
    }

    fn get(&self, set: usize, k: usize, free: &[u128]) -> i64 {
        let set = if self.sets == 1 { 0 } else { set };
        i64::from(self.values[(set * self.rows + k) * self.cells + self.cell(free)])
    }

    /// Fills the suffix tables. `place(k, e, fresh)` is the size and value
    /// of placing `order[k]` on OEN `e` and `offload(k, e)` those of
    /// offloading it through `e`. `None` or a value of zero or less rules the
    /// option out.
    fn fill(
        &mut self,
        order: &[usize],
        ends: impl Fn(usize) -> bool,
        place: impl Fn(usize, usize, bool) -> Option<(u128, i32)>,
        offload: impl Fn(usize, usize) -> Option<(u128, i32)>,
    ) {
        let n_oen = self.dim.len();
        let (cells, rows, sets) = (self.cells, self.rows, self.sets);
        self.values = vec![0; sets * rows * cells];
        let at = |set: usize, k: usize| (set * rows + k) * cells;
        let units = |size: u128| (size / self.quantum) as usize;
        for k in (0..order.len()).rev() {
            let ends = ends(k);
            let next = |s: usize| if ends || sets == 1 { at(0, k + 1) } else { at(s, k + 1) };
            let mut options: Vec<Vec<Move>> = vec![Vec::new(); sets];
            for (set, opts) in options.iter_mut().enumerate() {
                for e in 0..n_oen {
                    let Some(dim) = self.dim[e] else { continue };
                    let (stride, extent) = (self.stride[dim], self.extent[dim]);
                    if let Some((size, value)) = offload(k, e).filter(|o| o.1 > 0) {
                        opts.push((stride, extent, units(size), value, set));
                    }
                    let fresh = set & (1 << e) == 0;
                    if let Some((size, value)) = place(k, e, fresh).filter(|o| o.1 > 0) {
                        let after = if sets == 1 { 0 } else { set | 1 << e };
                        opts.push((stride, extent, units(size), value, after));
                    }
                }
            }
            for (set, opts) in options.iter().enumerate() {
                for c in 0..cells {
                    let mut v = self.values[next(set) + c];
                    for &(stride, extent, size, value, after) in opts {
                        if size <= c / stride % extent {
                            v = v.max(value + self.values[next(after) + c - size * stride]);
                        }
                    }
                    self.values[at(set, k) + c] = v;
                }
            }
        }
    }
}

/// Which OENs each demand of `order` can be placed on and offloaded through.
struct Reach {
    place: Vec<Vec<bool>>,
    offload: Vec<Vec<bool>>,
}

impl Reach {
    fn new(cand: &Candidates, order: &[usize], n_oen: usize) -> Self {
        Reach {
            place: order
                .iter()
                .map(|&d| (0..n_oen).map(|e| !cand.place[d][e].is_empty()).collect())
                .collect(),
            offload: order
                .iter()
                .map(|&d| (0..n_oen).map(|e| !cand.offload[d][e].is_empty()).collect())
                .collect(),
        }
    }
}

fn idle_cpu(scenario: &Scenario, d: usize) -> u128 {
    u128::from(
        scenario
            .ea(scenario.demands[d].ea)
            .expect("validated scenario")
            .idle_cpu,
    )
}

fn on_mask(scales: &[u32]) -> usize {
    scales
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0)
        .fold(0usize, |m, (e, _)| m | 1 << e)
}

fn mask_cost(scenario: &Scenario, mask: usize) -> i64 {
    (0..scenario.oens.len())
        .filter(|&e| mask & (1 << e) != 0)
        .map(|e| scenario.oens[e].on_cost)
        .sum()
}

/// Free CPU and UPF bandwidth of every OEN, and the deployment set of `ea`.
fn residuals(state: &NetworkState<'_>, mask: usize, ea: Option<EaId>) -> ([u128; 3], [u128; 3], usize) {
    let policy = &state.scenario.upf_policy;
    let mut cpu = [0u128; MAX_FIXED_SCALE_OENS];
    let mut bw = [0u128; MAX_FIXED_SCALE_OENS];
    let mut deployed = 0usize;
    for e in 0..state.oens.len() {
        if mask & (1 << e) == 0 {
            continue;
        }
        let st = &state.oens[e];
        cpu[e] = state.cpu_free(e).max(0) as u128;
        bw[e] = u128::from(policy.bw(st.upf_scale).saturating_sub(st.anchored_bw));
        if ea.is_some_and(|ea| st.ea_deployed(ea)) {
            deployed |= 1 << e;
        }
    }
    (cpu, bw, deployed)
}

impl FixedScaleBound {
    pub(super) fn new(scenario: &Scenario, cand: &Candidates, order: &[usize]) -> Self {
        let n_oen = scenario.oens.len();
        let n_sets = 1usize << n_oen;
        let rows = order.len() + 1;
        let policy = &scenario.upf_policy;
        let reach = Reach::new(cand, order, n_oen);
        let ends = |k: usize| group_ends(scenario, order, k);

        let mut g = 0u128;
        let mut g_bw = 0u128;
        for &d in order {
            g = gcd(g, u128::from(scenario.demands[d].cpu_req));
            g = gcd(g, idle_cpu(scenario, d));
            g_bw = gcd(g_bw, u128::from(scenario.demands[d].bw_req));
        }
        let oen_cpu = |e: usize| u128::from(scenario.oens[e].cpu_capacity);
        // No cluster needs more bandwidth than its reachable demands ask for.
        let oen_bw = |e: usize| {
            let reachable: u128 = order
                .iter()
                .enumerate()
                .filter(|&(k, _)| reach.place[k][e] || reach.offload[k][e])
                .map(|(_, &d)| u128::from(scenario.demands[d].bw_req))
                .sum();
            reachable.min(u128::from(policy.bw(policy.max_replicas)))
        };

        let mut cpu = vec![Table::default()];
        let mut bw = vec![Table::default()];
        for mask in 1..(1usize << n_oen) {
            let mut t = Table::layout(mask, n_oen, oen_cpu, g, n_sets, rows);
            t.fill(
                order,
                ends,
                |k, e, fresh| {
                    let dm = &scenario.demands[order[k]];
                    let idle = if fresh { idle_cpu(scenario, order[k]) } else { 0 };
                    reach.place[k][e].then(|| (u128::from(dm.cpu_req) + idle, dm.utility as i32))
                },
                |k, e| reach.offload[k][e].then(|| (0, scenario.demands[order[k]].offload_margin() as i32)),
            );
            cpu.push(t);

            let mut t = Table::layout(mask, n_oen, oen_bw, g_bw, 1, rows);
            let size = |k: usize| u128::from(scenario.demands[order[k]].bw_req);
            t.fill(
                order,
                ends,
                |k, e, _| reach.place[k][e].then(|| (size(k), scenario.demands[order[k]].utility as i32)),
                |k, e| reach.offload[k][e].then(|| (size(k), scenario.demands[order[k]].offload_margin() as i32)),
            );
            bw.push(t);
        }
        FixedScaleBound { n_oen, rows, cpu, bw }
    }

    /// Bound for a configuration before any demand is decided.
    pub(super) fn root(&self, scenario: &Scenario, scales: &[u32]) -> i64 {
        let policy = &scenario.upf_policy;
        let mask = on_mask(scales);
        if mask == 0 {
            return 0;
        }
        let mut cpu = vec![0u128; self.n_oen];
        let mut bw = vec![0u128; self.n_oen];
        for (e, &r) in scales.iter().enumerate() {
            if r > 0 {
                cpu[e] = u128::from(scenario.oens[e].cpu_capacity - policy.cpu(r));
                bw[e] = u128::from(policy.bw(r));
            }
        }
        let by_cpu = self.cpu[mask].get(0, 0, &cpu);
        let by_bw = self.bw[mask].get(0, 0, &bw);
        by_cpu.min(by_bw) - mask_cost(scenario, mask)
    }

    /// Bound at depth `k` for the configuration whose ON OENs are `mask`,
    /// charging every OEN of `mask` its switch-on cost. `ea` is the EA type
    /// of the demand at depth `k`.
    pub(super) fn at(&self, state: &NetworkState<'_>, mask: usize, k: usize, ea: Option<EaId>, committed: i64) -> i64 {
        if mask == 0 {
            return committed;
        }
        let (cpu, bw, deployed) = residuals(state, mask, ea);
        let n = self.n_oen;
        let by_cpu = self.cpu[mask].get(deployed, k, &cpu[..n]);
        let by_bw = self.bw[mask].get(0, k, &bw[..n]);
        debug_assert!(self.rows > k);
        committed - mask_cost(state.scenario, mask) + by_cpu.min(by_bw)
    }
}

/// Profit units per price unit of the Lagrangian tables.
const PRICE_SCALE: i64 = 1000;

/// Bound for one fixed scale assignment that moves each OEN's UPF bandwidth
/// limit into the objective at a price per Mbps, leaving an exact CPU
/// knapsack in which a demand's value depends on where it is anchored.
/// Valid for any non-negative prices.
pub(super) struct PricedBound {
    mask: usize,
    /// Price per Mbps on each OEN, in thousandths of a profit unit.
    price: Vec<i64>,
    table: Table,
}

impl PricedBound {
    pub(super) fn new(
        scenario: &Scenario,
        cand: &Candidates,
        order: &[usize],
        scales: &[u32],
        price: Vec<i64>,
    ) -> Self {
        let n_oen = scenario.oens.len();
        let policy = &scenario.upf_policy;
        let reach = Reach::new(cand, order, n_oen);
        let mask = on_mask(scales);
        let mut g = 0u128;
        for &d in order {
            g = gcd(g, u128::from(scenario.demands[d].cpu_req));
            g = gcd(g, idle_cpu(scenario, d));
        }
        let capacity = |e: usize| u128::from(scenario.oens[e].cpu_capacity - policy.cpu(scales[e]));
        let mut table = Table::layout(mask, n_oen, capacity, g, 1usize << n_oen, order.len() + 1);
        let charge = |k: usize, e: usize, value: i64| {
            let dm = &scenario.demands[order[k]];
            (value * PRICE_SCALE - price[e] * dm.bw_req as i64) as i32
        };
        table.fill(
            order,
            |k| group_ends(scenario, order, k),
            |k, e, fresh| {
                let dm = &scenario.demands[order[k]];
                let idle = if fresh { idle_cpu(scenario, order[k]) } else { 0 };
                (reach.place[k][e] && dm.utility > 0).then(|| (u128::from(dm.cpu_req) + idle, charge(k, e, dm.utility)))
            },
            |k, e| {
                let dm = &scenario.demands[order[k]];
                (reach.offload[k][e] && dm.offload_margin() > 0).then(|| (0, charge(k, e, dm.offload_margin())))
            },
        );
        PricedBound { mask, price, table }
    }

    pub(super) fn at(&self, state: &NetworkState<'_>, k: usize, ea: Option<EaId>, committed: i64) -> i64 {
        let (cpu, bw, deployed) = residuals(state, self.mask, ea);
        let n = self.price.len();
        let paid: i64 = (0..n).map(|e| self.price[e] * bw[e] as i64).sum();
        let priced = self.table.get(deployed, k, &cpu[..n]) + paid;
        // Round down: profits are integers.
        committed - mask_cost(state.scenario, self.mask) + priced.div_euclid(PRICE_SCALE)
    }
}

impl PricedBound {
    /// Bound for the configuration before any demand is decided.
    pub(super) fn root(&self, scenario: &Scenario, scales: &[u32]) -> i64 {
        let policy = &scenario.upf_policy;
        let n = self.price.len();
        let mut cpu = [0u128; MAX_FIXED_SCALE_OENS];
        let mut paid = 0;
        for e in 0..n {
            if scales[e] > 0 {
                cpu[e] = u128::from(scenario.oens[e].cpu_capacity - policy.cpu(scales[e]));
                paid += self.price[e] * policy.bw(scales[e]) as i64;
            }
        }
        let priced = self.table.get(0, 0, &cpu[..n]) + paid;
        priced.div_euclid(PRICE_SCALE) - mask_cost(scenario, self.mask)
    }
}

/// Prices that make [`PricedBound`] small at the root of a configuration,
/// found by coordinate descent with shrinking steps, and the root bound they
/// give.
pub(super) fn tune_prices(scenario: &Scenario, cand: &Candidates, order: &[usize], scales: &[u32]) -> (Vec<i64>, i64) {
    let n_oen = scenario.oens.len();
    let eval = |price: &[i64]| PricedBound::new(scenario, cand, order, scales, price.to_vec()).root(scenario, scales);
    let mut price = vec![0i64; n_oen];
    let mut best = eval(&price);
    let mut step = PRICE_SCALE / 2;
    while step >= PRICE_SCALE / 16 {
        let mut improved = true;
        while improved {
            improved = false;
            for e in (0..n_oen).filter(|&e| scales[e] > 0) {
                for delta in [step, -step] {
                    let mut trial = price.clone();
                    trial[e] += delta;
                    if trial[e] < 0 {
                        continue;
                    }
                    let v = eval(&trial);
                    if v < best {
                        best = v;
                        price = trial;
                        improved = true;
                        break;
                    }
                }
            }
        }
        step /= 2;
    }
    (price, best)
}

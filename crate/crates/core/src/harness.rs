//! Experiment driver: sweeps over (topology, load, seed, algorithm), metrics,
//! persisted runs and aggregate reports.
//!
//! A sweep directory holds `metrics.csv`, `summary.csv`, `runs.csv` and the
//! scenario and solution files of every run under `scenarios/` and
//! `solutions/`, named by the SHA-256 of their contents. `runs.csv` is enough
//! to recompute every metric without solving again.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{run_greedy, run_topk};
use crate::domain::{Disposition, FormatError, Scenario, Solution};
use crate::ilp::{solve_exact, ExactLimits, IlpError};
use crate::pathing::{enumerate_paths, PathError, PathSet};
use crate::rangr::run_rangr;
use crate::scenario::{make_scenario, PresetSize};
use crate::verifier::{check_solution, objective};

pub const METRICS_HEADER: [&str; 12] = [
    "topology",
    "load_pct",
    "seed",
    "algorithm",
    "profit",
    "cpu_util",
    "placed",
    "offloaded",
    "rejected",
    "oens_on",
    "upf_replicas",
    "runtime_ms",
];

const RUNS_HEADER: [&str; 9] = [
    "topology",
    "load_pct",
    "seed",
    "algorithm",
    "status",
    "upper_bound",
    "runtime_ms",
    "scenario",
    "solution",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rangr,
    Greedy,
    Topk,
    Exact,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rangr => "rangr",
            Algorithm::Greedy => "greedy",
            Algorithm::Topk => "topk",
            Algorithm::Exact => "exact",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rangr" => Ok(Algorithm::Rangr),
            "greedy" => Ok(Algorithm::Greedy),
            "topk" => Ok(Algorithm::Topk),
            "exact" => Ok(Algorithm::Exact),
            other => Err(format!("unknown algorithm '{other}' (rangr|greedy|topk|exact)")),
        }
    }
}

/// Seeds as an explicit list or an inclusive range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { from: u64, to: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { from, to } => (*from..=*to).collect(),
        }
    }
}

/// Sweep definition, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topologies: Vec<String>,
    pub loads: Vec<u32>,
    pub seeds: SeedSpec,
    pub algorithms: Vec<String>,
    #[serde(default = "default_time_limit")]
    pub exact_time_limit_s: f64,
    #[serde(default)]
    pub exact_node_limit: Option<u64>,
}

fn parse_all<T: FromStr<Err = String>>(items: &[String]) -> Result<Vec<T>, String> {
    items.iter().map(|s| s.parse()).collect()
}

fn default_time_limit() -> f64 {
    300.0
}

/// A validated [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub topologies: Vec<PresetSize>,
    pub loads: Vec<u32>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub exact_limits: ExactLimits,
}

impl ExperimentConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn plan(&self) -> Result<Plan, HarnessError> {
        let topologies: Vec<PresetSize> = parse_all(&self.topologies).map_err(HarnessError::Config)?;
        let algorithms: Vec<Algorithm> = parse_all(&self.algorithms).map_err(HarnessError::Config)?;
        if let Some(bad) = self.loads.iter().find(|&&l| l == 0) {
            return Err(HarnessError::Config(format!("load {bad}% is not positive")));
        }
        if !(self.exact_time_limit_s.is_finite() && self.exact_time_limit_s > 0.0) {
            return Err(HarnessError::Config("exact_time_limit_s must be positive".into()));
        }
        let mut plan = Plan {
            topologies,
            loads: self.loads.clone(),
            seeds: self.seeds.seeds(),
            algorithms,
            exact_limits: ExactLimits {
                time: Duration::from_secs_f64(self.exact_time_limit_s),
                nodes: self.exact_node_limit,
            },
        };
        plan.topologies.sort();
        plan.topologies.dedup();
        plan.loads.sort();
        plan.loads.dedup();
        plan.seeds.sort();
        plan.seeds.dedup();
        plan.algorithms.sort();
        plan.algorithms.dedup();
        Ok(plan)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad config: {0}")]
    Config(String),
    #[error("{algorithm} produced an infeasible solution for {topology} load {load_pct}% seed {seed}:\n{report}")]
    Verifier {
        topology: PresetSize,
        load_pct: u32,
        seed: u64,
        algorithm: Algorithm,
        report: String,
    },
    #[error("exact solver failed on {topology} load {load_pct}% seed {seed}: {source}")]
    Exact {
        topology: PresetSize,
        load_pct: u32,
        seed: u64,
        source: IlpError,
    },
    #[error("path enumeration failed: {0}")]
    Paths(#[from] PathError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed runs file: {0}")]
    Runs(String),
    #[error("nothing to summarize")]
    Empty,
}

/// One run's metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub topology: PresetSize,
    pub load_pct: u32,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub profit: i64,
    /// Used CPU over the capacity of the ON OENs; 0 when none is on.
    pub cpu_util: f64,
    pub placed: usize,
    pub offloaded: usize,
    pub rejected: usize,
    pub oens_on: usize,
    pub upf_replicas: u32,
    pub runtime_ms: f64,
    /// Exact rows only: `optimal` or `bounded`.
    pub status: Option<String>,
    pub upper_bound: Option<i64>,
}

impl MetricsRow {
    fn key(&self) -> (PresetSize, u32, u64, Algorithm) {
        (self.topology, self.load_pct, self.seed, self.algorithm)
    }

    fn is_optimal(&self) -> bool {
        self.status.as_deref() == Some("optimal")
    }
}

/// CPU in use on each OEN: UPF cluster, idle EAs and placed demands.
pub fn oen_cpu_used(scenario: &Scenario, solution: &Solution) -> Vec<u64> {
    let mut used: Vec<u64> = (0..scenario.oens.len())
        .map(|e| {
            let eas: u64 = solution.ea_deployed[e]
                .iter()
                .filter_map(|&ea| scenario.ea(ea))
                .map(|ea| ea.idle_cpu)
                .sum();
            scenario.upf_policy.cpu(solution.upf_scale[e]) + eas
        })
        .collect();
    for (d, disposition) in solution.disposition.iter().enumerate() {
        if let Disposition::Placed(e) = *disposition {
            used[e] += scenario.demands[d].cpu_req;
        }
    }
    used
}

pub fn cpu_utilization(scenario: &Scenario, solution: &Solution) -> f64 {
    let used = oen_cpu_used(scenario, solution);
    let (mut num, mut den) = (0u64, 0u64);
    for e in (0..scenario.oens.len()).filter(|&e| solution.oen_on[e]) {
        num += used[e];
        den += scenario.oens[e].cpu_capacity;
    }
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics of a solution. Profit is recomputed by the verifier.
#[allow(clippy::too_many_arguments)]
pub fn measure(
    scenario: &Scenario,
    solution: &Solution,
    topology: PresetSize,
    load_pct: u32,
    seed: u64,
    algorithm: Algorithm,
    runtime_ms: f64,
) -> MetricsRow {
    MetricsRow {
        topology,
        load_pct,
        seed,
        algorithm,
        profit: objective(scenario, solution),
        cpu_util: cpu_utilization(scenario, solution),
        placed: solution.placed_count(),
        offloaded: solution.offloaded_count(),
        rejected: solution.rejected_count(),
        oens_on: solution.oen_on.iter().filter(|&&on| on).count(),
        upf_replicas: solution
            .upf_scale
            .iter()
            .zip(&solution.oen_on)
            .filter(|(_, &on)| on)
            .map(|(&r, _)| r)
            .sum(),
        runtime_ms,
        status: None,
        upper_bound: None,
    }
}

/// A finished run: its metrics and the inputs and output behind them.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub row: MetricsRow,
    pub scenario: Scenario,
    pub solution: Solution,
}

/// Solves one scenario with one algorithm and checks the result. Only the
/// solver call is timed.
pub fn run_one(
    scenario: &Scenario,
    paths: &PathSet,
    topology: PresetSize,
    load_pct: u32,
    seed: u64,
    algorithm: Algorithm,
    limits: ExactLimits,
) -> Result<(MetricsRow, Solution), HarnessError> {
    let start = Instant::now();
    let (solution, exact) = match algorithm {
        Algorithm::Rangr => (run_rangr(scenario, paths), None),
        Algorithm::Greedy => (run_greedy(scenario, paths), None),
        Algorithm::Topk => (run_topk(scenario, paths), None),
        Algorithm::Exact => {
            let out = solve_exact(scenario, paths, limits).map_err(|source| HarnessError::Exact {
                topology,
                load_pct,
                seed,
                source,
            })?;
            (out.solution.clone(), Some(out))
        }
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1000.0;

    let report = check_solution(scenario, paths, &solution);
    if !report.is_empty() {
        return Err(HarnessError::Verifier {
            topology,
            load_pct,
            seed,
            algorithm,
            report: report.to_string(),
        });
    }
    let mut row = measure(scenario, &solution, topology, load_pct, seed, algorithm, runtime_ms);
    if let Some(out) = exact {
        row.status = Some(out.status.label().to_string());
        row.upper_bound = Some(out.upper_bound);
    }
    Ok((row, solution))
}

/// Runs every (topology, load, seed, algorithm) of the plan on up to `jobs`
/// threads. Records come back sorted by that key.
pub fn run_experiment(plan: &Plan, jobs: usize) -> Result<Vec<RunRecord>, HarnessError> {
    let cases: Vec<(PresetSize, u32, u64)> = plan
        .topologies
        .iter()
        .flat_map(|&t| {
            plan.loads
                .iter()
                .flat_map(move |&l| plan.seeds.iter().map(move |&s| (t, l, s)))
        })
        .collect();
    if plan.algorithms.is_empty() {
        return Ok(Vec::new());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let nested: Vec<Vec<RunRecord>> = pool.install(|| {
        cases
            .par_iter()
            .map(|&(topology, load_pct, seed)| {
                let scenario = make_scenario(topology, load_pct, seed);
                let paths = enumerate_paths(&scenario.topology, scenario.path_cutoff)?;
                plan.algorithms
                    .iter()
                    .map(|&algorithm| {
                        let (row, solution) = run_one(
                            &scenario,
                            &paths,
                            topology,
                            load_pct,
                            seed,
                            algorithm,
                            plan.exact_limits,
                        )?;
                        Ok(RunRecord {
                            row,
                            scenario: scenario.clone(),
                            solution,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_, HarnessError>>()
    })?;
    let mut records: Vec<RunRecord> = nested.into_iter().flatten().collect();
    records.sort_by_key(|r| r.row.key());
    Ok(records)
}

fn fmt_f(x: f64, decimals: usize) -> String {
    format!("{x:.decimals$}")
}

fn sorted(rows: &[MetricsRow]) -> Vec<&MetricsRow> {
    let mut out: Vec<&MetricsRow> = rows.iter().collect();
    out.sort_by_key(|r| r.key());
    out
}

/// Writes the per-run metrics CSV, sorted by (topology, load, seed,
/// algorithm).
pub fn write_report(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in sorted(rows) {
        w.write_record([
            r.topology.name().to_string(),
            r.load_pct.to_string(),
            r.seed.to_string(),
            r.algorithm.name().to_string(),
            r.profit.to_string(),
            fmt_f(r.cpu_util, 6),
            r.placed.to_string(),
            r.offloaded.to_string(),
            r.rejected.to_string(),
            r.oens_on.to_string(),
            r.upf_replicas.to_string(),
            fmt_f(r.runtime_ms, 3),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

/// Aggregate of one (topology, load, algorithm) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub topology: PresetSize,
    pub load_pct: u32,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub profit_mean: f64,
    pub profit_std: f64,
    pub cpu_util_mean: f64,
    pub cpu_util_std: f64,
    pub placed_mean: f64,
    pub offloaded_mean: f64,
    pub rejected_mean: f64,
    pub oens_on_mean: f64,
    pub runtime_ms_mean: f64,
    /// Mean of `(exact - algo) / exact` over seeds where the exact row is
    /// optimal with non-zero profit; `None` when there is no such seed.
    pub deviation_from_exact: Option<f64>,
    pub deviation_seeds: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(rows: &[MetricsRow]) -> Result<Vec<SummaryRow>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Empty);
    }
    let mut exact: BTreeMap<(PresetSize, u32, u64), &MetricsRow> = BTreeMap::new();
    let mut cells: BTreeMap<(PresetSize, u32, Algorithm), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        if r.algorithm == Algorithm::Exact {
            exact.insert((r.topology, r.load_pct, r.seed), r);
        }
        cells.entry((r.topology, r.load_pct, r.algorithm)).or_default().push(r);
    }
    let out = cells
        .into_iter()
        .map(|((topology, load_pct, algorithm), group)| {
            let col = |f: fn(&MetricsRow) -> f64| group.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (profit_mean, profit_std) = mean_std(&col(|r| r.profit as f64));
            let (cpu_util_mean, cpu_util_std) = mean_std(&col(|r| r.cpu_util));
            let deviations: Vec<f64> = group
                .iter()
                .filter_map(|r| {
                    let e = exact.get(&(r.topology, r.load_pct, r.seed))?;
                    (e.is_optimal() && e.profit != 0).then(|| (e.profit - r.profit) as f64 / e.profit as f64)
                })
                .collect();
            SummaryRow {
                topology,
                load_pct,
                algorithm,
                runs: group.len(),
                profit_mean,
                profit_std,
                cpu_util_mean,
                cpu_util_std,
                placed_mean: mean_std(&col(|r| r.placed as f64)).0,
                offloaded_mean: mean_std(&col(|r| r.offloaded as f64)).0,
                rejected_mean: mean_std(&col(|r| r.rejected as f64)).0,
                oens_on_mean: mean_std(&col(|r| r.oens_on as f64)).0,
                runtime_ms_mean: mean_std(&col(|r| r.runtime_ms)).0,
                deviation_from_exact: (!deviations.is_empty()).then(|| mean_std(&deviations).0),
                deviation_seeds: deviations.len(),
            }
        })
        .collect();
    Ok(out)
}

pub fn write_summary(summary: &[SummaryRow], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "topology",
        "load_pct",
        "algorithm",
        "runs",
        "profit_mean",
        "profit_std",
        "cpu_util_mean",
        "cpu_util_std",
        "placed_mean",
        "offloaded_mean",
        "rejected_mean",
        "oens_on_mean",
        "runtime_ms_mean",
        "deviation_from_exact",
        "deviation_seeds",
    ])?;
    for s in summary {
        w.write_record([
            s.topology.name().to_string(),
            s.load_pct.to_string(),
            s.algorithm.name().to_string(),
            s.runs.to_string(),
            fmt_f(s.profit_mean, 3),
            fmt_f(s.profit_std, 3),
            fmt_f(s.cpu_util_mean, 6),
            fmt_f(s.cpu_util_std, 6),
            fmt_f(s.placed_mean, 3),
            fmt_f(s.offloaded_mean, 3),
            fmt_f(s.rejected_mean, 3),
            fmt_f(s.oens_on_mean, 3),
            fmt_f(s.runtime_ms_mean, 3),
            s.deviation_from_exact.map_or("n/a".to_string(), |d| fmt_f(d, 6)),
            s.deviation_seeds.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

/// Human-readable summary table.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<8} {:>5} {:<7} {:>4} {:>18} {:>8} {:>8} {:>10} {:>10}\n",
        "topology", "load", "algo", "runs", "profit (mean±sd)", "cpu", "placed", "ms", "dev/exact"
    );
    for s in summary {
        let dev = s
            .deviation_from_exact
            .map_or("n/a".to_string(), |d| format!("{:.2}%", d * 100.0));
        out.push_str(&format!(
            "{:<8} {:>4}% {:<7} {:>4} {:>18} {:>8.3} {:>8.1} {:>10.3} {:>10}\n",
            s.topology.name(),
            s.load_pct,
            s.algorithm.name(),
            s.runs,
            format!("{:.1}±{:.1}", s.profit_mean, s.profit_std),
            s.cpu_util_mean,
            s.placed_mean,
            s.runtime_ms_mean,
            dev
        ));
    }
    out
}

fn content_name(text: &str) -> String {
    format!("{}.json", hex::encode(Sha256::digest(text.as_bytes())))
}

fn write_addressed(dir: &Path, text: &str) -> Result<String, HarnessError> {
    let name = content_name(text);
    let path = dir.join(&name);
    if !path.exists() {
        fs::write(&path, text).map_err(|e| HarnessError::Io(path.clone(), e))?;
    }
    Ok(name)
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

/// Writes every record's files, `runs.csv`, `metrics.csv` and `summary.csv`
/// under `dir`.
pub fn write_sweep(records: &[RunRecord], dir: impl AsRef<Path>) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    let scenarios = dir.join("scenarios");
    let solutions = dir.join("solutions");
    create_dir(&scenarios)?;
    create_dir(&solutions)?;

    let runs_path = dir.join("runs.csv");
    let mut w = csv::Writer::from_path(&runs_path)?;
    w.write_record(RUNS_HEADER)?;
    for rec in records {
        let scenario_file = write_addressed(&scenarios, &rec.scenario.to_json())?;
        let solution_file = write_addressed(&solutions, &rec.solution.to_json())?;
        let r = &rec.row;
        w.write_record([
            r.topology.name().to_string(),
            r.load_pct.to_string(),
            r.seed.to_string(),
            r.algorithm.name().to_string(),
            r.status.clone().unwrap_or_default(),
            r.upper_bound.map(|u| u.to_string()).unwrap_or_default(),
            r.runtime_ms.to_string(),
            format!("scenarios/{scenario_file}"),
            format!("solutions/{solution_file}"),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Io(runs_path, e))?;

    let rows: Vec<MetricsRow> = records.iter().map(|r| r.row.clone()).collect();
    write_report(&rows, dir.join("metrics.csv"))?;
    if !rows.is_empty() {
        write_summary(&summarize(&rows)?, dir.join("summary.csv"))?;
    }
    Ok(())
}

/// Recomputes the metrics of a sweep directory from its stored files.
pub fn load_sweep(dir: impl AsRef<Path>) -> Result<Vec<MetricsRow>, HarnessError> {
    let dir = dir.as_ref();
    let runs_path = dir.join("runs.csv");
    let mut reader = csv::Reader::from_path(&runs_path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(RUNS_HEADER) {
        return Err(HarnessError::Runs(format!(
            "unexpected header in {}",
            runs_path.display()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad =
            |what: &str| HarnessError::Runs(format!("bad {what} in line {:?}", record.position().map(|p| p.line())));
        let topology: PresetSize = field(0).parse().map_err(|_| bad("topology"))?;
        let load_pct: u32 = field(1).parse().map_err(|_| bad("load_pct"))?;
        let seed: u64 = field(2).parse().map_err(|_| bad("seed"))?;
        let algorithm: Algorithm = field(3).parse().map_err(|_| bad("algorithm"))?;
        let runtime_ms: f64 = field(6).parse().map_err(|_| bad("runtime_ms"))?;
        let scenario = Scenario::read(dir.join(field(7)))?;
        let solution = Solution::read(dir.join(field(8)))?;
        let mut row = measure(&scenario, &solution, topology, load_pct, seed, algorithm, runtime_ms);
        if !field(4).is_empty() {
            row.status = Some(field(4).to_string());
            row.upper_bound = Some(field(5).parse().map_err(|_| bad("upper_bound"))?);
        }
        rows.push(row);
    }
    rows.sort_by_key(|r| r.key());
    Ok(rows)
}

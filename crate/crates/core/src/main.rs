use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use upf_edge::baselines::{run_greedy, run_topk};
use upf_edge::domain::{Scenario, Solution, TopologyFile};
use upf_edge::harness::{
    format_summary, load_sweep, run_experiment, summarize, write_report, write_summary, write_sweep, Algorithm,
    ExperimentConfig, HarnessError,
};
use upf_edge::ilp::{build_model, export, solve_exact, ExactLimits, ExportFormat, ModelOptions};
use upf_edge::pathing::{enumerate_paths, PathSet};
use upf_edge::rangr::{run_rangr_with, RanGrOptions};
use upf_edge::scenario::{make_scenario, scenario_on, PresetSize};
use upf_edge::verifier::{check_solution, objective};

#[derive(Parser)]
#[command(name = "upfplace", version, about = "UPF cluster and edge application placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario from a preset (or a topology file) and a load level.
    Gen {
        #[arg(long, default_value = "small")]
        topology: PresetSize,
        /// Topology and OEN parameters in the preset file format; overrides --topology.
        #[arg(long)]
        topology_file: Option<PathBuf>,
        /// Total demand CPU as a percentage of total OEN CPU.
        #[arg(long)]
        load: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a scenario and write the solution.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "rangr")]
        algo: Algorithm,
        /// Same as --algo exact.
        #[arg(long)]
        exact: bool,
        /// Reject a demand instead of offloading it when offloading loses money.
        #[arg(long)]
        reject_negative_margin_offload: bool,
        /// Exact solver wall-clock limit in seconds.
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        /// Exact solver node limit.
        #[arg(long)]
        node_limit: Option<u64>,
    },
    /// Check a solution against every constraint; exit 1 when infeasible.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Write the integer model in LP or MPS format.
    Export {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "lp")]
        format: ExportFormat,
        /// Output file; defaults to the scenario path with the format's extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add the optional symmetry rows.
        #[arg(long)]
        symmetry_rows: bool,
    },
    /// Print the candidate path set of a scenario.
    Paths {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run a sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the config's exact_time_limit_s.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Recompute metrics and summary from a sweep directory.
    Report { dir: PathBuf },
}

enum Failure {
    Infeasible(String),
    BadInput(String),
}

impl From<HarnessError> for Failure {
    fn from(err: HarnessError) -> Self {
        match err {
            HarnessError::Verifier { .. } => Failure::Infeasible(err.to_string()),
            other => Failure::BadInput(other.to_string()),
        }
    }
}

fn bad<E: std::fmt::Display>(context: impl AsRef<str>) -> impl FnOnce(E) -> Failure {
    move |e| Failure::BadInput(format!("{}: {e}", context.as_ref()))
}

fn load_scenario(path: &Path) -> Result<(Scenario, PathSet), Failure> {
    let scenario = Scenario::read(path).map_err(bad(path.display().to_string()))?;
    let paths = enumerate_paths(&scenario.topology, scenario.path_cutoff).map_err(bad("paths"))?;
    Ok((scenario, paths))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(bad(path.display().to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen {
            topology,
            topology_file,
            load,
            seed,
            out,
        } => {
            if load == 0 {
                return Err(Failure::BadInput("load must be positive".into()));
            }
            let scenario = match topology_file {
                Some(path) => {
                    let file = TopologyFile::read(&path).map_err(bad(path.display().to_string()))?;
                    scenario_on(file.topology, file.oens, load, seed)
                }
                None => make_scenario(topology, load, seed),
            };
            write_text(&out, &scenario.to_json())?;
            println!("{} demands -> {}", scenario.demands.len(), out.display());
        }
        Command::Solve {
            scenario,
            out,
            algo,
            exact,
            reject_negative_margin_offload,
            time_limit,
            node_limit,
        } => {
            let (scenario, paths) = load_scenario(&scenario)?;
            let algo = if exact { Algorithm::Exact } else { algo };
            let solution = match algo {
                Algorithm::Rangr => {
                    let opts = RanGrOptions {
                        reject_negative_margin_offload,
                    };
                    run_rangr_with(&scenario, &paths, opts).solution
                }
                Algorithm::Greedy => run_greedy(&scenario, &paths),
                Algorithm::Topk => run_topk(&scenario, &paths),
                Algorithm::Exact => {
                    if !(time_limit.is_finite() && time_limit > 0.0) {
                        return Err(Failure::BadInput("time limit must be positive".into()));
                    }
                    let limits = ExactLimits {
                        time: Duration::from_secs_f64(time_limit),
                        nodes: node_limit,
                    };
                    let outcome = solve_exact(&scenario, &paths, limits).map_err(bad("exact"))?;
                    eprintln!(
                        "status {} objective {} upper bound {} nodes {}",
                        outcome.status.label(),
                        outcome.objective,
                        outcome.upper_bound,
                        outcome.nodes
                    );
                    outcome.solution
                }
            };
            let report = check_solution(&scenario, &paths, &solution);
            if !report.is_empty() {
                return Err(Failure::Infeasible(format!(
                    "{algo} produced an infeasible solution\n{report}"
                )));
            }
            write_text(&out, &solution.to_json())?;
            println!(
                "{algo}: profit {} placed {} offloaded {} rejected {} -> {}",
                objective(&scenario, &solution),
                solution.placed_count(),
                solution.offloaded_count(),
                solution.rejected_count(),
                out.display()
            );
        }
        Command::Check { scenario, solution } => {
            let (scenario, paths) = load_scenario(&scenario)?;
            let solution = Solution::read(&solution).map_err(bad(solution.display().to_string()))?;
            let report = check_solution(&scenario, &paths, &solution);
            print!("{report}");
            if !report.is_empty() {
                return Err(Failure::Infeasible(String::new()));
            }
            println!("profit {}", objective(&scenario, &solution));
        }
        Command::Export {
            scenario: scenario_path,
            format,
            out,
            symmetry_rows,
        } => {
            let (scenario, paths) = load_scenario(&scenario_path)?;
            let options = ModelOptions {
                symmetry_rows,
                ..ModelOptions::default()
            };
            let model = build_model(&scenario, &paths, options).map_err(bad("model"))?;
            let out = out.unwrap_or_else(|| scenario_path.with_extension(format.extension()));
            write_text(&out, &export(&model, format))?;
            println!("{}", out.display());
        }
        Command::Paths { scenario } => {
            let (_, paths) = load_scenario(&scenario)?;
            print!("{}", paths.dump());
        }
        Command::Sweep {
            config,
            out,
            jobs,
            time_limit,
        } => {
            let mut config = ExperimentConfig::read(&config)?;
            if let Some(t) = time_limit {
                config.exact_time_limit_s = t;
            }
            let plan = config.plan()?;
            let records = run_experiment(&plan, jobs)?;
            fs::create_dir_all(&out).map_err(bad(out.display().to_string()))?;
            write_sweep(&records, &out)?;
            let rows: Vec<_> = records.into_iter().map(|r| r.row).collect();
            if !rows.is_empty() {
                print!("{}", format_summary(&summarize(&rows)?));
            }
            println!("{} runs -> {}", rows.len(), out.display());
        }
        Command::Report { dir } => {
            let rows = load_sweep(&dir)?;
            write_report(&rows, dir.join("metrics.csv"))?;
            if !rows.is_empty() {
                let summary = summarize(&rows)?;
                write_summary(&summary, dir.join("summary.csv"))?;
                print!("{}", format_summary(&summary));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible(msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(1)
        }
        Err(Failure::BadInput(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

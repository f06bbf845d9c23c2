use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pathopt_cli::bench::{bench, to_csv, BenchSpec, DEFAULT_BASELINE_LIMIT};
use pathopt_cli::workflow::DEFAULT_THETA;
use pathopt_cli::{reoptimize, run, CliError, Config, Event, Instance, PrevRun};
use pathopt_core::pathgen::SelectStrategy;
use pathopt_core::topology::NodeId;
use pathopt_core::traffic::TrafficMatrix;

#[derive(Parser)]
#[command(name = "pathopt", version, about = "Path-based network optimization: solve, re-optimize and benchmark recipes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    select_number: Option<usize>,
    #[arg(long)]
    strategy: Option<SelectStrategy>,
    /// Relative MILP gap.
    #[arg(long)]
    gap: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate, select, solve and emit rules.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// React to a failure or new traffic starting from an earlier run.
    Reoptimize {
        #[command(flatten)]
        common: Common,
        /// `solution.json` of the earlier run.
        #[arg(long)]
        prev: PathBuf,
        /// `selected_paths.json` of the earlier run; defaults to the file next to `--prev`.
        #[arg(long)]
        prev_paths: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["fail_link", "new_traffic"])]
        fail_node: Option<NodeId>,
        #[arg(long, num_args = 2, value_names = ["SRC", "DST"], conflicts_with = "new_traffic")]
        fail_link: Option<Vec<NodeId>>,
        #[arg(long)]
        new_traffic: Option<PathBuf>,
        /// Relative slack before the restricted re-solve counts as much worse.
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        /// Weight of path churn against the load objective, in [0, 1].
        #[arg(long, default_value_t = 0.0)]
        churn_weight: f64,
    },
    /// Objective and runtime as functions of the selection.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        select_numbers: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "shortest,random")]
        strategies: Vec<SelectStrategy>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Skip the all-paths baseline above this many candidate paths.
        #[arg(long, default_value_t = DEFAULT_BASELINE_LIMIT)]
        baseline_limit: usize,
        /// Leave timing columns empty.
        #[arg(long)]
        deterministic: bool,
    },
}

fn instance(c: &Common) -> Result<Instance, CliError> {
    let mut cfg = Config::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.select_number.is_some() {
        cfg.select_number = c.select_number;
    }
    if c.strategy.is_some() {
        cfg.strategy = c.strategy;
    }
    if c.gap.is_some() {
        cfg.gap = c.gap;
    }
    Instance::from_config(&cfg)
}

fn exec(cmd: Cmd) -> Result<bool, CliError> {
    match cmd {
        Cmd::Run { common } => {
            let inst = instance(&common)?;
            let out = run(&inst)?;
            out.write(&common.out_dir)?;
            println!("{} {}", out.metrics.status, out.solved.solution.objective);
            Ok(out.is_optimal())
        }
        Cmd::Reoptimize { common, prev, prev_paths, fail_node, fail_link, new_traffic, theta, churn_weight } => {
            let inst = instance(&common)?;
            let prev_paths = prev_paths.unwrap_or_else(|| prev.with_file_name("selected_paths.json"));
            let prev = PrevRun::load(&prev, &prev_paths)?;
            let event = match (fail_node, fail_link, new_traffic) {
                (Some(v), None, None) => Event::FailNode(v),
                (None, Some(l), None) => Event::FailLink(l[0], l[1]),
                (None, None, Some(p)) => {
                    Event::NewTraffic(TrafficMatrix::load(&p, Some(&inst.topo)).map_err(|e| CliError::input(&p, e))?)
                }
                _ => {
                    return Err(CliError::Input {
                        path: "arguments".into(),
                        msg: "give exactly one of --fail-node, --fail-link, --new-traffic".into(),
                    })
                }
            };
            let r = reoptimize(&inst, &prev, &event, churn_weight, theta)?;
            r.outcome.write(&common.out_dir)?;
            println!("step {} {} {}", r.step, r.outcome.metrics.status, r.outcome.solved.solution.objective);
            Ok(r.outcome.is_optimal())
        }
        Cmd::Bench { common, select_numbers, strategies, trials, baseline_limit, deterministic } => {
            let inst = instance(&common)?;
            let spec = BenchSpec { select_numbers, strategies, trials, baseline_limit, deterministic };
            let rows = bench(&inst, &spec)?;
            fs::create_dir_all(&common.out_dir)?;
            let csv = to_csv(&rows)?;
            fs::write(common.out_dir.join("bench.csv"), &csv)?;
            print!("{csv}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match exec(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

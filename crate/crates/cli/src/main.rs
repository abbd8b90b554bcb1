use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cvrp_tree::baselines::flow_lower_bound;
use cvrp_tree::bench::{run_bench, to_csv, BenchConfig};
use cvrp_tree::dp::DpConfig;
use cvrp_tree::exact::ExactLimits;
use cvrp_tree::generate::{generate, DemandModel, GenSpec, Shape};
use cvrp_tree::height::{build_reduced_tree, ReduceConfig};
use cvrp_tree::io::{load_instance, load_solution, save_instance, save_node_map, save_solution};
use cvrp_tree::pipeline::{solve, Algorithm, SolveOptions};
use cvrp_tree::seed::derive_seed;
use cvrp_tree::structure::{run_seeds, StructureParams};
use cvrp_tree::verify::{check_feasible, ratio_report, Reference};
use cvrp_tree::{Eps, TreeInstance};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "cvrp-tree", version, about = "Capacitated vehicle routing on trees")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded instance.
    Gen {
        #[arg(long)]
        shape: Shape,
        #[arg(long)]
        n: usize,
        #[arg(long = "capacity", short = 'q')]
        capacity: u64,
        #[arg(long, default_value = "unit")]
        demand: DemandModel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Solve an instance and print the solution.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "exact")]
        algo: Algorithm,
        #[command(flatten)]
        knobs: Knobs,
        /// Solve on the height-reduced tree and lift the result.
        #[arg(long)]
        reduce_height: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a solution for feasibility and cost.
    Verify {
        instance: PathBuf,
        solution: PathBuf,
        /// Also report the ratio against the exact optimum (or the lower
        /// bound when the instance is too large).
        #[arg(long)]
        ratio: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print the flow lower bound.
    Bound { instance: PathBuf },
    /// Build the height-reduced tree.
    Reduce {
        instance: PathBuf,
        #[arg(long, default_value = "1/2")]
        eps: Eps,
        /// Paths with at most delta·log2(n)/eps edges are kept.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, short)]
        output: PathBuf,
        /// Node map sidecar; defaults to the output path with `.map` appended.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Run the structure transform for several seeds; one JSON line each.
    Transform {
        instance: PathBuf,
        solution: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        sample_prob: Option<f64>,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a benchmark suite described by a TOML file and emit CSV.
    Bench {
        config: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Write every instance and solution here.
        #[arg(long)]
        solutions_dir: Option<PathBuf>,
        /// Fill the wall-time column.
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Args)]
struct Knobs {
    #[arg(long, default_value = "1/2")]
    eps: Eps,
    #[arg(long)]
    gamma: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long, default_value_t = DpConfig::default().state_budget)]
    state_budget: usize,
    #[arg(long, default_value_t = ExactLimits::default().max_tokens)]
    max_tokens: u64,
}

impl Knobs {
    fn params(&self, n: usize) -> StructureParams {
        let d = StructureParams::defaults(n, self.eps);
        StructureParams {
            gamma: self.gamma.unwrap_or(d.gamma),
            groups: self.groups.unwrap_or(d.groups),
            sample_prob: d.sample_prob,
        }
    }
}

/// A failure carrying its exit code.
struct Fail(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(EXIT_USAGE, e.into())
    }
}

fn read_instance(path: &Path) -> Result<TreeInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    match cli.cmd {
        Cmd::Gen {
            shape,
            n,
            capacity,
            demand,
            seed,
            output,
        } => {
            let inst = generate(&GenSpec {
                shape,
                n,
                capacity,
                demand,
                seed,
            })?;
            emit(output.as_deref(), &save_instance(&inst))?;
        }
        Cmd::Solve {
            instance,
            algo,
            knobs,
            reduce_height,
            output,
        } => {
            let inst = read_instance(&instance)?;
            let opts = SolveOptions {
                eps: knobs.eps,
                reduce_height,
                params: Some(knobs.params(inst.n())),
                dp: DpConfig {
                    state_budget: knobs.state_budget,
                },
                exact: ExactLimits {
                    max_tokens: knobs.max_tokens,
                    ..ExactLimits::default()
                },
            };
            let r = solve(&inst, algo, &opts).map_err(|e| {
                let code = if e.is_resource_limit() { EXIT_LIMIT } else { EXIT_USAGE };
                Fail(code, e.into())
            })?;
            emit(output.as_deref(), &save_solution(&r.solution))?;
        }
        Cmd::Verify {
            instance,
            solution,
            ratio,
            json,
        } => {
            let inst = read_instance(&instance)?;
            let text = fs::read_to_string(&solution)
                .with_context(|| format!("reading {}", solution.display()))?;
            let sol = load_solution(&text).with_context(|| format!("parsing {}", solution.display()))?;
            let report = check_feasible(&inst, &sol);
            let ratio = ratio.then(|| ratio_report(&inst, &sol, Reference::Oracle(ExactLimits::default())));
            if json {
                let mut v = serde_json::to_value(&report)?;
                if let Some(r) = &ratio {
                    v["reference"] = r.reference.into();
                    v["ratio"] = r.ratio.map(|x| x.to_string()).into();
                    v["reference_is_lower_bound"] = r.fell_back_to_lower_bound.into();
                }
                println!("{v}");
            } else {
                println!("tours {}", report.tours);
                println!("cost {}", report.recomputed_cost);
                if let Some(r) = &ratio {
                    let kind = if r.fell_back_to_lower_bound { "lb" } else { "opt" };
                    let shown = r.ratio.map_or("inf".to_string(), |x| x.to_string());
                    println!("reference {} {kind}", r.reference);
                    println!("ratio {shown}");
                }
                for v in &report.violations {
                    println!("violation {}", serde_json::to_string(v)?);
                }
                println!("{}", if report.is_clean() { "ok" } else { "infeasible" });
            }
            if !report.is_clean() {
                return Err(Fail(EXIT_VERIFY, anyhow::anyhow!("solution violates the instance")));
            }
        }
        Cmd::Bound { instance } => {
            let inst = read_instance(&instance)?;
            println!("{}", flow_lower_bound(&inst));
        }
        Cmd::Reduce {
            instance,
            eps,
            delta,
            output,
            map,
        } => {
            let inst = read_instance(&instance)?;
            let rt = build_reduced_tree(&inst, ReduceConfig { eps, delta });
            emit(Some(&output), &save_instance(&rt.tree))?;
            let map_path = map.unwrap_or_else(|| {
                let mut p = output.clone().into_os_string();
                p.push(".map");
                PathBuf::from(p)
            });
            let m: Vec<_> = rt.node_map.iter().map(|&v| Some(v)).collect();
            emit(Some(&map_path), &save_node_map(&m))?;
            eprintln!(
                "height {} -> {}, {} levels",
                inst.height(),
                rt.tree.height(),
                rt.decomposition.levels()
            );
        }
        Cmd::Transform {
            instance,
            solution,
            knobs,
            sample_prob,
            runs,
            seed,
        } => {
            let inst = read_instance(&instance)?;
            let text = fs::read_to_string(&solution)
                .with_context(|| format!("reading {}", solution.display()))?;
            let sol = load_solution(&text)?;
            let mut params = knobs.params(inst.n());
            if let Some(p) = sample_prob {
                params.sample_prob = p;
            }
            let seeds: Vec<u64> = (0..runs).map(|i| derive_seed(seed, &[i])).collect();
            for (outcome, _) in run_seeds(&inst, &sol, knobs.eps, &params, &seeds) {
                println!("{}", serde_json::to_string(&outcome)?);
            }
        }
        Cmd::Bench {
            config,
            output,
            solutions_dir,
            timing,
        } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: BenchConfig =
                toml::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            cfg.timing |= timing;
            if let Some(dir) = &solutions_dir {
                fs::create_dir_all(dir)?;
            }
            let rows = run_bench(&cfg, solutions_dir.as_deref());
            emit(output.as_deref(), &to_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, e)) => {
            if code != EXIT_VERIFY {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}

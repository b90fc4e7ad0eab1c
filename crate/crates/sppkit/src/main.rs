//! `sppkit` command line: solve, check, decide, reduce, gen, bench.
//!
//! Exit codes: 0 success (optimal / valid / yes), 2 negative verdict
//! (infeasible / violated / no), 3 resource or iteration limits, 1 usage
//! and input errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use spp_core::analysis::{check_chi_valid, check_valid, ChiValidity, Validity};
use spp_core::generate::{sample_solvable, DensityMode, TvParams};
use spp_core::ilp::{decide_budget_with, BudgetDecision, CutStrategy, SolveStatus, SolverConfig};
use spp_core::instance::{parse_instance, serialize_instance, Policy, SppInstance};
use spp_core::oracle::{brute_force_chi_optimal, brute_force_optimal};
use spp_core::reductions::{
    parse_dimacs, parse_qdnf, reduce_3sat, reduce_chi_validity, reduce_qsat2,
};
use sppkit::{bench_run, render_summary, summarize, to_csv, BenchConfig};

#[derive(Parser)]
#[command(
    name = "sppkit",
    version,
    about = "Exact solver toolkit for the secret protection problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Ilp,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum CutStrategyArg {
    First,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance for a minimum-cost valid (or chi-valid) policy.
    Solve {
        file: PathBuf,
        /// Chi mode: distinct protected events count once per path.
        #[arg(long)]
        chi: bool,
        #[arg(long, value_enum, default_value = "ilp")]
        engine: EngineArg,
        #[arg(long, default_value_t = 5000)]
        max_iters: u64,
        #[arg(long, value_enum, default_value = "all")]
        cut_strategy: CutStrategyArg,
    },
    /// Check one policy against an instance.
    Check {
        file: PathBuf,
        /// Comma-separated protectable event names.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        chi: bool,
    },
    /// Decide whether a policy within the budget exists.
    Decide {
        file: PathBuf,
        #[arg(long)]
        budget: u64,
        #[arg(long)]
        chi: bool,
    },
    /// Build an instance from a formula via a gadget construction.
    Reduce {
        #[arg(value_enum)]
        kind: ReduceKind,
        input: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate random instances.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run a benchmark batch from a config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceKind {
    /// 3-CNF satisfiability as a chi-mode budget instance.
    Sat3,
    /// Chain instance whose full-literal policy tests chi-validity.
    Chival,
    /// 2-QBF gadget with two secret states.
    Qsat2,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Random NFA with a fixed transition quota per symbol.
    Tv {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        alphabet: usize,
        #[arg(long)]
        density: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Exactly one initial state.
        #[arg(long)]
        single_initial: bool,
        #[arg(long, default_value_t = 0.001)]
        init_density: f64,
        #[arg(long, default_value_t = 0.1)]
        accept_density: f64,
        /// Attribute range for clearance, cost, and security levels.
        #[arg(long, default_value_t = 1)]
        lo: u64,
        #[arg(long, default_value_t = 10)]
        hi: u64,
        #[arg(long, default_value_t = 100)]
        max_retries: u32,
        /// Read density as total transitions per state instead of per
        /// symbol.
        #[arg(long)]
        total_density: bool,
        /// Regenerate until solvable in chi mode instead of validity mode.
        #[arg(long)]
        chi: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn read_instance(path: &PathBuf) -> Result<SppInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn write_output(out: Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn status_exit(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => 2,
        SolveStatus::IterationLimit | SolveStatus::ResourceLimit | SolveStatus::Timeout => 3,
    }
}

fn cmd_solve(
    file: PathBuf,
    chi: bool,
    engine: EngineArg,
    max_iters: u64,
    cut_strategy: CutStrategyArg,
) -> Result<u8> {
    let inst = read_instance(&file)?;
    match engine {
        EngineArg::Ilp => {
            let config = SolverConfig {
                chi,
                max_iters,
                cut_strategy: match cut_strategy {
                    CutStrategyArg::First => CutStrategy::First,
                    CutStrategyArg::All => CutStrategy::All,
                },
                ..SolverConfig::default()
            };
            let report = spp_core::solve_spp(&inst, &config);
            println!("{}", report.render(&inst));
            Ok(status_exit(report.status))
        }
        EngineArg::Oracle => {
            let started = std::time::Instant::now();
            let result = if chi {
                brute_force_chi_optimal(&inst)
            } else {
                brute_force_optimal(&inst)
            };
            let wall_ms = started.elapsed().as_millis();
            match result {
                Ok(Some((policy, cost))) => {
                    println!(
                        "status=optimal cost={cost} iterations=0 cuts=0 wall_ms={wall_ms} policy={}",
                        policy.render(&inst)
                    );
                    Ok(0)
                }
                Ok(None) => {
                    println!("status=infeasible iterations=0 cuts=0 wall_ms={wall_ms}");
                    Ok(2)
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    Ok(3)
                }
            }
        }
    }
}

fn cmd_check(file: PathBuf, policy: String, chi: bool) -> Result<u8> {
    let inst = read_instance(&file)?;
    let names: Vec<&str> = policy.split(',').filter(|s| !s.is_empty()).collect();
    let policy = Policy::from_names(&inst, &names).map_err(|e| anyhow!("{e}"))?;
    if chi {
        match check_chi_valid(&inst, &policy) {
            Ok(ChiValidity::ChiValid) => {
                println!("CHI-VALID");
                Ok(0)
            }
            Ok(ChiValidity::Violated(v)) => {
                println!("{}", v.render(&inst));
                Ok(2)
            }
            Err(err) => {
                eprintln!("error: {err}");
                Ok(3)
            }
        }
    } else {
        match check_valid(&inst, &policy) {
            Validity::Valid => {
                println!("VALID");
                Ok(0)
            }
            Validity::Violated(v) => {
                println!("{}", v.render(&inst));
                Ok(2)
            }
        }
    }
}

fn cmd_decide(file: PathBuf, budget: u64, chi: bool) -> Result<u8> {
    let inst = read_instance(&file)?;
    let config = SolverConfig {
        chi,
        ..SolverConfig::default()
    };
    match decide_budget_with(&inst, budget, &config) {
        Ok(BudgetDecision::Yes(policy)) => {
            let cost = inst
                .policy_cost(&policy)
                .expect("witness policy is protectable");
            println!("yes cost={cost} policy={}", policy.render(&inst));
            Ok(0)
        }
        Ok(BudgetDecision::No) => {
            println!("no");
            Ok(2)
        }
        Ok(BudgetDecision::Unknown) => {
            println!("unknown");
            Ok(3)
        }
        Err(err) => {
            eprintln!("error: {err}");
            Ok(3)
        }
    }
}

fn cmd_reduce(kind: ReduceKind, input: PathBuf, out: Option<PathBuf>) -> Result<u8> {
    let text =
        fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
    let content = match kind {
        ReduceKind::Sat3 => {
            let formula = parse_dimacs(&text).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            let reduced = reduce_3sat(&formula)?;
            format!(
                "# {} mode {}\n# budget {}\n{}",
                reduced.provenance,
                reduced.mode,
                reduced.budget,
                serialize_instance(&reduced.instance)
            )
        }
        ReduceKind::Chival => {
            let formula = parse_dimacs(&text).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            let (instance, policy) = reduce_chi_validity(&formula)?;
            format!(
                "# chival\n# policy {}\n{}",
                policy.render(&instance),
                serialize_instance(&instance)
            )
        }
        ReduceKind::Qsat2 => {
            let formula = parse_qdnf(&text).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            let reduced = reduce_qsat2(&formula)?;
            format!(
                "# {} mode {}\n# budget {}\n{}",
                reduced.provenance,
                reduced.mode,
                reduced.budget,
                serialize_instance(&reduced.instance)
            )
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen_tv(
    states: usize,
    alphabet: usize,
    density: f64,
    seed: Option<u64>,
    single_initial: bool,
    init_density: f64,
    accept_density: f64,
    lo: u64,
    hi: u64,
    max_retries: u32,
    total_density: bool,
    chi: bool,
    out: Option<PathBuf>,
) -> Result<u8> {
    let seed = seed.unwrap_or(0);
    let params = TvParams {
        states,
        alphabet,
        density,
        init_density: if single_initial { 0.0 } else { init_density },
        accept_density,
        seed,
        density_mode: if total_density {
            DensityMode::Total
        } else {
            DensityMode::PerSymbol
        },
    };
    let sampled = sample_solvable(&params, (lo, hi), max_retries, chi)?;
    let content = format!(
        "# gen tv states={states} alphabet={alphabet} density={density} seed={seed} retries={}\n{}",
        sampled.retries,
        serialize_instance(&sampled.instance)
    );
    write_output(out, &content)?;
    Ok(0)
}

fn cmd_bench(config: PathBuf, out: PathBuf) -> Result<u8> {
    let text =
        fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let config = BenchConfig::parse(&text)?;
    let records = bench_run(&config);
    fs::write(&out, to_csv(&records)).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", render_summary(&summarize(&records)));
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve {
            file,
            chi,
            engine,
            max_iters,
            cut_strategy,
        } => cmd_solve(file, chi, engine, max_iters, cut_strategy),
        Command::Check { file, policy, chi } => cmd_check(file, policy, chi),
        Command::Decide { file, budget, chi } => cmd_decide(file, budget, chi),
        Command::Reduce { kind, input, out } => cmd_reduce(kind, input, out),
        Command::Gen(GenCommand::Tv {
            states,
            alphabet,
            density,
            seed,
            single_initial,
            init_density,
            accept_density,
            lo,
            hi,
            max_retries,
            total_density,
            chi,
            out,
        }) => cmd_gen_tv(
            states,
            alphabet,
            density,
            seed,
            single_initial,
            init_density,
            accept_density,
            lo,
            hi,
            max_retries,
            total_density,
            chi,
            out,
        ),
        Command::Bench { config, out } => cmd_bench(config, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems exit 1; --help and --version stay 0.
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

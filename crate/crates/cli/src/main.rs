//! `meclb`: run, compare and validate the MEC load-balancing simulator.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use meclb_core::metrics::{self, AggregateStats, Metric, RunInfo};
use meclb_core::sched::Policy;
use meclb_core::sim::{self, SimParams, GENERATOR};
use meclb_core::validate::{self, Fault};
use meclb_core::workload::{self, ArrivalModel, ScenarioConfig};

#[derive(Parser)]
#[command(name = "meclb", version, about = "Deadline-aware queueing for sequential-forwarding MEC clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one queue policy and write aggregate results.
    Run(RunArgs),
    /// Simulate FIFO and preferential queues side by side.
    Compare(CompareArgs),
    /// List the built-in scenarios or export / check scenario files.
    Scenarios(ScenariosArgs),
    /// Fuzz the preferential queue against the reference oracle.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct ScenarioSource {
    /// Built-in scenario number (1, 2 or 3).
    #[arg(long)]
    scenario: Option<u32>,
    /// JSON scenario file.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// All built-in scenarios.
    #[arg(long)]
    all: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum Arrival {
    /// Every request arrives at time zero.
    Batch,
    /// Arrival times uniform over [0, horizon).
    Uniform,
}

#[derive(Copy, Clone, ValueEnum)]
enum PolicyArg {
    Fifo,
    Preferential,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Fifo => Policy::Fifo,
            PolicyArg::Preferential => Policy::Preferential,
        }
    }
}

#[derive(Args, Clone)]
struct SimArgs {
    /// Number of replications.
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    reps: u32,
    /// Master seed; replication i uses seed XOR i.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Forwarding budget per request.
    #[arg(long, default_value_t = 2)]
    max_forwards: u32,
    #[arg(long, value_enum, default_value_t = Arrival::Batch)]
    arrival: Arrival,
    /// Horizon for the uniform arrival model.
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    /// Do not forward a request back to the node it arrived at.
    #[arg(long)]
    exclude_origin: bool,
    /// Directory for outputs without an explicit path.
    #[arg(long, env = "MECLB_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Write a per-replication event trace into this directory.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Print per-node breakdowns.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[arg(long, value_enum, default_value_t = PolicyArg::Preferential)]
    policy: PolicyArg,
    #[command(flatten)]
    sim: SimArgs,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a met-rate chart here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: ScenarioSource,
    #[command(flatten)]
    sim: SimArgs,
    /// CSV output path (default: <out-dir>/compare.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenariosArgs {
    /// Write built-in scenario N as JSON to PATH.
    #[arg(long, num_args = 2, value_names = ["N", "PATH"])]
    export: Option<Vec<String>>,
    /// Parse and summarise a scenario file.
    #[arg(long)]
    check: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Number of random admission cases.
    #[arg(long, default_value_t = 10_000)]
    fuzz: u64,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    /// Check a deliberately broken admission path (harness self-test).
    #[arg(long, hide = true)]
    inject_fault: bool,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Scenarios(args) => cmd_scenarios(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_scenarios(source: &ScenarioSource) -> Result<Vec<ScenarioConfig>, Failure> {
    let usage = |e: workload::ScenarioError| Failure::Usage(e.to_string());
    if let Some(n) = source.scenario {
        Ok(vec![workload::builtin_scenario(n).map_err(usage)?])
    } else if let Some(path) = &source.scenario_file {
        Ok(vec![workload::parse_scenario_file(path).map_err(usage)?])
    } else {
        (1..=3)
            .map(|n| workload::builtin_scenario(n).map_err(usage))
            .collect()
    }
}

fn sim_params(args: &SimArgs, policy: Policy) -> Result<SimParams, Failure> {
    let arrival = match args.arrival {
        Arrival::Batch => ArrivalModel::BatchAtZero,
        Arrival::Uniform if args.horizon == 0 => {
            return Err(Failure::Usage("--horizon must be positive".into()))
        }
        Arrival::Uniform => ArrivalModel::UniformHorizon(args.horizon),
    };
    Ok(SimParams {
        max_forwards: args.max_forwards,
        policy,
        arrival,
        seed: args.seed,
        exclude_origin: args.exclude_origin,
    })
}

fn simulate(scenario: &ScenarioConfig, params: &SimParams, args: &SimArgs) -> anyhow::Result<AggregateStats> {
    let results = match &args.trace_dir {
        None => sim::run_replications(scenario, params, args.reps)?,
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut results = Vec::with_capacity(args.reps as usize);
            for i in 0..u64::from(args.reps) {
                let path = dir.join(format!("trace-{}-{}-rep{i}.txt", scenario.name, params.policy));
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                let mut out = BufWriter::new(file);
                let seed = sim::replication_seed(params.seed, i);
                results.push(sim::run_replication_traced(scenario, params, seed, Some(&mut out))?);
            }
            results
        }
    };
    let info = RunInfo {
        scenario: scenario.name.clone(),
        policy: params.policy,
        seed: params.seed,
        generator: GENERATOR.to_string(),
        arrival: params.arrival.label(),
    };
    Ok(metrics::aggregate(&results, info)?)
}

fn print_table(stats: &[AggregateStats], verbose: bool) {
    println!(
        "{:<14} {:<13} {:>5} {:>9} {:>9} {:>9} {:>9}",
        "scenario", "policy", "reps", "met%", "met_sd", "fwd%", "fwd_sd"
    );
    for s in stats {
        println!(
            "{:<14} {:<13} {:>5} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            s.info.scenario,
            s.info.policy,
            s.replications,
            100.0 * s.met_rate,
            100.0 * s.met_sd,
            100.0 * s.forward_rate,
            100.0 * s.forward_sd
        );
        if verbose {
            for n in &s.per_node {
                println!(
                    "    {:<10} met% {:>8.3}  forwards out {:>9.1}  processed {:>9.1}",
                    n.name,
                    100.0 * n.met_rate,
                    n.mean_forwards_out,
                    n.mean_processed
                );
            }
        }
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let scenarios = load_scenarios(&args.source)?;
    let params = sim_params(&args.sim, args.policy.into())?;
    let mut stats = Vec::new();
    for scenario in &scenarios {
        stats.push(simulate(scenario, &params, &args.sim)?);
    }
    let out = args
        .out
        .unwrap_or_else(|| args.sim.out_dir.join(format!("run-{}.csv", params.policy)));
    write_file(&out, &metrics::format_csv(&stats))?;
    if let Some(svg) = &args.svg {
        write_file(svg, &metrics::render_svg(&stats, Metric::MetRate).map_err(anyhow::Error::from)?)?;
    }
    print_table(&stats, args.sim.verbose);
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> CmdResult {
    let scenarios = load_scenarios(&args.source)?;
    if args.sim.reps == 1 {
        eprintln!("warning: --reps 1 reports single-sample values, not averages");
    }
    let fifo = sim_params(&args.sim, Policy::Fifo)?;
    let pref = sim_params(&args.sim, Policy::Preferential)?;
    let mut stats = Vec::new();
    for scenario in &scenarios {
        stats.push(simulate(scenario, &fifo, &args.sim)?);
        stats.push(simulate(scenario, &pref, &args.sim)?);
    }

    let dir = &args.sim.out_dir;
    let out = args.out.unwrap_or_else(|| dir.join("compare.csv"));
    write_file(&out, &metrics::format_csv(&stats))?;
    let nodes = dir.join("compare-nodes.csv");
    write_file(&nodes, &metrics::format_node_csv(&stats))?;
    let met_svg = dir.join("met_rate.svg");
    let fwd_svg = dir.join("forward_rate.svg");
    for (path, metric) in [(&met_svg, Metric::MetRate), (&fwd_svg, Metric::ForwardRate)] {
        let svg = metrics::render_svg(&stats, metric).map_err(anyhow::Error::from)?;
        write_file(path, &svg)?;
    }

    print_table(&stats, args.sim.verbose);
    for pair in stats.chunks(2) {
        let (f, p) = (&pair[0], &pair[1]);
        println!(
            "delta {}: met_rate {:+.3}%  forward_rate {:+.3}%  (preferential - fifo)",
            f.info.scenario,
            100.0 * (p.met_rate - f.met_rate),
            100.0 * (p.forward_rate - f.forward_rate)
        );
    }
    println!(
        "wrote {}, {}, {}, {}",
        out.display(),
        nodes.display(),
        met_svg.display(),
        fwd_svg.display()
    );
    Ok(())
}

fn cmd_scenarios(args: ScenariosArgs) -> CmdResult {
    if let Some(export) = args.export {
        let n: u32 = export[0]
            .parse()
            .map_err(|_| Failure::Usage(format!("invalid scenario number `{}`", export[0])))?;
        let config = workload::builtin_scenario(n).map_err(|e| Failure::Usage(e.to_string()))?;
        workload::write_scenario_file(&config, &export[1]).map_err(anyhow::Error::from)?;
        println!("wrote {}", export[1]);
        return Ok(());
    }
    let configs = match &args.check {
        Some(path) => vec![workload::parse_scenario_file(path).map_err(|e| Failure::Usage(e.to_string()))?],
        None => (1..=3).map(|n| workload::builtin_scenario(n).expect("builtin")).collect(),
    };
    for c in &configs {
        println!("{}: {} nodes, {} services, {} requests", c.name, c.nodes.len(), c.services.len(), c.total_requests());
        let header: Vec<&str> = c.services.iter().map(|s| s.id.as_str()).collect();
        println!("    {:<6} {}", "", header.iter().map(|h| format!("{h:>6}")).collect::<String>());
        for (node, row) in c.nodes.iter().zip(&c.counts) {
            println!("    {node:<6} {}", row.iter().map(|v| format!("{v:>6}")).collect::<String>());
        }
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> CmdResult {
    if args.fuzz == 0 {
        return Err(Failure::Usage("--fuzz 0 leaves nothing to check".into()));
    }
    let fault = args.inject_fault.then_some(Fault::TailOnly);
    let small = args.fuzz.min(1_000);
    let reports = [
        validate::oracle_equivalence(args.fuzz, args.seed, 12, 500, fault),
        validate::exhaustive_agreement(small, args.seed, 6, 50),
        validate::forced_matches_fifo(small, args.seed, 12, 500),
        validate::invariant_fuzz(args.fuzz * 10, args.seed),
    ];
    let mut clean = true;
    for r in &reports {
        println!("{} {r}", if r.passed() { "PASS" } else { "FAIL" });
        clean &= r.passed();
    }
    if clean {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow::anyhow!("validation found counterexamples")))
    }
}

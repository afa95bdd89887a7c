//! Command-line front end: run experiments, export topologies, and execute
//! the full method-comparison suite.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use lcpf_core::network::{build_jittered_grid, DEFAULT_CONNECTIVITY_RETRIES};
use lcpf_core::rng::derive_rng;
use lcpf_core::scenario::ScenarioConfig;
use lcpf_sim::report::{load_scenario, write_json, write_rmse_csv, TopologyFile};
use lcpf_sim::{run_experiment, ExperimentConfig, Method, MetricsReport};

#[derive(Parser)]
#[command(
    name = "lcpf",
    about = "Distributed particle filtering over a simulated sensor network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (one method, many Monte Carlo runs).
    Run(RunArgs),
    /// Generate a sensor network and export it as JSON.
    Topology(TopologyArgs),
    /// Run the five-method comparison suite and print the summary table.
    Table1(Table1Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cpf,
    Cgpf,
    LcDpf,
    LcDgpf,
    RLcDgpf,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Cpf => Method::Cpf,
            MethodArg::Cgpf => Method::Cgpf,
            MethodArg::LcDpf => Method::LcDpf,
            MethodArg::LcDgpf => Method::LcDgpf,
            MethodArg::RLcDgpf => Method::RLcDgpf,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario configuration file (JSON); missing fields take the
    /// reference defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; everything random derives from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Filter to run.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Monte Carlo runs.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Particle count J (J' for the reduced filter becomes J/K).
    #[arg(long)]
    particles: Option<usize>,
    /// Consensus iterations I.
    #[arg(long)]
    iterations: Option<usize>,
    /// Replace consensus by exact summation (oracle mode).
    #[arg(long)]
    exact_sums: bool,
}

#[derive(Args)]
struct TopologyArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct Table1Args {
    #[command(flatten)]
    common: CommonArgs,
    /// Monte Carlo runs per method.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run_command(args),
        Command::Topology(args) => topology_command(args),
        Command::Table1(args) => table1_command(args),
    }
}

fn scenario_from(common: &CommonArgs) -> anyhow::Result<ScenarioConfig> {
    match &common.config {
        Some(path) => load_scenario(path).with_context(|| format!("loading {}", path.display())),
        None => Ok(ScenarioConfig::paper_defaults()),
    }
}

fn apply_overrides(
    scenario: &mut ScenarioConfig,
    particles: Option<usize>,
    iterations: Option<usize>,
) {
    if let Some(j) = particles {
        scenario.num_particles = j;
        scenario.reduced_particles = j / scenario.num_sensors;
    }
    if let Some(i) = iterations {
        scenario.consensus_iterations = i;
    }
}

fn run_command(args: RunArgs) -> anyhow::Result<()> {
    let mut scenario = scenario_from(&args.common)?;
    apply_overrides(&mut scenario, args.particles, args.iterations);
    let cfg = ExperimentConfig {
        scenario,
        method: args.method.into(),
        runs: args.runs,
        master_seed: args.common.seed,
        exact_sums: args.exact_sums,
    };
    let outcome = run_experiment(&cfg)?;
    write_outputs(&args.common.out, std::slice::from_ref(&outcome.report), {
        &TopologyFile::from_network(&outcome.network)
    })?;
    print_table(std::slice::from_ref(&outcome.report));
    Ok(())
}

fn topology_command(args: TopologyArgs) -> anyhow::Result<()> {
    let scenario = scenario_from(&args.common)?;
    let mut rng = derive_rng(args.common.seed, &[0xA1]);
    let net = build_jittered_grid(
        scenario.num_sensors,
        scenario.area_side,
        scenario.comm_range,
        scenario.jitter_fraction,
        DEFAULT_CONNECTIVITY_RETRIES,
        &mut rng,
    )?;
    let path = args.common.out.join("topology.json");
    write_json(&path, &TopologyFile::from_network(&net))?;
    println!(
        "wrote {} ({} sensors, range {} m)",
        path.display(),
        net.num_sensors(),
        net.comm_range()
    );
    Ok(())
}

fn table1_command(args: Table1Args) -> anyhow::Result<()> {
    let mut scenario = scenario_from(&args.common)?;
    apply_overrides(&mut scenario, args.particles, args.iterations);
    let mut reports = Vec::new();
    let mut topology = None;
    for method in Method::ALL {
        let cfg = ExperimentConfig {
            scenario: scenario.clone(),
            method,
            runs: args.runs,
            master_seed: args.common.seed,
            exact_sums: false,
        };
        eprintln!("running {} ({} runs)...", method.label(), args.runs);
        let outcome = run_experiment(&cfg)?;
        topology.get_or_insert_with(|| TopologyFile::from_network(&outcome.network));
        reports.push(outcome.report);
    }
    write_outputs(&args.common.out, &reports, topology.as_ref().unwrap())?;
    print_table(&reports);
    Ok(())
}

fn write_outputs(
    out: &Path,
    reports: &[MetricsReport],
    topology: &TopologyFile,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    if reports.len() == 1 {
        write_json(&out.join("metrics.json"), &reports[0])?;
    } else {
        write_json(&out.join("metrics.json"), &reports)?;
    }
    write_rmse_csv(&out.join("rmse.csv"), reports)?;
    write_json(&out.join("topology.json"), topology)?;
    Ok(())
}

fn print_table(reports: &[MetricsReport]) {
    println!(
        "{:<12} {:>10} {:>14} {:>12} {:>16} {:>12} {:>14}",
        "method", "ARMSE[m]", "adjARMSE[m]", "sigma[m]", "adj sigma[m]", "loss[%]", "tx/step"
    );
    for r in reports {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "-".to_owned(),
        };
        println!(
            "{:<12} {:>10.4} {:>14.4} {:>12} {:>16} {:>12.2} {:>14}",
            r.method,
            r.armse_m,
            r.adjusted_armse_m,
            fmt_opt(r.sigma_armse_m),
            fmt_opt(r.adjusted_sigma_armse_m),
            r.track_loss_percent,
            r.transmissions_per_step
        );
    }
}

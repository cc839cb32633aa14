use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vne_core::bfsn::BacktrackCounting;
use vne_core::hem::MergeScan;
use vne_core::sim::{self, Accrual, Algorithm, SimConfig};
use vne_core::workload::{self, ServerProfile, WorkloadConfig};

mod report;

#[derive(Parser)]
#[command(name = "vne", version, about = "Online virtual network embedding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a substrate and a stream of requests into a workload directory.
    Generate(GenerateArgs),
    /// Simulate one algorithm over a workload.
    Run(RunArgs),
    /// Replay a decision log against its workload.
    Validate(ValidateArgs),
    /// Align several metrics files into plot data and a summary table.
    Report(ReportArgs),
}

fn defaults() -> WorkloadConfig {
    WorkloadConfig::default()
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = defaults().seed)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = defaults().sn_nodes)]
    sn_nodes: usize,
    #[arg(long, default_value_t = defaults().sn_links)]
    sn_links: usize,
    #[arg(long, default_value_t = defaults().sn_bw_range.0)]
    sn_bw_min: f64,
    #[arg(long, default_value_t = defaults().sn_bw_range.1)]
    sn_bw_max: f64,
    /// Server type as NAME=CPU; repeat for several, drawn uniformly
    /// [default: 2x1860MHz=3720 2x2660MHz=5320]
    #[arg(long = "server", value_parser = parse_server)]
    servers: Vec<ServerProfile>,
    #[arg(long, default_value_t = defaults().vn_count)]
    vn_count: usize,
    #[arg(long, default_value_t = defaults().vn_size_range.0)]
    vn_size_min: usize,
    #[arg(long, default_value_t = defaults().vn_size_range.1)]
    vn_size_max: usize,
    /// Target link density of each request.
    #[arg(long, default_value_t = defaults().vn_connectivity)]
    vn_connectivity: f64,
    /// Comma-separated CPU demands drawn uniformly [default: 2500,2000,1000,500]
    #[arg(long, value_delimiter = ',')]
    vn_cpu: Vec<f64>,
    #[arg(long, default_value_t = defaults().vn_bw_range.0)]
    vn_bw_min: f64,
    #[arg(long, default_value_t = defaults().vn_bw_range.1)]
    vn_bw_max: f64,
    /// Mean requests per time unit.
    #[arg(long, default_value_t = defaults().arrival_rate)]
    arrival_rate: f64,
    #[arg(long, default_value_t = defaults().lifetime_range.0)]
    lifetime_min: f64,
    #[arg(long, default_value_t = defaults().lifetime_range.1)]
    lifetime_max: f64,
    #[arg(long, default_value_t = defaults().waxman_alpha)]
    waxman_alpha: f64,
    #[arg(long, default_value_t = defaults().waxman_beta)]
    waxman_beta: f64,
    #[arg(long, default_value_t = defaults().plane_size)]
    plane_size: f64,
}

fn parse_server(s: &str) -> Result<ServerProfile, String> {
    let (name, cpu) = s.split_once('=').ok_or("expected NAME=CPU")?;
    let cpu: f64 = cpu.parse().map_err(|_| format!("bad cpu capacity {cpu:?}"))?;
    Ok(ServerProfile { name: name.to_string(), cpu_capacity: cpu })
}

impl GenerateArgs {
    fn config(&self) -> WorkloadConfig {
        let base = defaults();
        WorkloadConfig {
            seed: self.seed,
            sn_nodes: self.sn_nodes,
            sn_links: self.sn_links,
            sn_bw_range: (self.sn_bw_min, self.sn_bw_max),
            server_profiles: if self.servers.is_empty() { base.server_profiles } else { self.servers.clone() },
            vn_count: self.vn_count,
            vn_size_range: (self.vn_size_min, self.vn_size_max),
            vn_connectivity: self.vn_connectivity,
            vn_cpu_choices: if self.vn_cpu.is_empty() { base.vn_cpu_choices } else { self.vn_cpu.clone() },
            vn_bw_range: (self.vn_bw_min, self.vn_bw_max),
            arrival_rate: self.arrival_rate,
            lifetime_range: (self.lifetime_min, self.lifetime_max),
            waxman_alpha: self.waxman_alpha,
            waxman_beta: self.waxman_beta,
            plane_size: self.plane_size,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AccrualArg {
    DiscreteUnits,
    Continuous,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountingArg {
    Exhaustions,
    EveryDelete,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanArg {
    Restart,
    Continue,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    workload: PathBuf,
    /// bfsn, bfsn-hem or greedy
    #[arg(long, default_value = "bfsn")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 2)]
    max_hops: usize,
    /// Backtracks allowed per request, as a multiple of its node count;
    /// `unbounded` disables the limit.
    #[arg(long, default_value = "3", value_parser = parse_factor)]
    backtrack_factor: Factor,
    #[arg(long, default_value_t = 30_000)]
    horizon: u64,
    #[arg(long, default_value_t = 100)]
    sample_every: u64,
    #[arg(long, value_enum, default_value = "discrete-units")]
    accrual: AccrualArg,
    #[arg(long, value_enum, default_value = "exhaustions")]
    backtrack_counting: CountingArg,
    /// Merge order used by the coarsening step of bfsn-hem.
    #[arg(long, value_enum, default_value = "restart")]
    merge_scan: ScanArg,
    /// Output prefix; `.metrics.csv`, `.decisions.csv` and `.mappings.txt` are appended.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy)]
struct Factor(Option<usize>);

fn parse_factor(s: &str) -> Result<Factor, String> {
    if s == "unbounded" {
        return Ok(Factor(None));
    }
    s.parse().map(|f| Factor(Some(f))).map_err(|_| format!("expected a count or `unbounded`, got {s:?}"))
}

impl RunArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            algorithm: self.algorithm,
            max_hops: self.max_hops,
            backtrack_factor: self.backtrack_factor.0,
            horizon: self.horizon,
            sample_every: self.sample_every,
            accrual: match self.accrual {
                AccrualArg::DiscreteUnits => Accrual::DiscreteUnits,
                AccrualArg::Continuous => Accrual::Continuous,
            },
            counting: match self.backtrack_counting {
                CountingArg::Exhaustions => BacktrackCounting::Exhaustions,
                CountingArg::EveryDelete => BacktrackCounting::EveryDelete,
            },
            merge_scan: match self.merge_scan {
                ScanArg::Restart => MergeScan::Restart,
                ScanArg::Continue => MergeScan::Continue,
            },
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    decisions: PathBuf,
    /// Mapping sidecar written by `run` [default: next to the decisions file]
    #[arg(long)]
    mappings: Option<PathBuf>,
    /// Hop limit to check against [default: the one recorded in the sidecar]
    #[arg(long)]
    max_hops: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    metrics: Vec<PathBuf>,
    /// Directory for the plot data, summary table and plot script.
    #[arg(long)]
    out: PathBuf,
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let cfg = args.config();
    let generated = workload::generate_workload(&cfg)?;
    workload::write_workload(&args.out_dir, &generated)?;
    println!(
        "wrote {}-node/{}-link substrate and {} requests to {}",
        generated.substrate.nodes.len(),
        generated.substrate.edges.len(),
        generated.requests.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.config();
    let w = workload::read_workload(&args.workload)?;
    let result = sim::simulate_workload(&w, &cfg);
    sim::write_run(&args.out, &cfg, &result)?;

    let log = &result.decisions;
    let accepted = log.iter().filter(|r| r.accepted).count();
    let revenue = sim::long_term_avg_revenue(log, cfg.horizon, cfg.accrual)?;
    println!("algorithm         {}", cfg.algorithm);
    println!("requests          {} ({accepted} accepted)", log.len());
    println!("acceptance ratio  {}", fmt_opt(sim::acceptance_ratio(log)));
    println!("avg revenue       {revenue:.4}");
    println!("revenue/cost      {}", fmt_opt(sim::revenue_cost_ratio(log, cfg.horizon, cfg.accrual)));
    Ok(())
}

fn default_mappings(decisions: &Path) -> PathBuf {
    let name = decisions.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".decisions.csv").unwrap_or(&name);
    decisions.with_file_name(format!("{stem}.mappings.txt"))
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let w = workload::read_workload(&args.workload)?;
    let file = std::fs::File::open(&args.decisions).with_context(|| args.decisions.display().to_string())?;
    let log = sim::read_decisions(file).with_context(|| args.decisions.display().to_string())?;
    let mappings_path = args.mappings.clone().unwrap_or_else(|| default_mappings(&args.decisions));
    let text = std::fs::read_to_string(&mappings_path).with_context(|| mappings_path.display().to_string())?;
    let mappings = sim::parse_mappings(&text).with_context(|| mappings_path.display().to_string())?;
    let max_hops = args.max_hops.or(mappings.max_hops).unwrap_or(SimConfig::default().max_hops);

    let summary = sim::replay_audit(&w, &log, &mappings, max_hops)?;
    println!("ok: {} accepted, {} rejected, residuals restored", summary.accepted, summary.rejected);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Validate(a) => validate(a),
        Command::Report(a) => report::report(&a.metrics, &a.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rpsel::bench::{run_compare, run_simulate, ExperimentConfig};
use rpsel::metrics::{auto_bounds_with, DelayPopulation, Objective};
use rpsel::selectors::{select, Algorithm, SelectError, VnsConfig};
use rpsel::topology::{sample_group, waxman_generate, WaxmanParams};
use rpsel::{Graph, MulticastGroup, QosBounds, RpInstance};

#[derive(Parser, Debug)]
#[command(name = "rpsel", version, about = "Rendezvous-point selection for shared multicast trees")]
struct Cli {
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// JSON experiment config (compare, simulate).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a Waxman topology and a multicast group.
    Gen(GenArgs),
    /// Select an RP for one topology and group.
    Select(SelectArgs),
    /// Compare selectors over generated instances.
    Compare(SweepArgs),
    /// Replay synthetic sessions over generated instances.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    /// Fraction of nodes that receive.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, default_value_t = 1)]
    sources: usize,
    /// Keep only the largest connected component.
    #[arg(long)]
    connected: bool,
    /// Use the same cost and delay in both directions of a link.
    #[arg(long)]
    symmetric: bool,
    /// Base name of the written `.edges` and `.group` files.
    #[arg(long, default_value = "topology")]
    name: String,
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// Group file.
    #[arg(long)]
    group: PathBuf,
    #[arg(long, default_value = "vns")]
    algo: Algorithm,
    /// Delay bound: a number, `inf`, or `auto`.
    #[arg(long, default_value = "auto")]
    alpha: String,
    /// Delay-variation bound: a number, `inf`, or `auto`.
    #[arg(long, default_value = "auto")]
    beta: String,
    /// Write the per-iteration search trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Comma-separated eligible RPs (default: all nodes).
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    /// `all-pairs` or `first-source`.
    #[arg(long, default_value = "all-pairs", value_parser = parse_population)]
    population: DelayPopulation,
    /// `penalized` or `lexicographic`.
    #[arg(long, default_value = "penalized", value_parser = parse_objective)]
    objective: Objective,
    /// Print the CSV header before the row.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated network sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    instances: Option<usize>,
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<Algorithm>>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    sources: Option<usize>,
    /// Omit the timestamp header line.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Comma-separated mobility multipliers.
    #[arg(long, value_delimiter = ',')]
    mobility: Option<Vec<f64>>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    sessions: Option<usize>,
}

fn parse_population(s: &str) -> Result<DelayPopulation, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown population `{s}`"))
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown objective `{s}`"))
}

/// Failure that maps to a specific exit code.
#[derive(Debug)]
struct Infeasible;

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("best solution found is infeasible")
    }
}

impl std::error::Error for Infeasible {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Infeasible>() => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if cli.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(cli, a),
        Cmd::Select(a) => cmd_select(cli, a),
        Cmd::Compare(a) => cmd_compare(cli, a),
        Cmd::Simulate(a) => cmd_simulate(cli, a),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(1);
    let params = WaxmanParams {
        alpha: a.alpha,
        beta: a.beta,
        symmetric_weights: a.symmetric,
        ..WaxmanParams::new(a.n, seed)
    };
    let mut topo = waxman_generate(&params)?;
    if a.connected {
        topo = topo.largest_component().0;
    }
    let g = &topo.graph;
    let group = sample_group(g, a.fraction, a.sources, seed ^ 0x5eed)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    write(&cli.out.join(format!("{}.edges", a.name)), &g.to_edge_list())?;
    write(&cli.out.join(format!("{}.group", a.name)), &group.to_group_file())?;
    println!(
        "nodes {} edges {} mean_degree {:.4}",
        g.node_count(),
        g.edge_count(),
        g.mean_degree()
    );
    Ok(())
}

fn parse_bound(s: &str, auto: f64) -> Result<f64> {
    match s {
        "auto" => Ok(auto),
        "inf" => Ok(f64::INFINITY),
        x => x.parse().with_context(|| format!("invalid bound `{x}`")),
    }
}

fn cmd_select(cli: &Cli, a: &SelectArgs) -> Result<()> {
    let g = Graph::from_edge_list(&read(&a.graph)?)?;
    let group = MulticastGroup::from_group_file(&read(&a.group)?)?;
    group.validate(&g).map_err(anyhow::Error::msg)?;
    let auto = if a.alpha == "auto" || a.beta == "auto" {
        auto_bounds_with(&g, &group, a.population).context("computing automatic bounds")?
    } else {
        QosBounds::unbounded()
    };
    let bounds = QosBounds::new(
        parse_bound(&a.alpha, auto.delay_bound)?,
        parse_bound(&a.beta, auto.variation_bound)?,
    )
    .map_err(anyhow::Error::msg)?;
    let mut inst = RpInstance::new(&g, &group, bounds)
        .with_population(a.population)
        .with_objective(a.objective);
    if let Some(c) = &a.candidates {
        if let Some(&bad) = c.iter().find(|&&v| v >= g.node_count()) {
            bail!("candidate {bad} out of range");
        }
        inst = inst.with_candidates(c.iter().copied());
    }
    let cfg = VnsConfig {
        rng_seed: cli.seed.unwrap_or(0),
        ..VnsConfig::for_size(g.node_count())
    };
    let r = match select(a.algo, &inst, &cfg) {
        Ok(r) => r,
        Err(e @ SelectError::NoFeasibleTree(_)) => {
            eprintln!("error: {e}");
            return Err(Infeasible.into());
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.trace {
        write(path, &r.trace_csv())?;
    }
    let name = a
        .graph
        .file_stem()
        .map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned());
    if a.header {
        println!("{}", rpsel::TreeEvaluation::csv_header());
    }
    println!("{}", r.eval.csv_row(&name, a.algo.name(), r.rp));
    if r.eval.feasible {
        Ok(())
    } else {
        Err(Infeasible.into())
    }
}

fn load_config(cli: &Cli, a: &SweepArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(v) = &a.sizes {
        cfg.network_sizes = v.clone();
    }
    if let Some(v) = a.instances {
        cfg.instances_per_size = v;
    }
    if let Some(v) = &a.algos {
        cfg.algorithms = v.clone();
    }
    if let Some(v) = a.fraction {
        cfg.group_fraction = v;
    }
    if let Some(v) = a.sources {
        cfg.n_sources = v;
    }
    cfg.validate().map_err(anyhow::Error::msg)?;
    Ok(cfg)
}

fn timestamp(a: &SweepArgs) -> Option<String> {
    if a.no_timestamp {
        return None;
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Some(format!("unix {secs}"))
}

fn cmd_compare(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let cfg = load_config(cli, a)?;
    let report = run_compare(&cfg, cli.jobs).map_err(anyhow::Error::msg)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    write(&cli.out.join("compare.csv"), &report.to_csv(timestamp(a).as_deref()))?;
    write(&cli.out.join("compare_summary.csv"), &report.summary_csv())?;
    println!(
        "rows {} errors {} written to {}",
        report.rows.len() - report.error_rows(),
        report.error_rows(),
        cli.out.display()
    );
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(cli, &a.sweep)?;
    let mut params = cfg.session.unwrap_or_default();
    if let Some(d) = a.duration {
        params.duration = d;
    }
    cfg.session = Some(params);
    if let Some(m) = &a.mobility {
        cfg.mobility_sweep = m.clone();
    }
    if let Some(s) = a.sessions {
        cfg.sessions_per_instance = s;
    }
    let report = run_simulate(&cfg, cli.jobs).map_err(anyhow::Error::msg)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    write(&cli.out.join("sessions.jsonl"), &report.to_jsonl())?;
    let mut summary = String::new();
    if let Some(t) = timestamp(&a.sweep) {
        summary.push_str(&format!("# generated: {t}\n"));
    }
    summary.push_str(&report.summary_csv());
    write(&cli.out.join("simulate_summary.csv"), &summary)?;
    let failed = report.records.iter().filter(|r| r.outcome.is_err()).count();
    println!(
        "sessions {} errors {} written to {}",
        report.records.len() - failed,
        failed,
        cli.out.display()
    );
    Ok(())
}

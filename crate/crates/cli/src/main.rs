use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wbal_core::balancer::{run_algo1, BalancerParams, BetaPolicy};
use wbal_core::baseline::run_imbalance_correcting;
use wbal_core::bistochastic::{run_algo2, Algo2Mode, BetaRule, BistochasticParams};
use wbal_core::consensus::consensus_run;
use wbal_core::experiment::{run_experiment, ExperimentConfig};
use wbal_core::graph::{parse_edge_list, random_strongly_connected, Digraph};
use wbal_core::spectral::{build_update_matrix, convergence_rate, spectrum};
use wbal_core::trace::{save_trace, RunTrace, StopRule};
use wbal_core::WeightState;

/// Distributed weight balancing and doubly stochastic weight formation on
/// directed graphs.
#[derive(Parser)]
#[command(name = "wbal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the weight-balancing algorithm
    Balance(BalanceArgs),
    /// Run the doubly stochastic weight formation algorithm
    Bistochastic(BistochasticArgs),
    /// Run the imbalance-correcting baseline
    Baseline(BaselineArgs),
    /// Print the update matrix, its spectrum and the predicted rate
    Spectral(SpectralArgs),
    /// Average consensus driven by the doubly stochastic formation
    Consensus(ConsensusArgs),
    /// Run a batch experiment described by a config file
    Compare(CompareArgs),
    /// Emit a random strongly connected edge list
    Gen(GenArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file
    #[arg(long, conflicts_with = "n")]
    graph: Option<PathBuf>,
    /// Node count of a generated graph
    #[arg(long)]
    n: Option<usize>,
    /// Extra-edge probability of a generated graph
    #[arg(long, default_value_t = 0.2)]
    p: f64,
    /// Generator seed (also seeds random initial values)
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GraphArgs {
    fn load(&self) -> Result<Digraph> {
        match (&self.graph, self.n) {
            (Some(path), _) => {
                let text = read(path)?;
                parse_edge_list(&text).with_context(|| path.display().to_string())
            }
            (None, Some(n)) => Ok(random_strongly_connected(n, self.p, self.seed)?),
            (None, None) => bail!("either --graph or --n is required"),
        }
    }
}

#[derive(Args)]
struct StopArgs {
    /// Stop once the convergence metric is at most this value
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Round limit
    #[arg(long, default_value_t = 100_000)]
    max_rounds: usize,
}

impl StopArgs {
    fn rule(&self) -> StopRule<f64> {
        StopRule::new(self.tol, self.max_rounds)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the per-round trace CSV here
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Decimals in printed weights: 4 or full
    #[arg(long, default_value = "4")]
    precision: Precision,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    #[value(name = "4")]
    Four,
    Full,
}

impl Precision {
    fn fmt(self, x: f64) -> String {
        match self {
            Precision::Four => format!("{x:.4}"),
            Precision::Full => format!("{x}"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Standard,
    #[value(alias = "constant-beta")]
    Prop3,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Capped,
    Uncapped,
}

#[derive(Args)]
struct BalanceArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Step size applied to every node
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Per-node step sizes, whitespace separated (overrides --beta)
    #[arg(long)]
    params: Option<PathBuf>,
    /// Require every beta strictly inside (0, 1)
    #[arg(long, conflicts_with = "permissive")]
    strict: bool,
    /// Accept all beta = 1 and graphs that are not strongly connected
    #[arg(long)]
    permissive: bool,
    #[command(flatten)]
    stop: StopArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct Algo2Args {
    /// Parameter applied to every node, in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Per-node alpha values, whitespace separated (overrides --alpha)
    #[arg(long)]
    params: Option<PathBuf>,
    /// standard, or prop3 for constant beta = alpha with scaled initial weights
    #[arg(long, value_enum, default_value = "standard")]
    mode: ModeArg,
    /// Initialization scale of prop3 mode (defaults to the node count)
    #[arg(long)]
    m: Option<usize>,
    /// Step-size rule of standard mode
    #[arg(long, value_enum, default_value = "capped")]
    beta_rule: RuleArg,
}

impl Algo2Args {
    fn params(&self, n: usize) -> Result<BistochasticParams<f64>> {
        Ok(BistochasticParams {
            alpha: node_values(self.alpha, self.params.as_deref(), n)?,
            mode: match self.mode {
                ModeArg::Standard => Algo2Mode::Standard,
                ModeArg::Prop3 => Algo2Mode::ConstantBeta,
            },
            m: self.m.unwrap_or(n),
            beta_rule: match self.beta_rule {
                RuleArg::Capped => BetaRule::Capped,
                RuleArg::Uncapped => BetaRule::Uncapped,
            },
        })
    }
}

#[derive(Args)]
struct BistochasticArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    algo: Algo2Args,
    #[command(flatten)]
    stop: StopArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    stop: StopArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SpectralArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Step size applied to every node
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Per-node step sizes, whitespace separated (overrides --beta)
    #[arg(long)]
    params: Option<PathBuf>,
    /// Decimals in printed values: 4 or full
    #[arg(long, default_value = "4")]
    precision: Precision,
}

#[derive(Args)]
struct ConsensusArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    algo: Algo2Args,
    /// Initial values, whitespace separated
    #[arg(long, conflicts_with = "x0_random", required_unless_present = "x0_random")]
    x0: Option<PathBuf>,
    /// Draw initial values uniformly from [0, 1) using --seed
    #[arg(long)]
    x0_random: bool,
    /// Stop once every value is within this distance of the average
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Round limit
    #[arg(long, default_value_t = 100_000)]
    max_rounds: usize,
    /// Write the value trajectory CSV here
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Decimals in printed values: 4 or full
    #[arg(long, default_value = "4")]
    precision: Precision,
}

#[derive(Args)]
struct CompareArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides out_dir in the config)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Node count
    #[arg(long)]
    n: usize,
    /// Extra-edge probability
    #[arg(long, default_value_t = 0.2)]
    p: f64,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .map(|tok| tok.parse::<f64>().with_context(|| format!("bad number {tok:?}")))
        .collect()
}

fn node_values(uniform: f64, file: Option<&Path>, n: usize) -> Result<Vec<f64>> {
    let Some(path) = file else {
        return Ok(vec![uniform; n]);
    };
    let values = parse_values(&read(path)?).with_context(|| path.display().to_string())?;
    if values.len() != n {
        bail!(
            "{}: {} values for a {n}-node graph",
            path.display(),
            values.len()
        );
    }
    Ok(values)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_summary(out: &mut String, trace: &RunTrace<f64>) {
    let last = trace.records.last();
    let _ = writeln!(out, "algorithm: {}", trace.algorithm);
    let _ = writeln!(out, "stop: {}", trace.stop_reason.as_str());
    let _ = writeln!(out, "rounds: {}", trace.rounds);
    if let Some(r) = last {
        let _ = writeln!(out, "epsilon: {:e}", r.epsilon);
        if let Some(ab) = r.ab {
            let _ = writeln!(out, "ab: {ab:e}");
        }
    }
}

fn weight_table(out: &mut String, g: &Digraph, w: &WeightState<f64>, precision: Precision) {
    let _ = writeln!(out, "src dst weight");
    for (id, &(src, dst)) in g.edges().iter().enumerate() {
        let _ = writeln!(out, "{src} {dst} {}", precision.fmt(w.edge_weights[id]));
    }
    if w.self_weights.is_some() {
        let _ = writeln!(out, "node self_weight");
        for j in 0..g.node_count() {
            let _ = writeln!(out, "{j} {}", precision.fmt(w.self_weight(j)));
        }
    }
}

fn finish_run(
    g: &Digraph,
    w: &WeightState<f64>,
    trace: &RunTrace<f64>,
    out_args: &OutputArgs,
) -> Result<String> {
    if let Some(path) = &out_args.trace {
        save_trace(trace, path)?;
    }
    let mut out = String::new();
    run_summary(&mut out, trace);
    weight_table(&mut out, g, w, out_args.precision);
    Ok(out)
}

fn balance(args: &BalanceArgs) -> Result<String> {
    let g = args.graph.load()?;
    let beta = node_values(args.beta, args.params.as_deref(), g.node_count())?;
    let policy = if args.strict {
        BetaPolicy::Strict
    } else if args.permissive {
        BetaPolicy::Permissive
    } else {
        BetaPolicy::Primitive
    };
    let mut params = BalancerParams::new(beta, policy);
    params.allow_disconnected = args.permissive;
    let (w, trace) = run_algo1(&g, &params, &args.stop.rule())?;
    finish_run(&g, &w, &trace, &args.out)
}

fn bistochastic(args: &BistochasticArgs) -> Result<String> {
    let g = args.graph.load()?;
    let params = args.algo.params(g.node_count())?;
    let (w, trace) = run_algo2(&g, &params, &args.stop.rule())?;
    finish_run(&g, &w, &trace, &args.out)
}

fn baseline(args: &BaselineArgs) -> Result<String> {
    let g = args.graph.load()?;
    let (w, trace) = run_imbalance_correcting(&g, &args.stop.rule())?;
    finish_run(&g, &w, &trace, &args.out)
}

fn spectral(args: &SpectralArgs) -> Result<String> {
    let g = args.graph.load()?;
    let beta = node_values(args.beta, args.params.as_deref(), g.node_count())?;
    let m = build_update_matrix(&g, &beta)?;
    let report = spectrum(&m)?;
    let f = |x: f64| args.precision.fmt(x);
    let mut out = String::from("P\n");
    for row in m.entries.rows() {
        let cells: Vec<String> = row.into_iter().map(f).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    let moduli: Vec<String> = report.moduli.iter().map(|&x| f(x)).collect();
    let _ = writeln!(out, "moduli: {}", moduli.join(" "));
    let _ = writeln!(out, "rho: {}", f(report.rho));
    let _ = writeln!(out, "delta: {}", f(report.delta));
    let _ = writeln!(out, "primitive: {}", report.primitive);
    match convergence_rate(&report) {
        Ok(rate) => {
            let _ = writeln!(out, "rate: {}", f(rate));
        }
        Err(e) => {
            let _ = writeln!(out, "rate: undefined ({e})");
        }
    }
    Ok(out)
}

fn consensus(args: &ConsensusArgs) -> Result<String> {
    let g = args.graph.load()?;
    let n = g.node_count();
    let x0 = match &args.x0 {
        Some(path) => node_values(0.0, Some(path), n)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.graph.seed);
            (0..n).map(|_| rng.gen::<f64>()).collect()
        }
    };
    let params = args.algo.params(n)?;
    let run = consensus_run(&g, &params, &x0, &StopRule::new(args.tol, args.max_rounds))?;
    if let Some(path) = &args.trajectory {
        let mut csv = String::from("round");
        for j in 0..n {
            let _ = write!(csv, ",x_{j}");
        }
        csv.push('\n');
        for (k, x) in run.trajectory.iter().enumerate() {
            let _ = write!(csv, "{k}");
            for v in x {
                let _ = write!(csv, ",{v:.16e}");
            }
            csv.push('\n');
        }
        std::fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let mean = x0.iter().sum::<f64>() / n as f64;
    let f = |x: f64| args.precision.fmt(x);
    let mut out = String::new();
    let _ = writeln!(out, "stop: {}", run.stop_reason.as_str());
    let _ = writeln!(out, "rounds: {}", run.rounds);
    let _ = writeln!(out, "mean: {}", f(mean));
    let _ = writeln!(out, "node initial final");
    for (j, (a, b)) in x0.iter().zip(run.final_values()).enumerate() {
        let _ = writeln!(out, "{j} {} {}", f(*a), f(*b));
    }
    Ok(out)
}

fn compare(args: &CompareArgs) -> Result<String> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = &args.out {
        config.out_dir = Some(dir.clone());
    }
    let summary = run_experiment(&config)?;
    let mut out = String::from("label runs converged median_rounds\n");
    for label in &summary.labels {
        let mut rounds: Vec<usize> = summary
            .runs
            .iter()
            .filter(|r| &r.label == label)
            .filter_map(|r| r.result.as_ref().ok())
            .filter(|t| t.converged())
            .map(|t| t.rounds)
            .collect();
        let runs = summary.runs.iter().filter(|r| &r.label == label).count();
        rounds.sort_unstable();
        let median = match rounds.len() {
            0 => "-".to_string(),
            k if k % 2 == 1 => rounds[k / 2].to_string(),
            k => format!("{}", (rounds[k / 2 - 1] + rounds[k / 2]) as f64 / 2.0),
        };
        let _ = writeln!(out, "{label} {runs} {} {median}", rounds.len());
    }
    for failure in summary.failures() {
        if let Err(e) = &failure.result {
            let _ = writeln!(out, "failed: {} rep {}: {e}", failure.label, failure.rep);
        }
    }
    if let Some(dir) = &config.out_dir {
        let _ = writeln!(out, "wrote {}", dir.display());
    }
    Ok(out)
}

fn gen(args: &GenArgs) -> Result<String> {
    let g = random_strongly_connected(args.n, args.p, args.seed)?;
    write_or_print(args.out.as_deref(), &g.to_edge_list())?;
    Ok(String::new())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Balance(a) => balance(a),
        Command::Bistochastic(a) => bistochastic(a),
        Command::Baseline(a) => baseline(a),
        Command::Spectral(a) => spectral(a),
        Command::Consensus(a) => consensus(a),
        Command::Compare(a) => compare(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

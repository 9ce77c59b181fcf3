use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pfss_core::heuristics::neh;
use pfss_core::io::{generate, load_any, save_dataset, DatasetSpec, TimeDistribution};
use pfss_core::mdp::TraceSet;
use pfss_core::mip::emit_mip;
use pfss_harness::experiment::SweepSpec;
use pfss_harness::{run_solve, sweep_machines, sweep_sigma, ExperimentConfig, HarnessError, Report};
use pfss_policy::{save_checkpoint, Aggregation, Checkpoint, Neighborhood, Norm, PolicyConfig, TrainConfig, Validation};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "pfss", version, about = "Permutation flow-shop experiments: datasets, solvers, learned policies, sweeps")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (dataset, checkpoint, model or report; `.json` reports are JSON, others CSV).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Solve instances concurrently (timings then cover whole batches).
    #[arg(long, global = true)]
    parallel: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Gamma,
    Normal,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "gamma")]
    dist: Dist,
    /// Jobs per instance.
    #[arg(long)]
    n: usize,
    /// Machines.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    shape: f64,
    #[arg(long, default_value_t = 2.0)]
    scale: f64,
    #[arg(long, default_value_t = 6.0)]
    mean: f64,
    /// Standard deviation of the normal distribution.
    #[arg(long, default_value_t = 6.0)]
    sigma: f64,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Comma-separated method names (neh, rs, ils, ig, exact, policy:<checkpoint>).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated trial seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Number of trials, seeded base, base+1, ...
    #[arg(long, conflicts_with = "seeds")]
    trials: Option<u64>,
    /// Method defining zero gap.
    #[arg(long)]
    expert: Option<String>,
    /// Baseline of the signed-rank tests.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    rs_iterations: Option<u64>,
    #[arg(long)]
    ils_iterations: Option<u64>,
    #[arg(long)]
    ig_iterations: Option<u64>,
    /// Per-instance wall-clock budget in seconds for the stochastic methods.
    #[arg(long)]
    max_time: Option<f64>,
    /// One row per seed instead of trial averages.
    #[arg(long)]
    per_seed: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Dataset, Taillard or VRF file (defaults to the config's dataset).
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Instances to imitate; NEH traces are recorded from them.
    #[arg(long, conflicts_with = "traces")]
    data: Option<PathBuf>,
    /// Previously recorded trace file.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Held-out instances for the per-epoch validation gap.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
    #[arg(long, value_enum)]
    aggregation: Option<AggArg>,
    /// Aggregate over every other job instead of the nearest ones.
    #[arg(long)]
    dense: bool,
    /// Newline-delimited JSON training log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Batch,
    Layer,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    Mean,
    Sum,
    Max,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    expert: Option<String>,
}

#[derive(Args)]
struct SweepSize {
    /// Jobs per test instance.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Test instances per sweep point.
    #[arg(long, default_value_t = 100)]
    count: usize,
}

#[derive(Args)]
struct SweepSigmaArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6")]
    sigmas: Vec<f64>,
    /// First method (name or policy:<checkpoint>).
    #[arg(long)]
    a: String,
    /// Second method.
    #[arg(long)]
    b: String,
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[command(flatten)]
    size: SweepSize,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepMachinesArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    machines: Vec<usize>,
    #[command(flatten)]
    size: SweepSize,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ExportArgs {
    /// Report to convert (JSON keeps per-trial detail).
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    format: ExportFormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct EmitMipArgs {
    #[arg(long)]
    data: PathBuf,
    /// Which instance of the file.
    #[arg(long, default_value_t = 0)]
    index: usize,
}

#[derive(Args)]
struct BruteForceArgs {
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random dataset.
    Generate(GenerateArgs),
    /// Run solvers over a dataset and report makespans and gaps.
    Solve(SolveArgs),
    /// Train a policy by behavior cloning on NEH decisions.
    Train(TrainArgs),
    /// Evaluate a policy checkpoint on a dataset.
    Eval(EvalArgs),
    /// Compare two methods over Normal(6, sigma) test sets.
    SweepSigma(SweepSigmaArgs),
    /// Run methods over Gamma test sets with different machine counts.
    SweepMachines(SweepMachinesArgs),
    /// Convert a report between CSV and JSON.
    Export(ExportArgs),
    /// Write the mixed-integer model of one instance in LP format.
    EmitMip(EmitMipArgs),
    /// Solve small instances exactly and compare with NEH.
    BruteForce(BruteForceArgs),
}

/// `[policy]` and `[train]` tables of a training configuration file.
#[derive(Deserialize, Default)]
#[serde(default)]
struct TrainFile {
    policy: Option<PolicyConfig>,
    train: TrainConfig,
}

fn need_out(cli: &Cli) -> Result<&Path, HarnessError> {
    cli.out.as_deref().ok_or_else(|| HarnessError::Usage("--out is required for this command".into()))
}

fn experiment(cli: &Cli, run: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &run.methods {
        cfg.methods = m.clone();
    }
    let base = cli.seed.unwrap_or(0);
    if let Some(s) = &run.seeds {
        cfg.seeds = s.clone();
    } else if let Some(k) = run.trials {
        cfg.seeds = (0..k).map(|i| base + i).collect();
    } else if cli.seed.is_some() {
        cfg.seeds = (0..cfg.seeds.len() as u64).map(|i| base + i).collect();
    }
    if let Some(e) = &run.expert {
        cfg.expert = e.clone();
    }
    if run.reference.is_some() {
        cfg.reference = run.reference.clone();
    }
    let p = &mut cfg.params;
    p.rs_iterations = run.rs_iterations.unwrap_or(p.rs_iterations);
    p.ils_iterations = run.ils_iterations.unwrap_or(p.ils_iterations);
    p.ig_iterations = run.ig_iterations.unwrap_or(p.ig_iterations);
    if run.max_time.is_some() {
        p.max_time = run.max_time;
    }
    cfg.average_trials &= !run.per_seed;
    cfg.parallel |= cli.parallel;
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit_report(report: &Report, out: Option<&Path>) -> Result<(), HarnessError> {
    print!("{}", report.to_table());
    if let Some(path) = out {
        report.save(path)?;
        eprintln!("report written to {}", path.display());
    }
    Ok(())
}

fn load_instances(path: &Path) -> Result<Vec<pfss_core::Instance>, HarnessError> {
    load_any(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<(), HarnessError> {
    let distribution = match a.dist {
        Dist::Gamma => TimeDistribution::Gamma { shape: a.shape, scale: a.scale },
        Dist::Normal => TimeDistribution::Normal { mean: a.mean, std_dev: a.sigma },
    };
    let spec = DatasetSpec { count: a.count, jobs: a.n, machines: a.m, distribution, seed: cli.seed.unwrap_or(0) };
    let out = need_out(cli)?;
    save_dataset(out, &generate(&spec)?, Some(&spec))?;
    eprintln!("{} instances ({}x{}) written to {}", a.count, a.n, a.m, out.display());
    Ok(())
}

fn cmd_solve(cli: &Cli, a: &SolveArgs) -> Result<(), HarnessError> {
    let cfg = experiment(cli, &a.run)?;
    let instances = match (&a.data, &cfg.dataset) {
        (Some(p), _) => load_instances(p)?,
        (None, Some(src)) => src.load()?,
        (None, None) => return Err(HarnessError::Usage("give --data or a [dataset] in the config".into())),
    };
    let report = run_solve(&instances, &cfg)?;
    emit_report(&report, cfg.output.as_deref())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<(), HarnessError> {
    let file: TrainFile = match &cli.config {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
        None => TrainFile::default(),
    };
    let mut tc = file.train;
    tc.seed = cli.seed.unwrap_or(tc.seed);
    tc.epochs = a.epochs.unwrap_or(tc.epochs);
    tc.batch_size = a.batch_size.unwrap_or(tc.batch_size);
    tc.learning_rate = a.lr.unwrap_or(tc.learning_rate);
    tc.lr_decay = a.decay.unwrap_or(tc.lr_decay);
    if a.log.is_some() {
        tc.log_path = a.log.clone();
    }
    if a.checkpoint_dir.is_some() {
        tc.checkpoint_dir = a.checkpoint_dir.clone();
    }
    if a.checkpoint_every.is_some() {
        tc.checkpoint_every = a.checkpoint_every;
    }
    if a.traces.is_some() {
        tc.traces = a.traces.clone();
    }
    if a.val.is_some() {
        tc.validation = a.val.clone();
    }
    if tc.checkpoint_dir.is_some() && tc.checkpoint_every.is_none() {
        tc.checkpoint_every = Some(1);
    }
    let traces = match (&a.data, &tc.traces) {
        (Some(data), _) => TraceSet::record(load_instances(data)?, "neh", neh)?,
        (None, Some(path)) => TraceSet::load(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?,
        (None, None) => return Err(HarnessError::Usage("give --data or --traces".into())),
    };
    let machines = traces.instances.first().map(|i| i.machines()).ok_or_else(|| HarnessError::Data("no training instances".into()))?;
    let mut pc = file.policy.unwrap_or_else(|| PolicyConfig::for_machines(machines));
    pc.hidden_dim = a.hidden_dim.unwrap_or(pc.hidden_dim);
    pc.layers = a.layers.unwrap_or(pc.layers);
    pc.heads = a.heads.unwrap_or(pc.heads);
    if let Some(n) = a.norm {
        pc.norm = match n {
            NormArg::Batch => Norm::Batch,
            NormArg::Layer => Norm::Layer,
            NormArg::None => Norm::None,
        };
    }
    if let Some(g) = a.aggregation {
        pc.aggregation = match g {
            AggArg::Mean => Aggregation::Mean,
            AggArg::Sum => Aggregation::Sum,
            AggArg::Max => Aggregation::Max,
        };
    }
    if a.dense {
        pc.neighborhood = Neighborhood::Dense;
    }
    let validation = tc.validation.as_deref().map(|p| load_instances(p).map(|insts| Validation::from_expert(insts, neh))).transpose()?;
    let out = need_out(cli)?;
    let outcome = pfss_policy::train(pc, &tc, &traces, validation.as_ref())?;
    for r in &outcome.log {
        eprintln!(
            "epoch {:>3}  loss {:.5}  val_gap {}  {:.1}s",
            r.epoch,
            r.train_loss,
            r.val_gap.map_or("-".into(), |g| format!("{g:.3}%")),
            r.elapsed_s
        );
    }
    let ckpt = Checkpoint { policy: outcome.policy, epoch: tc.epochs, metrics: outcome.log.last().cloned() };
    save_checkpoint(out, &ckpt)?;
    eprintln!("checkpoint written to {}", out.display());
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<(), HarnessError> {
    let run = RunArgs {
        methods: Some(vec![format!("policy:{}", a.checkpoint.display())]),
        // greedy decoding is deterministic: one trial suffices
        seeds: Some(vec![cli.seed.unwrap_or(0)]),
        expert: a.expert.clone(),
        ..Default::default()
    };
    let cfg = experiment(cli, &run)?;
    let report = run_solve(&load_instances(&a.data)?, &cfg)?;
    emit_report(&report, cfg.output.as_deref())
}

fn cmd_sweep_sigma(cli: &Cli, a: &SweepSigmaArgs) -> Result<(), HarnessError> {
    let cfg = experiment(cli, &a.run)?;
    let sweep = SweepSpec { count: a.size.count, jobs: a.size.n, machines: a.m, seed: cli.seed.unwrap_or(0) };
    let report = sweep_sigma(&a.sigmas, &a.a, &a.b, &sweep, &cfg)?;
    emit_report(&report, cfg.output.as_deref())
}

fn cmd_sweep_machines(cli: &Cli, a: &SweepMachinesArgs) -> Result<(), HarnessError> {
    let cfg = experiment(cli, &a.run)?;
    let sweep = SweepSpec { count: a.size.count, jobs: a.size.n, machines: 0, seed: cli.seed.unwrap_or(0) };
    let report = sweep_machines(&a.machines, &sweep, &cfg)?;
    emit_report(&report, cfg.output.as_deref())
}

fn cmd_export(cli: &Cli, a: &ExportArgs) -> Result<(), HarnessError> {
    let report = Report::load(&a.report)?;
    let text = match a.format {
        ExportFormatArg::Csv => report.to_csv()?,
        ExportFormatArg::Json => report.to_json()?,
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_emit_mip(cli: &Cli, a: &EmitMipArgs) -> Result<(), HarnessError> {
    let instances = load_instances(&a.data)?;
    let inst = instances
        .get(a.index)
        .ok_or_else(|| HarnessError::Usage(format!("instance {} requested, file has {}", a.index, instances.len())))?;
    let lp = emit_mip(inst);
    match &cli.out {
        Some(p) => std::fs::write(p, lp)?,
        None => print!("{lp}"),
    }
    Ok(())
}

fn cmd_brute_force(cli: &Cli, a: &BruteForceArgs) -> Result<(), HarnessError> {
    let run = RunArgs { methods: Some(vec!["exact".into(), "neh".into()]), seeds: Some(vec![0]), ..Default::default() };
    let cfg = experiment(cli, &run)?;
    let report = run_solve(&load_instances(&a.data)?, &cfg)?;
    emit_report(&report, cfg.output.as_deref())
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a),
        Command::Solve(a) => cmd_solve(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::SweepSigma(a) => cmd_sweep_sigma(cli, a),
        Command::SweepMachines(a) => cmd_sweep_machines(cli, a),
        Command::Export(a) => cmd_export(cli, a),
        Command::EmitMip(a) => cmd_emit_mip(cli, a),
        Command::BruteForce(a) => cmd_brute_force(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose { "info" } else { "warn" })).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use pcgrl::agents::train::train_with_progress;
use pcgrl::agents::{write_training_log, NetworkPolicy, Policy, PolicyFile, RandomPolicy, TrainerConfig};
use pcgrl::analysis::sokoban::{moves_to_string, SearchOutcome};
use pcgrl::analysis::SokobanPuzzle;
use pcgrl::env::EnvConfig;
use pcgrl::harness::{self, diversity, parse_pct_grid};
use pcgrl::level::{deserialize_level, render_ascii, Level};
use pcgrl::problems::ProblemConfig;
use pcgrl::representations::LocationMode;
use pcgrl::{ProblemKind, RepKind};

#[derive(Parser)]
#[command(name = "pcgrl", version, about = "Train and evaluate reinforcement-learning level generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write it as JSON.
    Train(TrainArgs),
    /// Success rate against change percentage, as CSV.
    Eval(EvalArgs),
    /// Write start and final levels plus a summary.
    Generate(GenerateArgs),
    /// Solve a Sokoban level.
    Solve(SolveArgs),
    /// Print a level as ASCII.
    Render(RenderArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long)]
    rep: RepKind,
    /// JSON with optional `trainer`, `problem`, `change_percentage`,
    /// `max_steps` and `narrow_location_mode` fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Training curve CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Overrides `trainer.total_steps`.
    #[arg(long)]
    steps: Option<usize>,
    /// Overrides `trainer.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `trainer.workers`.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct PolicyArgs {
    /// Trained policy file; may be repeated.
    #[arg(long)]
    policy: Vec<PathBuf>,
    /// Include the uniform random baseline.
    #[arg(long)]
    random: bool,
    /// Needed with `--random` alone.
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    rep: Option<RepKind>,
    /// Sample actions instead of taking the argmax.
    #[arg(long)]
    sample: bool,
    /// Narrow location order at inference.
    #[arg(long, value_enum, default_value = "scan")]
    location: Location,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Location {
    Scan,
    Random,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    policies: PolicyArgs,
    #[arg(long, default_value = "0:1:0.1")]
    pct_grid: String,
    #[arg(long, default_value_t = 40)]
    n: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    policies: PolicyArgs,
    #[arg(long, default_value_t = 1.0)]
    pct: f64,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    level: PathBuf,
    /// Expansions allowed per search phase.
    #[arg(long, default_value_t = pcgrl::analysis::DEFAULT_NODE_LIMIT)]
    node_limit: usize,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    level: PathBuf,
    /// Also print the problem statistics.
    #[arg(long)]
    stats: bool,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    trainer: TrainerConfig,
    problem: Option<serde_json::Value>,
    change_percentage: Option<f64>,
    max_steps: Option<usize>,
    narrow_location_mode: Option<LocationMode>,
}

fn read_level(path: &Path) -> Result<(ProblemKind, Level)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    deserialize_level(&text).with_context(|| format!("parsing {}", path.display()))
}

fn train(args: TrainArgs) -> Result<()> {
    let file: TrainFile = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => TrainFile::default(),
    };
    let problem = match &file.problem {
        Some(doc) => {
            let mut doc = doc.clone();
            if let Some(obj) = doc.as_object_mut() {
                obj.entry("kind").or_insert_with(|| args.problem.name().into());
            }
            let p = ProblemConfig::from_json(&doc.to_string())?;
            if p.kind != args.problem {
                bail!("config describes {} but --problem is {}", p.kind, args.problem);
            }
            p
        }
        None => ProblemConfig::new(args.problem),
    };
    let mut env = EnvConfig::new(problem, args.rep);
    if let Some(p) = file.change_percentage {
        env.change_percentage = p;
    }
    env.max_steps = file.max_steps;
    if let Some(m) = file.narrow_location_mode {
        env.narrow_location_mode = m;
    }
    env.validate()?;

    let mut trainer = file.trainer;
    if let Some(s) = args.steps {
        trainer.total_steps = s;
    }
    if let Some(s) = args.seed {
        trainer.seed = s;
    }
    if let Some(w) = args.workers {
        trainer.workers = w;
    }
    let quiet = args.quiet;
    let (net, log) = train_with_progress(&env, &trainer, |row| {
        if !quiet {
            eprintln!(
                "steps {:>9}  return {:>8.3}  success {:.2}  entropy {:.3}  clip {:.3}",
                row.steps, row.mean_reward, row.success_rate, row.entropy, row.clip_frac
            );
        }
    })?;
    net.to_file(env.rep, &env.problem).save(&args.out)?;
    if let Some(path) = &args.log {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_training_log(f, &log)?;
    }
    Ok(())
}

/// Policies plus the environment they share.
fn load_policies(args: &PolicyArgs) -> Result<(Vec<Box<dyn Policy>>, EnvConfig)> {
    if args.policy.is_empty() && !args.random {
        bail!("give at least one --policy or --random");
    }
    let mut env: Option<EnvConfig> = match (args.problem, args.rep) {
        (Some(p), Some(r)) => Some(EnvConfig::for_problem(p, r)),
        (None, None) => None,
        _ => bail!("--problem and --rep go together"),
    };
    let mut policies: Vec<Box<dyn Policy>> = Vec::new();
    for path in &args.policy {
        let file = PolicyFile::load(path).with_context(|| format!("loading {}", path.display()))?;
        let this = EnvConfig::new(file.problem.clone(), file.rep);
        match &env {
            Some(e) if e.problem != this.problem || e.rep != this.rep => {
                bail!("{} was trained for a different problem or representation", path.display())
            }
            Some(_) => {}
            None => env = Some(this),
        }
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        policies.push(Box::new(NetworkPolicy {
            label,
            net: file.network()?,
            sample: args.sample,
        }));
    }
    let Some(mut env) = env else {
        bail!("--random without a policy needs --problem and --rep");
    };
    if args.random {
        policies.push(Box::new(RandomPolicy {
            n_actions: env.num_actions(),
        }));
    }
    env.narrow_location_mode = match args.location {
        Location::Scan => LocationMode::Scan,
        Location::Random => LocationMode::Random,
    };
    env.seed = args.seed;
    Ok((policies, env))
}

fn eval(args: EvalArgs) -> Result<()> {
    let grid = parse_pct_grid(&args.pct_grid)?;
    let (policies, env) = load_policies(&args.policies)?;
    let refs: Vec<&dyn Policy> = policies.iter().map(|p| p.as_ref()).collect();
    let report = harness::evaluate(&refs, &env, &grid, args.n, args.policies.seed)?;
    match &args.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            report.write_csv(f)?;
            for row in &report.rows {
                eprintln!(
                    "{:<12} pct {:.2}  success {:.3}  changed {:.3}",
                    row.policy, row.pct, row.success_rate, row.mean_changed
                );
            }
        }
        None => report.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let (policies, env) = load_policies(&args.policies)?;
    if policies.len() != 1 {
        bail!("generate takes exactly one policy");
    }
    let summary = harness::generate(policies[0].as_ref(), &env, args.pct, args.n, &args.out, args.policies.seed)?;
    let finals = summary
        .levels
        .iter()
        .map(|l| read_level(&args.out.join(&l.final_file)).map(|(_, level)| level))
        .collect::<Result<Vec<_>>>()?;
    let div = diversity(&finals)?;
    let n = summary.levels.len().max(1) as f64;
    let mut out = io::stdout().lock();
    writeln!(out, "levels      {}", summary.levels.len())?;
    writeln!(out, "success     {:.3}", summary.levels.iter().filter(|l| l.success).count() as f64 / n)?;
    writeln!(out, "changed     {:.3}", summary.levels.iter().map(|l| l.changed_fraction).sum::<f64>() / n)?;
    writeln!(out, "diversity   {:.3}", div.mean_hamming)?;
    writeln!(out, "duplicates  {}", div.duplicates)?;
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let (kind, level) = read_level(&args.level)?;
    if kind != ProblemKind::Sokoban {
        bail!("solve needs a sokoban level, got {kind}");
    }
    let puzzle = SokobanPuzzle::from_level(&level)?;
    let mut out = io::stdout().lock();
    match puzzle.search(args.node_limit) {
        SearchOutcome::Solved(sol) => {
            writeln!(out, "length {}", sol.length)?;
            writeln!(out, "moves {}", moves_to_string(&sol.moves))?;
            writeln!(out, "nodes {}", sol.nodes_expanded)?;
            writeln!(out, "phase {}", sol.phase)?;
        }
        SearchOutcome::Unsolvable { nodes_expanded } => {
            writeln!(out, "unsolvable")?;
            writeln!(out, "nodes {nodes_expanded}")?;
        }
        SearchOutcome::Exhausted { nodes_expanded } => {
            writeln!(out, "unknown: node limit reached")?;
            writeln!(out, "nodes {nodes_expanded}")?;
        }
    }
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let (kind, level) = read_level(&args.level)?;
    let problem = ProblemConfig::with_size(kind, level.width(), level.height());
    let mut out = io::stdout().lock();
    writeln!(out, "{}", render_ascii(&level, &problem.alphabet))?;
    if args.stats {
        for (name, value) in &problem.compute_stats(&level)?.0 {
            writeln!(out, "{name} {value}")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Render(a) => render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

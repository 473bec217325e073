//! `nilwalk` command-line front end: one experiment per invocation.

mod spec;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use nilwalk::Error;
use serde_json::json;
use sha2::{Digest, Sha256};

use spec::{load_algebra, load_measure, load_spec, ExperimentSpec, Task};
use tasks::{ensure_dir, run, Context};

/// Environment variable overriding the RNG seed (the flag wins).
const SEED_ENV: &str = "NILWALK_SEED";

#[derive(Parser)]
#[command(name = "nilwalk", version, about = "Random walks and limiting diffusions on nilpotent Lie groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment spec (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the spec's `output`, default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Structure constants, step and lower central series.
    Algebra,
    /// Weight filtration and graded decomposition for the bias.
    Filtration,
    /// Simulate recentered, rescaled walk endpoints.
    Walk,
    /// Simulate the limiting diffusion.
    Diffusion,
    /// Two-sample comparison of rescaled walk and diffusion at time 1.
    Compare,
    /// Error of E f under the walk against the limit, across step counts.
    BeCurve,
    /// Local limit ratio for a compactly supported bump.
    Llt,
    /// Horizontal endpoints, multiplicative integrals and the filiform support test.
    Support,
    /// Gaussianity, asymptotic closeness or double-cancellation checks.
    Check,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Algebra => "algebra",
            Command::Filtration => "filtration",
            Command::Walk => "walk",
            Command::Diffusion => "diffusion",
            Command::Compare => "compare",
            Command::BeCurve => "be-curve",
            Command::Llt => "llt",
            Command::Support => "support",
            Command::Check => "check",
        }
    }

    fn accepts(self, t: &Task) -> bool {
        matches!(
            (self, t),
            (Command::Algebra, Task::Algebra)
                | (Command::Filtration, Task::Filtration)
                | (Command::Walk, Task::SimulateWalk { .. })
                | (Command::Diffusion, Task::SimulateDiffusion { .. })
                | (Command::Compare, Task::CompareClt { .. })
                | (Command::BeCurve, Task::BerryEsseen { .. })
                | (Command::Llt, Task::Llt { .. })
                | (Command::Support, Task::Support { .. })
                | (Command::Check, Task::GaussianCheck | Task::AsympClose { .. } | Task::DcCheck { .. })
        )
    }

    fn default_task(self) -> Option<Task> {
        match self {
            Command::Algebra => Some(Task::Algebra),
            Command::Filtration => Some(Task::Filtration),
            Command::Check => Some(Task::GaussianCheck),
            _ => None,
        }
    }
}

/// Exit status: 2 for configuration errors, 3 for violated limit-theorem
/// hypotheses, 4 for refused sample budgets, 1 for I/O failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateCovariance { .. } | Error::NotComparable(_) | Error::GeneratorsDoNotSpan { .. } => 3,
        Error::InsufficientBudget { .. } => 4,
        Error::Io(_) => 1,
        _ => 2,
    }
}

struct Outcome {
    task: Option<String>,
    config_hash: Option<String>,
    seed: Option<u64>,
    spec: Option<serde_json::Value>,
    artifacts: Vec<String>,
    summary: Option<serde_json::Value>,
}

fn execute(cli: &Cli, out: &Path, o: &mut Outcome) -> nilwalk::Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::InvalidParameter("--config is required".into()))?;
    let mut spec: ExperimentSpec = load_spec(path)?;
    let task = match (spec.task.take(), cli.command.default_task()) {
        (Some(t), _) => t,
        (None, Some(t)) => t,
        (None, None) => {
            return Err(Error::InvalidParameter(format!("subcommand {} needs a task in the spec", cli.command.name())))
        }
    };
    if !cli.command.accepts(&task) {
        return Err(Error::InvalidParameter(format!(
            "task {} does not belong to subcommand {}",
            task.name(),
            cli.command.name()
        )));
    }
    o.task = Some(task.name().into());
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|_| Error::InvalidParameter(format!("{SEED_ENV}={s:?} is not a u64")))?),
        Err(_) => None,
    };
    spec.seed = cli.seed.or(env_seed).or(spec.seed);
    if task.stochastic() && spec.seed.is_none() {
        return Err(Error::InvalidParameter(format!("task {} is stochastic and needs a seed", task.name())));
    }
    spec.task = Some(task.clone());
    spec.output = None;
    let canonical = serde_json::to_value(&spec)?;
    let hash = format!("{:x}", Sha256::digest(serde_json::to_string(&canonical)?.as_bytes()));
    o.config_hash = Some(hash.clone());
    o.seed = spec.seed;
    o.spec = Some(canonical);

    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let alg = load_algebra(&spec.algebra, &base)?;
    let measure = spec.measure.as_ref().map(|m| load_measure(m, &base)).transpose()?;
    let bias = spec.bias.as_ref().map(|b| b.iter().map(|n| n.0.clone()).collect());
    let mut ctx = Context {
        alg,
        base,
        measure,
        bias,
        seed: spec.seed,
        out: out.to_path_buf(),
        config_hash: hash,
        artifacts: Vec::new(),
    };
    let result = run(&mut ctx, &task);
    o.artifacts = ctx.artifacts;
    o.summary = Some(result?);
    Ok(())
}

fn out_dir(cli: &Cli) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    cli.config
        .as_ref()
        .and_then(|p| load_spec(p).ok())
        .and_then(|s| s.output)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let threads = cli.threads.unwrap_or(0);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let out = out_dir(&cli);
    if let Err(e) = ensure_dir(&out) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let mut o = Outcome { task: None, config_hash: None, seed: None, spec: None, artifacts: Vec::new(), summary: None };
    let result = execute(&cli, &out, &mut o);
    let code = match &result {
        Ok(()) => 0,
        Err(e) => exit_code(e),
    };
    let manifest = json!({
        "tool": "nilwalk",
        "versions": { "nilwalk": env!("CARGO_PKG_VERSION") },
        "subcommand": cli.command.name(),
        "task": o.task,
        "config_hash": o.config_hash,
        "seed": o.seed,
        "threads": rayon::current_num_threads(),
        "config": o.spec,
        "artifacts": o.artifacts,
        "summary": o.summary,
        "status": if code == 0 { "ok" } else { "error" },
        "exit_code": code,
        "error": result.as_ref().err().map(ToString::to_string),
        "timings": { "started_unix": started, "elapsed_seconds": clock.elapsed().as_secs_f64() },
    });
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(std::io::Error::other)
        .and_then(|s| std::fs::write(out.join("manifest.json"), s + "\n"));
    if let Err(e) = written {
        eprintln!("error: could not write manifest: {e}");
    }
    match &result {
        Ok(()) => println!("{}", serde_json::to_string_pretty(&o.summary).unwrap_or_default()),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(code)
}

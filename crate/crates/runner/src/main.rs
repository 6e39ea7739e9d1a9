//! Command-line entry point: run or resume experiments, write reports, inspect tests.

use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use evalbench::executor::{run_experiment, Counts, Mode};
use evalbench::reports::{build_report, write_reports};
use evalbench::{ExperimentConfig, Workspace};
use evalbench_core::evaluation::tables::failure_category;
use evalbench_core::model::{Category, ExpectedBehaviorTable, MeasureRegistry, Score, Status, TransformKind};

#[derive(Parser)]
#[command(name = "evalbench", version, about = "Benchmark the evaluators of synthetic time series")]
struct Cli {
    /// Root directory holding one subdirectory per experiment.
    #[arg(long, global = true, env = "EVALBENCH_WORKSPACE", default_value = "workspace")]
    workspace: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sequential,
    Parallel,
}

#[derive(clap::Args)]
struct ExecArgs {
    #[arg(long, value_enum, default_value = "sequential")]
    mode: ModeArg,
    /// Worker count in parallel mode (defaults to the config's `workers`).
    #[arg(long)]
    workers: Option<usize>,
    /// Skip report generation after the run.
    #[arg(long)]
    no_report: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        exec: ExecArgs,
        /// Replace the configured seeds, e.g. `--seed-override 1,2,3`.
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
        /// Number of κ steps (the default grid has 11).
        #[arg(long)]
        kappa_steps: Option<usize>,
    },
    /// Continue an interrupted experiment with its stored config.
    Resume {
        experiment: String,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Evaluate a workspace and write the report files.
    Report { experiment: String },
    /// Print one test's spec, trajectory and status.
    Inspect { experiment: String, test_id: String },
    /// Print the measure, transformation or expected-behavior catalog as JSON.
    Catalog {
        #[arg(value_enum, default_value = "measures")]
        what: CatalogKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CatalogKind {
    Measures,
    Transformations,
    Behavior,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            exec,
            seed_override,
            kappa_steps,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut parsed = ExperimentConfig::parse(&text, &MeasureRegistry::builtin())
                .with_context(|| format!("invalid config {}", config.display()))?;
            let base = config.parent().unwrap_or(Path::new("."));
            parsed.resolve_paths(&fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf()));
            if let Some(seeds) = seed_override {
                parsed.override_seeds(seeds)?;
            }
            if let Some(k) = kappa_steps {
                parsed.override_kappa_steps(k)?;
            }
            let ws = Workspace::new(&cli.workspace, &parsed.name);
            execute(&parsed, &ws, &exec)
        }
        Command::Resume { experiment, exec } => {
            let ws = Workspace::locate(&cli.workspace, &experiment);
            let config = ws
                .load_config()
                .with_context(|| format!("{} holds no experiment", ws.dir.display()))?;
            execute(&config, &ws, &exec)
        }
        Command::Report { experiment } => report(&Workspace::locate(&cli.workspace, &experiment)),
        Command::Inspect {
            experiment,
            test_id,
        } => inspect(&Workspace::locate(&cli.workspace, &experiment), &test_id),
        Command::Catalog { what } => {
            let json = match what {
                CatalogKind::Measures => MeasureRegistry::builtin().catalog_json()?,
                CatalogKind::Transformations => {
                    let ids: Vec<&str> = std::iter::once(TransformKind::Shuffle)
                        .chain(TransformKind::MODULATED)
                        .map(|t| t.config_id())
                        .collect();
                    serde_json::to_string_pretty(&ids)?
                }
                CatalogKind::Behavior => ExpectedBehaviorTable::standard().to_json()?,
            };
            println!("{json}");
            Ok(())
        }
    }
}

fn execute(config: &ExperimentConfig, ws: &Workspace, exec: &ExecArgs) -> Result<()> {
    let mode = match exec.mode {
        ModeArg::Sequential => Mode::Sequential,
        ModeArg::Parallel => Mode::Parallel(exec.workers.unwrap_or(config.workers)),
    };
    let interactive = std::io::stderr().is_terminal();
    let progress = |c: &Counts| {
        let done = c.successful + c.failed + c.skipped;
        if interactive {
            eprint!("\r[{done}/{}] {c}   ", c.total());
        } else {
            eprintln!("[{done}/{}] {c}", c.total());
        }
    };
    let counts = run_experiment(config, ws, mode, &progress)?;
    if interactive {
        eprintln!();
    }
    println!("experiment {} finished: {counts}", config.name);
    if !exec.no_report {
        report(ws)?;
    }
    Ok(())
}

fn report(ws: &Workspace) -> Result<()> {
    let report = build_report(ws)?;
    let files = write_reports(ws, &report)?;
    println!("wrote {} files to {}", files.len(), ws.reports_dir().display());
    for c in Category::ALL {
        match report.top_ranked(c) {
            Some((m, cell)) => println!("top {c}: {m} (r_rel {:.3} ± {:.3})", cell.mean, cell.std),
            None => println!("top {c}: N/A"),
        }
    }
    println!();
    print!("{}", report.selection_guide());
    Ok(())
}

fn format_score(s: &Score) -> String {
    match s {
        Score::Real(v) => format!("{v}"),
        Score::Bool(b) => b.to_string(),
        Score::Pair(a, b) => format!("({a}, {b})"),
    }
}

fn inspect(ws: &Workspace, id: &str) -> Result<()> {
    if !ws.tests_dir().is_dir() {
        bail!("{} is not an experiment workspace", ws.dir.display());
    }
    let r = ws.load(id)?;
    let spec = &r.spec;
    println!("test      {}", r.id);
    println!("dataset   {}", spec.dataset);
    println!("chain     {}", spec.chain_label());
    println!("measure   {}", spec.measure);
    if let Some(e) = spec.embedder {
        println!("embedder  {e}");
    }
    println!("seed      {}", spec.seed);
    println!("status    {:?}", r.status);
    if let Some(t) = &r.started_at {
        println!("started   {t}");
    }
    if let Some(t) = &r.finished_at {
        println!("finished  {t}");
    }
    match r.status {
        Status::Failed => {
            let reason = r.failure_reason.as_deref().unwrap_or("");
            println!("reason    {reason}");
            println!("category  {}", failure_category(reason));
        }
        Status::Skipped => {
            println!("skipped   {}", r.skip_reason.as_deref().unwrap_or("inapplicable"));
        }
        _ => {}
    }
    if r.scores.is_empty() {
        return Ok(());
    }
    println!("{:>6}  {:>24}  {:>12}", "kappa", "score", "runtime_s");
    for (i, s) in r.scores.iter().enumerate() {
        let runtime = match (r.runtimes.get(i), r.runtime_cached.get(i)) {
            (Some(t), Some(true)) => format!("{t:.4} (cached)"),
            (Some(t), _) => format!("{t:.4}"),
            (None, _) => "-".to_string(),
        };
        println!("{:>6.2}  {:>24}  {:>12}", spec.kappa_grid[i], format_score(s), runtime);
    }
    Ok(())
}

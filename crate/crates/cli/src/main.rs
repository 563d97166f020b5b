//! `holon-evo`: run, replicate, audit and compare evolution experiments.
//!
//! Exit status: 0 on success (an extinct run is a valid outcome), 1 for an
//! engine failure, 2 for a configuration error, 3 for an I/O or artifact
//! error. Errors are reported on stderr as one JSON object per line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holon_evo::io::{
    audit_run_dir, read_summary, snapshot_file_name, write_run, ArtifactError, ConfigError,
    ConfigFile, RunSummary, Snapshot,
};
use holon_evo::report::{digest, verdicts, Arm};
use holon_evo::{EngineError, EngineF64};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "holon-evo",
    version,
    about = "Evolution over nested holon hierarchies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration by name.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed and write its artifacts.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Continue from a snapshot instead of starting fresh.
        #[arg(long, conflicts_with_all = ["config", "preset", "seed"])]
        resume: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Write a snapshot after these generations.
        #[arg(long, value_delimiter = ',')]
        snapshot_at: Vec<u64>,
        /// Snapshot and stop after this generation.
        #[arg(long)]
        stop_at: Option<u64>,
    },
    /// Run consecutive seeds in parallel, one directory per seed.
    Replicate {
        #[command(flatten)]
        source: Source,
        /// Number of seeds.
        #[arg(long)]
        seeds: u64,
        /// First seed; defaults to the configured seed.
        #[arg(long)]
        first_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the condition audit of a finished run directory.
    Audit {
        #[arg(long)]
        run: PathBuf,
    },
    /// Compare replicate sets and print verdicts.
    Report {
        /// Run directories or replicate directories (one arm each).
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Print a built-in configuration as TOML.
    Preset { name: String },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Engine(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Engine(_) => 1,
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn report(&self) -> String {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Io(m) => ("io", m),
            Failure::Engine(m) => ("engine", m),
        };
        serde_json::json!({ "error": kind, "message": message }).to_string()
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ArtifactError> for Failure {
    fn from(e: ArtifactError) -> Self {
        match e {
            ArtifactError::Config(c) => c.into(),
            other => Failure::Io(other.to_string()),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(m) => Failure::Config(m),
            other => Failure::Engine(other.to_string()),
        }
    }
}

fn load_source(config: Option<&Path>, preset: Option<&str>) -> Result<ConfigFile, Failure> {
    match (config, preset) {
        (Some(path), _) => Ok(ConfigFile::load(path)?),
        (None, Some(name)) => Ok(ConfigFile::preset(name)?),
        (None, None) => Err(Failure::Config(
            "one of --config, --preset or --resume is required".into(),
        )),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

fn save_snapshot(out: &Path, config: &ConfigFile, engine: &EngineF64) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let path = out.join(snapshot_file_name(engine.state().generation));
    Snapshot::capture(config, engine).save(&path)?;
    Ok(())
}

fn run(
    config: ConfigFile,
    mut engine: EngineF64,
    out: &Path,
    snapshot_at: &[u64],
    stop_at: Option<u64>,
) -> Result<RunSummary, Failure> {
    let mut marks: Vec<u64> = snapshot_at
        .iter()
        .copied()
        .chain(stop_at)
        .filter(|&g| g > engine.state().generation)
        .collect();
    marks.sort_unstable();
    marks.dedup();
    for g in marks {
        engine.run_until(g)?;
        if engine.is_done() {
            break;
        }
        save_snapshot(out, &config, &engine)?;
        if Some(g) == stop_at {
            return Ok(write_run(out, &config, &engine)?);
        }
    }
    engine.run_to_end()?;
    Ok(write_run(out, &config, &engine)?)
}

/// Summaries of one arm: `dir` itself when it is a run directory, otherwise
/// every immediate subdirectory holding a run, ordered by seed.
fn load_arm(dir: &Path) -> Result<Arm, Failure> {
    let label = dir.display().to_string();
    if dir.join("summary.json").is_file() {
        return Ok(Arm {
            label,
            runs: vec![read_summary(dir)?],
        });
    }
    let entries =
        std::fs::read_dir(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let mut runs = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?
            .path();
        if path.join("summary.json").is_file() {
            runs.push(read_summary(&path)?);
        }
    }
    if runs.is_empty() {
        return Err(Failure::Io(format!(
            "{}: no run directories",
            dir.display()
        )));
    }
    runs.sort_by_key(|r| r.seed);
    Ok(Arm { label, runs })
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            preset,
            resume,
            seed,
            out,
            snapshot_at,
            stop_at,
        } => {
            let (config, engine) = match resume {
                Some(path) => {
                    let snap = Snapshot::<f64>::load(&path)?;
                    let config = snap.config.clone();
                    (config, snap.resume()?)
                }
                None => {
                    let mut config = load_source(config.as_deref(), preset.as_deref())?;
                    if let Some(seed) = seed {
                        config = config.with_seed(seed);
                    }
                    config.validate()?;
                    let engine = config.engine::<f64>()?;
                    (config, engine)
                }
            };
            let summary = run(config, engine, &out, &snapshot_at, stop_at)?;
            print_json(&summary);
        }
        Command::Replicate {
            source,
            seeds,
            first_seed,
            out,
        } => {
            let config = load_source(source.config.as_deref(), source.preset.as_deref())?;
            config.validate()?;
            let first = first_seed.unwrap_or(config.engine.seed);
            let summaries: Result<Vec<RunSummary>, Failure> = (first..first + seeds)
                .into_par_iter()
                .map(|seed| {
                    let config = config.clone().with_seed(seed);
                    let engine = config.engine::<f64>()?;
                    run(config, engine, &out.join(format!("seed-{seed}")), &[], None)
                })
                .collect();
            let arm = Arm {
                label: out.display().to_string(),
                runs: summaries?,
            };
            print_json(&digest(&arm));
        }
        Command::Audit { run } => {
            let report = audit_run_dir(&run)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serializable")
            );
        }
        Command::Report { runs, alpha } => {
            let arms = runs
                .iter()
                .map(|d| load_arm(d))
                .collect::<Result<Vec<_>, _>>()?;
            for arm in &arms {
                print_json(&digest(arm));
            }
            for v in verdicts(&arms, alpha) {
                println!("{}", v.line());
            }
        }
        Command::Preset { name } => {
            print!("{}", ConfigFile::preset(&name)?.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.kind().to_string();
            let detail = e.render().to_string();
            let first = detail.lines().next().unwrap_or(&message);
            let f = Failure::Config(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", f.report());
            return ExitCode::from(f.code());
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.code())
        }
    }
}

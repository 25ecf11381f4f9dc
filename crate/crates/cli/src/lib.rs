//! Command-line runner: measure influence reports, theorem verifiers and the
//! entropy-conservation experiment, all emitting JSON run reports.

pub mod conserve;
pub mod suites;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use entropic_core::indep::{ConservationMode, Graph};
use entropic_core::influence::{influence_summary, MatrixReport};
use entropic_core::measure::parse_measure_spec;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use conserve::{run_conserve, ConserveConfig};
use verify::{run_check, VerifyConfig, CHECKS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "entropic-lab", version, about)]
pub struct Cli {
    /// Global seed; overrides any seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write per-step CSV data here (conserve only).
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Conservation mode override.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Influence matrix and norms of a measure file.
    Influence { measure_file: PathBuf },
    /// Run a named verification check.
    Verify { check: String },
    /// Entropy-conservation experiment on a graph file.
    Conserve { graph_file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub results: Value,
    pub wall_time_ms: u64,
}

/// Result of one invocation: exit code, stdout JSON, stderr diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: message.into(),
        }
    }
}

/// SHA-256 of the compact JSON form of `config`; object keys are sorted.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_config<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T, String> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| {
            format!(
                "{}: line {}, column {}: {e}",
                p.display(),
                e.line(),
                e.column()
            )
        }),
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Outcome {
    if let Some(threads) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    let start = Instant::now();
    let result = match &cli.command {
        Command::Influence { measure_file } => cmd_influence(&cli, measure_file),
        Command::Verify { check } => cmd_verify(&cli, check),
        Command::Conserve { graph_file } => cmd_conserve(&cli, graph_file),
    };
    match result {
        Err(message) => Outcome::usage(message),
        Ok((ok, mut report)) => {
            report.wall_time_ms = start.elapsed().as_millis() as u64;
            Outcome {
                code: if ok { EXIT_OK } else { EXIT_FAILED },
                stdout: serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
                stderr: String::new(),
            }
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome::usage(text)
            }
        }
    }
}

fn cmd_influence(cli: &Cli, path: &Path) -> Result<(bool, RunReport), String> {
    let text = read(path)?;
    let measure = parse_measure_spec(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let cube = measure.to_cube().map_err(|e| e.to_string())?;
    let summary = influence_summary(&cube);
    let matrix = MatrixReport::from_summary(&summary).map_err(|e| e.to_string())?;
    let interpolation_ok = matrix.norms.interpolation_bound_holds();
    let results = json!({
        "ok": interpolation_ok,
        "n": cube.n(),
        "active": matrix.active,
        "psi": matrix.psi,
        "norms": matrix.norms,
        "interpolation_bound_holds": interpolation_ok,
        "psi_route_gap": summary.psi_route_gap(),
        "similarity_gap": summary.similarity_gap(),
    });
    let seed = cli.seed.unwrap_or(0);
    Ok((
        interpolation_ok,
        RunReport {
            command: "influence".into(),
            config_hash: config_hash(
                &json!({ "measure": serde_json::from_str::<Value>(&text).unwrap_or(Value::Null) }),
            ),
            seed,
            results,
            wall_time_ms: 0,
        },
    ))
}

fn cmd_verify(cli: &Cli, check: &str) -> Result<(bool, RunReport), String> {
    if !CHECKS.contains(&check) {
        return Err(format!(
            "unknown check {check:?}; expected one of {}",
            CHECKS.join(", ")
        ));
    }
    let mut config: VerifyConfig = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let (ok, results) = run_check(check, &config).map_err(|e| e.to_string())?;
    Ok((
        ok,
        RunReport {
            command: format!("verify {check}"),
            config_hash: config_hash(&config),
            seed: config.seed,
            results,
            wall_time_ms: 0,
        },
    ))
}

fn cmd_conserve(cli: &Cli, path: &Path) -> Result<(bool, RunReport), String> {
    let graph = Graph::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut config: ConserveConfig = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(mode) = cli.mode {
        config.mode = match mode {
            ModeArg::Exact => ConservationMode::Exact,
            ModeArg::Mc => ConservationMode::Mc,
        };
    }
    let outcome = run_conserve(&graph, &config).map_err(|e| e.to_string())?;
    if let Some(csv) = &cli.csv {
        std::fs::write(csv, outcome.report.to_csv())
            .map_err(|e| format!("{}: {e}", csv.display()))?;
    }
    Ok((
        outcome.ok,
        RunReport {
            command: "conserve".into(),
            config_hash: config_hash(
                &json!({ "graph": graph.edges(), "n": graph.n(), "config": config }),
            ),
            seed: config.seed,
            results: outcome.results,
            wall_time_ms: 0,
        },
    ))
}

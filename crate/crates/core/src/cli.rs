//! Command-line front end.
//!
//! Exit status: 0 success, 1 usage or parse error, 2 validation failure,
//! 3 solver did not converge (outputs are still written).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::mdp::{validate_chain, Chain, StateId};
use crate::model_file::ModelFile;
use crate::monte_carlo::{self, DEFAULT_STEP_CAP};
use crate::qdist;
use crate::report::{self, Field};
use crate::river::{build_river, Cell, Layout, RiverConfig};
use crate::solver::{self, SolveConfig};

#[derive(Debug, Parser)]
#[command(
    name = "episode-duration",
    version,
    about = "Success probability and successful-episode duration statistics for episodic Markov chains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the river-world model
    River(RiverArgs),
    /// Solve for s, A, B and D of every state
    Solve(SolveArgs),
    /// Exact distribution q(T|x) of successful completion time
    Qdist(QdistArgs),
    /// Monte Carlo estimate from one start state
    Simulate(SimulateArgs),
    /// Render a solve CSV column as a PGM image
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Args)]
pub struct RiverArgs {
    #[arg(long, default_value_t = 50)]
    pub width: usize,
    #[arg(long, default_value_t = 10)]
    pub height: usize,
    /// Port cell as ROW,COL
    #[arg(long, value_parser = parse_cell, default_value = "0,35")]
    pub port: Cell,
    /// Island cell as ROW,COL (repeatable)
    #[arg(long = "obstacle", value_parser = parse_cell)]
    pub obstacles: Vec<Cell>,
    #[arg(long, default_value_t = 0.3)]
    pub p_forward: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p_back: f64,
    #[arg(long, default_value_t = 2)]
    pub t_diag: u32,
    #[arg(long, default_value_t = 1)]
    pub t_forward: u32,
    #[arg(long, default_value_t = 5)]
    pub t_back: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    /// Run exactly N sweeps per phase instead of stopping on the residual
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QdistArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub state: StateId,
    #[arg(long)]
    pub tmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub state: StateId,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
    pub step_cap: u64,
    /// Also write one line per episode to this CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    pub csv: PathBuf,
    #[arg(long, default_value = "s")]
    pub field: Field,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid width, if wider than the layout's extent
    #[arg(long)]
    pub width: Option<usize>,
    /// Grid height, if taller than the layout's extent
    #[arg(long)]
    pub height: Option<usize>,
}

fn parse_cell(text: &str) -> Result<Cell, String> {
    let (row, col) = text
        .split_once(',')
        .ok_or_else(|| format!("expected ROW,COL, got {text:?}"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad coordinate {s:?}"))
    };
    Ok((parse(row)?, parse(col)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Usage = 1,
    Invalid = 2,
    NotConverged = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// A failed command with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let status = match err {
            Error::Json(_) | Error::Io(_) | Error::ModelFile(_) => Status::Usage,
            _ => Status::Invalid,
        };
        Failure {
            status,
            message: err.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        status: Status::Usage,
        message: message.into(),
    }
}

/// Parses `args` (including the program name) and runs the command, writing
/// stdout output to `stdout` and messages to `stderr`. Returns the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = write!(stderr, "{}", err.render());
            return if err.use_stderr() {
                Status::Usage.code()
            } else {
                let _ = write!(stdout, "{}", err.render());
                Status::Success.code()
            };
        }
    };
    match run(&cli, stdout, stderr) {
        Ok(status) => status.code(),
        Err(failure) => {
            let _ = writeln!(stderr, "error: {}", failure.message);
            failure.status.code()
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Status, Failure> {
    match &cli.command {
        Command::River(args) => cmd_river(args, stdout),
        Command::Solve(args) => cmd_solve(args, stdout, stderr),
        Command::Qdist(args) => cmd_qdist(args, stdout, stderr),
        Command::Simulate(args) => cmd_simulate(args, stdout, stderr),
        Command::Heatmap(args) => cmd_heatmap(args),
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::from)?,
        None => stdout.write_all(text.as_bytes()).map_err(Error::from)?,
    }
    Ok(())
}

/// Loads a model and reports non-fatal diagnostics on `stderr`.
fn load(path: &Path, stderr: &mut dyn Write) -> Result<(Chain, Option<Layout>), Failure> {
    let file = ModelFile::load(path)?;
    let chain = file.to_chain()?;
    let layout = file.to_layout()?;
    for diag in validate_chain(&chain) {
        let _ = writeln!(stderr, "warning: {diag}");
    }
    Ok((chain, layout))
}

fn check_state(chain: &Chain, state: StateId) -> Result<(), Failure> {
    if state < chain.num_states() {
        Ok(())
    } else {
        Err(Error::StateOutOfRange {
            state,
            num_states: chain.num_states(),
        }
        .into())
    }
}

fn cmd_river(args: &RiverArgs, stdout: &mut dyn Write) -> Result<Status, Failure> {
    let config = RiverConfig {
        width: args.width,
        height: args.height,
        port: args.port,
        obstacles: args.obstacles.iter().copied().collect(),
        p_forward_each: args.p_forward,
        p_back: args.p_back,
        t_diag: args.t_diag,
        t_forward: args.t_forward,
        t_back: args.t_back,
    };
    let (chain, layout) = build_river(&config).map_err(|e| usage(e.to_string()))?;
    let text = ModelFile::from_chain(&chain, Some(&layout)).to_json()?;
    emit(&text, args.out.as_deref(), stdout)?;
    Ok(Status::Success)
}

fn cmd_solve(
    args: &SolveArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Status, Failure> {
    if args.tolerance.is_nan() || args.tolerance < 0.0 || args.max_iterations == 0 {
        return Err(usage("tolerance must be >= 0 and max-iterations >= 1"));
    }
    let (chain, layout) = load(&args.model, stderr)?;
    let config = SolveConfig {
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        fixed_iterations: args.iterations,
    };
    let result = solver::solve_all(&chain, &config)?;
    emit(
        &report::solve_csv(&result, layout.as_ref()),
        args.out.as_deref(),
        stdout,
    )?;
    if args.iterations.is_none() && !result.converged() {
        for (name, phase) in result.phases() {
            if !phase.converged {
                let _ = writeln!(
                    stderr,
                    "warning: phase {name} did not converge in {} sweeps (residual {:e})",
                    phase.iterations, phase.residual
                );
            }
        }
        return Ok(Status::NotConverged);
    }
    Ok(Status::Success)
}

fn cmd_qdist(
    args: &QdistArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Status, Failure> {
    let (chain, _) = load(&args.model, stderr)?;
    check_state(&chain, args.state)?;
    let table = qdist::q_distribution(&chain, args.tmax)?;
    let column: Vec<f64> = table.column(args.state).collect();
    let moments = qdist::truncated_moments(&table, args.state);
    let (s, _) = solver::solve_success(&chain, &SolveConfig::default())?;
    emit(
        &report::qdist_csv(&column, &moments, s[args.state]),
        args.out.as_deref(),
        stdout,
    )?;
    Ok(Status::Success)
}

fn cmd_simulate(
    args: &SimulateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Status, Failure> {
    if args.episodes == 0 || args.step_cap == 0 {
        return Err(usage("episodes and step-cap must be >= 1"));
    }
    let (chain, _) = load(&args.model, stderr)?;
    check_state(&chain, args.state)?;
    let est = monte_carlo::estimate(&chain, args.state, args.episodes, args.seed, args.step_cap)?;
    emit(
        &report::simulation_summary(args.state, args.step_cap, &est),
        None,
        stdout,
    )?;
    if let Some(path) = &args.csv {
        let mut text = String::from("episode,total_time,steps,successful,truncated\n");
        for index in 0..args.episodes {
            let mut rng = monte_carlo::episode_rng(args.seed, index);
            let ep = monte_carlo::simulate_episode(&chain, args.state, &mut rng, args.step_cap)?;
            text.push_str(&format!(
                "{index},{},{},{},{}\n",
                ep.total_time,
                ep.states.len() - 1,
                ep.successful,
                ep.truncated
            ));
        }
        std::fs::write(path, text).map_err(Error::from)?;
    }
    Ok(Status::Success)
}

fn cmd_heatmap(args: &HeatmapArgs) -> Result<Status, Failure> {
    let csv = std::fs::read_to_string(&args.csv).map_err(Error::from)?;
    let size = match (args.width, args.height) {
        (Some(w), Some(h)) => Some((w, h)),
        (None, None) => None,
        _ => return Err(usage("give both --width and --height or neither")),
    };
    let pgm = report::heatmap_pgm(&csv, args.field, size)?;
    std::fs::write(&args.out, pgm).map_err(Error::from)?;
    Ok(Status::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_parsing() {
        assert_eq!(parse_cell("4,10"), Ok((4, 10)));
        assert!(parse_cell("4").is_err());
        assert!(parse_cell("a,1").is_err());
    }

    #[test]
    fn bad_flags_exit_with_usage_status() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with_args(["episode-duration", "solve"], &mut out, &mut err);
        assert_eq!(code, 1);
        let code = main_with_args(
            ["episode-duration", "river", "--port", "0,49"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 1);
        let code = main_with_args(["episode-duration", "--help"], &mut out, &mut err);
        assert_eq!(code, 0);
    }
}

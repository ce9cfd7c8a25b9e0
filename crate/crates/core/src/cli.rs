//! Command-line surface: `sweep`, `fluid`, `degeneracy`, `probe`, `plot`.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when a
//! solver fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::degeneracy::{assess, make_degenerate_inventory, DegeneracyVerdict};
use crate::distributions::{DistributionKind, DistributionSpec, RequestDistribution};
use crate::error::{OlpError, Result};
use crate::fluid_dual::{estimate_growth_exponent, solve_fluid_dual, write_trace_csv, SolverConfig, TieBreak};
use crate::harness::{read_report_csv, render_svg, run_regret_sweep, ExperimentConfig};
use crate::hindsight::hindsight_value;
use crate::policy::{compute_decomposition, concentration_probe, run_episode, PolicyKind};

#[derive(Debug, Parser)]
#[command(name = "olp", version, about = "Online linear programming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo regret sweep over a horizon grid.
    Sweep { config: PathBuf },
    /// Fluid dual solve, uniqueness probe and growth exponent.
    Fluid { config: PathBuf },
    /// Degeneracy verdicts at an inventory.
    Degeneracy { config: PathBuf },
    /// Regret decomposition and dual concentration along one CE episode.
    Probe { config: PathBuf },
    /// Log-log SVG plot of a report CSV.
    Plot {
        report: PathBuf,
        /// Output path; defaults to the report path with an `.svg` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Olp(OlpError),
    Io(String),
}

impl From<OlpError> for CliError {
    fn from(e: OlpError) -> Self {
        CliError::Olp(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Olp(e) if e.is_solver_failure() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Olp(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| OlpError::Config(format!("{}: {e}", path.display())).into())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn solver_for(dist: &RequestDistribution, solver: Option<SolverConfig>, tie_break: Option<TieBreak>) -> Result<SolverConfig> {
    let cfg = solver.unwrap_or_else(|| SolverConfig::for_distribution(dist));
    cfg.validate()?;
    Ok(match tie_break {
        Some(t) => cfg.with_tie_break(t),
        None => cfg,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluidConfig {
    distribution: DistributionSpec,
    d: Vec<f64>,
    #[serde(default)]
    solver: Option<SolverConfig>,
    #[serde(default)]
    tie_break: Option<TieBreak>,
    /// Solver trace CSV, written when given.
    #[serde(default)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FluidOutput {
    kind: DistributionKind,
    d: Vec<f64>,
    lambda: Vec<f64>,
    value: f64,
    subgrad_norm: f64,
    certificate_gap: f64,
    iterations: usize,
    dual_unique: bool,
    flat_directions: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    growth_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    growth_error: Option<String>,
}

fn fluid(path: &Path) -> CliResult<()> {
    let cfg: FluidConfig = parse_config(path)?;
    let dist = cfg.distribution.build()?;
    let mut solver = solver_for(&dist, cfg.solver, cfg.tie_break)?;
    if cfg.trace.is_some() {
        solver.record_trace = true;
    }
    let sol = solve_fluid_dual(&dist, &cfg.d, &solver)?;
    if let Some(p) = &cfg.trace {
        write_trace_csv(&sol.trace, create(p)?)?;
    }
    let (growth_exponent, growth_error) = match estimate_growth_exponent(&dist, &cfg.d, &sol.lambda) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let out = FluidOutput {
        kind: dist.kind(),
        d: cfg.d,
        dual_unique: sol.looks_unique(),
        lambda: sol.lambda,
        value: sol.value,
        subgrad_norm: sol.subgrad_norm,
        certificate_gap: sol.certificate_gap,
        iterations: sol.iterations,
        flat_directions: sol.flat_directions,
        growth_exponent,
        growth_error,
    };
    print_json(&out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DegeneracyConfig {
    distribution: DistributionSpec,
    /// Inventory; alternatively `lambda0` builds the degenerate inventory.
    #[serde(default)]
    d: Option<Vec<f64>>,
    #[serde(default)]
    lambda0: Option<Vec<f64>>,
    #[serde(default)]
    solver: Option<SolverConfig>,
}

#[derive(Debug, Serialize)]
struct DegeneracyOutput {
    kind: DistributionKind,
    d: Vec<f64>,
    #[serde(flatten)]
    verdict: DegeneracyVerdict,
}

fn degeneracy(path: &Path) -> CliResult<()> {
    let cfg: DegeneracyConfig = parse_config(path)?;
    let dist = cfg.distribution.build()?;
    let d = match (cfg.d, cfg.lambda0) {
        (Some(d), None) => d,
        (None, Some(l)) => make_degenerate_inventory(&dist, &l)?,
        _ => return Err(OlpError::Config("exactly one of `d` and `lambda0` is required".into()).into()),
    };
    let solver = solver_for(&dist, cfg.solver, None)?;
    let verdict = assess(&dist, &d, &solver)?;
    print_json(&DegeneracyOutput {
        kind: dist.kind(),
        d,
        verdict,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeConfig {
    distribution: DistributionSpec,
    /// `b = ⌊d·T⌋`
    d: Vec<f64>,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    solver: Option<SolverConfig>,
    #[serde(default)]
    tie_break: Option<TieBreak>,
    /// Time-series CSV; standard output when absent.
    #[serde(default)]
    output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ProbeSummary {
    reward: f64,
    hindsight: f64,
    regret: f64,
    term_over: f64,
    term_under: f64,
    c0: f64,
    c0_log_bound: f64,
}

fn probe(path: &Path) -> CliResult<()> {
    let cfg: ProbeConfig = parse_config(path)?;
    if cfg.horizon == 0 {
        return Err(OlpError::Config("`T` must be at least 1".into()).into());
    }
    let dist = cfg.distribution.build()?;
    let solver = solver_for(&dist, cfg.solver, cfg.tie_break)?;
    let b: Vec<f64> = cfg.d.iter().map(|d| (d * cfg.horizon as f64).floor()).collect();
    let trace = run_episode(&dist, &b, cfg.horizon, PolicyKind::Ce, cfg.seed, &solver)?;
    let dec = compute_decomposition(&dist, &trace, &solver)?;
    let conc = concentration_probe(&dist, &b, cfg.horizon, cfg.seed, &solver)?;
    let hindsight = hindsight_value(&trace.sample()?, &b)?;

    let mut out: Box<dyn Write> = match &cfg.output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    writeln!(out, "t,over,under,measured,envelope")?;
    for (step, c) in dec.per_step.iter().zip(&conc) {
        let env = c.envelope.map(|e| e.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", step.t, step.over, step.under, c.measured, env)?;
    }
    out.flush()?;
    let summary = ProbeSummary {
        reward: trace.total_reward,
        hindsight,
        regret: hindsight - trace.total_reward,
        term_over: dec.term_over,
        term_under: dec.term_under,
        c0: dec.c0,
        c0_log_bound: dec.c0_log_bound,
    };
    eprintln!("{}", serde_json::to_string(&summary).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

fn sweep(path: &Path) -> CliResult<()> {
    let text = read_to_string(path)?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| e.context(path.display().to_string()))?;
    let report = run_regret_sweep(&cfg)?;
    match &cfg.output.csv {
        Some(p) => {
            let mut w = create(p)?;
            report.write_trials_csv(&mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = BufWriter::new(std::io::stdout().lock());
            report.write_trials_csv(&mut w)?;
            w.flush()?;
        }
    }
    if let Some(p) = &cfg.output.report {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
    }
    if let Some(p) = &cfg.output.plot {
        std::fs::write(p, render_svg(&report.cells))?;
    }
    for c in &report.cells {
        eprintln!("{} T={} mean={:.4} se={:.4} n={}", c.policy, c.horizon, c.mean, c.se, c.n);
    }
    for f in &report.fits {
        eprintln!("{} fit {:?}: slope={:.4} r2={:.4}", f.policy, f.correction, f.fit.slope, f.fit.r2);
    }
    Ok(())
}

fn plot(report: &Path, out: Option<&Path>) -> CliResult<()> {
    let file = File::open(report).map_err(|e| CliError::Io(format!("{}: {e}", report.display())))?;
    let cells = read_report_csv(BufReader::new(file))?;
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| report.with_extension("svg"));
    std::fs::write(&target, render_svg(&cells)).map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
    eprintln!("wrote {}", target.display());
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Sweep { config } => sweep(config),
        Command::Fluid { config } => fluid(config),
        Command::Degeneracy { config } => degeneracy(config),
        Command::Probe { config } => probe(config),
        Command::Plot { report, out } => plot(report, out.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

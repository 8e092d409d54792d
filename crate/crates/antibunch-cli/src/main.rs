//! `antibunch`: design coherently driven n-level systems whose fluorescence
//! is increasingly anti-bunched, and compute or simulate the photon
//! statistics they produce.
//!
//! Times are reported in units of `1/Ω` and rates in units of `Ω`; `--gamma`
//! is the ratio `γ/Ω`. All commands are deterministic given their settings
//! and seed. Sweep commands honor `ANTIBUNCH_THREADS` as a parallelism cap.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use antibunch::dynamics::{
    amplitude_series, eigendecompose, evolve_ode_oracle, evolve_spectral, target_series,
    uniform_grid, SineSeries,
};
use antibunch::photostats::{
    count_oscillation_extrema, renewal_solve, waiting_time, waiting_time_table, TableConfig,
    WaitingSummary, WaitingTimeTable,
};
use antibunch::synthesis::{
    build_design, fourier_coefficients, synthesize, verify, CoupledSystem, FreeRowStrategy,
    SystemDescriptor, VerificationReport,
};
use antibunch::trajectory::{
    ks_critical_001, ks_statistic, simulate, simulate_mcwf, JumpRecord, SimMode, TrajectorySummary,
};

use config::{require, resolve, run_capped, thread_cap, FileConfig};

#[derive(Parser)]
#[command(
    name = "antibunch",
    version,
    about = "Inverse design and photon statistics of regular resonance fluorescence"
)]
struct Cli {
    /// JSON config file supplying defaults; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct the n-level coupling Hamiltonian and emit its descriptor.
    Synthesize(SynthesizeArgs),
    /// Re-verify a stored system descriptor against its Fourier target.
    Verify(VerifyArgs),
    /// Evolve the amplitude vector and export the trajectory as CSV.
    Evolve(EvolveArgs),
    /// Tabulate the waiting-time distribution and its summary statistics.
    Wtd(WtdArgs),
    /// Solve the renewal equation for the normalized correlation g²(τ).
    G2(G2Args),
    /// Monte-Carlo jump simulation with goodness-of-fit checks.
    Simulate(SimulateArgs),
    /// Emit the figure data sets (fig1.csv, fig3.csv, fig4.csv).
    Figures(FiguresArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    /// paper4 for n = 4, gram-schmidt otherwise.
    Auto,
    GramSchmidt,
    Paper4,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Exact inverse-CDF sampling of the analytic waiting time.
    Exact,
    /// First-order stepping with jump probability γ|a₁|²Δt.
    Bernoulli,
    /// Full non-Hermitian MCWF including decay back-action (informational).
    Mcwf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Spectral,
    Ode,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// Human-readable summaries; tables stay CSV.
    Csv,
    /// Machine-readable JSON summaries.
    Json,
}

fn parse_enum<T: ValueEnum>(raw: &str, what: &str) -> Result<T> {
    T::from_str(raw, true).map_err(|_| anyhow::anyhow!("invalid {what} `{raw}` in config file"))
}

#[derive(clap::Args)]
struct SynthesizeArgs {
    /// Number of levels (even, ≥ 2).
    #[arg(long)]
    n: Option<usize>,
    /// Generalized Rabi frequency Ω.
    #[arg(long)]
    omega: Option<f64>,
    /// Free-row completion strategy.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Write the system descriptor here (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// System descriptor JSON to check.
    #[arg(long)]
    system: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(clap::Args)]
struct EvolveArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Evolve a stored descriptor instead of synthesizing from --n.
    #[arg(long, conflicts_with = "n")]
    system: Option<PathBuf>,
    #[arg(long)]
    omega: Option<f64>,
    /// Number of Rabi periods to cover.
    #[arg(long)]
    periods: Option<f64>,
    /// Grid points per period.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Write the trajectory CSV here (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(clap::Args)]
struct WtdArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, conflicts_with = "n")]
    system: Option<PathBuf>,
    #[arg(long)]
    omega: Option<f64>,
    /// Spontaneous emission rate of level 1 as γ/Ω.
    #[arg(long)]
    gamma: Option<f64>,
    /// Grid points per period.
    #[arg(long)]
    grid: Option<usize>,
    /// Rescale the series amplitudes before computing statistics.
    #[arg(long)]
    scale: Option<f64>,
    /// Write the (t, w, P) table CSV here (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(clap::Args)]
struct G2Args {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, conflicts_with = "n")]
    system: Option<PathBuf>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Grid points per period (sets the renewal step d_tau).
    #[arg(long)]
    grid: Option<usize>,
    /// Largest delay to solve for (default 10/r).
    #[arg(long)]
    tau_max: Option<f64>,
    /// Write the (tau, Q, g2) table CSV here (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, conflicts_with = "n")]
    system: Option<PathBuf>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Emissions per trajectory.
    #[arg(long)]
    jumps: Option<usize>,
    /// Independent trajectories (seeds seed, seed+1, ...).
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Step size for bernoulli/mcwf modes.
    #[arg(long)]
    dt: Option<f64>,
    /// Write jump-time CSV(s) here; multi-trajectory runs append `_seed`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-trajectory JSONL summaries here (default: stdout).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(clap::Args)]
struct FiguresArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// Grid points per period for all three data sets.
    #[arg(long)]
    grid: Option<usize>,
    /// Directory receiving fig1.csv, fig3.csv, fig4.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synthesize(args) => cmd_synthesize(args, &file),
        Command::Verify(args) => cmd_verify(args, &file),
        Command::Evolve(args) => cmd_evolve(args, &file),
        Command::Wtd(args) => cmd_wtd(args, &file),
        Command::G2(args) => cmd_g2(args, &file),
        Command::Simulate(args) => cmd_simulate(args, &file),
        Command::Figures(args) => cmd_figures(args, &file),
    }
}

fn pick_strategy(n: usize, strategy: StrategyArg) -> FreeRowStrategy {
    match strategy {
        StrategyArg::GramSchmidt => FreeRowStrategy::GramSchmidt,
        StrategyArg::Paper4 => FreeRowStrategy::Paper4,
        StrategyArg::Auto => {
            if n == 4 {
                FreeRowStrategy::Paper4
            } else {
                FreeRowStrategy::GramSchmidt
            }
        }
    }
}

fn build_system(n: usize, omega: f64, strategy: StrategyArg) -> Result<CoupledSystem> {
    if n < 2 || n % 2 != 0 {
        bail!("n must be even and at least 2, got {n}");
    }
    let target = fourier_coefficients(n / 2, omega)?;
    let design = build_design(&target, pick_strategy(n, strategy))?;
    Ok(synthesize(&design)?)
}

fn load_system(path: &Path) -> Result<CoupledSystem> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading system descriptor {}", path.display()))?;
    let descriptor: SystemDescriptor = serde_json::from_str(&text)
        .with_context(|| format!("parsing system descriptor {}", path.display()))?;
    Ok(descriptor.into_system()?)
}

/// Series for the statistics pipeline: from a stored system when given,
/// otherwise the Fourier target truncation for `n` levels at unit scale.
fn resolve_series(
    n: Option<usize>,
    system: Option<&Path>,
    omega: f64,
) -> Result<(SineSeries, usize, f64)> {
    match (n, system) {
        (_, Some(path)) => {
            let system = load_system(path)?;
            let series = amplitude_series(&eigendecompose(&system)?)?;
            Ok((series, system.n(), system.omega()))
        }
        (Some(n), None) => {
            if n < 2 || n % 2 != 0 {
                bail!("n must be even and at least 2, got {n}");
            }
            let target = fourier_coefficients(n / 2, omega)?;
            Ok((target_series(&target), n, omega))
        }
        (None, None) => bail!("set either --n or --system"),
    }
}

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    let file =
        File::create(path).with_context(|| format!("creating output file {}", path.display()))?;
    Ok(BufWriter::new(file))
}

// ---------------------------------------------------------------------------
// synthesize

#[derive(Serialize)]
struct CouplingLine {
    from_level: usize,
    to_level: usize,
    /// Coupling in multiples of the display unit.
    multiple: f64,
    /// Coupling in angular-frequency units.
    value: f64,
}

#[derive(Serialize)]
struct SynthesisSummary {
    n: usize,
    omega: f64,
    strategy: String,
    /// Display unit for the couplings (2πΩ/√20 for n = 4, else 2πΩ).
    unit: String,
    couplings: Vec<CouplingLine>,
    verification: VerificationReport,
}

fn coupling_summary(system: &CoupledSystem, strategy: FreeRowStrategy) -> SynthesisSummary {
    let n = system.n();
    let omega = system.omega();
    let tau = std::f64::consts::TAU;
    let (unit, unit_name) = if n == 4 {
        (tau * omega / 20.0_f64.sqrt(), "2πΩ/√20".to_string())
    } else {
        (tau * omega, "2πΩ".to_string())
    };
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let value = system.h()[[i, j]];
            if value.abs() > 1e-12 * tau * omega {
                couplings.push(CouplingLine {
                    from_level: i + 1,
                    to_level: j + 1,
                    multiple: value / unit,
                    value,
                });
            }
        }
    }
    let target = fourier_coefficients(n / 2, omega).expect("valid by construction");
    SynthesisSummary {
        n,
        omega,
        strategy: format!("{strategy:?}"),
        unit: unit_name,
        couplings,
        verification: verify(system, &target),
    }
}

fn render_synthesis_summary(s: &SynthesisSummary, json: bool) -> Result<String> {
    if json {
        return Ok(serde_json::to_string_pretty(s)?);
    }
    let mut text = format!(
        "{}-level system at omega = {} ({} strategy)\ncouplings in units of {}:\n",
        s.n, s.omega, s.strategy, s.unit
    );
    for c in &s.couplings {
        text.push_str(&format!(
            "  level {} <-> level {}: {:+.6}\n",
            c.from_level, c.to_level, c.multiple
        ));
    }
    text.push_str(&format!(
        "verification: {}\n",
        if s.verification.passed() {
            "PASS"
        } else {
            "FAIL"
        }
    ));
    Ok(text)
}

fn cmd_synthesize(args: SynthesizeArgs, file: &FileConfig) -> Result<()> {
    let n = require(args.n, file.n, "n")?;
    let omega = resolve(args.omega, file.omega, 1.0);
    let strategy_arg = match (&args.strategy, &file.strategy) {
        (Some(s), _) => *s,
        (None, Some(raw)) => parse_enum(raw, "strategy")?,
        (None, None) => StrategyArg::Auto,
    };
    let json = matches!(
        resolve(args.format, parse_format(file)?, FormatArg::Csv),
        FormatArg::Json
    );

    let system = build_system(n, omega, strategy_arg)?;
    let summary = coupling_summary(&system, pick_strategy(n, strategy_arg));
    let descriptor = SystemDescriptor::from_system(&system);
    let descriptor_json = serde_json::to_string_pretty(&descriptor)?;

    match &args
        .out
        .clone()
        .or(file.out_dir.clone().map(|d| d.join("system.json")))
    {
        Some(path) => {
            let mut out = open_out(path)?;
            writeln!(out, "{descriptor_json}")?;
            out.flush()?;
            print!("{}", render_synthesis_summary(&summary, json)?);
            if !json {
                println!("descriptor written to {}", path.display());
            }
        }
        None => {
            println!("{descriptor_json}");
            eprint!("{}", render_synthesis_summary(&summary, json)?);
        }
    }

    if !summary.verification.passed() {
        bail!("synthesized system failed verification");
    }
    Ok(())
}

fn parse_format(file: &FileConfig) -> Result<Option<FormatArg>> {
    file.format
        .as_deref()
        .map(|raw| parse_enum(raw, "format"))
        .transpose()
}

// ---------------------------------------------------------------------------
// verify

fn cmd_verify(args: VerifyArgs, file: &FileConfig) -> Result<()> {
    let json = matches!(
        resolve(args.format, parse_format(file)?, FormatArg::Csv),
        FormatArg::Json
    );
    let system = load_system(&args.system)?;
    let target = fourier_coefficients(system.n() / 2, system.omega())?;
    let report = verify(&system, &target);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        let line = |name: &str, check: &antibunch::synthesis::Check| {
            println!(
                "{name:<24} residual {:>12.3e}  tol {:>9.1e}  {}",
                check.residual,
                check.tolerance,
                if check.passed { "pass" } else { "FAIL" }
            );
        };
        line("symmetry", &report.symmetry);
        line("zero diagonal", &report.zero_diagonal);
        line("orthogonality", &report.orthogonality);
        line("eigenvalue pairing", &report.eigenvalue_pairing);
        line("spectrum match", &report.spectrum_match);
        line("pair products", &report.pair_products);
        line("coefficient ratios", &report.coefficient_ratios);
        println!("overall: {}", if report.passed() { "PASS" } else { "FAIL" });
    }
    if !report.passed() {
        bail!("system failed verification");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evolve

#[derive(Serialize)]
struct EvolveSummary {
    n: usize,
    omega: f64,
    method: String,
    points: usize,
    t_end: f64,
    max_norm_deviation: f64,
}

fn cmd_evolve(args: EvolveArgs, file: &FileConfig) -> Result<()> {
    let omega = resolve(args.omega, file.omega, 1.0);
    let periods = resolve(args.periods, file.periods, 2.0);
    let grid_points = resolve(args.grid, file.grid, 512);
    let method = args.method.unwrap_or(MethodArg::Spectral);
    let json = matches!(
        resolve(args.format, parse_format(file)?, FormatArg::Csv),
        FormatArg::Json
    );

    let system = match (&args.system, args.n.or(file.n)) {
        (Some(path), _) => load_system(path)?,
        (None, Some(n)) => build_system(n, omega, StrategyArg::Auto)?,
        (None, None) => bail!("set either --n or --system"),
    };
    let grid = uniform_grid(system.omega(), periods, grid_points);
    let trajectory = match method {
        MethodArg::Spectral => evolve_spectral(&eigendecompose(&system)?, &grid)?,
        MethodArg::Ode => evolve_ode_oracle(&system, &grid)?,
    };

    match &args.out {
        Some(path) => {
            let mut out = open_out(path)?;
            trajectory.write_csv(&mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            trajectory.write_csv(stdout.lock())?;
        }
    }

    let summary = EvolveSummary {
        n: system.n(),
        omega: system.omega(),
        method: format!("{method:?}"),
        points: grid.len(),
        t_end: *grid.last().unwrap(),
        max_norm_deviation: trajectory.max_norm_deviation(),
    };
    let rendered = if json {
        serde_json::to_string_pretty(&summary)?
    } else {
        format!(
            "evolved {} levels over {periods} periods ({} points), max norm deviation {:.3e}",
            summary.n, summary.points, summary.max_norm_deviation
        )
    };
    if args.out.is_some() {
        println!("{rendered}");
    } else {
        eprintln!("{rendered}");
    }

    if summary.max_norm_deviation > 1e-9 {
        bail!(
            "norm conservation violated: {:.3e} > 1e-9",
            summary.max_norm_deviation
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// wtd

fn cmd_wtd(args: WtdArgs, file: &FileConfig) -> Result<()> {
    let omega = resolve(args.omega, file.omega, 1.0);
    let gamma_ratio = resolve(args.gamma, file.gamma, 100.0);
    let grid = resolve(args.grid, file.grid, 4096);
    let json = matches!(
        resolve(args.format, parse_format(file)?, FormatArg::Csv),
        FormatArg::Json
    );

    let (series, _, omega_used) = resolve_series(args.n.or(file.n), args.system.as_deref(), omega)?;
    let series = match args.scale {
        Some(s) if s != 0.0 => series.scaled(s),
        Some(_) => bail!("scale must be nonzero"),
        None => series,
    };
    let gamma = gamma_ratio * omega_used;
    let table = waiting_time_table(
        &series,
        gamma,
        &TableConfig {
            points_per_period: grid,
            ..TableConfig::default()
        },
    )?;

    match &args.out {
        Some(path) => {
            let mut out = open_out(path)?;
            table.write_csv(&mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            table.write_csv(stdout.lock())?;
        }
    }

    let summary = WaitingSummary::from_table(&table);
    let rendered = if json {
        serde_json::to_string(&summary)?
    } else {
        format!(
            "gamma = {}, r = {:.6}, mean wait = {:.6}, std = {:.6}",
            summary.gamma, summary.r, summary.mean_wait, summary.std_wait
        )
    };
    if args.out.is_some() {
        println!("{rendered}");
    } else {
        eprintln!("{rendered}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// g2

#[derive(Serialize)]
struct G2Summary {
    gamma: f64,
    omega: f64,
    n: usize,
    r: f64,
    tau_max: f64,
    d_tau: f64,
    g2_end: f64,
    extrema_above_002: usize,
    stable: bool,
}

fn cmd_g2(args: G2Args, file: &FileConfig) -> Result<()> {
    let omega = resolve(args.omega, file.omega, 1.0);
    let gamma_ratio = resolve(args.gamma, file.gamma, 100.0);
    let grid = resolve(args.grid, file.grid, 4096);
    let json = matches!(
        resolve(args.format, parse_format(file)?, FormatArg::Csv),
        FormatArg::Json
    );

    let (series, n, omega_used) = resolve_series(args.n.or(file.n), args.system.as_deref(), omega)?;
    let gamma = gamma_ratio * omega_used;
    let table = waiting_time_table(&series, gamma, &TableConfig::default())?;
    let tau_max = resolve(args.tau_max, file.tau_max, 10.0 / table.rate());
    let d_tau = series.base_period() / grid as f64;
    let correlation = renewal_solve(&table, tau_max, d_tau)?;

    match &args.out {
        Some(path) => {
            let mut out = open_out(path)?;
            correlation.write_csv(&mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            correlation.write_csv(stdout.lock())?;
        }
    }

    let summary = G2Summary {
        gamma,
        omega: omega_used,
        n,
        r: table.rate(),
        tau_max,
        d_tau,
        g2_end: *correlation.g2().last().unwrap(),
        extrema_above_002: count_oscillation_extrema(correlation.g2(), 0.02),
        stable: correlation.stable(),
    };
    let rendered = if json {
        serde_json::to_string(&summary)?
    } else {
        format!(
            "r = {:.6}, tau_max = {:.4}, g2(tau_end) = {:.4}, extrema = {}, stable = {}",
            summary.r, summary.tau_max, summary.g2_end, summary.extrema_above_002, summary.stable
        )
    };
    if args.out.is_some() {
        println!("{rendered}");
    } else {
        eprintln!("{rendered}");
    }

    if !correlation.stable() {
        bail!("renewal solution unstable: refine --grid");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Serialize)]
struct GofSummary {
    mode: String,
    trajectories: usize,
    total_jumps: usize,
    ks_statistic: f64,
    ks_critical: f64,
    ks_pass: bool,
    empirical_rate: f64,
    analytic_rate: f64,
    rate_rel_err: f64,
    rate_pass: bool,
}

fn cmd_simulate(args: SimulateArgs, file: &FileConfig) -> Result<()> {
    let omega = resolve(args.omega, file.omega, 1.0);
    let gamma_ratio = resolve(args.gamma, file.gamma, 100.0);
    let n_jumps = resolve(args.jumps, file.jumps, 100_000);
    let n_traj = resolve(args.trajectories, file.trajectories, 1);
    let seed = resolve(args.seed, file.seed, 1);
    let dt = resolve(args.dt, file.dt, 1e-4);
    let mode = match (&args.mode, &file.mode) {
        (Some(m), _) => *m,
        (None, Some(raw)) => parse_enum(raw, "mode")?,
        (None, None) => ModeArg::Exact,
    };
    anyhow::ensure!(n_traj >= 1, "need at least one trajectory");

    // mcwf needs the full Hamiltonian; the renewal modes only the series.
    let (series, system) = match (&args.system, args.n.or(file.n)) {
        (Some(path), _) => {
            let system = load_system(path)?;
            let series = amplitude_series(&eigendecompose(&system)?)?;
            (series, Some(system))
        }
        (None, Some(n)) => {
            let (series, _, _) = resolve_series(Some(n), None, omega)?;
            let system = if mode == ModeArg::Mcwf {
                Some(build_system(n, omega, StrategyArg::Auto)?)
            } else {
                None
            };
            (series, system)
        }
        (None, None) => bail!("set either --n or --system"),
    };
    let omega_used = series.terms()[0].frequency / std::f64::consts::TAU;
    let gamma = gamma_ratio * omega_used;

    let table = waiting_time_table(&series, gamma, &TableConfig::default())?;
    let fano_window = 20.0 / table.rate();

    let tasks: Vec<_> = (0..n_traj)
        .map(|k| {
            let series = series.clone();
            let system = system.clone();
            let traj_seed = seed.wrapping_add(k as u64);
            move || -> Result<JumpRecord> {
                match mode {
                    ModeArg::Exact => {
                        simulate(&series, gamma, n_jumps, traj_seed, SimMode::ExactInverseCdf)
                            .map_err(Into::into)
                    }
                    ModeArg::Bernoulli => simulate(
                        &series,
                        gamma,
                        n_jumps,
                        traj_seed,
                        SimMode::BernoulliStep { dt },
                    )
                    .map_err(Into::into),
                    ModeArg::Mcwf => {
                        let system = system
                            .as_ref()
                            .context("mcwf mode requires a full system (--n or --system)")?;
                        simulate_mcwf(system, gamma, n_jumps, traj_seed, dt).map_err(Into::into)
                    }
                }
            }
        })
        .collect();
    let records: Vec<JumpRecord> = run_capped(tasks, thread_cap()?)
        .into_iter()
        .collect::<Result<_>>()?;

    // Jump-time CSVs.
    if let Some(base) = &args.out {
        for record in &records {
            let path = if records.len() == 1 {
                base.clone()
            } else {
                suffixed(base, record.seed)
            };
            let mut out = open_out(&path)?;
            record.write_csv(&mut out)?;
            out.flush()?;
        }
    }

    // Per-trajectory JSONL summaries.
    let mut lines = String::new();
    for record in &records {
        let summary = TrajectorySummary::from_record(record, fano_window);
        lines.push_str(&serde_json::to_string(&summary)?);
        lines.push('\n');
    }
    match &args.summary {
        Some(path) => {
            fs::write(path, &lines)
                .with_context(|| format!("writing summary {}", path.display()))?;
        }
        None => print!("{lines}"),
    }

    // Pooled goodness of fit against the analytic distribution.
    let mut waits: Vec<f64> = records.iter().flat_map(|r| r.inter_arrivals()).collect();
    waits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = ks_statistic(&waits, |t| {
        1.0 - antibunch::photostats::survival(&series, gamma, t)
    });
    let crit = ks_critical_001(waits.len());
    let total_time: f64 = records.iter().map(|r| *r.jump_times.last().unwrap()).sum();
    let empirical_rate = waits.len() as f64 / total_time;
    let rate_rel_err = (empirical_rate - table.rate()).abs() / table.rate();
    let gof = GofSummary {
        mode: format!("{mode:?}"),
        trajectories: records.len(),
        total_jumps: waits.len(),
        ks_statistic: d,
        ks_critical: crit,
        ks_pass: d < crit,
        empirical_rate,
        analytic_rate: table.rate(),
        rate_rel_err,
        rate_pass: rate_rel_err < 0.01,
    };
    eprintln!("{}", serde_json::to_string(&gof)?);

    // The analytic w(t) describes the renewal model exactly, so only the
    // exact and bernoulli modes gate the exit status on it; mcwf includes
    // back-action and is reported without judgement.
    match mode {
        ModeArg::Exact => {
            if !gof.ks_pass || !gof.rate_pass {
                bail!("goodness-of-fit failed: KS {d:.5} (crit {crit:.5}), rate err {rate_rel_err:.5}");
            }
        }
        ModeArg::Bernoulli => {
            if !gof.rate_pass {
                bail!("rate check failed: err {rate_rel_err:.5}");
            }
        }
        ModeArg::Mcwf => {}
    }
    Ok(())
}

fn suffixed(base: &Path, seed: u64) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("jumps");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_{seed}.{ext}"))
}

// ---------------------------------------------------------------------------
// figures

#[derive(Serialize)]
struct FigureReport {
    path: String,
    columns: Vec<String>,
    rows: usize,
}

fn cmd_figures(args: FiguresArgs, file: &FileConfig) -> Result<()> {
    let omega = resolve(args.omega, file.omega, 1.0);
    let gamma_ratio = resolve(args.gamma, file.gamma, 100.0);
    let grid = resolve(args.grid, file.grid, 4096);
    let out_dir = resolve(args.out_dir, file.out_dir.clone(), PathBuf::from("."));
    let json = matches!(
        resolve(args.format, parse_format(file)?, FormatArg::Csv),
        FormatArg::Json
    );
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let gamma = gamma_ratio * omega;
    let sizes = [2usize, 4, 8, 16];

    // Waiting-time tables for all n, in parallel capped by ANTIBUNCH_THREADS.
    let cap = thread_cap()?;
    let tables: Vec<(SineSeries, WaitingTimeTable)> = run_capped(
        sizes
            .iter()
            .map(|&n| {
                move || -> Result<(SineSeries, WaitingTimeTable)> {
                    let target = fourier_coefficients(n / 2, omega)?;
                    let series = target_series(&target);
                    let cfg = TableConfig {
                        points_per_period: grid,
                        ..TableConfig::default()
                    };
                    let table = waiting_time_table(&series, gamma, &cfg)?;
                    Ok((series, table))
                }
            })
            .collect(),
        cap,
    )
    .into_iter()
    .collect::<Result<_>>()?;

    let mut reports = Vec::new();

    // fig1: two-level sine evolution against the square-transition target.
    let fig1_path = out_dir.join("fig1.csv");
    {
        let two_level = target_series(&fourier_coefficients(1, omega)?);
        let square = target_series(&fourier_coefficients(64, omega)?);
        let t_grid = uniform_grid(omega, 1.0, 512);
        let mut out = open_out(&fig1_path)?;
        writeln!(out, "t,a1_n2,square_target")?;
        for &t in &t_grid {
            writeln!(out, "{t},{},{}", two_level.eval(t), square.eval(t))?;
        }
        out.flush()?;
        reports.push(FigureReport {
            path: fig1_path.display().to_string(),
            columns: vec!["t".into(), "a1_n2".into(), "square_target".into()],
            rows: t_grid.len(),
        });
    }

    // fig3: waiting-time distributions on a shared grid.
    let fig3_path = out_dir.join("fig3.csv");
    {
        let step = tables[0].1.step();
        let t_end = tables
            .iter()
            .map(|(_, t)| *t.times().last().unwrap())
            .fold(0.0_f64, f64::max);
        let points = (t_end / step).ceil() as usize;
        let mut out = open_out(&fig3_path)?;
        writeln!(out, "t,w_n2,w_n4,w_n8,w_n16")?;
        for k in 0..=points {
            let t = k as f64 * step;
            write!(out, "{t}")?;
            for (series, _) in &tables {
                write!(out, ",{}", waiting_time(series, gamma, t))?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        reports.push(FigureReport {
            path: fig3_path.display().to_string(),
            columns: vec![
                "t".into(),
                "w_n2".into(),
                "w_n4".into(),
                "w_n8".into(),
                "w_n16".into(),
            ],
            rows: points + 1,
        });
    }

    // fig4: normalized correlation functions on a shared grid.
    let fig4_path = out_dir.join("fig4.csv");
    {
        let d_tau = tables[0].0.base_period() / grid as f64;
        let tau_max = tables
            .iter()
            .map(|(_, t)| 10.0 / t.rate())
            .fold(0.0_f64, f64::max);
        let correlations: Vec<_> = run_capped(
            tables
                .iter()
                .map(|(_, table)| move || renewal_solve(table, tau_max, d_tau))
                .collect(),
            cap,
        )
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

        let rows = correlations[0].g2().len();
        let mut out = open_out(&fig4_path)?;
        writeln!(out, "tau,g2_n2,g2_n4,g2_n8,g2_n16")?;
        for k in 0..rows {
            write!(out, "{}", correlations[0].taus()[k])?;
            for corr in &correlations {
                write!(out, ",{}", corr.g2()[k])?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        reports.push(FigureReport {
            path: fig4_path.display().to_string(),
            columns: vec![
                "tau".into(),
                "g2_n2".into(),
                "g2_n4".into(),
                "g2_n8".into(),
                "g2_n16".into(),
            ],
            rows,
        });

        // Trend validations before declaring success.
        for (k, (_, table)) in tables.iter().enumerate() {
            anyhow::ensure!(
                table.densities()[0] == 0.0,
                "w(0) must vanish for n = {}",
                sizes[k]
            );
            let mass = table.mass() + table.tail_mass();
            anyhow::ensure!(
                (mass - 1.0).abs() < 1e-6,
                "waiting-time mass off for n = {}: {mass}",
                sizes[k]
            );
        }
        for pair in tables.windows(2) {
            anyhow::ensure!(
                pair[1].1.std_wait() < pair[0].1.std_wait(),
                "waiting-time spread must shrink with n"
            );
            let peak = |t: &WaitingTimeTable| t.densities().iter().fold(0.0_f64, |m, x| m.max(*x));
            anyhow::ensure!(
                peak(&pair[1].1) > peak(&pair[0].1),
                "waiting-time peak must grow with n"
            );
        }
        let counts: Vec<usize> = correlations
            .iter()
            .map(|c| count_oscillation_extrema(c.g2(), 0.02))
            .collect();
        for pair in counts.windows(2) {
            anyhow::ensure!(
                pair[1] >= pair[0],
                "correlation oscillations must persist longer with n: {counts:?}"
            );
        }
    }

    if json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for report in &reports {
            println!("{} ({} rows)", report.path, report.rows);
        }
    }
    Ok(())
}

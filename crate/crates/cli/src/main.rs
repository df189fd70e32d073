//! Command-line front end for the mode-shape deformation library.
//!
//! Subcommands: analyze, deform, sweep, hmax, simulate, export. All file
//! output is deterministic (12-significant-digit floats, fixed orderings)
//! and written atomically (temp file + rename).
//!
//! Exit codes: 0 success, 1 usage/parameter error, 2 unstable system
//! (analyze only), 3 numerical failure, 4 I/O failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use modeshape_core::dae::{
    builtin_smib, builtin_stiff_chain, from_linear, DaeModel, JacobianMode, JacobianSet,
    SmibParams,
};
use modeshape_core::deformation::{hmax_scenarios, log_grid, sweep, HmaxCriteria};
use modeshape_core::linear_model::load_linear_model;
use modeshape_core::report;
use modeshape_core::simulator::{simulate, InitPolicy, SolverConfig};
use modeshape_core::tdi::{MethodKind, MethodSpec};
use modeshape_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "modeshape",
    version,
    about = "Eigenvalue and mode-shape deformation of fixed-step integration methods on DAE models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Small-signal analysis: eigenvalues, damping, stiffness, participation factors
    Analyze(AnalyzeArgs),
    /// Deformation metrics for one method at one step size
    Deform(DeformArgs),
    /// Deformation metrics over a log-spaced step-size grid
    Sweep(SweepArgs),
    /// Largest admissible step size under accuracy thresholds
    Hmax(HmaxArgs),
    /// Fixed-step time-domain simulation
    Simulate(SimulateArgs),
    /// Export a built-in model's equilibrium Jacobians as a linear model file
    Export(ExportArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Built-in model: smib | stiff-chain
    #[arg(long, value_name = "NAME", conflicts_with = "linear")]
    model: Option<String>,
    /// Linear model JSON file
    #[arg(long, value_name = "PATH")]
    linear: Option<PathBuf>,
    /// smib parameter override, repeatable (keys: H, D, X, E, V, Pm, omega_b)
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// stiff-chain: number of slow states
    #[arg(long, default_value_t = 1)]
    nslow: usize,
    /// stiff-chain: number of fast states
    #[arg(long, default_value_t = 1)]
    nfast: usize,
    /// stiff-chain: slowest decay rate (negative)
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    smin: f64,
    /// stiff-chain: fastest decay rate (negative)
    #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
    smax: f64,
    /// stiff-chain: strength of the shared algebraic feedback
    #[arg(long, default_value_t = 0.0)]
    coupling: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutArgs {
    /// Output file (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format (default: csv for tables, json for reports)
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct ModeSelectArgs {
    /// How many of the least-damped modes to track (0 = all)
    #[arg(long = "n-modes", default_value_t = 5)]
    n_modes: usize,
    /// How many top-participating states to report per mode
    #[arg(long = "top-pf", default_value_t = 3)]
    top_pf: usize,
}

#[derive(Args)]
struct GridArgs {
    /// Smallest step size of the log-spaced grid
    #[arg(long)]
    hmin: f64,
    /// Largest step size of the log-spaced grid
    #[arg(long)]
    hmax: f64,
    /// Number of grid points (log-spaced, inclusive endpoints)
    #[arg(long, default_value_t = 20)]
    hpoints: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DeformArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Integration method: theta:<t> | bem | tm | fem | dirk2s | heun:<r>
    #[arg(long)]
    method: String,
    /// Step size
    #[arg(long)]
    h: f64,
    #[command(flatten)]
    select: ModeSelectArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Integration method: theta:<t> | bem | tm | fem | dirk2s | heun:<r>
    #[arg(long)]
    method: String,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    select: ModeSelectArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct HmaxArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Integration method: theta:<t> | bem | tm | fem | dirk2s | heun:<r>
    #[arg(long)]
    method: String,
    #[command(flatten)]
    grid: GridArgs,
    /// Eigenvalue-deformation threshold in percent
    #[arg(long = "eps-s")]
    eps_s: Option<f64>,
    /// Mode-shape-deformation threshold in percent
    #[arg(long = "eps-p")]
    eps_p: Option<f64>,
    #[command(flatten)]
    select: ModeSelectArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Integration method: theta:<t> | bem | tm | fem | dirk2s | heun:<r>
    #[arg(long)]
    method: String,
    /// Step size
    #[arg(long)]
    h: f64,
    /// End time (0 writes a header-only file)
    #[arg(long)]
    tend: f64,
    /// Initial-state perturbation NAME:OFFSET, repeatable (e.g. delta:+0.1)
    #[arg(long = "perturb", value_name = "NAME:OFFSET")]
    perturbs: Vec<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutArgs,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Parse(_) => 1,
        Error::Io(_) | Error::Json(_) => 4,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Deform(a) => cmd_deform(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Hmax(a) => cmd_hmax(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Export(a) => cmd_export(a),
    }
}

/// Write atomically when a path is given, else to stdout.
fn write_output(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let tmp = PathBuf::from(format!("{}.tmp", path.display()));
            std::fs::write(&tmp, content)?;
            std::fs::rename(&tmp, path).map_err(|e| {
                let _ = std::fs::remove_file(&tmp);
                Error::Io(e)
            })?;
            Ok(())
        }
    }
}

fn parse_method(s: &str) -> Result<MethodKind> {
    s.parse::<MethodKind>()
}

fn smib_params(overrides: &[String]) -> Result<SmibParams> {
    let mut p = SmibParams::default();
    for ov in overrides {
        let (key, value) = ov.split_once('=').ok_or_else(|| {
            Error::Parameter(format!("--param expects KEY=VALUE, got '{ov}'"))
        })?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::Parameter(format!("--param {key}: '{value}' is not a number")))?;
        match key.to_ascii_lowercase().as_str() {
            "h" => p.h = v,
            "d" => p.d = v,
            "x" => p.x = v,
            "e" => p.e = v,
            "v" => p.v = v,
            "pm" => p.p_m = v,
            "omega_b" => p.omega_b = v,
            other => {
                return Err(Error::Parameter(format!(
                    "unknown smib parameter '{other}' (expected H, D, X, E, V, Pm, omega_b)"
                )))
            }
        }
    }
    Ok(p)
}

/// The model behind a run: a simulatable DAE plus its equilibrium Jacobians.
struct ResolvedModel {
    model: DaeModel,
    jacobians: JacobianSet,
}

fn resolve_model(margs: &ModelArgs) -> Result<ResolvedModel> {
    match (&margs.model, &margs.linear) {
        (Some(name), None) => {
            let model = match name.as_str() {
                "smib" => builtin_smib(smib_params(&margs.params)?)?,
                "stiff-chain" => {
                    if !margs.params.is_empty() {
                        return Err(Error::Parameter(
                            "--param applies to --model smib; stiff-chain uses \
                             --nslow/--nfast/--smin/--smax/--coupling"
                                .into(),
                        ));
                    }
                    builtin_stiff_chain(
                        margs.nslow,
                        margs.nfast,
                        margs.smin,
                        margs.smax,
                        margs.coupling,
                    )?
                }
                other => {
                    return Err(Error::Parameter(format!(
                        "unknown built-in model '{other}' (expected smib or stiff-chain)"
                    )))
                }
            };
            let eq = model.find_equilibrium(&model.guess.0, &model.guess.1)?;
            let jacobians = model.jacobians(&eq.x_o, &eq.y_o, JacobianMode::Auto)?;
            Ok(ResolvedModel { model, jacobians })
        }
        (None, Some(path)) => {
            let lin = load_linear_model(path)?;
            let name = lin.name.clone().unwrap_or_else(|| "linear".to_string());
            let model = from_linear(lin.jacobians.clone(), name)?;
            Ok(ResolvedModel {
                model,
                jacobians: lin.jacobians,
            })
        }
        (None, None) => Err(Error::Parameter(
            "a model source is required: --model <builtin> or --linear <file>".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with enforces exclusivity"),
    }
}

fn effective_format(out: &OutArgs, default: Format) -> Format {
    out.format.unwrap_or(default)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    let resolved = resolve_model(&args.model)?;
    let analysis = report::analyze(&resolved.jacobians, &resolved.model.state_names)?;
    let content = match effective_format(&args.out, Format::Json) {
        Format::Json => report::json_to_string(&report::analysis_to_json(&analysis)),
        Format::Csv => report::analysis_to_csv(&analysis),
    };
    write_output(&args.out.out, &content)?;
    if analysis.condition_warning {
        eprintln!("warning: eigenvector matrix is ill-conditioned; participation factors unreliable");
    }
    if analysis.unstable {
        eprintln!("warning: system is unstable (an eigenvalue has nonnegative real part)");
        return Ok(2);
    }
    Ok(0)
}

fn render_sweep(
    rows: &[modeshape_core::deformation::SweepRow],
    state_names: &[String],
    format: Format,
) -> String {
    match format {
        Format::Csv => report::sweep_to_csv(rows, state_names),
        Format::Json => report::json_to_string(&report::sweep_to_json(rows, state_names)),
    }
}

/// Shared tail of deform/sweep: write the table, exit 0 when any grid point
/// produced metrics, 3 when every point failed.
fn finish_sweep(
    rows: Vec<modeshape_core::deformation::SweepRow>,
    state_names: &[String],
    out: &OutArgs,
) -> Result<i32> {
    let content = render_sweep(&rows, state_names, effective_format(out, Format::Csv));
    write_output(&out.out, &content)?;
    if !rows.is_empty() && rows.iter().all(|r| r.failed) {
        eprintln!("error: every grid point failed (singular step matrix or spectrum failure)");
        return Ok(3);
    }
    Ok(0)
}

fn cmd_deform(args: DeformArgs) -> Result<i32> {
    let resolved = resolve_model(&args.model)?;
    let kind = parse_method(&args.method)?;
    MethodSpec::new(kind, args.h)?; // validate h before sweeping
    let rows = sweep(
        &resolved.jacobians,
        kind,
        &[args.h],
        args.select.n_modes,
        args.select.top_pf,
    )?;
    finish_sweep(rows, &resolved.model.state_names, &args.out)
}

fn cmd_sweep(args: SweepArgs) -> Result<i32> {
    let resolved = resolve_model(&args.model)?;
    let kind = parse_method(&args.method)?;
    let grid = log_grid(args.grid.hmin, args.grid.hmax, args.grid.hpoints)?;
    let rows = sweep(
        &resolved.jacobians,
        kind,
        &grid,
        args.select.n_modes,
        args.select.top_pf,
    )?;
    finish_sweep(rows, &resolved.model.state_names, &args.out)
}

fn cmd_hmax(args: HmaxArgs) -> Result<i32> {
    let resolved = resolve_model(&args.model)?;
    let kind = parse_method(&args.method)?;
    let grid = log_grid(args.grid.hmin, args.grid.hmax, args.grid.hpoints)?;
    let scenarios: Vec<HmaxCriteria> = match (args.eps_s, args.eps_p) {
        (Some(s), Some(p)) => vec![
            HmaxCriteria {
                eps_s_max: Some(s),
                eps_p_max: None,
            },
            HmaxCriteria {
                eps_s_max: None,
                eps_p_max: Some(p),
            },
            HmaxCriteria {
                eps_s_max: Some(s),
                eps_p_max: Some(p),
            },
        ],
        (Some(s), None) => vec![HmaxCriteria {
            eps_s_max: Some(s),
            eps_p_max: None,
        }],
        (None, Some(p)) => vec![HmaxCriteria {
            eps_s_max: None,
            eps_p_max: Some(p),
        }],
        (None, None) => {
            return Err(Error::Parameter(
                "hmax needs at least one threshold: --eps-s and/or --eps-p".into(),
            ))
        }
    };
    if effective_format(&args.out, Format::Json) != Format::Json {
        return Err(Error::Parameter("hmax reports are JSON only".into()));
    }
    let reports = hmax_scenarios(
        &resolved.jacobians,
        kind,
        &scenarios,
        args.select.n_modes,
        args.select.top_pf,
        &grid,
    )?;
    let content = report::json_to_string(&report::hmax_list_to_json(&reports));
    write_output(&args.out.out, &content)?;
    Ok(0)
}

fn parse_perturbs(specs: &[String], model: &DaeModel) -> Result<Vec<(usize, f64)>> {
    specs
        .iter()
        .map(|spec| {
            let (name, offset) = spec.split_once(':').ok_or_else(|| {
                Error::Parameter(format!("--perturb expects NAME:OFFSET, got '{spec}'"))
            })?;
            let idx = model
                .state_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    Error::Parameter(format!(
                        "unknown state '{name}' (states: {})",
                        model.state_names.join(", ")
                    ))
                })?;
            let v: f64 = offset.trim_start_matches('+').parse().map_err(|_| {
                Error::Parameter(format!("--perturb {name}: '{offset}' is not a number"))
            })?;
            Ok((idx, v))
        })
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32> {
    if !(args.tend.is_finite() && args.tend >= 0.0) {
        return Err(Error::Parameter(format!(
            "--tend must be nonnegative, got {}",
            args.tend
        )));
    }
    let resolved = resolve_model(&args.model)?;
    let kind = parse_method(&args.method)?;
    let method = MethodSpec::new(kind, args.h)?;
    let format = effective_format(&args.out, Format::Csv);

    if args.tend == 0.0 {
        let content = match format {
            Format::Csv => {
                let mut s =
                    report::trajectory_csv_header(resolved.model.nu, resolved.model.mu);
                s.push('\n');
                s
            }
            Format::Json => report::json_to_string(&serde_json::json!({
                "t": [], "x": [], "y": [], "converged": true
            })),
        };
        write_output(&args.out.out, &content)?;
        eprintln!("simulated 0 steps");
        return Ok(0);
    }

    let perturbs = parse_perturbs(&args.perturbs, &resolved.model)?;
    let eq = resolved
        .model
        .find_equilibrium(&resolved.model.guess.0, &resolved.model.guess.1)?;
    let mut x0 = eq.x_o.clone();
    for &(idx, dv) in &perturbs {
        x0[idx] += dv;
    }
    let traj = simulate(
        &resolved.model,
        &method,
        &x0,
        &eq.y_o,
        args.tend,
        &SolverConfig::default(),
        InitPolicy::SolveAlgebraic,
    )?;

    let content = match format {
        Format::Csv => report::trajectory_to_csv(&traj),
        Format::Json => report::json_to_string(&report::trajectory_to_json(&traj)),
    };
    write_output(&args.out.out, &content)?;

    let total_newton: usize = traj.newton_iters.iter().sum();
    eprintln!(
        "simulated {} steps, {} Newton iterations total",
        traj.steps(),
        total_newton
    );
    let dev0 = (&x0 - &eq.x_o).amax().max(1e-12);
    let dev_end = (traj.states.row(traj.steps()).transpose() - &eq.x_o).amax();
    if !traj.converged {
        eprintln!("warning: trajectory contains non-finite values; the run diverged");
    } else if dev_end > 1e3 * dev0 {
        eprintln!(
            "warning: deviation grew from {dev0:.3e} to {dev_end:.3e}; \
             the discrete system looks unstable at this step size"
        );
    }
    Ok(0)
}

fn cmd_export(args: ExportArgs) -> Result<i32> {
    if args.model.linear.is_some() {
        return Err(Error::Parameter(
            "export reads a built-in model; --linear files are already in the export format"
                .into(),
        ));
    }
    let resolved = resolve_model(&args.model)?;
    if effective_format(&args.out, Format::Json) != Format::Json {
        return Err(Error::Parameter("export emits JSON only".into()));
    }
    let text = modeshape_core::linear_model::to_json_string(
        &resolved.jacobians,
        Some(&resolved.model.name),
    )?;
    write_output(&args.out.out, &text)?;
    Ok(0)
}

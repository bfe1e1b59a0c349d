use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cpflow::curvature::{curvature, extended_curvature, gauss_bonnet_defect, CurvatureVector};
use cpflow::flow::{run_flow, FlowConfig, FlowStatus, FlowVariant};
use cpflow::io::{sha256_hex, trace_csv, trace_json, InputError, RunManifest, Surface, SubsetsFile, TargetFile};
use cpflow::obstructions::{
    check_closure, check_strict_bound, check_zero_curvature_necessary, ObstructionReport, SubsetSelection,
};
use cpflow::ode::Integrator;
use cpflow::packing::{omega_membership, Background, PackingMetric};
use cpflow::potential::{newton_iterate, NewtonOptions, NewtonStatus, PotentialContext};
use cpflow::Error;

const DEFAULT_MANIFEST: &str = "cpflow-manifest.json";

#[derive(Parser)]
#[command(name = "cpflow", version, about = "Inversive distance circle packings and combinatorial Ricci flow")]
struct Cli {
    /// Where to write the run manifest
    #[arg(long, global = true, default_value = DEFAULT_MANIFEST)]
    manifest: PathBuf,

    /// Print JSON to standard output instead of a table
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-vertex curvature, Gauss-Bonnet defect and admissibility
    Curvature(CurvatureArgs),
    /// Integrate the Ricci flow from the radii in the surface file
    Flow(FlowArgs),
    /// Newton's method for a prescribed curvature
    Solve(SolveArgs),
    /// Subset bounds on curvature sums
    Check(CheckArgs),
    /// Gauss-Bonnet defect only
    Gb(GbArgs),
}

#[derive(Args, Serialize)]
struct CurvatureArgs {
    surface: PathBuf,
    /// Use the extended curvature (defined for all radii)
    #[arg(long)]
    extended: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum VariantArg {
    Classical,
    Extended,
    Prescribed,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum IntegratorArg {
    Euler,
    Rk4,
}

#[derive(Args, Serialize)]
struct FlowArgs {
    surface: PathBuf,
    #[arg(long, value_enum, default_value = "extended")]
    variant: VariantArg,
    /// JSON file with the target curvature
    #[arg(long)]
    target_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rk4")]
    integrator: IntegratorArg,
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1000.0)]
    max_time: f64,
    #[arg(long, default_value_t = 10)]
    sample_every: usize,
    #[arg(long, default_value_t = 50.0)]
    radius_cap: f64,
    /// Skip the potential column of the trace
    #[arg(long)]
    no_potential: bool,
    /// CSV trace output
    #[arg(long)]
    trace: Option<PathBuf>,
    /// JSON trace output
    #[arg(long)]
    trace_json: Option<PathBuf>,
    /// Surface file with the final radii
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    surface: PathBuf,
    /// JSON file with the target curvature (zero if omitted)
    #[arg(long)]
    target_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Surface file with the solution radii
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CheckArgs {
    surface: PathBuf,
    /// Largest subset size enumerated on complexes too big for exhaustive search
    #[arg(long, default_value_t = 3)]
    subset_cap: usize,
    /// JSON file with extra subsets to check
    #[arg(long)]
    subsets_file: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GbArgs {
    surface: PathBuf,
}

enum Failure {
    Usage(String),
    Input(InputError),
    Library(Error),
    Output(PathBuf, std::io::Error),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Input(_) | Failure::Library(Error::Config(_)) => 2,
            Failure::Library(_) => 3,
            Failure::Output(..) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Input(e) => e.to_string(),
            Failure::Library(e) => e.to_string(),
            Failure::Output(p, e) => format!("cannot write {}: {e}", p.display()),
        }
    }
}

struct Outcome {
    status: String,
    exit_code: i32,
}

impl Outcome {
    fn ok(status: &str) -> Self {
        Self {
            status: status.into(),
            exit_code: 0,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<String, Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Output(path.to_path_buf(), e))?;
    Ok(path.display().to_string())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn load(path: &Path, manifest: &mut RunManifest) -> Result<Surface, Failure> {
    let (surface, text) = Surface::load(path)?;
    manifest.input_digest = Some(sha256_hex(text.as_bytes()));
    Ok(surface)
}

#[derive(Serialize)]
struct CurvatureReport<'a> {
    background: Background,
    extended: bool,
    curvature: &'a CurvatureVector,
    gauss_bonnet_defect: f64,
    in_omega: bool,
    violating_faces: Vec<usize>,
}

fn cmd_curvature(args: &CurvatureArgs, json: bool, manifest: &mut RunManifest) -> Result<Outcome, Failure> {
    let surface = load(&args.surface, manifest)?;
    let metric = surface.metric(&args.surface.display().to_string())?;
    let omega = omega_membership(&surface.complex, &metric)?;
    let k = if args.extended {
        extended_curvature(&surface.complex, &metric)?
    } else {
        curvature(&surface.complex, &metric)?
    };
    let report = CurvatureReport {
        background: metric.background(),
        extended: args.extended,
        curvature: &k,
        gauss_bonnet_defect: gauss_bonnet_defect(&surface.complex, &metric)?,
        in_omega: omega.inside,
        violating_faces: omega.violating_faces,
    };
    if json {
        print!("{}", to_json(&report));
    } else {
        println!("{:>6}  {:>22}", "vertex", "K");
        for (v, kv) in k.values.iter().enumerate() {
            println!("{v:>6}  {kv:>22.15e}");
        }
        println!("gauss-bonnet defect: {:.3e}", report.gauss_bonnet_defect);
        println!("in omega: {}", report.in_omega);
        if !k.degenerate_faces.is_empty() {
            println!("degenerate faces: {:?}", k.degenerate_faces);
        }
    }
    if let Some(path) = &args.report {
        manifest.outputs.report = Some(write_file(path, &to_json(&report))?);
    }
    Ok(Outcome::ok("ok"))
}

fn cmd_gb(args: &GbArgs, json: bool, manifest: &mut RunManifest) -> Result<Outcome, Failure> {
    let surface = load(&args.surface, manifest)?;
    let metric = surface.metric(&args.surface.display().to_string())?;
    let defect = gauss_bonnet_defect(&surface.complex, &metric)?;
    if json {
        println!("{{\"gauss_bonnet_defect\": {defect}}}");
    } else {
        println!("{defect:e}");
    }
    Ok(Outcome::ok("ok"))
}

#[derive(Serialize)]
struct FlowSummary<'a> {
    status: FlowStatus,
    iterations: usize,
    final_time: f64,
    final_residual: f64,
    final_radii: &'a [f64],
    min_radius: f64,
    max_radius: f64,
    omega_exit_time: Option<f64>,
    samples: usize,
}

fn cmd_flow(args: &FlowArgs, json: bool, manifest: &mut RunManifest) -> Result<Outcome, Failure> {
    let name = args.surface.display().to_string();
    let surface = load(&args.surface, manifest)?;
    let metric = surface.metric(&name)?;
    let n = surface.complex.vertex_count();
    let target = match &args.target_file {
        Some(p) => Some(TargetFile::load(p, n)?),
        None => None,
    };
    let config = FlowConfig {
        variant: match args.variant {
            VariantArg::Classical => FlowVariant::Classical,
            VariantArg::Extended => FlowVariant::Extended,
            VariantArg::Prescribed => FlowVariant::Prescribed,
        },
        target,
        integrator: match args.integrator {
            IntegratorArg::Euler => Integrator::Euler,
            IntegratorArg::Rk4 => Integrator::Rk4,
        },
        step: args.dt,
        max_time: args.max_time,
        tolerance: args.tol,
        sample_every: args.sample_every,
        divergence_radius_cap: args.radius_cap,
        record_potential: !args.no_potential,
    };
    config.validate(n)?;
    let result = run_flow(&surface.complex, &surface.inversive, &metric.to_u(), &config)?;
    let radii = result.final_u.radii();

    if let Some(path) = &args.trace {
        manifest.outputs.trace = Some(write_file(path, &trace_csv(n, &result.trace))?);
    }
    if let Some(path) = &args.trace_json {
        manifest.outputs.trace_json = Some(write_file(path, &trace_json(n, &result.trace))?);
    }
    if let Some(path) = &args.out {
        manifest.outputs.radii = Some(write_file(path, &surface.file.with_radii(radii.clone()).to_json())?);
    }
    let summary = FlowSummary {
        status: result.status,
        iterations: result.iterations,
        final_time: result.final_time,
        final_residual: result.final_residual,
        final_radii: &radii,
        min_radius: result.min_radius,
        max_radius: result.max_radius,
        omega_exit_time: result.omega_exit.as_ref().map(|e| e.estimate()),
        samples: result.trace.len(),
    };
    if let Some(path) = &args.report {
        manifest.outputs.report = Some(write_file(path, &to_json(&summary))?);
    }
    manifest.omega_exit_time = summary.omega_exit_time;
    if json {
        print!("{}", to_json(&summary));
    } else {
        println!("status: {}", status_name(result.status));
        println!("time: {}  steps: {}", result.final_time, result.iterations);
        println!("residual: {:e}", result.final_residual);
        if let Some(t) = summary.omega_exit_time {
            println!("left omega near t = {t}");
        }
        for (v, r) in radii.iter().enumerate() {
            println!("r[{v}] = {r}");
        }
    }
    let exit_code = match result.status {
        FlowStatus::Converged => 0,
        FlowStatus::MaxTimeReached => 4,
        FlowStatus::LeftOmega | FlowStatus::Diverged => 5,
    };
    Ok(Outcome {
        status: status_name(result.status).into(),
        exit_code,
    })
}

fn status_name(s: FlowStatus) -> &'static str {
    match s {
        FlowStatus::Converged => "converged",
        FlowStatus::MaxTimeReached => "max_time_reached",
        FlowStatus::LeftOmega => "left_omega",
        FlowStatus::Diverged => "diverged",
    }
}

fn cmd_solve(args: &SolveArgs, json: bool, manifest: &mut RunManifest) -> Result<Outcome, Failure> {
    let name = args.surface.display().to_string();
    let surface = load(&args.surface, manifest)?;
    let metric = surface.metric(&name)?;
    let target = match &args.target_file {
        Some(p) => Some(TargetFile::load(p, surface.complex.vertex_count())?),
        None => None,
    };
    let u0 = metric.to_u();
    let ctx = PotentialContext::new(&surface.complex, surface.inversive.clone(), u0.clone(), target)?;
    let report = newton_iterate(
        &ctx,
        &u0,
        &NewtonOptions {
            tolerance: args.tol,
            max_iter: args.max_iter,
            track_potential: false,
        },
    )?;
    let radii = report.final_u.radii();
    if report.status == NewtonStatus::Converged {
        if let Some(path) = &args.out {
            manifest.outputs.radii = Some(write_file(path, &surface.file.with_radii(radii.clone()).to_json())?);
        }
    }
    if let Some(path) = &args.report {
        manifest.outputs.report = Some(write_file(path, &to_json(&report))?);
    }
    let status = match report.status {
        NewtonStatus::Converged => "converged",
        NewtonStatus::NoDescent => "no_descent",
        NewtonStatus::MaxIter => "max_iter",
    };
    if json {
        print!("{}", to_json(&report));
    } else {
        println!("status: {status}");
        println!("iterations: {}  residual: {:e}", report.iterations, report.residual);
        for (v, r) in radii.iter().enumerate() {
            println!("r[{v}] = {r}");
        }
    }
    Ok(Outcome {
        status: status.into(),
        exit_code: match report.status {
            NewtonStatus::Converged => 0,
            NewtonStatus::MaxIter => 4,
            NewtonStatus::NoDescent => 5,
        },
    })
}

#[derive(Serialize)]
struct CheckReport {
    zero_curvature: ObstructionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric_bounds: Option<ObstructionReport>,
}

fn cmd_check(args: &CheckArgs, manifest: &mut RunManifest) -> Result<Outcome, Failure> {
    let name = args.surface.display().to_string();
    let surface = load(&args.surface, manifest)?;
    let extra = match &args.subsets_file {
        Some(p) => SubsetsFile::load(p, &surface.complex)?,
        None => Vec::new(),
    };
    let selection = SubsetSelection::Auto {
        cap: args.subset_cap,
        extra,
    };
    let zero = check_zero_curvature_necessary(&surface.complex, &surface.inversive, &selection)?;
    let metric_bounds = match (&surface.radii, surface.background) {
        (Some(_), Background::Hyperbolic) => {
            let metric: PackingMetric = surface.metric(&name)?;
            if omega_membership(&surface.complex, &metric)?.inside {
                Some(check_strict_bound(&surface.complex, &metric, &selection)?)
            } else {
                Some(check_closure(&surface.complex, &metric, &selection, 1e-9)?)
            }
        }
        _ => None,
    };
    let report = CheckReport {
        zero_curvature: zero,
        metric_bounds,
    };
    let text = to_json(&report);
    print!("{text}");
    if let Some(path) = &args.report {
        manifest.outputs.report = Some(write_file(path, &text)?);
    }
    Ok(Outcome::ok("ok"))
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(value) = std::env::var("CPFLOW_THREADS") {
        let threads: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Failure::Usage(format!("CPFLOW_THREADS must be a positive integer, got {value:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn manifest_path_from_raw_args() -> PathBuf {
    let args: Vec<String> = std::env::args().collect();
    for (i, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--manifest=") {
            return PathBuf::from(p);
        }
        if a == "--manifest" {
            if let Some(p) = args.get(i + 1) {
                return PathBuf::from(p);
            }
        }
    }
    PathBuf::from(DEFAULT_MANIFEST)
}

fn write_manifest(path: &Path, manifest: &RunManifest) {
    if let Err(e) = std::fs::write(path, manifest.to_json()) {
        eprintln!("warning: cannot write manifest {}: {e}", path.display());
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let mut manifest = RunManifest::new("unknown");
            manifest.status = "usage_error".into();
            manifest.message = Some(e.kind().to_string());
            write_manifest(&manifest_path_from_raw_args(), &manifest);
            return ExitCode::from(2);
        }
    };

    let (name, config) = match &cli.command {
        Command::Curvature(a) => ("curvature", serde_json::to_value(a)),
        Command::Flow(a) => ("flow", serde_json::to_value(a)),
        Command::Solve(a) => ("solve", serde_json::to_value(a)),
        Command::Check(a) => ("check", serde_json::to_value(a)),
        Command::Gb(a) => ("gb", serde_json::to_value(a)),
    };
    let mut manifest = RunManifest::new(name);
    manifest.config = config.unwrap_or(serde_json::Value::Null);

    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Curvature(a) => cmd_curvature(a, cli.json, &mut manifest),
        Command::Flow(a) => cmd_flow(a, cli.json, &mut manifest),
        Command::Solve(a) => cmd_solve(a, cli.json, &mut manifest),
        Command::Check(a) => cmd_check(a, &mut manifest),
        Command::Gb(a) => cmd_gb(a, cli.json, &mut manifest),
    });
    let code = match result {
        Ok(outcome) => {
            manifest.status = outcome.status;
            outcome.exit_code
        }
        Err(failure) => {
            let message = failure.message();
            eprintln!("error: {message}");
            manifest.status = if failure.exit_code() == 2 { "input_error" } else { "domain_error" }.into();
            manifest.message = Some(message);
            failure.exit_code()
        }
    };
    manifest.exit_code = code;
    write_manifest(&cli.manifest, &manifest);
    ExitCode::from(code as u8)
}

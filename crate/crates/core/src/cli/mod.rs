//! Command-line front end: `run`, `check`, `verify` and `probe`.

pub mod check;
pub mod output;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use thiserror::Error;

use crate::driver::checkpoint::Checkpoint;
use crate::driver::{parse_config, run, DriverError, MaximalTimeReport, Observer, Outcome, RunConfig, StepRecord};
use crate::elliptic::{estimate_inverse_norm, EllipticError, NormPair};
use crate::fem::quadrature::QuadratureRule;
use crate::loads::LoadSet;
use crate::materials::{material_from_name, LameLaplace, MaterialError, MaterialModel, PolyPiezo};
use crate::mesh::{build_structured_mesh, BcKind, BoundaryPartition, Mesh, Rect};
use crate::parabolic::State;
use crate::verify::{
    dense_oracle_compare, gradient_check_h, lipschitz_probe_s, mms_elliptic, mms_parabolic, ConvergenceReport,
    EllipticExact, ParabolicExact, ParabolicMms, ProbeSetup, VerifyError,
};
use output::{write_vtk, OutputError, TimeseriesWriter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_BLOWUP: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
}

fn material_code(e: &MaterialError) -> i32 {
    match e {
        MaterialError::UnknownModel(_) | MaterialError::UnknownParameter { .. } | MaterialError::InvalidParameter(_) => {
            EXIT_CONFIG
        }
        MaterialError::Sample { source, .. } => material_code(source),
        MaterialError::NonFinite { .. } | MaterialError::Asymmetric { .. } => EXIT_ASSUMPTION,
    }
}

fn driver_code(e: &DriverError) -> i32 {
    match e {
        DriverError::Config(_) | DriverError::Mesh(_) | DriverError::Checkpoint(_) | DriverError::Io { .. } => EXIT_CONFIG,
        DriverError::Assumption(_) => EXIT_ASSUMPTION,
        DriverError::Material(m) => material_code(m),
        DriverError::Elliptic(_) | DriverError::Solver(_) => EXIT_SOLVER,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Driver(e) => driver_code(e),
            CliError::Material(e) => material_code(e),
            CliError::Verify(VerifyError::Driver(e)) => driver_code(e),
            CliError::Verify(VerifyError::Material(e)) => material_code(e),
            CliError::Verify(VerifyError::Levels(_) | VerifyError::Precondition(_) | VerifyError::Mesh(_)) => EXIT_CONFIG,
            CliError::Verify(_) | CliError::Elliptic(_) => EXIT_SOLVER,
            CliError::Output(_) | CliError::Write { .. } | CliError::Argument(_) => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ferrosim", version, about = "2D finite-element ferroelectric phase-field simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a configuration and write the time series, snapshots and report.
    Run(RunArgs),
    /// Check the material assumptions of a configuration.
    Check(CheckArgs),
    /// Run the manufactured-solution and oracle checks.
    Verify(VerifyArgs),
    /// Sweep the inverse-operator norm over scaled initial polarizations.
    Probe(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(short, long, default_value = "output")]
    pub output: PathBuf,
    /// Override a configuration key, e.g. `--set material.kappa=2.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub restart: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Half-width of the sampled polarization box.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Fail unless the elliptic system decouples at zero polarization.
    #[arg(long)]
    pub expect_decoupled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Quick,
    Full,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Configuration whose material model is checked; all built-in models
    /// when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(short, long, default_value = "output")]
    pub output: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, value_enum, default_value_t = Mode::Quick)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Norms {
    Energy,
    Euclidean,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Factors applied to the initial polarization.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2")]
    pub scales: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Norms::Energy)]
    pub norms: Norms,
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

/// Writes CSV rows and VTK snapshots as the driver records steps.
struct FileObserver {
    csv: TimeseriesWriter,
    mesh: Mesh,
    snapshots: Option<PathBuf>,
    skip_first: bool,
}

impl FileObserver {
    fn emit(&mut self, record: &StepRecord, state: &State, step: usize) -> Result<(), OutputError> {
        self.csv.write(record)?;
        if let Some(dir) = &self.snapshots {
            write_vtk(&dir.join(format!("step_{step:06}.vtk")), &self.mesh, state)?;
        }
        Ok(())
    }
}

impl Observer for FileObserver {
    fn on_record(&mut self, record: &StepRecord, state: &State, step: usize) -> Result<(), DriverError> {
        if std::mem::take(&mut self.skip_first) {
            return Ok(());
        }
        self.emit(record, state, step).map_err(|e| match e {
            OutputError::Io { path, source } => DriverError::Io { path, source },
            other => DriverError::Solver(other.to_string()),
        })
    }
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    #[serde(flatten)]
    report: &'a MaximalTimeReport,
    t_final: f64,
    config_hash: String,
}

fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    let mut cfg = parse_config(&args.common.config, &args.common.overrides)?;
    let out = &args.common.output;
    create_dir(out)?;
    if cfg.output.checkpoint.is_none() {
        cfg.output.checkpoint = Some(out.join("checkpoint.txt"));
    }
    let snapshots = if cfg.output.snapshots {
        let dir = out.join("snapshots");
        create_dir(&dir)?;
        Some(dir)
    } else {
        None
    };
    let restart = args.restart.as_deref().map(Checkpoint::read).transpose()?;
    let csv_path = out.join("timeseries.csv");
    let csv = match restart {
        Some(_) => TimeseriesWriter::append(&csv_path)?,
        None => TimeseriesWriter::create(&csv_path)?,
    };
    let mut observer = FileObserver {
        csv,
        mesh: cfg.build_mesh()?,
        snapshots,
        skip_first: restart.is_some(),
    };
    let result = run(&cfg, restart.as_ref(), &mut observer)?;
    let report = RunReport {
        report: &result.report,
        t_final: cfg.time.t_final,
        config_hash: cfg.physics_hash(),
    };
    write_file(&out.join("report.json"), &to_json(&report))?;
    let r = &result.report;
    println!(
        "{}: t_hat = {:.9e}, steps = {} (+{} rejected), |P|_inf = {:.6e}",
        r.outcome.as_str(),
        r.t_hat,
        r.accepted_steps,
        r.rejected_steps,
        r.p_inf
    );
    Ok(if r.outcome == Outcome::ReachedT { EXIT_OK } else { EXIT_BLOWUP })
}

fn cmd_check(args: &CheckArgs) -> Result<i32, CliError> {
    if !(args.radius > 0.0 && args.radius.is_finite()) {
        return Err(CliError::Argument(format!("--radius must be positive, got {}", args.radius)));
    }
    let cfg = parse_config(&args.common.config, &args.common.overrides)?;
    let problem = cfg.build()?;
    let summary = check::run_checks(&cfg.material.name, &problem, args.radius, args.samples, args.expect_decoupled)?;
    create_dir(&args.common.output)?;
    let json = to_json(&summary);
    write_file(&args.common.output.join("check.json"), &json)?;
    print!("{json}");
    Ok(if summary.passed { EXIT_OK } else { EXIT_ASSUMPTION })
}

struct VerifyLevels {
    elliptic: Vec<usize>,
    parabolic_n: usize,
    dts: Vec<f64>,
}

impl VerifyLevels {
    fn new(mode: Mode) -> Self {
        match mode {
            Mode::Quick => Self {
                elliptic: vec![4, 8, 16],
                parabolic_n: 16,
                dts: vec![1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0],
            },
            Mode::Full => Self {
                elliptic: vec![8, 16, 32, 64],
                parabolic_n: 32,
                dts: vec![1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0],
            },
        }
    }
}

const GRADIENT_TOL: f64 = 1e-6;
const DENSE_TOL: f64 = 1e-13;

fn frozen_polarization(x: [f64; 2]) -> [f64; 2] {
    use std::f64::consts::PI;
    [0.3 * (PI * x[0]).cos(), 0.2 * x[1] * x[1]]
}

fn builtin_models() -> Vec<(String, Arc<dyn MaterialModel>)> {
    let empty = Default::default();
    ["lame_laplace", "poly_piezo", "blowup_test"]
        .iter()
        .map(|name| (name.to_string(), material_from_name(name, &empty).expect("built-in model")))
        .collect()
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let models = match &args.config {
        Some(path) => {
            let cfg: RunConfig = parse_config(path, &args.overrides)?;
            vec![(cfg.material.name.clone(), material_from_name(&cfg.material.name, &cfg.material.params)?)]
        }
        None if !args.overrides.is_empty() => {
            return Err(CliError::Argument("--set needs --config".into()));
        }
        None => builtin_models(),
    };
    let out = &args.output;
    create_dir(out)?;
    let levels = VerifyLevels::new(args.mode);
    let mut text = String::new();
    let mut all_passed = true;

    let mut convergence = |name: &str, report: ConvergenceReport, text: &mut String| -> Result<(), CliError> {
        write_file(&out.join(format!("{name}.csv")), &report.to_csv())?;
        let _ = writeln!(text, "== {name}\n{report}\n");
        all_passed &= report.passed;
        Ok(())
    };
    info!("elliptic manufactured solutions");
    let constant = mms_elliptic(&levels.elliptic, Arc::new(LameLaplace::default()), &EllipticExact::sine_poly())?;
    convergence("mms_elliptic_constant", constant, &mut text)?;
    let frozen = EllipticExact::sine_poly().with_polarization(frozen_polarization);
    let frozen = mms_elliptic(&levels.elliptic, Arc::new(PolyPiezo::default()), &frozen)?;
    convergence("mms_elliptic_frozen", frozen, &mut text)?;
    info!("parabolic manufactured solution");
    let setup = ParabolicMms {
        n: levels.parabolic_n,
        ..ParabolicMms::default()
    };
    let parabolic = mms_parabolic(&setup, &levels.dts, &ParabolicExact::decaying_vortex())?;
    convergence("mms_parabolic", parabolic, &mut text)?;

    let mut oracle_csv = String::from("model,gradient_rel_error,dense_deviation,lipschitz_h_m\n");
    let mesh = build_structured_mesh(2, 2, Rect::unit()).map_err(VerifyError::from)?;
    let partition = BoundaryPartition::uniform(&mesh, BcKind::Dirichlet, BcKind::Neumann, BcKind::Neumann);
    let p: Vec<[f64; 2]> = mesh.vertices.iter().map(|x| [0.4 * x[0] - 0.1, 0.3 * x[1] * x[0]]).collect();
    let loads = LoadSet::zero()
        .with_f_sigma(|t, x| [x[0] + t, x[1]])
        .with_f_d(|_, x| x[0] * x[1])
        .with_f_p(|_, x| [1.0, x[0]])
        .with_t_sigma(|_, x| [x[1], 1.0])
        .with_t_d(|_, x| x[0])
        .with_t_p(|_, x| [x[0] * x[1], 0.5]);
    let probe = ProbeSetup::unit_square(4)?;
    for (name, model) in &models {
        info!("oracles for {name}");
        let grad = gradient_check_h(model.as_ref(), 5)?;
        let dense = dense_oracle_compare(&mesh, &partition, model.as_ref(), &p, &loads, 0.5, &QuadratureRule::order2())?;
        let lip = lipschitz_probe_s(&probe, model.clone(), 1.0, 20)?;
        let (g_ok, d_ok) = (grad <= GRADIENT_TOL, dense.max() <= DENSE_TOL);
        all_passed &= g_ok && d_ok;
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        let _ = writeln!(
            text,
            "== {name}\ngradient check: max relative error {grad:.3e} (tolerance {GRADIENT_TOL:e}): {}\n\
             dense oracle: max deviation {:.3e} (tolerance {DENSE_TOL:e}): {}\n\
             source Lipschitz estimate h_M = {:.6e} at M = 1 over {} pairs\n",
            verdict(g_ok),
            dense.max(),
            verdict(d_ok),
            lip.h_m,
            lip.pairs
        );
        let _ = writeln!(oracle_csv, "{name},{grad:e},{:e},{:e}", dense.max(), lip.h_m);
    }
    write_file(&out.join("oracles.csv"), &oracle_csv)?;
    let _ = writeln!(text, "overall: {}", if all_passed { "pass" } else { "FAIL" });
    write_file(&out.join("verify.txt"), &text)?;
    print!("{text}");
    Ok(if all_passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_probe(args: &ProbeArgs) -> Result<i32, CliError> {
    if args.scales.is_empty() || args.scales.iter().any(|s| !s.is_finite()) {
        return Err(CliError::Argument("--scales needs finite values".into()));
    }
    let cfg = parse_config(&args.common.config, &args.common.overrides)?;
    let problem = cfg.build()?;
    let norms = match args.norms {
        Norms::Energy => NormPair::Energy,
        Norms::Euclidean => NormPair::Euclidean,
    };
    create_dir(&args.common.output)?;
    let mut csv = String::from("scale,p_inf,c_p,sigma_min,iterations\n");
    for &s in &args.scales {
        let p: Vec<[f64; 2]> = problem.p0.iter().map(|v| [s * v[0], s * v[1]]).collect();
        let est = estimate_inverse_norm(&problem.mesh, &problem.partition, problem.model.as_ref(), &p, norms)?;
        let p_inf = p.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let _ = writeln!(csv, "{s:e},{p_inf:e},{:e},{:e},{}", est.c_p, est.sigma_min, est.iterations);
    }
    write_file(&args.common.output.join("probe.csv"), &csv)?;
    print!("{csv}");
    Ok(EXIT_OK)
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Probe(a) => cmd_probe(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

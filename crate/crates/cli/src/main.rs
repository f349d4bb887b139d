//! `dfrc`: experiment runner and self-checks for reliability-aware DFRC
//! beamforming.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 verification
//! failure, 3 experiment failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dfrc_core::config::ScenarioFile;
use dfrc_core::experiments::{
    beampattern_study, run_dynamic, run_rho_sweep, write_beampatterns, write_metadata, write_runs, write_stages,
    write_sweep_rows, write_traces, DynamicSpec, Format, RunMetadata, Scenario, SolverKind, SweepSpec,
};
use dfrc_core::selfcheck::{gradcheck, gradcheck_config, proxcheck, GRADIENT_TOLERANCE, GROUP_TOLERANCE, SCALAR_GRID};
use dfrc_core::DfrcError;

#[derive(Parser, Debug)]
#[command(name = "dfrc", version, about = "Reliability-aware DFRC beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entrywise-sparsity sweep over rho_s
    Sweep(ExpArgs),
    /// Antenna-selection sweep over rho_s
    Select(ExpArgs),
    /// Minimum rates raised stage by stage, warm-started
    Dynamic(ExpArgs),
    /// Masked and unmasked beampatterns for every rho_s
    Beampattern(BeamArgs),
    /// Analytic gradient against central differences
    Gradcheck(GradArgs),
    /// Prox operators against brute-force minimization
    Proxcheck(ProxArgs),
}

#[derive(Args, Debug)]
struct ExpArgs {
    /// Scenario file (JSON). Defaults to the 28 GHz reference scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated rho_s values
    #[arg(long, value_delimiter = ',')]
    rho_s: Option<Vec<f64>>,
    /// Overrides the number of runs per rho_s
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Also write one convergence trace CSV per run
    #[arg(long)]
    traces: bool,
}

#[derive(Args, Debug)]
struct BeamArgs {
    #[command(flatten)]
    common: ExpArgs,
    #[arg(long, value_enum, default_value_t = SolverArg::Pgda)]
    solver: SolverArg,
}

#[derive(Args, Debug)]
struct GradArgs {
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ProxArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SolverArg {
    Pgda,
    Gpgda,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Pgda => SolverKind::Pgda,
            SolverArg::Gpgda => SolverKind::Gpgda,
        }
    }
}

enum Failure {
    Usage(String),
    Verification(String),
    Experiment(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Verification(_) => 2,
            Failure::Experiment(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Experiment(m) => m,
        }
    }
}

// Bad inputs are usage errors, everything after loading is an experiment error.
fn usage(e: DfrcError) -> Failure {
    Failure::Usage(e.to_string())
}

fn experiment(e: DfrcError) -> Failure {
    match e {
        DfrcError::Config(_) | DfrcError::InvalidArgument(_) => Failure::Usage(e.to_string()),
        _ => Failure::Experiment(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dfrc: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Sweep(a) => sweep(&a, SolverKind::Pgda, "sweep"),
        Command::Select(a) => sweep(&a, SolverKind::Gpgda, "select"),
        Command::Dynamic(a) => dynamic(&a),
        Command::Beampattern(a) => beampatterns(&a),
        Command::Gradcheck(a) => grad(&a),
        Command::Proxcheck(a) => prox(&a),
    }
}

fn load(args: &ExpArgs) -> Result<ScenarioFile, Failure> {
    let mut file = match &args.config {
        Some(path) => {
            if !path.is_file() {
                return Err(Failure::Usage(format!("config file {} not found", path.display())));
            }
            ScenarioFile::load(path).map_err(usage)?
        }
        None => ScenarioFile::default(),
    };
    if let Some(seed) = args.seed {
        file.seed = seed;
    }
    if let Some(rho) = &args.rho_s {
        file.rho_s = rho.clone();
    }
    if let Some(runs) = args.runs {
        file.n_runs = runs;
    }
    file.validate().map_err(usage)?;
    Ok(file)
}

fn out_file(dir: &Path, stem: &str, format: Format) -> PathBuf {
    dir.join(format!("{stem}.{}", format.extension()))
}

fn sweep(args: &ExpArgs, kind: SolverKind, name: &str) -> Result<(), Failure> {
    let file = load(args)?;
    let format: Format = args.format.into();
    let mut spec = SweepSpec::from_file(&file, kind).map_err(usage)?;
    spec.keep_traces = args.traces;
    let out = run_rho_sweep(&spec, kind).map_err(experiment)?;
    let n_users = spec.scenario.config.n_users;

    write_sweep_rows(&out.rows, &out_file(&args.out, "summary", format), format).map_err(experiment)?;
    write_runs(&out.runs, n_users, &out_file(&args.out, "runs", format), format).map_err(experiment)?;
    if args.traces {
        write_traces(&out.traces, n_users, &args.out.join("traces")).map_err(experiment)?;
    }
    write_metadata(&RunMetadata::for_sweep(name, kind, &spec, &out), &args.out.join("metadata.json"))
        .map_err(experiment)?;

    println!("rho_s      SE       MI       density  reliability  power    failed");
    for r in &out.rows {
        println!(
            "{:<10} {:<8.4} {:<8.4} {:<8.2} {:<12.2} {:<8.4} {}",
            r.rho_s, r.mean_se, r.mean_radar_mi, r.mean_density_pct, r.mean_reliability_pct, r.mean_power, r.n_failed
        );
    }
    println!("results in {}", args.out.display());
    Ok(())
}

fn dynamic(args: &ExpArgs) -> Result<(), Failure> {
    let mut file = load(args)?;
    file.system.sparsity_weight = 0.0;
    let format: Format = args.format.into();
    let spec = DynamicSpec::from_file(&file).map_err(usage)?;
    let stages = run_dynamic(&spec).map_err(experiment)?;
    let m = spec.scenario.config.n_users;

    write_stages(&stages, m, &out_file(&args.out, "dynamic", format), format).map_err(experiment)?;
    let trace_dir = args.out.join("traces");
    std::fs::create_dir_all(&trace_dir).map_err(|e| Failure::Experiment(format!("{}: {e}", trace_dir.display())))?;
    for s in &stages {
        let path = trace_dir.join(format!("dynamic_stage{}.csv", s.stage));
        s.result.trace.save_csv(&path, m).map_err(experiment)?;
    }
    let mut meta = RunMetadata::new("dynamic", SolverKind::Pgda, &spec.scenario, &spec.options);
    meta.seed = spec.seed;
    write_metadata(&meta, &args.out.join("metadata.json")).map_err(experiment)?;

    for s in &stages {
        let met = s
            .result
            .metrics
            .se_per_user
            .iter()
            .zip(&s.rate_min)
            .all(|(se, lo)| *se >= lo - 1e-3);
        println!(
            "stage {}: mean SE {:.4}  requirements met: {}  iterations {}",
            s.stage,
            s.result.metrics.mean_se(),
            met,
            s.result.iterations
        );
    }
    println!("results in {}", args.out.display());
    Ok(())
}

fn beampatterns(args: &BeamArgs) -> Result<(), Failure> {
    let common = &args.common;
    let file = load(common)?;
    let kind: SolverKind = args.solver.into();
    let format: Format = common.format.into();
    let scenario = Scenario::from_file(&file, kind).map_err(usage)?;
    let curves = beampattern_study(&scenario, &file.rho_s, file.seed, &file.solver, kind, file.beampattern_points)
        .map_err(experiment)?;
    let paths = write_beampatterns(&curves, &common.out, format).map_err(experiment)?;
    let mut meta = RunMetadata::new("beampattern", kind, &scenario, &file.solver);
    meta.rho_s_values = file.rho_s.clone();
    write_metadata(&meta, &common.out.join("metadata.json")).map_err(experiment)?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn grad(args: &GradArgs) -> Result<(), Failure> {
    if args.instances == 0 {
        return Err(Failure::Usage("--instances must be positive".into()));
    }
    let rep = gradcheck(&gradcheck_config(), args.instances, args.seed).map_err(experiment)?;
    println!(
        "gradcheck: {} instances, max relative error {:.3e} (tolerance {GRADIENT_TOLERANCE:e})",
        rep.instances, rep.max_relative_error
    );
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::Verification("gradient check failed".into()))
    }
}

fn prox(args: &ProxArgs) -> Result<(), Failure> {
    if args.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let rep = proxcheck(args.samples, args.seed).map_err(experiment)?;
    println!(
        "proxcheck: {} samples, soft threshold max error {:.3e} (tolerance {SCALAR_GRID:e}), row shrinkage max error {:.3e} (tolerance {GROUP_TOLERANCE:e})",
        rep.samples, rep.scalar_max_error, rep.group_max_error
    );
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::Verification("prox check failed".into()))
    }
}

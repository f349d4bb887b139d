//! Experiments: seeded Monte-Carlo sweeps over the sparsity weight, the
//! dynamic rate-requirement run, beampattern studies, and export.
//!
//! Every run derives its channel, radar scene and initial beamformer from one
//! per-run seed through independent RNG streams, so a run is reproducible from
//! `(scenario, rho_s, seed)` alone. Sweeps execute runs in parallel and reduce
//! them in seed order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RedrawPolicy, ScenarioFile};
use crate::metrics::{beampattern, mean, tx_power, MetricsRecord};
use crate::power::hybrid_power_surrogate;
use crate::rng::{stream_rng, Stream};
use crate::scenario::{
    sample_channel, BeamformingMatrix, CommChannel, MaskKind, RadarScene, ReliabilityMask, SystemConfig,
};
use crate::solver::{
    gpgda_solve, pgda_solve, ConvergenceTrace, DualState, GpgdaPowerParams, Problem, SolveResult, SolverOptions,
    WarmStart,
};
use crate::{Complex64, DfrcError, Result};

/// Runs beyond this failure fraction abort a sweep.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Entrywise sparsity under a transmit power budget.
    Pgda,
    /// Antenna selection under the hybrid power budget.
    Gpgda,
}

impl SolverKind {
    pub fn mask_kind(self) -> MaskKind {
        match self {
            SolverKind::Pgda => MaskKind::PerEntry,
            SolverKind::Gpgda => MaskKind::PerAntenna,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Fixed parts of an experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SystemConfig,
    pub mask: ReliabilityMask,
    pub redraw: RedrawPolicy,
    /// Source of the channel and scene when they are not redrawn per run.
    pub scenario_seed: u64,
    pub selection: GpgdaPowerParams,
}

impl Scenario {
    pub fn new(config: SystemConfig, mask: ReliabilityMask) -> Self {
        Scenario {
            config,
            mask,
            redraw: RedrawPolicy::default(),
            scenario_seed: 0,
            selection: GpgdaPowerParams::default(),
        }
    }

    pub fn from_file(file: &ScenarioFile, kind: SolverKind) -> Result<Self> {
        file.validate()?;
        Ok(Scenario {
            config: file.system_config()?,
            mask: file.mask(kind.mask_kind())?,
            redraw: file.redraw,
            scenario_seed: file.seed,
            selection: file.selection.clone(),
        })
    }

    pub fn validate(&self, kind: SolverKind) -> Result<()> {
        self.config.validate()?;
        self.selection.validate()?;
        self.mask.check_dims(self.config.n_tx, self.config.n_users)?;
        if self.mask.kind() != kind.mask_kind() {
            return Err(DfrcError::Config(format!(
                "{kind:?} needs a {:?} mask, got {:?}",
                kind.mask_kind(),
                self.mask.kind()
            )));
        }
        Ok(())
    }

    /// Radar scene and channel of run `seed`.
    pub fn instance(&self, seed: u64) -> (RadarScene, CommChannel) {
        let cfg = &self.config;
        let scene_seed = if self.redraw.scene { seed } else { self.scenario_seed };
        let channel_seed = if self.redraw.channel { seed } else { self.scenario_seed };
        let scene = RadarScene::random(&mut stream_rng(scene_seed, Stream::Scene), cfg.n_targets);
        let channel = sample_channel(&mut stream_rng(channel_seed, Stream::Channel), cfg.n_tx, cfg.n_users);
        (scene, channel)
    }

    /// Random start of run `seed` at half the relevant budget: transmit power
    /// `P_t / 2` for the entrywise solver, hybrid power `P_tot / 2` for
    /// antenna selection.
    pub fn initial_beamformer(&self, kind: SolverKind, seed: u64) -> Result<BeamformingMatrix> {
        let cfg = &self.config;
        let mut rng = stream_rng(seed, Stream::InitialBeamformer);
        match kind {
            SolverKind::Pgda => Ok(BeamformingMatrix::random_with_power(
                &mut rng,
                cfg.n_tx,
                cfg.n_users,
                cfg.power_budget / 2.0,
            )),
            SolverKind::Gpgda => {
                let p = &self.selection;
                let w = BeamformingMatrix::random_with_power(&mut rng, cfg.n_tx, cfg.n_users, 1.0);
                // hybrid(c W) = a c^2 + b c
                let a = tx_power(&w) / p.eta_pa;
                let b = hybrid_power_surrogate(&w, p.eta_pa, p.p_antenna)? - a;
                let target = p.p_total / 2.0;
                let c = (-b + (b * b + 4.0 * a * target).sqrt()) / (2.0 * a);
                Ok((w.matrix() * Complex64::from(c)).into())
            }
        }
    }

    pub fn initial_duals(&self, kind: SolverKind) -> DualState {
        match kind {
            SolverKind::Pgda => DualState::pgda_initial(self.config.n_users),
            SolverKind::Gpgda => DualState::gpgda_initial(self.config.n_users),
        }
    }

    fn problem(&self, rho_s: f64, seed: u64) -> Result<Problem> {
        let mut cfg = self.config.clone();
        cfg.sparsity_weight = rho_s;
        let (scene, channel) = self.instance(seed);
        Problem::new(cfg, &scene, channel)
    }

    fn solve(&self, kind: SolverKind, problem: &Problem, start: WarmStart, options: &SolverOptions) -> Result<SolveResult> {
        match kind {
            SolverKind::Pgda => pgda_solve(problem, &self.mask, start, options),
            SolverKind::Gpgda => gpgda_solve(problem, &self.mask, &self.selection, start, options),
        }
    }
}

/// One seeded solve from a fresh start.
pub fn run_single(
    scenario: &Scenario,
    rho_s: f64,
    seed: u64,
    options: &SolverOptions,
    kind: SolverKind,
) -> Result<(SolveResult, MetricsRecord)> {
    scenario.validate(kind)?;
    let problem = scenario.problem(rho_s, seed)?;
    let start = WarmStart {
        w: scenario.initial_beamformer(kind, seed)?,
        duals: scenario.initial_duals(kind),
    };
    let result = scenario.solve(kind, &problem, start, options)?;
    let metrics = result.metrics.clone();
    Ok((result, metrics))
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Nonempty, ascending.
    pub rho_s_values: Vec<f64>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub scenario: Scenario,
    pub options: SolverOptions,
    /// Keep per-run convergence traces in the output.
    pub keep_traces: bool,
}

impl SweepSpec {
    pub fn from_file(file: &ScenarioFile, kind: SolverKind) -> Result<Self> {
        Ok(SweepSpec {
            rho_s_values: file.rho_s.clone(),
            n_runs: file.n_runs,
            base_seed: file.seed,
            scenario: Scenario::from_file(file, kind)?,
            options: file.solver.clone(),
            keep_traces: false,
        })
    }

    pub fn validate(&self, kind: SolverKind) -> Result<()> {
        if self.rho_s_values.is_empty() {
            return Err(DfrcError::Config("rho_s list is empty".into()));
        }
        if self.rho_s_values.iter().any(|r| !(*r >= 0.0)) || self.rho_s_values.windows(2).any(|p| p[0] > p[1]) {
            return Err(DfrcError::Config("rho_s values must be nonnegative and ascending".into()));
        }
        if self.n_runs == 0 {
            return Err(DfrcError::Config("n_runs must be positive".into()));
        }
        if self.base_seed.checked_add(self.n_runs as u64 - 1).is_none() {
            return Err(DfrcError::Config("seed range overflows".into()));
        }
        self.options.validate()?;
        self.scenario.validate(kind)
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_runs as u64).map(move |k| self.base_seed + k)
    }
}

/// Metrics of one successful run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub metrics: MetricsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub rho_s: f64,
    pub seed: u64,
    pub error: String,
}

/// Aggregate over the successful runs at one `rho_s`. Standard deviations
/// are population (divide by n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho_s: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_se: f64,
    pub std_se: f64,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub mean_radar_mi: f64,
    pub std_radar_mi: f64,
    pub mean_density_pct: f64,
    pub mean_power: f64,
    pub mean_reliability_pct: f64,
}

impl SweepRow {
    /// Reduces runs in the given order.
    pub fn aggregate(rho_s: f64, runs: &[RunRecord], n_failed: usize) -> Self {
        let col = |f: &dyn Fn(&MetricsRecord) -> f64| -> Vec<f64> { runs.iter().map(|r| f(&r.metrics)).collect() };
        let se = col(&|m| m.mean_se());
        let rate = col(&|m| m.mean_rate());
        let mi = col(&|m| m.radar_mi);
        SweepRow {
            rho_s,
            n_ok: runs.len(),
            n_failed,
            mean_se: mean(&se),
            std_se: population_std(&se),
            mean_rate: mean(&rate),
            std_rate: population_std(&rate),
            mean_radar_mi: mean(&mi),
            std_radar_mi: population_std(&mi),
            mean_density_pct: mean(&col(&|m| m.density_pct)),
            mean_power: mean(&col(&|m| m.tx_power)),
            mean_reliability_pct: mean(&col(&|m| m.reliability_pct)),
        }
    }

    pub fn csv_header() -> Vec<&'static str> {
        vec![
            "rho_s",
            "n_ok",
            "n_failed",
            "mean_se",
            "std_se",
            "mean_rate",
            "std_rate",
            "mean_radar_mi",
            "std_radar_mi",
            "mean_density_pct",
            "mean_power",
            "mean_reliability_pct",
        ]
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![self.rho_s.to_string(), self.n_ok.to_string(), self.n_failed.to_string()];
        row.extend(
            [
                self.mean_se,
                self.std_se,
                self.mean_rate,
                self.std_rate,
                self.mean_radar_mi,
                self.std_radar_mi,
                self.mean_density_pct,
                self.mean_power,
                self.mean_reliability_pct,
            ]
            .map(|v| v.to_string()),
        );
        row
    }
}

pub fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    /// One per `rho_s`, ascending.
    pub rows: Vec<SweepRow>,
    /// Successful runs, grouped by `rho_s` then ordered by seed.
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    /// `(rho_s, seed, trace)`, present only with `keep_traces`.
    pub traces: Vec<(f64, u64, ConvergenceTrace)>,
}

/// Runs `n_runs` seeds at every `rho_s` and aggregates them.
///
/// Failed runs are excluded from the means and listed in `failures`; more
/// than [`MAX_FAILURE_FRACTION`] failures at any `rho_s` is an error.
pub fn run_rho_sweep(spec: &SweepSpec, kind: SolverKind) -> Result<SweepOutput> {
    spec.validate(kind)?;
    let mut out = SweepOutput::default();
    for &rho_s in &spec.rho_s_values {
        let seeds: Vec<u64> = spec.seeds().collect();
        let results: Vec<(u64, Result<(SolveResult, MetricsRecord)>)> = seeds
            .par_iter()
            .map(|&seed| (seed, run_single(&spec.scenario, rho_s, seed, &spec.options, kind)))
            .collect();

        let mut ok = Vec::new();
        let mut n_failed = 0;
        for (seed, res) in results {
            match res {
                Ok((result, metrics)) => {
                    ok.push(RunRecord {
                        seed,
                        converged: result.converged,
                        iterations: result.iterations,
                        metrics,
                    });
                    if spec.keep_traces {
                        out.traces.push((rho_s, seed, result.trace));
                    }
                }
                Err(e) => {
                    n_failed += 1;
                    out.failures.push(RunFailure {
                        rho_s,
                        seed,
                        error: e.to_string(),
                    });
                }
            }
        }
        if n_failed as f64 > MAX_FAILURE_FRACTION * spec.n_runs as f64 {
            return Err(DfrcError::Experiment(format!(
                "{n_failed} of {} runs failed at rho_s = {rho_s}",
                spec.n_runs
            )));
        }
        out.rows.push(SweepRow::aggregate(rho_s, &ok, n_failed));
        out.runs.extend(ok);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DynamicSpec {
    pub n_stages: usize,
    /// Relative growth of every minimum rate per stage.
    pub increment: f64,
    pub scenario: Scenario,
    pub options: SolverOptions,
    pub seed: u64,
}

impl DynamicSpec {
    pub fn from_file(file: &ScenarioFile) -> Result<Self> {
        Ok(DynamicSpec {
            n_stages: file.dynamic.n_stages,
            increment: file.dynamic.increment,
            scenario: Scenario::from_file(file, SolverKind::Pgda)?,
            options: file.solver.clone(),
            seed: file.seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StageResult {
    pub stage: usize,
    /// Requirement of this stage, bits/s/Hz.
    pub rate_min: Vec<f64>,
    pub result: SolveResult,
}

/// Entrywise solves at `rho_s = 0` with all minimum rates scaled by
/// `(1 + increment)^s` at stage `s`. Each stage warm-starts from the previous
/// beamformer and multipliers and runs at most 1000 iterations.
pub fn run_dynamic(spec: &DynamicSpec) -> Result<Vec<StageResult>> {
    if spec.n_stages == 0 {
        return Err(DfrcError::Config("n_stages must be positive".into()));
    }
    if !(spec.increment >= 0.0) {
        return Err(DfrcError::Config("increment must be nonnegative".into()));
    }
    if spec.scenario.config.sparsity_weight != 0.0 {
        return Err(DfrcError::Config("the dynamic run has no sparsity term; set sparsity_weight to 0".into()));
    }
    let kind = SolverKind::Pgda;
    spec.scenario.validate(kind)?;
    let mut options = spec.options.clone();
    options.max_iter = options.max_iter.min(1000);

    let (scene, channel) = spec.scenario.instance(spec.seed);
    let mut start = WarmStart {
        w: spec.scenario.initial_beamformer(kind, spec.seed)?,
        duals: spec.scenario.initial_duals(kind),
    };
    let mut stages = Vec::with_capacity(spec.n_stages);
    for stage in 0..spec.n_stages {
        let mut cfg = spec.scenario.config.clone();
        let factor = (1.0 + spec.increment).powi(stage as i32);
        for r in cfg.rate_min.iter_mut() {
            *r *= factor;
        }
        let problem = Problem::new(cfg, &scene, channel.clone())?;
        let result = spec.scenario.solve(kind, &problem, start, &options)?;
        start = WarmStart {
            w: result.w_star.clone(),
            duals: result.duals.clone(),
        };
        stages.push(StageResult {
            stage,
            rate_min: problem.config.rate_min.clone(),
            result,
        });
    }
    Ok(stages)
}

/// One curve of a beampattern study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeampatternCurve {
    pub rho_s: f64,
    /// Weights seen through the reliability mask.
    pub masked: bool,
    pub theta_deg: Vec<f64>,
    pub power: Vec<f64>,
}

/// `n_points` angles evenly spaced from -90 to 90 degrees.
pub fn angle_grid_deg(n_points: usize) -> Vec<f64> {
    if n_points == 1 {
        return vec![0.0];
    }
    (0..n_points)
        .map(|k| -90.0 + 180.0 * k as f64 / (n_points - 1) as f64)
        .collect()
}

/// Solves run `seed` at every `rho_s` and returns the unmasked and masked
/// beampattern of each solution, in that order.
pub fn beampattern_study(
    scenario: &Scenario,
    rho_s_values: &[f64],
    seed: u64,
    options: &SolverOptions,
    kind: SolverKind,
    n_points: usize,
) -> Result<Vec<BeampatternCurve>> {
    if n_points < 2 {
        return Err(DfrcError::invalid("beampattern grid needs at least 2 points"));
    }
    let theta_deg = angle_grid_deg(n_points);
    let grid: Vec<f64> = theta_deg.iter().map(|d| d.to_radians()).collect();
    let cfg = &scenario.config;
    let solved: Vec<Result<SolveResult>> = rho_s_values
        .par_iter()
        .map(|&rho| run_single(scenario, rho, seed, options, kind).map(|(r, _)| r))
        .collect();
    let mut curves = Vec::with_capacity(2 * rho_s_values.len());
    for (&rho_s, res) in rho_s_values.iter().zip(solved) {
        let w = res?.w_star;
        for masked in [false, true] {
            let mask = masked.then_some(&scenario.mask);
            curves.push(BeampatternCurve {
                rho_s,
                masked,
                theta_deg: theta_deg.clone(),
                power: beampattern(&w, &grid, cfg.spacing, cfg.wavelength, mask)?,
            });
        }
    }
    Ok(curves)
}

/// Mean absolute difference of two curves sampled on the same grid.
pub fn mean_abs_deviation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(DfrcError::invalid("curves must be nonempty and equally sampled"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Provenance written next to every result set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub experiment: String,
    pub solver: SolverKind,
    pub seed: u64,
    pub n_runs: usize,
    pub rho_s_values: Vec<f64>,
    /// Quantities redrawn from each run seed.
    pub redraw: RedrawPolicy,
    pub mask_kind: MaskKind,
    pub mask_mean: f64,
    pub config: SystemConfig,
    pub options: SolverOptions,
    pub selection: GpgdaPowerParams,
    pub failure_count: usize,
    pub failures: Vec<RunFailure>,
}

impl RunMetadata {
    pub fn new(experiment: &str, kind: SolverKind, scenario: &Scenario, options: &SolverOptions) -> Self {
        RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            solver: kind,
            seed: scenario.scenario_seed,
            n_runs: 1,
            rho_s_values: Vec::new(),
            redraw: scenario.redraw,
            mask_kind: scenario.mask.kind(),
            mask_mean: scenario.mask.mean(),
            config: scenario.config.clone(),
            options: options.clone(),
            selection: scenario.selection.clone(),
            failure_count: 0,
            failures: Vec::new(),
        }
    }

    pub fn for_sweep(experiment: &str, kind: SolverKind, spec: &SweepSpec, out: &SweepOutput) -> Self {
        RunMetadata {
            seed: spec.base_seed,
            n_runs: spec.n_runs,
            rho_s_values: spec.rho_s_values.clone(),
            failure_count: out.failures.len(),
            failures: out.failures.clone(),
            ..Self::new(experiment, kind, &spec.scenario, &spec.options)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DfrcError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| DfrcError::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| DfrcError::io(path, e.into()))?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| DfrcError::io(path, e))
}

fn write_csv(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| DfrcError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut wr = csv::Writer::from_writer(create(path)?);
    wr.write_record(&header).map_err(csv_err)?;
    for row in rows {
        wr.write_record(&row).map_err(csv_err)?;
    }
    wr.flush().map_err(|e| DfrcError::io(path, e))
}

pub fn write_sweep_rows(rows: &[SweepRow], path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(rows, path),
        Format::Csv => write_csv(
            path,
            SweepRow::csv_header().into_iter().map(String::from).collect(),
            rows.iter().map(SweepRow::csv_row),
        ),
    }
}

/// Per-run records: `seed, converged, iterations` then the metrics columns.
pub fn write_runs(runs: &[RunRecord], n_users: usize, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(runs, path),
        Format::Csv => {
            let mut header: Vec<String> = ["seed", "converged", "iterations"].map(String::from).to_vec();
            header.extend(MetricsRecord::csv_header(n_users));
            write_csv(
                path,
                header,
                runs.iter().map(|r| {
                    let mut row = vec![r.seed.to_string(), r.converged.to_string(), r.iterations.to_string()];
                    row.extend(r.metrics.csv_row());
                    row
                }),
            )
        }
    }
}

/// Reads a CSV written by [`write_runs`].
pub fn read_runs_csv(path: &Path, n_users: usize) -> Result<Vec<RunRecord>> {
    let csv_err = |source| DfrcError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |what: &str| DfrcError::invalid(format!("{}: bad {what}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut runs = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let fields: Vec<String> = rec.iter().map(String::from).collect();
        if fields.len() < 3 {
            return Err(bad("row"));
        }
        runs.push(RunRecord {
            seed: fields[0].parse().map_err(|_| bad("seed"))?,
            converged: fields[1].parse().map_err(|_| bad("converged flag"))?,
            iterations: fields[2].parse().map_err(|_| bad("iteration count"))?,
            metrics: MetricsRecord::from_csv_row(&fields[3..], n_users)?,
        });
    }
    Ok(runs)
}

/// One row per stage: requirement, achieved rates, radar MI, power and
/// convergence.
pub fn write_stages(stages: &[StageResult], n_users: usize, path: &Path, format: Format) -> Result<()> {
    #[derive(Serialize)]
    struct StageRow<'a> {
        stage: usize,
        rate_min: &'a [f64],
        se_per_user: &'a [f64],
        rate_per_user: &'a [f64],
        radar_mi: f64,
        tx_power: f64,
        converged: bool,
        iterations: usize,
    }
    let rows: Vec<StageRow> = stages
        .iter()
        .map(|s| StageRow {
            stage: s.stage,
            rate_min: &s.rate_min,
            se_per_user: &s.result.metrics.se_per_user,
            rate_per_user: &s.result.metrics.rate_per_user,
            radar_mi: s.result.metrics.radar_mi,
            tx_power: s.result.metrics.tx_power,
            converged: s.result.converged,
            iterations: s.result.iterations,
        })
        .collect();
    match format {
        Format::Json => write_json(&rows, path),
        Format::Csv => {
            let mut header = vec!["stage".to_string()];
            header.extend((1..=n_users).map(|j| format!("rate_min_{j}")));
            header.extend((1..=n_users).map(|j| format!("se_{j}")));
            header.extend((1..=n_users).map(|j| format!("rate_{j}")));
            header.extend(["radar_mi", "power", "converged", "iterations"].map(String::from));
            write_csv(
                path,
                header,
                rows.iter().map(|r| {
                    let mut rec = vec![r.stage.to_string()];
                    rec.extend(r.rate_min.iter().chain(r.se_per_user).chain(r.rate_per_user).map(f64::to_string));
                    rec.extend([r.radar_mi, r.tx_power].map(|v| v.to_string()));
                    rec.extend([r.converged.to_string(), r.iterations.to_string()]);
                    rec
                }),
            )
        }
    }
}

pub fn write_metadata(meta: &RunMetadata, path: &Path) -> Result<()> {
    write_json(meta, path)
}

pub fn trace_file_name(rho_s: f64, seed: u64) -> String {
    format!("trace_rho{rho_s}_seed{seed}.csv")
}

pub fn write_traces(traces: &[(f64, u64, ConvergenceTrace)], n_users: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| DfrcError::io(dir, e))?;
    traces
        .iter()
        .map(|(rho, seed, trace)| {
            let path = dir.join(trace_file_name(*rho, *seed));
            trace.save_csv(&path, n_users)?;
            Ok(path)
        })
        .collect()
}

pub fn beampattern_file_name(curve: &BeampatternCurve, format: Format) -> String {
    let tag = if curve.masked { "masked" } else { "unmasked" };
    format!("beampattern_rho{}_{tag}.{}", curve.rho_s, format.extension())
}

/// Writes one file per curve into `dir` and returns the paths.
pub fn write_beampatterns(curves: &[BeampatternCurve], dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(curves.len());
    for c in curves {
        let path = dir.join(beampattern_file_name(c, format));
        match format {
            Format::Json => write_json(c, &path)?,
            Format::Csv => write_csv(
                &path,
                vec!["theta_deg".into(), "power".into()],
                c.theta_deg
                    .iter()
                    .zip(&c.power)
                    .map(|(t, p)| vec![t.to_string(), p.to_string()]),
            )?,
        }
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::steering_vector;
    use nalgebra::DMatrix;

    fn small_scenario() -> Scenario {
        let mut cfg = SystemConfig::mmwave_28ghz();
        cfg.n_tx = 6;
        cfg.n_rx = 6;
        cfg.frame_len = 6;
        let mask = ReliabilityMask::random_per_entry(&mut stream_rng(0, Stream::Mask), 6, 4, 0.0);
        Scenario::new(cfg, mask)
    }

    fn quick() -> SolverOptions {
        SolverOptions {
            max_iter: 60,
            ..Default::default()
        }
    }

    #[test]
    fn population_std_values() {
        assert_eq!(population_std(&[3.0]), 0.0);
        assert_eq!(population_std(&[1.0, 3.0]), 1.0);
        assert_eq!(population_std(&[]), 0.0);
    }

    #[test]
    fn same_seed_same_record() {
        let s = small_scenario();
        let (_, a) = run_single(&s, 0.3, 5, &quick(), SolverKind::Pgda).unwrap();
        let (_, b) = run_single(&s, 0.3, 5, &quick(), SolverKind::Pgda).unwrap();
        assert_eq!(a, b);
        let (_, c) = run_single(&s, 0.3, 6, &quick(), SolverKind::Pgda).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn redraw_policy_controls_instances() {
        let mut s = small_scenario();
        let (scene_a, ch_a) = s.instance(1);
        let (scene_b, ch_b) = s.instance(2);
        assert_ne!(ch_a.h, ch_b.h);
        assert_ne!(scene_a.angles, scene_b.angles);
        s.redraw = RedrawPolicy {
            channel: false,
            scene: true,
        };
        let (scene_a, ch_a) = s.instance(1);
        let (scene_b, ch_b) = s.instance(2);
        assert_eq!(ch_a.h, ch_b.h);
        assert_ne!(scene_a.angles, scene_b.angles);
    }

    #[test]
    fn initial_beamformers_sit_at_half_budget() {
        let s = small_scenario();
        let w = s.initial_beamformer(SolverKind::Pgda, 3).unwrap();
        assert!((tx_power(&w) - 0.5).abs() < 1e-12);
        let w = s.initial_beamformer(SolverKind::Gpgda, 3).unwrap();
        let h = hybrid_power_surrogate(&w, 0.4, 5.0).unwrap();
        assert!((h - 50.0).abs() < 1e-9);
    }

    #[test]
    fn single_run_std_is_zero() {
        let spec = SweepSpec {
            rho_s_values: vec![0.0, 0.5],
            n_runs: 1,
            base_seed: 11,
            scenario: small_scenario(),
            options: quick(),
            keep_traces: true,
        };
        let out = run_rho_sweep(&spec, SolverKind::Pgda).unwrap();
        assert_eq!(out.rows.len(), 2);
        for row in &out.rows {
            assert_eq!((row.std_se, row.std_rate, row.std_radar_mi), (0.0, 0.0, 0.0));
            assert_eq!(row.n_ok, 1);
        }
        assert_eq!(out.traces.len(), 2);
        assert_eq!(out.runs[0].seed, 11);
    }

    #[test]
    fn sweep_rejects_bad_specs() {
        let mut spec = SweepSpec {
            rho_s_values: vec![0.5, 0.1],
            n_runs: 2,
            base_seed: 0,
            scenario: small_scenario(),
            options: quick(),
            keep_traces: false,
        };
        assert!(run_rho_sweep(&spec, SolverKind::Pgda).is_err());
        spec.rho_s_values = vec![0.1];
        assert!(matches!(run_rho_sweep(&spec, SolverKind::Gpgda), Err(DfrcError::Config(_))));
        spec.rho_s_values = vec![];
        assert!(run_rho_sweep(&spec, SolverKind::Pgda).is_err());
    }

    #[test]
    fn parallel_matches_serial() {
        let spec = SweepSpec {
            rho_s_values: vec![0.2],
            n_runs: 4,
            base_seed: 20,
            scenario: small_scenario(),
            options: quick(),
            keep_traces: false,
        };
        let out = run_rho_sweep(&spec, SolverKind::Pgda).unwrap();
        let serial: Vec<RunRecord> = spec
            .seeds()
            .map(|seed| {
                let (r, m) = run_single(&spec.scenario, 0.2, seed, &spec.options, SolverKind::Pgda).unwrap();
                RunRecord {
                    seed,
                    converged: r.converged,
                    iterations: r.iterations,
                    metrics: m,
                }
            })
            .collect();
        assert_eq!(out.runs, serial);
        assert_eq!(out.rows[0], SweepRow::aggregate(0.2, &serial, 0));
    }

    #[test]
    fn dynamic_requirements_grow_geometrically() {
        let spec = DynamicSpec {
            n_stages: 3,
            increment: 0.1,
            scenario: small_scenario(),
            options: quick(),
            seed: 2,
        };
        let stages = run_dynamic(&spec).unwrap();
        let base = &spec.scenario.config.rate_min;
        for (s, st) in stages.iter().enumerate() {
            for (r, b) in st.rate_min.iter().zip(base) {
                assert!((r - b * 1.1f64.powi(s as i32)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_increment_repeats_requirement() {
        let spec = DynamicSpec {
            n_stages: 3,
            increment: 0.0,
            scenario: small_scenario(),
            options: quick(),
            seed: 4,
        };
        let stages = run_dynamic(&spec).unwrap();
        for st in &stages {
            assert_eq!(st.rate_min, spec.scenario.config.rate_min);
        }
        let mut bad = spec.clone();
        bad.scenario.config.sparsity_weight = 0.1;
        assert!(run_dynamic(&bad).is_err());
    }

    #[test]
    fn empty_rows_give_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_sweep_rows(&[], &path, Format::Csv).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("rho_s,n_ok,n_failed,mean_se"));
    }

    #[test]
    fn runs_csv_round_trip_is_exact() {
        let spec = SweepSpec {
            rho_s_values: vec![0.0, 0.7],
            n_runs: 3,
            base_seed: 1,
            scenario: small_scenario(),
            options: quick(),
            keep_traces: false,
        };
        let out = run_rho_sweep(&spec, SolverKind::Pgda).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        write_runs(&out.runs, 4, &path, Format::Csv).unwrap();
        let back = read_runs_csv(&path, 4).unwrap();
        assert_eq!(back, out.runs);
        for (k, row) in out.rows.iter().enumerate() {
            let again = SweepRow::aggregate(row.rho_s, &back[3 * k..3 * k + 3], 0);
            assert_eq!(&again, row);
        }
    }

    #[test]
    fn steered_beampattern_peaks_at_steering_angle() {
        let cfg = SystemConfig::mmwave_28ghz();
        let theta0 = 20f64.to_radians();
        let a = steering_vector(theta0, cfg.n_tx, cfg.spacing, cfg.wavelength).unwrap();
        let w: BeamformingMatrix = DMatrix::from_column_slice(cfg.n_tx, 1, a.as_slice()).into();
        let theta_deg = angle_grid_deg(181);
        let grid: Vec<f64> = theta_deg.iter().map(|d| d.to_radians()).collect();
        let curve = BeampatternCurve {
            rho_s: 0.0,
            masked: false,
            power: beampattern(&w, &grid, cfg.spacing, cfg.wavelength, None).unwrap(),
            theta_deg,
        };
        let dir = tempfile::tempdir().unwrap();
        let paths = write_beampatterns(std::slice::from_ref(&curve), dir.path(), Format::Csv).unwrap();
        let mut rd = csv::Reader::from_path(&paths[0]).unwrap();
        let rows: Vec<(f64, f64)> = rd
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[0].parse().unwrap(), r[1].parse().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), 181);
        let best = rows.iter().cloned().fold((0.0, f64::MIN), |b, r| if r.1 > b.1 { r } else { b });
        assert_eq!(best.0, 20.0);
        assert!((best.1 - 100.0).abs() < 1e-9);
    }

    #[test]
    fn angle_grid_ends() {
        let g = angle_grid_deg(181);
        assert_eq!((g[0], g[90], g[180]), (-90.0, 0.0, 90.0));
    }
}

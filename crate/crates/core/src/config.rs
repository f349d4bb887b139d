//! Scenario files.
//!
//! A scenario file is a JSON object. System parameters sit at the top level
//! with the field names of [`SystemConfig`]; every key is optional and falls
//! back to the 28 GHz reference scenario. Example:
//!
//! ```json
//! {
//!   "n_tx": 10,
//!   "rate_min_bps": [1e8, 1e8, 1e8, 1e8],
//!   "seed": 7,
//!   "rho_s": [0.0, 0.222, 0.74, 1.332],
//!   "n_runs": 20,
//!   "mask": { "random": { "kind": "per-entry", "seed": 0 } },
//!   "solver": { "max_iter": 1000 }
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::power::PowerModelParams;
use crate::rng::{stream_rng, Stream};
use crate::scenario::{MaskKind, ReliabilityMask, SystemConfig};
use crate::solver::{GpgdaPowerParams, SolverOptions};
use crate::{DfrcError, Result};

/// Where the reliability mask comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    /// Rows are antennas. One column gives a per-antenna mask.
    Inline(Vec<Vec<f64>>),
    /// CSV (no header) or, with a `.json` extension, a JSON array of rows.
    /// Relative paths resolve against the scenario file's directory.
    File(PathBuf),
    Random(RandomMask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomMask {
    pub kind: MaskKind,
    /// Defaults to the scenario seed.
    pub seed: Option<u64>,
    /// Fraction of entries snapped to 0 or 1.
    pub clamp_fraction: f64,
}

impl Default for RandomMask {
    fn default() -> Self {
        RandomMask {
            kind: MaskKind::PerEntry,
            seed: None,
            clamp_fraction: 0.0,
        }
    }
}

/// Which per-run quantities are redrawn from the run seed. Anything not
/// redrawn comes from the scenario seed and is shared by all runs. The
/// initial beamformer is always redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RedrawPolicy {
    pub channel: bool,
    pub scene: bool,
}

impl Default for RedrawPolicy {
    fn default() -> Self {
        RedrawPolicy {
            channel: true,
            scene: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicSettings {
    pub n_stages: usize,
    /// Relative growth of every minimum rate per stage.
    pub increment: f64,
}

impl Default for DynamicSettings {
    fn default() -> Self {
        DynamicSettings {
            n_stages: 3,
            increment: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioFile {
    #[serde(flatten)]
    pub system: SystemConfig,
    /// Minimum rates in bits/s; overrides `rate_min`.
    pub rate_min_bps: Option<Vec<f64>>,
    /// Maximum rates in bits/s; overrides `rate_max`.
    pub rate_max_bps: Option<Vec<f64>>,
    pub seed: u64,
    pub n_runs: usize,
    pub rho_s: Vec<f64>,
    pub mask: Option<MaskSource>,
    pub redraw: RedrawPolicy,
    pub power_model: PowerModelParams,
    pub selection: GpgdaPowerParams,
    pub solver: SolverOptions,
    pub dynamic: DynamicSettings,
    /// Number of angles from -90 to 90 degrees in beampattern exports.
    pub beampattern_points: usize,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            system: SystemConfig::mmwave_28ghz(),
            rate_min_bps: None,
            rate_max_bps: None,
            seed: 0,
            n_runs: 100,
            rho_s: vec![0.0, 0.222, 0.740, 1.332],
            mask: None,
            redraw: RedrawPolicy::default(),
            power_model: PowerModelParams::default(),
            selection: GpgdaPowerParams::default(),
            solver: SolverOptions::default(),
            dynamic: DynamicSettings::default(),
            beampattern_points: 181,
            base_dir: None,
        }
    }
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| DfrcError::io(path, e))?;
        let mut file = Self::from_json(&text)?;
        file.base_dir = path.parent().map(Path::to_path_buf);
        Ok(file)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| DfrcError::Config(e.to_string()))
    }

    /// The system configuration with bit-rate overrides applied and validated.
    pub fn system_config(&self) -> Result<SystemConfig> {
        let mut cfg = self.system.clone();
        if let Some(bps) = &self.rate_min_bps {
            cfg.rate_min = to_se(&cfg, bps, "rate_min_bps")?;
        }
        if let Some(bps) = &self.rate_max_bps {
            cfg.rate_max = to_se(&cfg, bps, "rate_max_bps")?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need the mask file.
    pub fn validate(&self) -> Result<()> {
        self.system_config()?;
        self.solver.validate()?;
        self.selection.validate()?;
        self.power_model.validate()?;
        if self.n_runs == 0 {
            return Err(DfrcError::Config("n_runs must be positive".into()));
        }
        if self.rho_s.is_empty() || self.rho_s.iter().any(|r| !(*r >= 0.0)) {
            return Err(DfrcError::Config("rho_s must be a nonempty list of nonnegative values".into()));
        }
        if self.beampattern_points < 2 {
            return Err(DfrcError::Config("beampattern_points must be at least 2".into()));
        }
        if self.dynamic.n_stages == 0 || !(self.dynamic.increment >= 0.0) {
            return Err(DfrcError::Config("dynamic stages must be positive with a nonnegative increment".into()));
        }
        Ok(())
    }

    /// Resolves the mask. Without a `mask` entry a random mask of
    /// `default_kind` is drawn from the scenario seed.
    pub fn mask(&self, default_kind: MaskKind) -> Result<ReliabilityMask> {
        let cfg = &self.system;
        let mask = match &self.mask {
            None => random_mask(
                &RandomMask {
                    kind: default_kind,
                    ..Default::default()
                },
                self.seed,
                cfg,
            ),
            Some(MaskSource::Random(spec)) => random_mask(spec, self.seed, cfg),
            Some(MaskSource::Inline(rows)) => mask_from_rows(rows)?,
            Some(MaskSource::File(path)) => {
                let path = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                load_mask(&path)?
            }
        };
        mask.check_dims(cfg.n_tx, cfg.n_users)?;
        Ok(mask)
    }
}

fn to_se(cfg: &SystemConfig, bps: &[f64], name: &str) -> Result<Vec<f64>> {
    if bps.len() != cfg.n_users || cfg.bw_fractions_users.len() != cfg.n_users {
        return Err(DfrcError::Config(format!("{name} needs one entry per user")));
    }
    Ok(bps.iter().enumerate().map(|(j, r)| cfg.rate_to_se(j, *r)).collect())
}

fn random_mask(spec: &RandomMask, scenario_seed: u64, cfg: &SystemConfig) -> ReliabilityMask {
    let mut rng = stream_rng(spec.seed.unwrap_or(scenario_seed), Stream::Mask);
    match spec.kind {
        MaskKind::PerEntry => ReliabilityMask::random_per_entry(&mut rng, cfg.n_tx, cfg.n_users, spec.clamp_fraction),
        MaskKind::PerAntenna => ReliabilityMask::random_per_antenna(&mut rng, cfg.n_tx, spec.clamp_fraction),
    }
}

/// Rows are antennas; a single column is a per-antenna mask.
pub fn mask_from_rows(rows: &[Vec<f64>]) -> Result<ReliabilityMask> {
    if !rows.is_empty() && rows.iter().all(|r| r.len() == 1) {
        return ReliabilityMask::per_antenna(DVector::from_iterator(rows.len(), rows.iter().map(|r| r[0])));
    }
    ReliabilityMask::from_rows(rows)
}

/// Reads a mask file: JSON rows for `.json`, headerless CSV otherwise.
pub fn load_mask(path: &Path) -> Result<ReliabilityMask> {
    let rows: Vec<Vec<f64>> = if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path).map_err(|e| DfrcError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DfrcError::Config(format!("{}: {e}", path.display())))?
    } else {
        let csv_err = |source| DfrcError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| DfrcError::Config(format!("{}: bad mask value {s:?}: {e}", path.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        rows
    };
    mask_from_rows(&rows)
}

/// Writes a mask as headerless CSV, one antenna per line.
pub fn save_mask(mask: &ReliabilityMask, path: &Path) -> Result<()> {
    let csv_err = |source| DfrcError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    let values: DMatrix<f64> = match mask {
        ReliabilityMask::PerEntry(b) => b.clone(),
        ReliabilityMask::PerAntenna(b) => DMatrix::from_column_slice(b.len(), 1, b.as_slice()),
    };
    for row in values.row_iter() {
        wr.write_record(row.iter().map(f64::to_string)).map_err(csv_err)?;
    }
    wr.flush().map_err(|e| DfrcError::io(path, e))
}

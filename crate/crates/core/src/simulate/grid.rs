use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::{empirical_error, generate_dataset, F0Tag, SimConfig};
use crate::error::{Error, Result};
use crate::model::ActivationKind;
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::sieve::SieveSpec;
use crate::trainer::{self, FitReport, TrainConfig};

fn default_iterations() -> usize {
    20_000
}
fn default_learning_rate() -> f64 {
    5e-2
}
fn default_lambda_base() -> f64 {
    10.0
}
fn default_init_scale() -> f64 {
    0.5
}
fn default_record_every() -> usize {
    100
}
fn default_budget() -> f64 {
    1e3
}

/// Training settings shared by every cell; width, activation, penalty kind and seed are
/// filled in per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseTrainConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_lambda_base")]
    pub lambda_base: f64,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub enforce_sieve: bool,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_budget")]
    pub v_n: f64,
    #[serde(default = "default_budget")]
    pub m_n: f64,
}

impl Default for BaseTrainConfig {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            learning_rate: default_learning_rate(),
            lambda_base: default_lambda_base(),
            init_scale: default_init_scale(),
            enforce_sieve: false,
            record_every: default_record_every(),
            v_n: default_budget(),
            m_n: default_budget(),
        }
    }
}

fn default_f0s() -> Vec<F0Tag> {
    F0Tag::ALL.to_vec()
}
fn default_activations() -> Vec<ActivationKind> {
    vec![ActivationKind::Tanh, ActivationKind::Relu]
}
fn default_sample_sizes() -> Vec<usize> {
    vec![100, 200, 500, 1000, 2000]
}
fn default_hidden() -> Vec<usize> {
    vec![10]
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_noise_sd() -> f64 {
    0.7
}
fn default_x_low() -> f64 {
    -2.0
}
fn default_x_high() -> f64 {
    2.0
}
fn default_relu_penalty() -> PenaltyKind {
    PenaltyKind::GradientSparsity
}
fn default_headline() -> usize {
    10
}

/// Experiment grid: the cartesian product of targets, activations, sample sizes, widths
/// and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_f0s")]
    pub f0s: Vec<F0Tag>,
    #[serde(default = "default_activations")]
    pub activations: Vec<ActivationKind>,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub hidden_units: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_x_low")]
    pub x_low: f64,
    #[serde(default = "default_x_high")]
    pub x_high: f64,
    #[serde(default)]
    pub train: BaseTrainConfig,
    /// Penalty for ReLU cells; tanh cells always use the parameter `l1` penalty.
    #[serde(default = "default_relu_penalty")]
    pub relu_penalty: PenaltyKind,
    /// Width reported in the tables and plots.
    #[serde(default = "default_headline")]
    pub headline_hidden: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            f0s: default_f0s(),
            activations: default_activations(),
            sample_sizes: default_sample_sizes(),
            hidden_units: default_hidden(),
            seeds: default_seeds(),
            noise_sd: default_noise_sd(),
            x_low: default_x_low(),
            x_high: default_x_high(),
            train: BaseTrainConfig::default(),
            relu_penalty: default_relu_penalty(),
            headline_hidden: default_headline(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub f0: F0Tag,
    pub activation: ActivationKind,
    pub n: usize,
    pub hidden_units: usize,
    pub seed: u64,
}

impl CellKey {
    pub fn id(&self) -> String {
        format!(
            "{}_{}_n{}_h{}_s{}",
            self.f0, self.activation, self.n, self.hidden_units, self.seed
        )
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("f0s", self.f0s.is_empty()),
            ("activations", self.activations.is_empty()),
            ("sample_sizes", self.sample_sizes.is_empty()),
            ("hidden_units", self.hidden_units.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidConfig(format!("grid axis {name} is empty")));
        }
        for key in self.cells() {
            self.sim_config(&key).validate()?;
        }
        Ok(())
    }

    /// Cells in canonical order: f0, activation, n, width, seed (each in config order).
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &f0 in &self.f0s {
            for &activation in &self.activations {
                for &n in &self.sample_sizes {
                    for &hidden_units in &self.hidden_units {
                        for &seed in &self.seeds {
                            out.push(CellKey {
                                f0,
                                activation,
                                n,
                                hidden_units,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn penalty_kind(&self, activation: ActivationKind) -> PenaltyKind {
        match activation {
            ActivationKind::Tanh => PenaltyKind::ParameterL1,
            ActivationKind::Relu => self.relu_penalty,
        }
    }

    pub fn sim_config(&self, key: &CellKey) -> SimConfig {
        let t = &self.train;
        let train = TrainConfig {
            activation: key.activation,
            iterations: t.iterations,
            learning_rate: t.learning_rate,
            penalty: PenaltySpec {
                kind: self.penalty_kind(key.activation),
                lambda_base: t.lambda_base,
            },
            sieve: SieveSpec {
                r_n: key.hidden_units,
                v_n: t.v_n,
                m_n: t.m_n,
                d: 1,
            },
            init_scale: t.init_scale,
            seed: key.seed,
            enforce_sieve: t.enforce_sieve,
            record_every: t.record_every,
        };
        SimConfig {
            f0: key.f0.instantiate(key.activation),
            n: key.n,
            noise_sd: self.noise_sd,
            x_low: self.x_low,
            x_high: self.x_high,
            seed: key.seed,
            train,
        }
    }

    /// Width shown in tables and plots: `headline_hidden` if it is on the grid, otherwise
    /// the first width.
    pub fn table_width(&self) -> usize {
        if self.hidden_units.contains(&self.headline_hidden) {
            self.headline_hidden
        } else {
            self.hidden_units[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok {
        est_error: f64,
        lsq_error: f64,
        fit: Box<FitReport>,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: String,
    pub key: CellKey,
    pub sim: SimConfig,
    #[serde(flatten)]
    pub status: CellStatus,
}

impl CellRecord {
    pub fn errors(&self) -> Option<(f64, f64)> {
        match &self.status {
            CellStatus::Ok {
                est_error,
                lsq_error,
                ..
            } => Some((*est_error, *lsq_error)),
            CellStatus::Failed { .. } => None,
        }
    }

    pub fn fit(&self) -> Option<&FitReport> {
        match &self.status {
            CellStatus::Ok { fit, .. } => Some(fit),
            CellStatus::Failed { .. } => None,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Fits one cell; a training failure is recorded in the cell, not propagated.
pub fn run_cell(grid: &GridConfig, key: &CellKey) -> Result<CellRecord> {
    let sim = grid.sim_config(key);
    let data = generate_dataset(&sim)?;
    let status = match trainer::fit(&data.x, &data.y, &sim.train) {
        Ok(fit) => CellStatus::Ok {
            est_error: empirical_error(&fit.final_params, &sim.f0, &data.x)?,
            lsq_error: fit.empirical_risk,
            fit: Box::new(fit),
        },
        Err(e @ Error::Diverged { .. }) => CellStatus::Failed { error: e.to_string() },
        Err(e) => return Err(e),
    };
    Ok(CellRecord {
        id: key.id(),
        key: *key,
        sim,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub grid: GridConfig,
    pub cells: Vec<String>,
    pub code_version: String,
    pub rng: String,
    pub two_unit_net: String,
}

impl Manifest {
    pub fn new(grid: &GridConfig) -> Self {
        Self {
            grid: grid.clone(),
            cells: grid.cells().iter().map(CellKey::id).collect(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: "ChaCha8, stream-split by (seed, stream id); Gaussian by Box-Muller via libm".into(),
            two_unit_net: super::two_unit_net_description(),
        }
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path,
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub f0: F0Tag,
    pub activation: ActivationKind,
    pub n: usize,
    pub hidden_units: usize,
    pub runs: usize,
    pub failed: usize,
    pub est_error_mean: f64,
    pub est_error_sd: f64,
    pub lsq_error_mean: f64,
    pub lsq_error_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub grid: GridConfig,
    /// In [`GridConfig::cells`] order.
    pub records: Vec<CellRecord>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentResult {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &CellKey) -> Option<&CellRecord> {
        self.records.iter().find(|r| r.key == *key)
    }

    /// Mean and sample standard deviation over seeds for every other grid coordinate.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<(usize, usize, usize, usize), Vec<&CellRecord>> = BTreeMap::new();
        let pos = |v: &[F0Tag], x: F0Tag| v.iter().position(|&t| t == x).unwrap_or(usize::MAX);
        for r in &self.records {
            let k = r.key;
            let group = (
                pos(&self.grid.f0s, k.f0),
                self.grid.activations.iter().position(|&a| a == k.activation).unwrap_or(usize::MAX),
                self.grid.sample_sizes.iter().position(|&n| n == k.n).unwrap_or(usize::MAX),
                self.grid.hidden_units.iter().position(|&h| h == k.hidden_units).unwrap_or(usize::MAX),
            );
            groups.entry(group).or_default().push(r);
        }
        groups
            .into_values()
            .map(|records| {
                let key = records[0].key;
                let ok: Vec<(f64, f64)> = records.iter().filter_map(|r| r.errors()).collect();
                let (est_error_mean, est_error_sd) = mean_sd(&ok.iter().map(|e| e.0).collect::<Vec<_>>());
                let (lsq_error_mean, lsq_error_sd) = mean_sd(&ok.iter().map(|e| e.1).collect::<Vec<_>>());
                SummaryRow {
                    f0: key.f0,
                    activation: key.activation,
                    n: key.n,
                    hidden_units: key.hidden_units,
                    runs: ok.len(),
                    failed: records.len() - ok.len(),
                    est_error_mean,
                    est_error_sd,
                    lsq_error_mean,
                    lsq_error_sd,
                }
            })
            .collect()
    }

    /// Loads whatever cells of the manifest's grid exist under `dir/cells`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = Manifest::read(dir)?;
        let mut records = Vec::new();
        for key in manifest.grid.cells() {
            let path = cell_path(dir, &key);
            if path.exists() {
                records.push(CellRecord::read(&path)?);
            }
        }
        Ok(Self {
            grid: manifest.grid,
            records,
        })
    }
}

pub(crate) fn cell_path(dir: &Path, key: &CellKey) -> PathBuf {
    dir.join("cells").join(format!("{}.json", key.id()))
}

pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn run_pending(grid: &GridConfig, pending: &[CellKey], tx: mpsc::Sender<Result<CellRecord>>) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pending
            .par_iter()
            .for_each_with(tx, |tx, key| {
                let _ = tx.send(run_cell(grid, key));
            });
    }
    #[cfg(not(feature = "parallel"))]
    for key in pending {
        let _ = tx.send(run_cell(grid, key));
    }
}

/// Runs every cell of the grid. With an output directory, `manifest.json` is written
/// first, each finished cell is persisted to `cells/<id>.json` by a single writer, and
/// cells already on disk are loaded instead of refit, so an interrupted run resumes.
pub fn run_grid(grid: &GridConfig, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    grid.validate()?;
    let all = grid.cells();
    let mut done: BTreeMap<String, CellRecord> = BTreeMap::new();
    if let Some(dir) = out_dir {
        let manifest = serde_json::to_vec_pretty(&Manifest::new(grid))?;
        write_atomic(&dir.join("manifest.json"), &manifest)?;
        for key in &all {
            let path = cell_path(dir, key);
            if path.exists() {
                let rec = CellRecord::read(&path)?;
                if rec.key == *key && rec.sim == grid.sim_config(key) {
                    done.insert(rec.id.clone(), rec);
                }
            }
        }
    }
    let pending: Vec<CellKey> = all.iter().filter(|k| !done.contains_key(&k.id())).copied().collect();

    let (tx, rx) = mpsc::channel::<Result<CellRecord>>();
    let fresh = std::thread::scope(|s| {
        let writer = s.spawn(move || -> Result<Vec<CellRecord>> {
            let mut out = Vec::new();
            for rec in rx {
                let rec = rec?;
                if let Some(dir) = out_dir {
                    write_atomic(&cell_path(dir, &rec.key), &serde_json::to_vec_pretty(&rec)?)?;
                }
                out.push(rec);
            }
            Ok(out)
        });
        run_pending(grid, &pending, tx);
        writer.join().expect("cell writer panicked")
    })?;
    for rec in fresh {
        done.insert(rec.id.clone(), rec);
    }
    let records = all
        .iter()
        .map(|k| done.remove(&k.id()).expect("every cell was run or loaded"))
        .collect();
    Ok(ExperimentResult {
        grid: grid.clone(),
        records,
    })
}

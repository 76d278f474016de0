//! Seeded batches of headless games and the log-to-CSV analysis pipeline.

use crate::agents::{StrategyError, StrategyParams};
use crate::analysis::{
    aggregate_by_condition, analyze_log, write_aggregate_csv, write_runs_csv, write_series_csv, ConditionAggregate,
    RunSummary, DEFAULT_WINDOW_SECONDS,
};
use crate::config::{Condition, ConfigError, SimConfig};
use crate::log::RunLog;
use crate::runner::{HeadlessGame, RunError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("invalid batch spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Condition(#[from] ConfigError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Uniform strategy for everybody, or one per forager.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyAssignment {
    Uniform(String),
    PerForager(Vec<String>),
}

impl StrategyAssignment {
    pub fn resolve(&self) -> Result<Vec<StrategyParams>, StrategyError> {
        match self {
            StrategyAssignment::Uniform(s) => Ok(vec![s.parse()?]),
            StrategyAssignment::PerForager(v) => v.iter().map(|s| s.parse()).collect(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            StrategyAssignment::Uniform(s) => s.clone(),
            StrategyAssignment::PerForager(v) => v.join(";"),
        }
    }
}

fn default_repetitions() -> u32 {
    1
}
fn default_strategy() -> StrategyAssignment {
    StrategyAssignment::Uniform("food_greedy".into())
}
fn default_n_foragers() -> u32 {
    10
}
fn default_switch_times() -> Vec<f64> {
    SimConfig::default().switch_time_choices
}
fn default_window() -> f64 {
    DEFAULT_WINDOW_SECONDS
}

/// A grid of (condition x repetition) headless games. Read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    /// Condition labels; empty means all six.
    #[serde(default)]
    pub conditions: Vec<String>,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyAssignment,
    #[serde(default = "default_n_foragers")]
    pub n_foragers: u32,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_switch_times")]
    pub switch_times: Vec<f64>,
    pub output_dir: PathBuf,
    #[serde(default = "default_window")]
    pub window_seconds: f64,
    /// Base world parameters; condition, n_foragers, seed and switch times are
    /// overwritten per cell.
    #[serde(default)]
    pub config: SimConfig,
}

#[derive(Debug, Clone)]
pub struct BatchCell {
    pub index: u64,
    pub condition: Condition,
    pub repetition: u32,
    pub game: HeadlessGame,
}

impl BatchCell {
    pub fn file_name(&self) -> String {
        format!("{}.jsonl", self.game.run_id)
    }
}

impl BatchSpec {
    pub fn conditions(&self) -> Result<Vec<Condition>, BatchError> {
        if self.conditions.is_empty() {
            return Ok(Condition::all());
        }
        Ok(self
            .conditions
            .iter()
            .map(|c| c.parse())
            .collect::<Result<Vec<Condition>, _>>()?)
    }

    /// Expands the spec into cells; cell `i` runs with seed `seed_base ^ i`.
    pub fn cells(&self) -> Result<Vec<BatchCell>, BatchError> {
        if self.repetitions == 0 {
            return Err(BatchError::Invalid("repetitions must be >= 1".into()));
        }
        if self.n_foragers == 0 {
            return Err(BatchError::Invalid("n_foragers must be >= 1".into()));
        }
        let strategies = self.strategy.resolve()?;
        let mut cells = Vec::new();
        for (ci, condition) in self.conditions()?.into_iter().enumerate() {
            for rep in 0..self.repetitions {
                let index = ci as u64 * u64::from(self.repetitions) + u64::from(rep);
                let seed = self.seed_base ^ index;
                let config = SimConfig {
                    condition,
                    n_foragers: self.n_foragers,
                    seed,
                    switch_time_choices: self.switch_times.clone(),
                    ..self.config.clone()
                };
                let mut labels = BTreeMap::new();
                labels.insert("condition".to_string(), condition.label());
                labels.insert("repetition".to_string(), rep.to_string());
                labels.insert("strategy".to_string(), self.strategy.describe());
                cells.push(BatchCell {
                    index,
                    condition,
                    repetition: rep,
                    game: HeadlessGame {
                        config,
                        strategies: strategies.clone(),
                        run_id: format!("{index:04}_{}_rep{rep:02}", condition.label()),
                        labels,
                    },
                });
            }
        }
        Ok(cells)
    }
}

/// Runs every cell (in parallel) and returns the logs in cell order.
pub fn run_cells(cells: &[BatchCell]) -> Vec<Result<Vec<u8>, RunError>> {
    cells
        .par_iter()
        .map(|c| c.game.run_to_vec().map(|(_, bytes)| bytes))
        .collect()
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub runs: Vec<RunSummary>,
    pub aggregates: Vec<ConditionAggregate>,
    /// Inputs that could not be read or analysed, with the reason.
    pub failures: Vec<(PathBuf, String)>,
}

impl AnalysisReport {
    pub fn from_summaries(runs: Vec<RunSummary>, failures: Vec<(PathBuf, String)>) -> Self {
        let aggregates = aggregate_by_condition(&runs);
        AnalysisReport {
            runs,
            aggregates,
            failures,
        }
    }

    /// Writes `runs.csv`, `aggregate.csv` and `series.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<(), BatchError> {
        fs::create_dir_all(dir).map_err(|source| BatchError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let create = |name: &str| {
            let path = dir.join(name);
            File::create(&path)
                .map(BufWriter::new)
                .map_err(|source| BatchError::Write { path, source })
        };
        write_runs_csv(create("runs.csv")?, &self.runs)?;
        write_aggregate_csv(create("aggregate.csv")?, &self.aggregates)?;
        write_series_csv(create("series.csv")?, &self.runs)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub log_paths: Vec<PathBuf>,
    pub run_failures: Vec<(u64, String)>,
    pub analysis: AnalysisReport,
}

impl BatchReport {
    pub fn failed(&self) -> bool {
        !self.run_failures.is_empty() || !self.analysis.failures.is_empty()
    }
}

/// Runs the batch, writes one log per cell under `output_dir/logs`, then
/// analyses those files into CSVs in `output_dir`.
pub fn run_batch(spec: &BatchSpec) -> Result<BatchReport, BatchError> {
    let cells = spec.cells()?;
    let logs_dir = spec.output_dir.join("logs");
    fs::create_dir_all(&logs_dir).map_err(|source| BatchError::Write {
        path: logs_dir.clone(),
        source,
    })?;
    let mut log_paths = Vec::new();
    let mut run_failures = Vec::new();
    for (cell, result) in cells.iter().zip(run_cells(&cells)) {
        match result {
            Ok(bytes) => {
                let path = logs_dir.join(cell.file_name());
                fs::write(&path, bytes).map_err(|source| BatchError::Write {
                    path: path.clone(),
                    source,
                })?;
                log_paths.push(path);
            }
            Err(e) => run_failures.push((cell.index, e.to_string())),
        }
    }
    let analysis = analyze_paths(&log_paths, spec.window_seconds);
    analysis.write_csvs(&spec.output_dir)?;
    Ok(BatchReport {
        log_paths,
        run_failures,
        analysis,
    })
}

/// Expands directories into their `.jsonl` files, sorted by name.
pub fn collect_log_files(paths: &[PathBuf]) -> (Vec<PathBuf>, Vec<(PathBuf, String)>) {
    let mut files = Vec::new();
    let mut failures = Vec::new();
    for p in paths {
        if p.is_dir() {
            match fs::read_dir(p) {
                Ok(entries) => {
                    let mut found: Vec<PathBuf> = entries
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "jsonl"))
                        .collect();
                    found.sort();
                    files.extend(found);
                }
                Err(e) => failures.push((p.clone(), e.to_string())),
            }
        } else {
            files.push(p.clone());
        }
    }
    (files, failures)
}

pub fn read_log(path: &Path) -> Result<RunLog, String> {
    let file = File::open(path).map_err(|e| e.to_string())?;
    RunLog::parse(BufReader::new(file)).map_err(|e| e.to_string())
}

/// Analyses every log it can; unreadable or unanalysable inputs are listed
/// as failures and the rest still processed.
pub fn analyze_paths(paths: &[PathBuf], window: f64) -> AnalysisReport {
    let (files, mut failures) = collect_log_files(paths);
    let results: Vec<Result<RunSummary, String>> = files
        .par_iter()
        .map(|f| read_log(f).and_then(|log| analyze_log(&log, window).map_err(|e| e.to_string())))
        .collect();
    let mut runs = Vec::new();
    for (file, r) in files.into_iter().zip(results) {
        match r {
            Ok(s) => runs.push(s),
            Err(e) => failures.push((file, e)),
        }
    }
    AnalysisReport::from_summaries(runs, failures)
}

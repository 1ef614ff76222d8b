//! Simulation run records, `runs.csv`, and the train/validation split.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{ParamError, ScenarioParams, NUM_FEATURES};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    Empty,
    #[error("duplicate run (design {design_index}, repetition {repetition})")]
    Duplicate { design_index: usize, repetition: usize },
    #[error("row for design {design_index}: {message}")]
    BadRow { design_index: usize, message: String },
    #[error("invalid parameters: {0}")]
    Params(#[from] ParamError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One completed simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub design_index: usize,
    pub tier: usize,
    pub repetition: usize,
    pub seed: u64,
    pub params: ScenarioParams,
    pub converged: bool,
    pub iterations: usize,
    pub sparsity: f64,
    pub similarity: f64,
    pub wall_time_ms: u64,
}

impl RunRecord {
    pub fn key(&self) -> (usize, usize) {
        (self.design_index, self.repetition)
    }

    pub fn features(&self) -> [f64; NUM_FEATURES] {
        self.params.features()
    }

    pub fn converged_indicator(&self) -> f64 {
        if self.converged {
            1.0
        } else {
            0.0
        }
    }
}

/// A run that raised an error instead of producing an outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedRun {
    pub design_index: usize,
    pub tier: usize,
    pub repetition: usize,
    pub seed: u64,
    pub params: ScenarioParams,
}

/// A line of `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub enum RunEntry {
    Completed(RunRecord),
    Failed(FailedRun),
}

impl RunEntry {
    pub fn key(&self) -> (usize, usize) {
        match self {
            RunEntry::Completed(r) => r.key(),
            RunEntry::Failed(f) => (f.design_index, f.repetition),
        }
    }
}

/// Value of the `converged` column on error-marker rows.
pub const ERROR_MARKER: &str = "error";

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    design_index: usize,
    tier: usize,
    repetition: usize,
    seed: u64,
    num_types: u32,
    density: f64,
    intolerance: f64,
    map_side: usize,
    perception: u32,
    converged: String,
    iterations: Option<usize>,
    sparsity: Option<f64>,
    similarity: Option<f64>,
    wall_time_ms: u64,
}

impl From<&RunEntry> for RunRow {
    fn from(entry: &RunEntry) -> Self {
        let (design_index, tier, repetition, seed, p) = match entry {
            RunEntry::Completed(r) => (r.design_index, r.tier, r.repetition, r.seed, r.params),
            RunEntry::Failed(f) => (f.design_index, f.tier, f.repetition, f.seed, f.params),
        };
        let mut row = RunRow {
            design_index,
            tier,
            repetition,
            seed,
            num_types: p.num_types,
            density: p.density,
            intolerance: p.intolerance,
            map_side: p.map_side,
            perception: p.perception,
            converged: ERROR_MARKER.to_string(),
            iterations: None,
            sparsity: None,
            similarity: None,
            wall_time_ms: 0,
        };
        if let RunEntry::Completed(r) = entry {
            row.converged = if r.converged { "1" } else { "0" }.to_string();
            row.iterations = Some(r.iterations);
            row.sparsity = Some(r.sparsity);
            row.similarity = Some(r.similarity);
            row.wall_time_ms = r.wall_time_ms;
        }
        row
    }
}

impl TryFrom<RunRow> for RunEntry {
    type Error = DatasetError;

    fn try_from(row: RunRow) -> Result<Self, DatasetError> {
        let params = ScenarioParams::new(row.num_types, row.density, row.intolerance, row.map_side, row.perception)?;
        let bad = |message: &str| DatasetError::BadRow { design_index: row.design_index, message: message.to_string() };
        let converged = match row.converged.as_str() {
            ERROR_MARKER => {
                return Ok(RunEntry::Failed(FailedRun {
                    design_index: row.design_index,
                    tier: row.tier,
                    repetition: row.repetition,
                    seed: row.seed,
                    params,
                }))
            }
            "1" => true,
            "0" => false,
            _ => return Err(bad("converged must be 0, 1 or error")),
        };
        Ok(RunEntry::Completed(RunRecord {
            design_index: row.design_index,
            tier: row.tier,
            repetition: row.repetition,
            seed: row.seed,
            params,
            converged,
            iterations: row.iterations.ok_or_else(|| bad("missing iterations"))?,
            sparsity: row.sparsity.ok_or_else(|| bad("missing sparsity"))?,
            similarity: row.similarity.ok_or_else(|| bad("missing similarity"))?,
            wall_time_ms: row.wall_time_ms,
        }))
    }
}

/// Appends entries to an open csv writer.
pub struct RunWriter<W: std::io::Write> {
    inner: csv::Writer<W>,
}

impl RunWriter<std::fs::File> {
    /// Opens `path` for appending, writing the header only if the file is new
    /// or empty.
    pub fn append(path: &Path) -> Result<Self, DatasetError> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        let inner = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        Ok(RunWriter { inner })
    }
}

impl<W: std::io::Write> RunWriter<W> {
    pub fn from_writer(w: W) -> Self {
        RunWriter { inner: csv::Writer::from_writer(w) }
    }

    pub fn write(&mut self, entry: &RunEntry) -> Result<(), DatasetError> {
        self.inner.serialize(RunRow::from(entry))?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, DatasetError> {
        self.inner.into_inner().map_err(|e| DatasetError::Io(e.into_error()))
    }
}

/// Writes `entries` to `path`, replacing any previous content.
pub fn write_runs_csv(entries: &[RunEntry], path: &Path) -> Result<(), DatasetError> {
    let mut w = RunWriter::from_writer(std::fs::File::create(path)?);
    for e in entries {
        w.write(e)?;
    }
    Ok(())
}

pub fn read_runs<R: std::io::Read>(reader: R) -> Result<Vec<RunEntry>, DatasetError> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<RunRow>().map(|row| RunEntry::try_from(row?)).collect()
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunEntry>, DatasetError> {
    read_runs(std::fs::File::open(path)?)
}

/// Repetitions of one design point, aggregated.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignAggregate {
    pub design_index: usize,
    pub tier: usize,
    pub params: ScenarioParams,
    pub repetitions: usize,
    pub mean_sparsity: f64,
    /// Sample variance of the sparsity divided by the repetition count.
    pub sparsity_mean_variance: f64,
    pub converged_fraction: f64,
    pub converged_mean_variance: f64,
}

/// Completed runs plus the split of designs into training and validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<RunRecord>,
    /// Designs with `tier < train_tiers` train; the rest validate.
    pub train_tiers: usize,
}

impl Dataset {
    /// Sorts by `(design_index, repetition)` and checks uniqueness. The default
    /// split trains on tier 0.
    pub fn new(mut records: Vec<RunRecord>) -> Result<Self, DatasetError> {
        records.sort_by_key(RunRecord::key);
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.key()) {
                return Err(DatasetError::Duplicate { design_index: r.design_index, repetition: r.repetition });
            }
        }
        Ok(Dataset { records, train_tiers: 1 })
    }

    /// Keeps completed runs, dropping error markers.
    pub fn from_entries(entries: Vec<RunEntry>) -> Result<Self, DatasetError> {
        Dataset::new(
            entries
                .into_iter()
                .filter_map(|e| match e {
                    RunEntry::Completed(r) => Some(r),
                    RunEntry::Failed(_) => None,
                })
                .collect(),
        )
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_train(&self, record: &RunRecord) -> bool {
        record.tier < self.train_tiers
    }

    pub fn train(&self) -> Vec<&RunRecord> {
        self.records.iter().filter(|r| self.is_train(r)).collect()
    }

    pub fn validation(&self) -> Vec<&RunRecord> {
        self.records.iter().filter(|r| !self.is_train(r)).collect()
    }

    /// Per-design aggregates, ordered by design index.
    pub fn aggregates<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Vec<DesignAggregate> {
        let mut groups: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
        for r in records {
            groups.entry(r.design_index).or_default().push(r);
        }
        groups
            .into_values()
            .map(|rs| {
                let n = rs.len();
                let (mean_s, var_s) = mean_and_var(rs.iter().map(|r| r.sparsity));
                let (mean_c, var_c) = mean_and_var(rs.iter().map(|r| r.converged_indicator()));
                DesignAggregate {
                    design_index: rs[0].design_index,
                    tier: rs[0].tier,
                    params: rs[0].params,
                    repetitions: n,
                    mean_sparsity: mean_s,
                    sparsity_mean_variance: var_s / n as f64,
                    converged_fraction: mean_c,
                    converged_mean_variance: var_c / n as f64,
                }
            })
            .collect()
    }
}

/// Mean and unbiased sample variance (0 for a single value).
fn mean_and_var(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

//! The end-to-end workflow behind the `segsur` subcommands: design,
//! simulation batch, statistics, surrogate benchmark and explanations. Every
//! step reads and writes plain files in the configured output directory.

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_runs_csv, write_runs_csv, Dataset, DatasetError, FailedRun, RunEntry, RunRecord, RunWriter};
use crate::doe::{design_rows, expand_repetitions, generate_nested_lhs, read_design_csv, write_design_csv, DesignSpec, DoeError, RunDescriptor};
use crate::explain::{
    feature_grid, mdi_importance, pdp_ice, shap_batch, write_importance_csv, write_pdp_ice_csv, write_shap_csv, ExplainError,
    Importance, ShapBatch,
};
use crate::rng::derive_seed;
use crate::schelling::{run_simulation, DEFAULT_MAX_ITERATIONS};
use crate::space::{scenario_bounds, FEATURE_NAMES};
use crate::stats::{summarize, Summary};
use crate::surrogates::evaluate::{evaluate, EvaluationReport};
use crate::surrogates::{fit, fit_roster, training_set, ModelKind, ModelSpec, SurrogateError, Task};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Doe(#[from] DoeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{} model(s) failed to fit: {}", .0.len(), .0.join("; "))]
    ModelFailures(Vec<String>),
}

impl PipelineError {
    /// 1 for usage or configuration problems, 2 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub model: ModelKind,
    pub task: Task,
    /// Explain only the first `rows` runs; all runs when absent.
    pub rows: Option<usize>,
    pub background_cap: usize,
    pub grid_size: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { model: ModelKind::Rf, task: Task::Classification, rows: None, background_cap: 250, grid_size: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// Nested design tier sizes.
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    /// Global seed for the design, every run and every model.
    pub seed: u64,
    pub max_iterations: usize,
    pub ese_iterations: usize,
    pub strict_integers: bool,
    pub models: Vec<ModelKind>,
    /// Designs in tiers below this train the surrogates.
    pub train_tiers: usize,
    pub out_dir: PathBuf,
    /// Simulation workers; 0 uses every available core.
    pub workers: usize,
    /// Store measured wall time per run. Off by default so outputs are
    /// byte-reproducible.
    pub record_timing: bool,
    pub explain: ExplainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            sizes: vec![50, 100, 200],
            repetitions: 5,
            seed: 0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            ese_iterations: 300,
            strict_integers: false,
            models: ModelKind::ALL.to_vec(),
            train_tiers: 1,
            out_dir: PathBuf::from("out"),
            workers: 0,
            record_timing: false,
            explain: ExplainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(PipelineError::Config(format!(
                "schema_version {} not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.max_iterations == 0 {
            return Err(PipelineError::Config("max_iterations must be at least 1".into()));
        }
        if self.explain.grid_size < 2 || self.explain.background_cap == 0 {
            return Err(PipelineError::Config("explain needs grid_size ≥ 2 and background_cap ≥ 1".into()));
        }
        self.design_spec().validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn design_spec(&self) -> DesignSpec {
        DesignSpec {
            bounds: scenario_bounds(),
            sizes: self.sizes.clone(),
            repetitions: self.repetitions,
            seed: self.seed,
            ese_iterations: self.ese_iterations,
            strict_integers: self.strict_integers,
        }
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    pub fn design_path(&self) -> PathBuf {
        self.path("design.csv")
    }

    pub fn runs_path(&self) -> PathBuf {
        self.path("runs.csv")
    }

    fn model_seed(&self, kind: ModelKind, task: Task) -> u64 {
        derive_seed(&[self.seed, kind as u64, task as u64])
    }

    pub fn model_specs(&self) -> Vec<ModelSpec> {
        self.models
            .iter()
            .flat_map(|&k| {
                [Task::Regression, Task::Classification]
                    .map(|t| ModelSpec::new(k, t).with_seed(self.model_seed(k, t)))
            })
            .collect()
    }
}

fn ensure_out_dir(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(())
}

/// Generates the nested design and writes `design.csv`.
pub fn cmd_doe(cfg: &PipelineConfig) -> Result<PathBuf, PipelineError> {
    ensure_out_dir(cfg)?;
    let design = generate_nested_lhs(&cfg.design_spec())?;
    for (tier, q) in design.quality.iter().enumerate() {
        log::info!("tier {tier}: maximin {:.4} -> {:.4}", q.initial_maximin, q.final_maximin);
    }
    let path = cfg.design_path();
    write_design_csv(&design_rows(&design)?, &path)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimulateReport {
    pub total: usize,
    pub skipped: usize,
    pub completed: usize,
    pub failed: usize,
}

/// Runs one descriptor, turning a panic into an error-marker entry.
pub fn execute_run(d: &RunDescriptor, max_iterations: usize, record_timing: bool) -> RunEntry {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| run_simulation(&d.params, d.seed, max_iterations)));
    match outcome {
        Ok(o) if o.final_sparsity.is_finite() => RunEntry::Completed(RunRecord {
            design_index: d.design_index,
            tier: d.tier,
            repetition: d.repetition,
            seed: d.seed,
            params: d.params,
            converged: o.converged,
            iterations: o.iterations,
            sparsity: o.final_sparsity,
            similarity: o.final_similarity,
            wall_time_ms: if record_timing { start.elapsed().as_millis() as u64 } else { 0 },
        }),
        _ => {
            log::error!("run (design {}, repetition {}) failed", d.design_index, d.repetition);
            RunEntry::Failed(FailedRun {
                design_index: d.design_index,
                tier: d.tier,
                repetition: d.repetition,
                seed: d.seed,
                params: d.params,
            })
        }
    }
}

/// Runs `descriptors` on `workers` threads, handing each finished entry to
/// `sink` on the calling thread in completion order.
pub fn run_batch(
    descriptors: &[RunDescriptor],
    workers: usize,
    max_iterations: usize,
    record_timing: bool,
    mut sink: impl FnMut(RunEntry) -> Result<(), PipelineError>,
) -> Result<(), PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        scope.spawn(move || {
            pool.install(|| {
                descriptors.par_iter().for_each_with(tx, |tx, d| {
                    // the receiver only disappears if the writer failed
                    let _ = tx.send(execute_run(d, max_iterations, record_timing));
                })
            })
        });
        for entry in rx {
            sink(entry)?;
        }
        Ok(())
    })
}

/// Reads the design, runs every missing `(design, repetition)` pair, and
/// rewrites `runs.csv` in canonical order.
///
/// Finished runs are appended to `runs.csv` as they arrive, so an interrupted
/// batch resumes where it stopped. Rows marked as errors are retried.
pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<SimulateReport, PipelineError> {
    ensure_out_dir(cfg)?;
    let design_path = cfg.design_path();
    if !design_path.exists() {
        log::info!("{} missing, generating it", design_path.display());
        cmd_doe(cfg)?;
    }
    let rows = read_design_csv(&design_path)?;
    let points = rows.iter().map(|r| Ok((r.index, r.tier, r.params()?))).collect::<Result<Vec<_>, DatasetError>>()?;
    let descriptors = expand_repetitions(&points, cfg.repetitions, cfg.seed);

    let runs_path = cfg.runs_path();
    let existing = if runs_path.exists() { read_runs_csv(&runs_path)? } else { Vec::new() };
    let done: HashSet<(usize, usize)> = existing
        .iter()
        .filter(|e| matches!(e, RunEntry::Completed(_)))
        .map(RunEntry::key)
        .collect();
    let todo: Vec<RunDescriptor> =
        descriptors.iter().filter(|d| !done.contains(&(d.design_index, d.repetition))).copied().collect();
    let mut report = SimulateReport { total: descriptors.len(), skipped: descriptors.len() - todo.len(), completed: 0, failed: 0 };
    let workers = if cfg.workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { cfg.workers };
    log::info!("{} runs to do ({} already present), {workers} worker(s)", todo.len(), report.skipped);

    let mut writer = RunWriter::append(&runs_path)?;
    let step = (todo.len() / 20).max(1);
    let mut finished = 0;
    run_batch(&todo, workers, cfg.max_iterations, cfg.record_timing, |entry| {
        match entry {
            RunEntry::Completed(_) => report.completed += 1,
            RunEntry::Failed(_) => report.failed += 1,
        }
        writer.write(&entry)?;
        finished += 1;
        if finished % step == 0 || finished == todo.len() {
            log::info!("simulated {finished}/{}", todo.len());
        }
        Ok(())
    })?;
    drop(writer);

    canonicalize_runs(&runs_path)?;
    Ok(report)
}

/// Deduplicates `runs.csv` (a completed run beats an error marker, later
/// beats earlier) and sorts it by `(design_index, repetition)`.
pub fn canonicalize_runs(path: &Path) -> Result<(), PipelineError> {
    let mut merged: BTreeMap<(usize, usize), RunEntry> = BTreeMap::new();
    for e in read_runs_csv(path)? {
        let keep_old = matches!(
            (merged.get(&e.key()), &e),
            (Some(RunEntry::Completed(_)), RunEntry::Failed(_))
        );
        if !keep_old {
            merged.insert(e.key(), e);
        }
    }
    let tmp = path.with_extension("csv.tmp");
    write_runs_csv(&merged.into_values().collect::<Vec<_>>(), &tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads the completed runs of `runs.csv` with the configured split.
pub fn load_dataset(cfg: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let mut ds = Dataset::from_entries(read_runs_csv(&cfg.runs_path())?)?;
    if ds.is_empty() {
        return Err(DatasetError::Empty.into());
    }
    ds.train_tiers = cfg.train_tiers;
    Ok(ds)
}

/// Writes `summary.json`.
pub fn cmd_stats(cfg: &PipelineConfig) -> Result<Summary, PipelineError> {
    let ds = load_dataset(cfg)?;
    let summary = summarize(&ds)?;
    std::fs::write(cfg.path("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

/// Fits the roster on the training split and scores it on the validation
/// split. Writes `evaluation.csv` and `evaluation.md`; models that fail to
/// fit are reported after the artifacts for the others are written.
pub fn cmd_fit_evaluate(cfg: &PipelineConfig) -> Result<EvaluationReport, PipelineError> {
    let ds = load_dataset(cfg)?;
    let validation = ds.validation();
    if ds.train().len() < 2 || validation.is_empty() {
        return Err(DatasetError::Empty.into());
    }
    let specs = cfg.model_specs();
    log::info!("fitting {} models on {} rows", specs.len(), ds.train().len());
    let mut fitted = Vec::new();
    let mut failures = Vec::new();
    for (spec, result) in specs.iter().zip(fit_roster(&specs, &scenario_bounds(), &ds)) {
        match result {
            Ok(m) => fitted.push(m),
            Err(e) => failures.push(format!("{} {}: {e}", spec.kind, spec.task)),
        }
    }
    let report = evaluate(&fitted, &validation);
    report.write_csv(&cfg.path("evaluation.csv"))?;
    std::fs::write(cfg.path("evaluation.md"), report.to_markdown())?;
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(PipelineError::ModelFailures(failures))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainReport {
    pub model: ModelKind,
    pub task: Task,
    pub mdi: Option<Importance>,
    pub shap: ShapBatch,
    pub files: Vec<PathBuf>,
}

/// Fits the configured model on the training split and writes `shap.csv`,
/// `importance.csv` and one `pdp_ice_<feature>.csv` per input.
pub fn cmd_explain(cfg: &PipelineConfig) -> Result<ExplainReport, PipelineError> {
    let ds = load_dataset(cfg)?;
    let ex = &cfg.explain;
    let bounds = scenario_bounds();
    let train = ds.train();
    let spec = ModelSpec::new(ex.model, ex.task).with_seed(cfg.model_seed(ex.model, ex.task));
    let set = training_set(spec.kind, spec.task, &train);
    let model = fit(&spec, &bounds, &set.x, &set.y, set.noise.as_deref())?;
    let predict = |x: &[f64]| model.predict_mean(x);

    let background: Vec<Vec<f64>> = train.iter().take(ex.background_cap).map(|r| r.features().to_vec()).collect();
    let points: Vec<Vec<f64>> =
        ds.records().iter().take(ex.rows.unwrap_or(usize::MAX)).map(|r| r.features().to_vec()).collect();
    log::info!("explaining {} {} on {} rows, background {}", spec.kind, spec.task, points.len(), background.len());
    let shap = shap_batch(&predict, &points, &background)?;
    let mdi = if spec.kind.is_tree_based() { Some(mdi_importance(&model)?) } else { None };

    let mut files = vec![cfg.path("shap.csv"), cfg.path("importance.csv")];
    write_shap_csv(&shap, &FEATURE_NAMES, &files[0])?;
    write_importance_csv(&FEATURE_NAMES, mdi.as_ref(), Some(&shap), &files[1])?;
    for (i, b) in bounds.iter().enumerate() {
        let grid = feature_grid(b, ex.grid_size)?;
        let curve = pdp_ice(&predict, i, &grid, &background)?;
        let path = cfg.path(&format!("pdp_ice_{}.csv", b.name));
        write_pdp_ice_csv(&curve, &path)?;
        files.push(path);
    }
    Ok(ExplainReport { model: spec.kind, task: spec.task, mdi, shap, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_and_validates() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&json).unwrap(), cfg);
        assert_eq!(cfg.model_specs().len(), 16);
        let partial: PipelineConfig = serde_json::from_str(r#"{"schema_version": 1, "sizes": [10, 20]}"#).unwrap();
        assert_eq!(partial.repetitions, 5);
    }

    #[test]
    fn config_errors_are_usage_errors() {
        let bad = PipelineConfig { schema_version: 9, ..Default::default() };
        assert_eq!(bad.validate().unwrap_err().exit_code(), 1);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sizez": [1]}"#).is_err());
    }

    #[test]
    fn canonicalize_prefers_completed_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let params = crate::space::ScenarioParams::new(2, 0.5, 0.3, 10, 1).unwrap();
        let failed = |i, rep| RunEntry::Failed(FailedRun { design_index: i, tier: 0, repetition: rep, seed: 1, params });
        let done = |i, rep| {
            RunEntry::Completed(RunRecord {
                design_index: i,
                tier: 0,
                repetition: rep,
                seed: 1,
                params,
                converged: true,
                iterations: 3,
                sparsity: 1.0,
                similarity: 0.5,
                wall_time_ms: 0,
            })
        };
        write_runs_csv(&[done(1, 0), failed(0, 1), done(0, 1), failed(1, 0), done(0, 0)], &path).unwrap();
        canonicalize_runs(&path).unwrap();
        let entries = read_runs_csv(&path).unwrap();
        assert_eq!(entries, vec![done(0, 0), done(0, 1), done(1, 0)]);
    }
}

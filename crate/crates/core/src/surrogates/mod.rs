//! Surrogate models for the sparsity (regression) and convergence
//! (classification) outputs.
//!
//! Every model sees inputs min-max normalized onto the unit cube with the
//! scenario bounds. Classification is indicator regression thresholded at
//! 0.5 for the kernel, linear and instance models; trees and forests vote.

pub mod evaluate;
pub mod forest;
pub mod gp;
pub mod linalg;
pub mod linear;
pub mod neighbors;
pub mod optimize;
pub mod rbf;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, RunRecord};
use crate::space::VarBounds;
use forest::RandomForest;
use gp::{GaussianProcess, GpSearch, KernelFamily};
use linear::{Basis, LeastSquares};
use neighbors::{InverseDistance, NearestNeighbors};
use rbf::RadialBasis;
use tree::{Criterion, DecisionTree, TreeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("{model}: {detail}")]
    Singular { model: &'static str, detail: String },
    #[error("{model} does not support {capability}")]
    Unsupported { model: &'static str, capability: &'static str },
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown model kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Gp,
    Rbf,
    Idw,
    Lr,
    Qp,
    Knn,
    Dt,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] =
        [ModelKind::Gp, ModelKind::Rbf, ModelKind::Idw, ModelKind::Lr, ModelKind::Qp, ModelKind::Knn, ModelKind::Dt, ModelKind::Rf];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gp => "GP",
            ModelKind::Rbf => "RBF",
            ModelKind::Idw => "IDW",
            ModelKind::Lr => "LR",
            ModelKind::Qp => "QP",
            ModelKind::Knn => "KNN",
            ModelKind::Dt => "DT",
            ModelKind::Rf => "RF",
        }
    }

    pub fn is_tree_based(self) -> bool {
        matches!(self, ModelKind::Dt | ModelKind::Rf)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| SurrogateError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }

    /// Training/validation target of a run: sparsity or the converged
    /// indicator.
    pub fn target(self, record: &RunRecord) -> f64 {
        match self {
            Task::Regression => record.sparsity,
            Task::Classification => record.converged_indicator(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    /// Kernel for GP and RBF.
    pub kernel: KernelFamily,
    /// RBF distance scale on normalized inputs.
    pub rbf_scale: f64,
    pub idw_power: f64,
    pub k: usize,
    pub trees: usize,
    pub max_depth: Option<usize>,
    /// Features tried per split; `None` picks ⌈d/3⌉ (regression) or ⌈√d⌉
    /// (classification) for forests and all features for a single tree.
    pub max_features: Option<usize>,
    pub gp_search: GpSearch,
}

impl Hyperparameters {
    pub fn for_task(task: Task) -> Self {
        Hyperparameters {
            kernel: match task {
                Task::Regression => KernelFamily::SquaredExponential,
                Task::Classification => KernelFamily::AbsoluteExponential,
            },
            rbf_scale: 1.0,
            idw_power: 2.0,
            k: 15,
            trees: 100,
            max_depth: None,
            max_features: None,
            gp_search: GpSearch::default(),
        }
    }
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters::for_task(Task::Regression)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub task: Task,
    pub hyper: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, task: Task) -> Self {
        ModelSpec { kind, task, hyper: Hyperparameters::for_task(task), seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
enum Learned {
    Gp(GaussianProcess),
    Rbf(RadialBasis),
    Idw(InverseDistance),
    Linear(LeastSquares),
    Knn(NearestNeighbors),
    Tree(DecisionTree),
    Forest(RandomForest),
}

/// A trained surrogate. Immutable and safe to share across threads.
#[derive(Debug, Clone)]
pub struct FittedModel {
    spec: ModelSpec,
    bounds: Vec<VarBounds>,
    learned: Learned,
}

fn forest_features(task: Task, d: usize) -> usize {
    match task {
        Task::Regression => d.div_ceil(3),
        Task::Classification => (d as f64).sqrt().ceil() as usize,
    }
}

fn normalize_rows(bounds: &[VarBounds], x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter().map(|r| r.iter().zip(bounds).map(|(v, b)| b.normalize(*v)).collect()).collect()
}

/// Trains a model on physical-unit inputs. `noise` is the per-point
/// observation variance and is only used by the GP.
pub fn fit(
    spec: &ModelSpec,
    bounds: &[VarBounds],
    x: &[Vec<f64>],
    y: &[f64],
    noise: Option<&[f64]>,
) -> Result<FittedModel, SurrogateError> {
    if x.len() != y.len() {
        return Err(SurrogateError::Shape(format!("{} input rows but {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(SurrogateError::TooFewRows(x.len()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != bounds.len()) {
        return Err(SurrogateError::Shape(format!("row of width {} for {} declared variables", row.len(), bounds.len())));
    }
    if noise.is_some_and(|n| n.len() != y.len()) {
        return Err(SurrogateError::Shape("noise length differs from target length".into()));
    }
    let u = normalize_rows(bounds, x);
    let d = bounds.len();
    let h = &spec.hyper;
    let criterion = match spec.task {
        Task::Regression => Criterion::Variance,
        Task::Classification => Criterion::Gini,
    };
    let learned = match spec.kind {
        ModelKind::Gp => Learned::Gp(GaussianProcess::fit(h.kernel, &u, y, noise, &h.gp_search, spec.seed)?),
        ModelKind::Rbf => Learned::Rbf(RadialBasis::fit(h.kernel, h.rbf_scale, &u, y)?),
        ModelKind::Idw => Learned::Idw(InverseDistance::new(&u, y, h.idw_power)),
        ModelKind::Lr => Learned::Linear(LeastSquares::fit(Basis::Linear, &u, y)?),
        ModelKind::Qp => Learned::Linear(LeastSquares::fit(Basis::Quadratic, &u, y)?),
        ModelKind::Knn => Learned::Knn(NearestNeighbors::new(&u, y, h.k)),
        ModelKind::Dt => {
            let params = TreeParams { max_depth: h.max_depth, max_features: h.max_features, ..Default::default() };
            let mut rng = crate::rng::rng_from_seed(spec.seed);
            Learned::Tree(DecisionTree::fit(&u, y, (0..u.len()).collect(), criterion, &params, &mut rng))
        }
        ModelKind::Rf => {
            let params = TreeParams {
                max_depth: h.max_depth,
                max_features: Some(h.max_features.unwrap_or_else(|| forest_features(spec.task, d))),
                ..Default::default()
            };
            Learned::Forest(RandomForest::fit(&u, y, h.trees, criterion, &params, spec.seed))
        }
    };
    Ok(FittedModel { spec: spec.clone(), bounds: bounds.to_vec(), learned })
}

impl FittedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn task(&self) -> Task {
        self.spec.task
    }

    pub fn bounds(&self) -> &[VarBounds] {
        &self.bounds
    }

    /// Maps a physical point to the unit cube, warning when it lies outside
    /// the declared bounds.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        if let Some(b) = x.iter().zip(&self.bounds).find(|(v, b)| !b.contains(**v)) {
            log::warn!("{}: {} = {} outside [{}, {}], extrapolating", self.spec.kind, b.1.name, b.0, b.1.lower, b.1.upper);
        }
        x.iter().zip(&self.bounds).map(|(v, b)| b.normalize(*v)).collect()
    }

    /// Mean prediction at a physical-unit point.
    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let u = self.normalize(x);
        match &self.learned {
            Learned::Gp(m) => m.predict(&u),
            Learned::Rbf(m) => m.predict(&u),
            Learned::Idw(m) => m.predict(&u),
            Learned::Linear(m) => m.predict(&u),
            Learned::Knn(m) => m.predict(&u),
            Learned::Tree(m) => m.predict(&u),
            Learned::Forest(m) => m.predict(&u),
        }
    }

    /// GP posterior variance or the across-tree variance of a forest.
    pub fn predict_variance(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        let u = self.normalize(x);
        match &self.learned {
            Learned::Gp(m) => Ok(m.variance(&u)),
            Learned::Forest(m) => Ok(m.variance(&u)),
            _ => Err(SurrogateError::Unsupported { model: self.spec.kind.as_str(), capability: "predictive variance" }),
        }
    }

    /// Predicted convergence class.
    pub fn classify(&self, x: &[f64]) -> Result<bool, SurrogateError> {
        if self.spec.task != Task::Classification {
            return Err(SurrogateError::Unsupported {
                model: self.spec.kind.as_str(),
                capability: "classification (fitted for regression)",
            });
        }
        Ok(match &self.learned {
            Learned::Forest(m) => m.classify(&self.normalize(x)),
            _ => self.predict_mean(x) >= 0.5,
        })
    }

    /// The trees of a DT or RF model.
    pub fn trees(&self) -> Option<&[DecisionTree]> {
        match &self.learned {
            Learned::Tree(t) => Some(std::slice::from_ref(t)),
            Learned::Forest(f) => Some(f.trees()),
            _ => None,
        }
    }

    pub fn gaussian_process(&self) -> Option<&GaussianProcess> {
        match &self.learned {
            Learned::Gp(m) => Some(m),
            _ => None,
        }
    }
}

/// Rows a model is trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub noise: Option<Vec<f64>>,
}

/// The GP sees one row per design (repetition mean, with the variance of
/// that mean as nugget); every other model sees the raw runs.
pub fn training_set(kind: ModelKind, task: Task, records: &[&RunRecord]) -> TrainingSet {
    if kind == ModelKind::Gp {
        let agg = Dataset::aggregates(records.iter().copied());
        let (y, noise) = agg
            .iter()
            .map(|a| match task {
                Task::Regression => (a.mean_sparsity, a.sparsity_mean_variance),
                Task::Classification => (a.converged_fraction, a.converged_mean_variance),
            })
            .unzip();
        TrainingSet { x: agg.iter().map(|a| a.params.features().to_vec()).collect(), y, noise: Some(noise) }
    } else {
        TrainingSet {
            x: records.iter().map(|r| r.features().to_vec()).collect(),
            y: records.iter().map(|r| task.target(r)).collect(),
            noise: None,
        }
    }
}

/// Fits every spec on the dataset's training split, in parallel. Results keep
/// the order of `specs`.
pub fn fit_roster(
    specs: &[ModelSpec],
    bounds: &[VarBounds],
    dataset: &Dataset,
) -> Vec<Result<FittedModel, SurrogateError>> {
    let train = dataset.train();
    specs
        .par_iter()
        .map(|spec| {
            let set = training_set(spec.kind, spec.task, &train);
            fit(spec, bounds, &set.x, &set.y, set.noise.as_deref())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::scenario_bounds;

    fn sample(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                vec![
                    2.0 + (i % 4) as f64,
                    0.01 + 0.99 * (t * 0.377).fract(),
                    (t * 0.618).fract(),
                    10.0 + (i * 7 % 31) as f64,
                    1.0 + (i * 3 % 10) as f64,
                ]
            })
            .collect()
    }

    #[test]
    fn kinds_round_trip_through_strings() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.as_str()));
        }
        assert!("mlp".parse::<ModelKind>().is_err());
    }

    #[test]
    fn all_true_labels_classify_true_everywhere() {
        let x = sample(40);
        let y = vec![1.0; 40];
        for kind in ModelKind::ALL {
            let m = fit(&ModelSpec::new(kind, Task::Classification), &scenario_bounds(), &x, &y, None).unwrap();
            for q in sample(17).iter().skip(3) {
                assert!(m.classify(q).unwrap(), "{kind}");
            }
        }
    }

    #[test]
    fn variance_is_gp_and_rf_only() {
        let x = sample(30);
        let y: Vec<f64> = x.iter().map(|r| r[1] * 3.0 + r[2]).collect();
        for kind in ModelKind::ALL {
            let m = fit(&ModelSpec::new(kind, Task::Regression), &scenario_bounds(), &x, &y, None).unwrap();
            let v = m.predict_variance(&x[0]);
            match kind {
                ModelKind::Gp | ModelKind::Rf => assert!(v.unwrap() >= 0.0),
                _ => assert!(matches!(v, Err(SurrogateError::Unsupported { .. }))),
            }
            assert!(m.classify(&x[0]).is_err());
        }
    }

    #[test]
    fn seeded_fits_are_reproducible() {
        let x = sample(30);
        let y: Vec<f64> = x.iter().map(|r| (r[2] * 5.0).sin() + r[0]).collect();
        for kind in [ModelKind::Gp, ModelKind::Rf, ModelKind::Dt] {
            let spec = ModelSpec::new(kind, Task::Regression).with_seed(11);
            let a = fit(&spec, &scenario_bounds(), &x, &y, None).unwrap();
            let b = fit(&spec, &scenario_bounds(), &x, &y, None).unwrap();
            for q in sample(9) {
                assert_eq!(a.predict_mean(&q), b.predict_mean(&q));
            }
        }
    }

    #[test]
    fn threshold_commutes_with_affine_targets() {
        let x = sample(40);
        let y: Vec<f64> = x.iter().map(|r| if r[2] < 0.5 { 1.0 } else { 0.0 }).collect();
        let scaled: Vec<f64> = y.iter().map(|v| 3.0 * v + 2.0).collect();
        for kind in [ModelKind::Lr, ModelKind::Knn, ModelKind::Idw, ModelKind::Rbf] {
            let a = fit(&ModelSpec::new(kind, Task::Classification), &scenario_bounds(), &x, &y, None).unwrap();
            let b = fit(&ModelSpec::new(kind, Task::Classification), &scenario_bounds(), &x, &scaled, None).unwrap();
            for q in sample(23) {
                let pa = a.predict_mean(&q) >= 0.5;
                let pb = b.predict_mean(&q) >= 3.0 * 0.5 + 2.0;
                assert_eq!(pa, pb, "{kind}");
            }
        }
    }

    #[test]
    fn shape_errors() {
        let x = sample(5);
        let spec = ModelSpec::new(ModelKind::Lr, Task::Regression);
        assert!(matches!(fit(&spec, &scenario_bounds(), &x, &[1.0; 4], None), Err(SurrogateError::Shape(_))));
        assert!(matches!(fit(&spec, &scenario_bounds(), &x[..1], &[1.0], None), Err(SurrogateError::TooFewRows(1))));
    }
}

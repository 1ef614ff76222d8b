//! Hold-out scoring: RMSE on sparsity, misclassification count on
//! convergence, and competition ranks within each task.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelKind, Task};
use crate::dataset::RunRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: ModelKind,
    pub task: Task,
    /// Regression only.
    pub rmse: Option<f64>,
    /// Classification only.
    pub class_errors: Option<usize>,
    pub class_error_rate: Option<f64>,
    /// 1 + number of models strictly better on the same task.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub validation_rows: usize,
    pub scores: Vec<ModelScore>,
}

#[derive(Serialize)]
struct EvaluationRow {
    model: ModelKind,
    task: Task,
    rmse: Option<f64>,
    class_errors: Option<usize>,
    rank_reg: Option<usize>,
    rank_cls: Option<usize>,
}

pub fn rmse(predicted: &[f64], observed: &[f64]) -> f64 {
    let n = observed.len().max(1) as f64;
    (predicted.iter().zip(observed).map(|(p, o)| (p - o).powi(2)).sum::<f64>() / n).sqrt()
}

/// Competition ranking: equal scores share a rank, the next rank skips.
pub fn competition_ranks(scores: &[f64]) -> Vec<usize> {
    scores.iter().map(|s| 1 + scores.iter().filter(|o| *o < s).count()).collect()
}

/// Scores each model on every validation row (repetitions are not averaged).
pub fn evaluate(models: &[FittedModel], validation: &[&RunRecord]) -> EvaluationReport {
    let mut scores: Vec<ModelScore> = models
        .iter()
        .map(|m| {
            let observed: Vec<f64> = validation.iter().map(|r| m.task().target(r)).collect();
            match m.task() {
                Task::Regression => {
                    let pred: Vec<f64> = validation.iter().map(|r| m.predict_mean(&r.features())).collect();
                    ModelScore {
                        model: m.kind(),
                        task: Task::Regression,
                        rmse: Some(rmse(&pred, &observed)),
                        class_errors: None,
                        class_error_rate: None,
                        rank: 0,
                    }
                }
                Task::Classification => {
                    let errors = validation
                        .iter()
                        .zip(&observed)
                        .filter(|(r, o)| m.classify(&r.features()).expect("classification model") != (**o == 1.0))
                        .count();
                    ModelScore {
                        model: m.kind(),
                        task: Task::Classification,
                        rmse: None,
                        class_errors: Some(errors),
                        class_error_rate: Some(errors as f64 / validation.len().max(1) as f64),
                        rank: 0,
                    }
                }
            }
        })
        .collect();
    for task in [Task::Regression, Task::Classification] {
        let idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].task == task).collect();
        let values: Vec<f64> = idx
            .iter()
            .map(|&i| scores[i].rmse.unwrap_or_else(|| scores[i].class_errors.unwrap_or(0) as f64))
            .collect();
        for (i, r) in idx.iter().zip(competition_ranks(&values)) {
            scores[*i].rank = r;
        }
    }
    EvaluationReport { validation_rows: validation.len(), scores }
}

impl EvaluationReport {
    pub fn score(&self, model: ModelKind, task: Task) -> Option<&ModelScore> {
        self.scores.iter().find(|s| s.model == model && s.task == task)
    }

    pub fn rmse(&self, model: ModelKind) -> Option<f64> {
        self.score(model, Task::Regression).and_then(|s| s.rmse)
    }

    pub fn class_errors(&self, model: ModelKind) -> Option<usize> {
        self.score(model, Task::Classification).and_then(|s| s.class_errors)
    }

    /// `model,task,rmse,class_errors,rank_reg,rank_cls`
    pub fn write_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.scores {
            w.serialize(EvaluationRow {
                model: s.model,
                task: s.task,
                rmse: s.rmse,
                class_errors: s.class_errors,
                rank_reg: (s.task == Task::Regression).then_some(s.rank),
                rank_cls: (s.task == Task::Classification).then_some(s.rank),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per model with both criteria side by side.
    pub fn to_markdown(&self) -> String {
        let mut kinds: Vec<ModelKind> = self.scores.iter().map(|s| s.model).collect();
        kinds.dedup();
        let mut out = String::new();
        writeln!(out, "| Model | RMSE (sparsity) | Rank | Errors (convergence, n = {}) | Rank |", self.validation_rows).unwrap();
        writeln!(out, "|---|---:|---:|---:|---:|").unwrap();
        let cell = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        for k in kinds {
            let reg = self.score(k, Task::Regression);
            let cls = self.score(k, Task::Classification);
            writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                k,
                cell(reg.and_then(|s| s.rmse).map(|v| format!("{v:.3}"))),
                cell(reg.map(|s| s.rank.to_string())),
                cell(cls.and_then(|s| s.class_errors).map(|v| v.to_string())),
                cell(cls.map(|s| s.rank.to_string())),
            )
            .unwrap();
        }
        out
    }
}

//! Explanations of fitted surrogates: impurity-based importance for tree
//! models, exact interventional Shapley values, and PDP/ICE curves.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{VarBounds, VarKind};
use crate::surrogates::tree::DecisionTree;
use crate::surrogates::FittedModel;

/// Exact enumeration visits `2^d` coalitions; beyond this it is refused.
pub const MAX_EXACT_FEATURES: usize = 12;
pub const DEFAULT_GRID_SIZE: usize = 20;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("{0} is not tree based; impurity importance needs DT or RF")]
    NotTreeBased(String),
    #[error("background set is empty")]
    EmptyBackground,
    #[error("exact Shapley enumeration limited to {MAX_EXACT_FEATURES} features, got {0}")]
    TooManyFeatures(usize),
    #[error("point has {got} features, background has {expected}")]
    Arity { expected: usize, got: usize },
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub values: Vec<f64>,
    /// Set when no tree split at all; `values` is then uniform.
    pub degenerate: bool,
}

impl Importance {
    /// Feature indices by decreasing importance.
    pub fn ranking(&self) -> Vec<usize> {
        rank_desc(&self.values)
    }
}

fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Weighted impurity decrease per feature, averaged over trees and
/// normalized to sum to one.
pub fn mdi_from_trees(trees: &[DecisionTree], n_features: usize) -> Importance {
    let mut total = vec![0.0; n_features];
    for t in trees {
        for (acc, v) in total.iter_mut().zip(t.impurity_decrease()) {
            *acc += v / trees.len() as f64;
        }
    }
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        Importance { values: total.iter().map(|v| v / sum).collect(), degenerate: false }
    } else {
        Importance { values: vec![1.0 / n_features as f64; n_features], degenerate: true }
    }
}

pub fn mdi_importance(model: &FittedModel) -> Result<Importance, ExplainError> {
    let trees = model.trees().ok_or_else(|| ExplainError::NotTreeBased(model.kind().to_string()))?;
    Ok(mdi_from_trees(trees, model.bounds().len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Mean prediction over the background.
    pub base: f64,
    pub phi: Vec<f64>,
    pub x: Vec<f64>,
    pub prediction: f64,
}

/// `|S|! (d - |S| - 1)! / d!` for every coalition size.
fn shapley_weights(d: usize) -> Vec<f64> {
    let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    (0..d).map(|s| fact(s) * fact(d - s - 1) / fact(d)).collect()
}

/// Exact Shapley values of `predict` at `x` under interventional
/// expectations over `background`.
///
/// `v(S)` is the mean of `predict` over background rows with the features in
/// `S` replaced by those of `x`; every one of the `2^d` coalitions is
/// evaluated.
pub fn exact_shap<F>(predict: &F, x: &[f64], background: &[Vec<f64>]) -> Result<Attribution, ExplainError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let d = x.len();
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if d > MAX_EXACT_FEATURES {
        return Err(ExplainError::TooManyFeatures(d));
    }
    if let Some(b) = background.iter().find(|b| b.len() != d) {
        return Err(ExplainError::Arity { expected: b.len(), got: d });
    }
    let mut value = vec![0.0; 1 << d];
    let mut point = vec![0.0; d];
    for (mask, v) in value.iter_mut().enumerate() {
        let mut acc = 0.0;
        for b in background {
            for k in 0..d {
                point[k] = if mask & (1 << k) != 0 { x[k] } else { b[k] };
            }
            acc += predict(&point);
        }
        *v = acc / background.len() as f64;
    }
    let w = shapley_weights(d);
    let phi = (0..d)
        .map(|i| {
            (0..1usize << d)
                .filter(|m| m & (1 << i) == 0)
                .map(|m| w[m.count_ones() as usize] * (value[m | (1 << i)] - value[m]))
                .sum()
        })
        .collect();
    Ok(Attribution { base: value[0], phi, x: x.to_vec(), prediction: predict(x) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapBatch {
    pub attributions: Vec<Attribution>,
    pub mean_abs_phi: Vec<f64>,
}

impl ShapBatch {
    /// Feature indices by decreasing mean |phi|.
    pub fn ranking(&self) -> Vec<usize> {
        rank_desc(&self.mean_abs_phi)
    }
}

/// Attributions for every row of `points`, computed in parallel.
pub fn shap_batch<F>(predict: &F, points: &[Vec<f64>], background: &[Vec<f64>]) -> Result<ShapBatch, ExplainError>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let attributions =
        points.par_iter().map(|x| exact_shap(predict, x, background)).collect::<Result<Vec<_>, _>>()?;
    let d = background.first().map_or(0, Vec::len);
    let mut mean_abs_phi = vec![0.0; d];
    for a in &attributions {
        for (m, p) in mean_abs_phi.iter_mut().zip(&a.phi) {
            *m += p.abs();
        }
    }
    for m in &mut mean_abs_phi {
        *m /= attributions.len().max(1) as f64;
    }
    Ok(ShapBatch { attributions, mean_abs_phi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceCurve {
    pub feature: usize,
    pub grid: Vec<f64>,
    pub pdp: Vec<f64>,
    /// `ice[r][g]`: background row `r` with the feature set to `grid[g]`.
    pub ice: Vec<Vec<f64>>,
}

/// `grid_size` evenly spaced values for a continuous variable, every level
/// for an integer one.
pub fn feature_grid(bounds: &VarBounds, grid_size: usize) -> Result<Vec<f64>, ExplainError> {
    match bounds.kind {
        VarKind::Integer => Ok((0..bounds.cardinality()).map(|k| bounds.lower + k as f64).collect()),
        VarKind::Continuous => {
            if grid_size < 2 {
                return Err(ExplainError::GridTooSmall(grid_size));
            }
            let step = bounds.width() / (grid_size - 1) as f64;
            Ok((0..grid_size).map(|g| if g + 1 == grid_size { bounds.upper } else { bounds.lower + g as f64 * step }).collect())
        }
    }
}

/// Mean of the ICE rows at each grid value.
pub fn column_means(ice: &[Vec<f64>], width: usize) -> Vec<f64> {
    (0..width).map(|g| ice.iter().map(|row| row[g]).sum::<f64>() / ice.len() as f64).collect()
}

pub fn pdp_ice<F>(predict: &F, feature: usize, grid: &[f64], background: &[Vec<f64>]) -> Result<DependenceCurve, ExplainError>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if grid.len() < 2 {
        return Err(ExplainError::GridTooSmall(grid.len()));
    }
    let ice: Vec<Vec<f64>> = background
        .par_iter()
        .map(|b| {
            let mut point = b.clone();
            grid.iter()
                .map(|&g| {
                    point[feature] = g;
                    predict(&point)
                })
                .collect()
        })
        .collect();
    let pdp = column_means(&ice, grid.len());
    Ok(DependenceCurve { feature, grid: grid.to_vec(), pdp, ice })
}

#[derive(Serialize)]
struct ShapRow<'a> {
    row: usize,
    feature: &'a str,
    phi: f64,
    base: f64,
    prediction: f64,
}

/// Long format: one line per (row, feature).
pub fn write_shap_csv(batch: &ShapBatch, names: &[&str], path: &Path) -> Result<(), ExplainError> {
    let mut w = csv::Writer::from_path(path)?;
    for (row, a) in batch.attributions.iter().enumerate() {
        for (phi, feature) in a.phi.iter().zip(names) {
            w.serialize(ShapRow { row, feature, phi: *phi, base: a.base, prediction: a.prediction })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ImportanceRow<'a> {
    feature: &'a str,
    mdi: Option<f64>,
    mean_abs_shap: Option<f64>,
    mdi_degenerate: Option<bool>,
}

/// `feature,mdi,mean_abs_shap,mdi_degenerate`; either source may be absent.
pub fn write_importance_csv(
    names: &[&str],
    mdi: Option<&Importance>,
    shap: Option<&ShapBatch>,
    path: &Path,
) -> Result<(), ExplainError> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, feature) in names.iter().enumerate() {
        w.serialize(ImportanceRow {
            feature,
            mdi: mdi.map(|m| m.values[i]),
            mean_abs_shap: shap.map(|s| s.mean_abs_phi[i]),
            mdi_degenerate: mdi.map(|m| m.degenerate),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `grid`, `ice_0 .. ice_{n-1}`, `pdp`.
pub fn write_pdp_ice_csv(curve: &DependenceCurve, path: &Path) -> Result<(), ExplainError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["grid".to_string()];
    header.extend((0..curve.ice.len()).map(|r| format!("ice_{r}")));
    header.push("pdp".into());
    w.write_record(&header)?;
    for (g, value) in curve.grid.iter().enumerate() {
        let mut rec = vec![value.to_string()];
        rec.extend(curve.ice.iter().map(|row| row[g].to_string()));
        rec.push(curve.pdp[g].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

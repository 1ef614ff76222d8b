//! Screening statistics: Pearson correlation, one-way ANOVA, and the dataset
//! summary.

use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::space::{scenario_bounds, VarKind, FEATURE_NAMES};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("within-group variance is zero")]
    ZeroWithinVariance,
    #[error("need at least 2 groups")]
    TooFewGroups,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One-way ANOVA result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anova {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
}

/// Upper tail of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// One-way ANOVA over explicit groups.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<Anova, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    if n <= k {
        return Err(StatsError::TooFew { needed: k + 1, got: n });
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let (mut ss_between, mut ss_within) = (0.0, 0.0);
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    if ss_within == 0.0 {
        return Err(StatsError::ZeroWithinVariance);
    }
    let (df_between, df_within) = (k - 1, n - k);
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    let p = f_survival(f, df_between as f64, df_within as f64).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(Anova { f, p, df_between, df_within })
}

/// ANOVA of `output` grouped into `groups` equal-count quantile bins of
/// `feature` (ranked by value, ties by position).
pub fn anova_f(feature: &[f64], output: &[f64], groups: usize) -> Result<Anova, StatsError> {
    if feature.len() != output.len() {
        return Err(StatsError::LengthMismatch(feature.len(), output.len()));
    }
    if groups < 2 {
        return Err(StatsError::TooFewGroups);
    }
    let n = feature.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| feature[a].total_cmp(&feature[b]).then(a.cmp(&b)));
    let mut bins = vec![Vec::new(); groups];
    for (rank, &i) in order.iter().enumerate() {
        bins[rank * groups / n.max(1)].push(output[i]);
    }
    one_way_anova(&bins)
}

/// ANOVA of `output` with one group per distinct level of `feature`.
pub fn anova_by_levels(feature: &[f64], output: &[f64]) -> Result<Anova, StatsError> {
    if feature.len() != output.len() {
        return Err(StatsError::LengthMismatch(feature.len(), output.len()));
    }
    let mut levels: Vec<f64> = feature.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let groups: Vec<Vec<f64>> = levels
        .iter()
        .map(|l| feature.iter().zip(output).filter(|(f, _)| *f == l).map(|(_, o)| *o).collect())
        .collect();
    one_way_anova(&groups)
}

/// Quantile bins used for continuous features.
pub const DEFAULT_ANOVA_BINS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScreening {
    pub feature: String,
    pub pearson_sparsity: Option<f64>,
    pub pearson_converged: Option<f64>,
    pub anova_sparsity: Option<Anova>,
    pub anova_converged: Option<Anova>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub designs: usize,
    pub converged: usize,
    pub not_converged: usize,
    pub converged_fraction: f64,
    pub mean_sparsity_converged: Option<f64>,
    pub mean_sparsity_not_converged: Option<f64>,
    /// Designs whose repetitions disagree on convergence.
    pub partially_converging_designs: usize,
    /// Absent when fewer than two runs exist.
    pub screening: Option<Vec<FeatureScreening>>,
}

pub fn summarize(dataset: &Dataset) -> Result<Summary, crate::dataset::DatasetError> {
    let records = dataset.records();
    if records.is_empty() {
        return Err(crate::dataset::DatasetError::Empty);
    }
    let runs = records.len();
    let converged = records.iter().filter(|r| r.converged).count();
    let class_mean = |flag: bool| {
        let v: Vec<f64> = records.iter().filter(|r| r.converged == flag).map(|r| r.sparsity).collect();
        (!v.is_empty()).then(|| mean(&v))
    };
    let aggregates = Dataset::aggregates(records);
    let partially = aggregates
        .iter()
        .filter(|a| a.converged_fraction > 0.0 && a.converged_fraction < 1.0)
        .count();

    let screening = (runs >= 2).then(|| {
        let sparsity: Vec<f64> = records.iter().map(|r| r.sparsity).collect();
        let conv: Vec<f64> = records.iter().map(|r| r.converged_indicator()).collect();
        scenario_bounds()
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let x: Vec<f64> = records.iter().map(|r| r.features()[k]).collect();
                let anova = |y: &[f64]| match b.kind {
                    VarKind::Integer => anova_by_levels(&x, y).ok(),
                    VarKind::Continuous => anova_f(&x, y, DEFAULT_ANOVA_BINS).ok(),
                };
                FeatureScreening {
                    feature: FEATURE_NAMES[k].to_string(),
                    pearson_sparsity: pearson(&x, &sparsity).ok(),
                    pearson_converged: pearson(&x, &conv).ok(),
                    anova_sparsity: anova(&sparsity),
                    anova_converged: anova(&conv),
                }
            })
            .collect()
    });

    Ok(Summary {
        runs,
        designs: aggregates.len(),
        converged,
        not_converged: runs - converged,
        converged_fraction: converged as f64 / runs as f64,
        mean_sparsity_converged: class_mean(true),
        mean_sparsity_not_converged: class_mean(false),
        partially_converging_designs: partially,
        screening,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RunRecord;
    use crate::space::ScenarioParams;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &up).unwrap() - 1.0).abs() <= 1e-12);
        assert!((pearson(&x, &down).unwrap() + 1.0).abs() <= 1e-12);
        // sxy = 4, sxx = syy = 5
        assert!((pearson(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(pearson(&x, &[1.0; 4]), Err(StatsError::ZeroVariance));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(StatsError::TooFew { needed: 2, got: 1 }));
    }

    #[test]
    fn anova_identical_means() {
        let a = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]]).unwrap();
        assert_eq!(a.f, 0.0);
        assert_eq!(a.p, 1.0);
    }

    #[test]
    fn anova_separated_groups() {
        let eps = 1e-6;
        let a = one_way_anova(&[vec![0.0, eps, 0.0], vec![1.0, 1.0, 1.0 + eps]]).unwrap();
        assert!(a.f > 1e10);
        assert!(a.p < 1e-12 && a.p > 0.0);
        assert_eq!(
            one_way_anova(&[vec![0.0, 0.0], vec![1.0, 1.0]]),
            Err(StatsError::ZeroWithinVariance)
        );
        assert_eq!(one_way_anova(&[vec![0.0, 1.0], vec![]]), Err(StatsError::EmptyGroup(1)));
    }

    #[test]
    fn anova_matches_hand_sums_of_squares() {
        // groups {1,2,3}, {4,5,6}, {7,8,9}: grand mean 5
        // SSB = 3(9 + 0 + 9) = 54, SSW = 3 * 2 = 6
        // F = (54/2) / (6/6) = 27
        let groups = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let a = one_way_anova(&groups).unwrap();
        assert!((a.f - 27.0).abs() < 1e-12);
        assert_eq!((a.df_between, a.df_within), (2, 6));
        // F(2, 6) survival has the closed form (1 + F/3)^-3
        assert!((a.p - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn f_survival_closed_forms() {
        // d1 = 2: S(f) = (1 + 2f/d2)^(-d2/2)
        for &(f, d2) in &[(0.5f64, 4.0f64), (3.0, 10.0), (12.0, 7.0)] {
            let exact = (1.0 + 2.0 * f / d2).powf(-d2 / 2.0);
            assert!((f_survival(f, 2.0, d2) - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn quantile_bins_group_by_rank() {
        let x = [0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6];
        let y = [0.0, 1.0, 0.1, 1.1, 0.0, 1.0, 0.1, 0.9];
        let a = anova_f(&x, &y, 2).unwrap();
        let direct = one_way_anova(&[vec![0.0, 0.1, 0.0, 0.1], vec![1.0, 1.1, 1.0, 0.9]]).unwrap();
        assert!((a.f - direct.f).abs() < 1e-12);
        let levels = anova_by_levels(&[2.0, 3.0, 2.0, 3.0], &[1.0, 5.0, 2.0, 6.0]).unwrap();
        assert!(levels.f > 0.0);
    }

    fn rec(i: usize, converged: bool, sparsity: f64) -> RunRecord {
        RunRecord {
            design_index: i / 2,
            tier: 0,
            repetition: i % 2,
            seed: i as u64,
            params: ScenarioParams::new(2 + (i % 4) as u32, 0.1 + 0.05 * i as f64, 0.05 * i as f64, 10 + i, 1 + (i % 3) as u32).unwrap(),
            converged,
            iterations: 1,
            sparsity,
            similarity: 0.5,
            wall_time_ms: 0,
        }
    }

    #[test]
    fn summary_counts_and_partial_designs() {
        let rs = (0..8).map(|i| rec(i, i % 4 != 1, i as f64)).collect();
        let s = summarize(&Dataset::new(rs).unwrap()).unwrap();
        assert_eq!((s.runs, s.designs, s.converged), (8, 4, 6));
        assert_eq!(s.partially_converging_designs, 2);
        assert_eq!(s.mean_sparsity_not_converged, Some(3.0));
        let screening = s.screening.unwrap();
        assert_eq!(screening.len(), 5);
        assert!(screening[2].pearson_converged.is_some());
    }

    #[test]
    fn degenerate_summaries() {
        let single = summarize(&Dataset::new(vec![rec(0, true, 1.0)]).unwrap()).unwrap();
        assert!(single.screening.is_none());
        assert_eq!(single.mean_sparsity_not_converged, None);
        let all = summarize(&Dataset::new((0..4).map(|i| rec(i, true, i as f64)).collect()).unwrap()).unwrap();
        assert_eq!(all.mean_sparsity_not_converged, None);
        assert!(all.screening.unwrap().iter().all(|f| f.pearson_converged.is_none()));
        assert!(summarize(&Dataset::new(vec![]).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn pearson_affine_and_symmetric(
            x in proptest::collection::vec(-100.0f64..100.0, 3..40),
            y in proptest::collection::vec(-100.0f64..100.0, 40),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let y = &y[..x.len()];
            if let Ok(r) = pearson(&x, y) {
                prop_assert!((-1.0..=1.0).contains(&r));
                prop_assert!((r - pearson(y, &x).unwrap()).abs() < 1e-12);
                let pos: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let neg: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
                prop_assert!((pearson(&x, &pos).unwrap() - 1.0).abs() <= 1e-12);
                prop_assert!((pearson(&x, &neg).unwrap() + 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn anova_f_nonnegative_p_in_unit_interval(
            y in proptest::collection::vec(-10.0f64..10.0, 12..60),
        ) {
            let x: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
            if let Ok(a) = anova_f(&x, &y, 4) {
                prop_assert!(a.f >= 0.0);
                prop_assert!(a.p > 0.0 && a.p <= 1.0);
            }
        }
    }
}

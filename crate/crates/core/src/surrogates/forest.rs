use rand::Rng;

use super::tree::{Criterion, DecisionTree, TreeParams};
use crate::rng::{derive_seed, rng_from_seed};

/// Bagged CART ensemble with per-split feature subsampling.
#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Tree `t` is grown from its own generator seeded by `(seed, t)`, so the
    /// fitted state does not depend on scheduling.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        n_trees: usize,
        criterion: Criterion,
        params: &TreeParams,
        seed: u64,
    ) -> Self {
        let n = x.len();
        let trees = (0..n_trees.max(1))
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed(&[seed, t as u64]));
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTree::fit(x, y, sample, criterion, params, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn from_trees(trees: Vec<DecisionTree>) -> Self {
        RandomForest { trees }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    /// Arithmetic mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let p = self.tree_predictions(x);
        p.iter().sum::<f64>() / p.len() as f64
    }

    /// Sample variance of the tree predictions (0 for a single tree).
    pub fn variance(&self, x: &[f64]) -> f64 {
        let p = self.tree_predictions(x);
        if p.len() < 2 {
            return 0.0;
        }
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (p.len() - 1) as f64
    }

    /// Fraction of trees whose leaf votes for the positive class.
    pub fn vote_fraction(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict(x) >= 0.5).count();
        votes as f64 / self.trees.len() as f64
    }

    /// Majority vote; an exact tie goes to the positive class.
    pub fn classify(&self, x: &[f64]) -> bool {
        self.vote_fraction(x) >= 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> =
            (0..60).map(|i| vec![(i as f64 * 0.37).fract(), (i as f64 * 0.61).fract(), (i as f64 * 0.17).fract()]).collect();
        let y = x.iter().map(|p| 3.0 * p[0] + (6.0 * p[1]).sin()).collect();
        (x, y)
    }

    #[test]
    fn mean_of_trees_and_order_invariance() {
        let (x, y) = data();
        let rf = RandomForest::fit(&x, &y, 25, Criterion::Variance, &TreeParams { max_features: Some(1), ..Default::default() }, 9);
        let q = [0.3, 0.7, 0.2];
        let manual: f64 = rf.trees().iter().map(|t| t.predict(&q)).sum::<f64>() / 25.0;
        assert_eq!(rf.predict(&q), manual);
        let mut reversed = rf.trees().to_vec();
        reversed.reverse();
        let rev = RandomForest::from_trees(reversed);
        assert!((rev.predict(&q) - rf.predict(&q)).abs() < 1e-12);
        let again = RandomForest::fit(&x, &y, 25, Criterion::Variance, &TreeParams { max_features: Some(1), ..Default::default() }, 9);
        assert_eq!(again.predict(&q), rf.predict(&q));
    }

    #[test]
    fn agreeing_trees_have_zero_variance() {
        let (x, _) = data();
        let rf = RandomForest::fit(&x, &[2.0; 60], 10, Criterion::Variance, &TreeParams::default(), 1);
        assert_eq!(rf.variance(&[0.5, 0.5, 0.5]), 0.0);
    }

    #[test]
    fn majority_vote() {
        let x: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0]];
        let yes = DecisionTree::fit(&x, &[1.0, 1.0], vec![0, 1], Criterion::Gini, &TreeParams::default(), &mut rng_from_seed(0));
        let no = DecisionTree::fit(&x, &[0.0, 0.0], vec![0, 1], Criterion::Gini, &TreeParams::default(), &mut rng_from_seed(0));
        let mut trees = vec![no; 60];
        trees.extend(std::iter::repeat_n(yes, 40));
        let rf = RandomForest::from_trees(trees);
        assert!(!rf.classify(&[0.5]));
        assert!((rf.vote_fraction(&[0.5]) - 0.4).abs() < 1e-12);
    }
}

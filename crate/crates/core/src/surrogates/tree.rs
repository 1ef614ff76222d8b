//! CART decision trees.
//!
//! Binary splits `x[f] ≤ t` chosen greedily to maximize the weighted impurity
//! decrease. Regression uses the within-node variance, classification the
//! Gini index of the binary label. Thresholds are midpoints between
//! consecutive distinct values.

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Variance,
    Gini,
}

impl Criterion {
    /// Impurity of a node from the count, sum and sum of squares of its
    /// targets (labels are 0/1 for Gini).
    fn impurity(self, n: f64, sum: f64, sum_sq: f64) -> f64 {
        if n == 0.0 {
            return 0.0;
        }
        match self {
            Criterion::Variance => (sum_sq / n - (sum / n).powi(2)).max(0.0),
            Criterion::Gini => {
                let p = sum / n;
                2.0 * p * (1.0 - p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: None, min_samples_split: 2, min_samples_leaf: 1, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        /// Mean target (positive-class fraction for classification).
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
        /// `(n·I − nₗ·Iₗ − nᵣ·Iᵣ) / n_root`.
        weighted_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    criterion: Criterion,
}

struct Builder<'a, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a TreeParams,
    criterion: Criterion,
    rng: &'a mut R,
    nodes: Vec<Node>,
    root_samples: f64,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl<R: Rng> Builder<'_, R> {
    fn stats(&self, idx: &[usize]) -> (f64, f64, f64) {
        idx.iter().fold((0.0, 0.0, 0.0), |(n, s, q), &i| (n + 1.0, s + self.y[i], q + self.y[i] * self.y[i]))
    }

    fn best_split_on(&self, idx: &[usize], feature: usize, parent: f64) -> Option<BestSplit> {
        let mut order = idx.to_vec();
        order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
        let (n, total, total_sq) = self.stats(&order);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let (mut ln, mut ls, mut lq) = (0.0, 0.0, 0.0);
        let mut best: Option<(usize, f64)> = None;
        for pos in 0..order.len() - 1 {
            let yi = self.y[order[pos]];
            ln += 1.0;
            ls += yi;
            lq += yi * yi;
            let here = self.x[order[pos]][feature];
            let next = self.x[order[pos + 1]][feature];
            if here == next || (pos + 1) < min_leaf || order.len() - pos - 1 < min_leaf {
                continue;
            }
            let rn = n - ln;
            let child = ln * self.criterion.impurity(ln, ls, lq)
                + rn * self.criterion.impurity(rn, total - ls, total_sq - lq);
            let decrease = n * parent - child;
            if best.is_none_or(|(_, d)| decrease > d) {
                best = Some((pos, decrease));
            }
        }
        let (pos, decrease) = best?;
        let (lo, hi) = (self.x[order[pos]][feature], self.x[order[pos + 1]][feature]);
        let mut threshold = lo + (hi - lo) / 2.0;
        if threshold >= hi {
            threshold = lo;
        }
        let right = order.split_off(pos + 1);
        Some(BestSplit { feature, threshold, decrease, left: order, right })
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (n, sum, sum_sq) = self.stats(&idx);
        let impurity = self.criterion.impurity(n, sum, sum_sq);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: sum / n, samples: idx.len() });

        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        if !depth_ok || idx.len() < self.params.min_samples_split.max(2) || impurity <= 1e-14 {
            return id;
        }

        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(self.rng);
        let wanted = self.params.max_features.unwrap_or(d).clamp(1, d);
        let mut best: Option<BestSplit> = None;
        for (visited, &f) in features.iter().enumerate() {
            // past the quota, keep looking only until some split exists
            if visited >= wanted && best.is_some() {
                break;
            }
            if let Some(s) = self.best_split_on(&idx, f, impurity) {
                if best.as_ref().is_none_or(|b| s.decrease > b.decrease) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else { return id };

        let weighted_decrease = split.decrease / self.root_samples;
        let left = self.build(split.left, depth + 1);
        let right = self.build(split.right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            samples: idx.len(),
            weighted_decrease,
        };
        id
    }
}

impl DecisionTree {
    /// Grows a tree on the rows listed in `sample` (repeats allowed, as in a
    /// bootstrap draw).
    pub fn fit<R: Rng>(
        x: &[Vec<f64>],
        y: &[f64],
        sample: Vec<usize>,
        criterion: Criterion,
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let root_samples = sample.len() as f64;
        let mut b = Builder { x, y, params, criterion, rng, nodes: Vec::new(), root_samples };
        b.build(sample, 0);
        DecisionTree { nodes: b.nodes, n_features: x[0].len(), criterion }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    /// Leaf value reached by `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Summed weighted impurity decrease per feature (not normalized).
    pub fn impurity_decrease(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for node in &self.nodes {
            if let Node::Split { feature, weighted_decrease, .. } = node {
                out[*feature] += weighted_decrease;
            }
        }
        out
    }

    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn shatters_distinct_inputs() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).fract(), (i as f64 * 0.11).fract()]).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 7) % 3) as f64).collect();
        let tree = DecisionTree::fit(&x, &y, (0..40).collect(), Criterion::Variance, &TreeParams::default(), &mut rng_from_seed(0));
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(tree.predict(xi), *yi);
        }
        let labels: Vec<f64> = (0..40).map(|i| ((i * 5) % 2) as f64).collect();
        let tree = DecisionTree::fit(&x, &labels, (0..40).collect(), Criterion::Gini, &TreeParams::default(), &mut rng_from_seed(0));
        assert!(x.iter().zip(&labels).all(|(xi, yi)| tree.predict(xi) == *yi));
    }

    #[test]
    fn single_informative_feature_gets_all_decrease() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![0.5, 0.5, i as f64 / 20.0, 0.5, 0.5]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
        let tree = DecisionTree::fit(&x, &y, (0..20).collect(), Criterion::Gini, &TreeParams::default(), &mut rng_from_seed(4));
        assert_eq!(tree.split_count(), 1);
        let imp = tree.impurity_decrease();
        assert_eq!(imp[0], 0.0);
        // root Gini 0.5, children pure
        assert!((imp[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_target_gives_a_stump() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let tree = DecisionTree::fit(&x, &[3.0; 10], (0..10).collect(), Criterion::Variance, &TreeParams::default(), &mut rng_from_seed(1));
        assert_eq!(tree.split_count(), 0);
        assert_eq!(tree.predict(&[4.0]), 3.0);
    }

    #[test]
    fn max_depth_is_honoured() {
        let x: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..64).map(|i| (i % 2) as f64).collect();
        let params = TreeParams { max_depth: Some(3), ..Default::default() };
        let tree = DecisionTree::fit(&x, &y, (0..64).collect(), Criterion::Variance, &params, &mut rng_from_seed(1));
        assert!(tree.depth() <= 3);
    }
}

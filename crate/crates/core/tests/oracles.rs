//! Production code checked against independent reference computations.

mod common;

use proptest::prelude::*;
use segsur::explain::exact_shap;
use segsur::rng::rng_from_seed;
use segsur::schelling::{sparsity, Grid};
use segsur::space::scenario_bounds;
use segsur::surrogates::gp::{GaussianProcess, KernelFamily};
use segsur::surrogates::neighbors::InverseDistance;
use segsur::surrogates::{fit, ModelKind, ModelSpec, Task};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (dst, src) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

#[test]
fn gp_mean_matches_universal_kriging_system() {
    // dual form: [[R, F], [Fᵀ, 0]] [w; μ] = [r(x); f(x)], prediction wᵀy
    let xs = [0.1, 0.45, 0.9];
    let ys = [1.0, -0.5, 2.0];
    let ell: f64 = 0.3;
    let corr = |a: f64, b: f64| (-0.5 * ((a - b) / ell).powi(2)).exp();
    let x: Vec<Vec<f64>> = xs.iter().map(|v| vec![*v]).collect();
    let gp = GaussianProcess::with_hyperparameters(KernelFamily::SquaredExponential, &x, &ys, None, vec![ell], 2.5).unwrap();
    for q in [0.0, 0.2, 0.3, 0.6, 0.75, 1.0] {
        let mut a = vec![vec![0.0; 5]; 5];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = corr(xs[i], xs[j]);
            }
            a[i][3] = 1.0;
            a[i][4] = xs[i];
            a[3][i] = 1.0;
            a[4][i] = xs[i];
        }
        let rhs = vec![corr(q, xs[0]), corr(q, xs[1]), corr(q, xs[2]), 1.0, q];
        let w = gauss_solve(a, rhs);
        let expected: f64 = (0..3).map(|i| w[i] * ys[i]).sum();
        assert!((gp.predict(&[q]) - expected).abs() < 1e-9, "at {q}: {} vs {expected}", gp.predict(&[q]));
    }
    for (xi, yi) in x.iter().zip(&ys) {
        assert!((gp.predict(xi) - yi).abs() < 1e-9);
        assert!(gp.variance(xi) <= 1e-8);
    }
    assert!((gp.variance(&[50.0]) - 2.5).abs() < 1e-9);
}

#[test]
fn gp_search_does_not_lose_to_its_initial_guess() {
    let mut rng = rng_from_seed(4);
    use rand::Rng;
    let x: Vec<Vec<f64>> = (0..25).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<f64> = x.iter().map(|p| (6.0 * p[0]).sin() + p[1]).collect();
    let noise = vec![1e-3; 25];
    let gp = GaussianProcess::fit(KernelFamily::SquaredExponential, &x, &y, Some(&noise), &Default::default(), 9).unwrap();
    assert!(gp.log_likelihood() >= gp.initial_log_likelihood());
}

/// Shapley values as the average marginal contribution over all orderings.
fn permutation_shapley(f: &dyn Fn(&[f64]) -> f64, x: &[f64], bg: &[Vec<f64>]) -> Vec<f64> {
    let d = x.len();
    let value = |set: &[bool]| {
        bg.iter()
            .map(|b| f(&(0..d).map(|k| if set[k] { x[k] } else { b[k] }).collect::<Vec<_>>()))
            .sum::<f64>()
            / bg.len() as f64
    };
    let mut order: Vec<usize> = (0..d).collect();
    let mut phi = vec![0.0; d];
    let mut count = 0.0;
    // Heap's algorithm
    fn heap(k: usize, order: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if k == 1 {
            visit(order);
            return;
        }
        for i in 0..k {
            heap(k - 1, order, visit);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            order.swap(j, k - 1);
        }
    }
    heap(d, &mut order, &mut |perm| {
        let mut set = vec![false; d];
        let mut prev = value(&set);
        for &i in perm {
            set[i] = true;
            let next = value(&set);
            phi[i] += next - prev;
            prev = next;
        }
        count += 1.0;
    });
    phi.iter().map(|p| p / count).collect()
}

#[test]
fn tree_model_shap_matches_permutation_oracle() {
    use rand::Rng;
    let bounds = scenario_bounds();
    let mut rng = rng_from_seed(12);
    let x: Vec<Vec<f64>> = (0..120).map(|_| bounds.iter().map(|b| b.from_unit(rng.random())).collect()).collect();
    let y: Vec<f64> = x.iter().map(|p| p[1] * 8.0 + if p[2] > 0.5 { 3.0 } else { 0.0 } + p[4] * p[0] * 0.1).collect();
    for kind in [ModelKind::Dt, ModelKind::Rf] {
        let spec = ModelSpec::new(kind, Task::Regression).with_seed(2);
        let m = fit(&spec, &bounds, &x, &y, None).unwrap();
        let f = |p: &[f64]| m.predict_mean(p);
        let bg = &x[..15];
        for q in &x[100..104] {
            let attr = exact_shap(&f, q, bg).unwrap();
            let oracle = permutation_shapley(&f, q, bg);
            for (a, o) in attr.phi.iter().zip(&oracle) {
                assert!((a - o).abs() <= 1e-10, "{kind}: {a} vs {o}");
            }
        }
    }
}

fn random_grid(seed: u64) -> (Grid, usize) {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    let side = rng.random_range(3..=12);
    let types = rng.random_range(1..=5u8);
    let density: f64 = rng.random_range(0.0..=1.0);
    let mut cells: Vec<Option<u8>> =
        (0..side * side).map(|_| (rng.random::<f64>() < density).then(|| rng.random_range(0..types))).collect();
    cells[0] = Some(0);
    (Grid::from_cells(side, cells), rng.random_range(1..=10))
}

proptest! {
    #[test]
    fn sparsity_matches_brute_force(seed in any::<u64>()) {
        let (grid, r) = random_grid(seed);
        prop_assert_eq!(sparsity(&grid, r).unwrap(), common::brute_sparsity(&grid, r));
    }

    #[test]
    fn idw_stays_within_target_range(seed in any::<u64>(), q in prop::collection::vec(0.0f64..1.0, 3)) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let x: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(-10.0..10.0)).collect();
        let v = InverseDistance::new(&x, &y, 2.0).predict(&q);
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }
}

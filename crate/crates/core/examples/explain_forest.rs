//! MDI, exact Shapley values and PDP for a random forest on a synthetic
//! response where density and intolerance matter and map size does not.
//!
//! cargo run --release --example explain_forest

use rand::Rng;
use segsur::explain::{feature_grid, mdi_importance, pdp_ice, shap_batch};
use segsur::rng::rng_from_seed;
use segsur::space::{scenario_bounds, FEATURE_NAMES};
use segsur::surrogates::{fit, ModelKind, ModelSpec, Task};

fn main() {
    let bounds = scenario_bounds();
    let mut rng = rng_from_seed(3);
    let x: Vec<Vec<f64>> = (0..300).map(|_| bounds.iter().map(|b| b.from_unit(rng.random())).collect()).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|p| 10.0 * (1.0 - p[1]) + if p[2] > 0.6 { 4.0 } else { 0.0 } + 0.3 * p[4] + rng.random_range(-0.5..0.5))
        .collect();

    let model = fit(&ModelSpec::new(ModelKind::Rf, Task::Regression).with_seed(1), &bounds, &x, &y, None).unwrap();
    let predict = |p: &[f64]| model.predict_mean(p);

    let mdi = mdi_importance(&model).unwrap();
    let shap = shap_batch(&predict, &x[..40], &x[..100]).unwrap();
    println!("{:<12} {:>8} {:>10}", "feature", "MDI", "mean|phi|");
    for (i, name) in FEATURE_NAMES.iter().enumerate() {
        println!("{:<12} {:>8.3} {:>10.3}", name, mdi.values[i], shap.mean_abs_phi[i]);
    }

    let a = &shap.attributions[0];
    println!("\nrow 0: base {:.3} + Σphi {:.3} = {:.3} (model says {:.3})", a.base, a.phi.iter().sum::<f64>(), a.base + a.phi.iter().sum::<f64>(), a.prediction);

    let grid = feature_grid(&bounds[1], 10).unwrap();
    let curve = pdp_ice(&predict, 1, &grid, &x[..100]).unwrap();
    println!("\npartial dependence on density:");
    for (g, v) in curve.grid.iter().zip(&curve.pdp) {
        println!("  {g:5.2}  {v:7.3}  {}", "*".repeat((v * 3.0).max(0.0) as usize));
    }
}

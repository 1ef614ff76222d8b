//! Trains the eight surrogates on tier 0 of a nested design and ranks them on
//! the remaining tiers.
//!
//! cargo run --release --example surrogate_benchmark -- [points]
//! (200 points reproduces the reference protocol: 250 training runs, 750
//! validation runs)

use rayon::prelude::*;
use segsur::dataset::Dataset;
use segsur::doe::{design_rows, expand_repetitions, generate_nested_lhs, DesignSpec};
use segsur::pipeline::execute_run;
use segsur::schelling::DEFAULT_MAX_ITERATIONS;
use segsur::space::scenario_bounds;
use segsur::surrogates::evaluate::evaluate;
use segsur::surrogates::{fit_roster, ModelKind, ModelSpec, Task};

fn main() {
    let n: usize = std::env::args().nth(1).map_or(100, |a| a.parse().expect("point count"));
    let spec = DesignSpec { sizes: vec![n / 4, n / 2, n], ..DesignSpec::default() };
    let design = generate_nested_lhs(&spec).expect("sizes must nest");
    let points: Vec<_> = design_rows(&design).unwrap().iter().map(|r| (r.index, r.tier, r.params().unwrap())).collect();
    let runs = expand_repetitions(&points, spec.repetitions, spec.seed);
    eprintln!("simulating {} runs...", runs.len());
    let entries: Vec<_> = runs.par_iter().map(|d| execute_run(d, DEFAULT_MAX_ITERATIONS, false)).collect();
    let ds = Dataset::from_entries(entries).unwrap();

    let specs: Vec<ModelSpec> = ModelKind::ALL
        .iter()
        .flat_map(|&k| [Task::Regression, Task::Classification].map(|t| ModelSpec::new(k, t).with_seed(1)))
        .collect();
    let mut models = Vec::new();
    for (spec, fitted) in specs.iter().zip(fit_roster(&specs, &scenario_bounds(), &ds)) {
        match fitted {
            Ok(m) => models.push(m),
            Err(e) => eprintln!("{} {}: {e}", spec.kind, spec.task),
        }
    }
    println!("{} training runs, {} validation runs\n", ds.train().len(), ds.validation().len());
    print!("{}", evaluate(&models, &ds.validation()).to_markdown());

    if let Some(gp) = models.iter().find(|m| m.kind() == ModelKind::Gp && m.task() == Task::Regression) {
        let inner = gp.gaussian_process().unwrap();
        println!("\nGP lengthscales (unit inputs): {:.3?}", inner.lengthscales());
        let q = [3.0, 0.5, 0.5, 25.0, 5.0];
        println!("GP at {q:?}: mean {:.3}, variance {:.3}", gp.predict_mean(&q), gp.predict_variance(&q).unwrap());
    }
}

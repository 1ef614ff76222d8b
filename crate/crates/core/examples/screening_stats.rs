//! Simulates a small nested design and prints the Pearson/ANOVA screening.
//!
//! cargo run --release --example screening_stats -- [points]

use segsur::dataset::Dataset;
use segsur::doe::{design_rows, expand_repetitions, generate_nested_lhs, DesignSpec};
use segsur::pipeline::execute_run;
use segsur::schelling::DEFAULT_MAX_ITERATIONS;
use segsur::stats::summarize;
use rayon::prelude::*;

fn main() {
    let points: usize = std::env::args().nth(1).map_or(60, |a| a.parse().expect("point count"));
    let spec = DesignSpec { sizes: vec![points / 2, points], ..DesignSpec::default() };
    let design = generate_nested_lhs(&spec).expect("valid spec");
    let rows: Vec<_> = design_rows(&design).unwrap().iter().map(|r| (r.index, r.tier, r.params().unwrap())).collect();
    let runs = expand_repetitions(&rows, spec.repetitions, spec.seed);

    let entries: Vec<_> = runs.par_iter().map(|d| execute_run(d, DEFAULT_MAX_ITERATIONS, false)).collect();
    let summary = summarize(&Dataset::from_entries(entries).unwrap()).unwrap();

    println!(
        "{} runs over {} designs: {} converged ({:.1}%), {} designs partially converging",
        summary.runs,
        summary.designs,
        summary.converged,
        100.0 * summary.converged_fraction,
        summary.partially_converging_designs
    );
    println!(
        "mean sparsity: converged {:.2}, not converged {:.2}\n",
        summary.mean_sparsity_converged.unwrap_or(f64::NAN),
        summary.mean_sparsity_not_converged.unwrap_or(f64::NAN)
    );
    println!("{:<12} {:>10} {:>10} {:>12} {:>12}", "feature", "r(spars.)", "r(conv.)", "ANOVA p sp.", "ANOVA p cv.");
    for s in summary.screening.unwrap_or_default() {
        let p = |a: &Option<segsur::stats::Anova>| a.as_ref().map_or(f64::NAN, |a| a.p);
        println!(
            "{:<12} {:>10.3} {:>10.3} {:>12.2e} {:>12.2e}",
            s.feature,
            s.pearson_sparsity.unwrap_or(f64::NAN),
            s.pearson_converged.unwrap_or(f64::NAN),
            p(&s.anova_sparsity),
            p(&s.anova_converged)
        );
    }
}

//! One Schelling run, printing the grid before and after.
//!
//! cargo run --example simulate_scenario -- [intolerance] [seed]

use segsur::schelling::{similarity, sparsity, Simulation, DEFAULT_MAX_ITERATIONS};
use segsur::space::ScenarioParams;

fn render(grid: &segsur::schelling::Grid) -> String {
    let glyphs = ['o', 'x', '+', '#', '@'];
    let mut out = String::new();
    for row in 0..grid.side() {
        for col in 0..grid.side() {
            out.push(grid.get((row, col)).map_or('.', |t| glyphs[t as usize]));
        }
        out.push('\n');
    }
    out
}

fn main() {
    let mut args = std::env::args().skip(1);
    let intolerance: f64 = args.next().map_or(0.5, |a| a.parse().expect("intolerance"));
    let seed: u64 = args.next().map_or(7, |a| a.parse().expect("seed"));
    let params = ScenarioParams::new(2, 0.8, intolerance, 30, 2).expect("valid scenario");
    let r = params.perception as usize;

    let mut sim = Simulation::new(params, seed);
    println!("{}sparsity {:.3}, similarity {:.3}\n", render(sim.grid()), sparsity(sim.grid(), r).unwrap(), similarity(sim.grid(), r).unwrap());

    let mut converged = false;
    while sim.iteration() < DEFAULT_MAX_ITERATIONS {
        let report = sim.step();
        if sim.iteration() <= 5 || report.moved_count() == 0 {
            println!("iteration {:4}: {} unhappy, {} moved", sim.iteration(), report.unsatisfied.len(), report.moved_count());
        }
        if report.moved_count() == 0 {
            converged = true;
            break;
        }
    }
    println!(
        "\n{}{} after {} iterations; sparsity {:.3}, similarity {:.3}",
        render(sim.grid()),
        if converged { "converged" } else { "not converged" },
        sim.iteration(),
        sparsity(sim.grid(), r).unwrap(),
        similarity(sim.grid(), r).unwrap()
    );
}

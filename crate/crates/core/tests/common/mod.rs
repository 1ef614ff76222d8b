//! Helpers shared by the integration tests: brute-force reference
//! implementations and the reference-scale dataset.
#![allow(dead_code)]

use std::time::{Duration, Instant};

use rand::Rng;
use segsur::dataset::{Dataset, RunEntry};
use segsur::doe::{design_rows, expand_repetitions, generate_nested_lhs, DesignSpec, RunDescriptor};
use segsur::pipeline::run_batch;
use segsur::rng::SimRng;
use segsur::schelling::{Coord, Grid, StepReport, DEFAULT_MAX_ITERATIONS};
use segsur::space::ScenarioParams;

/// (same, different, vacant) around `cell`, by scanning the whole grid.
pub fn brute_counts(grid: &Grid, cell: Coord, radius: usize) -> (u32, u32, u32) {
    let me = grid.get(cell).expect("agent cell");
    let r2 = (radius * radius) as i64;
    let (mut same, mut diff, mut vac) = (0, 0, 0);
    for row in 0..grid.side() {
        for col in 0..grid.side() {
            let dr = row as i64 - cell.0 as i64;
            let dc = col as i64 - cell.1 as i64;
            if (dr, dc) == (0, 0) || dr * dr + dc * dc > r2 {
                continue;
            }
            match grid.get((row, col)) {
                None => vac += 1,
                Some(t) if t == me => same += 1,
                Some(_) => diff += 1,
            }
        }
    }
    (same, diff, vac)
}

pub fn brute_sparsity(grid: &Grid, radius: usize) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for row in 0..grid.side() {
        for col in 0..grid.side() {
            if grid.get((row, col)).is_some() {
                let (s, d, v) = brute_counts(grid, (row, col), radius);
                sum += (d + v) as f64 / (s + 1) as f64;
                n += 1;
            }
        }
    }
    sum / n as f64
}

/// Same-type share of occupied neighbours at least `intolerance`, or no
/// occupied neighbours at all. Only looks inside the bounding square.
pub fn brute_satisfied(grid: &Grid, cell: Coord, intolerance: f64, radius: usize) -> bool {
    let me = grid.get(cell).expect("agent cell");
    let r = radius as i64;
    let (mut same, mut occ) = (0u32, 0u32);
    for dr in -r..=r {
        for dc in -r..=r {
            let (row, col) = (cell.0 as i64 + dr, cell.1 as i64 + dc);
            let side = grid.side() as i64;
            if (dr, dc) == (0, 0) || dr * dr + dc * dc > r * r || row < 0 || col < 0 || row >= side || col >= side {
                continue;
            }
            if let Some(t) = grid.get((row as usize, col as usize)) {
                occ += 1;
                if t == me {
                    same += 1;
                }
            }
        }
    }
    occ == 0 || same as f64 >= intolerance * occ as f64
}

pub fn random_params(rng: &mut SimRng) -> ScenarioParams {
    ScenarioParams::new(
        rng.random_range(2..=5),
        rng.random_range(0.01..=1.0),
        rng.random_range(0.0..=1.0),
        rng.random_range(10..=40),
        rng.random_range(1..=10),
    )
    .unwrap()
}

pub fn type_counts(grid: &Grid) -> [usize; 8] {
    let mut c = [0; 8];
    for t in grid.cells().iter().flatten() {
        c[*t as usize] += 1;
    }
    c
}

/// Checks one step against the pre-step grid: agents are conserved, every
/// mover was unsatisfied and lands on a cell vacant at that moment, and
/// replaying the moves reproduces the post-step grid. With `check_rule`, the
/// reported unsatisfied set is also recomputed by brute force.
pub fn check_step(pre: &Grid, post: &Grid, report: &StepReport, params: &ScenarioParams, check_rule: bool) -> Result<(), String> {
    if type_counts(pre) != type_counts(post) {
        return Err("agent counts per type changed".into());
    }
    if check_rule {
        let expected: Vec<Coord> = pre
            .agents()
            .filter(|&(c, _)| !brute_satisfied(pre, c, params.intolerance, params.perception as usize))
            .map(|(c, _)| c)
            .collect();
        if expected != report.unsatisfied {
            return Err(format!("unsatisfied set differs: {} expected, {} reported", expected.len(), report.unsatisfied.len()));
        }
    }
    let mut replay = pre.clone();
    let mut moved = std::collections::HashSet::new();
    for &(from, to) in &report.moves {
        if !report.unsatisfied.contains(&from) {
            return Err(format!("satisfied agent at {from:?} moved"));
        }
        if !moved.insert(from) {
            return Err(format!("agent at {from:?} moved twice"));
        }
        if replay.get(to).is_some() {
            return Err(format!("move into occupied cell {to:?}"));
        }
        let agent = replay.get(from);
        if agent.is_none() {
            return Err(format!("move from vacant cell {from:?}"));
        }
        replay.set(to, agent);
        replay.set(from, None);
    }
    if replay != *post {
        return Err("replayed moves do not reproduce the grid".into());
    }
    Ok(())
}

/// The default nested design (200 points) with 5 repetitions per point.
pub fn reference_descriptors() -> Vec<RunDescriptor> {
    let spec = DesignSpec::default();
    let design = generate_nested_lhs(&spec).unwrap();
    let points: Vec<_> = design_rows(&design).unwrap().iter().map(|r| (r.index, r.tier, r.params().unwrap())).collect();
    expand_repetitions(&points, spec.repetitions, spec.seed)
}

pub fn run_all(descriptors: &[RunDescriptor], workers: usize) -> (Vec<RunEntry>, Duration) {
    let start = Instant::now();
    let mut entries = Vec::with_capacity(descriptors.len());
    run_batch(descriptors, workers, DEFAULT_MAX_ITERATIONS, false, |e| {
        entries.push(e);
        Ok(())
    })
    .unwrap();
    entries.sort_by_key(RunEntry::key);
    (entries, start.elapsed())
}

pub fn dataset(entries: &[RunEntry]) -> Dataset {
    Dataset::from_entries(entries.to_vec()).unwrap()
}

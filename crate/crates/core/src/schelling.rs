//! Schelling segregation simulation.
//!
//! Agents of `num_types` kinds live on a square grid with hard borders. An
//! agent looks at every cell within Euclidean distance `perception` of its
//! own. It is satisfied when it has no occupied neighbours, or when the share
//! of same-type agents among its occupied neighbours reaches the
//! `intolerance` threshold. Each iteration evaluates satisfaction on a
//! snapshot of the grid, then moves the unsatisfied agents one at a time, in
//! shuffled order, to uniformly chosen vacant cells. A run stops at the first
//! iteration in which nobody moves, or at the iteration cap.

use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_from_seed, SimRng};
use crate::space::ScenarioParams;

/// Default iteration cap of a run.
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// `(row, col)` position on the grid.
pub type Coord = (usize, usize);

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid has no agents")]
    NoAgents,
    #[error("malformed grid csv: {0}")]
    Parse(String),
}

/// Number of agents placed on a `side`×`side` map at the given density.
pub fn agent_count(density: f64, side: usize) -> usize {
    // the small epsilon keeps e.g. 0.29 * 100 from flooring to 28
    ((density * (side * side) as f64) + 1e-9).floor() as usize
}

/// Square occupancy lattice; each cell is vacant or holds an agent type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    side: usize,
    cells: Vec<Option<u8>>,
}

impl Grid {
    pub fn empty(side: usize) -> Self {
        Grid { side, cells: vec![None; side * side] }
    }

    /// Builds a grid from row-major cells.
    pub fn from_cells(side: usize, cells: Vec<Option<u8>>) -> Self {
        assert_eq!(cells.len(), side * side, "cell count must be side²");
        Grid { side, cells }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cells(&self) -> &[Option<u8>] {
        &self.cells
    }

    pub fn get(&self, (row, col): Coord) -> Option<u8> {
        self.cells[row * self.side + col]
    }

    pub fn set(&mut self, (row, col): Coord, value: Option<u8>) {
        self.cells[row * self.side + col] = value;
    }

    pub fn agent_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Occupied cells in row-major order.
    pub fn agents(&self) -> impl Iterator<Item = (Coord, u8)> + '_ {
        let side = self.side;
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(i, c)| c.map(|t| ((i / side, i % side), t)))
    }

    pub fn vacant_cells(&self) -> Vec<Coord> {
        let side = self.side;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(|(i, _)| (i / side, i % side))
            .collect()
    }

    /// CSV snapshot: a header row holding the side length, then one row per
    /// grid row with `-1` for vacant cells and the type id otherwise.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", self.side);
        for row in self.cells.chunks(self.side) {
            let line: Vec<String> =
                row.iter().map(|c| c.map_or("-1".to_string(), |t| t.to_string())).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let side: usize = lines
            .next()
            .ok_or_else(|| GridError::Parse("missing header".into()))?
            .trim()
            .parse()
            .map_err(|e| GridError::Parse(format!("bad side: {e}")))?;
        let mut cells = Vec::with_capacity(side * side);
        for line in lines {
            for field in line.split(',') {
                let v: i32 = field
                    .trim()
                    .parse()
                    .map_err(|e| GridError::Parse(format!("bad cell {field:?}: {e}")))?;
                cells.push(match v {
                    -1 => None,
                    t if (0..=u8::MAX as i32).contains(&t) => Some(t as u8),
                    _ => return Err(GridError::Parse(format!("bad cell value {v}"))),
                });
            }
        }
        if cells.len() != side * side {
            return Err(GridError::Parse(format!("expected {} cells, got {}", side * side, cells.len())));
        }
        Ok(Grid { side, cells })
    }
}

/// Largest `w` with `w² ≤ radius² − dy²`, for each `dy` in `0..=radius`.
fn half_widths(radius: usize) -> Vec<usize> {
    let r2 = radius * radius;
    (0..=radius)
        .map(|dy| {
            let rem = r2 - dy * dy;
            let mut w = (rem as f64).sqrt() as usize;
            while w * w > rem {
                w -= 1;
            }
            while (w + 1) * (w + 1) <= rem {
                w += 1;
            }
            w
        })
        .collect()
}

/// On-grid cells other than `cell` within Euclidean distance `radius`.
pub fn neighborhood(cell: Coord, radius: usize, side: usize) -> Vec<Coord> {
    let widths = half_widths(radius);
    let (row, col) = (cell.0 as isize, cell.1 as isize);
    let mut out = Vec::new();
    for dy in -(radius as isize)..=(radius as isize) {
        let r = row + dy;
        if r < 0 || r >= side as isize {
            continue;
        }
        let w = widths[dy.unsigned_abs()] as isize;
        for c in (col - w).max(0)..=(col + w).min(side as isize - 1) {
            if dy != 0 || c != col {
                out.push((r as usize, c as usize));
            }
        }
    }
    out
}

/// Per-agent neighbourhood tallies, the agent itself excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborTally {
    /// Occupied neighbours of the agent's own type.
    pub same: u32,
    /// Occupied neighbours of any type.
    pub occupied: u32,
    /// On-grid neighbour cells.
    pub cells: u32,
}

impl NeighborTally {
    pub fn different(&self) -> u32 {
        self.occupied - self.same
    }

    pub fn vacant(&self) -> u32 {
        self.cells - self.occupied
    }
}

/// Row prefix sums over a grid snapshot, giving each agent's neighbourhood
/// tallies in `O(radius)` instead of `O(radius²)`.
pub struct NeighborCounter {
    side: usize,
    radius: usize,
    widths: Vec<usize>,
    /// `num_types + 1` planes of `side × (side + 1)` prefix sums; the last
    /// plane counts occupied cells of any type.
    prefix: Vec<u32>,
    planes: usize,
}

impl NeighborCounter {
    pub fn new(grid: &Grid, radius: usize) -> Self {
        let side = grid.side;
        let num_types = grid.cells.iter().flatten().map(|&t| t as usize + 1).max().unwrap_or(0);
        let planes = num_types + 1;
        let stride = side + 1;
        let mut prefix = vec![0u32; planes * side * stride];
        let occ_plane = num_types;
        for row in 0..side {
            for col in 0..side {
                let cell = grid.cells[row * side + col];
                for p in 0..planes {
                    let base = (p * side + row) * stride;
                    let hit = match cell {
                        Some(t) => p == occ_plane || p == t as usize,
                        None => false,
                    };
                    prefix[base + col + 1] = prefix[base + col] + hit as u32;
                }
            }
        }
        NeighborCounter { side, radius, widths: half_widths(radius), prefix, planes }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    fn row_count(&self, plane: usize, row: usize, lo: usize, hi: usize) -> u32 {
        let base = (plane * self.side + row) * (self.side + 1);
        self.prefix[base + hi + 1] - self.prefix[base + lo]
    }

    /// Tallies for an agent of type `agent_type` standing at `cell`.
    pub fn tally(&self, cell: Coord, agent_type: u8) -> NeighborTally {
        let (row, col) = cell;
        let side = self.side;
        let occ_plane = self.planes - 1;
        let type_plane = agent_type as usize;
        let mut tally = NeighborTally { same: 0, occupied: 0, cells: 0 };
        let r_lo = row.saturating_sub(self.radius);
        let r_hi = (row + self.radius).min(side - 1);
        for r in r_lo..=r_hi {
            let w = self.widths[r.abs_diff(row)];
            let lo = col.saturating_sub(w);
            let hi = (col + w).min(side - 1);
            tally.cells += (hi - lo + 1) as u32;
            tally.occupied += self.row_count(occ_plane, r, lo, hi);
            if type_plane < occ_plane {
                tally.same += self.row_count(type_plane, r, lo, hi);
            }
        }
        // drop the agent itself
        tally.cells -= 1;
        tally.occupied -= 1;
        tally.same -= 1;
        tally
    }
}

/// Satisfaction rule on neighbourhood tallies: an agent with no occupied
/// neighbours is satisfied, otherwise it needs `same / occupied ≥ intolerance`.
pub fn satisfied_by(tally: &NeighborTally, intolerance: f64) -> bool {
    tally.occupied == 0 || tally.same as f64 >= intolerance * tally.occupied as f64
}

/// Whether the agent at `agent_cell` is satisfied.
///
/// # Panics
/// If `agent_cell` is vacant.
pub fn is_satisfied(agent_cell: Coord, grid: &Grid, intolerance: f64, radius: usize) -> bool {
    let agent_type = grid.get(agent_cell).expect("is_satisfied called on a vacant cell");
    let counter = NeighborCounter::new(grid, radius);
    satisfied_by(&counter.tally(agent_cell, agent_type), intolerance)
}

/// Mean over agents of `(different + vacant) / (same + 1)`, where the `+ 1`
/// counts the agent as its own neighbour.
pub fn sparsity(grid: &Grid, radius: usize) -> Result<f64, GridError> {
    let counter = NeighborCounter::new(grid, radius);
    mean_over_agents(grid, |cell, t| {
        let tally = counter.tally(cell, t);
        (tally.different() + tally.vacant()) as f64 / (tally.same + 1) as f64
    })
}

/// Mean over agents of the same-type share among occupied neighbours; an
/// agent without occupied neighbours contributes 1.
pub fn similarity(grid: &Grid, radius: usize) -> Result<f64, GridError> {
    let counter = NeighborCounter::new(grid, radius);
    mean_over_agents(grid, |cell, t| {
        let tally = counter.tally(cell, t);
        if tally.occupied == 0 {
            1.0
        } else {
            tally.same as f64 / tally.occupied as f64
        }
    })
}

fn mean_over_agents(grid: &Grid, mut f: impl FnMut(Coord, u8) -> f64) -> Result<f64, GridError> {
    let (sum, n) = grid.agents().fold((0.0, 0usize), |(s, n), (cell, t)| (s + f(cell, t), n + 1));
    if n == 0 {
        return Err(GridError::NoAgents);
    }
    Ok(sum / n as f64)
}

fn place_agents(params: &ScenarioParams, rng: &mut SimRng) -> Grid {
    let side = params.map_side;
    let n = agent_count(params.density, side).min(side * side);
    let mut grid = Grid::empty(side);
    for idx in index::sample(rng, side * side, n) {
        let t = rng.random_range(0..params.num_types) as u8;
        grid.cells[idx] = Some(t);
    }
    grid
}

/// Random initial placement for `(params, seed)`.
pub fn initialize(params: &ScenarioParams, seed: u64) -> Grid {
    place_agents(params, &mut rng_from_seed(seed))
}

/// What one iteration did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    /// Agents judged unsatisfied on the pre-step snapshot, row-major.
    pub unsatisfied: Vec<Coord>,
    /// `(from, to)` for each executed move, in execution order.
    pub moves: Vec<(Coord, Coord)>,
}

impl StepReport {
    pub fn moved_count(&self) -> usize {
        self.moves.len()
    }
}

/// One iteration in place. Returns the moves performed.
pub fn step(grid: &mut Grid, params: &ScenarioParams, rng: &mut SimRng) -> StepReport {
    let counter = NeighborCounter::new(grid, params.perception as usize);
    let unsatisfied: Vec<Coord> = grid
        .agents()
        .filter(|&(cell, t)| !satisfied_by(&counter.tally(cell, t), params.intolerance))
        .map(|(cell, _)| cell)
        .collect();

    let mut order = unsatisfied.clone();
    order.shuffle(rng);
    let mut vacant = grid.vacant_cells();
    let mut moves = Vec::new();
    for from in order {
        if vacant.is_empty() {
            break;
        }
        let to = vacant.swap_remove(rng.random_range(0..vacant.len()));
        let agent = grid.get(from);
        grid.set(to, agent);
        grid.set(from, None);
        vacant.push(from);
        moves.push((from, to));
    }
    StepReport { unsatisfied, moves }
}

/// Final state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub final_sparsity: f64,
    pub final_similarity: f64,
    pub seed: u64,
}

/// A run in progress; exposes the grid between iterations.
pub struct Simulation {
    params: ScenarioParams,
    grid: Grid,
    rng: SimRng,
    iteration: usize,
}

impl Simulation {
    pub fn new(params: ScenarioParams, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let grid = place_agents(&params, &mut rng);
        Simulation { params, grid, rng, iteration: 0 }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// Iterations executed so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn step(&mut self) -> StepReport {
        self.iteration += 1;
        step(&mut self.grid, &self.params, &mut self.rng)
    }
}

/// Runs to convergence or to `max_iterations`.
pub fn run_simulation(params: &ScenarioParams, seed: u64, max_iterations: usize) -> SimulationOutcome {
    assert!(max_iterations >= 1, "max_iterations must be at least 1");
    let mut sim = Simulation::new(*params, seed);
    let mut converged = false;
    while sim.iteration() < max_iterations {
        if sim.step().moved_count() == 0 {
            converged = true;
            break;
        }
    }
    let radius = params.perception as usize;
    SimulationOutcome {
        converged,
        iterations: sim.iteration(),
        final_sparsity: sparsity(sim.grid(), radius).unwrap_or(f64::NAN),
        final_similarity: similarity(sim.grid(), radius).unwrap_or(f64::NAN),
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(num_types: u32, density: f64, intolerance: f64, side: usize, perception: u32) -> ScenarioParams {
        ScenarioParams::new(num_types, density, intolerance, side, perception).unwrap()
    }

    #[test]
    fn agent_count_examples() {
        assert_eq!(agent_count(0.6, 30), 540);
        assert_eq!(agent_count(1.0, 10), 100);
        assert_eq!(agent_count(0.01, 10), 1);
    }

    #[test]
    fn neighborhood_sizes() {
        // enumerate offsets directly
        let count = |r: i64| {
            let mut n = 0;
            for dx in -r..=r {
                for dy in -r..=r {
                    if (dx, dy) != (0, 0) && dx * dx + dy * dy <= r * r {
                        n += 1;
                    }
                }
            }
            n
        };
        assert_eq!(count(1), 4);
        assert_eq!(count(2), 12);
        assert_eq!(neighborhood((5, 5), 1, 10).len(), 4);
        assert_eq!(neighborhood((0, 0), 1, 10).len(), 2);
        assert_eq!(neighborhood((10, 10), 2, 21).len(), 12);
        for r in 1..=10 {
            assert_eq!(neighborhood((20, 20), r, 41).len(), count(r as i64), "radius {r}");
        }
    }

    #[test]
    fn satisfaction_rule() {
        // centre (2,2); radius 1 neighbours: (1,2) (3,2) (2,1) (2,3)
        let mut g = Grid::empty(5);
        g.set((2, 2), Some(0));
        assert!(is_satisfied((2, 2), &g, 1.0, 1), "no neighbours is satisfied");
        g.set((1, 2), Some(0));
        g.set((3, 2), Some(0));
        g.set((2, 1), Some(1));
        assert!(is_satisfied((2, 2), &g, 0.5, 1));
        assert!(is_satisfied((2, 2), &g, 2.0 / 3.0, 1));
        assert!(!is_satisfied((2, 2), &g, 0.7, 1));
        assert!(is_satisfied((2, 2), &g, 0.0, 1));
    }

    #[test]
    fn sparsity_examples() {
        let full = Grid::from_cells(6, vec![Some(0); 36]);
        for r in 1..=4 {
            assert_eq!(sparsity(&full, r).unwrap(), 0.0);
            assert_eq!(similarity(&full, r).unwrap(), 1.0);
        }
        let mut lone = Grid::empty(7);
        lone.set((3, 3), Some(1));
        assert_eq!(sparsity(&lone, 1).unwrap(), 4.0);
        assert_eq!(similarity(&lone, 1).unwrap(), 1.0);

        let mut pair = Grid::empty(7);
        pair.set((3, 3), Some(0));
        pair.set((3, 4), Some(1));
        assert_eq!(sparsity(&pair, 1).unwrap(), 4.0);

        assert_eq!(sparsity(&Grid::empty(4), 1), Err(GridError::NoAgents));
        assert_eq!(similarity(&Grid::empty(4), 1), Err(GridError::NoAgents));
    }

    #[test]
    fn checkerboard_similarity_is_zero_in_the_interior() {
        let side = 6;
        let cells = (0..side * side).map(|i| Some(((i / side + i % side) % 2) as u8)).collect();
        let g = Grid::from_cells(side, cells);
        let counter = NeighborCounter::new(&g, 1);
        for (cell, t) in g.agents() {
            if (1..side - 1).contains(&cell.0) && (1..side - 1).contains(&cell.1) {
                assert_eq!(counter.tally(cell, t).same, 0);
            }
        }
    }

    #[test]
    fn initialize_examples() {
        let p = params(3, 1.0, 0.3, 12, 2);
        assert!(initialize(&p, 1).vacant_cells().is_empty());
        let p = params(3, 0.5, 0.3, 20, 2);
        let g = initialize(&p, 9);
        assert_eq!(g.agent_count(), 200);
        assert_eq!(g, initialize(&p, 9));
        assert_ne!(g, initialize(&p, 10));
        assert!(g.agents().all(|(_, t)| t < 3));
    }

    #[test]
    fn step_examples() {
        let mut rng = rng_from_seed(0);
        // all satisfied: a single-type grid at half density
        let p = params(2, 0.5, 0.5, 10, 1);
        let mut g = Grid::empty(10);
        for c in 0..10 {
            g.set((0, c), Some(0));
        }
        let before = g.clone();
        let report = step(&mut g, &p, &mut rng);
        assert_eq!(report.moved_count(), 0);
        assert_eq!(g, before);

        // full grid of mixed types: nobody can move
        let p = params(2, 1.0, 1.0, 10, 1);
        let mut g = initialize(&p, 3);
        let report = step(&mut g, &p, &mut rng);
        assert!(!report.unsatisfied.is_empty());
        assert_eq!(report.moved_count(), 0);

        // one unhappy agent, one vacant cell
        let p = params(2, 0.9, 0.5, 10, 1);
        let mut cells = vec![Some(0u8); 100];
        cells[99] = None;
        cells[0] = Some(1);
        let mut g = Grid::from_cells(10, cells);
        let report = step(&mut g, &p, &mut rng);
        assert_eq!(report.unsatisfied, vec![(0, 0)]);
        assert_eq!(report.moves, vec![((0, 0), (9, 9))]);
        assert_eq!(g.get((9, 9)), Some(1));
        assert_eq!(g.get((0, 0)), None);
    }

    #[test]
    fn run_simulation_examples() {
        let p = params(4, 0.7, 0.0, 20, 3);
        let out = run_simulation(&p, 5, 1000);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);

        let p = params(4, 1.0, 0.9, 15, 2);
        let out = run_simulation(&p, 5, 1000);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);

        let p = params(3, 0.6, 0.33, 30, 3);
        assert_eq!(run_simulation(&p, 77, 1000), run_simulation(&p, 77, 1000));

        let p = params(5, 0.5, 1.0, 20, 5);
        let out = run_simulation(&p, 1, 7);
        assert!(!out.converged);
        assert_eq!(out.iterations, 7);
    }

    #[test]
    fn csv_round_trip() {
        let p = params(3, 0.4, 0.3, 11, 2);
        let g = initialize(&p, 4);
        let text = g.to_csv();
        assert!(text.starts_with("11\n"));
        assert_eq!(Grid::from_csv(&text).unwrap(), g);
        assert!(Grid::from_csv("2\n0,1\n").is_err());
    }
}

//! Nested Latin-hypercube designs.
//!
//! A design of `sizes = [m0, m1, ..., M]` points is built tier by tier. Every
//! point keeps, per variable, the index of its bin at the finest resolution
//! `M` plus an offset inside that bin. Tier 0 is an ordinary Latin hypercube
//! at resolution `m0`. Tier `t` fills the bins left empty at resolution `m_t`
//! by the earlier points, so every prefix stays a Latin hypercube at its own
//! resolution. Inside a tier, an enhanced stochastic evolutionary (ESE)
//! search swaps coordinates between the tier's own points to spread the
//! prefix out, which leaves every bin set untouched.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, rng_from_seed, run_seed, SimRng};
use crate::space::{scenario_bounds, ParamError, ScenarioParams, VarBounds, VarKind};

/// Exponent of the φp space-filling criterion driven by the search.
const PHI_P: i32 = 10;
/// Offsets stay this far (in fine-bin units) from bin edges so that scaling
/// to physical units and back never changes a bin.
const EDGE_MARGIN: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DoeError {
    #[error("design needs at least one size")]
    NoSizes,
    #[error("sizes must be strictly ascending and each must divide the next: {0:?}")]
    BadSizes(Vec<usize>),
    #[error("design needs at least one variable")]
    NoVariables,
    #[error("size {size} exceeds the {levels} levels of integer variable {name}")]
    IntegerCardinality { name: String, size: usize, levels: usize },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("design point {index} is not a valid scenario: {source}")]
    NotAScenario { index: usize, source: ParamError },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub bounds: Vec<VarBounds>,
    /// Ascending nested sample counts; each divides the next.
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    /// Outer iterations of the ESE search per tier.
    pub ese_iterations: usize,
    /// Require distinct integer levels inside every tier prefix.
    pub strict_integers: bool,
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec {
            bounds: scenario_bounds(),
            sizes: vec![50, 100, 200],
            repetitions: 5,
            seed: 0,
            ese_iterations: 300,
            strict_integers: false,
        }
    }
}

impl DesignSpec {
    pub fn validate(&self) -> Result<(), DoeError> {
        if self.sizes.is_empty() {
            return Err(DoeError::NoSizes);
        }
        if self.bounds.is_empty() {
            return Err(DoeError::NoVariables);
        }
        if self.repetitions == 0 {
            return Err(DoeError::NoRepetitions);
        }
        let ascending = self.sizes[0] > 0
            && self.sizes.windows(2).all(|w| w[0] < w[1] && w[1] % w[0] == 0);
        if !ascending {
            return Err(DoeError::BadSizes(self.sizes.clone()));
        }
        if self.strict_integers {
            let size = *self.sizes.last().unwrap();
            for b in self.bounds.iter().filter(|b| b.kind == VarKind::Integer) {
                if size > b.cardinality() {
                    return Err(DoeError::IntegerCardinality {
                        name: b.name.clone(),
                        size,
                        levels: b.cardinality(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Space-filling score of one tier before and after the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierQuality {
    pub initial_maximin: f64,
    pub final_maximin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub bounds: Vec<VarBounds>,
    pub sizes: Vec<usize>,
    /// Points in physical units.
    pub points: Vec<Vec<f64>>,
    /// Unit-hypercube coordinates the points were scaled from.
    pub unit: Vec<Vec<f64>>,
    /// Smallest nested subset each point belongs to.
    pub tiers: Vec<usize>,
    pub quality: Vec<TierQuality>,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points as scenarios; fails unless the bounds are the scenario bounds.
    pub fn scenarios(&self) -> Result<Vec<ScenarioParams>, DoeError> {
        self.points
            .iter()
            .enumerate()
            .map(|(index, p)| {
                ScenarioParams::from_features(p).map_err(|source| DoeError::NotAScenario { index, source })
            })
            .collect()
    }
}

/// Minimum pairwise Euclidean distance.
pub fn maximin(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(sq_dist(&points[i], &points[j]).sqrt());
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn inv_pow(sq: f64) -> f64 {
    sq.max(1e-300).powi(-PHI_P / 2)
}

/// Working state: fine bin index and in-bin offset per point and variable.
struct Lattice {
    fine: Vec<Vec<usize>>,
    offset: Vec<Vec<f64>>,
    resolution: usize,
}

impl Lattice {
    fn unit(&self, i: usize, k: usize) -> f64 {
        (self.fine[i][k] as f64 + self.offset[i][k]) / self.resolution as f64
    }

    fn unit_point(&self, i: usize) -> Vec<f64> {
        (0..self.fine[i].len()).map(|k| self.unit(i, k)).collect()
    }

    fn swap(&mut self, a: usize, b: usize, k: usize) {
        let (fa, oa) = (self.fine[a][k], self.offset[a][k]);
        self.fine[a][k] = self.fine[b][k];
        self.offset[a][k] = self.offset[b][k];
        self.fine[b][k] = fa;
        self.offset[b][k] = oa;
    }
}

fn draw_offset(rng: &mut SimRng) -> f64 {
    rng.random_range(EDGE_MARGIN..1.0 - EDGE_MARGIN)
}

/// Generates the nested design.
pub fn generate_nested_lhs(spec: &DesignSpec) -> Result<Design, DoeError> {
    spec.validate()?;
    let dims = spec.bounds.len();
    let full = *spec.sizes.last().unwrap();
    let mut rng = rng_from_seed(derive_seed(&[spec.seed, 0xD0E]));
    let mut lattice = Lattice { fine: Vec::new(), offset: Vec::new(), resolution: full };
    let mut tiers = Vec::with_capacity(full);
    let mut quality = Vec::new();

    let mut start = 0;
    for (tier, &size) in spec.sizes.iter().enumerate() {
        let per_bin = full / size;
        let added = size - start;
        let mut columns = Vec::with_capacity(dims);
        for k in 0..dims {
            let mut taken = vec![false; size];
            for i in 0..start {
                taken[lattice.fine[i][k] / per_bin] = true;
            }
            let mut free: Vec<usize> = (0..size).filter(|&b| !taken[b]).collect();
            debug_assert_eq!(free.len(), added);
            free.shuffle(&mut rng);
            columns.push(free);
        }
        for j in 0..added {
            let mut fine = Vec::with_capacity(dims);
            let mut offset = Vec::with_capacity(dims);
            for column in &columns {
                fine.push(column[j] * per_bin + rng.random_range(0..per_bin));
                offset.push(draw_offset(&mut rng));
            }
            lattice.fine.push(fine);
            lattice.offset.push(offset);
            tiers.push(tier);
        }
        quality.push(ese_optimize(&mut lattice, start, size, spec.ese_iterations, &mut rng));
        start = size;
    }

    let unit: Vec<Vec<f64>> = (0..full).map(|i| lattice.unit_point(i)).collect();
    let points = (0..full)
        .map(|i| {
            spec.bounds
                .iter()
                .enumerate()
                .map(|(k, b)| match b.kind {
                    VarKind::Integer if spec.strict_integers => {
                        let levels = b.cardinality();
                        b.lower + (lattice.fine[i][k] * levels / full) as f64
                    }
                    _ => b.from_unit(unit[i][k]),
                })
                .collect()
        })
        .collect();
    Ok(Design { bounds: spec.bounds.clone(), sizes: spec.sizes.clone(), points, unit, tiers, quality })
}

/// Pairwise distances of the prefix and the running φp sum.
struct PhiState {
    sq: Vec<Vec<f64>>,
    sum: f64,
}

impl PhiState {
    fn new(lattice: &Lattice, n: usize) -> Self {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| lattice.unit_point(i)).collect();
        let mut sq = vec![vec![0.0; n]; n];
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let d = sq_dist(&pts[i], &pts[j]);
                sq[i][j] = d;
                sq[j][i] = d;
                sum += inv_pow(d);
            }
        }
        PhiState { sq, sum }
    }

    fn phi(&self) -> f64 {
        self.sum.powf(1.0 / PHI_P as f64)
    }

    fn min_distance(&self) -> f64 {
        let n = self.sq.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                best = best.min(self.sq[i][j]);
            }
        }
        best.sqrt()
    }

    /// New squared distances from `a` and `b` to everyone else if their
    /// coordinate `k` were swapped, and the resulting change of the sum.
    fn swap_delta(&self, lattice: &Lattice, a: usize, b: usize, k: usize) -> f64 {
        let ua = lattice.unit(a, k);
        let ub = lattice.unit(b, k);
        let mut delta = 0.0;
        for j in 0..self.sq.len() {
            if j == a || j == b {
                continue;
            }
            let uj = lattice.unit(j, k);
            let da_old = self.sq[a][j];
            let db_old = self.sq[b][j];
            let da_new = da_old - (ua - uj).powi(2) + (ub - uj).powi(2);
            let db_new = db_old - (ub - uj).powi(2) + (ua - uj).powi(2);
            delta += inv_pow(da_new) - inv_pow(da_old) + inv_pow(db_new) - inv_pow(db_old);
        }
        delta
    }

    /// Applies the swap to the distance table; call before mutating `lattice`.
    fn apply_swap(&mut self, lattice: &Lattice, a: usize, b: usize, k: usize, delta: f64) {
        let ua = lattice.unit(a, k);
        let ub = lattice.unit(b, k);
        for j in 0..self.sq.len() {
            if j == a || j == b {
                continue;
            }
            let uj = lattice.unit(j, k);
            let da = self.sq[a][j] - (ua - uj).powi(2) + (ub - uj).powi(2);
            let db = self.sq[b][j] - (ub - uj).powi(2) + (ua - uj).powi(2);
            self.sq[a][j] = da.max(0.0);
            self.sq[j][a] = da.max(0.0);
            self.sq[b][j] = db.max(0.0);
            self.sq[j][b] = db.max(0.0);
        }
        self.sum += delta;
    }
}

/// ESE search over swaps among points `start..end`, scored on the prefix
/// `0..end`. Keeps the initial arrangement if the search never beats its
/// maximin distance.
fn ese_optimize(lattice: &mut Lattice, start: usize, end: usize, outer: usize, rng: &mut SimRng) -> TierQuality {
    let mut state = PhiState::new(lattice, end);
    let initial_maximin = state.min_distance();
    let movable = end - start;
    if movable < 2 || outer == 0 {
        return TierQuality { initial_maximin, final_maximin: initial_maximin };
    }
    let dims = lattice.fine[0].len();
    let pairs = movable * (movable - 1) / 2;
    let candidates = (pairs / 5).clamp(1, 20);
    let inner = (2 * pairs * dims / candidates).clamp(1, 50);

    let snapshot = |l: &Lattice| -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
        (l.fine[start..end].to_vec(), l.offset[start..end].to_vec())
    };
    let initial = snapshot(lattice);
    let mut best = initial.clone();
    let mut best_phi = state.phi();
    let mut threshold = 0.005 * best_phi;

    for _ in 0..outer {
        let phi_before = best_phi;
        let (mut accepted, mut improved) = (0usize, 0usize);
        for i in 0..inner {
            let k = i % dims;
            let mut choice: Option<(usize, usize, f64)> = None;
            for _ in 0..candidates {
                let a = start + rng.random_range(0..movable);
                let mut b = start + rng.random_range(0..movable - 1);
                if b >= a {
                    b += 1;
                }
                let delta = state.swap_delta(lattice, a, b, k);
                if choice.is_none_or(|(_, _, d)| delta < d) {
                    choice = Some((a, b, delta));
                }
            }
            let (a, b, delta) = choice.unwrap();
            let current = state.phi();
            let proposed = (state.sum + delta).max(0.0).powf(1.0 / PHI_P as f64);
            if proposed - current <= threshold * rng.random::<f64>() {
                state.apply_swap(lattice, a, b, k, delta);
                lattice.swap(a, b, k);
                accepted += 1;
                if proposed < best_phi {
                    best_phi = proposed;
                    best = snapshot(lattice);
                    improved += 1;
                }
            }
        }
        let accept_ratio = accepted as f64 / inner as f64;
        if best_phi < phi_before - 1e-12 * phi_before {
            // improving: tighten while many moves are accepted without gain
            if accept_ratio > 0.1 && improved < accepted {
                threshold *= 0.8;
            } else if accept_ratio <= 0.1 {
                threshold /= 0.8;
            }
        } else if accept_ratio < 0.1 {
            threshold /= 0.7;
        } else if accept_ratio > 0.8 {
            threshold *= 0.9;
        }
        // refresh the running sum against drift
        state = PhiState::new(lattice, end);
    }

    let restore = |l: &mut Lattice, s: &(Vec<Vec<usize>>, Vec<Vec<f64>>)| {
        l.fine[start..end].clone_from_slice(&s.0);
        l.offset[start..end].clone_from_slice(&s.1);
    };
    restore(lattice, &best);
    let mut final_maximin = PhiState::new(lattice, end).min_distance();
    if final_maximin < initial_maximin {
        restore(lattice, &initial);
        final_maximin = initial_maximin;
    }
    TierQuality { initial_maximin, final_maximin }
}

/// First continuous variable whose projection of the first `prefix` points
/// misses the one-point-per-bin property, if any.
pub fn stratification_violation(design: &Design, prefix: usize) -> Option<usize> {
    design.bounds.iter().enumerate().find_map(|(k, b)| {
        if b.kind != VarKind::Continuous {
            return None;
        }
        let mut hits = vec![0usize; prefix];
        for p in &design.points[..prefix] {
            let bin = ((b.normalize(p[k]) * prefix as f64).floor() as usize).min(prefix - 1);
            hits[bin] += 1;
        }
        hits.iter().any(|&h| h != 1).then_some(k)
    })
}

/// One simulation to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunDescriptor {
    pub design_index: usize,
    pub tier: usize,
    pub repetition: usize,
    pub seed: u64,
    pub params: ScenarioParams,
}

/// Every design point repeated `repetitions` times, each with its own seed.
pub fn expand_repetitions(
    points: &[(usize, usize, ScenarioParams)],
    repetitions: usize,
    global_seed: u64,
) -> Vec<RunDescriptor> {
    points
        .iter()
        .flat_map(|&(design_index, tier, params)| {
            (0..repetitions).map(move |repetition| RunDescriptor {
                design_index,
                tier,
                repetition,
                seed: run_seed(design_index, repetition, global_seed),
                params,
            })
        })
        .collect()
}

/// One row of `design.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub index: usize,
    pub tier: usize,
    pub num_types: u32,
    pub density: f64,
    pub intolerance: f64,
    pub map_side: usize,
    pub perception: u32,
}

impl DesignRow {
    pub fn params(&self) -> Result<ScenarioParams, ParamError> {
        ScenarioParams::new(self.num_types, self.density, self.intolerance, self.map_side, self.perception)
    }
}

pub fn design_rows(design: &Design) -> Result<Vec<DesignRow>, DoeError> {
    Ok(design
        .scenarios()?
        .into_iter()
        .enumerate()
        .map(|(index, p)| DesignRow {
            index,
            tier: design.tiers[index],
            num_types: p.num_types,
            density: p.density,
            intolerance: p.intolerance,
            map_side: p.map_side,
            perception: p.perception,
        })
        .collect())
}

pub fn write_design_csv(rows: &[DesignRow], path: &Path) -> Result<(), DoeError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_design_csv(path: &Path) -> Result<Vec<DesignRow>, DoeError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<DesignRow>, _>>()?;
    for row in &rows {
        row.params().map_err(|source| DoeError::NotAScenario { index: row.index, source })?;
    }
    Ok(rows)
}

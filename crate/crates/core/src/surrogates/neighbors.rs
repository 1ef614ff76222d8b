//! Instance-based models: inverse distance weighting and k nearest
//! neighbours. Both keep every training row, repetitions included.

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Shepard interpolation: `Σ wᵢ yᵢ / Σ wᵢ` with `wᵢ = ‖x − xᵢ‖^-power`.
#[derive(Debug, Clone)]
pub struct InverseDistance {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    power: f64,
}

impl InverseDistance {
    pub fn new(x: &[Vec<f64>], y: &[f64], power: f64) -> Self {
        InverseDistance { x: x.to_vec(), y: y.to_vec(), power }
    }

    /// At a stored point the mean of the targets stored there is returned.
    pub fn predict(&self, q: &[f64]) -> f64 {
        let (mut exact_sum, mut exact_n) = (0.0, 0usize);
        let (mut num, mut den) = (0.0, 0.0);
        for (xi, yi) in self.x.iter().zip(&self.y) {
            let d2 = sq_dist(q, xi);
            if d2 == 0.0 {
                exact_sum += yi;
                exact_n += 1;
            } else if exact_n == 0 {
                let w = d2.powf(-self.power / 2.0);
                num += w * yi;
                den += w;
            }
        }
        if exact_n > 0 {
            exact_sum / exact_n as f64
        } else {
            num / den
        }
    }
}

/// Unweighted mean of the `k` nearest targets; distance ties go to the lower
/// row index.
#[derive(Debug, Clone)]
pub struct NearestNeighbors {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    k: usize,
}

impl NearestNeighbors {
    pub fn new(x: &[Vec<f64>], y: &[f64], k: usize) -> Self {
        NearestNeighbors { x: x.to_vec(), y: y.to_vec(), k: k.clamp(1, x.len()) }
    }

    /// Row indices of the neighbours of `q`, nearest first.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = self.x.iter().enumerate().map(|(i, xi)| (sq_dist(q, xi), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(self.k);
        order.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        let idx = self.neighbors(q);
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }
}

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Jitter levels tried, relative to the mean diagonal, when a factorization
/// fails.
const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor of a symmetric positive-definite matrix, with the jitter
/// that had to be added to its diagonal.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl SpdFactor {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.l_dirty().solve_lower_triangular(b).expect("cholesky factor has a positive diagonal")
    }
}

/// Factors `a`, escalating diagonal jitter from 1e-10 up to 1e-6 times the
/// mean diagonal. Returns `None` if even the largest jitter fails.
pub fn spd_factor(a: &DMatrix<f64>) -> Option<SpdFactor> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        if chol.l_dirty().diagonal().iter().all(|v| v.is_finite() && *v > 0.0) {
            return Some(SpdFactor { chol, jitter: 0.0 });
        }
    }
    let n = a.nrows();
    let scale = (a.trace() / n.max(1) as f64).abs().max(f64::MIN_POSITIVE);
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(b) {
            return Some(SpdFactor { chol, jitter });
        }
    }
    None
}

/// Estimated 2-norm condition number from the singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

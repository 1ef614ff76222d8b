use nalgebra::{DMatrix, DVector};

use super::SurrogateError;

/// Polynomial feature map used by the least-squares models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `[1, x]`
    Linear,
    /// `[1, x, x², xᵢxⱼ (i < j)]`
    Quadratic,
}

impl Basis {
    pub fn expand(self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + 2 * x.len() + x.len() * x.len() / 2);
        out.push(1.0);
        out.extend_from_slice(x);
        if self == Basis::Quadratic {
            out.extend(x.iter().map(|v| v * v));
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    out.push(x[i] * x[j]);
                }
            }
        }
        out
    }

    fn name(self) -> &'static str {
        match self {
            Basis::Linear => "LR",
            Basis::Quadratic => "QP",
        }
    }
}

/// Ordinary least squares on a polynomial basis.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    basis: Basis,
    coefficients: Vec<f64>,
}

impl LeastSquares {
    pub fn fit(basis: Basis, x: &[Vec<f64>], y: &[f64]) -> Result<Self, SurrogateError> {
        let rows: Vec<Vec<f64>> = x.iter().map(|r| basis.expand(r)).collect();
        let p = rows[0].len();
        let a = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        let b = DVector::from_column_slice(y);
        let svd = a.svd(true, true);
        let sv = &svd.singular_values;
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if rows.len() < p || min <= max * 1e-12 {
            return Err(SurrogateError::Singular {
                model: basis.name(),
                detail: format!("design matrix rank deficient ({} rows, {p} terms, condition ≈ {:.3e})", rows.len(), max / min),
            });
        }
        let coef = svd.solve(&b, 0.0).map_err(|e| SurrogateError::Singular { model: basis.name(), detail: e.to_string() })?;
        Ok(LeastSquares { basis, coefficients: coef.iter().copied().collect() })
    }

    /// Coefficients in basis order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.basis.expand(x).iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_affine_coefficients() {
        let x: Vec<Vec<f64>> =
            (0..30).map(|i| vec![(i as f64 * 0.37).fract(), (i as f64 * 0.71).fract(), (i as f64 * 0.13).fract()]).collect();
        let y: Vec<f64> = x.iter().map(|p| 1.5 - 2.0 * p[0] + 0.25 * p[1] + 4.0 * p[2]).collect();
        let lr = LeastSquares::fit(Basis::Linear, &x, &y).unwrap();
        for (c, e) in lr.coefficients().iter().zip([1.5, -2.0, 0.25, 4.0]) {
            assert!((c - e).abs() < 1e-8);
        }
    }

    #[test]
    fn quadratic_basis_layout_and_fit() {
        assert_eq!(Basis::Quadratic.expand(&[2.0, 3.0]), vec![1.0, 2.0, 3.0, 4.0, 9.0, 6.0]);
        assert_eq!(Basis::Quadratic.expand(&[0.0; 5]).len(), 21);
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).fract(), (i as f64 * 0.59).fract()]).collect();
        let y: Vec<f64> = x.iter().map(|p| p[0] * p[1] - p[1] * p[1]).collect();
        let qp = LeastSquares::fit(Basis::Quadratic, &x, &y).unwrap();
        assert!((qp.predict(&[0.4, 0.9]) - (0.36 - 0.81)).abs() < 1e-9);
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let x = vec![vec![0.5, 0.5]; 10];
        let err = LeastSquares::fit(Basis::Linear, &x, &[1.0; 10]).unwrap_err();
        assert!(err.to_string().contains("LR"));
    }
}

use nalgebra::{DMatrix, DVector};

use super::gp::KernelFamily;
use super::linalg::condition_number;
use super::SurrogateError;

/// Ridge added to the kernel block's diagonal.
pub const RBF_RIDGE: f64 = 1e-10;

/// Radial basis interpolant with a linear polynomial tail:
/// `s(x) = Σ wᵢ φ(‖x − cᵢ‖ / scale) + c₀ + Σ cₖ xₖ`.
#[derive(Debug, Clone)]
pub struct RadialBasis {
    family: KernelFamily,
    scale: f64,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    tail: Vec<f64>,
}

impl RadialBasis {
    fn basis(family: KernelFamily, r: f64) -> f64 {
        match family {
            KernelFamily::SquaredExponential => (-r * r).exp(),
            KernelFamily::AbsoluteExponential => (-r).exp(),
        }
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    pub fn fit(family: KernelFamily, scale: f64, x: &[Vec<f64>], y: &[f64]) -> Result<Self, SurrogateError> {
        let n = x.len();
        let d = x[0].len();
        let m = n + d + 1;
        let mut a = DMatrix::zeros(m, m);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = Self::basis(family, Self::dist(&x[i], &x[j]) / scale);
            }
            a[(i, i)] += RBF_RIDGE;
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
            for k in 0..d {
                a[(i, n + 1 + k)] = x[i][k];
                a[(n + 1 + k, i)] = x[i][k];
            }
        }
        let mut rhs = DVector::zeros(m);
        rhs.rows_mut(0, n).copy_from_slice(y);
        let sol = a.clone().lu().solve(&rhs).filter(|s| s.iter().all(|v| v.is_finite())).ok_or_else(|| {
            SurrogateError::Singular {
                model: "RBF",
                detail: format!("interpolation system singular (condition ≈ {:.3e})", condition_number(&a)),
            }
        })?;
        Ok(RadialBasis {
            family,
            scale,
            centers: x.to_vec(),
            weights: sol.rows(0, n).iter().copied().collect(),
            tail: sol.rows(n, d + 1).iter().copied().collect(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let kernel: f64 = self
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * Self::basis(self.family, Self::dist(x, c) / self.scale))
            .sum();
        let poly = self.tail[0] + self.tail[1..].iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
        kernel + poly
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_reproduces_affine_functions() {
        let x: Vec<Vec<f64>> = (0..15).map(|i| vec![(i as f64 * 0.29).fract(), (i as f64 * 0.53).fract()]).collect();
        let y: Vec<f64> = x.iter().map(|p| (4.0 * p[0]).cos() * p[1]).collect();
        let rbf = RadialBasis::fit(KernelFamily::AbsoluteExponential, 0.5, &x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((rbf.predict(xi) - yi).abs() < 1e-6);
        }
        let affine: Vec<f64> = x.iter().map(|p| 2.0 - p[0] + 3.0 * p[1]).collect();
        let rbf = RadialBasis::fit(KernelFamily::SquaredExponential, 1.0, &x, &affine).unwrap();
        assert!((rbf.predict(&[0.5, 0.5]) - 3.0).abs() < 1e-4);
    }
}

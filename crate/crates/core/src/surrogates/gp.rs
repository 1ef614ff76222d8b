//! Universal kriging: a linear trend plus an anisotropic stationary kernel,
//! with a per-point nugget for heteroscedastic observation noise.
//!
//! Targets are standardized before fitting. Hyperparameters (one log
//! lengthscale per input plus the log signal variance) maximize the
//! log marginal likelihood
//!
//! ```text
//! log p(y) = -½ rᵀK⁻¹r - ½ log|K| - n/2 log 2π,   r = y - Fβ̂
//! β̂ = (FᵀK⁻¹F)⁻¹ FᵀK⁻¹y,   K = σ²R(ℓ) + diag(nugget)
//! ```
//!
//! through seeded multi-start Nelder–Mead over the box `[-4, 3]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{condition_number, spd_factor, SpdFactor};
use super::optimize::NelderMead;
use super::SurrogateError;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-½ Σ (Δₖ/ℓₖ)²)`
    SquaredExponential,
    /// `exp(-Σ |Δₖ|/ℓₖ)`
    AbsoluteExponential,
}

impl KernelFamily {
    pub fn correlation(self, a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
        match self {
            KernelFamily::SquaredExponential => {
                let s: f64 = a.iter().zip(b).zip(lengthscales).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
                (-0.5 * s).exp()
            }
            KernelFamily::AbsoluteExponential => {
                let s: f64 = a.iter().zip(b).zip(lengthscales).map(|((x, y), l)| (x - y).abs() / l).sum();
                (-s).exp()
            }
        }
    }
}

/// Hyperparameter search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSearch {
    pub starts: usize,
    pub log_lower: f64,
    pub log_upper: f64,
    pub max_evals: usize,
}

impl Default for GpSearch {
    fn default() -> Self {
        GpSearch { starts: 10, log_lower: -4.0, log_upper: 3.0, max_evals: 600 }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    family: KernelFamily,
    x: Vec<Vec<f64>>,
    lengthscales: Vec<f64>,
    /// Signal variance in standardized target units.
    signal_variance: f64,
    y_mean: f64,
    y_scale: f64,
    beta: DVector<f64>,
    alpha: DVector<f64>,
    factor: std::sync::Arc<SpdFactor>,
    log_likelihood: f64,
    initial_log_likelihood: f64,
}

fn trend_row(x: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(x.iter().copied()).collect()
}

struct Assembled {
    factor: SpdFactor,
    beta: DVector<f64>,
    alpha: DVector<f64>,
    log_likelihood: f64,
}

fn assemble(
    family: KernelFamily,
    x: &[Vec<f64>],
    y: &DVector<f64>,
    nugget: &[f64],
    lengthscales: &[f64],
    signal_variance: f64,
) -> Result<Assembled, SurrogateError> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = signal_variance + nugget[i];
        for j in 0..i {
            let v = signal_variance * family.correlation(&x[i], &x[j], lengthscales);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let factor = spd_factor(&k).ok_or_else(|| SurrogateError::Singular {
        model: "GP",
        detail: format!("covariance not positive definite (condition ≈ {:.3e})", condition_number(&k)),
    })?;
    let f = DMatrix::from_fn(n, x[0].len() + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let kinv_f = factor.solve_matrix(&f);
    let kinv_y = factor.solve(y);
    let ftkf = f.transpose() * &kinv_f;
    let trend_factor = spd_factor(&ftkf).ok_or_else(|| SurrogateError::Singular {
        model: "GP",
        detail: format!("trend system singular (condition ≈ {:.3e})", condition_number(&ftkf)),
    })?;
    let beta = trend_factor.solve(&(f.transpose() * kinv_y));
    let resid = y - &f * &beta;
    let alpha = factor.solve(&resid);
    let log_likelihood =
        -0.5 * resid.dot(&alpha) - 0.5 * factor.log_det() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(Assembled { factor, beta, alpha, log_likelihood })
}

fn standardize(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    (mean, scale)
}

impl GaussianProcess {
    /// Fits with hyperparameters chosen by likelihood maximization.
    ///
    /// `x` are unit-cube inputs; `noise` holds per-point observation variances
    /// in target units (zero when absent).
    pub fn fit(
        family: KernelFamily,
        x: &[Vec<f64>],
        y: &[f64],
        noise: Option<&[f64]>,
        search: &GpSearch,
        seed: u64,
    ) -> Result<Self, SurrogateError> {
        let dims = x[0].len();
        let (y_mean, y_scale) = standardize(y);
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
        let nugget: Vec<f64> = match noise {
            Some(v) => v.iter().map(|s| s.max(0.0) / (y_scale * y_scale)).collect(),
            None => vec![0.0; y.len()],
        };

        let objective = |theta: &[f64]| -> f64 {
            let ls: Vec<f64> = theta[..dims].iter().map(|t| t.exp()).collect();
            match assemble(family, x, &ys, &nugget, &ls, theta[dims].exp()) {
                Ok(a) => -a.log_likelihood,
                Err(_) => f64::INFINITY,
            }
        };

        let nm = NelderMead {
            lower: search.log_lower,
            upper: search.log_upper,
            max_evals: search.max_evals,
            initial_step: 0.5,
            tolerance: 1e-9,
        };
        // the first start is the fixed initial guess ℓ = 1, σ² = 1
        let initial_guess = vec![0.0; dims + 1];
        let initial_log_likelihood = -objective(&initial_guess);
        let mut rng = rng_from_seed(seed);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in 0..search.starts.max(1) {
            let x0: Vec<f64> = if start == 0 {
                initial_guess.clone()
            } else {
                (0..=dims).map(|_| rng.random_range(search.log_lower..search.log_upper)).collect()
            };
            let m = nm.minimize(objective, &x0);
            if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
                best = Some((m.x, m.value));
            }
        }
        let (theta, value) = best.expect("at least one start");
        if !value.is_finite() {
            return Err(SurrogateError::Singular {
                model: "GP",
                detail: "no hyperparameters gave a positive-definite covariance".into(),
            });
        }
        let lengthscales: Vec<f64> = theta[..dims].iter().map(|t| t.exp()).collect();
        let mut gp = Self::build(family, x, &ys, &nugget, lengthscales, theta[dims].exp(), y_mean, y_scale)?;
        gp.initial_log_likelihood = initial_log_likelihood;
        Ok(gp)
    }

    /// Fits with given hyperparameters. `signal_variance` is in target units.
    pub fn with_hyperparameters(
        family: KernelFamily,
        x: &[Vec<f64>],
        y: &[f64],
        noise: Option<&[f64]>,
        lengthscales: Vec<f64>,
        signal_variance: f64,
    ) -> Result<Self, SurrogateError> {
        let (y_mean, y_scale) = standardize(y);
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
        let s2 = y_scale * y_scale;
        let nugget: Vec<f64> = match noise {
            Some(v) => v.iter().map(|s| s.max(0.0) / s2).collect(),
            None => vec![0.0; y.len()],
        };
        let mut gp = Self::build(family, x, &ys, &nugget, lengthscales, signal_variance / s2, y_mean, y_scale)?;
        gp.initial_log_likelihood = gp.log_likelihood;
        Ok(gp)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        family: KernelFamily,
        x: &[Vec<f64>],
        ys: &DVector<f64>,
        nugget: &[f64],
        lengthscales: Vec<f64>,
        signal_variance: f64,
        y_mean: f64,
        y_scale: f64,
    ) -> Result<Self, SurrogateError> {
        let a = assemble(family, x, ys, nugget, &lengthscales, signal_variance)?;
        Ok(GaussianProcess {
            family,
            x: x.to_vec(),
            lengthscales,
            signal_variance,
            y_mean,
            y_scale,
            beta: a.beta,
            alpha: a.alpha,
            factor: std::sync::Arc::new(a.factor),
            log_likelihood: a.log_likelihood,
            initial_log_likelihood: 0.0,
        })
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    /// Prior signal variance in target units.
    pub fn signal_variance(&self) -> f64 {
        self.signal_variance * self.y_scale * self.y_scale
    }

    /// Log marginal likelihood (standardized targets) of the fitted
    /// hyperparameters.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Log marginal likelihood at the search's fixed initial guess.
    pub fn initial_log_likelihood(&self) -> f64 {
        self.initial_log_likelihood
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| self.signal_variance * self.family.correlation(x, xi, &self.lengthscales)),
        )
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let trend: f64 = trend_row(x).iter().zip(self.beta.iter()).map(|(a, b)| a * b).sum();
        let k = self.cross(x);
        self.y_mean + self.y_scale * (trend + k.dot(&self.alpha))
    }

    /// Posterior variance of the latent function, `σ² - kᵀK⁻¹k`, clamped at 0.
    pub fn variance(&self, x: &[f64]) -> f64 {
        let v = self.factor.solve_lower(&self.cross(x));
        let var = self.signal_variance - v.dot(&v);
        var.max(0.0) * self.y_scale * self.y_scale
    }
}

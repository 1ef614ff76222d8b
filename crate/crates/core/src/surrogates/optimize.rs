//! Derivative-free box-constrained minimization (Nelder–Mead with
//! projection onto the box).

pub struct NelderMead {
    pub lower: f64,
    pub upper: f64,
    pub max_evals: usize,
    pub initial_step: f64,
    pub tolerance: f64,
}

pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl NelderMead {
    fn project(&self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(self.lower, self.upper);
        }
    }

    /// Minimizes `f` from `start`. The returned value is never worse than
    /// `f(start)`.
    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, start: &[f64]) -> Minimum {
        let n = start.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut x0 = start.to_vec();
        self.project(&mut x0);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(&x0, &mut evals);
        simplex.push((x0.clone(), v0));
        for i in 0..n {
            let mut x = x0.clone();
            x[i] += if x[i] + self.initial_step <= self.upper { self.initial_step } else { -self.initial_step };
            self.project(&mut x);
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }

        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            if (worst - best).abs() <= self.tolerance * (1.0 + best.abs()) {
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
            let toward = |t: f64| -> Vec<f64> {
                let mut x: Vec<f64> =
                    centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect();
                self.project(&mut x);
                x
            };

            let xr = toward(-1.0);
            let vr = eval(&xr, &mut evals);
            if vr < simplex[0].1 {
                let xe = toward(-2.0);
                let ve = eval(&xe, &mut evals);
                simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
            } else if vr < simplex[n - 1].1 {
                simplex[n] = (xr, vr);
            } else {
                let (xc, vc) = if vr < simplex[n].1 {
                    let xc = toward(-0.5);
                    let vc = eval(&xc, &mut evals);
                    (xc, vc)
                } else {
                    let xc = toward(0.5);
                    let vc = eval(&xc, &mut evals);
                    (xc, vc)
                };
                if vc < simplex[n].1.min(vr) {
                    simplex[n] = (xc, vc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for point in simplex.iter_mut().skip(1) {
                        let mut x: Vec<f64> = x_best.iter().zip(&point.0).map(|(b, p)| b + 0.5 * (p - b)).collect();
                        self.project(&mut x);
                        let v = eval(&x, &mut evals);
                        *point = (x, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, evals }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_the_rosenbrock_valley_floor() {
        let nm = NelderMead { lower: -4.0, upper: 3.0, max_evals: 4000, initial_step: 0.5, tolerance: 1e-14 };
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nm.minimize(rosen, &[-1.5, 2.0]);
        assert!(m.value < 1e-8, "value {}", m.value);
        assert!((m.x[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn respects_the_box() {
        let nm = NelderMead { lower: -4.0, upper: 3.0, max_evals: 500, initial_step: 0.5, tolerance: 1e-12 };
        let m = nm.minimize(|x| (x[0] - 10.0).powi(2) + (x[1] + 10.0).powi(2), &[0.0, 0.0]);
        assert!((m.x[0] - 3.0).abs() < 1e-6 && (m.x[1] + 4.0).abs() < 1e-6);
    }
}

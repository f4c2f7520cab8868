//! L2-regularised logistic regression fitted by damped Newton iterations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const MAX_ITER: usize = 100;
const TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear(x: &[f64], intercept: f64, w: &[f64]) -> f64 {
    intercept + x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
}

/// Mean log-loss plus `lambda / 2 * |w|^2`; the intercept is not penalised.
fn objective(rows: &[Vec<f64>], y: &[bool], theta: &DVector<f64>, lambda: f64) -> f64 {
    let w = &theta.as_slice()[1..];
    let loss: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, &t)| {
            let z = linear(x, theta[0], w);
            if t {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    loss / rows.len() as f64 + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

impl LogisticModel {
    /// Fits on already-standardised rows.
    pub fn fit(rows: &[Vec<f64>], y: &[bool], lambda: f64) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut theta = DVector::<f64>::zeros(p + 1);
        let mut current = objective(rows, y, &theta, lambda);
        for _ in 0..MAX_ITER {
            let mut grad = DVector::<f64>::zeros(p + 1);
            let mut hess = DMatrix::<f64>::zeros(p + 1, p + 1);
            for (x, &t) in rows.iter().zip(y) {
                let mu = sigmoid(linear(x, theta[0], &theta.as_slice()[1..]));
                let r = mu - if t { 1.0 } else { 0.0 };
                let s = mu * (1.0 - mu);
                let xi: Vec<f64> = std::iter::once(1.0).chain(x.iter().copied()).collect();
                for a in 0..=p {
                    grad[a] += r * xi[a];
                    for b in 0..=a {
                        hess[(a, b)] += s * xi[a] * xi[b];
                    }
                }
            }
            grad /= n;
            hess /= n;
            for a in 0..=p {
                for b in 0..a {
                    hess[(b, a)] = hess[(a, b)];
                }
            }
            for a in 1..=p {
                grad[a] += lambda * theta[a];
                hess[(a, a)] += lambda;
            }
            hess[(0, 0)] += 1e-12;
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    for a in 0..=p {
                        hess[(a, a)] += 1e-8;
                    }
                    match hess.cholesky() {
                        Some(ch) => ch.solve(&grad),
                        None => grad.clone(),
                    }
                }
            };
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let candidate = &theta - &step * t;
                let value = objective(rows, y, &candidate, lambda);
                if value <= current {
                    theta = candidate;
                    current = value;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved || step.amax() * t < TOLERANCE {
                break;
            }
        }
        LogisticModel {
            intercept: theta[0],
            weights: theta.as_slice()[1..].to_vec(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(linear(x, self.intercept, &self.weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn recovers_direction_of_effect() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i) / 10.0 - 2.0]).collect();
        let y: Vec<bool> = (0..40).map(|i| (i * 7) % 10 < (i / 4)).collect();
        let m = LogisticModel::fit(&rows, &y, 1e-3);
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let rows: Vec<Vec<f64>> = vec![
            vec![0.5, -1.0],
            vec![1.5, 0.0],
            vec![-0.5, 1.0],
            vec![-1.5, 0.5],
            vec![0.2, 0.3],
            vec![1.0, -0.2],
        ];
        let y = [true, true, false, false, true, false];
        let lambda = 0.1;
        let m = LogisticModel::fit(&rows, &y, lambda);
        let n = rows.len() as f64;
        let mut g = [0.0; 3];
        for (x, &t) in rows.iter().zip(&y) {
            let r = m.predict(x) - if t { 1.0 } else { 0.0 };
            g[0] += r / n;
            g[1] += r * x[0] / n;
            g[2] += r * x[1] / n;
        }
        g[1] += lambda * m.weights[0];
        g[2] += lambda * m.weights[1];
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }
}

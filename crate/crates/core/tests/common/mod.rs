//! Reference implementations used as test oracles. Each one is written
//! independently of the library code it checks: slower, simpler methods that
//! are easy to verify by reading.
#![allow(dead_code)]

use mvs_core::numerics::{standard_normal, DenseMatrix, RngStream};
use rand::Rng;

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn random_matrix(rng: &mut RngStream, n: usize, p: usize) -> DenseMatrix<f64> {
    DenseMatrix::new(n, p, standard_normal(rng, n * p)).unwrap()
}

/// Labels drawn from a logistic model with the given coefficients.
pub fn logistic_labels(rng: &mut RngStream, x: &DenseMatrix<f64>, b0: f64, beta: &[f64]) -> Vec<f64> {
    (0..x.rows())
        .map(|i| {
            let eta = b0 + x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            if rng.random::<f64>() < sigmoid(eta) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Mean logistic negative log-likelihood plus the elastic-net penalty,
/// computed term by term.
pub fn elastic_net_objective(x: &DenseMatrix<f64>, y: &[f64], lambda: f64, alpha: f64, b0: f64, beta: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mut nll = 0.0;
    for i in 0..x.rows() {
        let eta = b0 + x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        // log(1 + e^η) − yη, evaluated stably
        let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
        nll += softplus - y[i] * eta;
    }
    let pen: f64 = beta.iter().map(|b| 0.5 * (1.0 - alpha) * b * b + alpha * b.abs()).sum();
    nll / n + lambda * pen
}

/// Accelerated proximal gradient (FISTA with adaptive restart) on the
/// elastic-net logistic objective. The nonnegativity constraint is handled by
/// projecting inside the proximal step. Returns `(b0, beta, objective)`.
pub fn proximal_gradient_oracle(
    x: &DenseMatrix<f64>,
    y: &[f64],
    lambda: f64,
    alpha: f64,
    nonneg: bool,
) -> (f64, Vec<f64>, f64) {
    let (n, p) = (x.rows(), x.cols());
    // Lipschitz bound for the smooth part: ‖[1 X]‖_F² / (4n).
    let fro: f64 = n as f64 + x.as_slice().iter().map(|v| v * v).sum::<f64>();
    let step = 4.0 * n as f64 / fro;
    let prox = |v: f64| {
        let t = step * lambda * alpha;
        let s = if v > t {
            v - t
        } else if v < -t {
            v + t
        } else {
            0.0
        };
        let s = s / (1.0 + step * lambda * (1.0 - alpha));
        if nonneg {
            s.max(0.0)
        } else {
            s
        }
    };
    let mut theta = vec![0.0; p + 1];
    let mut mom = theta.clone();
    let mut t: f64 = 1.0;
    let mut f_prev = f64::INFINITY;
    for _ in 0..200_000 {
        let mut grad = vec![0.0; p + 1];
        for i in 0..n {
            let eta = mom[0] + x.row(i).iter().zip(&mom[1..]).map(|(a, b)| a * b).sum::<f64>();
            let r = sigmoid(eta) - y[i];
            grad[0] += r / n as f64;
            for j in 0..p {
                grad[j + 1] += r * x.get(i, j) / n as f64;
            }
        }
        let mut next = vec![0.0; p + 1];
        next[0] = mom[0] - step * grad[0];
        for j in 1..=p {
            next[j] = prox(mom[j] - step * grad[j]);
        }
        let f = elastic_net_objective(x, y, lambda, alpha, next[0], &next[1..]);
        let change = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if f > f_prev {
            // restart momentum
            t = 1.0;
            mom = theta.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        for j in 0..=p {
            mom[j] = next[j] + (t - 1.0) / t_next * (next[j] - theta[j]);
        }
        theta = next;
        t = t_next;
        f_prev = f;
        if change < 1e-13 {
            break;
        }
    }
    let f = elastic_net_objective(x, y, lambda, alpha, theta[0], &theta[1..]);
    (theta[0], theta[1..].to_vec(), f)
}

/// Largest violation of the optimality conditions of the elastic-net
/// logistic problem at `(b0, beta)`.
pub fn kkt_residual(x: &DenseMatrix<f64>, y: &[f64], lambda: f64, alpha: f64, nonneg: bool, b0: f64, beta: &[f64]) -> f64 {
    let (n, p) = (x.rows(), x.cols());
    let mut g = vec![0.0; p];
    let mut g0 = 0.0;
    for i in 0..n {
        let eta = b0 + x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        let r = sigmoid(eta) - y[i];
        g0 += r / n as f64;
        for j in 0..p {
            g[j] += r * x.get(i, j) / n as f64;
        }
    }
    let l1 = lambda * alpha;
    let mut worst = g0.abs();
    for j in 0..p {
        let gj = g[j] + lambda * (1.0 - alpha) * beta[j];
        let v = if beta[j] > 0.0 {
            (gj + l1).abs()
        } else if beta[j] < 0.0 {
            if nonneg {
                f64::INFINITY
            } else {
                (gj - l1).abs()
            }
        } else if nonneg {
            (-gj - l1).max(0.0)
        } else {
            (gj.abs() - l1).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

pub fn squared_error(z: &DenseMatrix<f64>, y: &[f64], beta: &[f64]) -> f64 {
    (0..z.rows())
        .map(|i| {
            let fit: f64 = z.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
            (y[i] - fit).powi(2)
        })
        .sum()
}

/// Exhaustive search over the 2-simplex at the given step.
pub fn simplex_grid_search(z: &DenseMatrix<f64>, y: &[f64], step: f64) -> (Vec<f64>, f64) {
    assert_eq!(z.cols(), 3);
    let k = (1.0 / step).round() as usize;
    let mut best = (vec![1.0, 0.0, 0.0], f64::INFINITY);
    for a in 0..=k {
        for b in 0..=k - a {
            let beta = vec![a as f64 / k as f64, b as f64 / k as f64, (k - a - b) as f64 / k as f64];
            let f = squared_error(z, y, &beta);
            if f < best.1 {
                best = (beta, f);
            }
        }
    }
    best
}

/// AUC by counting every (positive, negative) pair, ties one half.
pub fn pairwise_auc(y: &[f64], s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1.0 && y[j] == 0.0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

/// H measure by midpoint integration over the cost `c` on a fine grid,
/// minimizing the loss over every threshold directly.
pub fn h_measure_grid(y: &[f64], s: &[f64], a: f64, b: f64, steps: usize) -> f64 {
    let n = y.len() as f64;
    let n1 = y.iter().filter(|&&v| v == 1.0).count() as f64;
    let n0 = n - n1;
    let (pi0, pi1) = (n0 / n, n1 / n);
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    // (fpr, tpr) when predicting class 1 for score ≥ threshold
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let fp = y.iter().zip(s).filter(|(&yi, &si)| yi == 0.0 && si >= t).count() as f64;
            let tp = y.iter().zip(s).filter(|(&yi, &si)| yi == 1.0 && si >= t).count() as f64;
            (fp / n0, tp / n1)
        })
        .collect();
    let ln_beta = statrs::function::gamma::ln_gamma(a) + statrs::function::gamma::ln_gamma(b)
        - statrs::function::gamma::ln_gamma(a + b);
    let (mut loss, mut lmax) = (0.0, 0.0);
    let h = 1.0 / steps as f64;
    for k in 0..steps {
        let c = (k as f64 + 0.5) * h;
        let u = ((a - 1.0) * c.ln() + (b - 1.0) * (1.0 - c).ln() - ln_beta).exp();
        let best = points
            .iter()
            .map(|&(f, t)| c * pi0 * f + (1.0 - c) * pi1 * (1.0 - t))
            .fold(f64::INFINITY, f64::min);
        loss += best * u * h;
        lmax += (c * pi0).min((1.0 - c) * pi1) * u * h;
    }
    1.0 - loss / lmax
}

/// Labels with both classes present.
pub fn random_labels(rng: &mut RngStream, n: usize) -> Vec<f64> {
    loop {
        let y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        if y.iter().any(|&v| v == 1.0) && y.iter().any(|&v| v == 0.0) {
            return y;
        }
    }
}

use crate::error::Result;
use crate::numerics::{solve_linear, DenseMatrix};

use super::{check_meta_input, Diagnostics, MetaKind, MetaModel};

/// Coefficients below this value are zeroed after the simplex fit.
pub fn zeroing_threshold(v: usize) -> f64 {
    (1e-2 / v as f64).max(1e-8)
}

/// Least squares `min ‖y − Zβ‖²` over the probability simplex
/// (`β ≥ 0`, `Σβ = 1`) by a primal active-set method.
///
/// Returns the solution and the number of active-set changes.
pub fn simplex_least_squares(z: &DenseMatrix<f64>, y: &[f64]) -> (Vec<f64>, usize) {
    let v = z.cols();
    let n = z.rows();
    if v == 1 {
        return (vec![1.0], 0);
    }
    let mut q = vec![vec![0.0; v]; v];
    let mut c = vec![0.0; v];
    for i in 0..n {
        let row = z.row(i);
        for a in 0..v {
            c[a] += row[a] * y[i];
            for b in a..v {
                q[a][b] += row[a] * row[b];
            }
        }
    }
    for a in 0..v {
        for b in 0..a {
            q[a][b] = q[b][a];
        }
    }
    let scale = 1.0 + (0..v).map(|j| q[j][j]).fold(0.0, f64::max);
    let tol = 1e-11 * scale;
    let ridge = 1e-13 * scale;

    // Start from the best vertex.
    let vertex_obj = |j: usize| q[j][j] - 2.0 * c[j];
    let start = (0..v)
        .min_by(|&a, &b| vertex_obj(a).total_cmp(&vertex_obj(b)))
        .unwrap_or(0);
    let mut beta = vec![0.0; v];
    beta[start] = 1.0;
    let mut free = vec![false; v];
    free[start] = true;
    let mut changes = 0;

    for _ in 0..(20 * v + 100) {
        // Multipliers at the current face optimum.
        let grad: Vec<f64> = (0..v)
            .map(|j| (0..v).map(|k| q[j][k] * beta[k]).sum::<f64>() - c[j])
            .collect();
        let on: Vec<usize> = (0..v).filter(|&j| free[j]).collect();
        let mu = -on.iter().map(|&j| grad[j]).sum::<f64>() / on.len() as f64;
        let entering = (0..v)
            .filter(|&j| !free[j])
            .map(|j| (j, grad[j] + mu))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match entering {
            Some((j, nu)) if nu < -tol => {
                free[j] = true;
                changes += 1;
            }
            _ => break,
        }
        // Equality-constrained solves on the free set, stepping back to the
        // feasible region whenever a free coefficient turns nonpositive.
        loop {
            let on: Vec<usize> = (0..v).filter(|&j| free[j]).collect();
            let s = face_solution(&q, &c, &on, ridge);
            if s.iter().all(|&x| x > 0.0) {
                beta = vec![0.0; v];
                for (&j, &x) in on.iter().zip(&s) {
                    beta[j] = x;
                }
                break;
            }
            let mut step = 1.0;
            for (&j, &x) in on.iter().zip(&s) {
                if x <= 0.0 {
                    let d = beta[j] - x;
                    if d > 0.0 {
                        step = f64::min(step, beta[j] / d);
                    }
                }
            }
            for (&j, &x) in on.iter().zip(&s) {
                beta[j] += step * (x - beta[j]);
            }
            for &j in &on {
                if beta[j] <= 1e-15 {
                    beta[j] = 0.0;
                    free[j] = false;
                    changes += 1;
                }
            }
            let total: f64 = beta.iter().sum();
            beta.iter_mut().for_each(|b| *b /= total);
            if !free.iter().any(|&f| f) {
                break;
            }
        }
    }
    (beta, changes)
}

/// Solves the KKT system `[Q_PP 1; 1ᵀ 0][s; μ] = [c_P; 1]`.
fn face_solution(q: &[Vec<f64>], c: &[f64], on: &[usize], ridge: f64) -> Vec<f64> {
    let p = on.len();
    let mut a = Vec::with_capacity((p + 1) * (p + 1));
    for &j in on {
        for &k in on {
            a.push(q[j][k] + if j == k { ridge } else { 0.0 });
        }
        a.push(1.0);
    }
    a.extend(std::iter::repeat(1.0).take(p));
    a.push(0.0);
    let mut rhs: Vec<f64> = on.iter().map(|&j| c[j]).collect();
    rhs.push(1.0);
    let m = DenseMatrix::new(p + 1, p + 1, a).expect("finite KKT system");
    match solve_linear(&m, &rhs) {
        Some(sol) => sol[..p].to_vec(),
        None => vec![1.0 / p as f64; p],
    }
}

fn squared_error(z: &DenseMatrix<f64>, y: &[f64], beta: &[f64]) -> f64 {
    (0..z.rows())
        .map(|i| {
            let fit: f64 = z.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
            (y[i] - fit).powi(2)
        })
        .sum()
}

/// Simplex-constrained least squares combiner without intercept. Small
/// coefficients are zeroed and the rest renormalized to sum to one.
pub fn fit_interpolating_predictor(z: &DenseMatrix<f64>, y: &[f64]) -> Result<MetaModel> {
    check_meta_input(z, y)?;
    let (raw, iterations) = simplex_least_squares(z, y);
    let objective = squared_error(z, y, &raw);
    let threshold = zeroing_threshold(z.cols());
    let mut coef: Vec<f64> = raw.iter().map(|&b| if b < threshold { 0.0 } else { b }).collect();
    let total: f64 = coef.iter().sum();
    if total > 0.0 {
        coef.iter_mut().for_each(|b| *b /= total);
    } else {
        coef = raw.clone();
    }
    Ok(MetaModel::new(
        MetaKind::Interpolating,
        None,
        coef,
        Diagnostics::Interpolating { raw_coefficients: raw, objective, threshold, iterations },
    ))
}
